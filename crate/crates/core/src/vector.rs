//! Domain vector newtypes.
//!
//! `NoiseVector` lives in the latent (noise) space, `DataVector` in the data
//! space, and `Cotangent` carries the adjoint direction fed to a pullback.
//! All three wrap a `Vec<f64>` of the same dimension `d`; the distinction is
//! purely which space a value belongs to.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

macro_rules! vector_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            pub values: Vec<f64>,
        }

        impl $name {
            /// Validating constructor: requires at least one entry, all finite.
            pub fn new(values: Vec<f64>) -> Result<Self> {
                if values.is_empty() {
                    return Err(Error::InvalidArgument {
                        context: stringify!($name),
                        detail: "length must be at least 1".into(),
                    });
                }
                if !math::all_finite(&values) {
                    return Err(Error::NonFinite {
                        context: stringify!($name),
                    });
                }
                Ok(Self { values })
            }

            pub fn zeros(dim: usize) -> Self {
                Self {
                    values: vec![0.0; dim],
                }
            }

            pub fn dim(&self) -> usize {
                self.values.len()
            }

            pub fn as_slice(&self) -> &[f64] {
                &self.values
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(values: Vec<f64>) -> Self {
                Self { values }
            }
        }
    };
}

vector_newtype!(
    /// A point in the noise space (the latent input of the generative map).
    NoiseVector
);
vector_newtype!(
    /// A point in the data space; image tasks read entries as pixels in [-1, 1].
    DataVector
);
vector_newtype!(
    /// An adjoint direction contracted against a Jacobian in a pullback.
    Cotangent
);
