//! Posterior sampling in the noise space of a deterministic generative map.
//!
//! The crate provides the numerical building blocks for sampling a data
//! posterior `p(x0 | y)` by running Langevin dynamics on the latent input
//! `x1` of a differentiable map `x0 = Φ(x1)` with standard-normal prior:
//!
//! - [`map`]: generative maps `Φ` (affine, tanh MLP, fixed-noise two-step
//!   composition) with exact vector–Jacobian pullbacks,
//! - [`forward`]: measurement operators `𝒜` with adjoints/subgradients, the
//!   Gaussian negative log-likelihood, and the chain-rule gradient in noise
//!   space,
//! - [`sampler`]: Adam warm-start plus Euler–Maruyama and exponential
//!   integrator discretizations of the noise-space Langevin SDE, with exact
//!   NFE accounting,
//! - [`grid`] and [`oracle`]: trapezoid-quadrature densities, total-variation
//!   distance, closed-form Gaussian posteriors, the posterior condition
//!   number, and numerical checks of the TV and data-processing bounds,
//! - [`metrics`]: PSNR, cluster-ratio diversity score, and average pairwise
//!   cosine similarity over sample sets,
//! - [`rng`]: a counter-based random number generator for reproducible,
//!   embarrassingly parallel streams.
//!
//! The crate is `no_std`-compatible (allocation required): disable the
//! default `std` feature and enable `libm` for the float math fallback.
//! File formats, configuration, and the command-line front end live in the
//! companion `latentwalk-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("latentwalk-core needs either the `std` feature or the `libm` feature");

pub mod error;
pub mod forward;
pub mod grid;
pub mod linalg;
pub mod map;
pub(crate) mod math;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod vector;

pub use error::{Error, Result};
pub use forward::{ForwardOperator, LikelihoodModel, Measurement};
pub use grid::DensityGrid;
pub use map::GenerativeMap;
pub use rng::CounterRng;
pub use sampler::{RunReport, SamplerConfig, Scheme};
pub use vector::{Cotangent, DataVector, NoiseVector};
