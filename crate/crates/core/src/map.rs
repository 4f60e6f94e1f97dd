//! Deterministic, differentiable noise-to-data maps with exact pullbacks.
//!
//! Three map families stand in for a distilled generative model at desk
//! scale: affine maps, tanh MLPs (smooth everywhere), and a two-step
//! composition that renoises with an intermediate draw fixed at construction,
//! mirroring deterministic multistep sampling. Maps are immutable, total, and
//! pure; `apply` and `pullback` are bit-reproducible.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::math;
use crate::rng::CounterRng;
use crate::vector::{Cotangent, DataVector, NoiseVector};

/// Stream id used to draw the fixed intermediate noise of a two-step map.
const TWO_STEP_STREAM: u64 = 0x7477_6f73_7465_7000; // "twostep\0"

/// One dense layer of a tanh MLP.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// A deterministic, differentiable map from noise space to data space.
#[derive(Debug, Clone, PartialEq)]
pub enum GenerativeMap {
    /// `x0 = M x1 + b`.
    Affine { matrix: Matrix, offset: Vec<f64> },
    /// `h_{k+1} = tanh(W_k h_k + b_k)` through every layer.
    Mlp { layers: Vec<MlpLayer> },
    /// `x0 = inner(mix * inner(x1) + sqrt(1 - mix^2) * z)` with `z` drawn
    /// once at construction and stored.
    TwoStep {
        inner: Box<GenerativeMap>,
        intermediate: Vec<f64>,
        mix: f64,
        seed: u64,
    },
}

impl GenerativeMap {
    pub fn affine(matrix: Matrix, offset: Vec<f64>) -> Result<Self> {
        if matrix.rows != matrix.cols {
            return Err(Error::InvalidArgument {
                context: "GenerativeMap::affine",
                detail: "matrix must be square (the map sends R^d to R^d)".into(),
            });
        }
        check_dim("GenerativeMap::affine offset", matrix.rows, offset.len())?;
        Ok(GenerativeMap::Affine { matrix, offset })
    }

    /// The identity map on `R^d`.
    pub fn identity(dim: usize) -> Self {
        GenerativeMap::Affine {
            matrix: Matrix::identity(dim),
            offset: vec![0.0; dim],
        }
    }

    /// A tanh MLP; consecutive layer shapes must chain and the composition
    /// must map `R^d` back to `R^d`.
    pub fn mlp(layers: Vec<MlpLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument {
                context: "GenerativeMap::mlp",
                detail: "at least one layer required".into(),
            });
        }
        for layer in &layers {
            check_dim("GenerativeMap::mlp bias", layer.weights.rows, layer.bias.len())?;
        }
        for pair in layers.windows(2) {
            check_dim(
                "GenerativeMap::mlp layer chain",
                pair[0].weights.rows,
                pair[1].weights.cols,
            )?;
        }
        let d_in = layers[0].weights.cols;
        let d_out = layers[layers.len() - 1].weights.rows;
        check_dim("GenerativeMap::mlp output", d_in, d_out)?;
        Ok(GenerativeMap::Mlp { layers })
    }

    /// Builds the two-step composition around `inner` (affine or mlp). The
    /// intermediate noise is drawn once from `(seed, fixed stream)` and never
    /// resampled, so the map is deterministic.
    pub fn two_step(inner: GenerativeMap, seed: u64, mix: f64) -> Result<Self> {
        if matches!(inner, GenerativeMap::TwoStep { .. }) {
            return Err(Error::InvalidArgument {
                context: "GenerativeMap::two_step",
                detail: "inner map must be affine or mlp".into(),
            });
        }
        if !(mix > 0.0 && mix < 1.0) {
            return Err(Error::InvalidArgument {
                context: "GenerativeMap::two_step",
                detail: alloc::format!("mix must lie in (0, 1), got {mix}"),
            });
        }
        let dim = inner.dim();
        let mut rng = CounterRng::new(seed, TWO_STEP_STREAM);
        let intermediate = rng.normal_vec(dim);
        Ok(GenerativeMap::TwoStep {
            inner: Box::new(inner),
            intermediate,
            mix,
            seed,
        })
    }

    /// Dimension `d` of both the noise and data spaces.
    pub fn dim(&self) -> usize {
        match self {
            GenerativeMap::Affine { matrix, .. } => matrix.rows,
            GenerativeMap::Mlp { layers } => layers[0].weights.cols,
            GenerativeMap::TwoStep { inner, .. } => inner.dim(),
        }
    }

    /// Function evaluations charged per forward pass: 1, except 2 for the
    /// two-step composition.
    pub fn nfe_per_eval(&self) -> u64 {
        match self {
            GenerativeMap::TwoStep { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            GenerativeMap::Affine { .. } => "affine",
            GenerativeMap::Mlp { .. } => "mlp",
            GenerativeMap::TwoStep { .. } => "two_step",
        }
    }

    /// Evaluates `Φ(x1)`.
    pub fn apply(&self, x1: &NoiseVector) -> Result<DataVector> {
        check_dim("apply_map", self.dim(), x1.dim())?;
        Ok(DataVector::from(self.apply_slice(x1.as_slice())))
    }

    /// Evaluates `Jᵀ v` where `J` is the Jacobian of `Φ` at `x1`; exact for
    /// every built-in map.
    pub fn pullback(&self, x1: &NoiseVector, v: &Cotangent) -> Result<NoiseVector> {
        check_dim("pullback_map input", self.dim(), x1.dim())?;
        check_dim("pullback_map cotangent", self.dim(), v.dim())?;
        Ok(NoiseVector::from(
            self.pullback_slice(x1.as_slice(), v.as_slice()),
        ))
    }

    /// Relative error between the analytic pullback and a central
    /// finite-difference estimate of `Jᵀ v` with step `h`.
    pub fn check_pullback_fd(&self, x1: &NoiseVector, v: &Cotangent, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument {
                context: "check_pullback_fd",
                detail: String::from("step h must be positive"),
            });
        }
        check_dim("check_pullback_fd input", self.dim(), x1.dim())?;
        check_dim("check_pullback_fd cotangent", self.dim(), v.dim())?;
        let d = self.dim();
        let exact = self.pullback_slice(x1.as_slice(), v.as_slice());
        let mut fd = vec![0.0; d];
        let mut x = x1.values.clone();
        for j in 0..d {
            let orig = x[j];
            x[j] = orig + h;
            let plus = math::dot(v.as_slice(), &self.apply_slice(&x));
            x[j] = orig - h;
            let minus = math::dot(v.as_slice(), &self.apply_slice(&x));
            x[j] = orig;
            fd[j] = (plus - minus) / (2.0 * h);
        }
        let diff: Vec<f64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let scale = math::norm(&exact).max(math::norm(&fd)).max(1e-300);
        Ok(math::norm(&diff) / scale)
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match self {
            GenerativeMap::Affine { matrix, offset } => {
                let mut out = matrix.matvec(x);
                for (o, b) in out.iter_mut().zip(offset) {
                    *o += b;
                }
                out
            }
            GenerativeMap::Mlp { layers } => {
                let mut h = x.to_vec();
                for layer in layers {
                    h = layer_forward(layer, &h);
                }
                h
            }
            GenerativeMap::TwoStep {
                inner,
                intermediate,
                mix,
                ..
            } => {
                let first = inner.apply_slice(x);
                let s = math::sqrt(1.0 - mix * mix);
                let mid: Vec<f64> = first
                    .iter()
                    .zip(intermediate)
                    .map(|(f, z)| mix * f + s * z)
                    .collect();
                inner.apply_slice(&mid)
            }
        }
    }

    pub(crate) fn pullback_slice(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            GenerativeMap::Affine { matrix, .. } => matrix.matvec_t(v),
            GenerativeMap::Mlp { layers } => {
                // Forward pass caching post-activations per layer.
                let mut acts: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
                let mut h = x.to_vec();
                for layer in layers {
                    h = layer_forward(layer, &h);
                    acts.push(h.clone());
                }
                // Backward: u <- W_kᵀ (u ⊙ (1 - t_k²)).
                let mut u = v.to_vec();
                for (layer, t) in layers.iter().zip(&acts).rev() {
                    for (ui, ti) in u.iter_mut().zip(t) {
                        *ui *= 1.0 - ti * ti;
                    }
                    u = layer.weights.matvec_t(&u);
                }
                u
            }
            GenerativeMap::TwoStep {
                inner,
                intermediate,
                mix,
                ..
            } => {
                let first = inner.apply_slice(x);
                let s = math::sqrt(1.0 - mix * mix);
                let mid: Vec<f64> = first
                    .iter()
                    .zip(intermediate)
                    .map(|(f, z)| mix * f + s * z)
                    .collect();
                let w = inner.pullback_slice(&mid, v);
                let mut back = inner.pullback_slice(x, &w);
                for b in back.iter_mut() {
                    *b *= mix;
                }
                back
            }
        }
    }
}

fn layer_forward(layer: &MlpLayer, h: &[f64]) -> Vec<f64> {
    let mut out = layer.weights.matvec(h);
    for (o, b) in out.iter_mut().zip(&layer.bias) {
        *o = math::tanh(*o + b);
    }
    out
}

/// A seeded random tanh MLP with one square hidden layer; weights are scaled
/// by `1/sqrt(fan_in)` to keep activations unit-scale.
pub fn random_mlp(dim: usize, seed: u64) -> Result<GenerativeMap> {
    let mut rng = CounterRng::new(seed, 0x6d6c_7000); // "mlp\0"
    let scale = 1.0 / math::sqrt(dim as f64);
    let layer = |rng: &mut CounterRng| -> MlpLayer {
        let data: Vec<f64> = (0..dim * dim).map(|_| rng.next_normal() * scale).collect();
        let bias: Vec<f64> = (0..dim).map(|_| 0.1 * rng.next_normal()).collect();
        MlpLayer {
            weights: Matrix {
                rows: dim,
                cols: dim,
                data,
            },
            bias,
        }
    };
    let layers = vec![layer(&mut rng), layer(&mut rng)];
    GenerativeMap::mlp(layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nv(v: &[f64]) -> NoiseVector {
        NoiseVector::from(v.to_vec())
    }
    fn ct(v: &[f64]) -> Cotangent {
        Cotangent::from(v.to_vec())
    }

    #[test]
    fn affine_identity_applies() {
        let map = GenerativeMap::identity(2);
        let out = map.apply(&nv(&[0.3, -0.7])).unwrap();
        assert_eq!(out.values, vec![0.3, -0.7]);
    }

    #[test]
    fn affine_scale_and_offset() {
        let m = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let map = GenerativeMap::affine(m, vec![1.0, 0.0]).unwrap();
        let out = map.apply(&nv(&[1.0, 1.0])).unwrap();
        assert_eq!(out.values, vec![3.0, 2.0]);
    }

    #[test]
    fn mlp_zero_weights_gives_zero() {
        let layers = vec![MlpLayer {
            weights: Matrix::zeros(2, 2),
            bias: vec![0.0, 0.0],
        }];
        let map = GenerativeMap::mlp(layers).unwrap();
        let out = map.apply(&nv(&[5.0, -3.0])).unwrap();
        assert_eq!(out.values, vec![0.0, 0.0]);
    }

    #[test]
    fn affine_pullback_is_transpose() {
        let m = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 3.0]).unwrap();
        let map = GenerativeMap::affine(m, vec![0.0, 0.0]).unwrap();
        let out = map.pullback(&nv(&[0.4, 0.9]), &ct(&[1.0, 1.0])).unwrap();
        assert_eq!(out.values, vec![2.0, 3.0]);
        let id = GenerativeMap::identity(2);
        let out = id.pullback(&nv(&[0.0, 0.0]), &ct(&[5.0, -1.0])).unwrap();
        assert_eq!(out.values, vec![5.0, -1.0]);
    }

    #[test]
    fn mlp_identity_pullback_at_origin() {
        // tanh'(0) = 1, W = I: J = I at the origin.
        let layers = vec![MlpLayer {
            weights: Matrix::identity(2),
            bias: vec![0.0, 0.0],
        }];
        let map = GenerativeMap::mlp(layers).unwrap();
        let out = map.pullback(&nv(&[0.0, 0.0]), &ct(&[1.0, 0.0])).unwrap();
        assert_eq!(out.values, vec![1.0, 0.0]);
    }

    #[test]
    fn fd_check_affine_is_exact() {
        let m = Matrix::new(2, 2, vec![1.0, 0.5, -0.25, 2.0]).unwrap();
        let map = GenerativeMap::affine(m, vec![0.3, -0.1]).unwrap();
        let err = map
            .check_pullback_fd(&nv(&[0.2, -0.4]), &ct(&[1.0, -2.0]), 1e-5)
            .unwrap();
        assert!(err < 1e-8, "affine fd error {err}");
    }

    #[test]
    fn fd_check_mlp_and_two_step() {
        let mlp = random_mlp(3, 11).unwrap();
        let mut rng = CounterRng::from_seed(99);
        for _ in 0..20 {
            let x = nv(&rng.normal_vec(3));
            let v = ct(&rng.normal_vec(3));
            let err = mlp.check_pullback_fd(&x, &v, 1e-5).unwrap();
            assert!(err < 1e-5, "mlp fd error {err}");
        }
        let two = GenerativeMap::two_step(random_mlp(3, 11).unwrap(), 5, 0.7).unwrap();
        for _ in 0..20 {
            let x = nv(&rng.normal_vec(3));
            let v = ct(&rng.normal_vec(3));
            let err = two.check_pullback_fd(&x, &v, 1e-5).unwrap();
            assert!(err < 1e-5, "two_step fd error {err}");
        }
    }

    #[test]
    fn two_step_requires_simple_inner_and_open_mix() {
        let id = GenerativeMap::identity(2);
        assert!(GenerativeMap::two_step(id.clone(), 0, 1.0).is_err());
        assert!(GenerativeMap::two_step(id.clone(), 0, 0.0).is_err());
        let two = GenerativeMap::two_step(id.clone(), 0, 0.5).unwrap();
        assert!(GenerativeMap::two_step(two, 0, 0.5).is_err());
    }

    #[test]
    fn two_step_same_seed_same_intermediate() {
        let a = GenerativeMap::two_step(GenerativeMap::identity(4), 77, 0.6).unwrap();
        let b = GenerativeMap::two_step(GenerativeMap::identity(4), 77, 0.6).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.nfe_per_eval(), 2);
        assert_eq!(GenerativeMap::identity(4).nfe_per_eval(), 1);
    }

    #[test]
    fn two_step_identity_inner_near_mix_one() {
        // As mix -> 1 with identity inner, the composition approaches the identity.
        let map = GenerativeMap::two_step(GenerativeMap::identity(2), 3, 1.0 - 1e-12).unwrap();
        let x = nv(&[0.4, -1.2]);
        let out = map.apply(&x).unwrap();
        for (o, xi) in out.values.iter().zip(x.as_slice()) {
            assert!((o - xi).abs() < 1e-5, "got {o}, want {xi}");
        }
    }

    #[test]
    fn two_step_repeat_evaluations_bit_identical() {
        let map = GenerativeMap::two_step(random_mlp(3, 2).unwrap(), 9, 0.5).unwrap();
        let x = nv(&[0.2, -0.6, 1.1]);
        let first = map.apply(&x).unwrap();
        for _ in 0..100 {
            assert_eq!(map.apply(&x).unwrap(), first);
        }
    }

    #[test]
    fn dimension_mismatch_is_contract_violation() {
        let map = GenerativeMap::identity(2);
        assert!(matches!(
            map.apply(&nv(&[1.0, 2.0, 3.0])),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            map.pullback(&nv(&[1.0, 2.0]), &ct(&[1.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
