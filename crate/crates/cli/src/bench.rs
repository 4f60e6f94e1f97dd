//! Bundled benchmark instances used by the verification suites and the
//! acceptance tests.
//!
//! Two affine d=2 benchmarks are pinned:
//!
//! - the *equilibrium* benchmark is well conditioned (posterior precision
//!   eigenvalues ~53 and ~79) so a 2e5-step chain has enough effective
//!   samples to pin the posterior mean to a few hundredths of a standard
//!   deviation;
//! - the *diversity* benchmark observes only the first coordinate, leaving
//!   one slow direction whose explored extent grows with the step size. A
//!   well-conditioned instance equilibrates at every stable step size and
//!   shows no step-size trend, so it cannot serve double duty.

use latentwalk_core::forward::{ForwardOperator, LikelihoodModel, Measurement};
use latentwalk_core::grid::{normal_pdf, DensityGrid};
use latentwalk_core::linalg::Matrix;
use latentwalk_core::map::{random_mlp, GenerativeMap};
use latentwalk_core::oracle::{gaussian_posterior_closed_form, GaussianPosterior};
use latentwalk_core::sampler::{SamplerConfig, Scheme};
use latentwalk_core::CounterRng;

/// Measurement for the equilibrium benchmark: `Φ(z) = M z + b` with
/// `M = [[2, 0.4], [0, 2]]`, `b = (0.1, -0.2)`, identity `𝒜`,
/// `y = (0.8, -0.4)`, `σ = 0.25`.
pub fn equilibrium_instance() -> (GenerativeMap, LikelihoodModel, GaussianPosterior) {
    let m = Matrix::new(2, 2, vec![2.0, 0.4, 0.0, 2.0]).unwrap();
    let b = vec![0.1, -0.2];
    let y = vec![0.8, -0.4];
    let sigma = 0.25;
    let map = GenerativeMap::affine(m.clone(), b.clone()).unwrap();
    let op = ForwardOperator::inpaint(vec![true, true]).unwrap();
    let lik = LikelihoodModel::new(op, Measurement::new(y.clone(), sigma).unwrap()).unwrap();
    let posterior =
        gaussian_posterior_closed_form(&m, &b, &Matrix::identity(2), &y, sigma).unwrap();
    (map, lik, posterior)
}

/// Chain settings for the equilibrium benchmark: τ = 1e-3, N = 2e5 steps,
/// K = 500 warm-start steps, burn-in 5e4, no thinning.
pub fn equilibrium_config(scheme: Scheme, seed: u64) -> SamplerConfig {
    SamplerConfig {
        tau: 1e-3,
        n_steps: 200_000,
        warm_steps: 500,
        burn_in: 50_000,
        thinning: 1,
        scheme,
        seed,
        ..SamplerConfig::default()
    }
}

/// Diversity benchmark: identity map, `𝒜` observes only the first
/// coordinate (mask `(1, 0)`), `y = (0.5, 0)`, `σ = 0.1`. The unobserved
/// coordinate mixes at the prior rate, so the explored extent depends on
/// `τ · N`.
pub fn diversity_instance() -> (GenerativeMap, LikelihoodModel) {
    let map = GenerativeMap::identity(2);
    let op = ForwardOperator::inpaint(vec![true, false]).unwrap();
    let lik =
        LikelihoodModel::new(op, Measurement::new(vec![0.5, 0.0], 0.1).unwrap()).unwrap();
    (map, lik)
}

/// Chain settings for the diversity benchmark at step size `tau`.
pub fn diversity_config(tau: f64, seed: u64) -> SamplerConfig {
    SamplerConfig {
        tau,
        n_steps: 2000,
        warm_steps: 300,
        burn_in: 500,
        thinning: 10,
        scheme: Scheme::Em,
        seed,
        ..SamplerConfig::default()
    }
}

/// Nonlinear 1-D instance for the drift–score identity check: a seeded tanh
/// MLP map with identity observation.
pub fn drift_score_instance() -> (GenerativeMap, LikelihoodModel) {
    let map = random_mlp(1, 12).unwrap();
    let op = ForwardOperator::inpaint(vec![true]).unwrap();
    let lik = LikelihoodModel::new(op, Measurement::new(vec![0.3], 0.5).unwrap()).unwrap();
    (map, lik)
}

/// A randomized 1-D theorem instance: a Gaussian-mixture data prior, a
/// perturbed model prior, and a Gaussian likelihood. Returns
/// `(p_data, model_prior, y, likelihood_std)` on a shared grid.
pub fn theorem_instance(seed: u64) -> (DensityGrid, DensityGrid, f64, f64) {
    let mut rng = CounterRng::new(seed, 0x7468_6d31); // "thm1"
    let m1 = 3.0 * (rng.next_f64() - 0.5);
    let m2 = 3.0 * (rng.next_f64() - 0.5);
    let w = 0.2 + 0.6 * rng.next_f64();
    let s1 = 0.4 + rng.next_f64();
    let s2 = 0.4 + rng.next_f64();
    let p_data = DensityGrid::tabulate(&[-16.0], &[16.0], &[4001], |x| {
        w * normal_pdf(x[0], m1, s1) + (1.0 - w) * normal_pdf(x[0], m2, s2)
    })
    .unwrap();
    // Model prior: the same mixture with perturbed locations and scales.
    let dm1 = 0.4 * rng.next_normal();
    let dm2 = 0.4 * rng.next_normal();
    let model = DensityGrid::tabulate(&[-16.0], &[16.0], &[4001], |x| {
        w * normal_pdf(x[0], m1 + dm1, s1 * 1.15) + (1.0 - w) * normal_pdf(x[0], m2 + dm2, s2)
    })
    .unwrap();
    let y = 2.0 * rng.next_normal();
    let lik_std = 0.3 + rng.next_f64();
    (p_data, model, y, lik_std)
}

/// The DPI test cases: pairs of gridded densities with a push map each.
/// Includes the `|x|` case whose pushforwards coincide by symmetry.
pub fn dpi_cases() -> Vec<(DensityGrid, DensityGrid, fn(f64) -> f64, &'static str)> {
    fn grid(mean: f64, std: f64) -> DensityGrid {
        DensityGrid::tabulate(&[-14.0], &[14.0], &[4001], |x| normal_pdf(x[0], mean, std))
            .unwrap()
    }
    fn identity(x: f64) -> f64 {
        x
    }
    fn absolute(x: f64) -> f64 {
        x.abs()
    }
    fn square(x: f64) -> f64 {
        x * x
    }
    fn squash(x: f64) -> f64 {
        x.tanh()
    }
    fn clip(x: f64) -> f64 {
        (2.0 * x).clamp(-1.0, 1.0)
    }

    let mut cases: Vec<(DensityGrid, DensityGrid, fn(f64) -> f64, &'static str)> = vec![
        (grid(1.0, 1.0), grid(-1.0, 1.0), absolute, "abs/symmetric"),
        (grid(1.0, 1.0), grid(-1.0, 1.0), identity, "identity"),
        (grid(0.0, 1.0), grid(0.0, 1.0), square, "equal densities"),
    ];
    let mut rng = CounterRng::new(0x6470_6932, 0); // "dpi2"
    let maps: [(fn(f64) -> f64, &'static str); 5] = [
        (identity, "identity"),
        (absolute, "abs"),
        (square, "square"),
        (squash, "tanh"),
        (clip, "clip"),
    ];
    for i in 0..17 {
        let m1 = 2.0 * rng.next_normal();
        let m2 = 2.0 * rng.next_normal();
        let s1 = 0.5 + rng.next_f64();
        let s2 = 0.5 + rng.next_f64();
        let (phi, name) = maps[i % maps.len()];
        cases.push((grid(m1, s1), grid(m2, s2), phi, name));
    }
    cases
}

/// A 1-D corollary instance: affine model map `Φ(z) = m z + c`, identity
/// observation, and a mixture data prior that the model prior only
/// approximates. Returns `(map, lik, p_data_grid, axis_lo, axis_hi)`.
pub fn corollary_instance(seed: u64) -> (GenerativeMap, LikelihoodModel, DensityGrid, f64, f64) {
    let mut rng = CounterRng::new(seed, 0x636f_7231); // "cor1"
    let m = 0.8 + 0.4 * rng.next_f64();
    let c = 0.3 * rng.next_normal();
    let map = GenerativeMap::affine(Matrix::new(1, 1, vec![m]).unwrap(), vec![c]).unwrap();
    let y = c + m * rng.next_normal() * 0.5;
    let sigma = 0.4 + 0.3 * rng.next_f64();
    let op = ForwardOperator::inpaint(vec![true]).unwrap();
    let lik = LikelihoodModel::new(op, Measurement::new(vec![y], sigma).unwrap()).unwrap();
    // Data prior: model prior N(c, m²) contaminated with a second mode.
    let w = 0.15 + 0.2 * rng.next_f64();
    let shift = 1.0 + rng.next_f64();
    let (lo, hi) = (-16.0, 16.0);
    let p_data = DensityGrid::tabulate(&[lo], &[hi], &[4001], |x| {
        (1.0 - w) * normal_pdf(x[0], c, m) + w * normal_pdf(x[0], c + shift, 0.6 * m)
    })
    .unwrap();
    (map, lik, p_data, lo, hi)
}
