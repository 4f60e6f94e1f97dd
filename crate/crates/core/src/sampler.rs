//! Warm-start optimization and discretized Langevin dynamics in noise space.
//!
//! The target density is `exp(-||z||²/2 - L_y(Φ(z)))`, the noise-space
//! posterior. A chain draws `z⁰ ~ N(0, I)`, optionally runs `K` Adam steps on
//! `L_y(Φ(·))`, then simulates `N` steps of either the Euler–Maruyama (EM)
//! scheme
//!
//! ```text
//! z^{i+1} = (1 - τ) z^i - τ g^i + sqrt(2τ) ξ^i
//! ```
//!
//! or the exponential integrator (EI), which solves the linear drift exactly:
//!
//! ```text
//! z^{i+1} = e^{-τ} z^i - (1 - e^{-τ}) g^i + sqrt(1 - e^{-2τ}) ξ^i
//! ```
//!
//! Here `g^i = ∇_z L_y(Φ(z))|_{z^i}` and `ξ^i ~ N(0, I)` comes from the
//! chain's counter-based stream. Function-evaluation cost is reported as
//! `η·(K+N)` where `η` is the map's evaluations per forward pass; the single
//! gradient evaluation that seeds the chain state is not billed, matching the
//! per-step accounting.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::forward::LikelihoodModel;
use crate::map::GenerativeMap;
use crate::math;
use crate::rng::CounterRng;
use crate::vector::{DataVector, NoiseVector};

/// SDE discretization scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Euler–Maruyama.
    Em,
    /// Exponential integrator.
    Ei,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Em => "em",
            Scheme::Ei => "ei",
        }
    }
}

/// Configuration of one sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Langevin step size τ; must lie in (0, 1) for EM contraction.
    pub tau: f64,
    /// Number of Langevin steps N.
    pub n_steps: usize,
    /// Number of Adam warm-start steps K.
    pub warm_steps: usize,
    pub adam_lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub scheme: Scheme,
    pub seed: u64,
    /// Steps discarded before retention begins.
    pub burn_in: usize,
    /// Stride between retained steps.
    pub thinning: usize,
}

impl Default for SamplerConfig {
    /// Desk-scale defaults; Adam constants are the usual (0.9, 0.999).
    fn default() -> Self {
        SamplerConfig {
            tau: 1e-3,
            n_steps: 2000,
            warm_steps: 500,
            adam_lr: 5e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            scheme: Scheme::Em,
            seed: 0,
            burn_in: 500,
            thinning: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Error::InvalidArgument {
            context: "SamplerConfig",
            detail,
        };
        match self.scheme {
            Scheme::Em => {
                if !(self.tau > 0.0 && self.tau < 1.0) {
                    return Err(bad(alloc::format!(
                        "tau must lie in (0, 1) for the em scheme, got {}",
                        self.tau
                    )));
                }
            }
            Scheme::Ei => {
                if !(self.tau > 0.0) || !self.tau.is_finite() {
                    return Err(bad(alloc::format!(
                        "tau must be positive for the ei scheme, got {}",
                        self.tau
                    )));
                }
            }
        }
        if self.n_steps == 0 {
            return Err(bad(String::from("n_steps must be positive")));
        }
        if self.burn_in >= self.n_steps {
            return Err(bad(alloc::format!(
                "burn_in {} must be smaller than n_steps {}",
                self.burn_in,
                self.n_steps
            )));
        }
        if self.thinning == 0 {
            return Err(bad(String::from("thinning must be positive")));
        }
        if !(self.adam_lr > 0.0) {
            return Err(bad(String::from("adam_lr must be positive")));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(bad(alloc::format!("{name} must lie in (0, 1), got {beta}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(bad(String::from("adam_eps must be positive")));
        }
        Ok(())
    }

    /// Steps retained by the burn-in/thinning rule.
    pub fn retained_count(&self) -> usize {
        let kept = self.n_steps - self.burn_in;
        kept.div_ceil(self.thinning)
    }
}

/// The evolving state of a single Langevin chain.
#[derive(Debug, Clone)]
pub struct LangevinState {
    /// Current iterate `z^i`.
    pub z: NoiseVector,
    /// Gradient of the data-fit loss at `z` (valid whenever `step > 0`).
    pub g: NoiseVector,
    /// Cached forward value `Φ(z)` from the same gradient evaluation.
    pub x0: DataVector,
    /// Cached loss `L_y(Φ(z))`.
    pub loss: f64,
    /// Step counter `i`.
    pub step: usize,
    /// Counter-based noise stream for `ξ^i`.
    pub rng: CounterRng,
}

impl LangevinState {
    /// Seeds the state at `z0`, evaluating the gradient cache once.
    pub fn init(
        map: &GenerativeMap,
        lik: &LikelihoodModel,
        z0: NoiseVector,
        rng: CounterRng,
    ) -> Result<Self> {
        check_dim("LangevinState::init", map.dim(), z0.dim())?;
        let eval = lik.grad_eval(map, z0.as_slice())?;
        if !eval.loss.is_finite() || !math::all_finite(&eval.grad) {
            return Err(Error::Divergence { step: 0 });
        }
        Ok(LangevinState {
            z: z0,
            g: NoiseVector::from(eval.grad),
            x0: DataVector::from(eval.x0),
            loss: eval.loss,
            step: 0,
            rng,
        })
    }
}

/// The EM update arithmetic with explicit noise, exposed so the scheme can be
/// checked to machine precision against hand-set `(z, g, τ, ξ)`.
pub fn em_update(z: &[f64], g: &[f64], tau: f64, xi: &[f64]) -> Vec<f64> {
    let noise_scale = math::sqrt(2.0 * tau);
    z.iter()
        .zip(g)
        .zip(xi)
        .map(|((zi, gi), xii)| (1.0 - tau) * zi - tau * gi + noise_scale * xii)
        .collect()
}

/// The EI update arithmetic with explicit noise.
pub fn ei_update(z: &[f64], g: &[f64], tau: f64, xi: &[f64]) -> Vec<f64> {
    let decay = math::exp(-tau);
    let drift = 1.0 - decay;
    let noise_scale = math::sqrt(1.0 - math::exp(-2.0 * tau));
    z.iter()
        .zip(g)
        .zip(xi)
        .map(|((zi, gi), xii)| decay * zi - drift * gi + noise_scale * xii)
        .collect()
}

fn step_impl(
    mut state: LangevinState,
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    tau: f64,
    scheme: Scheme,
) -> Result<LangevinState> {
    match scheme {
        Scheme::Em => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidArgument {
                    context: "em_step",
                    detail: alloc::format!("tau must lie in (0, 1), got {tau}"),
                });
            }
        }
        Scheme::Ei => {
            if !(tau > 0.0) || !tau.is_finite() {
                return Err(Error::InvalidArgument {
                    context: "ei_step",
                    detail: alloc::format!("tau must be positive, got {tau}"),
                });
            }
        }
    }
    let xi = state.rng.normal_vec(state.z.dim());
    let z_new = match scheme {
        Scheme::Em => em_update(state.z.as_slice(), state.g.as_slice(), tau, &xi),
        Scheme::Ei => ei_update(state.z.as_slice(), state.g.as_slice(), tau, &xi),
    };
    let next_step = state.step + 1;
    if !math::all_finite(&z_new) {
        return Err(Error::Divergence { step: next_step });
    }
    let eval = lik.grad_eval(map, &z_new)?;
    if !eval.loss.is_finite() || !math::all_finite(&eval.grad) {
        return Err(Error::Divergence { step: next_step });
    }
    state.z = NoiseVector::from(z_new);
    state.g = NoiseVector::from(eval.grad);
    state.x0 = DataVector::from(eval.x0);
    state.loss = eval.loss;
    state.step = next_step;
    Ok(state)
}

/// One Euler–Maruyama step: uses the cached gradient, draws `ξ` from the
/// state's stream, then refreshes the gradient cache at the new iterate
/// (one gradient evaluation).
pub fn em_step(
    state: LangevinState,
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    tau: f64,
) -> Result<LangevinState> {
    step_impl(state, lik, map, tau, Scheme::Em)
}

/// One exponential-integrator step; bookkeeping as in [`em_step`].
pub fn ei_step(
    state: LangevinState,
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    tau: f64,
) -> Result<LangevinState> {
    step_impl(state, lik, map, tau, Scheme::Ei)
}

/// `K` bias-corrected Adam steps minimizing `L_y(Φ(·))` from `z0`; returns
/// the final iterate. Consumes exactly `K` gradient evaluations.
pub fn adam_warm_start(
    z0: &NoiseVector,
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    cfg: &SamplerConfig,
) -> Result<NoiseVector> {
    Ok(adam_warm_start_traced(z0, lik, map, cfg)?.0)
}

/// As [`adam_warm_start`], also returning the loss observed at each iterate
/// before its update (length `K`).
pub fn adam_warm_start_traced(
    z0: &NoiseVector,
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    cfg: &SamplerConfig,
) -> Result<(NoiseVector, Vec<f64>)> {
    check_dim("adam_warm_start", map.dim(), z0.dim())?;
    let d = z0.dim();
    let mut z = z0.values.clone();
    let mut m = alloc::vec![0.0; d];
    let mut v = alloc::vec![0.0; d];
    let mut trace = Vec::with_capacity(cfg.warm_steps);
    for k in 1..=cfg.warm_steps {
        let eval = lik.grad_eval(map, &z)?;
        if !eval.loss.is_finite() || !math::all_finite(&eval.grad) {
            return Err(Error::Divergence { step: k });
        }
        trace.push(eval.loss);
        let bc1 = 1.0 - math::powf(cfg.adam_beta1, k as f64);
        let bc2 = 1.0 - math::powf(cfg.adam_beta2, k as f64);
        for i in 0..d {
            let gi = eval.grad[i];
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * gi;
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            z[i] -= cfg.adam_lr * m_hat / (math::sqrt(v_hat) + cfg.adam_eps);
        }
        if !math::all_finite(&z) {
            return Err(Error::Divergence { step: k });
        }
    }
    Ok((NoiseVector::from(z), trace))
}

/// Persisted record of one sampling run.
#[derive(Debug, Clone)]
pub struct RunReport {
    /// Retained data-space samples `Φ(z^i)`.
    pub samples: Vec<DataVector>,
    /// Noise-space iterates matching `samples` (always populated here).
    pub noise_trace: Option<Vec<NoiseVector>>,
    /// Chain step index of each retained sample.
    pub retained_steps: Vec<usize>,
    /// `η·(K+N)` exactly.
    pub nfe_total: u64,
    /// `nfe_total / samples.len()`; NaN when nothing was retained.
    pub nfe_per_sample: f64,
    pub config: SamplerConfig,
    /// Filled when the `std` feature is enabled, otherwise 0.
    pub wall_time_seconds: f64,
}

impl RunReport {
    pub fn data_rows(&self) -> Vec<&[f64]> {
        self.samples.iter().map(|s| s.as_slice()).collect()
    }

    pub fn noise_rows(&self) -> Option<Vec<&[f64]>> {
        self.noise_trace
            .as_ref()
            .map(|t| t.iter().map(|s| s.as_slice()).collect())
    }
}

/// Which phase of a run a divergence occurred in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainPhase {
    WarmStart,
    Chain,
}

/// Failure of [`run_chain`]; divergence carries the partial trace.
#[derive(Debug, Clone)]
pub enum ChainError {
    Contract(Error),
    Diverged {
        phase: ChainPhase,
        step: usize,
        partial: Box<RunReport>,
    },
}

impl core::fmt::Display for ChainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ChainError::Contract(e) => write!(f, "{e}"),
            ChainError::Diverged { phase, step, .. } => {
                let phase = match phase {
                    ChainPhase::WarmStart => "warm-start",
                    ChainPhase::Chain => "chain",
                };
                write!(f, "divergence during {phase} at step {step}")
            }
        }
    }
}

impl core::error::Error for ChainError {}

impl From<Error> for ChainError {
    fn from(e: Error) -> Self {
        ChainError::Contract(e)
    }
}

fn retain_step(cfg: &SamplerConfig, i: usize) -> bool {
    i > cfg.burn_in && (i - cfg.burn_in - 1) % cfg.thinning == 0
}

/// Runs the full pipeline: draw `z⁰ ~ N(0, I)` from the seed, warm-start,
/// simulate `N` steps of the configured scheme, and retain `Φ(z^i)` after
/// burn-in at the thinning stride. Deterministic for a fixed seed.
pub fn run_chain(
    map: &GenerativeMap,
    lik: &LikelihoodModel,
    cfg: &SamplerConfig,
) -> core::result::Result<RunReport, ChainError> {
    cfg.validate()?;
    check_dim("run_chain", map.dim(), lik.operator.in_dim())?;
    #[cfg(feature = "std")]
    let elapsed = {
        let started = std::time::Instant::now();
        move || started.elapsed().as_secs_f64()
    };
    #[cfg(not(feature = "std"))]
    let elapsed = || 0.0_f64;

    let d = map.dim();
    let eta = map.nfe_per_eval();
    let nfe_total = eta * (cfg.warm_steps as u64 + cfg.n_steps as u64);
    let mut rng = CounterRng::new(cfg.seed, 0);
    let z_init = NoiseVector::from(rng.normal_vec(d));

    let mut samples: Vec<DataVector> = Vec::with_capacity(cfg.retained_count());
    let mut noise: Vec<NoiseVector> = Vec::with_capacity(cfg.retained_count());
    let mut retained_steps: Vec<usize> = Vec::with_capacity(cfg.retained_count());

    let make_report = |samples: Vec<DataVector>,
                       noise: Vec<NoiseVector>,
                       retained_steps: Vec<usize>| {
        let n = samples.len();
        RunReport {
            samples,
            noise_trace: Some(noise),
            retained_steps,
            nfe_total,
            nfe_per_sample: if n > 0 {
                nfe_total as f64 / n as f64
            } else {
                f64::NAN
            },
            config: cfg.clone(),
            wall_time_seconds: 0.0,
        }
    };
    let diverged = |phase, step, mut report: RunReport| {
        report.wall_time_seconds = elapsed();
        ChainError::Diverged {
            phase,
            step,
            partial: Box::new(report),
        }
    };

    let z_warm = match adam_warm_start(&z_init, lik, map, cfg) {
        Ok(z) => z,
        Err(Error::Divergence { step }) => {
            return Err(diverged(
                ChainPhase::WarmStart,
                step,
                make_report(samples, noise, retained_steps),
            ))
        }
        Err(e) => return Err(e.into()),
    };

    let mut state = match LangevinState::init(map, lik, z_warm, rng) {
        Ok(s) => s,
        Err(Error::Divergence { step }) => {
            return Err(diverged(
                ChainPhase::Chain,
                step,
                make_report(samples, noise, retained_steps),
            ))
        }
        Err(e) => return Err(e.into()),
    };

    for i in 1..=cfg.n_steps {
        state = match step_impl(state, lik, map, cfg.tau, cfg.scheme) {
            Ok(s) => s,
            Err(Error::Divergence { step }) => {
                return Err(diverged(
                    ChainPhase::Chain,
                    step,
                    make_report(samples, noise, retained_steps),
                ))
            }
            Err(e) => return Err(e.into()),
        };
        if retain_step(cfg, i) {
            samples.push(state.x0.clone());
            noise.push(state.z.clone());
            retained_steps.push(i);
        }
    }

    let mut report = make_report(samples, noise, retained_steps);
    report.wall_time_seconds = elapsed();
    Ok(report)
}

/// Amortized function evaluations per sample, `η·(K+N)/N`, for each `N`.
pub fn nfe_curve(eta: u64, warm: u64, n_values: &[u64]) -> Result<Vec<f64>> {
    if n_values.iter().any(|n| *n == 0) {
        return Err(Error::InvalidArgument {
            context: "nfe_curve",
            detail: String::from("all chain lengths must be positive"),
        });
    }
    Ok(n_values
        .iter()
        .map(|n| (eta * (warm + n)) as f64 / *n as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{ForwardOperator, Measurement};

    fn identity_setup(d: usize, y: Vec<f64>, sigma: f64) -> (GenerativeMap, LikelihoodModel) {
        let map = GenerativeMap::identity(d);
        let op = ForwardOperator::inpaint(alloc::vec![true; d]).unwrap();
        let lik = LikelihoodModel::new(op, Measurement::new(y, sigma).unwrap()).unwrap();
        (map, lik)
    }

    #[test]
    fn em_update_arithmetic() {
        assert_eq!(
            em_update(&[2.0, 0.0], &[0.0, 0.0], 0.5, &[0.0, 0.0]),
            alloc::vec![1.0, 0.0]
        );
        let out = em_update(&[1.0, 1.0], &[1.0, -1.0], 0.1, &[0.0, 0.0]);
        assert!((out[0] - 0.8).abs() < 1e-15);
        assert!((out[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ei_update_arithmetic() {
        let tau = core::f64::consts::LN_2;
        let out = ei_update(&[2.0], &[1.0], tau, &[0.0]);
        assert!((out[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn em_ei_agree_to_second_order_on_matched_noise() {
        let tau = 1e-4;
        let z = [0.7, -0.9];
        let g = [0.4, 1.1];
        let xi = [0.5, -0.8];
        let em = em_update(&z, &g, tau, &xi);
        let ei = ei_update(&z, &g, tau, &xi);
        let diff = math::norm(&[em[0] - ei[0], em[1] - ei[1]]);
        assert!(diff < 1e-6, "difference {diff}");
    }

    #[test]
    fn em_increment_variance_matches_2tau() {
        // With g = 0 the increment z' - (1-tau) z is sqrt(2 tau) xi; its
        // per-coordinate variance is 2 tau = 0.2. Std error of the variance
        // estimate over n draws is 0.2 sqrt(2/n).
        let tau = 0.1;
        let mut rng = CounterRng::from_seed(2718);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        let z = [0.3];
        for _ in 0..n {
            let xi = [rng.next_normal()];
            let z_new = em_update(&z, &[0.0], tau, &xi);
            let inc = z_new[0] - (1.0 - tau) * z[0];
            sum += inc;
            sumsq += inc * inc;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let tol = 3.0 * 0.2 * (2.0 / n as f64).sqrt();
        assert!((var - 0.2).abs() < tol, "var {var}, tol {tol}");
    }

    #[test]
    fn ei_increment_variance_matches_formula() {
        // Variance of the EI noise term is 1 - e^{-2 tau} ~ 0.18127 at tau 0.1.
        let tau = 0.1;
        let expect = 1.0 - (-0.2f64).exp();
        let mut rng = CounterRng::from_seed(314);
        let n = 100_000;
        let mut sumsq = 0.0;
        let mut sum = 0.0;
        for _ in 0..n {
            let xi = [rng.next_normal()];
            let z_new = ei_update(&[0.0], &[0.0], tau, &xi);
            sum += z_new[0];
            sumsq += z_new[0] * z_new[0];
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        let tol = 3.0 * expect * (2.0 / n as f64).sqrt();
        assert!((var - expect).abs() < tol, "var {var}, want {expect}");
    }

    #[test]
    fn pure_ou_stationary_variance() {
        // g = 0: EM has stationary per-coordinate variance 1/(1 - tau/2),
        // EI preserves the unit variance exactly. Run d = 8 coordinates for
        // 100k steps from a stationary start and average the estimates.
        let tau = 0.1;
        let d = 8;
        let n = 100_000usize;
        for (scheme, expect) in [(Scheme::Em, 1.0 / (1.0 - tau / 2.0)), (Scheme::Ei, 1.0f64)] {
            let mut rng = CounterRng::from_seed(555);
            let mut z: Vec<f64> = (0..d).map(|_| rng.next_normal() * expect.sqrt()).collect();
            let g = alloc::vec![0.0; d];
            let mut sum = alloc::vec![0.0; d];
            let mut sumsq = alloc::vec![0.0; d];
            for _ in 0..n {
                let xi = rng.normal_vec(d);
                z = match scheme {
                    Scheme::Em => em_update(&z, &g, tau, &xi),
                    Scheme::Ei => ei_update(&z, &g, tau, &xi),
                };
                for (i, zi) in z.iter().enumerate() {
                    sum[i] += zi;
                    sumsq[i] += zi * zi;
                }
            }
            let mut mean_var = 0.0;
            for i in 0..d {
                let m = sum[i] / n as f64;
                mean_var += sumsq[i] / n as f64 - m * m;
            }
            mean_var /= d as f64;
            // AR(1) with rho ~ 0.9: var of the variance estimate is roughly
            // (2 v^2 / n)(1+rho^2)/(1-rho^2) per coordinate; averaged over 8
            // independent coordinates the 3-sigma band is about 0.015.
            assert!(
                (mean_var - expect).abs() < 0.015,
                "{}: variance {mean_var}, want {expect}",
                scheme.name()
            );
        }
    }

    #[test]
    fn em_step_uses_cached_gradient_and_refreshes_it() {
        let (map, lik) = identity_setup(2, alloc::vec![0.0, 0.0], 1.0);
        let rng = CounterRng::from_seed(1);
        let z0 = NoiseVector::from(alloc::vec![2.0, -1.0]);
        let state = LangevinState::init(&map, &lik, z0, rng).unwrap();
        assert_eq!(state.g.values, alloc::vec![2.0, -1.0]);
        assert_eq!(state.step, 0);

        // Replay the noise the step will draw.
        let mut replay = state.rng.clone();
        let xi = replay.normal_vec(2);
        let expect = em_update(state.z.as_slice(), state.g.as_slice(), 0.25, &xi);

        let next = em_step(state, &lik, &map, 0.25).unwrap();
        assert_eq!(next.z.values, expect);
        assert_eq!(next.step, 1);
        // Gradient cache matches the new iterate (identity setup: g = z).
        assert_eq!(next.g.values, next.z.values);
        assert_eq!(next.x0.values, next.z.values);
    }

    #[test]
    fn em_step_rejects_tau_out_of_range() {
        let (map, lik) = identity_setup(1, alloc::vec![0.0], 1.0);
        let state = LangevinState::init(
            &map,
            &lik,
            NoiseVector::from(alloc::vec![0.0]),
            CounterRng::from_seed(0),
        )
        .unwrap();
        assert!(em_step(state.clone(), &lik, &map, 1.0).is_err());
        assert!(ei_step(state, &lik, &map, 2.0).is_ok());
    }

    #[test]
    fn adam_zero_steps_returns_input() {
        let (map, lik) = identity_setup(2, alloc::vec![0.0, 0.0], 1.0);
        let cfg = SamplerConfig {
            warm_steps: 0,
            ..SamplerConfig::default()
        };
        let z0 = NoiseVector::from(alloc::vec![3.0, -4.0]);
        let out = adam_warm_start(&z0, &lik, &map, &cfg).unwrap();
        assert_eq!(out, z0);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // Bias-corrected first step is lr * g / (|g| + eps) = lr * sign(g).
        let (map, lik) = identity_setup(1, alloc::vec![0.0], 0.5);
        // z = 1, sigma = 0.5 -> gradient 1/0.25 = 4.
        let cfg = SamplerConfig {
            warm_steps: 1,
            adam_lr: 0.1,
            ..SamplerConfig::default()
        };
        let out = adam_warm_start(&NoiseVector::from(alloc::vec![1.0]), &lik, &map, &cfg).unwrap();
        assert!((out.values[0] - 0.9).abs() < 1e-8, "got {}", out.values[0]);
    }

    #[test]
    fn adam_quadratic_descent() {
        // L(z) = ||z||^2 / 2 from (10, 10): norm shrinks and the loss trace
        // decreases over every 50-step window.
        let (map, lik) = identity_setup(2, alloc::vec![0.0, 0.0], 1.0);
        let cfg = SamplerConfig {
            warm_steps: 500,
            adam_lr: 5e-3,
            ..SamplerConfig::default()
        };
        let z0 = NoiseVector::from(alloc::vec![10.0, 10.0]);
        let (z_final, trace) = adam_warm_start_traced(&z0, &lik, &map, &cfg).unwrap();
        assert!(math::norm(&z_final.values) < math::norm(&z0.values));
        assert_eq!(trace.len(), 500);
        for i in 0..trace.len() - 50 {
            assert!(
                trace[i + 50] < trace[i],
                "loss failed to decrease across window at {i}"
            );
        }
    }

    #[test]
    fn run_chain_single_step_composition() {
        let (map, lik) = identity_setup(2, alloc::vec![0.4, -0.2], 1.0);
        let cfg = SamplerConfig {
            warm_steps: 0,
            n_steps: 1,
            burn_in: 0,
            thinning: 1,
            seed: 9,
            ..SamplerConfig::default()
        };
        let report = run_chain(&map, &lik, &cfg).unwrap();
        assert_eq!(report.samples.len(), 1);

        // Replay by hand.
        let mut rng = CounterRng::new(9, 0);
        let z0 = NoiseVector::from(rng.normal_vec(2));
        let state = LangevinState::init(&map, &lik, z0, rng).unwrap();
        let stepped = em_step(state, &lik, &map, cfg.tau).unwrap();
        assert_eq!(report.samples[0].values, stepped.x0.values);
        assert_eq!(report.retained_steps, alloc::vec![1]);
    }

    #[test]
    fn run_chain_nfe_accounting() {
        let (map, lik) = identity_setup(2, alloc::vec![0.0, 0.0], 1.0);
        let cfg = SamplerConfig {
            warm_steps: 800,
            n_steps: 10,
            burn_in: 0,
            thinning: 1,
            ..SamplerConfig::default()
        };
        let report = run_chain(&map, &lik, &cfg).unwrap();
        assert_eq!(report.nfe_total, 810);
        assert_eq!(report.samples.len(), 10);
        assert!((report.nfe_per_sample - 81.0).abs() < 1e-12);

        // eta = 2 for a two-step map.
        let two = GenerativeMap::two_step(GenerativeMap::identity(2), 4, 0.5).unwrap();
        let report = run_chain(&two, &lik, &cfg).unwrap();
        assert_eq!(report.nfe_total, 1620);
    }

    #[test]
    fn run_chain_is_deterministic() {
        let (map, lik) = identity_setup(3, alloc::vec![0.1, 0.2, 0.3], 0.5);
        let cfg = SamplerConfig {
            n_steps: 50,
            warm_steps: 5,
            burn_in: 10,
            thinning: 3,
            seed: 123,
            ..SamplerConfig::default()
        };
        let a = run_chain(&map, &lik, &cfg).unwrap();
        let b = run_chain(&map, &lik, &cfg).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.noise_trace, b.noise_trace);
        assert_eq!(a.retained_steps, b.retained_steps);
    }

    #[test]
    fn run_chain_reports_divergence_with_partial_trace() {
        // A stiff target with tau near 1 makes EM expand geometrically.
        let m = crate::linalg::Matrix::new(1, 1, alloc::vec![40.0]).unwrap();
        let map = GenerativeMap::affine(m, alloc::vec![0.0]).unwrap();
        let op = ForwardOperator::inpaint(alloc::vec![true]).unwrap();
        let lik =
            LikelihoodModel::new(op, Measurement::new(alloc::vec![0.0], 0.1).unwrap()).unwrap();
        let cfg = SamplerConfig {
            tau: 0.9,
            n_steps: 500,
            warm_steps: 0,
            burn_in: 0,
            thinning: 1,
            seed: 1,
            ..SamplerConfig::default()
        };
        match run_chain(&map, &lik, &cfg) {
            Err(ChainError::Diverged { phase, step, partial }) => {
                assert_eq!(phase, ChainPhase::Chain);
                assert!(step > 0);
                assert_eq!(partial.samples.len(), step.saturating_sub(1).min(partial.samples.len()));
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn nfe_curve_examples() {
        assert_eq!(
            nfe_curve(1, 800, &[1, 10, 100]).unwrap(),
            alloc::vec![801.0, 81.0, 9.0]
        );
        let flat = nfe_curve(2, 0, &[1, 5, 50]).unwrap();
        assert!(flat.iter().all(|v| *v == 2.0));
        let curve = nfe_curve(1, 800, &[1, 2, 5, 25, 100, 1000]).unwrap();
        assert!((curve[3] - 33.0).abs() < 1.1, "eta(K+N)/N at N=25 is 33");
        for w in curve.windows(2) {
            assert!(w[1] < w[0], "curve must be strictly decreasing");
        }
        assert!(nfe_curve(1, 10, &[0]).is_err());
    }

    #[test]
    fn retention_rule() {
        let cfg = SamplerConfig {
            n_steps: 2000,
            burn_in: 500,
            thinning: 10,
            ..SamplerConfig::default()
        };
        assert_eq!(cfg.retained_count(), 150);
        assert!(retain_step(&cfg, 501));
        assert!(!retain_step(&cfg, 502));
        assert!(retain_step(&cfg, 511));
        assert!(!retain_step(&cfg, 500));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SamplerConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.tau = 1.0;
        assert!(cfg.validate().is_err());
        cfg.tau = 1e-3;
        cfg.burn_in = cfg.n_steps;
        assert!(cfg.validate().is_err());
        cfg.burn_in = 0;
        cfg.thinning = 0;
        assert!(cfg.validate().is_err());
        // EI accepts tau >= 1.
        let cfg = SamplerConfig {
            scheme: Scheme::Ei,
            tau: 1.5,
            ..SamplerConfig::default()
        };
        assert!(cfg.validate().is_ok());
    }
}
