//! Ground-truth posteriors, the condition number, and numerical checks of
//! the approximation bounds.
//!
//! For affine maps and linear operators the noise-space posterior is Gaussian
//! in closed form; everything else is handled by trapezoid quadrature on
//! [`DensityGrid`]s. The checks here are the independent yardsticks that the
//! samplers are measured against, so none of them run any chain code.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::forward::LikelihoodModel;
use crate::grid::{tv_distance_grid, tv_with_refinement, DensityGrid};
use crate::linalg::Matrix;
use crate::map::GenerativeMap;
use crate::math;
use crate::rng::CounterRng;

/// Sample count used by the data-processing-inequality check.
const DPI_SAMPLES: usize = 100_000;
/// Fixed stream for the DPI check's matched uniforms.
const DPI_SEED: u64 = 0x6470_695f_6d63_0000; // "dpi_mc\0\0"

/// A Gaussian in noise space, as mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

impl GaussianPosterior {
    pub fn std(&self, i: usize) -> f64 {
        math::sqrt(self.covariance.get(i, i))
    }
}

/// Closed-form noise-space posterior for `Φ(z) = M z + b`, `𝒜 = A`, and
/// Gaussian noise: precision `I + (AM)ᵀ(AM)/σ²`, mean `Σ (AM)ᵀ (y - A b)/σ²`.
pub fn gaussian_posterior_closed_form(
    m: &Matrix,
    b: &[f64],
    a: &Matrix,
    y: &[f64],
    sigma: f64,
) -> Result<GaussianPosterior> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument {
            context: "gaussian_posterior_closed_form",
            detail: String::from("sigma must be positive"),
        });
    }
    check_dim("gaussian_posterior_closed_form b", m.rows, b.len())?;
    check_dim("gaussian_posterior_closed_form A", a.cols, m.rows)?;
    check_dim("gaussian_posterior_closed_form y", a.rows, y.len())?;
    let big_b = a.matmul(m)?;
    let s2 = sigma * sigma;
    let precision = Matrix::identity(m.cols).add(&big_b.transpose().matmul(&big_b)?.scaled(1.0 / s2))?;
    let covariance = precision.inverse_spd()?;
    let ab = a.matvec(b);
    let residual: Vec<f64> = y.iter().zip(&ab).map(|(yi, abi)| yi - abi).collect();
    let rhs: Vec<f64> = big_b.matvec_t(&residual).iter().map(|v| v / s2).collect();
    let mean = covariance.matvec(&rhs);
    Ok(GaussianPosterior { mean, covariance })
}

/// Axis specification for a posterior grid.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n_points: Vec<usize>,
    /// Extend the bounds automatically until the boundary carries no mass.
    pub adaptive: bool,
}

impl GridSpec {
    /// 1-D spec with the quadrature default of 4001 points.
    pub fn one_d(lo: f64, hi: f64) -> Self {
        GridSpec {
            lo: vec![lo],
            hi: vec![hi],
            n_points: vec![4001],
            adaptive: true,
        }
    }
}

/// Tabulates the unnormalized noise-space posterior
/// `exp(-||z||²/2 - L_y(Φ(z)))` on the grid.
pub fn grid_posterior(
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    check_dim("grid_posterior", map.dim(), spec.lo.len())?;
    let f = |z: &[f64]| {
        let x0 = map.apply_slice(z);
        let prior = -0.5 * math::dot(z, z);
        math::exp(prior - lik.loss_slice(&x0))
    };
    if spec.adaptive {
        DensityGrid::tabulate_adaptive(&spec.lo, &spec.hi, &spec.n_points, f)
    } else {
        let grid = DensityGrid::tabulate(&spec.lo, &spec.hi, &spec.n_points, f)?;
        if grid.boundary_max() > 1e-10 * grid.max_value() {
            return Err(Error::SupportNotCovered { extensions: 0 });
        }
        Ok(grid)
    }
}

/// Data-space companion of [`grid_posterior`] for monotone 1-D maps: the
/// change of variables `p(x0) = exp(-z²/2 - L_y(x0)) / |Φ'(z)|` with
/// `z = Φ⁻¹(x0)` found by bisection. Nodes outside the range of `Φ` get
/// density zero.
pub fn grid_posterior_data_1d(
    lik: &LikelihoodModel,
    map: &GenerativeMap,
    spec: &GridSpec,
) -> Result<DensityGrid> {
    check_dim("grid_posterior_data_1d", 1, map.dim())?;
    check_dim("grid_posterior_data_1d grid", 1, spec.lo.len())?;
    // Establish orientation and a bracket that covers the grid's preimage.
    let eval = |z: f64| map.apply_slice(&[z])[0];
    let mut half_width = 1.0;
    let (mut f_lo, mut f_hi) = (eval(-half_width), eval(half_width));
    for _ in 0..60 {
        let lo_done = f_lo.min(f_hi) <= spec.lo[0];
        let hi_done = f_lo.max(f_hi) >= spec.hi[0];
        if (lo_done && hi_done) || half_width > 1e8 {
            break;
        }
        half_width *= 2.0;
        f_lo = eval(-half_width);
        f_hi = eval(half_width);
    }
    let increasing = f_hi >= f_lo;
    if !increasing {
        core::mem::swap(&mut f_lo, &mut f_hi);
    }
    let range = (f_lo, f_hi);

    let f = move |x: &[f64]| {
        let target = x[0];
        if target <= range.0 || target >= range.1 {
            return 0.0;
        }
        let (mut a, mut b) = (-half_width, half_width);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let v = eval(mid);
            let go_right = if increasing { v < target } else { v > target };
            if go_right {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-14 * (1.0 + math::abs(mid)) {
                break;
            }
        }
        let z = 0.5 * (a + b);
        let deriv = math::abs(map.pullback_slice(&[z], &[1.0])[0]);
        if deriv <= 0.0 {
            return 0.0;
        }
        math::exp(-0.5 * z * z - lik.loss_slice(&[target])) / deriv
    };
    if spec.adaptive {
        DensityGrid::tabulate_adaptive(&spec.lo, &spec.hi, &spec.n_points, f)
    } else {
        DensityGrid::tabulate(&spec.lo, &spec.hi, &spec.n_points, f)
    }
}

/// Condition number and the pieces of the TV bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `sup p(y|x) / ∫ p(y|x) p_data(x) dx`; at least 1.
    pub kappa_y: f64,
    pub sup_likelihood: f64,
    pub evidence: f64,
    /// TV between the true and model priors (0 when not applicable).
    pub eps_prior: f64,
    /// `2 κ_y ε`.
    pub bound_value: f64,
    /// Measured TV between the two posteriors (0 when not applicable).
    pub tv_posteriors: f64,
}

/// Computes `κ_y` for a likelihood over a gridded data prior. The supremum is
/// taken over the grid nodes, which keeps the discrete inequality `κ_y >= 1`
/// exact.
pub fn condition_number(
    likelihood: impl Fn(&[f64]) -> f64,
    p_data: &DensityGrid,
) -> Result<ConditionReport> {
    let lik_grid = DensityGrid::tabulate(&p_data.lo, &p_data.hi, &p_data.n_points, &likelihood)?;
    let (p_norm, _) = p_data.normalized()?;
    let sup = lik_grid.max_value();
    let evidence: f64 = lik_grid
        .values
        .iter()
        .zip(&p_norm.values)
        .enumerate()
        .map(|(flat, (l, p))| p_norm.trapezoid_weight(flat) * l * p)
        .sum();
    if !(evidence > 0.0) || !evidence.is_finite() {
        return Err(Error::ZeroEvidence);
    }
    Ok(ConditionReport {
        kappa_y: sup / evidence,
        sup_likelihood: sup,
        evidence,
        eps_prior: 0.0,
        bound_value: 0.0,
        tv_posteriors: 0.0,
    })
}

/// Verifies the TV guarantee on one instance: computes
/// `ε = TV(p_data, model_prior)`, both likelihood-weighted posteriors, their
/// TV, and `κ_y`, then asserts `TV <= 2 κ_y ε` up to ten times the estimated
/// quadrature error. A violation is an implementation bug, reported as an
/// error.
pub fn check_theorem_bound(
    p_data: &DensityGrid,
    model_prior: &DensityGrid,
    likelihood: impl Fn(&[f64]) -> f64,
) -> Result<ConditionReport> {
    if !p_data.same_axes(model_prior) {
        return Err(Error::GridMismatch);
    }
    let lik_grid = DensityGrid::tabulate(&p_data.lo, &p_data.hi, &p_data.n_points, &likelihood)?;
    let (eps, eps_err) = tv_with_refinement(p_data, model_prior)?;

    let weight = |prior: &DensityGrid| -> Result<DensityGrid> {
        let values: Vec<f64> = prior
            .values
            .iter()
            .zip(&lik_grid.values)
            .map(|(p, l)| p * l)
            .collect();
        if values.iter().all(|v| *v == 0.0) {
            return Err(Error::ZeroEvidence);
        }
        Ok(DensityGrid {
            lo: prior.lo.clone(),
            hi: prior.hi.clone(),
            n_points: prior.n_points.clone(),
            values,
        })
    };
    let post_true = weight(p_data)?;
    let post_model = weight(model_prior)?;
    let (tv_post, tv_err) = tv_with_refinement(&post_true, &post_model)?;

    let base = condition_number(&likelihood, p_data)?;
    let bound = 2.0 * base.kappa_y * eps;
    let tolerance = 10.0 * (tv_err + 2.0 * base.kappa_y * eps_err) + 1e-12;
    if tv_post > bound + tolerance {
        return Err(Error::TheoremViolation {
            tv: tv_post,
            bound: bound + tolerance,
        });
    }
    Ok(ConditionReport {
        eps_prior: eps,
        bound_value: bound,
        tv_posteriors: tv_post,
        ..base
    })
}

/// Data-processing-inequality check: draws matched inverse-CDF sample sets
/// from `p` and `q`, pushes them through `phi`, and histograms the results.
/// Returns `(tv_before, tv_after)`; the DPI asserts
/// `tv_after <= tv_before + 5/sqrt(n)` up to histogram noise.
pub fn check_dpi(
    p: &DensityGrid,
    q: &DensityGrid,
    phi: impl Fn(f64) -> f64,
    n_bins: usize,
) -> Result<(f64, f64)> {
    if n_bins < 2 {
        return Err(Error::InvalidArgument {
            context: "check_dpi",
            detail: String::from("need at least two histogram bins"),
        });
    }
    let tv_before = tv_distance_grid(p, q)?;
    let mut rng = CounterRng::new(DPI_SEED, 0);
    let uniforms: Vec<f64> = (0..DPI_SAMPLES).map(|_| rng.next_f64()).collect();
    let push = |grid: &DensityGrid| -> Result<Vec<f64>> {
        Ok(grid
            .sample_inverse_cdf(&uniforms)?
            .into_iter()
            .map(&phi)
            .collect())
    };
    let xs = push(p)?;
    let ys = push(q)?;
    let lo = xs
        .iter()
        .chain(&ys)
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = xs
        .iter()
        .chain(&ys)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        // Both pushforwards collapse to a point: identical distributions.
        return Ok((tv_before, 0.0));
    }
    let mut hist_x = vec![0.0f64; n_bins];
    let mut hist_y = vec![0.0f64; n_bins];
    let scale = n_bins as f64 / (hi - lo);
    let bin_of = |v: f64| -> usize { (((v - lo) * scale) as usize).min(n_bins - 1) };
    for v in &xs {
        hist_x[bin_of(*v)] += 1.0;
    }
    for v in &ys {
        hist_y[bin_of(*v)] += 1.0;
    }
    let n = DPI_SAMPLES as f64;
    let tv_after: f64 = hist_x
        .iter()
        .zip(&hist_y)
        .map(|(a, b)| math::abs(a - b) / n)
        .sum::<f64>()
        / 2.0;
    Ok((tv_before, tv_after))
}

/// Chain moments with autocorrelation-aware standard errors.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    pub mean: Vec<f64>,
    /// Unbiased sample covariance.
    pub covariance: Matrix,
    /// Per-coordinate standard error of the mean, using the effective sample
    /// size from the initial-positive-sequence autocorrelation estimator.
    pub std_errors: Vec<f64>,
    pub ess: Vec<f64>,
}

/// Sample mean, unbiased covariance, and per-coordinate standard errors.
pub fn moment_estimate(samples: &[&[f64]]) -> Result<MomentEstimate> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::NotEnoughSamples { got: n, need: 2 });
    }
    let d = samples[0].len();
    for s in samples {
        check_dim("moment_estimate", d, s.len())?;
    }
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(*s) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut covariance = Matrix::zeros(d, d);
    for s in samples {
        for i in 0..d {
            let di = s[i] - mean[i];
            for j in i..d {
                let v = di * (s[j] - mean[j]);
                covariance.data[i * d + j] += v;
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = covariance.get(i, j) / (nf - 1.0);
            covariance.set(i, j, v);
            covariance.set(j, i, v);
        }
    }

    let mut std_errors = vec![0.0; d];
    let mut ess = vec![nf; d];
    for i in 0..d {
        let gamma0 = covariance.get(i, i) * (nf - 1.0) / nf;
        if gamma0 <= 0.0 {
            continue;
        }
        // Geyer initial positive sequence over paired autocovariances.
        let autocov = |lag: usize| -> f64 {
            let mut acc = 0.0;
            for t in 0..n - lag {
                acc += (samples[t][i] - mean[i]) * (samples[t + lag][i] - mean[i]);
            }
            acc / nf
        };
        let mut numerator = -gamma0;
        let mut m = 0usize;
        loop {
            let lag0 = 2 * m;
            let lag1 = 2 * m + 1;
            if lag1 >= n {
                break;
            }
            let pair = autocov(lag0) + autocov(lag1);
            if pair <= 0.0 {
                break;
            }
            numerator += 2.0 * pair;
            m += 1;
        }
        let numerator = numerator.max(gamma0 * 1e-3);
        let var_mean = numerator / nf;
        std_errors[i] = math::sqrt(var_mean);
        ess[i] = gamma0 / var_mean;
    }
    Ok(MomentEstimate {
        mean,
        covariance,
        std_errors,
        ess,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{ForwardOperator, Measurement};
    use crate::grid::normal_pdf;

    fn scalar_affine_instance(
        m: f64,
        b: f64,
        y: f64,
        sigma: f64,
    ) -> (GenerativeMap, LikelihoodModel) {
        let map = GenerativeMap::affine(Matrix::new(1, 1, vec![m]).unwrap(), vec![b]).unwrap();
        let op = ForwardOperator::inpaint(vec![true]).unwrap();
        let lik =
            LikelihoodModel::new(op, Measurement::new(vec![y], sigma).unwrap()).unwrap();
        (map, lik)
    }

    #[test]
    fn closed_form_matches_quadrature_1d() {
        // M = 2, b = 0, A = 1, sigma = 1, y = 2: mean 0.8, variance 0.2.
        let m = Matrix::new(1, 1, vec![2.0]).unwrap();
        let a = Matrix::identity(1);
        let post = gaussian_posterior_closed_form(&m, &[0.0], &a, &[2.0], 1.0).unwrap();
        assert!((post.mean[0] - 0.8).abs() < 1e-12);
        assert!((post.covariance.get(0, 0) - 0.2).abs() < 1e-12);

        let (map, lik) = scalar_affine_instance(2.0, 0.0, 2.0, 1.0);
        let spec = GridSpec {
            lo: vec![-6.0],
            hi: vec![6.0],
            n_points: vec![4001],
            adaptive: false,
        };
        let grid = grid_posterior(&lik, &map, &spec).unwrap();
        assert!((grid.mean_1d().unwrap() - 0.8).abs() < 1e-6);
        assert!((grid.variance_1d().unwrap() - 0.2).abs() < 1e-6);
    }

    #[test]
    fn closed_form_zero_data_term() {
        let m = Matrix::new(2, 2, vec![3.0, 1.0, 0.0, 2.0]).unwrap();
        let a = Matrix::new(2, 2, vec![1.0, 0.5, 0.0, 1.0]).unwrap();
        let b = [0.7, -0.2];
        let y = a.matvec(&b);
        let post = gaussian_posterior_closed_form(&m, &b, &a, &y, 0.5).unwrap();
        assert!(math::norm(&post.mean) < 1e-12);
    }

    #[test]
    fn closed_form_flat_likelihood_limit() {
        let m = Matrix::new(2, 2, vec![2.0, 0.0, 0.0, 2.0]).unwrap();
        let a = Matrix::identity(2);
        let post =
            gaussian_posterior_closed_form(&m, &[0.0, 0.0], &a, &[5.0, -3.0], 1e8).unwrap();
        assert!(math::norm(&post.mean) < 1e-6);
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((post.covariance.get(i, j) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn noise_grid_identity_instance() {
        // Identity map and operator, sigma 1, y 0: density ∝ exp(-z²), which
        // is N(0, 1/2).
        let (map, lik) = scalar_affine_instance(1.0, 0.0, 0.0, 1.0);
        let spec = GridSpec::one_d(-6.0, 6.0);
        let grid = grid_posterior(&lik, &map, &spec).unwrap();
        assert!(grid.mean_1d().unwrap().abs() < 1e-6);
        assert!((grid.variance_1d().unwrap() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn noise_grid_flat_likelihood_is_prior() {
        let (map, lik) = scalar_affine_instance(1.0, 0.0, 0.0, 1e9);
        let spec = GridSpec::one_d(-8.0, 8.0);
        let grid = grid_posterior(&lik, &map, &spec).unwrap();
        assert!(grid.mean_1d().unwrap().abs() < 1e-6);
        assert!((grid.variance_1d().unwrap() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn noise_grid_rejects_uncovered_support() {
        let (map, lik) = scalar_affine_instance(1.0, 0.0, 0.0, 1.0);
        let spec = GridSpec {
            lo: vec![-0.5],
            hi: vec![0.5],
            n_points: vec![101],
            adaptive: false,
        };
        assert!(matches!(
            grid_posterior(&lik, &map, &spec),
            Err(Error::SupportNotCovered { .. })
        ));
    }

    #[test]
    fn data_space_density_matches_affine_change_of_variables() {
        // Phi(z) = 2z + 1 with flat likelihood: data density is N(1, 4).
        let (map, lik) = scalar_affine_instance(2.0, 1.0, 0.0, 1e9);
        let spec = GridSpec {
            lo: vec![-11.0],
            hi: vec![13.0],
            n_points: vec![4001],
            adaptive: false,
        };
        let grid = grid_posterior_data_1d(&lik, &map, &spec).unwrap();
        assert!((grid.mean_1d().unwrap() - 1.0).abs() < 1e-5);
        assert!((grid.variance_1d().unwrap() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn condition_number_examples() {
        let p_data = DensityGrid::tabulate(&[-8.0], &[8.0], &[4001], |x| {
            normal_pdf(x[0], 0.0, 1.0)
        })
        .unwrap();
        // Likelihood N(y; x, 1) with y = 0: kappa = sqrt(2).
        let rep = condition_number(|x| normal_pdf(0.0, x[0], 1.0), &p_data).unwrap();
        assert!(
            (rep.kappa_y - core::f64::consts::SQRT_2).abs() < 1e-4,
            "kappa {}",
            rep.kappa_y
        );
        // Constant likelihood: kappa = 1 exactly on the grid measure.
        let rep = condition_number(|_| 0.37, &p_data).unwrap();
        assert!((rep.kappa_y - 1.0).abs() < 1e-12);
        // y = 4: kappa = sqrt(2) e^4.
        let rep = condition_number(|x| normal_pdf(4.0, x[0], 1.0), &p_data).unwrap();
        let want = core::f64::consts::SQRT_2 * (4.0f64).exp();
        assert!(
            (rep.kappa_y - want).abs() / want < 1e-4,
            "kappa {} want {want}",
            rep.kappa_y
        );
        assert!(rep.kappa_y >= 1.0);
    }

    #[test]
    fn theorem_bound_identical_priors() {
        let p = DensityGrid::tabulate(&[-8.0], &[8.0], &[2001], |x| {
            normal_pdf(x[0], 0.0, 1.0)
        })
        .unwrap();
        let rep = check_theorem_bound(&p, &p.clone(), |x| normal_pdf(0.3, x[0], 1.0)).unwrap();
        assert_eq!(rep.eps_prior, 0.0);
        assert_eq!(rep.tv_posteriors, 0.0);
    }

    #[test]
    fn theorem_bound_shifted_priors() {
        let axes = (&[-10.0][..], &[10.0][..], &[4001][..]);
        let p = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], 0.0, 1.0))
            .unwrap();
        let q = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], 0.2, 1.0))
            .unwrap();
        let rep = check_theorem_bound(&p, &q, |x| normal_pdf(0.0, x[0], 1.0)).unwrap();
        assert!(rep.eps_prior > 0.05);
        assert!(rep.tv_posteriors <= rep.bound_value + 1e-9);
        assert!(rep.kappa_y >= 1.0);
    }

    #[test]
    fn ill_conditioned_likelihood_placement_raises_kappa() {
        // A two-mode prior with a light minority mode: a likelihood peaked on
        // the minority mode is at least ten times worse conditioned than one
        // peaked on the majority mode.
        let mixture = |x: f64| 0.95 * normal_pdf(x, 2.0, 0.5) + 0.05 * normal_pdf(x, -2.0, 0.5);
        let p_data =
            DensityGrid::tabulate(&[-10.0], &[10.0], &[4001], |x| mixture(x[0])).unwrap();
        let k_major = condition_number(|x| normal_pdf(2.0, x[0], 0.2), &p_data)
            .unwrap()
            .kappa_y;
        let k_minor = condition_number(|x| normal_pdf(-2.0, x[0], 0.2), &p_data)
            .unwrap()
            .kappa_y;
        assert!(
            k_minor >= 10.0 * k_major,
            "kappa minor {k_minor} vs major {k_major}"
        );

        // The bound still holds against a single-mode model prior.
        let model = DensityGrid::tabulate(&[-10.0], &[10.0], &[4001], |x| {
            normal_pdf(x[0], 2.0, 0.6)
        })
        .unwrap();
        let rep = check_theorem_bound(&p_data, &model, |x| normal_pdf(2.0, x[0], 0.2)).unwrap();
        assert!(rep.tv_posteriors <= rep.bound_value + 1e-9);
    }

    #[test]
    fn dpi_identity_preserves_tv() {
        let axes = (&[-10.0][..], &[10.0][..], &[4001][..]);
        let p = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], 1.0, 1.0))
            .unwrap();
        let q = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], -1.0, 1.0))
            .unwrap();
        let (before, after) = check_dpi(&p, &q, |x| x, 60).unwrap();
        assert!(
            (before - 0.6826894921370859).abs() < 1e-4,
            "tv before {before}"
        );
        let tol = 5.0 / (DPI_SAMPLES as f64).sqrt();
        assert!((after - before).abs() < tol, "after {after} before {before}");
    }

    #[test]
    fn dpi_absolute_value_collapses_tv() {
        let axes = (&[-10.0][..], &[10.0][..], &[4001][..]);
        let p = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], 1.0, 1.0))
            .unwrap();
        let q = DensityGrid::tabulate(axes.0, axes.1, axes.2, |x| normal_pdf(x[0], -1.0, 1.0))
            .unwrap();
        let (before, after) = check_dpi(&p, &q, |x| x.abs(), 60).unwrap();
        let tol = 5.0 / (DPI_SAMPLES as f64).sqrt();
        assert!(after <= before + tol);
        assert!(after < tol, "pushforwards coincide, after {after}");
    }

    #[test]
    fn dpi_equal_densities() {
        let p = DensityGrid::tabulate(&[-10.0], &[10.0], &[2001], |x| {
            normal_pdf(x[0], 0.4, 0.9)
        })
        .unwrap();
        let (before, after) = check_dpi(&p, &p.clone(), |x| x * x, 40).unwrap();
        assert_eq!(before, 0.0);
        assert!(after < 1e-12, "matched samples, after {after}");
    }

    #[test]
    fn moment_estimate_examples() {
        // Constant samples: zero covariance.
        let rows: Vec<&[f64]> = vec![&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0]];
        let est = moment_estimate(&rows).unwrap();
        assert_eq!(est.covariance.data, vec![0.0; 4]);
        assert_eq!(est.std_errors, vec![0.0, 0.0]);

        // Two-point formula.
        let rows: Vec<&[f64]> = vec![&[0.0, 0.0], &[2.0, 2.0]];
        let est = moment_estimate(&rows).unwrap();
        assert_eq!(est.mean, vec![1.0, 1.0]);
        assert_eq!(est.covariance.data, vec![2.0, 2.0, 2.0, 2.0]);

        assert!(matches!(
            moment_estimate(&[&[1.0][..]]),
            Err(Error::NotEnoughSamples { .. })
        ));
    }

    #[test]
    fn moment_estimate_iid_normals() {
        let mut rng = CounterRng::from_seed(31);
        let data: Vec<Vec<f64>> = (0..100_000).map(|_| rng.normal_vec(2)).collect();
        let rows: Vec<&[f64]> = data.iter().map(|r| r.as_slice()).collect();
        let est = moment_estimate(&rows).unwrap();
        for i in 0..2 {
            assert!(
                est.mean[i].abs() < 3.0 * est.std_errors[i],
                "mean {} vs 3se {}",
                est.mean[i],
                3.0 * est.std_errors[i]
            );
            // IID chain: ESS close to n.
            assert!(est.ess[i] > 50_000.0, "ess {}", est.ess[i]);
        }
    }
}
