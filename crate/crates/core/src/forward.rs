//! Measurement operators, the Gaussian likelihood, and the noise-space
//! gradient.
//!
//! Six operator families cover the inverse-problem tasks: masking
//! (inpainting), average pooling (super-resolution), circular convolution
//! (deblurring), clipped doubling (HDR), DFT magnitude (phase retrieval), and
//! a fixed seeded tanh network standing in for a learned nonlinear operator.
//! Each provides `apply` and the adjoint/subgradient `pullback` used by the
//! chain rule.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::map::GenerativeMap;
use crate::math;
use crate::rng::CounterRng;
use crate::vector::{DataVector, NoiseVector};

/// Fourier bins with modulus at or below this are treated as having
/// subgradient zero (the modulus is non-differentiable at the origin).
const DFT_ZERO_BIN: f64 = 1e-12;

/// A measurement operator `𝒜` with a consistent pullback.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardOperator {
    /// Elementwise mask; kept entries pass through, masked entries read 0.
    Inpaint { mask: Vec<bool> },
    /// Non-overlapping `factor x factor` mean over a square `width x width` image.
    AvgPool { width: usize, factor: usize },
    /// Circular 2-D convolution of a square image with an odd kernel.
    ConvBlur { width: usize, kernel: Matrix },
    /// `clip(2 x, -1, 1)` elementwise.
    HdrClip { dim: usize },
    /// Entrywise modulus of the DFT of the zero-padded input.
    DftMagnitude { dim: usize, padded_len: usize },
    /// Fixed seeded one-hidden-layer tanh network.
    ToyNonlinear {
        w1: Matrix,
        b1: Vec<f64>,
        w2: Matrix,
        b2: Vec<f64>,
        seed: u64,
    },
}

impl ForwardOperator {
    pub fn inpaint(mask: Vec<bool>) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::inpaint",
                detail: String::from("mask must be non-empty"),
            });
        }
        Ok(ForwardOperator::Inpaint { mask })
    }

    pub fn avg_pool(width: usize, factor: usize) -> Result<Self> {
        if width == 0 || factor == 0 || width % factor != 0 {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::avg_pool",
                detail: alloc::format!("width {width} must be a positive multiple of factor {factor}"),
            });
        }
        Ok(ForwardOperator::AvgPool { width, factor })
    }

    pub fn conv_blur(width: usize, kernel: Matrix) -> Result<Self> {
        if kernel.rows != kernel.cols || kernel.rows % 2 == 0 {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::conv_blur",
                detail: String::from("kernel must be square with odd side"),
            });
        }
        if width == 0 || kernel.rows > width {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::conv_blur",
                detail: alloc::format!("kernel side {} exceeds image width {width}", kernel.rows),
            });
        }
        Ok(ForwardOperator::ConvBlur { width, kernel })
    }

    pub fn hdr_clip(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::hdr_clip",
                detail: String::from("dimension must be positive"),
            });
        }
        Ok(ForwardOperator::HdrClip { dim })
    }

    /// `oversample >= 1` multiplies the DFT length; ratio 1 means no padding.
    pub fn dft_magnitude(dim: usize, oversample: usize) -> Result<Self> {
        if dim == 0 || oversample == 0 {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::dft_magnitude",
                detail: String::from("dimension and oversampling ratio must be positive"),
            });
        }
        Ok(ForwardOperator::DftMagnitude {
            dim,
            padded_len: dim * oversample,
        })
    }

    /// Weights drawn once from the seed and frozen; `1/sqrt(fan_in)` scaling.
    pub fn toy_nonlinear(dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if dim == 0 || hidden == 0 {
            return Err(Error::InvalidArgument {
                context: "ForwardOperator::toy_nonlinear",
                detail: String::from("dimensions must be positive"),
            });
        }
        let mut rng = CounterRng::new(seed, 0x746f_795f_6f70_0000); // "toy_op\0\0"
        let s1 = 1.0 / math::sqrt(dim as f64);
        let w1 = Matrix {
            rows: hidden,
            cols: dim,
            data: (0..hidden * dim).map(|_| rng.next_normal() * s1).collect(),
        };
        let b1: Vec<f64> = (0..hidden).map(|_| 0.1 * rng.next_normal()).collect();
        let s2 = 1.0 / math::sqrt(hidden as f64);
        let w2 = Matrix {
            rows: dim,
            cols: hidden,
            data: (0..dim * hidden).map(|_| rng.next_normal() * s2).collect(),
        };
        let b2: Vec<f64> = (0..dim).map(|_| 0.1 * rng.next_normal()).collect();
        Ok(ForwardOperator::ToyNonlinear { w1, b1, w2, b2, seed })
    }

    pub fn in_dim(&self) -> usize {
        match self {
            ForwardOperator::Inpaint { mask } => mask.len(),
            ForwardOperator::AvgPool { width, .. } => width * width,
            ForwardOperator::ConvBlur { width, .. } => width * width,
            ForwardOperator::HdrClip { dim } => *dim,
            ForwardOperator::DftMagnitude { dim, .. } => *dim,
            ForwardOperator::ToyNonlinear { w1, .. } => w1.cols,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            ForwardOperator::Inpaint { mask } => mask.len(),
            ForwardOperator::AvgPool { width, factor } => {
                let side = width / factor;
                side * side
            }
            ForwardOperator::ConvBlur { width, .. } => width * width,
            ForwardOperator::HdrClip { dim } => *dim,
            ForwardOperator::DftMagnitude { padded_len, .. } => *padded_len,
            ForwardOperator::ToyNonlinear { w2, .. } => w2.rows,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ForwardOperator::Inpaint { .. } => "inpaint",
            ForwardOperator::AvgPool { .. } => "avgpool",
            ForwardOperator::ConvBlur { .. } => "conv_blur",
            ForwardOperator::HdrClip { .. } => "hdr_clip",
            ForwardOperator::DftMagnitude { .. } => "dft_magnitude",
            ForwardOperator::ToyNonlinear { .. } => "toy_nonlinear",
        }
    }

    /// Evaluates `𝒜(x0)`.
    pub fn apply(&self, x0: &DataVector) -> Result<Vec<f64>> {
        check_dim("op_apply", self.in_dim(), x0.dim())?;
        Ok(self.apply_slice(x0.as_slice()))
    }

    /// Evaluates `(∂𝒜/∂x0)ᵀ v`; `v` lives in measurement space.
    pub fn pullback(&self, x0: &DataVector, v: &[f64]) -> Result<DataVector> {
        check_dim("op_pullback input", self.in_dim(), x0.dim())?;
        check_dim("op_pullback cotangent", self.out_dim(), v.len())?;
        Ok(DataVector::from(self.pullback_slice(x0.as_slice(), v)))
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ForwardOperator::Inpaint { mask } => x
                .iter()
                .zip(mask)
                .map(|(v, keep)| if *keep { *v } else { 0.0 })
                .collect(),
            ForwardOperator::AvgPool { width, factor } => {
                let (w, f) = (*width, *factor);
                let side = w / f;
                let norm = 1.0 / (f * f) as f64;
                let mut out = vec![0.0; side * side];
                for bi in 0..side {
                    for bj in 0..side {
                        let mut acc = 0.0;
                        for di in 0..f {
                            for dj in 0..f {
                                acc += x[(bi * f + di) * w + (bj * f + dj)];
                            }
                        }
                        out[bi * side + bj] = acc * norm;
                    }
                }
                out
            }
            ForwardOperator::ConvBlur { width, kernel } => {
                let w = *width;
                let k = kernel.rows;
                let c = (k / 2) as isize;
                let mut out = vec![0.0; w * w];
                for i in 0..w as isize {
                    for j in 0..w as isize {
                        let mut acc = 0.0;
                        for a in 0..k as isize {
                            for b in 0..k as isize {
                                let ii = (i - (a - c)).rem_euclid(w as isize) as usize;
                                let jj = (j - (b - c)).rem_euclid(w as isize) as usize;
                                acc += kernel.get(a as usize, b as usize) * x[ii * w + jj];
                            }
                        }
                        out[i as usize * w + j as usize] = acc;
                    }
                }
                out
            }
            ForwardOperator::HdrClip { .. } => {
                x.iter().map(|v| (2.0 * v).clamp(-1.0, 1.0)).collect()
            }
            ForwardOperator::DftMagnitude { padded_len, .. } => {
                let (re, im) = dft_padded(x, *padded_len);
                re.iter()
                    .zip(&im)
                    .map(|(r, i)| math::sqrt(r * r + i * i))
                    .collect()
            }
            ForwardOperator::ToyNonlinear { w1, b1, w2, b2, .. } => {
                let mut h = w1.matvec(x);
                for (hi, bi) in h.iter_mut().zip(b1) {
                    *hi = math::tanh(*hi + bi);
                }
                let mut out = w2.matvec(&h);
                for (oi, bi) in out.iter_mut().zip(b2) {
                    *oi += bi;
                }
                out
            }
        }
    }

    pub(crate) fn pullback_slice(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            ForwardOperator::Inpaint { mask } => v
                .iter()
                .zip(mask)
                .map(|(vi, keep)| if *keep { *vi } else { 0.0 })
                .collect(),
            ForwardOperator::AvgPool { width, factor } => {
                let (w, f) = (*width, *factor);
                let side = w / f;
                let norm = 1.0 / (f * f) as f64;
                let mut out = vec![0.0; w * w];
                for bi in 0..side {
                    for bj in 0..side {
                        let share = v[bi * side + bj] * norm;
                        for di in 0..f {
                            for dj in 0..f {
                                out[(bi * f + di) * w + (bj * f + dj)] = share;
                            }
                        }
                    }
                }
                out
            }
            ForwardOperator::ConvBlur { width, kernel } => {
                // Adjoint of circular convolution is circular correlation.
                let w = *width;
                let k = kernel.rows;
                let c = (k / 2) as isize;
                let mut out = vec![0.0; w * w];
                for i in 0..w as isize {
                    for j in 0..w as isize {
                        let mut acc = 0.0;
                        for a in 0..k as isize {
                            for b in 0..k as isize {
                                let ii = (i + (a - c)).rem_euclid(w as isize) as usize;
                                let jj = (j + (b - c)).rem_euclid(w as isize) as usize;
                                acc += kernel.get(a as usize, b as usize) * v[ii * w + jj];
                            }
                        }
                        out[i as usize * w + j as usize] = acc;
                    }
                }
                out
            }
            ForwardOperator::HdrClip { .. } => x
                .iter()
                .zip(v)
                .map(|(xi, vi)| {
                    if math::abs(2.0 * xi) >= 1.0 {
                        0.0
                    } else {
                        2.0 * vi
                    }
                })
                .collect(),
            ForwardOperator::DftMagnitude { dim, padded_len } => {
                let n = *padded_len;
                let (re, im) = dft_padded(x, n);
                // u_k = v_k * conj(c_k) / |c_k|, then one more forward DFT of u,
                // taking real parts and truncating to the unpadded support.
                let mut ure = vec![0.0; n];
                let mut uim = vec![0.0; n];
                for kk in 0..n {
                    let modulus = math::sqrt(re[kk] * re[kk] + im[kk] * im[kk]);
                    if modulus > DFT_ZERO_BIN {
                        ure[kk] = v[kk] * re[kk] / modulus;
                        uim[kk] = -v[kk] * im[kk] / modulus;
                    }
                }
                let mut out = vec![0.0; *dim];
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for kk in 0..n {
                        let ang = -math::TAU * (kk as f64) * (j as f64) / (n as f64);
                        let (sn, cs) = (math::sin(ang), math::cos(ang));
                        // Re((ure + i*uim) * (cs + i*sn))
                        acc += ure[kk] * cs - uim[kk] * sn;
                    }
                    *o = acc;
                }
                out
            }
            ForwardOperator::ToyNonlinear { w1, b1, w2, .. } => {
                let mut a = w1.matvec(x);
                for (ai, bi) in a.iter_mut().zip(b1) {
                    *ai = math::tanh(*ai + bi);
                }
                let mut u = w2.matvec_t(v);
                for (ui, ti) in u.iter_mut().zip(&a) {
                    *ui *= 1.0 - ti * ti;
                }
                w1.matvec_t(&u)
            }
        }
    }
}

/// Forward DFT of `x` zero-padded to length `n`: `c_k = Σ_j x_j e^{-2πi kj/n}`.
fn dft_padded(x: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut re = vec![0.0; n];
    let mut im = vec![0.0; n];
    for (k, (rk, ik)) in re.iter_mut().zip(im.iter_mut()).enumerate() {
        let mut ar = 0.0;
        let mut ai = 0.0;
        for (j, xj) in x.iter().enumerate() {
            let ang = -math::TAU * (k as f64) * (j as f64) / (n as f64);
            ar += xj * math::cos(ang);
            ai += xj * math::sin(ang);
        }
        *rk = ar;
        *ik = ai;
    }
    (re, im)
}

/// Normalized 2-D Gaussian kernel with the given side length and standard
/// deviation, for use with [`ForwardOperator::conv_blur`].
pub fn gaussian_kernel(size: usize, std: f64) -> Result<Matrix> {
    if size % 2 == 0 || size == 0 || !(std > 0.0) {
        return Err(Error::InvalidArgument {
            context: "gaussian_kernel",
            detail: String::from("size must be odd and std positive"),
        });
    }
    let c = (size / 2) as isize;
    let mut data = vec![0.0; size * size];
    let mut total = 0.0;
    for i in 0..size as isize {
        for j in 0..size as isize {
            let r2 = ((i - c) * (i - c) + (j - c) * (j - c)) as f64;
            let v = math::exp(-r2 / (2.0 * std * std));
            data[(i as usize) * size + j as usize] = v;
            total += v;
        }
    }
    for v in data.iter_mut() {
        *v /= total;
    }
    Matrix::new(size, size, data)
}

/// An observation `y` with known white-noise level `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub values: Vec<f64>,
    pub noise_sigma: f64,
}

impl Measurement {
    pub fn new(values: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if !(noise_sigma > 0.0) || !noise_sigma.is_finite() {
            return Err(Error::InvalidArgument {
                context: "Measurement::new",
                detail: alloc::format!("noise sigma must be positive and finite, got {noise_sigma}"),
            });
        }
        if !math::all_finite(&values) {
            return Err(Error::NonFinite {
                context: "Measurement::new",
            });
        }
        Ok(Measurement {
            values,
            noise_sigma,
        })
    }
}

/// The Gaussian likelihood `L_y(x0) = ||y - 𝒜(x0)||² / (2σ²)` (additive
/// constant dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    pub operator: ForwardOperator,
    pub measurement: Measurement,
}

/// Result of one gradient evaluation through the nested map and operator.
#[derive(Debug, Clone)]
pub struct GradEval {
    pub grad: Vec<f64>,
    pub x0: Vec<f64>,
    pub loss: f64,
}

impl LikelihoodModel {
    pub fn new(operator: ForwardOperator, measurement: Measurement) -> Result<Self> {
        check_dim(
            "LikelihoodModel::new",
            operator.out_dim(),
            measurement.values.len(),
        )?;
        Ok(LikelihoodModel {
            operator,
            measurement,
        })
    }

    /// `L_y(x0)`; always non-negative.
    pub fn neg_log_likelihood(&self, x0: &DataVector) -> Result<f64> {
        check_dim("neg_log_likelihood", self.operator.in_dim(), x0.dim())?;
        let ax = self.operator.apply_slice(x0.as_slice());
        let s2 = self.measurement.noise_sigma * self.measurement.noise_sigma;
        let ss: f64 = ax
            .iter()
            .zip(&self.measurement.values)
            .map(|(a, y)| (y - a) * (y - a))
            .sum();
        Ok(ss / (2.0 * s2))
    }

    /// `∇_{x1} L_y(Φ(x1))` via the operator and map pullbacks.
    pub fn grad_noise_loss(
        &self,
        map: &GenerativeMap,
        x1: &NoiseVector,
    ) -> Result<NoiseVector> {
        check_dim("grad_noise_loss", map.dim(), x1.dim())?;
        check_dim(
            "grad_noise_loss operator",
            self.operator.in_dim(),
            map.dim(),
        )?;
        Ok(NoiseVector::from(self.grad_eval(map, x1.as_slice())?.grad))
    }

    /// Relative error between [`Self::grad_noise_loss`] and a central
    /// finite-difference estimate of `∇_{x1} L_y(Φ(x1))` with step `h`.
    pub fn check_grad_fd(
        &self,
        map: &GenerativeMap,
        x1: &NoiseVector,
        h: f64,
    ) -> Result<f64> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument {
                context: "check_grad_fd",
                detail: String::from("step h must be positive"),
            });
        }
        check_dim("check_grad_fd", map.dim(), x1.dim())?;
        let exact = self.grad_eval(map, x1.as_slice())?.grad;
        let d = x1.dim();
        let mut x = x1.values.clone();
        let mut fd = alloc::vec![0.0; d];
        for j in 0..d {
            let orig = x[j];
            x[j] = orig + h;
            let plus = self.loss_slice(&map.apply_slice(&x));
            x[j] = orig - h;
            let minus = self.loss_slice(&map.apply_slice(&x));
            x[j] = orig;
            fd[j] = (plus - minus) / (2.0 * h);
        }
        let diff: Vec<f64> = fd.iter().zip(&exact).map(|(a, b)| a - b).collect();
        let scale = math::norm(&exact).max(math::norm(&fd)).max(1e-300);
        Ok(math::norm(&diff) / scale)
    }

    /// Loss at a raw data-space slice; used by the quadrature oracles.
    pub(crate) fn loss_slice(&self, x0: &[f64]) -> f64 {
        let ax = self.operator.apply_slice(x0);
        let s2 = self.measurement.noise_sigma * self.measurement.noise_sigma;
        let ss: f64 = ax
            .iter()
            .zip(&self.measurement.values)
            .map(|(a, y)| (y - a) * (y - a))
            .sum();
        ss / (2.0 * s2)
    }

    /// One chain-rule evaluation, returning the gradient together with the
    /// forward value `x0 = Φ(x1)` and the loss so callers never recompute.
    pub(crate) fn grad_eval(&self, map: &GenerativeMap, z: &[f64]) -> Result<GradEval> {
        let x0 = map.apply_slice(z);
        let ax = self.operator.apply_slice(&x0);
        let s2 = self.measurement.noise_sigma * self.measurement.noise_sigma;
        let mut loss = 0.0;
        let residual_scaled: Vec<f64> = ax
            .iter()
            .zip(&self.measurement.values)
            .map(|(a, y)| {
                let r = a - y;
                loss += r * r;
                r / s2
            })
            .collect();
        loss /= 2.0 * s2;
        let d0 = self.operator.pullback_slice(&x0, &residual_scaled);
        let grad = map.pullback_slice(z, &d0);
        Ok(GradEval { grad, x0, loss })
    }
}
