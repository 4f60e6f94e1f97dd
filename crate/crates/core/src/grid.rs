//! Discretized unnormalized densities on rectangular grids.
//!
//! All quadrature oracles run on uniform grids with the trapezoid rule
//! (dimensions 1 to 3). Grids can auto-extend until the boundary carries no
//! mass, estimate their own quadrature error by comparing against the
//! stride-2 subgrid, draw inverse-CDF samples (1-D), and smooth sample sets
//! into densities with a Gaussian KDE.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Boundary mass threshold relative to the grid maximum for support checks.
const BOUNDARY_RATIO: f64 = 1e-10;
/// Maximum number of automatic extensions before giving up.
const MAX_EXTENSIONS: usize = 10;

/// An unnormalized density tabulated on a uniform rectangular grid.
///
/// `values` is stored row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub n_points: Vec<usize>,
    pub values: Vec<f64>,
}

impl DensityGrid {
    /// Tabulates `f` at the grid nodes. Requires `1 <= dim <= 3`, at least
    /// two points per axis, finite non-negative values with at least one
    /// strictly positive.
    pub fn tabulate(
        lo: &[f64],
        hi: &[f64],
        n_points: &[usize],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let dim = lo.len();
        if dim == 0 || dim > 3 || hi.len() != dim || n_points.len() != dim {
            return Err(Error::InvalidArgument {
                context: "DensityGrid::tabulate",
                detail: String::from("dimension must be 1, 2, or 3 with matching axis specs"),
            });
        }
        for d in 0..dim {
            if !(hi[d] > lo[d]) || n_points[d] < 2 {
                return Err(Error::InvalidArgument {
                    context: "DensityGrid::tabulate",
                    detail: alloc::format!(
                        "axis {d}: need hi > lo and at least 2 points, got [{}, {}] with {}",
                        lo[d],
                        hi[d],
                        n_points[d]
                    ),
                });
            }
        }
        let total: usize = n_points.iter().product();
        let mut values = vec![0.0; total];
        let mut coord = [0.0; 3];
        let mut idx = [0usize; 3];
        let mut any_positive = false;
        for (flat, value) in values.iter_mut().enumerate() {
            decode(flat, n_points, &mut idx);
            for d in 0..dim {
                coord[d] = lo[d] + (hi[d] - lo[d]) * idx[d] as f64 / (n_points[d] - 1) as f64;
            }
            let v = f(&coord[..dim]);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NonFinite {
                    context: "DensityGrid::tabulate",
                });
            }
            any_positive |= v > 0.0;
            *value = v;
        }
        if !any_positive {
            return Err(Error::InvalidArgument {
                context: "DensityGrid::tabulate",
                detail: String::from("density is identically zero on the grid"),
            });
        }
        Ok(DensityGrid {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            n_points: n_points.to_vec(),
            values,
        })
    }

    /// Tabulates `f`, widening the bounds (keeping the point count) until the
    /// boundary density falls below `1e-10` times the maximum. Fails with a
    /// support error after ten extensions.
    pub fn tabulate_adaptive(
        lo: &[f64],
        hi: &[f64],
        n_points: &[usize],
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let mut lo = lo.to_vec();
        let mut hi = hi.to_vec();
        for _ in 0..=MAX_EXTENSIONS {
            let grid = Self::tabulate(&lo, &hi, n_points, &f)?;
            if grid.boundary_max() <= BOUNDARY_RATIO * grid.max_value() {
                return Ok(grid);
            }
            for d in 0..lo.len() {
                let half = 0.5 * (hi[d] - lo[d]);
                lo[d] -= half;
                hi[d] += half;
            }
        }
        Err(Error::SupportNotCovered {
            extensions: MAX_EXTENSIONS,
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.n_points[axis] - 1) as f64
    }

    pub fn same_axes(&self, other: &DensityGrid) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.n_points == other.n_points
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Largest value on the grid boundary.
    pub fn boundary_max(&self) -> f64 {
        let dim = self.dim();
        let mut idx = [0usize; 3];
        let mut best = 0.0f64;
        for (flat, v) in self.values.iter().enumerate() {
            decode(flat, &self.n_points, &mut idx);
            let on_boundary =
                (0..dim).any(|d| idx[d] == 0 || idx[d] == self.n_points[d] - 1);
            if on_boundary && *v > best {
                best = *v;
            }
        }
        best
    }

    /// Trapezoid weight of the node at `flat` (product of per-axis weights).
    pub fn trapezoid_weight(&self, flat: usize) -> f64 {
        let dim = self.dim();
        let mut idx = [0usize; 3];
        decode(flat, &self.n_points, &mut idx);
        let mut w = 1.0;
        for d in 0..dim {
            let h = self.spacing(d);
            let edge = idx[d] == 0 || idx[d] == self.n_points[d] - 1;
            w *= if edge { h / 2.0 } else { h };
        }
        w
    }

    /// Trapezoid integral of the tabulated values.
    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(flat, v)| self.trapezoid_weight(flat) * v)
            .sum()
    }

    /// Returns the normalized density and its normalization constant.
    pub fn normalized(&self) -> Result<(DensityGrid, f64)> {
        let z = self.integral();
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::ZeroEvidence);
        }
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v /= z;
        }
        Ok((out, z))
    }

    /// Coordinate of node `i` on a 1-D grid.
    pub fn coord_1d(&self, i: usize) -> f64 {
        self.lo[0] + self.spacing(0) * i as f64
    }

    /// Quadrature mean of a 1-D grid (self-normalizing).
    pub fn mean_1d(&self) -> Result<f64> {
        self.require_1d()?;
        let z = self.integral();
        if !(z > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        let m: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| self.trapezoid_weight(i) * v * self.coord_1d(i))
            .sum();
        Ok(m / z)
    }

    /// Quadrature variance of a 1-D grid (self-normalizing).
    pub fn variance_1d(&self) -> Result<f64> {
        let mean = self.mean_1d()?;
        let z = self.integral();
        let s: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = self.coord_1d(i) - mean;
                self.trapezoid_weight(i) * v * x * x
            })
            .sum();
        Ok(s / z)
    }

    /// Inverse-CDF draws from a 1-D grid density at the given uniforms.
    pub fn sample_inverse_cdf(&self, uniforms: &[f64]) -> Result<Vec<f64>> {
        self.require_1d()?;
        let n = self.n_points[0];
        let h = self.spacing(0);
        let mut cdf = vec![0.0; n];
        for i in 1..n {
            cdf[i] = cdf[i - 1] + h * (self.values[i - 1] + self.values[i]) / 2.0;
        }
        let total = cdf[n - 1];
        if !(total > 0.0) {
            return Err(Error::ZeroEvidence);
        }
        for c in cdf.iter_mut() {
            *c /= total;
        }
        let mut out = Vec::with_capacity(uniforms.len());
        for &u in uniforms {
            let u = u.clamp(0.0, 1.0);
            // First segment whose upper cdf reaches u.
            let mut j = cdf.partition_point(|c| *c < u);
            if j == 0 {
                j = 1;
            }
            if j >= n {
                j = n - 1;
            }
            let (c0, c1) = (cdf[j - 1], cdf[j]);
            let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
            out.push(self.coord_1d(j - 1) + frac * h);
        }
        Ok(out)
    }

    fn require_1d(&self) -> Result<()> {
        if self.dim() != 1 {
            return Err(Error::InvalidArgument {
                context: "DensityGrid",
                detail: String::from("operation requires a 1-D grid"),
            });
        }
        Ok(())
    }

    /// Stride-2 subgrid; requires every axis to have an odd point count.
    fn coarse(&self) -> Option<DensityGrid> {
        if self.n_points.iter().any(|n| n % 2 == 0 || *n < 3) {
            return None;
        }
        let dim = self.dim();
        let coarse_n: Vec<usize> = self.n_points.iter().map(|n| (n + 1) / 2).collect();
        let total: usize = coarse_n.iter().product();
        let mut values = vec![0.0; total];
        let mut idx = [0usize; 3];
        for (flat, value) in values.iter_mut().enumerate() {
            decode(flat, &coarse_n, &mut idx);
            let mut fine = [0usize; 3];
            for d in 0..dim {
                fine[d] = idx[d] * 2;
            }
            *value = self.values[encode(&fine, &self.n_points)];
        }
        Some(DensityGrid {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            n_points: coarse_n,
            values,
        })
    }
}

fn decode(mut flat: usize, n: &[usize], idx: &mut [usize; 3]) {
    for d in (0..n.len()).rev() {
        idx[d] = flat % n[d];
        flat /= n[d];
    }
}

fn encode(idx: &[usize; 3], n: &[usize]) -> usize {
    let mut flat = 0;
    for d in 0..n.len() {
        flat = flat * n[d] + idx[d];
    }
    flat
}

/// Total variation distance `½ ∫ |p̂ - q̂|` after normalizing each density
/// independently. Requires identical grids.
pub fn tv_distance_grid(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    if !p.same_axes(q) {
        return Err(Error::GridMismatch);
    }
    let (pn, _) = p.normalized()?;
    let (qn, _) = q.normalized()?;
    let tv: f64 = pn
        .values
        .iter()
        .zip(&qn.values)
        .enumerate()
        .map(|(flat, (a, b))| pn.trapezoid_weight(flat) * math::abs(a - b))
        .sum::<f64>()
        / 2.0;
    // Quadrature can push the estimate marginally past 1.
    Ok(tv.min(1.0))
}

/// TV distance together with a quadrature error estimate, taken as the
/// difference against the stride-2 subgrid result (zero when the grid cannot
/// be coarsened).
pub fn tv_with_refinement(p: &DensityGrid, q: &DensityGrid) -> Result<(f64, f64)> {
    let fine = tv_distance_grid(p, q)?;
    let err = match (p.coarse(), q.coarse()) {
        (Some(pc), Some(qc)) => math::abs(fine - tv_distance_grid(&pc, &qc)?),
        _ => 0.0,
    };
    Ok((fine, err))
}

/// Gaussian kernel density estimate of 1-D samples on the axes of `like`,
/// using Silverman's bandwidth.
pub fn kde_gaussian_1d(samples: &[f64], like: &DensityGrid) -> Result<DensityGrid> {
    if like.dim() != 1 {
        return Err(Error::InvalidArgument {
            context: "kde_gaussian_1d",
            detail: String::from("template grid must be 1-D"),
        });
    }
    if samples.len() < 2 {
        return Err(Error::NotEnoughSamples {
            got: samples.len(),
            need: 2,
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    let std = math::sqrt(var);
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q = |p: f64| sorted[((p * (sorted.len() - 1) as f64) as usize).min(sorted.len() - 1)];
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    let mut bw = 0.9 * spread * math::powf(n, -0.2);
    if !(bw > 0.0) {
        bw = 1e-3 * (like.hi[0] - like.lo[0]);
    }
    let inv2b2 = 1.0 / (2.0 * bw * bw);
    let values: Vec<f64> = (0..like.n_points[0])
        .map(|i| {
            let x = like.coord_1d(i);
            samples
                .iter()
                .map(|s| math::exp(-(x - s) * (x - s) * inv2b2))
                .sum::<f64>()
        })
        .collect();
    Ok(DensityGrid {
        lo: like.lo.clone(),
        hi: like.hi.clone(),
        n_points: like.n_points.clone(),
        values,
    })
}

/// Standard normal density, unnormalized constants included.
pub fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    math::exp(-0.5 * z * z) / (std * math::sqrt(math::TAU))
}
