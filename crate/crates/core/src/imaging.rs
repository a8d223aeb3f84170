//! Picard-series indicators, pulse-moment profiles and field scans.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::FrequencyGrid;
use crate::geometry::{Direction, Point, SamplingGrid};
use crate::matrix::inner;
use crate::spectral::SharpOperator;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("frequency grid of the test vector does not match the operator")]
    GridMismatch,
    #[error("direction mismatch: {0}")]
    DirectionMismatch(String),
    #[error("h profile has no support (all values are zero)")]
    NoSupport,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

const DIRECTION_TOL: f64 = 1e-9;

/// `φ_n = exp(−iτ_n(x̂·y/c − η))`, `n = 1..N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestVector {
    pub values: Vec<Complex64>,
    pub y: Point,
    pub eta: f64,
    pub direction: Direction,
    pub c: f64,
    pub grid: FrequencyGrid,
}

pub fn test_vector(y: &Point, eta: f64, dir: &Direction, c: f64, grid: &FrequencyGrid) -> TestVector {
    let s = dir.dot(y) / c - eta;
    let values = (1..=grid.n).map(|n| Complex64::from_polar(1.0, -grid.tau(n) * s)).collect();
    TestVector { values, y: *y, eta, direction: *dir, c, grid: *grid }
}

/// Truncated eigensystem of one `F_#`, ready for repeated Picard sums.
#[derive(Clone, Debug)]
pub struct PicardKernel {
    pub direction: Direction,
    pub grid: FrequencyGrid,
    /// `conj(ψ_n)` for the retained eigenpairs.
    rows: Vec<Vec<Complex64>>,
    inv_values: Vec<f64>,
    degenerate: bool,
}

impl PicardKernel {
    /// Keeps eigenpairs with `λ_n > cutoff_rel · λ_max`.
    pub fn new(sharp: &SharpOperator, cutoff_rel: f64) -> Result<Self, ImagingError> {
        if !(0.0..1.0).contains(&cutoff_rel) {
            return Err(ImagingError::InvalidInput(format!("cutoff_rel must lie in [0, 1), got {cutoff_rel}")));
        }
        let lmax = sharp.eig.max_value();
        let mut rows = Vec::new();
        let mut inv_values = Vec::new();
        if lmax > 0.0 {
            for (n, &l) in sharp.eig.values.iter().enumerate() {
                if l > cutoff_rel * lmax {
                    rows.push(sharp.eig.vector(n).iter().map(|v| v.conj()).collect());
                    inv_values.push(1.0 / l);
                }
            }
        }
        Ok(Self { direction: sharp.direction, grid: sharp.grid, rows, inv_values, degenerate: !(lmax > 0.0) })
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Picard sum for a test vector with phase parameter `s = x̂·y/c − η`.
    pub fn eval_phase(&self, s: f64) -> f64 {
        if self.degenerate {
            return f64::INFINITY;
        }
        let n = self.grid.n;
        let z = Complex64::from_polar(1.0, -self.grid.delta() * s);
        // φ_k = z^k by recurrence; accurate to a few ulps for N in the hundreds
        let mut phi = Vec::with_capacity(n);
        let mut p = z;
        for _ in 0..n {
            phi.push(p);
            p *= z;
        }
        self.eval_vector(&phi)
    }

    pub fn eval(&self, y: &Point, eta: f64, c: f64) -> f64 {
        self.eval_phase(self.direction.dot(y) / c - eta)
    }

    fn eval_vector(&self, phi: &[Complex64]) -> f64 {
        if self.degenerate {
            return f64::INFINITY;
        }
        self.rows
            .iter()
            .zip(&self.inv_values)
            .map(|(row, inv)| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (a, b) in row.iter().zip(phi) {
                    acc += a * b;
                }
                acc.norm_sqr() * inv
            })
            .sum()
    }
}

/// `Σ_{λ_n > cutoff·λ_max} |ψ_nᴴφ|² / λ_n`, or `+∞` when `F_# = 0`.
pub fn picard_indicator(sharp: &SharpOperator, phi: &TestVector, cutoff_rel: f64) -> Result<f64, ImagingError> {
    if phi.grid != sharp.grid {
        return Err(ImagingError::GridMismatch);
    }
    if !phi.direction.approx_eq(&sharp.direction, DIRECTION_TOL) {
        return Err(ImagingError::DirectionMismatch("test vector and operator use different directions".into()));
    }
    let kernel = PicardKernel::new(sharp, cutoff_rel)?;
    if kernel.degenerate {
        return Ok(f64::INFINITY);
    }
    Ok(kernel
        .rows
        .iter()
        .zip(&kernel.inv_values)
        .map(|(row, inv)| {
            let psi: Vec<Complex64> = row.iter().map(|v| v.conj()).collect();
            inner(&psi, &phi.values).norm_sqr() * inv
        })
        .sum())
}

/// `1 / Σ_k I_k`, zero if any term is infinite.
fn harmonic(sum: f64) -> f64 {
    if sum.is_finite() {
        if sum > 0.0 {
            1.0 / sum
        } else {
            f64::INFINITY
        }
    } else {
        0.0
    }
}

fn check_pair(plus: &Direction, minus: &Direction) -> Result<(), ImagingError> {
    if !minus.approx_eq(&plus.neg(), DIRECTION_TOL) {
        return Err(ImagingError::DirectionMismatch("pair directions must be opposite".into()));
    }
    Ok(())
}

/// `W = [I^{(x̂)} + I^{(−x̂)}]⁻¹` at `(y, η)`.
pub fn w_indicator(
    plus: &SharpOperator,
    minus: &SharpOperator,
    y: &Point,
    eta: f64,
    c: f64,
    cutoff_rel: f64,
) -> Result<f64, ImagingError> {
    check_pair(&plus.direction, &minus.direction)?;
    let ip = picard_indicator(plus, &test_vector(y, eta, &plus.direction, c, &plus.grid), cutoff_rel)?;
    let im = picard_indicator(minus, &test_vector(y, eta, &minus.direction, c, &minus.grid), cutoff_rel)?;
    Ok(harmonic(ip + im))
}

/// How the per-direction Picard sums combine into a field value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// `1 / I^{(x̂)}` for a single direction.
    SingleDirection,
    /// `W` for one pair `(x̂, −x̂)`.
    SinglePairW,
    /// `1 / Σ_m (I^{(x̂_m)} + I^{(−x̂_m)})` over all pairs.
    MultiDirectionI,
}

fn check_combine(kernels: &[PicardKernel], combine: Combine) -> Result<(), ImagingError> {
    if kernels.is_empty() {
        return Err(ImagingError::InvalidInput("no operators to scan".into()));
    }
    let g = kernels[0].grid;
    if kernels.iter().any(|k| k.grid != g) {
        return Err(ImagingError::GridMismatch);
    }
    match combine {
        Combine::SingleDirection if kernels.len() != 1 => {
            Err(ImagingError::InvalidInput(format!("single-direction scan needs 1 operator, got {}", kernels.len())))
        }
        Combine::SinglePairW if kernels.len() != 2 => {
            Err(ImagingError::InvalidInput(format!("pair scan needs 2 operators, got {}", kernels.len())))
        }
        Combine::SingleDirection => Ok(()),
        Combine::SinglePairW | Combine::MultiDirectionI => {
            if !kernels.len().is_multiple_of(2) {
                return Err(ImagingError::InvalidInput("operators must come in (x̂, −x̂) pairs".into()));
            }
            for pair in kernels.chunks(2) {
                check_pair(&pair[0].direction, &pair[1].direction)?;
            }
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    Raw,
    MaxOne,
}

/// Indicator values at the cell centers of a grid (row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct IndicatorField {
    pub grid: SamplingGrid,
    pub values: Vec<f64>,
    pub normalization: Normalization,
}

impl IndicatorField {
    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn argmax(&self) -> Option<usize> {
        let m = self.max();
        if m > 0.0 {
            self.values.iter().position(|&v| v == m)
        } else {
            None
        }
    }

    /// Cells with value `≥ level · max`.
    pub fn superlevel_mask(&self, level: f64) -> Vec<bool> {
        let m = self.max();
        if m <= 0.0 {
            return vec![false; self.values.len()];
        }
        self.values.iter().map(|&v| v >= level * m).collect()
    }

    /// Centroid of the cells in the `level · max` superlevel set.
    pub fn centroid(&self, level: f64) -> Option<Point> {
        let mask = self.superlevel_mask(level);
        let mut sum = Point::origin(self.grid.dim());
        let mut count = 0usize;
        for (i, inside) in mask.iter().enumerate() {
            if *inside {
                sum = sum.add(&self.grid.cell_center(i));
                count += 1;
            }
        }
        (count > 0).then(|| sum.scale(1.0 / count as f64))
    }

    /// `(min, max)` of `x̂·y` over the `level · max` superlevel set.
    pub fn band(&self, dir: &Direction, level: f64) -> Option<(f64, f64)> {
        let mask = self.superlevel_mask(level);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (i, inside) in mask.iter().enumerate() {
            if *inside {
                let p = dir.dot(&self.grid.cell_center(i));
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Evaluates the combined indicator at every cell center of `grid`.
pub fn scan_field(
    kernels: &[PicardKernel],
    grid: &SamplingGrid,
    eta: f64,
    c: f64,
    combine: Combine,
) -> Result<IndicatorField, ImagingError> {
    check_combine(kernels, combine)?;
    for k in kernels {
        if k.direction.dim() != grid.dim() {
            return Err(ImagingError::DirectionMismatch(format!(
                "{}-dimensional direction on a {}-dimensional grid",
                k.direction.dim(),
                grid.dim()
            )));
        }
    }
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let y = grid.cell_center(i);
            let mut sum = 0.0;
            for k in kernels {
                sum += k.eval(&y, eta, c);
                if !sum.is_finite() {
                    break;
                }
            }
            harmonic(sum)
        })
        .collect();
    Ok(IndicatorField { grid: grid.clone(), values, normalization: Normalization::Raw })
}

/// Divides by the maximum if it is positive.
pub fn normalize(field: &IndicatorField) -> IndicatorField {
    let m = field.max();
    let values = if m > 0.0 { field.values.iter().map(|v| v / m).collect() } else { field.values.clone() };
    IndicatorField { grid: field.grid.clone(), values, normalization: Normalization::MaxOne }
}

/// Distinct values of `x̂·y` over cells with `|y| ≤ radius`, merged within `1e−12`.
fn distinct_projections(dir: &Direction, grid: &SamplingGrid, radius: f64) -> Vec<f64> {
    let mut p: Vec<f64> = grid.cell_centers().filter(|y| y.norm() <= radius).map(|y| dir.dot(&y)).collect();
    p.sort_by(f64::total_cmp);
    p.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    p
}

/// `h(η) = max_{y ∈ B_R} W_η(y)` for each `η`.
///
/// `W` depends on `y` only through `x̂·y`, so the maximum runs over distinct
/// projections of the cells inside `B_R`.
pub fn h_profile(
    plus: &PicardKernel,
    minus: &PicardKernel,
    grid: &SamplingGrid,
    radius: f64,
    etas: &[f64],
    c: f64,
) -> Result<Vec<f64>, ImagingError> {
    check_pair(&plus.direction, &minus.direction)?;
    if plus.grid != minus.grid {
        return Err(ImagingError::GridMismatch);
    }
    if etas.is_empty() {
        return Err(ImagingError::InvalidInput("empty η list".into()));
    }
    if etas.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ImagingError::InvalidInput("η values must be ascending".into()));
    }
    let proj = distinct_projections(&plus.direction, grid, radius);
    if proj.is_empty() {
        return Err(ImagingError::InvalidInput("no grid cells inside B_R".into()));
    }
    Ok(etas
        .par_iter()
        .map(|&eta| {
            proj.iter()
                .map(|&p| harmonic(plus.eval_phase(p / c - eta) + minus.eval_phase(-p / c - eta)))
                .fold(0.0, f64::max)
        })
        .collect())
}

/// Reference level subtracted before thresholding an h profile.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Threshold `rel · max h`.
    #[default]
    None,
    /// Threshold `med + rel · (max h − med)` with `med` the median of h.
    Median,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEstimate {
    pub eta1: f64,
    pub eta2: f64,
    pub t0: f64,
    pub width: f64,
}

/// First and last `η` where `h` reaches the threshold; `t0` is their midpoint.
pub fn estimate_pulse(
    h: &[f64],
    etas: &[f64],
    rel_threshold: f64,
    baseline: Baseline,
    c: f64,
) -> Result<PulseEstimate, ImagingError> {
    if h.len() != etas.len() || h.is_empty() {
        return Err(ImagingError::InvalidInput("h and η lists must be nonempty and of equal length".into()));
    }
    let max = h.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(ImagingError::NoSupport);
    }
    let floor = match baseline {
        Baseline::None => 0.0,
        Baseline::Median => {
            let mut s = h.to_vec();
            s.sort_by(f64::total_cmp);
            let m = s.len() / 2;
            if s.len() % 2 == 1 {
                s[m]
            } else {
                0.5 * (s[m - 1] + s[m])
            }
        }
    };
    let thr = floor + rel_threshold * (max - floor);
    let first = h.iter().position(|&v| v >= thr).expect("max reaches threshold");
    let last = h.iter().rposition(|&v| v >= thr).expect("max reaches threshold");
    let (eta1, eta2) = (etas[first], etas[last]);
    Ok(PulseEstimate { eta1, eta2, t0: 0.5 * (eta1 + eta2), width: c * (eta2 - eta1) })
}

/// `lo, lo + step, …` up to `hi` inclusive (within a hundredth of a step).
pub fn eta_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 0.01).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}
