//! Discrete far-field operator: Toeplitz assembly, spectral norm and the
//! multiplicative noise model.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forward::{FarFieldBand, FrequencyGrid};
use crate::geometry::Direction;
use crate::matrix::{vec_norm, CMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("band has {plus}+{minus} samples, expected {expected_plus}+{expected_minus}")]
    SampleCount { plus: usize, minus: usize, expected_plus: usize, expected_minus: usize },
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("power iteration did not converge in {0} iterations")]
    NoConvergence(usize),
    #[error("invalid noise level {0}")]
    InvalidNoise(f64),
}

/// `F[n][m] = Δω u∞(κ + ω_{n−m+1})` for `n ≥ m`, `Δω u∞(κ − ω_{m−n})` for `n < m`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzMatrix {
    pub entries: CMatrix,
    pub grid: FrequencyGrid,
    pub direction: Direction,
}

pub fn assemble_toeplitz(band: &FarFieldBand) -> Result<ToeplitzMatrix, OperatorError> {
    let n = band.grid.n;
    if band.plus.len() != n || band.minus.len() + 1 != n {
        return Err(OperatorError::SampleCount {
            plus: band.plus.len(),
            minus: band.minus.len(),
            expected_plus: n,
            expected_minus: n.saturating_sub(1),
        });
    }
    let dw = band.grid.delta();
    let entries =
        CMatrix::from_fn(n, n, |r, c| if r >= c { band.plus[r - c] * dw } else { band.minus[c - r - 1] * dw });
    Ok(ToeplitzMatrix { entries, grid: band.grid, direction: band.direction })
}

pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITER: usize = 10_000;

/// Largest singular value by power iteration on `AᴴA`.
pub fn spectral_norm(a: &CMatrix) -> Result<f64, OperatorError> {
    if !a.is_square() {
        return Err(OperatorError::NotSquare(a.rows(), a.cols()));
    }
    let n = a.rows();
    if n == 0 || a.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let aha = a.adjoint().matmul(a);
    // fixed pseudo-random start so no structured input is orthogonal to it
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> =
        (0..n).map(|_| Complex64::new(rng.random::<f64>() + 0.5, rng.random::<f64>())).collect();
    let nv = vec_norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut prev = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = aha.matvec(&v);
        // Rayleigh quotient vᴴ(AᴴA)v with ‖v‖ = 1
        let rq: f64 = v.iter().zip(&w).map(|(x, y)| (x.conj() * y).re).sum();
        let nw = vec_norm(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / nw).collect();
        if (rq - prev).abs() <= POWER_TOL * rq.abs() {
            return Ok(rq.max(0.0).sqrt());
        }
        prev = rq;
    }
    Err(OperatorError::NoConvergence(POWER_MAX_ITER))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseDistribution {
    /// Real and imaginary parts uniform on `[−1, 1]`.
    #[default]
    Uniform,
    /// Real and imaginary parts standard normal.
    Gaussian,
}

/// Relative noise level `δ` and generator seed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

impl NoiseSpec {
    pub fn is_active(&self) -> bool {
        self.level > 0.0
    }
}

/// Words of ChaCha output reserved for each matrix entry.
const WORDS_PER_ENTRY: u128 = 8;

/// Noise matrix `M` for `(seed, stream)`; entry `k` (row-major) is a pure
/// function of `(seed, stream, k)`.
pub fn noise_matrix(n: usize, spec: &NoiseSpec, stream: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream);
    CMatrix::from_fn(n, n, |r, c| {
        rng.set_word_pos((r * n + c) as u128 * WORDS_PER_ENTRY);
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        match spec.distribution {
            NoiseDistribution::Uniform => Complex64::new(2.0 * u1 - 1.0, 2.0 * u2 - 1.0),
            NoiseDistribution::Gaussian => {
                // Box-Muller; 1 − u1 lies in (0, 1]
                let rad = (-2.0 * (1.0 - u1).ln()).sqrt();
                Complex64::from_polar(rad, 2.0 * PI * u2)
            }
        }
    })
}

/// `F + δ‖F‖₂M`. The result is in general not Toeplitz.
pub fn add_noise(f: &CMatrix, spec: &NoiseSpec, stream: u64) -> Result<CMatrix, OperatorError> {
    if !(spec.level >= 0.0) || !spec.level.is_finite() {
        return Err(OperatorError::InvalidNoise(spec.level));
    }
    if spec.level == 0.0 {
        return Ok(f.clone());
    }
    let norm = spectral_norm(f)?;
    let m = noise_matrix(f.rows(), spec, stream);
    Ok(f.add(&m.scale(Complex64::new(spec.level * norm, 0.0))))
}

pub const MATRIX_CSV_HEADER: &str = "row,col,re,im";

pub fn write_matrix_csv<W: Write>(mut w: W, a: &CMatrix) -> std::io::Result<()> {
    writeln!(w, "{MATRIX_CSV_HEADER}")?;
    for r in 0..a.rows() {
        for c in 0..a.cols() {
            let v = a[(r, c)];
            writeln!(w, "{r},{c},{},{}", crate::fmt_e(v.re), crate::fmt_e(v.im))?;
        }
    }
    Ok(())
}
