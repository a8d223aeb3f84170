//! Cyclic Jacobi eigensolver for Hermitian matrices and the positive operator
//! `F_# = |Re F| + |Im F|`.

use num_complex::Complex64;
use thiserror::Error;

use crate::forward::FrequencyGrid;
use crate::geometry::Direction;
use crate::matrix::CMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {limit:e}")]
    NotHermitian { defect: f64, limit: f64 },
    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal mass {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("eigenvalue {value:e} is too negative for a positive operator (largest {max:e})")]
    NotPositive { value: f64, max: f64 },
}

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const OFF_DIAGONAL_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 60;
pub const CLAMP_TOL: f64 = 1e-12;

/// Eigenvalues in descending order; column `n` of `vectors` pairs with `values[n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_value(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn vector(&self, n: usize) -> Vec<Complex64> {
        self.vectors.column(n)
    }

    /// `V Λ Vᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply_function(|l| l)
    }

    /// `V f(Λ) Vᴴ`.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.len();
        let v = &self.vectors;
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        CMatrix::from_fn(n, n, |r, c| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += v[(r, k)] * v[(c, k)].conj() * fl[k];
            }
            acc
        })
    }

    /// `max_n ‖Aψ_n − λ_nψ_n‖`.
    pub fn max_residual(&self, a: &CMatrix) -> f64 {
        (0..self.len())
            .map(|n| {
                let psi = self.vector(n);
                let apsi = a.matvec(&psi);
                apsi.iter().zip(&psi).map(|(x, y)| (x - y * self.values[n]).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// `max |VᴴV − I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        let g = self.vectors.adjoint().matmul(&self.vectors);
        g.sub(&CMatrix::identity(self.len())).max_abs()
    }
}

/// Eigendecomposition of a Hermitian matrix by row-cyclic complex Jacobi rotations.
pub fn hermitian_eigen(a: &CMatrix) -> Result<EigenSystem, SpectralError> {
    if !a.is_square() {
        return Err(SpectralError::NotSquare(a.rows(), a.cols()));
    }
    let n = a.rows();
    let limit = HERMITIAN_TOL * a.max_abs();
    let defect = a.hermitian_defect();
    if defect > limit {
        return Err(SpectralError::NotHermitian { defect, limit });
    }
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let target = OFF_DIAGONAL_TOL * m.frobenius_norm();

    let off = |m: &CMatrix| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    s += m[(p, q)].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let o = off(&m);
        if o <= target {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(SpectralError::NoConvergence { sweeps, off: o });
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut m, &mut v, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|k| m[(k, k)].re).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&k| diag[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenSystem { values, vectors })
}

/// Annihilates `m[p][q]` with `J = E R`, where `E = diag(1, e^{−iφ})` makes the
/// pivot real and `R` is the real symmetric Jacobi rotation.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let b = apq.norm();
    if b == 0.0 {
        return;
    }
    let n = m.rows();
    let phase = apq / b;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * b);
    let t = if theta.is_finite() { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) } else { 0.0 };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let jpp = Complex64::new(c, 0.0);
    let jpq = Complex64::new(s, 0.0);
    let jqp = -phase.conj() * s;
    let jqq = phase.conj() * c;

    // A ← A J
    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * jpp + akq * jqp;
        m[(k, q)] = akp * jpq + akq * jqq;
    }
    // A ← Jᴴ A
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = jpp.conj() * apk + jqp.conj() * aqk;
        m[(q, k)] = jpq.conj() * apk + jqq.conj() * aqk;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
    m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
    // V ← V J
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * jpp + vkq * jqp;
        v[(k, q)] = vkp * jpq + vkq * jqq;
    }
}

/// `|A| = V|Λ|Vᴴ` for Hermitian `A`.
pub fn spectral_abs(a: &CMatrix) -> Result<CMatrix, SpectralError> {
    let eig = hermitian_eigen(a)?;
    Ok(eig.apply_function(f64::abs).hermitian_part())
}

/// `F_#` with its eigensystem and the acquisition metadata it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SharpOperator {
    pub matrix: CMatrix,
    pub eig: EigenSystem,
    pub direction: Direction,
    pub grid: FrequencyGrid,
}

/// `F_# = |(F + Fᴴ)/2| + |(F − Fᴴ)/(2i)|`, with eigenvalues in `[−1e−12 λ_max, 0)` clamped to zero.
pub fn sharpen(f: &CMatrix, direction: Direction, grid: FrequencyGrid) -> Result<SharpOperator, SpectralError> {
    if !f.is_square() {
        return Err(SpectralError::NotSquare(f.rows(), f.cols()));
    }
    let re = spectral_abs(&f.hermitian_part())?;
    let im = spectral_abs(&f.skew_hermitian_part())?;
    let matrix = re.add(&im).hermitian_part();
    let mut eig = hermitian_eigen(&matrix)?;
    let max = eig.max_value().max(0.0);
    for l in eig.values.iter_mut() {
        if *l < 0.0 {
            if *l < -CLAMP_TOL * max {
                return Err(SpectralError::NotPositive { value: *l, max });
            }
            *l = 0.0;
        }
    }
    Ok(SharpOperator { matrix, eig, direction, grid })
}
