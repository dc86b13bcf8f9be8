//! Dense complex linear algebra helpers shared by all generators.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub type C64 = num_complex::Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance below which negative eigenvalues of a nominally PSD
/// matrix are treated as roundoff and clamped to zero.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:e} (scale {scale:e})")]
    NotPositiveSemidefinite { min_eig: f64, scale: f64 },
    #[error("matrix is not Hermitian: defect {defect:e}")]
    NotHermitian { defect: f64 },
    #[error("matrix is not unitary: defect {defect:e}")]
    NotUnitary { defect: f64 },
    #[error("trace is not one: got {trace}")]
    NonUnitTrace { trace: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest entry of `m - m†`.
pub fn herm_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut d = 0.0f64;
    for i in 0..n {
        for j in i..n {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry of `s†s - 1`.
pub fn unitarity_defect(s: &CMatrix) -> f64 {
    let n = s.nrows();
    let mut g = s.adjoint() * s;
    for i in 0..n {
        g[(i, i)] -= C64::new(1.0, 0.0);
    }
    max_abs(&g)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> DVector<f64> {
    let mut ev = m.clone().symmetric_eigen().eigenvalues;
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues below `-PSD_CLAMP_TOL * ||m||` are rejected; small negative
/// eigenvalues inside that band are clamped to zero.
pub fn hermitian_sqrt(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    let eig = m.clone().symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = PSD_CLAMP_TOL * scale.max(f64::MIN_POSITIVE);
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -tol {
            return Err(LinalgError::NotPositiveSemidefinite {
                min_eig: *v,
                scale,
            });
        }
        *v = v.max(0.0).sqrt();
    }
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for k in 0..n {
        let col = eig.eigenvectors.column(k);
        let r = C64::new(roots[k], 0.0);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += r * col[i] * col[j].conj();
            }
        }
    }
    Ok(out)
}

/// Trace over the second (probe) tensor factor of a `(ds*dp) x (ds*dp)` matrix.
pub fn partial_trace_probe(m: &CMatrix, dim_system: usize, dim_probe: usize) -> CMatrix {
    debug_assert_eq!(m.nrows(), dim_system * dim_probe);
    let mut out = CMatrix::zeros(dim_system, dim_system);
    for i in 0..dim_system {
        for j in 0..dim_system {
            let mut s = C64::default();
            for k in 0..dim_probe {
                s += m[(i * dim_probe + k, j * dim_probe + k)];
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// A validated density matrix: Hermitian, unit trace, positive semidefinite
/// within tolerances.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    pub const HERM_TOL: f64 = 1e-10;
    pub const TRACE_TOL: f64 = 1e-10;

    pub fn new(entries: CMatrix) -> Result<Self, LinalgError> {
        let d = herm_defect(&entries);
        let scale = max_abs(&entries).max(f64::MIN_POSITIVE);
        if d > Self::HERM_TOL * scale.max(1.0) {
            return Err(LinalgError::NotHermitian { defect: d });
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > Self::TRACE_TOL || tr.im.abs() > Self::TRACE_TOL {
            return Err(LinalgError::NonUnitTrace { trace: tr.re });
        }
        let min_eig = hermitian_eigenvalues(&hermitian_part(&entries))[0];
        if min_eig < -PSD_CLAMP_TOL * scale {
            return Err(LinalgError::NotPositiveSemidefinite { min_eig, scale });
        }
        Ok(Self { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_inner(self) -> CMatrix {
        self.entries
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;
    use approx::assert_relative_eq;

    #[test]
    fn sqrt_of_identity_scaled() {
        let m = CMatrix::identity(3, 3).scale(4.0);
        let r = hermitian_sqrt(&m).unwrap();
        assert_relative_eq!(max_abs(&(r - CMatrix::identity(3, 3).scale(2.0))), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_squares_back() {
        let mut rng = testkit::rng(7);
        let m = testkit::random_psd(&mut rng, 5);
        let r = hermitian_sqrt(&m).unwrap();
        assert!(max_abs(&(&r * &r - &m)) < 1e-10 * max_abs(&m).max(1.0));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let mut m = CMatrix::identity(2, 2);
        m[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(matches!(
            hermitian_sqrt(&m),
            Err(LinalgError::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn partial_trace_of_kronecker_product() {
        let mut rng = testkit::rng(3);
        let a = testkit::random_complex_matrix(&mut rng, 3);
        let b = testkit::random_complex_matrix(&mut rng, 4);
        let joint = a.kronecker(&b);
        let red = partial_trace_probe(&joint, 3, 4);
        let expect = a.scale(1.0) * b.trace();
        assert!(max_abs(&(red - expect)) < 1e-12);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut rng = testkit::rng(11);
        let u = testkit::haar_unitary(&mut rng, 6);
        assert!(unitarity_defect(&u) < 1e-12);
    }

    #[test]
    fn density_validation() {
        let mut rng = testkit::rng(5);
        let rho = testkit::random_density(&mut rng, 4);
        let d = DensityMatrix::new(rho).unwrap();
        assert_eq!(d.dim(), 4);
        let bad = CMatrix::identity(2, 2); // trace 2
        assert!(DensityMatrix::new(bad).is_err());
    }
}
