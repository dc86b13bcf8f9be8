//! Seeded random fixtures for tests and verification runs.

use crate::linalg::{hermitian_part, CMatrix, C64};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn random_complex_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| random_complex(rng))
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    hermitian_part(&random_complex_matrix(rng, n))
}

/// Random PSD matrix A†A, scaled to unit max eigenvalue order.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_complex_matrix(rng, n);
    let m = a.adjoint() * &a;
    let s = m.trace().re / n as f64;
    m.scale(1.0 / s.max(f64::MIN_POSITIVE))
}

/// Random full-rank density matrix.
pub fn random_density(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let m = random_psd(rng, n);
    let tr = m.trace().re;
    m.scale(1.0 / tr)
}

/// Haar-distributed unitary via QR of a Ginibre matrix, with the phase
/// convention fixed so the factor is unique.
pub fn haar_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let a = random_complex_matrix(rng, n);
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

pub fn random_unit_vector(rng: &mut ChaCha8Rng) -> nalgebra::Vector3<f64> {
    loop {
        let v = random_vector3(rng, 1.0);
        let n = v.norm();
        if n > 1e-6 {
            return v / n;
        }
    }
}

pub fn random_vector3(rng: &mut ChaCha8Rng, scale: f64) -> nalgebra::Vector3<f64> {
    let x: f64 = StandardNormal.sample(rng);
    let y: f64 = StandardNormal.sample(rng);
    let z: f64 = StandardNormal.sample(rng);
    nalgebra::Vector3::new(x * scale, y * scale, z * scale)
}
