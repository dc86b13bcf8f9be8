//! The quantum linear Boltzmann equation for a tracer particle in a Maxwell
//! gas: two-body collision kinematics, the L function in its monitoring and
//! Diósi variants, the complex in-rate M_in, the classical out-rate, and a
//! momentum-grid generator with a trace-consistent discrete loss term.
//!
//! The tracer (mass `M`) moves through an ideal gas (particle mass `m`,
//! inverse temperature `β`, density `n`); collisions are described by a
//! [`ScatteringModel`] through its amplitude on the relative momenta. The
//! master equation for the tracer's momentum-representation density matrix is
//!
//! ```text
//! ∂_t ρ(P,P′) = ∫dQ M_in(P,P′;Q) ρ(P−Q,P′−Q) − ½[M_out(P)+M_out(P′)] ρ(P,P′)
//! ```
//!
//! with `M_in(P,P′;Q) = ∫_{K⊥Q} d²K L(K,P−Q;Q) L*(K,P′−Q;Q)`. On the
//! momentum diagonal this reduces to the classical linear Boltzmann equation;
//! its off-diagonal part carries collisional decoherence and dissipation.
//!
//! Natural units ħ = k_B = 1 throughout.

mod grid;
mod kernel;

pub use grid::{MomentumDensityMatrix, MomentumGrid3, DENSE_MAX_AXIS};
pub use kernel::{GeneratorOptions, RatePairKernel, TraceMode};

use crate::gasenv::GasParams;
use crate::linalg::C64;
use crate::quad::{self, QuadError, QuadratureSpec};
use crate::scattering::{self, ScatteringError, ScatteringModel};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QlbeError {
    #[error("tracer mass must be strictly positive and finite, got {0}")]
    NonPositiveMass(f64),
    #[error("momentum transfer Q must be nonzero")]
    ZeroQ,
    #[error("K must lie in the plane perpendicular to Q: |K·Q| = {dot:e} exceeds {tol:e}")]
    KNotPerpendicular { dot: f64, tol: f64 },
    #[error("grid points per axis must be an odd integer >= 3, got {0}")]
    BadAxisCount(usize),
    #[error("grid extent must be strictly positive and finite, got {0}")]
    NonPositiveExtent(f64),
    #[error("dense coherence storage is limited to {max}^3 grids, this grid has {got} points per axis")]
    DenseTooLarge { max: usize, got: usize },
    #[error("coherence pair ({0}, {1}) is not a valid off-diagonal grid pair")]
    InvalidPair(usize, usize),
    #[error("state and kernel live on different grids or track different coherence pairs")]
    GridMismatch,
    #[error("the reduced diagonal in-rate requires a rotationally invariant amplitude")]
    AnisotropicModel,
    #[error("diagonal weights length {got} does not match grid size {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
}

/// Tracer-particle mass `M`; the gas-particle mass `m` lives in
/// [`GasParams`]. The reduced mass m* = mM/(m+M) governs the relative-motion
/// kinematics of each collision.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BrownianParams {
    pub mass: f64,
}

impl BrownianParams {
    pub fn new(mass: f64) -> Result<Self, QlbeError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(QlbeError::NonPositiveMass(mass));
        }
        Ok(Self { mass })
    }

    /// Reduced mass m* = mM/(m+M).
    pub fn reduced_mass(&self, gas: &GasParams) -> f64 {
        gas.mass * self.mass / (gas.mass + self.mass)
    }

    /// Mass ratio m/M.
    pub fn mass_ratio(&self, gas: &GasParams) -> f64 {
        gas.mass / self.mass
    }

    /// RMS single-axis thermal momentum √(M/β) of the tracer.
    pub fn thermal_momentum(&self, beta: f64) -> f64 {
        (self.mass / beta).sqrt()
    }
}

/// Relative momentum rel(p, P) = (m*/m) p − (m*/M) P of a gas particle with
/// momentum `p` and the tracer with momentum `cap_p`.
pub fn rel(
    p: &Vector3<f64>,
    cap_p: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
) -> Vector3<f64> {
    let mstar = tracer.reduced_mass(gas);
    p * (mstar / gas.mass) - cap_p * (mstar / tracer.mass)
}

/// Split `p` into its components parallel and perpendicular to `q`.
pub fn decompose(
    p: &Vector3<f64>,
    q: &Vector3<f64>,
) -> Result<(Vector3<f64>, Vector3<f64>), QlbeError> {
    let q2 = q.norm_squared();
    if !(q2 > 0.0) {
        return Err(QlbeError::ZeroQ);
    }
    let par = q * (p.dot(q) / q2);
    Ok((par, p - par))
}

/// Which form of the L function enters the in-rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LVariant {
    /// Monitoring form: the amplitude arguments follow the tracer momentum
    /// through its component perpendicular to the transfer.
    Monitoring,
    /// Diósi's 1995 form: the amplitude arguments are independent of the
    /// tracer momentum, so the in-rate involves only |f|².
    Diosi,
}

/// Relative tolerance for the K ⊥ Q precondition of [`l_fn`].
pub const PERP_REL_TOL: f64 = 1e-9;

fn check_q(q: &Vector3<f64>) -> Result<f64, QlbeError> {
    let qn = q.norm();
    if !(qn > 0.0) {
        return Err(QlbeError::ZeroQ);
    }
    Ok(qn)
}

fn l_prefactor(qn: f64, gas: &GasParams, tracer: &BrownianParams) -> f64 {
    let mstar = tracer.reduced_mass(gas);
    (gas.density * gas.mass / (qn * mstar * mstar)).sqrt()
}

/// The L function: one Lindblad-operator weight per (transfer `q`,
/// perpendicular momentum `k`) pair,
///
/// ```text
/// L(K,P;Q) = √(n m/(Q m*²)) μ^{1/2}(K + (1+m/M)Q/2 + (m/M)P_∥Q)
///            · f(rel(K,P_⊥Q) − Q/2, rel(K,P_⊥Q) + Q/2)
/// ```
///
/// `k` must lie in the plane perpendicular to `q`; both amplitude arguments
/// then have equal moduli, so the collision is elastic in the relative motion.
pub fn l_fn(
    model: &dyn ScatteringModel,
    k: &Vector3<f64>,
    p: &Vector3<f64>,
    q: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
) -> Result<C64, QlbeError> {
    let qn = check_q(q)?;
    let dot = k.dot(q).abs();
    let tol = PERP_REL_TOL * k.norm() * qn;
    if dot > tol {
        return Err(QlbeError::KNotPerpendicular { dot, tol });
    }
    let ratio = tracer.mass_ratio(gas);
    let (p_par, p_perp) = decompose(p, q)?;
    let mu_arg = k + q * (0.5 * (1.0 + ratio)) + p_par * ratio;
    let r = rel(k, &p_perp, gas, tracer);
    let arg_out = r - q * 0.5;
    let arg_in = r + q * 0.5;
    debug_assert!(
        (arg_out.norm() - arg_in.norm()).abs() <= 1e-9 * arg_in.norm().max(1e-300),
        "amplitude arguments must have equal moduli"
    );
    let f = model.amplitude(0, &arg_out, 0, &arg_in)?;
    Ok(f * l_prefactor(qn, gas, tracer) * gas.maxwell_density(&mu_arg).sqrt())
}

/// Diósi's variant of the L function: the amplitude arguments
/// ((m*/m)K ∓ Q/2) do not depend on the tracer momentum, and the full `p`
/// (not just its parallel part) shifts the Maxwell factor. `k` is an
/// unrestricted 3-vector here.
pub fn l_diosi(
    model: &dyn ScatteringModel,
    k: &Vector3<f64>,
    p: &Vector3<f64>,
    q: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
) -> Result<C64, QlbeError> {
    let qn = check_q(q)?;
    let ratio = tracer.mass_ratio(gas);
    let mstar = tracer.reduced_mass(gas);
    let mu_arg = k + q * (0.5 * (1.0 + ratio)) + p * ratio;
    let s = k * (mstar / gas.mass);
    let f = model.amplitude(0, &(s - q * 0.5), 0, &(s + q * 0.5))?;
    Ok(f * l_prefactor(qn, gas, tracer) * gas.maxwell_density(&mu_arg).sqrt())
}

/// Complex in-rate `M_in(P,P′;Q) = ∫_{K⊥Q} d²K L(K,P−Q;Q) L*(K,P′−Q;Q)`
/// (monitoring form). Hermitian under (P,P′) swap with conjugation; real and
/// non-negative on the diagonal P = P′.
pub fn m_in(
    model: &dyn ScatteringModel,
    p: &Vector3<f64>,
    p_prime: &Vector3<f64>,
    q: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
) -> Result<C64, QlbeError> {
    m_in_variant(model, LVariant::Monitoring, p, p_prime, q, gas, tracer, spec)
}

/// [`m_in`] with a selectable L-function variant.
#[allow(clippy::too_many_arguments)]
pub fn m_in_variant(
    model: &dyn ScatteringModel,
    variant: LVariant,
    p: &Vector3<f64>,
    p_prime: &Vector3<f64>,
    q: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
) -> Result<C64, QlbeError> {
    check_q(q)?;
    let (e1, e2) = plane_basis(q);
    let width = (gas.mass / gas.beta).sqrt();
    let pa = p - q;
    let pb = p_prime - q;
    // The Gaussian envelope follows the in-plane peak of the Maxwell factors:
    // at the origin for the monitoring form (its Maxwell shifts are parallel
    // to q), at −(m/M)·midpoint_⊥ for the Diósi form.
    let center = match variant {
        LVariant::Monitoring => [0.0, 0.0],
        LVariant::Diosi => {
            let mid = (pa + pb) * 0.5;
            let (_, mid_perp) = decompose(&mid, q)?;
            let c = mid_perp * (-tracer.mass_ratio(gas));
            [c.dot(&e1), c.dot(&e2)]
        }
    };
    let failure: Mutex<Option<QlbeError>> = Mutex::new(None);
    let l_eval = |k: &Vector3<f64>, pp: &Vector3<f64>| -> C64 {
        let r = match variant {
            LVariant::Monitoring => l_fn(model, k, pp, q, gas, tracer),
            LVariant::Diosi => l_diosi(model, k, pp, q, gas, tracer),
        };
        match r {
            Ok(v) => v,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                C64::default()
            }
        }
    };
    let value = quad::integrate_plane_offset(
        |x, y| {
            let k = e1 * x + e2 * y;
            l_eval(&k, &pa) * l_eval(&k, &pb).conj()
        },
        width,
        center,
        spec,
    )?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(value)
}

/// Orthonormal basis of the plane perpendicular to `q`.
pub(crate) fn plane_basis(q: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let qh = q.normalize();
    let seed = if qh.x.abs() <= qh.y.abs() && qh.x.abs() <= qh.z.abs() {
        Vector3::x()
    } else if qh.y.abs() <= qh.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let e1 = (seed - qh * qh.dot(&seed)).normalize();
    let e2 = qh.cross(&e1);
    (e1, e2)
}

/// Diagonal in-rate `M_in(P,P;Q)` for rotationally invariant amplitudes,
/// reduced to a single radial quadrature.
///
/// On the diagonal the plane integral has the integrand
/// `c · e^{−βa²/2m} e^{−βK²/2m} |f|²(|K−c′|)` with all shifts fixed by the
/// parallel/perpendicular split of P; polar coordinates around c′ turn the
/// angular integral into a Bessel I₀ factor. This evaluator agrees with
/// [`m_in`] to the accuracy of the I₀ approximation (~1e-7 relative) and is
/// the fast path used by [`RatePairKernel`].
pub fn m_in_diagonal(
    model: &dyn ScatteringModel,
    p: &Vector3<f64>,
    q: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
) -> Result<f64, QlbeError> {
    if !model.is_rotationally_invariant() {
        return Err(QlbeError::AnisotropicModel);
    }
    let qn = check_q(q)?;
    let ratio = tracer.mass_ratio(gas);
    let p_par = p.dot(q) / qn;
    let p_perp = (p.norm_squared() - p_par * p_par).max(0.0).sqrt();
    let ev = kernel::DiagonalEvaluator::new(model, gas, tracer, ratio * p_perp);
    let f_row = ev.amplitude_row(qn)?;
    Ok(ev.eval(p.norm_squared(), p_par * qn, qn, &f_row))
}

/// Classical out-rate `M_out(P) = n ∫d³p₀ μ(p₀) (|rel(p₀,P)|/m*) σ(|rel|)`:
/// the thermally averaged collision rate of a tracer moving at momentum `P`.
///
/// This is the continuum 3D formula; the grid-consistent discrete loss
/// Σ_Q M_in(P+Q,P+Q;Q) ΔQ³ lives on [`RatePairKernel`]. For rotationally
/// invariant amplitudes the angular average is done analytically and only a
/// radial quadrature over the relative speed remains.
pub fn m_out_cl(
    model: &dyn ScatteringModel,
    p: &Vector3<f64>,
    gas: &GasParams,
    tracer: &BrownianParams,
    spec: &QuadratureSpec,
) -> Result<f64, QlbeError> {
    let mstar = tracer.reduced_mass(gas);
    let failure: Mutex<Option<QlbeError>> = Mutex::new(None);
    let sigma = |u: f64| -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        match model.closed_form_cross_section(u, 0) {
            Some(s) => s,
            None => match scattering::total_cross_section(model, u, 0, spec) {
                Ok(s) => s,
                Err(e) => {
                    failure.lock().unwrap().get_or_insert(e.into());
                    0.0
                }
            },
        }
    };
    let value = if model.is_rotationally_invariant() {
        // w = (m*/m) p₀ is Gaussian with per-axis std s; the integrand
        // depends on |w − c ẑ| only, so the angular integral is analytic.
        let c = (mstar / tracer.mass) * p.norm();
        let s = mstar / (gas.mass * gas.beta).sqrt();
        let u_max = c + s * 80.0f64.sqrt();
        quad::converge(spec, |level| {
            let n = spec.radial_nodes << level;
            let gl = quad::gauss_legendre(n);
            let vals = crate::par::map_range(n, |i| {
                let u = 0.5 * u_max * (gl.nodes[i] + 1.0);
                let w = 0.5 * u_max * gl.weights[i];
                let g = u / mstar * sigma(u);
                let env = if c > 0.0 {
                    let x = (u - c) / s;
                    (-0.5 * x * x).exp() * (-(-2.0 * u * c / (s * s)).exp_m1()) / c
                } else {
                    2.0 * u / (s * s) * (-0.5 * u * u / (s * s)).exp()
                };
                w * u * g * env
            });
            C64::new(
                vals.iter().sum::<f64>() * gas.density / (s * (2.0 * PI).sqrt()),
                0.0,
            )
        })?
    } else {
        quad::integrate_maxwell_3d(
            |p0| {
                let r = rel(p0, p, gas, tracer).norm();
                C64::new(r / mstar * sigma(r), 0.0)
            },
            gas,
            spec,
        )? * gas.density
    };
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(value.re)
}
