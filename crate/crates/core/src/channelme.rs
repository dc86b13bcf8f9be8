//! Master equation for an immobile object with discrete internal channels in
//! an ideal gas: complex rate tensor, thermal energy shifts, and the
//! Lindblad-type generator acting on the channel-basis density matrix.
//!
//! The energy-conserving δ-function is reduced analytically: the radial part
//! of the outgoing momentum integral collapses onto the shell
//! p_α = √(p₀² − 2m(E_α−E_α₀)) with Jacobian m·p_α, leaving a thermal
//! average over incoming momenta and an angular integral over outgoing
//! directions.

use crate::gasenv::GasParams;
use crate::linalg::{CMatrix, C64};
use crate::par;
use crate::quad::{self, QuadError, QuadratureSpec};
use crate::scattering::{ScatteringError, ScatteringModel};
use nalgebra::{DMatrix, Vector3};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel basis must contain at least one energy")]
    EmptyBasis,
    #[error("channel energy must be finite, got {0}")]
    NonFiniteEnergy(f64),
    #[error("model has {model} channels but the basis has {basis}")]
    ChannelCountMismatch { model: usize, basis: usize },
    #[error("density matrix is {got}x{got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
}

/// Internal energy eigenstates |α⟩ with energies E_α.
#[derive(Debug, Clone)]
pub struct ChannelBasis {
    energies: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ChannelBasis {
    pub fn new(energies: Vec<f64>) -> Result<Self, ChannelError> {
        if energies.is_empty() {
            return Err(ChannelError::EmptyBasis);
        }
        if let Some(&e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(ChannelError::NonFiniteEnergy(e));
        }
        Ok(Self {
            energies,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.energies.len());
        self.labels = Some(labels);
        self
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn energy(&self, alpha: usize) -> f64 {
        self.energies[alpha]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn label(&self, alpha: usize) -> Option<&str> {
        self.labels.as_ref().map(|l| l[alpha].as_str())
    }

    /// Scale used for energy-equality comparisons.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, e| a.max(e.abs()))
    }
}

/// 1 iff E_α − E_α₀ = E_β − E_β₀ within tolerance: only transition pairs
/// with equal energy transfer contribute to the rate tensor.
pub fn chi(basis: &ChannelBasis, alpha: usize, beta: usize, alpha0: usize, beta0: usize) -> bool {
    let lhs = basis.energy(alpha) - basis.energy(alpha0);
    let rhs = basis.energy(beta) - basis.energy(beta0);
    let scale = basis.energy_scale();
    let tol = if scale > 0.0 { 1e-9 * scale } else { 1e-12 };
    (lhs - rhs).abs() <= tol
}

/// Outgoing momentum magnitude that conserves total energy in the
/// transition α₀ → α at incoming magnitude p₀, or `None` for a closed
/// channel.
pub fn on_shell_momentum(
    gas: &GasParams,
    basis: &ChannelBasis,
    p0: f64,
    alpha0: usize,
    alpha: usize,
) -> Option<f64> {
    let radicand = p0 * p0 - 2.0 * gas.mass * (basis.energy(alpha) - basis.energy(alpha0));
    if radicand > 0.0 {
        Some(radicand.sqrt())
    } else {
        None
    }
}

/// The complex rate coefficients M^{α₀β₀}_{αβ} arranged as an
/// (n²)×(n²) matrix over row (α,α₀), column (β,β₀), together with the
/// energy shifts ε_α and the oscillation frequencies ω_{αβ}.
#[derive(Debug, Clone)]
pub struct RateTensor {
    n: usize,
    m: CMatrix,
    eps: Vec<f64>,
    omega: DMatrix<f64>,
}

impl RateTensor {
    pub fn n_channels(&self) -> usize {
        self.n
    }

    /// M^{α₀β₀}_{αβ}.
    pub fn entry(&self, alpha: usize, beta: usize, alpha0: usize, beta0: usize) -> C64 {
        self.m[(alpha * self.n + alpha0, beta * self.n + beta0)]
    }

    /// Coefficient matrix M_{(α,α₀),(β,β₀)}; positive semidefinite for any
    /// valid scattering model.
    pub fn coefficient_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// Loss matrix B_{xy} = Σ_γ M^{xy}_{γγ}; Hermitian by the tensor
    /// symmetry.
    pub fn loss_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.n, self.n, |x, y| {
            (0..self.n).map(|g| self.entry(g, g, x, y)).sum()
        })
    }
}

fn check_model(model: &dyn ScatteringModel, basis: &ChannelBasis) -> Result<(), ChannelError> {
    if model.n_channels() != basis.len() {
        return Err(ChannelError::ChannelCountMismatch {
            model: model.n_channels(),
            basis: basis.len(),
        });
    }
    Ok(())
}

/// Radial rule for the on-shell thermal average: triples
/// (p₀, p_out, weight) with the weight carrying the Maxwell factor, the
/// Gauss-Legendre jacobian and the δ-shell factor m·p_out.
///
/// For positive energy transfer the integrand has a square-root threshold in
/// p₀, so the outgoing momentum is used as the integration variable instead
/// (dp₀ p₀ = dq q); the threshold then sits at q = 0 and the integrand is
/// smooth.
fn shell_rule(gas: &GasParams, de: f64, n_rad: usize) -> Vec<(f64, f64, f64)> {
    if de <= 0.0 {
        let (ps, ws) = quad::radial_maxwell_rule(gas, n_rad);
        ps.iter()
            .zip(&ws)
            .map(|(&p0, &w)| {
                let p_out = (p0 * p0 - 2.0 * gas.mass * de).sqrt();
                (p0, p_out, w * gas.mass * p_out)
            })
            .collect()
    } else {
        let q_max_sq = quad::radial_cutoff(gas).powi(2) - 2.0 * gas.mass * de;
        if q_max_sq <= 0.0 {
            // the open-channel region lies beyond the thermal cutoff
            return Vec::new();
        }
        let q_max = q_max_sq.sqrt();
        let gl = quad::gauss_legendre(n_rad);
        gl.nodes
            .iter()
            .zip(&gl.weights)
            .map(|(&x, &w)| {
                let q = 0.5 * q_max * (x + 1.0);
                let p0 = (q * q + 2.0 * gas.mass * de).sqrt();
                let boltz = (-gas.beta * p0 * p0 / (2.0 * gas.mass)).exp();
                (p0, q, w * 0.5 * q_max * gas.mass * q * q * p0 * boltz)
            })
            .collect()
    }
}

/// One rate coefficient M^{α₀β₀}_{αβ}, by nested thermal-radial × angular
/// quadrature of f_{αα₀} f*_{ββ₀} on the energy shell.
pub fn rate_entry(
    model: &dyn ScatteringModel,
    gas: &GasParams,
    basis: &ChannelBasis,
    spec: &QuadratureSpec,
    alpha: usize,
    beta: usize,
    alpha0: usize,
    beta0: usize,
) -> Result<C64, ChannelError> {
    check_model(model, basis)?;
    if !chi(basis, alpha, beta, alpha0, beta0) {
        return Ok(C64::default());
    }
    let invariant = model.is_rotationally_invariant();
    let failure: Mutex<Option<ScatteringError>> = Mutex::new(None);
    let amp = |ch_out: usize, p_out: &Vector3<f64>, ch_in: usize, p_in: &Vector3<f64>| -> C64 {
        match model.amplitude(ch_out, p_out, ch_in, p_in) {
            Ok(f) => f,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                C64::default()
            }
        }
    };
    let de = basis.energy(alpha) - basis.energy(alpha0);
    let value = quad::converge(spec, |level| {
        let radial = shell_rule(gas, de, spec.radial_nodes << level);
        let out_dirs = quad::sphere_points(spec.angular_order << level);
        let in_dirs = if invariant {
            vec![(Vector3::z(), 4.0 * std::f64::consts::PI)]
        } else {
            quad::sphere_points(spec.angular_order << level)
        };
        let mut sum = C64::default();
        for &(p0, p_out, w0) in &radial {
            let mut shell = C64::default();
            for (dir_in, w_in) in &in_dirs {
                let p_in = dir_in * p0;
                let mut ang = C64::default();
                for (dir_out, w_out) in &out_dirs {
                    let p_f = dir_out * p_out;
                    ang += amp(alpha, &p_f, alpha0, &p_in)
                        * amp(beta, &p_f, beta0, &p_in).conj()
                        * *w_out;
                }
                shell += ang * *w_in;
            }
            // the 1/4π averages the incoming directions sampled above
            sum += shell * (w0 / (4.0 * std::f64::consts::PI));
        }
        sum * (gas.density / (gas.mass * gas.mass)) * quad::maxwell_norm(gas)
    })?;
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e.into());
    }
    Ok(value)
}

/// Thermal energy shifts ε_α from the real part of the forward amplitude.
pub fn energy_shifts(
    model: &dyn ScatteringModel,
    gas: &GasParams,
    basis: &ChannelBasis,
    spec: &QuadratureSpec,
) -> Result<Vec<f64>, ChannelError> {
    check_model(model, basis)?;
    let mut eps = Vec::with_capacity(basis.len());
    for alpha in 0..basis.len() {
        let failure: Mutex<Option<ScatteringError>> = Mutex::new(None);
        let forward = |p: &Vector3<f64>| match model.amplitude(alpha, p, alpha, p) {
            Ok(f) => C64::new(f.re, 0.0),
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                C64::default()
            }
        };
        let avg = if model.is_rotationally_invariant() {
            quad::integrate_maxwell_radial(|p| forward(&(Vector3::z() * p)), gas, spec)?
        } else {
            quad::integrate_maxwell_3d(|p| forward(p), gas, spec)?
        };
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e.into());
        }
        eps.push(-2.0 * std::f64::consts::PI * gas.density / gas.mass * avg.re);
    }
    Ok(eps)
}

/// Builds the full rate tensor, energy shifts and frequencies. Entries are
/// computed in parallel over the upper triangle of the coefficient matrix;
/// the lower triangle follows from M^{α₀β₀}_{αβ} = conj(M^{β₀α₀}_{βα}).
pub fn rate_tensor(
    model: &dyn ScatteringModel,
    gas: &GasParams,
    basis: &ChannelBasis,
    spec: &QuadratureSpec,
) -> Result<RateTensor, ChannelError> {
    check_model(model, basis)?;
    let n = basis.len();
    let nn = n * n;
    let upper: Vec<(usize, usize)> = (0..nn)
        .flat_map(|r| (r..nn).map(move |c| (r, c)))
        .collect();
    let computed = par::map_range(upper.len(), |k| {
        let (r, c) = upper[k];
        let (alpha, alpha0) = (r / n, r % n);
        let (beta, beta0) = (c / n, c % n);
        rate_entry(model, gas, basis, spec, alpha, beta, alpha0, beta0)
    });
    let mut m = CMatrix::zeros(nn, nn);
    for (k, v) in computed.into_iter().enumerate() {
        let (r, c) = upper[k];
        let v = v?;
        m[(r, c)] = v;
        m[(c, r)] = v.conj();
    }
    let eps = energy_shifts(model, gas, basis, spec)?;
    let omega = DMatrix::from_fn(n, n, |a, b| {
        basis.energy(a) - basis.energy(b) + eps[a] - eps[b]
    });
    Ok(RateTensor { n, m, eps, omega })
}

/// Right-hand side of the channel master equation:
/// ∂_t ρ_{αβ} = −iω_{αβ}ρ_{αβ} + Σ_{α₀β₀} ρ_{α₀β₀} M^{α₀β₀}_{αβ}
///   − ½ Σ_{α₀γ} ρ_{α₀β} M^{α₀α}_{γγ} − ½ Σ_{β₀γ} ρ_{αβ₀} M^{ββ₀}_{γγ}.
pub fn generator_apply(rt: &RateTensor, rho: &CMatrix) -> Result<CMatrix, ChannelError> {
    let n = rt.n_channels();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(ChannelError::DimensionMismatch {
            expected: n,
            got: rho.nrows(),
        });
    }
    let b = rt.loss_matrix();
    let mut out = CMatrix::zeros(n, n);
    for alpha in 0..n {
        for beta in 0..n {
            let mut d = -C64::i() * rt.omega()[(alpha, beta)] * rho[(alpha, beta)];
            for alpha0 in 0..n {
                for beta0 in 0..n {
                    d += rho[(alpha0, beta0)] * rt.entry(alpha, beta, alpha0, beta0);
                }
                d -= rho[(alpha0, beta)] * b[(alpha0, alpha)] * 0.5;
                d -= rho[(alpha, alpha0)] * b[(beta, alpha0)] * 0.5;
            }
            out[(alpha, beta)] = d;
        }
    }
    Ok(out)
}
