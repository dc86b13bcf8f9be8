//! Monitoring calculus on finite-dimensional system ⊗ probe spaces.
//!
//! A hypothetical detector fires with probability Δt·tr(Γϱ) per interval;
//! the state is conditioned on click / no-click, and the ensemble average
//! over both branches yields a Lindblad-form generator in the continuous
//! limit. This module implements the finite-Δt map and the generator on
//! dense matrices so the two routes can be compared numerically.

use crate::linalg::{
    self, hermitian_sqrt, max_abs, partial_trace_probe, unitarity_defect, CMatrix, DensityMatrix,
    LinalgError, C64,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonteError {
    #[error("time step must be strictly positive, got {0}")]
    NonPositiveDt(f64),
    #[error("collision probability {prob} exceeds one; shrink dt below {dt_max:e}")]
    ProbabilityExceedsOne { prob: f64, dt_max: f64 },
    #[error("conditioning on an event of probability {0:e}")]
    ZeroEventProbability(f64),
    #[error("joint operator is {got}x{got}, model space is {expected}-dimensional")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Detector outcome in one monitoring interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionEvent {
    Click,
    NoClick,
}

/// A rate operator Γ, scattering matrix S, probe state ρ_E and system
/// Hamiltonian H on a joint space of dimension dim_system · dim_probe.
///
/// Γ^{1/2} and T = i(1 − S) are computed once at construction.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    dim_system: usize,
    dim_probe: usize,
    gamma: CMatrix,
    s_matrix: CMatrix,
    rho_env: CMatrix,
    hamiltonian: CMatrix,
    gamma_sqrt: CMatrix,
    t_matrix: CMatrix,
}

/// Maximum allowed entry of S†S − 1.
pub const UNITARITY_TOL: f64 = 1e-10;

/// T = i(1 − S), the nontrivial part of the scattering matrix. Unitarity of
/// S is required and implies i(T − T†) = −T†T.
pub fn t_from_s(s_matrix: &CMatrix) -> Result<CMatrix, MonteError> {
    let defect = unitarity_defect(s_matrix);
    if defect > UNITARITY_TOL {
        return Err(LinalgError::NotUnitary { defect }.into());
    }
    let n = s_matrix.nrows();
    let mut t = -s_matrix.clone();
    for i in 0..n {
        t[(i, i)] += C64::new(1.0, 0.0);
    }
    Ok(t * C64::i())
}

/// Residual of the unitarity relation, ‖i(T − T†) + T†T‖_max.
pub fn t_relation_residual(t: &CMatrix) -> f64 {
    let r = (t - t.adjoint()) * C64::i() + t.adjoint() * t;
    max_abs(&r)
}

impl FiniteModel {
    pub fn new(
        dim_system: usize,
        dim_probe: usize,
        gamma: CMatrix,
        s_matrix: CMatrix,
        rho_env: CMatrix,
        hamiltonian: CMatrix,
    ) -> Result<Self, MonteError> {
        let joint = dim_system * dim_probe;
        for m in [&gamma, &s_matrix] {
            if m.nrows() != joint || m.ncols() != joint {
                return Err(MonteError::DimensionMismatch {
                    expected: joint,
                    got: m.nrows(),
                });
            }
        }
        if rho_env.nrows() != dim_probe {
            return Err(MonteError::DimensionMismatch {
                expected: dim_probe,
                got: rho_env.nrows(),
            });
        }
        if hamiltonian.nrows() != dim_system {
            return Err(MonteError::DimensionMismatch {
                expected: dim_system,
                got: hamiltonian.nrows(),
            });
        }
        let gd = linalg::herm_defect(&gamma);
        if gd > 1e-10 * max_abs(&gamma).max(1.0) {
            return Err(LinalgError::NotHermitian { defect: gd }.into());
        }
        let hd = linalg::herm_defect(&hamiltonian);
        if hd > 1e-10 * max_abs(&hamiltonian).max(1.0) {
            return Err(LinalgError::NotHermitian { defect: hd }.into());
        }
        DensityMatrix::new(rho_env.clone())?;
        let gamma_sqrt = hermitian_sqrt(&gamma)?;
        let t_matrix = t_from_s(&s_matrix)?;
        Ok(Self {
            dim_system,
            dim_probe,
            gamma,
            s_matrix,
            rho_env,
            hamiltonian,
            gamma_sqrt,
            t_matrix,
        })
    }

    pub fn dim_system(&self) -> usize {
        self.dim_system
    }

    pub fn dim_probe(&self) -> usize {
        self.dim_probe
    }

    pub fn dim_joint(&self) -> usize {
        self.dim_system * self.dim_probe
    }

    pub fn gamma(&self) -> &CMatrix {
        &self.gamma
    }

    pub fn s_matrix(&self) -> &CMatrix {
        &self.s_matrix
    }

    pub fn t_matrix(&self) -> &CMatrix {
        &self.t_matrix
    }

    pub fn rho_env(&self) -> &CMatrix {
        &self.rho_env
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    fn check_joint(&self, rho_tot: &DensityMatrix) -> Result<(), MonteError> {
        if rho_tot.dim() != self.dim_joint() {
            return Err(MonteError::DimensionMismatch {
                expected: self.dim_joint(),
                got: rho_tot.dim(),
            });
        }
        Ok(())
    }

    /// Γ^{1/2} ϱ Γ^{1/2}, the positive operator behind every conditioning
    /// formula.
    fn sandwich(&self, rho: &CMatrix) -> CMatrix {
        &self.gamma_sqrt * rho * &self.gamma_sqrt
    }

    /// Probability Δt·tr(Γϱ) that the detector fires during dt.
    pub fn collision_probability(
        &self,
        rho_tot: &DensityMatrix,
        dt: f64,
    ) -> Result<f64, MonteError> {
        if !(dt > 0.0) {
            return Err(MonteError::NonPositiveDt(dt));
        }
        self.check_joint(rho_tot)?;
        let rate = (&self.gamma * rho_tot.entries()).trace().re;
        let prob = dt * rate;
        if prob > 1.0 {
            return Err(MonteError::ProbabilityExceedsOne {
                prob,
                dt_max: 1.0 / rate,
            });
        }
        Ok(prob.max(0.0))
    }

    /// State conditioned on the detector outcome over one interval.
    pub fn conditioned_state(
        &self,
        rho_tot: &DensityMatrix,
        event: CollisionEvent,
        dt: f64,
    ) -> Result<DensityMatrix, MonteError> {
        let prob = self.collision_probability(rho_tot, dt)?;
        let jump = self.sandwich(rho_tot.entries());
        let out = match event {
            CollisionEvent::Click => {
                let norm = jump.trace().re;
                if norm <= f64::MIN_POSITIVE {
                    return Err(MonteError::ZeroEventProbability(prob));
                }
                jump.scale(1.0 / norm)
            }
            CollisionEvent::NoClick => {
                let survive = 1.0 - prob;
                if survive <= f64::MIN_POSITIVE {
                    return Err(MonteError::ZeroEventProbability(survive));
                }
                (rho_tot.entries() - jump.scale(dt)).scale(1.0 / survive)
            }
        };
        Ok(DensityMatrix::new(out)?)
    }

    /// Probability-weighted average of the click branch (scattered with S)
    /// and the no-click branch: S Γ^{1/2} ϱ Γ^{1/2} S† Δt + ϱ − Γ^{1/2} ϱ Γ^{1/2} Δt.
    /// Trace-preserving for any Γ, S.
    pub fn monitoring_step(
        &self,
        rho_tot: &DensityMatrix,
        dt: f64,
    ) -> Result<DensityMatrix, MonteError> {
        self.collision_probability(rho_tot, dt)?;
        let jump = self.sandwich(rho_tot.entries());
        let scattered = &self.s_matrix * &jump * self.s_matrix.adjoint();
        let out = rho_tot.entries() + (scattered - jump).scale(dt);
        Ok(DensityMatrix::new(out)?)
    }

    fn check_system(&self, rho_sys: &CMatrix) -> Result<(), MonteError> {
        if rho_sys.nrows() != self.dim_system || rho_sys.ncols() != self.dim_system {
            return Err(MonteError::DimensionMismatch {
                expected: self.dim_system,
                got: rho_sys.nrows(),
            });
        }
        Ok(())
    }

    /// Environment-traced dissipative terms of the generator, acting on a
    /// system-space operator: the energy-shift commutator
    /// (i/2)Tr_E[T + T†, Γ^{1/2}(ρ⊗ρ_E)Γ^{1/2}], the gain term
    /// Tr_E(T Γ^{1/2}(ρ⊗ρ_E) Γ^{1/2} T†) and the two loss halves
    /// −½Tr_E(Γ^{1/2}T†TΓ^{1/2}(ρ⊗ρ_E)) − ½Tr_E((ρ⊗ρ_E)Γ^{1/2}T†TΓ^{1/2}).
    pub fn dissipator_apply(&self, rho_sys: &CMatrix) -> Result<CMatrix, MonteError> {
        self.check_system(rho_sys)?;
        let joint = rho_sys.kronecker(&self.rho_env);
        let a = self.sandwich(&joint);
        let t = &self.t_matrix;
        let t_sum = t + t.adjoint();
        let shift = (&t_sum * &a - &a * &t_sum) * C64::new(0.0, 0.5);
        let gain = t * &a * t.adjoint();
        let loss_op = &self.gamma_sqrt * (t.adjoint() * t) * &self.gamma_sqrt;
        let loss = (&loss_op * &joint + &joint * &loss_op).scale(0.5);
        let total = shift + gain - loss;
        Ok(partial_trace_probe(
            &total,
            self.dim_system,
            self.dim_probe,
        ))
    }

    /// Full right-hand side dρ/dt = −i[H, ρ] + dissipator.
    pub fn generator_apply(&self, rho_sys: &CMatrix) -> Result<CMatrix, MonteError> {
        let mut out = self.dissipator_apply(rho_sys)?;
        let h = &self.hamiltonian;
        out += (h * rho_sys - rho_sys * h) * C64::new(0.0, -1.0);
        Ok(out)
    }

    /// Choi matrix of the completely positive jump channel
    /// ρ ↦ Tr_E(T Γ^{1/2}(ρ⊗ρ_E)Γ^{1/2} T†); positive semidefinite for any
    /// valid model. The loss terms subtract an anticommutator and make the
    /// full dissipator traceless, so only this gain part admits a PSD Choi
    /// representation.
    pub fn jump_choi(&self) -> CMatrix {
        let d = self.dim_system;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                let mut e_ij = CMatrix::zeros(d, d);
                e_ij[(i, j)] = C64::new(1.0, 0.0);
                let joint = e_ij.kronecker(&self.rho_env);
                let a = self.sandwich(&joint);
                let out =
                    partial_trace_probe(&(&self.t_matrix * a * self.t_matrix.adjoint()),
                        self.dim_system, self.dim_probe);
                for k in 0..d {
                    for l in 0..d {
                        choi[(i * d + k, j * d + l)] = out[(k, l)];
                    }
                }
            }
        }
        choi
    }
}
