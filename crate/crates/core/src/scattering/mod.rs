//! Multichannel scattering amplitudes f_{αα₀}(p_out, p_in) and total cross
//! sections, via pluggable microscopic models.
//!
//! Bundled models: [`ConstantAmplitude`], [`HardSphere`] (partial-wave series),
//! [`GaussianBorn`] (momentum-transfer-only Born amplitude), and
//! [`TwoChannelToy`] (inelastic thresholds).

pub mod bessel;

use crate::linalg::{CMatrix, C64};
use crate::quad::{self, QuadratureSpec};
use nalgebra::Vector3;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("unknown channel index {index} (model has {n_channels} channels)")]
    UnknownChannel { index: usize, n_channels: usize },
    #[error("off-shell amplitude request: |p_out| = {p_out}, on-shell value {expected}")]
    OffShellRequest { p_out: f64, expected: f64 },
    #[error("momentum magnitude must be positive, got {0}")]
    NegativeMomentum(f64),
    #[error(transparent)]
    Quad(#[from] quad::QuadError),
}

/// A microscopic scattering model: the sole physical input to the master
/// equations. Amplitudes carry units of length (ħ = 1).
pub trait ScatteringModel: Send + Sync {
    fn n_channels(&self) -> usize;

    /// f_{α_f α_i}(p_out, p_in).
    fn amplitude(
        &self,
        ch_out: usize,
        p_out: &Vector3<f64>,
        ch_in: usize,
        p_in: &Vector3<f64>,
    ) -> Result<C64, ScatteringError>;

    /// On-shell outgoing momentum magnitude for the transition
    /// ch_in → ch_out at incoming magnitude `p_in`; `None` if the final
    /// channel is closed. Models without internal thresholds are elastic.
    fn on_shell_momentum(&self, p_in: f64, ch_in: usize, ch_out: usize) -> Option<f64> {
        let _ = (ch_in, ch_out);
        Some(p_in)
    }

    /// Whether the model satisfies the optical theorem (unitary S-matrix).
    fn satisfies_optical_theorem(&self) -> bool {
        false
    }

    /// Whether the amplitude depends only on the momentum magnitudes and the
    /// scattering angle. Enables exact isotropy reductions downstream.
    fn is_rotationally_invariant(&self) -> bool;

    /// Closed-form total cross section where available, used as the fast
    /// path for rate integrals. The quadrature route
    /// [`total_cross_section`] stays the independent reference.
    fn closed_form_cross_section(&self, p: f64, ch_in: usize) -> Option<f64> {
        let _ = (p, ch_in);
        None
    }
}

fn check_channel(model: &dyn ScatteringModel, ch: usize) -> Result<(), ScatteringError> {
    if ch >= model.n_channels() {
        return Err(ScatteringError::UnknownChannel {
            index: ch,
            n_channels: model.n_channels(),
        });
    }
    Ok(())
}

/// σ(p, α) = Σ_{α_f open} ∫ dΩ |f_{α_f α}(p_f n̂, p ẑ)|², by angular quadrature.
pub fn total_cross_section(
    model: &dyn ScatteringModel,
    p: f64,
    ch_in: usize,
    spec: &QuadratureSpec,
) -> Result<f64, ScatteringError> {
    if !(p > 0.0) {
        return Err(ScatteringError::NegativeMomentum(p));
    }
    check_channel(model, ch_in)?;
    let p_in = Vector3::new(0.0, 0.0, p);
    let mut sigma = 0.0;
    for ch_out in 0..model.n_channels() {
        let Some(pf) = model.on_shell_momentum(p, ch_in, ch_out) else {
            continue;
        };
        let v = quad::integrate_sphere(
            |n_hat| {
                let f = model
                    .amplitude(ch_out, &(n_hat * pf), ch_in, &p_in)
                    .expect("amplitude on sampled node");
                C64::new(f.norm_sqr(), 0.0)
            },
            spec,
        )?;
        sigma += v.re;
    }
    Ok(sigma.max(0.0))
}

/// Normalized optical-theorem defect
/// [Im f_{αα}(pẑ, pẑ) − p σ(p,α)/4π] / scale; zero for unitary models.
pub fn optical_theorem_defect(
    model: &dyn ScatteringModel,
    p: f64,
    ch: usize,
    spec: &QuadratureSpec,
) -> Result<f64, ScatteringError> {
    if !(p > 0.0) {
        return Err(ScatteringError::NegativeMomentum(p));
    }
    check_channel(model, ch)?;
    let pz = Vector3::new(0.0, 0.0, p);
    let fwd = model.amplitude(ch, &pz, ch, &pz)?;
    let sigma = total_cross_section(model, p, ch, spec)?;
    let flux_side = p * sigma / (4.0 * PI);
    let scale = fwd.im.abs().max(flux_side.abs()).max(f64::MIN_POSITIVE);
    Ok((fwd.im - flux_side) / scale)
}

/// Constant (momentum-independent) amplitude matrix c_{α α₀}. All channels
/// are degenerate in energy; thresholds never close.
#[derive(Debug, Clone)]
pub struct ConstantAmplitude {
    amps: CMatrix,
}

impl ConstantAmplitude {
    pub fn new(amps: CMatrix) -> Self {
        assert!(amps.is_square(), "amplitude matrix must be square");
        Self { amps }
    }

    /// Purely elastic multichannel model c_{αα₀} = c_α δ_{αα₀}.
    pub fn elastic(cs: &[C64]) -> Self {
        let n = cs.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                cs[i]
            } else {
                C64::default()
            }
        }))
    }

    pub fn uniform(c: C64) -> Self {
        Self::elastic(&[c])
    }
}

impl ScatteringModel for ConstantAmplitude {
    fn n_channels(&self) -> usize {
        self.amps.nrows()
    }

    fn amplitude(
        &self,
        ch_out: usize,
        _p_out: &Vector3<f64>,
        ch_in: usize,
        _p_in: &Vector3<f64>,
    ) -> Result<C64, ScatteringError> {
        check_channel(self, ch_out)?;
        check_channel(self, ch_in)?;
        Ok(self.amps[(ch_out, ch_in)])
    }

    fn is_rotationally_invariant(&self) -> bool {
        true
    }

    fn closed_form_cross_section(&self, _p: f64, ch_in: usize) -> Option<f64> {
        let s: f64 = (0..self.n_channels())
            .map(|ch_out| self.amps[(ch_out, ch_in)].norm_sqr())
            .sum();
        Some(4.0 * PI * s)
    }
}

/// Hard-sphere scattering off a sphere of the given radius, single channel,
/// partial-wave series with tan δ_l = j_l(pa)/y_l(pa).
#[derive(Debug, Clone)]
pub struct HardSphere {
    pub radius: f64,
    pub l_max_override: Option<usize>,
}

impl HardSphere {
    pub const ON_SHELL_REL_TOL: f64 = 1e-9;

    pub fn new(radius: f64) -> Self {
        assert!(radius > 0.0);
        Self {
            radius,
            l_max_override: None,
        }
    }

    /// Semiclassical default: max(20, ceil(3 p a)).
    pub fn l_max(&self, p: f64) -> usize {
        self.l_max_override
            .unwrap_or_else(|| 20usize.max((3.0 * p * self.radius).ceil() as usize))
    }

    /// e^{iδ_l} sin δ_l for l = 0..=l_max at momentum p.
    pub fn phase_terms(&self, p: f64, l_max: usize) -> Vec<C64> {
        let x = p * self.radius;
        let (j, y) = bessel::spherical_j_y(l_max, x);
        (0..=l_max)
            .map(|l| {
                let t = j[l] / y[l];
                if t.is_infinite() {
                    // δ = π/2 exactly on a node of y_l
                    C64::new(0.0, 1.0)
                } else if t.is_nan() || t == 0.0 {
                    C64::default()
                } else {
                    let d = 1.0 + t * t;
                    C64::new(t / d, t * t / d)
                }
            })
            .collect()
    }

    /// Partial-wave total cross section (4π/p²) Σ (2l+1) sin²δ_l.
    pub fn partial_wave_cross_section(&self, p: f64, l_max: usize) -> f64 {
        let terms = self.phase_terms(p, l_max);
        let s: f64 = terms
            .iter()
            .enumerate()
            .map(|(l, c)| (2 * l + 1) as f64 * c.im)
            .sum();
        4.0 * PI / (p * p) * s
    }
}

impl ScatteringModel for HardSphere {
    fn n_channels(&self) -> usize {
        1
    }

    fn amplitude(
        &self,
        ch_out: usize,
        p_out: &Vector3<f64>,
        ch_in: usize,
        p_in: &Vector3<f64>,
    ) -> Result<C64, ScatteringError> {
        check_channel(self, ch_out)?;
        check_channel(self, ch_in)?;
        let pi = p_in.norm();
        let pf = p_out.norm();
        if pi <= 0.0 {
            return Err(ScatteringError::NegativeMomentum(pi));
        }
        if (pf - pi).abs() > Self::ON_SHELL_REL_TOL * pi {
            return Err(ScatteringError::OffShellRequest {
                p_out: pf,
                expected: pi,
            });
        }
        let l_max = self.l_max(pi);
        let terms = self.phase_terms(pi, l_max);
        let cos_theta = (p_out.dot(p_in) / (pf * pi)).clamp(-1.0, 1.0);
        let pl = bessel::legendre_all(l_max, cos_theta);
        let mut f = C64::default();
        for (l, c) in terms.iter().enumerate() {
            f += *c * ((2 * l + 1) as f64 * pl[l]);
        }
        Ok(f / pi)
    }

    fn satisfies_optical_theorem(&self) -> bool {
        true
    }

    fn is_rotationally_invariant(&self) -> bool {
        true
    }

    fn closed_form_cross_section(&self, p: f64, _ch_in: usize) -> Option<f64> {
        Some(self.partial_wave_cross_section(p, self.l_max(p)))
    }
}

/// First-order (Born) amplitude of a Gaussian potential: depends only on the
/// momentum transfer, f(q) = a₀ exp(−q² w²/2). Violates unitarity at second
/// order, as any Born amplitude does.
#[derive(Debug, Clone)]
pub struct GaussianBorn {
    pub amplitude0: f64,
    pub width: f64,
}

impl GaussianBorn {
    pub fn new(amplitude0: f64, width: f64) -> Self {
        assert!(width > 0.0);
        Self { amplitude0, width }
    }
}

impl ScatteringModel for GaussianBorn {
    fn n_channels(&self) -> usize {
        1
    }

    fn amplitude(
        &self,
        ch_out: usize,
        p_out: &Vector3<f64>,
        ch_in: usize,
        p_in: &Vector3<f64>,
    ) -> Result<C64, ScatteringError> {
        check_channel(self, ch_out)?;
        check_channel(self, ch_in)?;
        let q2 = (p_out - p_in).norm_squared();
        Ok(C64::new(
            self.amplitude0 * (-q2 * self.width * self.width / 2.0).exp(),
            0.0,
        ))
    }

    fn is_rotationally_invariant(&self) -> bool {
        true
    }

    fn closed_form_cross_section(&self, p: f64, _ch_in: usize) -> Option<f64> {
        let a = self.amplitude0;
        let w2 = self.width * self.width;
        let x = 4.0 * p * p * w2;
        // 2π a² ∫ exp(-2p²w²(1-c)) dc; series for small x
        let v = if x < 1e-6 {
            4.0 * PI * a * a * (1.0 - x / 2.0 + x * x / 6.0)
        } else {
            PI * a * a * (1.0 - (-x).exp()) / (p * p * w2)
        };
        Some(v)
    }
}

/// Two channels with user-set energies and a constant amplitude matrix;
/// thresholds follow from the gas-particle mass.
#[derive(Debug, Clone)]
pub struct TwoChannelToy {
    pub energies: [f64; 2],
    amps: CMatrix,
    pub mass_gas: f64,
}

impl TwoChannelToy {
    pub fn new(energies: [f64; 2], amps: CMatrix, mass_gas: f64) -> Self {
        assert_eq!(amps.nrows(), 2);
        assert_eq!(amps.ncols(), 2);
        assert!(mass_gas > 0.0);
        Self {
            energies,
            amps,
            mass_gas,
        }
    }
}

impl ScatteringModel for TwoChannelToy {
    fn n_channels(&self) -> usize {
        2
    }

    fn amplitude(
        &self,
        ch_out: usize,
        _p_out: &Vector3<f64>,
        ch_in: usize,
        _p_in: &Vector3<f64>,
    ) -> Result<C64, ScatteringError> {
        check_channel(self, ch_out)?;
        check_channel(self, ch_in)?;
        Ok(self.amps[(ch_out, ch_in)])
    }

    fn on_shell_momentum(&self, p_in: f64, ch_in: usize, ch_out: usize) -> Option<f64> {
        let de = self.energies[ch_out] - self.energies[ch_in];
        let radicand = p_in * p_in - 2.0 * self.mass_gas * de;
        if ch_in == ch_out {
            Some(p_in)
        } else if radicand > 0.0 {
            Some(radicand.sqrt())
        } else {
            None
        }
    }

    fn is_rotationally_invariant(&self) -> bool {
        true
    }

    fn closed_form_cross_section(&self, p: f64, ch_in: usize) -> Option<f64> {
        let s: f64 = (0..2)
            .filter(|&ch_out| self.on_shell_momentum(p, ch_in, ch_out).is_some())
            .map(|ch_out| self.amps[(ch_out, ch_in)].norm_sqr())
            .sum();
        Some(4.0 * PI * s)
    }
}
