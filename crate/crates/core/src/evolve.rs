//! Fixed-step time integration of master-equation generators.
//!
//! The drivers here are deliberately simple: the generators produced by the
//! rate modules are time-independent and dissipative, so a fixed-step
//! explicit scheme with a step bounded well below the fastest rate is both
//! accurate and predictable. [`evolve`] advances any [`EvolvableState`] under
//! a user-supplied generator closure, records scalar observables along the
//! way, and watches the two invariants every physical state must keep: the
//! trace and the positivity of populations.
//!
//! [`fit_exponential_rate`] recovers a decay rate from a recorded observable
//! column by least squares on the log series, which is how the decoherence
//! and relaxation rates are extracted in the verification suites.

use std::fmt::Write as _;
use thiserror::Error;

use crate::linalg::{CMatrix, C64};
use crate::qlbe::MomentumDensityMatrix;

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid evolution config: {0}")]
    BadConfig(String),
    #[error("step too large: dt·rate = {0:.3e} exceeds 1; reduce the step")]
    StepTooLarge(f64),
    #[error("positivity lost at t = {t:.6e}: population defect {defect:.3e}")]
    PositivityLost { t: f64, defect: f64 },
    #[error("rate fit needs at least {min} points, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("rate fit requires a strictly positive series")]
    NonPositiveSeries,
    #[error("initial state is not Hermitian: defect {0:.3e}")]
    StateInvalid(f64),
}

/// State that can be advanced by an explicit stepper: a vector-space element
/// with a trace functional and a population floor.
pub trait EvolvableState: Clone {
    /// self += a · other.
    fn scaled_add(&mut self, a: f64, other: &Self);
    fn scale(&mut self, a: f64);
    /// The conserved trace (with whatever measure the state carries).
    fn trace_value(&self) -> f64;
    /// Most negative population (0 for a positive state).
    fn population_floor(&self) -> f64;
    /// Largest entry magnitude, used to normalize defect checks.
    fn sup_entry(&self) -> f64;
    /// Largest |ρ − ρ†| entry; states that are Hermitian by construction
    /// return 0.
    fn hermiticity_defect(&self) -> f64 {
        0.0
    }
}

impl EvolvableState for CMatrix {
    fn scaled_add(&mut self, a: f64, other: &Self) {
        *self += other * C64::new(a, 0.0);
    }

    fn scale(&mut self, a: f64) {
        *self *= C64::new(a, 0.0);
    }

    fn trace_value(&self) -> f64 {
        self.trace().re
    }

    fn population_floor(&self) -> f64 {
        self.diagonal()
            .iter()
            .fold(0.0f64, |acc, z| acc.min(z.re))
    }

    fn sup_entry(&self) -> f64 {
        self.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
    }

    fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.nrows() {
            for j in i..self.ncols() {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl EvolvableState for MomentumDensityMatrix {
    fn scaled_add(&mut self, a: f64, other: &Self) {
        MomentumDensityMatrix::scaled_add(self, a, other);
    }

    fn scale(&mut self, a: f64) {
        MomentumDensityMatrix::scale(self, a);
    }

    fn trace_value(&self) -> f64 {
        self.trace()
    }

    fn population_floor(&self) -> f64 {
        self.min_diagonal()
    }

    fn sup_entry(&self) -> f64 {
        self.sup_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepMethod {
    Euler,
    Rk4,
}

#[derive(Debug, Clone)]
pub struct EvolutionConfig {
    pub t_end: f64,
    pub dt: f64,
    pub method: StepMethod,
    /// Rescale to the initial trace after every step (off by default: trace
    /// drift is a diagnostic worth seeing).
    pub renormalize: bool,
    /// Record observables every this many steps (the initial and final
    /// states are always recorded).
    pub record_every: usize,
    /// Fastest rate in the generator, if known; used to validate the step.
    /// Zero disables the check.
    pub max_rate: f64,
    /// Relative tolerance on negative populations before aborting.
    pub positivity_tol: f64,
}

impl EvolutionConfig {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self {
            t_end,
            dt,
            method: StepMethod::Rk4,
            renormalize: false,
            record_every: 1,
            max_rate: 0.0,
            positivity_tol: 1e-6,
        }
    }
}

/// Recorded observable columns over time, ready for CSV export.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub names: Vec<String>,
    pub times: Vec<f64>,
    /// One row of observable values per recorded time.
    pub rows: Vec<Vec<f64>>,
}

impl Trajectory {
    /// CSV with a `t` column followed by the observable columns. Floats are
    /// written in shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for name in &self.names {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (t, row) in self.times.iter().zip(&self.rows) {
            write!(s, "{t}").unwrap();
            for v in row {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Values of the named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.names.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

/// Outcome of an evolution run.
#[derive(Debug)]
pub struct Evolution<S> {
    pub state: S,
    pub trajectory: Trajectory,
    pub steps: usize,
    /// Largest |trace(t) − trace(0)| seen (before any renormalization).
    pub max_trace_drift: f64,
    /// Most negative population seen, normalized by the state sup entry.
    pub worst_population: f64,
    /// Set when dt·max_rate exceeds 0.1: results are usable but the step is
    /// coarser than the fastest timescale warrants.
    pub coarse_step: bool,
}

/// Scalar observable recorded along a trajectory.
pub type Observable<'a, S> = (&'a str, &'a dyn Fn(&S) -> f64);

/// Advance `state` to `t_end` under `generator` (the right-hand side
/// ∂_t ρ = G[ρ]), recording the observables as configured.
pub fn evolve<S: EvolvableState>(
    generator: impl Fn(&S) -> S,
    state: S,
    config: &EvolutionConfig,
    observables: &[Observable<'_, S>],
) -> Result<Evolution<S>, EvolveError> {
    if !(config.dt > 0.0) || !config.dt.is_finite() {
        return Err(EvolveError::BadConfig(format!("dt = {}", config.dt)));
    }
    if !(config.t_end >= 0.0) || !config.t_end.is_finite() {
        return Err(EvolveError::BadConfig(format!("t_end = {}", config.t_end)));
    }
    let dt_rate = config.dt * config.max_rate;
    if dt_rate > 1.0 {
        return Err(EvolveError::StepTooLarge(dt_rate));
    }
    let herm = state.hermiticity_defect();
    if herm > 1e-12 * state.sup_entry().max(f64::MIN_POSITIVE) {
        return Err(EvolveError::StateInvalid(herm));
    }
    let coarse_step = dt_rate > 0.1;

    let n_steps = (config.t_end / config.dt).ceil() as usize;
    let trace0 = state.trace_value();
    let mut state = state;
    let mut trajectory = Trajectory {
        names: observables.iter().map(|(n, _)| n.to_string()).collect(),
        times: Vec::new(),
        rows: Vec::new(),
    };
    let record = |trajectory: &mut Trajectory, t: f64, s: &S| {
        trajectory.times.push(t);
        trajectory.rows.push(observables.iter().map(|(_, f)| f(s)).collect());
    };
    record(&mut trajectory, 0.0, &state);

    let mut max_trace_drift = 0.0f64;
    let mut worst_population = 0.0f64;
    let every = config.record_every.max(1);

    for step in 0..n_steps {
        // last step is shortened to land exactly on t_end
        let dt = config.dt.min(config.t_end - step as f64 * config.dt);
        match config.method {
            StepMethod::Euler => {
                let k1 = generator(&state);
                state.scaled_add(dt, &k1);
            }
            StepMethod::Rk4 => {
                let k1 = generator(&state);
                let mut y = state.clone();
                y.scaled_add(0.5 * dt, &k1);
                let k2 = generator(&y);
                let mut y = state.clone();
                y.scaled_add(0.5 * dt, &k2);
                let k3 = generator(&y);
                let mut y = state.clone();
                y.scaled_add(dt, &k3);
                let k4 = generator(&y);
                state.scaled_add(dt / 6.0, &k1);
                state.scaled_add(dt / 3.0, &k2);
                state.scaled_add(dt / 3.0, &k3);
                state.scaled_add(dt / 6.0, &k4);
            }
        }
        let t = (step as f64 * config.dt + dt).min(config.t_end);

        max_trace_drift = max_trace_drift.max((state.trace_value() - trace0).abs());
        let sup = state.sup_entry();
        let floor = state.population_floor();
        if sup > 0.0 {
            worst_population = worst_population.min(floor / sup);
            if floor < -config.positivity_tol * sup {
                return Err(EvolveError::PositivityLost {
                    t,
                    defect: -floor / sup,
                });
            }
        }
        if config.renormalize && trace0 != 0.0 {
            let tr = state.trace_value();
            if tr != 0.0 {
                state.scale(trace0 / tr);
            }
        }
        if (step + 1) % every == 0 || step + 1 == n_steps {
            record(&mut trajectory, t, &state);
        }
    }

    Ok(Evolution {
        state,
        trajectory,
        steps: n_steps,
        max_trace_drift,
        worst_population,
        coarse_step,
    })
}

/// Exponential-decay fit of a positive series: least squares of ln(v) against
/// t. `rate` is the magnitude of the slope (a growing series fits a negative
/// rate and reports it via the sign field).
#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    /// |slope| of the log-linear fit.
    pub rate: f64,
    /// Sign of the slope: −1 for decay, +1 for growth.
    pub sign: f64,
    /// Standard error of the slope estimate.
    pub stderr: f64,
    /// Root-mean-square residual of the log fit.
    pub residual: f64,
}

pub fn fit_exponential_rate(times: &[f64], values: &[f64]) -> Result<RateFit, EvolveError> {
    const MIN_POINTS: usize = 10;
    let n = times.len().min(values.len());
    if n < MIN_POINTS {
        return Err(EvolveError::TooFewPoints {
            min: MIN_POINTS,
            got: n,
        });
    }
    if values[..n].iter().any(|&v| !(v > 0.0)) {
        return Err(EvolveError::NonPositiveSeries);
    }
    let logs: Vec<f64> = values[..n].iter().map(|v| v.ln()).collect();
    let tm = times[..n].iter().sum::<f64>() / n as f64;
    let lm = logs.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = times[i] - tm;
        sxx += dx * dx;
        sxy += dx * (logs[i] - lm);
    }
    if sxx == 0.0 {
        return Err(EvolveError::BadConfig("times are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = lm - slope * tm;
    let mut ss_res = 0.0;
    for i in 0..n {
        let r = logs[i] - (intercept + slope * times[i]);
        ss_res += r * r;
    }
    let dof = (n - 2).max(1) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    Ok(RateFit {
        rate: slope.abs(),
        sign: if slope <= 0.0 { -1.0 } else { 1.0 },
        stderr,
        residual: (ss_res / n as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testkit;
    use approx::assert_relative_eq;

    /// Scalar state for stepper checks: trace is the value itself.
    impl EvolvableState for f64 {
        fn scaled_add(&mut self, a: f64, other: &Self) {
            *self += a * other;
        }
        fn scale(&mut self, a: f64) {
            *self *= a;
        }
        fn trace_value(&self) -> f64 {
            *self
        }
        fn population_floor(&self) -> f64 {
            self.min(0.0)
        }
        fn sup_entry(&self) -> f64 {
            self.abs()
        }
    }

    #[test]
    fn zero_generator_is_identity() {
        let cfg = EvolutionConfig::new(2.0, 0.1);
        let out = evolve(|_: &f64| 0.0, 3.5f64, &cfg, &[("x", &|s: &f64| *s)]).unwrap();
        assert_eq!(out.state, 3.5);
        assert_eq!(out.max_trace_drift, 0.0);
        assert_eq!(out.trajectory.times.len(), out.trajectory.rows.len());
        assert_relative_eq!(*out.trajectory.times.last().unwrap(), 2.0);
    }

    #[test]
    fn scalar_decay_matches_exponential() {
        let lambda = 2.0;
        let cfg = EvolutionConfig {
            positivity_tol: 1.0, // a decaying scalar has no populations to guard
            ..EvolutionConfig::new(1.0, 5e-4)
        };
        let out = evolve(|s: &f64| -lambda * s, 1.0f64, &cfg, &[]).unwrap();
        assert_relative_eq!(out.state, (-lambda as f64).exp(), max_relative = 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let lambda = 1.0;
        let err = |dt: f64| {
            let cfg = EvolutionConfig::new(1.0, dt);
            let out = evolve(|s: &f64| -lambda * s, 1.0f64, &cfg, &[]).unwrap();
            (out.state - (-1.0f64).exp()).abs()
        };
        let e1 = err(0.05);
        let e2 = err(0.025);
        let order = (e1 / e2).log2();
        assert!(
            (3.5..=4.5).contains(&order),
            "observed order {order}, errors {e1:e} / {e2:e}"
        );
    }

    #[test]
    fn euler_is_first_order() {
        let err = |dt: f64| {
            let cfg = EvolutionConfig {
                method: StepMethod::Euler,
                ..EvolutionConfig::new(1.0, dt)
            };
            let out = evolve(|s: &f64| -s, 1.0f64, &cfg, &[]).unwrap();
            (out.state - (-1.0f64).exp()).abs()
        };
        let order = (err(0.01) / err(0.005)).log2();
        assert!((0.8..=1.2).contains(&order), "observed order {order}");
    }

    #[test]
    fn oversized_step_is_rejected_and_coarse_step_flagged() {
        let mut cfg = EvolutionConfig::new(1.0, 0.5);
        cfg.max_rate = 3.0;
        assert!(matches!(
            evolve(|s: &f64| -s, 1.0f64, &cfg, &[]),
            Err(EvolveError::StepTooLarge(_))
        ));
        cfg.max_rate = 0.5;
        let out = evolve(|s: &f64| -s, 1.0f64, &cfg, &[]).unwrap();
        assert!(out.coarse_step);
    }

    #[test]
    fn positivity_loss_aborts() {
        // growth of a negative component: s' = (s, growing negative part)
        #[derive(Clone, Debug)]
        struct Two(f64, f64);
        impl EvolvableState for Two {
            fn scaled_add(&mut self, a: f64, other: &Self) {
                self.0 += a * other.0;
                self.1 += a * other.1;
            }
            fn scale(&mut self, a: f64) {
                self.0 *= a;
                self.1 *= a;
            }
            fn trace_value(&self) -> f64 {
                self.0 + self.1
            }
            fn population_floor(&self) -> f64 {
                self.0.min(self.1).min(0.0)
            }
            fn sup_entry(&self) -> f64 {
                self.0.abs().max(self.1.abs())
            }
        }
        let cfg = EvolutionConfig::new(1.0, 0.01);
        let res = evolve(
            |s: &Two| Two(0.0, -s.0),
            Two(1.0, 0.0),
            &cfg,
            &[],
        );
        assert!(matches!(res, Err(EvolveError::PositivityLost { .. })));
    }

    #[test]
    fn trajectory_csv_round_trips_floats() {
        let cfg = EvolutionConfig {
            record_every: 10,
            ..EvolutionConfig::new(1.0, 0.01)
        };
        let out = evolve(|s: &f64| -s, 1.0f64, &cfg, &[("x", &|s: &f64| *s)]).unwrap();
        let csv = out.trajectory.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x"));
        for (line, (t, row)) in lines.zip(out.trajectory.times.iter().zip(&out.trajectory.rows)) {
            let mut cols = line.split(',');
            assert_eq!(cols.next().unwrap().parse::<f64>().unwrap(), *t);
            assert_eq!(cols.next().unwrap().parse::<f64>().unwrap(), row[0]);
        }
        assert_eq!(out.trajectory.column("x").unwrap().len(), out.trajectory.times.len());
        assert!(out.trajectory.column("missing").is_none());
    }

    #[test]
    fn density_matrix_states_evolve() {
        // dissipator toward the maximally mixed state on 2 levels:
        // G[ρ] = γ(I/2·tr(ρ) − ρ)
        let gamma = 1.5;
        let mut rng = testkit::rng(7);
        let rho0 = testkit::random_density(&mut rng, 2);
        let cfg = EvolutionConfig::new(2.0, 1e-3);
        let gen = |rho: &CMatrix| {
            let mut out = CMatrix::identity(2, 2) * C64::new(0.5 * rho.trace().re * gamma, 0.0);
            out -= rho * C64::new(gamma, 0.0);
            out
        };
        let out = evolve(gen, rho0.clone(), &cfg, &[("purity", &|r: &CMatrix| {
            (r * r).trace().re
        })])
        .unwrap();
        assert!(out.max_trace_drift < 1e-12);
        let target = CMatrix::identity(2, 2) * C64::new(0.5, 0.0);
        let dist = (out.state - &target).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(dist < 0.5 * (-gamma * 2.0f64).exp() + 1e-9);
    }

    #[test]
    fn non_hermitian_input_is_rejected() {
        let mut rho = CMatrix::identity(2, 2);
        rho[(0, 1)] = C64::new(0.3, 0.1);
        rho[(1, 0)] = C64::new(0.3, 0.1); // should be the conjugate
        let cfg = EvolutionConfig::new(1.0, 0.01);
        assert!(matches!(
            evolve(|r: &CMatrix| r * C64::new(-1.0, 0.0), rho, &cfg, &[]),
            Err(EvolveError::StateInvalid(_))
        ));
    }

    #[test]
    fn rate_fit_recovers_exact_decay() {
        let times: Vec<f64> = (0..50).map(|i| 0.1 * i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 * (-0.7 * t).exp()).collect();
        let fit = fit_exponential_rate(&times, &values).unwrap();
        assert_relative_eq!(fit.rate, 0.7, max_relative = 1e-12);
        assert_eq!(fit.sign, -1.0);
        assert!(fit.residual < 1e-12);
        assert!(fit.stderr < 1e-12);
    }

    #[test]
    fn rate_fit_handles_growth_and_noise() {
        let mut rng = testkit::rng(13);
        let times: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|t| (0.3 * t).exp() * (1.0 + 0.01 * testkit::uniform(&mut rng, -1.0, 1.0)))
            .collect();
        let fit = fit_exponential_rate(&times, &values).unwrap();
        assert_eq!(fit.sign, 1.0);
        assert!((fit.rate - 0.3).abs() < 5.0 * fit.stderr + 1e-3);
    }

    #[test]
    fn rate_fit_input_validation() {
        let t: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let v = vec![1.0; 5];
        assert!(matches!(
            fit_exponential_rate(&t, &v),
            Err(EvolveError::TooFewPoints { .. })
        ));
        let t: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let mut v = vec![1.0; 12];
        v[3] = 0.0;
        assert!(matches!(
            fit_exponential_rate(&t, &v),
            Err(EvolveError::NonPositiveSeries)
        ));
        let flat = fit_exponential_rate(&t, &vec![2.0; 12]).unwrap();
        assert_eq!(flat.rate, 0.0);
    }
}
