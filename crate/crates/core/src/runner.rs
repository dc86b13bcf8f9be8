//! CLI orchestration: scenario loading, mode dispatch and output writing.
//!
//! Every run reads one scenario file, performs one computation and writes its
//! results into an output directory together with `manifest.json` listing the
//! produced files, the effective seed and per-stage timings. All numerical
//! output (CSV and JSON) is deterministic for a fixed scenario and seed; the
//! manifest's timestamp and timings are the only varying fields.
//!
//! Exit codes follow batch conventions: 0 success, 2 scenario validation,
//! 3 numerical non-convergence, 4 I/O. Failures additionally leave an
//! `error.json` with a machine-readable description in the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use thiserror::Error;

use crate::channelme::{self, ChannelBasis, ChannelError, RateTensor};
use crate::evolve::{self, EvolutionConfig, EvolveError};
use crate::linalg::{partial_trace_probe, CMatrix, DensityMatrix, C64};
use crate::montecore::{t_relation_residual, FiniteModel};
use crate::qlbe::{
    m_in_variant, m_out_cl, BrownianParams, GeneratorOptions, LVariant, MomentumDensityMatrix,
    QlbeError, RatePairKernel, TraceMode,
};
use crate::quad::{self, QuadError};
use crate::scenario::{InitialState, Mode, Scenario, ScenarioError};
use crate::{par, testkit};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NON_CONVERGENCE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_INTERNAL: i32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),
    #[error("{0}")]
    Internal(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(ScenarioError::Io(_)) => EXIT_IO,
            RunError::Scenario(_) => EXIT_VALIDATION,
            RunError::Io(_) => EXIT_IO,
            RunError::NonConvergence(_) => EXIT_NON_CONVERGENCE,
            RunError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Scenario(ScenarioError::Io(_)) | RunError::Io(_) => "io",
            RunError::Scenario(_) => "validation",
            RunError::NonConvergence(_) => "non-convergence",
            RunError::Internal(_) => "internal",
        }
    }
}

impl From<QuadError> for RunError {
    fn from(e: QuadError) -> Self {
        match e {
            QuadError::NoConvergence { .. } => RunError::NonConvergence(e.to_string()),
            other => RunError::Internal(other.to_string()),
        }
    }
}

impl From<ChannelError> for RunError {
    fn from(e: ChannelError) -> Self {
        match e {
            ChannelError::Quad(q) => q.into(),
            other => RunError::Internal(other.to_string()),
        }
    }
}

impl From<QlbeError> for RunError {
    fn from(e: QlbeError) -> Self {
        match e {
            QlbeError::Quad(q) => q.into(),
            other => RunError::Internal(other.to_string()),
        }
    }
}

impl From<EvolveError> for RunError {
    fn from(e: EvolveError) -> Self {
        RunError::Internal(e.to_string())
    }
}

fn validation(msg: impl Into<String>) -> RunError {
    RunError::Scenario(ScenarioError::Validation(vec![msg.into()]))
}

/// Collects output files and writes them under the run directory.
struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
    timings_ms: BTreeMap<String, u128>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, RunError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            timings_ms: BTreeMap::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), RunError> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let text = serde_json::to_string_pretty(value)
            .map_err(|e| RunError::Internal(format!("serialization: {e}")))?;
        self.write(name, &text)
    }

    fn time<T>(
        &mut self,
        stage: &str,
        f: impl FnOnce(&mut Self) -> Result<T, RunError>,
    ) -> Result<T, RunError> {
        let t0 = Instant::now();
        let out = f(self)?;
        self.timings_ms
            .insert(stage.to_string(), t0.elapsed().as_millis());
        Ok(out)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    mode: &'a str,
    seed: u64,
    version: &'a str,
    warnings: &'a [String],
    outputs: &'a [String],
    timings_ms: &'a BTreeMap<String, u128>,
    /// Unix timestamp (seconds); the only nondeterministic fields in a run
    /// are this and `timings_ms`.
    timestamp: u64,
    scenario: &'a str,
}

/// Execute a validated scenario, writing all outputs (including the
/// manifest) into `out_dir`. Returns the list of written files.
pub fn run(
    scenario: &Scenario,
    scenario_text: &str,
    warnings: &[String],
    out_dir: &Path,
) -> Result<Vec<String>, RunError> {
    let mut out = Outputs::new(out_dir)?;
    match scenario.mode {
        Mode::MontecoreCheck => montecore_check(scenario, &mut out)?,
        Mode::ChannelRates => channel_rates(scenario, &mut out)?,
        Mode::ChannelEvolve => channel_evolve(scenario, &mut out)?,
        Mode::QlbeRates => qlbe_rates(scenario, &mut out)?,
        Mode::QlbeEvolve => qlbe_evolve(scenario, &mut out)?,
        Mode::CompareDiosi => compare_diosi(scenario, &mut out)?,
        Mode::LimitsSuite => limits_suite(scenario, &mut out)?,
    }
    let manifest = Manifest {
        mode: scenario.mode.as_str(),
        seed: scenario.seed,
        version: env!("CARGO_PKG_VERSION"),
        warnings,
        outputs: &out.files,
        timings_ms: &out.timings_ms,
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        scenario: scenario_text,
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| RunError::Internal(format!("serialization: {e}")))?;
    fs::write(out_dir.join("manifest.json"), text)?;
    let mut files = out.files;
    files.push("manifest.json".to_string());
    Ok(files)
}

// ---------------------------------------------------------------------------
// montecore-check

#[derive(Serialize)]
struct MontecoreReport {
    models: usize,
    max_richardson_mismatch: f64,
    max_t_relation_residual: f64,
    pass: bool,
}

fn montecore_check(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let report = out.time("montecore-check", |_| {
        let models = 100;
        let mut max_mismatch = 0.0f64;
        let mut max_t_res = 0.0f64;
        for k in 0..models as u64 {
            let mut rng = testkit::rng(scenario.seed.wrapping_add(k));
            let dim_s = 2 + (k % 3) as usize;
            let dim_p = 2 + ((k / 3) % 3) as usize;
            let joint_dim = dim_s * dim_p;
            // Γ supported on the probe, so the finite-step difference
            // quotient has the same operator ordering as the generator
            let gamma = CMatrix::identity(dim_s, dim_s)
                .kronecker(&testkit::random_psd(&mut rng, dim_p));
            let model = FiniteModel::new(
                dim_s,
                dim_p,
                gamma,
                testkit::haar_unitary(&mut rng, joint_dim),
                testkit::random_density(&mut rng, dim_p),
                testkit::random_hermitian(&mut rng, dim_s),
            )
            .map_err(|e| RunError::Internal(e.to_string()))?;
            let rho_sys = testkit::random_density(&mut rng, dim_s);
            let joint = DensityMatrix::new(rho_sys.kronecker(model.rho_env()))
                .map_err(|e| RunError::Internal(e.to_string()))?;
            let dissipative = model
                .dissipator_apply(&rho_sys)
                .map_err(|e| RunError::Internal(e.to_string()))?;
            let scale = crate::linalg::max_abs(&dissipative).max(1.0);
            let defect_at = |dt: f64| -> Result<f64, RunError> {
                let stepped = model
                    .monitoring_step(&joint, dt)
                    .map_err(|e| RunError::Internal(e.to_string()))?;
                let reduced = partial_trace_probe(stepped.entries(), dim_s, dim_p);
                let quotient = (reduced - &rho_sys).scale(1.0 / dt);
                Ok(crate::linalg::max_abs(&(quotient - &dissipative)))
            };
            let d1 = defect_at(1e-4)?;
            let d2 = defect_at(5e-5)?;
            // Richardson extrapolation in dt: 2·f(dt/2) − f(dt)
            max_mismatch = max_mismatch.max((2.0 * d2 + d1) / scale);
            let t_res = t_relation_residual(model.t_matrix()) / joint_dim as f64;
            max_t_res = max_t_res.max(t_res);
        }
        Ok(MontecoreReport {
            models,
            max_richardson_mismatch: max_mismatch,
            max_t_relation_residual: max_t_res,
            pass: max_mismatch < 1e-8 && max_t_res < 1e-12,
        })
    })?;
    out.write_json("montecore_check.json", &report)
}

// ---------------------------------------------------------------------------
// channel modes

fn channel_setup(scenario: &Scenario) -> Result<(ChannelBasis, RateTensor), RunError> {
    let basis = ChannelBasis::new(scenario.channel_energies.clone())
        .map_err(|e| validation(format!("channels.energies: {e}")))?;
    let model = scenario.model.build(scenario);
    let rt = channelme::rate_tensor(model.as_ref(), &scenario.gas, &basis, &scenario.quadrature)?;
    Ok((basis, rt))
}

fn complex_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn channel_rates(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let (basis, rt) = out.time("rate-tensor", |_| channel_setup(scenario))?;
    let n = basis.len();
    // 4-index rate tensor [alpha][beta][alpha0][beta0] as [re, im] pairs
    let m: Vec<Vec<Vec<Vec<[f64; 2]>>>> = (0..n)
        .map(|alpha| {
            (0..n)
                .map(|beta| {
                    (0..n)
                        .map(|alpha0| {
                            (0..n)
                                .map(|beta0| complex_pair(rt.entry(alpha, beta, alpha0, beta0)))
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let omega: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..n).map(|b| rt.omega()[(a, b)]).collect())
        .collect();
    #[derive(Serialize)]
    struct RatesReport {
        n_channels: usize,
        energies: Vec<f64>,
        m: Vec<Vec<Vec<Vec<[f64; 2]>>>>,
        eps: Vec<f64>,
        omega: Vec<Vec<f64>>,
    }
    out.write_json(
        "rates.json",
        &RatesReport {
            n_channels: n,
            energies: basis.energies().to_vec(),
            m,
            eps: rt.eps().to_vec(),
            omega,
        },
    )
}

fn channel_initial(n: usize, initial: InitialState) -> CMatrix {
    match initial {
        // all population in the highest channel: relaxation fixture
        InitialState::Cold => {
            let mut rho = CMatrix::zeros(n, n);
            rho[(n - 1, n - 1)] = C64::new(1.0, 0.0);
            rho
        }
        // equal-weight pure superposition: maximal coherences
        InitialState::Thermal | InitialState::Superposition => {
            let amp = C64::new(1.0 / n as f64, 0.0);
            CMatrix::from_fn(n, n, |_, _| amp)
        }
    }
}

fn channel_evolve(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let (basis, rt) = out.time("rate-tensor", |_| channel_setup(scenario))?;
    let n = basis.len();
    let rho0 = channel_initial(n, scenario.initial);

    let loss = rt.loss_matrix();
    let max_loss = (0..n).fold(0.0f64, |acc, a| acc.max(loss[(a, a)].re.abs()));
    let max_omega = (0..n)
        .flat_map(|a| (0..n).map(move |b| (a, b)))
        .fold(0.0f64, |acc, (a, b)| acc.max(rt.omega()[(a, b)].abs()));

    let mut names: Vec<String> = Vec::new();
    let mut funcs: Vec<Box<dyn Fn(&CMatrix) -> f64>> = Vec::new();
    names.push("trace".into());
    funcs.push(Box::new(|r: &CMatrix| r.trace().re));
    for a in 0..n {
        names.push(format!("pop_{a}"));
        funcs.push(Box::new(move |r: &CMatrix| r[(a, a)].re));
    }
    for a in 0..n {
        for b in (a + 1)..n {
            names.push(format!("coh_{a}{b}"));
            funcs.push(Box::new(move |r: &CMatrix| r[(a, b)].norm()));
        }
    }
    let observables: Vec<(&str, &dyn Fn(&CMatrix) -> f64)> = names
        .iter()
        .map(|s| s.as_str())
        .zip(funcs.iter().map(|f| f.as_ref() as &dyn Fn(&CMatrix) -> f64))
        .collect();

    let config = EvolutionConfig {
        method: scenario.method,
        renormalize: scenario.renormalize,
        record_every: scenario.record_every,
        max_rate: max_loss + max_omega,
        ..EvolutionConfig::new(scenario.t_end, scenario.dt)
    };
    let generator = |rho: &CMatrix| {
        channelme::generator_apply(&rt, rho).expect("dimensions fixed at setup")
    };
    let result = out.time("evolve", |_| {
        evolve::evolve(generator, rho0, &config, &observables).map_err(RunError::from)
    })?;

    out.write("trajectory.csv", &result.trajectory.to_csv())?;

    let coherence_fit = result
        .trajectory
        .column("coh_01")
        .and_then(|v| evolve::fit_exponential_rate(&result.trajectory.times, &v).ok());
    #[derive(Serialize)]
    struct EvolveSummary {
        steps: usize,
        max_trace_drift: f64,
        worst_population: f64,
        coarse_step: bool,
        final_populations: Vec<f64>,
        coherence_rate: Option<f64>,
        coherence_rate_stderr: Option<f64>,
    }
    out.write_json(
        "summary.json",
        &EvolveSummary {
            steps: result.steps,
            max_trace_drift: result.max_trace_drift,
            worst_population: result.worst_population,
            coarse_step: result.coarse_step,
            final_populations: (0..n).map(|a| result.state[(a, a)].re).collect(),
            coherence_rate: coherence_fit.map(|f| f.rate),
            coherence_rate_stderr: coherence_fit.map(|f| f.stderr),
        },
    )
}

// ---------------------------------------------------------------------------
// qlbe modes

fn qlbe_model(scenario: &Scenario) -> Result<Box<dyn crate::scattering::ScatteringModel>, RunError> {
    if scenario.model.n_channels() != 1 {
        return Err(validation(
            "model: momentum-grid modes need a single-channel model",
        ));
    }
    Ok(scenario.model.build(scenario))
}

fn qlbe_pairs(
    scenario: &Scenario,
    grid: &crate::qlbe::MomentumGrid3,
) -> Result<Vec<(usize, usize)>, RunError> {
    match scenario.coherence_pair {
        None => Ok(Vec::new()),
        Some((a, b)) => {
            let ia = grid
                .flat_of_ints(a)
                .ok_or_else(|| validation(format!("qlbe.pair_a: {a:?} is outside the grid")))?;
            let ib = grid
                .flat_of_ints(b)
                .ok_or_else(|| validation(format!("qlbe.pair_b: {b:?} is outside the grid")))?;
            if ia == ib {
                return Err(validation("qlbe.pair_a: pair must name two distinct points"));
            }
            Ok(vec![(ia.min(ib), ia.max(ib))])
        }
    }
}

fn build_kernel(
    scenario: &Scenario,
    pairs: &[(usize, usize)],
) -> Result<(crate::qlbe::MomentumGrid3, RatePairKernel), RunError> {
    let grid = scenario.grid().map_err(|e| validation(format!("grid: {e}")))?;
    let model = qlbe_model(scenario)?;
    let tracer = scenario.brownian();
    let kernel = RatePairKernel::build(
        model.as_ref(),
        grid,
        &scenario.gas,
        &tracer,
        &scenario.quadrature,
        pairs,
        scenario.variant,
    )?;
    Ok((grid, kernel))
}

fn qlbe_rates(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let (grid, kernel) = out.time("kernel", |_| build_kernel(scenario, &[]))?;
    let mut csv = String::from("index,px,py,pz,out_discrete,out_continuous\n");
    for i in 0..grid.len() {
        let p = grid.point(i);
        writeln!(
            csv,
            "{i},{},{},{},{},{}",
            p.x, p.y, p.z, kernel.out_discrete()[i], kernel.out_continuous()[i]
        )
        .unwrap();
    }
    out.write("out_rates.csv", &csv)?;
    #[derive(Serialize)]
    struct RatesSummary {
        grid_points_per_axis: usize,
        grid_extent: f64,
        grid_spacing: f64,
        rate_scale: f64,
        max_out_continuous: f64,
    }
    out.write_json(
        "summary.json",
        &RatesSummary {
            grid_points_per_axis: grid.points_per_axis(),
            grid_extent: grid.extent(),
            grid_spacing: grid.spacing(),
            rate_scale: kernel.rate_scale(),
            max_out_continuous: kernel
                .out_continuous()
                .iter()
                .fold(0.0f64, |a, &x| a.max(x)),
        },
    )
}

fn qlbe_initial(
    scenario: &Scenario,
    grid: crate::qlbe::MomentumGrid3,
    pairs: &[(usize, usize)],
) -> Result<MomentumDensityMatrix, RunError> {
    let tracer = scenario.brownian();
    let mut rho = match scenario.initial {
        InitialState::Thermal | InitialState::Superposition => {
            MomentumDensityMatrix::thermal(grid, &tracer, scenario.gas.beta)
        }
        InitialState::Cold => MomentumDensityMatrix::point_state(grid, grid.len() / 2),
    };
    if !pairs.is_empty() {
        rho = rho.with_pairs(pairs).map_err(|e| RunError::Internal(e.to_string()))?;
        for &(i, j) in pairs {
            // largest coherence compatible with positivity
            let c = (rho.diag()[i] * rho.diag()[j]).sqrt();
            rho.set_coherence(i, j, C64::new(c, 0.0))
                .map_err(|e| RunError::Internal(e.to_string()))?;
        }
    }
    Ok(rho)
}

fn qlbe_evolve(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let grid = scenario.grid().map_err(|e| validation(format!("grid: {e}")))?;
    let pairs = qlbe_pairs(scenario, &grid)?;
    let (grid, kernel) = out.time("kernel", |_| build_kernel(scenario, &pairs))?;
    let rho0 = qlbe_initial(scenario, grid, &pairs)?;

    let opts = GeneratorOptions {
        trace_mode: scenario.trace_mode,
        kinetic: scenario.kinetic,
    };
    let max_out_cont = kernel.out_continuous().iter().fold(0.0f64, |a, &x| a.max(x));
    let tracer_mass = scenario.brownian_mass;

    let mut names: Vec<String> = vec!["trace".into(), "kinetic_energy".into(), "min_diag".into()];
    let mut funcs: Vec<Box<dyn Fn(&MomentumDensityMatrix) -> f64>> = vec![
        Box::new(|r: &MomentumDensityMatrix| r.trace()),
        Box::new(move |r: &MomentumDensityMatrix| r.mean_p_squared() / (2.0 * tracer_mass)),
        Box::new(|r: &MomentumDensityMatrix| r.min_diagonal()),
    ];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        names.push(format!("coh_{i}_{j}"));
        funcs.push(Box::new(move |r: &MomentumDensityMatrix| {
            r.coherences()[k].norm()
        }));
    }
    let observables: Vec<(&str, &dyn Fn(&MomentumDensityMatrix) -> f64)> = names
        .iter()
        .map(|s| s.as_str())
        .zip(
            funcs
                .iter()
                .map(|f| f.as_ref() as &dyn Fn(&MomentumDensityMatrix) -> f64),
        )
        .collect();

    let config = EvolutionConfig {
        method: scenario.method,
        renormalize: scenario.renormalize,
        record_every: scenario.record_every,
        max_rate: kernel.rate_scale().max(max_out_cont),
        ..EvolutionConfig::new(scenario.t_end, scenario.dt)
    };
    let generator = |rho: &MomentumDensityMatrix| {
        kernel.apply(rho, &opts).expect("state built on the kernel grid")
    };
    let result = out.time("evolve", |_| {
        evolve::evolve(generator, rho0, &config, &observables).map_err(RunError::from)
    })?;

    out.write("trajectory.csv", &result.trajectory.to_csv())?;

    let coherence_fit = pairs.first().and_then(|&(i, j)| {
        let v = result.trajectory.column(&format!("coh_{i}_{j}"))?;
        evolve::fit_exponential_rate(&result.trajectory.times, &v).ok()
    });
    let thermal_energy = 1.5 / scenario.gas.beta;
    let final_energy = result.state.mean_p_squared() / (2.0 * tracer_mass);
    #[derive(Serialize)]
    struct QlbeSummary {
        steps: usize,
        max_trace_drift: f64,
        worst_population: f64,
        coarse_step: bool,
        final_kinetic_energy: f64,
        thermal_kinetic_energy: f64,
        kinetic_relative_deviation: f64,
        coherence_rate: Option<f64>,
        coherence_rate_stderr: Option<f64>,
    }
    out.write_json(
        "summary.json",
        &QlbeSummary {
            steps: result.steps,
            max_trace_drift: result.max_trace_drift,
            worst_population: result.worst_population,
            coarse_step: result.coarse_step,
            final_kinetic_energy: final_energy,
            thermal_kinetic_energy: thermal_energy,
            kinetic_relative_deviation: (final_energy - thermal_energy).abs() / thermal_energy,
            coherence_rate: coherence_fit.map(|f| f.rate),
            coherence_rate_stderr: coherence_fit.map(|f| f.stderr),
        },
    )
}

// ---------------------------------------------------------------------------
// compare-diosi

fn compare_diosi(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let model = qlbe_model(scenario)?;
    let tracer = scenario.brownian();
    let gas = &scenario.gas;
    let spec = &scenario.quadrature;
    let p_scale = tracer.thermal_momentum(gas.beta);
    let q_scale = 2.0 * gas.thermal_momentum();
    let mut rng = testkit::rng(scenario.seed);

    let mut csv =
        String::from("kind,px,py,pz,ppx,ppy,ppz,qx,qy,qz,monitoring_abs,diosi_abs,rel_diff\n");
    let mut max_diag = 0.0f64;
    let mut min_off = f64::INFINITY;
    let mut max_off = 0.0f64;
    out.time("compare", |_| {
        for kind in ["diagonal", "off-diagonal"] {
            let count = if kind == "diagonal" { 20 } else { 10 };
            for _ in 0..count {
                let p = testkit::random_vector3(&mut rng, p_scale);
                let pp = if kind == "diagonal" {
                    p
                } else {
                    testkit::random_vector3(&mut rng, p_scale)
                };
                let q = testkit::random_vector3(&mut rng, q_scale);
                let mon =
                    m_in_variant(model.as_ref(), LVariant::Monitoring, &p, &pp, &q, gas, &tracer, spec)?;
                let dio =
                    m_in_variant(model.as_ref(), LVariant::Diosi, &p, &pp, &q, gas, &tracer, spec)?;
                let rel = (mon - dio).norm() / mon.norm().max(f64::MIN_POSITIVE);
                if kind == "diagonal" {
                    max_diag = max_diag.max(rel);
                } else {
                    min_off = min_off.min(rel);
                    max_off = max_off.max(rel);
                }
                writeln!(
                    csv,
                    "{kind},{},{},{},{},{},{},{},{},{},{},{},{rel}",
                    p.x, p.y, p.z, pp.x, pp.y, pp.z, q.x, q.y, q.z,
                    mon.norm(), dio.norm()
                )
                .unwrap();
            }
        }
        Ok(())
    })?;
    out.write("compare_diosi.csv", &csv)?;

    #[derive(Serialize)]
    struct DiosiSummary {
        diagonal_points: usize,
        off_diagonal_points: usize,
        max_diagonal_rel_diff: f64,
        diagonal_threshold: f64,
        diagonal_coincides: bool,
        min_off_diagonal_rel_diff: f64,
        max_off_diagonal_rel_diff: f64,
    }
    let threshold = 10.0 * scenario.quadrature.rel_tol;
    out.write_json(
        "summary.json",
        &DiosiSummary {
            diagonal_points: 20,
            off_diagonal_points: 10,
            max_diagonal_rel_diff: max_diag,
            diagonal_threshold: threshold,
            diagonal_coincides: max_diag < threshold,
            min_off_diagonal_rel_diff: min_off,
            max_off_diagonal_rel_diff: max_off,
        },
    )
}

// ---------------------------------------------------------------------------
// limits-suite

#[derive(Serialize)]
struct LimitCheck {
    name: &'static str,
    measured: f64,
    threshold: f64,
    pass: bool,
}

impl LimitCheck {
    fn new(name: &'static str, measured: f64, threshold: f64) -> Self {
        Self {
            name,
            measured,
            threshold,
            pass: measured < threshold,
        }
    }
}

fn limits_suite(scenario: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let gas = &scenario.gas;
    let spec = &scenario.quadrature;
    let mut checks: Vec<LimitCheck> = Vec::new();

    // 1. analytic collision-rate oracle: n σ ⟨v⟩ for a constant amplitude
    out.time("rate-oracle", |_| {
        let model = crate::scattering::ConstantAmplitude::uniform(C64::new(1.0, 0.0));
        let tracer = BrownianParams::new(1e12).map_err(|e| RunError::Internal(e.to_string()))?;
        let rate = m_out_cl(&model, &nalgebra::Vector3::zeros(), gas, &tracer, spec)?;
        let expected = gas.density * 4.0 * std::f64::consts::PI * gas.mean_speed();
        checks.push(LimitCheck::new(
            "analytic-rate-oracle",
            (rate - expected).abs() / expected,
            1e-6,
        ));
        Ok(())
    })?;

    // 2. Diósi diagonal coincidence on the scenario's model
    out.time("diosi-diagonal", |_| {
        let model = qlbe_model(scenario)?;
        let tracer = scenario.brownian();
        let p_scale = tracer.thermal_momentum(gas.beta);
        let q_scale = 2.0 * gas.thermal_momentum();
        let mut rng = testkit::rng(scenario.seed.wrapping_add(1));
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let p = testkit::random_vector3(&mut rng, p_scale);
            let q = testkit::random_vector3(&mut rng, q_scale);
            let mon =
                m_in_variant(model.as_ref(), LVariant::Monitoring, &p, &p, &q, gas, &tracer, spec)?;
            let dio =
                m_in_variant(model.as_ref(), LVariant::Diosi, &p, &p, &q, gas, &tracer, spec)?;
            worst = worst.max((mon - dio).norm() / mon.norm().max(f64::MIN_POSITIVE));
        }
        checks.push(LimitCheck::new(
            "diosi-diagonal-coincidence",
            worst,
            10.0 * spec.rel_tol,
        ));
        Ok(())
    })?;

    // 3. pure decoherence at m/M = 1e-6: frozen populations, finite dephasing
    out.time("pure-decoherence", |_| {
        let tracer = BrownianParams::new(1e6 * gas.mass).map_err(|e| RunError::Internal(e.to_string()))?;
        let model = crate::scattering::ConstantAmplitude::uniform(C64::new(1.0, 0.0));
        let grid = crate::qlbe::MomentumGrid3::new(5, 5.0 * tracer.thermal_momentum(gas.beta))
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let i = grid.flat_of_ints([0, 0, 1]).expect("on grid");
        let j = grid.flat_of_ints([0, 0, -1]).expect("on grid");
        let pairs = [(i.min(j), i.max(j))];
        let kernel =
            RatePairKernel::build(&model, grid, gas, &tracer, spec, &pairs, LVariant::Monitoring)?;
        let mut rho = MomentumDensityMatrix::thermal(grid, &tracer, gas.beta)
            .with_pairs(&pairs)
            .map_err(|e| RunError::Internal(e.to_string()))?;
        rho.set_coherence(pairs[0].0, pairs[0].1, C64::new(0.5, 0.0))
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let physical_rate = kernel.out_continuous().iter().fold(0.0f64, |a, &x| a.max(x));
        let d = kernel
            .apply(&rho, &GeneratorOptions::default())
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let pop_residual = d.diag().iter().fold(0.0f64, |a, &x| a.max(x.abs()))
            / (physical_rate * rho.sup_norm());
        checks.push(LimitCheck::new("pure-decoherence-populations", pop_residual, 1e-4));
        let d_cont = kernel
            .apply(
                &rho,
                &GeneratorOptions {
                    trace_mode: TraceMode::Continuous,
                    ..Default::default()
                },
            )
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let decay = -(d_cont.coherences()[0] / rho.coherences()[0]).re;
        // coherences must dephase at the physical collision rate
        checks.push(LimitCheck::new(
            "pure-decoherence-dephasing",
            (decay - physical_rate).abs() / physical_rate,
            1e-4,
        ));
        Ok(())
    })?;

    // 4. Maxwell stationarity on the scenario grid
    out.time("stationarity", |_| {
        let (grid, kernel) = build_kernel(scenario, &[])?;
        let tracer = scenario.brownian();
        let rho = MomentumDensityMatrix::thermal(grid, &tracer, gas.beta);
        let d = kernel
            .apply(&rho, &GeneratorOptions::default())
            .map_err(|e| RunError::Internal(e.to_string()))?;
        let residual = d.sup_norm() / (kernel.rate_scale() * rho.sup_norm());
        checks.push(LimitCheck::new("maxwell-stationarity", residual, 1e-3));
        Ok(())
    })?;

    // 5. 5D-vs-3D out-rate consistency (Monte Carlo over transfers)
    out.time("mc-5d-3d", |_| {
        let model = qlbe_model(scenario)?;
        let tracer = scenario.brownian();
        let p_scale = tracer.thermal_momentum(gas.beta);
        let width = 3.0 * gas.thermal_momentum() * (1.0 + gas.mass / tracer.mass);
        let norm = (2.0 * std::f64::consts::PI * width * width).powf(1.5);
        let mut rng = testkit::rng(scenario.seed.wrapping_add(2));
        let mut worst_z = 0.0f64;
        for k in 0..10u64 {
            let p = testkit::random_vector3(&mut rng, p_scale);
            let direct = m_out_cl(model.as_ref(), &p, gas, &tracer, spec)?;
            let est = quad::mc_integrate(
                |qv: &nalgebra::Vector3<f64>| {
                    let m = crate::qlbe::m_in_diagonal(model.as_ref(), &(p + qv), qv, gas, &tracer)
                        .expect("q nonzero almost surely");
                    C64::new(
                        m * norm * (qv.norm_squared() / (2.0 * width * width)).exp(),
                        0.0,
                    )
                },
                |rng| testkit::random_vector3(rng, width),
                30_000,
                scenario.seed.wrapping_add(100 + k),
            );
            let z = (est.mean.re - direct).abs() / est.std_error.max(f64::MIN_POSITIVE);
            worst_z = worst_z.max(z);
        }
        checks.push(LimitCheck::new("out-rate-5d-vs-3d", worst_z, 3.0));
        Ok(())
    })?;

    #[derive(Serialize)]
    struct LimitsReport {
        checks: Vec<LimitCheck>,
        pass: bool,
    }
    let pass = checks.iter().all(|c| c.pass);
    out.write_json("limits.json", &LimitsReport { checks, pass })
}

// ---------------------------------------------------------------------------
// CLI

#[derive(Parser, Debug)]
#[command(
    name = "qgas",
    about = "Collision-rate and master-equation computations driven by scenario files",
    version
)]
struct Cli {
    /// Run mode; overrides the scenario file's `mode` key.
    mode: String,
    /// Path to the scenario TOML file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Worker-thread bound for the parallel kernels.
    #[arg(long)]
    threads: Option<usize>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the quadrature relative tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: String,
    kind: &'a str,
    exit_code: i32,
}

/// Full CLI entry point; returns the process exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            // clap prints its own help/usage text
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", cli.out.join(f).display());
            }
            EXIT_OK
        }
        Err(err) => {
            let report = ErrorReport {
                error: err.to_string(),
                kind: err.kind(),
                exit_code: err.exit_code(),
            };
            if fs::create_dir_all(&cli.out).is_ok() {
                if let Ok(text) = serde_json::to_string_pretty(&report) {
                    let _ = fs::write(cli.out.join("error.json"), text);
                }
            }
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<Vec<String>, RunError> {
    let mode = Mode::parse(&cli.mode).ok_or_else(|| {
        validation(format!(
            "mode: unknown mode `{}`; expected one of {}",
            cli.mode,
            Mode::ALL.map(|m| m.as_str()).join(", ")
        ))
    })?;
    if let Some(n) = cli.threads {
        par::set_threads(n);
    }
    let text = fs::read_to_string(&cli.scenario).map_err(RunError::Io)?;
    let (mut scenario, warnings) = Scenario::from_toml(&text)?;
    scenario.mode = mode;
    if let Some(seed) = cli.seed {
        scenario.seed = seed;
    }
    if let Some(tol) = cli.tol {
        scenario.quadrature.rel_tol = tol;
        scenario
            .quadrature
            .validate()
            .map_err(|e| validation(format!("tol: {e}")))?;
    }
    run(&scenario, &text, &warnings, &cli.out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(text: &str) -> Scenario {
        Scenario::from_toml(text).unwrap().0
    }

    fn run_in_tempdir(text: &str) -> (tempfile::TempDir, Vec<String>) {
        let dir = tempfile::tempdir().unwrap();
        let s = scenario(text);
        let files = run(&s, text, &[], dir.path()).unwrap();
        (dir, files)
    }

    fn read(dir: &tempfile::TempDir, name: &str) -> String {
        fs::read_to_string(dir.path().join(name)).unwrap()
    }

    #[test]
    fn montecore_check_reports_pass() {
        let (dir, files) = run_in_tempdir("mode = \"montecore-check\"\n");
        assert!(files.contains(&"montecore_check.json".to_string()));
        let v: serde_json::Value = serde_json::from_str(&read(&dir, "montecore_check.json")).unwrap();
        assert_eq!(v["pass"], serde_json::Value::Bool(true));
        assert_eq!(v["models"], 100);
        let manifest: serde_json::Value =
            serde_json::from_str(&read(&dir, "manifest.json")).unwrap();
        assert_eq!(manifest["mode"], "montecore-check");
        // every output is referenced from the manifest
        for f in &files {
            if f != "manifest.json" {
                assert!(manifest["outputs"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .any(|v| v == f.as_str()));
            }
        }
    }

    #[test]
    fn channel_rates_constant_amplitude_matches_oracle() {
        // single channel, constant amplitude c: total loss = n σ ⟨v⟩
        let text = concat!(
            "mode = \"channel-rates\"\n",
            "[model]\nkind = \"constant\"\namplitude = 1.0\n",
        );
        let (dir, _) = run_in_tempdir(text);
        let v: serde_json::Value = serde_json::from_str(&read(&dir, "rates.json")).unwrap();
        let m0000 = v["m"][0][0][0][0][0].as_f64().unwrap();
        let expected = 4.0 * std::f64::consts::PI * (8.0 / std::f64::consts::PI).sqrt();
        assert!(
            (m0000 - expected).abs() < 1e-5 * expected,
            "M^00_00 = {m0000}, expected {expected}"
        );
    }

    #[test]
    fn qlbe_evolve_thermal_state_stays_flat() {
        let text = concat!(
            "mode = \"qlbe-evolve\"\n",
            "[model]\nkind = \"hard-sphere\"\nradius = 1.0\n",
            "[grid]\npoints = 5\npmax = 2.5\n",
            "[evolution]\nt_end = 0.05\ndt = 0.005\ninitial = \"thermal\"\n",
        );
        let (dir, _) = run_in_tempdir(text);
        let v: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
        assert!(v["max_trace_drift"].as_f64().unwrap() < 1e-10);
        let csv = read(&dir, "trajectory.csv");
        assert!(csv.starts_with("t,trace,kinetic_energy,min_diag\n"));
        // the thermal state is stationary: kinetic energy must not drift
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        let energy = |row: &str| row.split(',').nth(2).unwrap().parse::<f64>().unwrap();
        let (e0, e1) = (energy(rows[0]), energy(rows[rows.len() - 1]));
        assert!((e1 - e0).abs() < 1e-4 * e0, "kinetic drift: {e0} -> {e1}");
    }

    #[test]
    fn compare_diosi_summary_reports_coincidence() {
        let text = concat!(
            "mode = \"compare-diosi\"\n",
            "[model]\nkind = \"hard-sphere\"\nradius = 1.0\n",
        );
        let (dir, _) = run_in_tempdir(text);
        let v: serde_json::Value = serde_json::from_str(&read(&dir, "summary.json")).unwrap();
        assert_eq!(v["diagonal_coincides"], serde_json::Value::Bool(true));
        assert!(v["max_off_diagonal_rel_diff"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn cli_validation_failure_writes_error_json() {
        let dir = tempfile::tempdir().unwrap();
        let scen = dir.path().join("s.toml");
        fs::write(&scen, "mode = \"qlbe-rates\"\n[gas]\nbeta = -1.0\n").unwrap();
        let out = dir.path().join("out");
        let code = cli_main([
            "qgas",
            "qlbe-rates",
            "--scenario",
            scen.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_VALIDATION);
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
        assert_eq!(v["kind"], "validation");
        assert!(v["error"].as_str().unwrap().contains("gas.beta"));
    }

    #[test]
    fn cli_missing_scenario_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let code = cli_main([
            "qgas",
            "qlbe-rates",
            "--scenario",
            "/nonexistent/path.toml",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_IO);
    }
}
