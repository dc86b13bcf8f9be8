//! Scenario files: the TOML run descriptions consumed by the CLI.
//!
//! A scenario names a run mode and fills in the physics (gas, channels or
//! Brownian mass, scattering model), the numerics (grid, quadrature) and the
//! evolution parameters. Parsing is strict about values but lenient about
//! vocabulary: every validation problem is collected with its field path so
//! one round trip fixes them all, while unknown keys only produce warnings
//! (forward compatibility with newer writers).

use std::fmt;
use std::path::Path;

use thiserror::Error;
use toml::{Table, Value};

use crate::evolve::StepMethod;
use crate::gasenv::GasParams;
use crate::linalg::{CMatrix, C64};
use crate::qlbe::{BrownianParams, LVariant, MomentumGrid3, TraceMode};
use crate::quad::QuadratureSpec;
use crate::scattering::{
    ConstantAmplitude, GaussianBorn, HardSphere, ScatteringModel, TwoChannelToy,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
}

/// What the run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MontecoreCheck,
    ChannelRates,
    ChannelEvolve,
    QlbeRates,
    QlbeEvolve,
    CompareDiosi,
    LimitsSuite,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::MontecoreCheck,
        Mode::ChannelRates,
        Mode::ChannelEvolve,
        Mode::QlbeRates,
        Mode::QlbeEvolve,
        Mode::CompareDiosi,
        Mode::LimitsSuite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::MontecoreCheck => "montecore-check",
            Mode::ChannelRates => "channel-rates",
            Mode::ChannelEvolve => "channel-evolve",
            Mode::QlbeRates => "qlbe-rates",
            Mode::QlbeEvolve => "qlbe-evolve",
            Mode::CompareDiosi => "compare-diosi",
            Mode::LimitsSuite => "limits-suite",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.iter().copied().find(|m| m.as_str() == s)
    }

    /// Whether the mode works on the internal-channel master equation (as
    /// opposed to the momentum-grid one).
    pub fn is_channel_mode(&self) -> bool {
        matches!(self, Mode::ChannelRates | Mode::ChannelEvolve)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scattering model selection with its parameters.
#[derive(Debug, Clone)]
pub enum ModelConfig {
    /// Momentum-independent amplitude matrix over the channel basis (a 1×1
    /// matrix for single-channel / Brownian runs).
    Constant { amplitudes: CMatrix },
    HardSphere { radius: f64 },
    GaussianBorn { amplitude0: f64, width: f64 },
    /// Two-channel fixture with energy-dependent on-shell kinematics.
    TwoChannel { amplitudes: CMatrix },
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::Constant { .. } => "constant",
            ModelConfig::HardSphere { .. } => "hard-sphere",
            ModelConfig::GaussianBorn { .. } => "gaussian-born",
            ModelConfig::TwoChannel { .. } => "two-channel",
        }
    }

    pub fn n_channels(&self) -> usize {
        match self {
            ModelConfig::Constant { amplitudes } => amplitudes.nrows(),
            ModelConfig::TwoChannel { .. } => 2,
            _ => 1,
        }
    }

    /// Instantiate the model. Two-channel models take their energies and the
    /// gas mass from the scenario.
    pub fn build(&self, scenario: &Scenario) -> Box<dyn ScatteringModel> {
        match self {
            ModelConfig::Constant { amplitudes } => {
                Box::new(ConstantAmplitude::new(amplitudes.clone()))
            }
            ModelConfig::HardSphere { radius } => Box::new(HardSphere::new(*radius)),
            ModelConfig::GaussianBorn { amplitude0, width } => {
                Box::new(GaussianBorn::new(*amplitude0, *width))
            }
            ModelConfig::TwoChannel { amplitudes } => Box::new(TwoChannelToy::new(
                [scenario.channel_energies[0], scenario.channel_energies[1]],
                amplitudes.clone(),
                scenario.gas.mass,
            )),
        }
    }
}

/// Initial state for evolution modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// Channel modes: equal-weight pure superposition of all channels.
    /// Momentum modes: the discretized Maxwell distribution.
    Thermal,
    /// Channel modes: all population in the highest channel.
    /// Momentum modes: a point distribution at the origin.
    Cold,
    /// Channel modes only: equal superposition (alias kept for clarity).
    Superposition,
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub mode: Mode,
    pub gas: GasParams,
    pub channel_energies: Vec<f64>,
    pub brownian_mass: f64,
    pub model: ModelConfig,
    pub grid_points: usize,
    /// Half-extent of the momentum grid; 0 means the default 5·√(M/β).
    pub grid_pmax: f64,
    pub variant: LVariant,
    pub trace_mode: TraceMode,
    pub kinetic: bool,
    /// Optional tracked coherence pair, as two lattice coordinate triples.
    pub coherence_pair: Option<([i64; 3], [i64; 3])>,
    pub quadrature: QuadratureSpec,
    pub t_end: f64,
    pub dt: f64,
    pub method: StepMethod,
    pub record_every: usize,
    pub renormalize: bool,
    pub initial: InitialState,
    pub seed: u64,
}

impl Scenario {
    pub fn brownian(&self) -> BrownianParams {
        BrownianParams::new(self.brownian_mass).expect("validated positive")
    }

    /// The momentum grid implied by the [grid] section.
    pub fn grid(&self) -> Result<MomentumGrid3, crate::qlbe::QlbeError> {
        if self.grid_pmax > 0.0 {
            MomentumGrid3::new(self.grid_points, self.grid_pmax)
        } else {
            let extent = 5.0 * self.brownian().thermal_momentum(self.gas.beta);
            MomentumGrid3::new(self.grid_points, extent)
        }
    }

    pub fn from_path(path: &Path) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_toml(&text)
    }

    /// Parse and validate. On success returns the scenario plus any
    /// unknown-key warnings; on failure returns every validation error found.
    pub fn from_toml(text: &str) -> Result<(Scenario, Vec<String>), ScenarioError> {
        let root: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))?;
        let mut cx = Context::default();
        let scenario = parse_root(&root, &mut cx);
        if cx.errors.is_empty() {
            Ok((scenario.expect("no errors collected"), cx.warnings))
        } else {
            Err(ScenarioError::Validation(cx.errors))
        }
    }
}

/// Error and warning accumulator with field-path reporting.
#[derive(Default)]
struct Context {
    errors: Vec<String>,
    warnings: Vec<String>,
}

impl Context {
    fn err(&mut self, path: &str, msg: impl fmt::Display) {
        self.errors.push(format!("{path}: {msg}"));
    }

    fn warn_unknown(&mut self, table: &Table, prefix: &str, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                let path = if prefix.is_empty() {
                    key.clone()
                } else {
                    format!("{prefix}.{key}")
                };
                self.warnings.push(format!("unknown key `{path}` ignored"));
            }
        }
    }

    fn f64(&mut self, t: &Table, prefix: &str, key: &str, default: f64) -> f64 {
        match t.get(key) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                self.err(&join(prefix, key), format!("expected a number, got {other}"));
                default
            }
        }
    }

    fn positive_f64(&mut self, t: &Table, prefix: &str, key: &str, default: f64) -> f64 {
        let v = self.f64(t, prefix, key, default);
        if !(v > 0.0) || !v.is_finite() {
            self.err(&join(prefix, key), format!("must be positive, got {v}"));
            default
        } else {
            v
        }
    }

    fn usize_(&mut self, t: &Table, prefix: &str, key: &str, default: usize) -> usize {
        match t.get(key) {
            None => default,
            Some(Value::Integer(v)) if *v >= 0 => *v as usize,
            Some(other) => {
                self.err(
                    &join(prefix, key),
                    format!("expected a non-negative integer, got {other}"),
                );
                default
            }
        }
    }

    fn bool_(&mut self, t: &Table, prefix: &str, key: &str, default: bool) -> bool {
        match t.get(key) {
            None => default,
            Some(Value::Boolean(v)) => *v,
            Some(other) => {
                self.err(&join(prefix, key), format!("expected a boolean, got {other}"));
                default
            }
        }
    }

    fn string(&mut self, t: &Table, prefix: &str, key: &str, default: &str) -> String {
        match t.get(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                self.err(&join(prefix, key), format!("expected a string, got {other}"));
                default.to_string()
            }
        }
    }

    /// Complex value: a plain number or a `[re, im]` pair.
    fn complex(&mut self, value: &Value, path: &str) -> C64 {
        match value {
            Value::Float(v) => C64::new(*v, 0.0),
            Value::Integer(v) => C64::new(*v as f64, 0.0),
            Value::Array(a) if a.len() == 2 => {
                let mut parts = [0.0f64; 2];
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(x) => parts[i] = *x,
                        Value::Integer(x) => parts[i] = *x as f64,
                        other => self.err(path, format!("expected a number, got {other}")),
                    }
                }
                C64::new(parts[0], parts[1])
            }
            other => {
                self.err(path, format!("expected a number or [re, im] pair, got {other}"));
                C64::new(0.0, 0.0)
            }
        }
    }

    /// Square complex matrix: array of equal-length rows.
    fn complex_matrix(&mut self, value: &Value, path: &str) -> CMatrix {
        let rows = match value {
            Value::Array(rows) if !rows.is_empty() => rows,
            other => {
                self.err(path, format!("expected an array of rows, got {other}"));
                return CMatrix::identity(1, 1);
            }
        };
        let n = rows.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            match row {
                Value::Array(cols) if cols.len() == n => {
                    for (j, v) in cols.iter().enumerate() {
                        m[(i, j)] = self.complex(v, &format!("{path}[{i}][{j}]"));
                    }
                }
                other => {
                    self.err(
                        &format!("{path}[{i}]"),
                        format!("expected a row of {n} entries, got {other}"),
                    );
                }
            }
        }
        m
    }

    fn int_triple(&mut self, value: &Value, path: &str) -> [i64; 3] {
        match value {
            Value::Array(a) if a.len() == 3 => {
                let mut out = [0i64; 3];
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::Integer(x) => out[i] = *x,
                        other => self.err(path, format!("expected an integer, got {other}")),
                    }
                }
                out
            }
            other => {
                self.err(path, format!("expected a triple of integers, got {other}"));
                [0; 3]
            }
        }
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn empty_table() -> Table {
    Table::new()
}

fn section<'a>(root: &'a Table, name: &str, cx: &mut Context) -> Option<&'a Table> {
    match root.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(other) => {
            cx.err(name, format!("expected a table, got {other}"));
            None
        }
    }
}

fn parse_root(root: &Table, cx: &mut Context) -> Option<Scenario> {
    cx.warn_unknown(
        root,
        "",
        &[
            "mode",
            "seed",
            "gas",
            "channels",
            "brownian",
            "model",
            "grid",
            "qlbe",
            "quadrature",
            "evolution",
            "output",
        ],
    );

    let mode = match root.get("mode") {
        Some(Value::String(s)) => match Mode::parse(s) {
            Some(m) => Some(m),
            None => {
                cx.err(
                    "mode",
                    format!(
                        "unknown mode `{s}`; expected one of {}",
                        Mode::ALL.map(|m| m.as_str()).join(", ")
                    ),
                );
                None
            }
        },
        Some(other) => {
            cx.err("mode", format!("expected a string, got {other}"));
            None
        }
        None => {
            cx.err("mode", "required key missing");
            None
        }
    };

    let seed = match root.get("seed") {
        None => 1,
        Some(Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(other) => {
            cx.err("seed", format!("expected a non-negative integer, got {other}"));
            1
        }
    };

    // [gas]
    let gas_table = section(root, "gas", cx).cloned().unwrap_or_else(empty_table);
    cx.warn_unknown(&gas_table, "gas", &["mass", "beta", "density"]);
    let gas_mass = cx.positive_f64(&gas_table, "gas", "mass", 1.0);
    let gas_beta = cx.positive_f64(&gas_table, "gas", "beta", 1.0);
    let gas_density = cx.positive_f64(&gas_table, "gas", "density", 1.0);

    // [channels]
    let channel_energies = match section(root, "channels", cx) {
        None => vec![0.0],
        Some(t) => {
            cx.warn_unknown(t, "channels", &["energies"]);
            match t.get("energies") {
                None => {
                    cx.err("channels.energies", "required key missing");
                    vec![0.0]
                }
                Some(Value::Array(a)) if !a.is_empty() => a
                    .iter()
                    .enumerate()
                    .map(|(i, v)| match v {
                        Value::Float(x) => *x,
                        Value::Integer(x) => *x as f64,
                        other => {
                            cx.err(
                                &format!("channels.energies[{i}]"),
                                format!("expected a number, got {other}"),
                            );
                            0.0
                        }
                    })
                    .collect(),
                Some(other) => {
                    cx.err(
                        "channels.energies",
                        format!("expected a non-empty array, got {other}"),
                    );
                    vec![0.0]
                }
            }
        }
    };

    // [brownian]
    let brownian_table = section(root, "brownian", cx)
        .cloned()
        .unwrap_or_else(empty_table);
    cx.warn_unknown(&brownian_table, "brownian", &["mass"]);
    let brownian_mass = cx.positive_f64(&brownian_table, "brownian", "mass", 1.0);

    // [model]
    let model = parse_model(root, &channel_energies, cx);

    // [grid]
    let grid_table = section(root, "grid", cx).cloned().unwrap_or_else(empty_table);
    cx.warn_unknown(&grid_table, "grid", &["points", "pmax"]);
    let grid_points = cx.usize_(&grid_table, "grid", "points", 21);
    if grid_points < 3 || grid_points % 2 == 0 {
        cx.err("grid.points", format!("must be odd and ≥ 3, got {grid_points}"));
    }
    let grid_pmax = cx.f64(&grid_table, "grid", "pmax", 0.0);
    if grid_pmax < 0.0 || !grid_pmax.is_finite() {
        cx.err("grid.pmax", format!("must be ≥ 0 (0 = auto), got {grid_pmax}"));
    }

    // [qlbe]
    let qlbe_table = section(root, "qlbe", cx).cloned().unwrap_or_else(empty_table);
    cx.warn_unknown(
        &qlbe_table,
        "qlbe",
        &["diosi_mode", "trace_mode", "kinetic", "pair_a", "pair_b"],
    );
    let variant = match cx.string(&qlbe_table, "qlbe", "diosi_mode", "monitoring").as_str() {
        "monitoring" => LVariant::Monitoring,
        "diosi" => LVariant::Diosi,
        other => {
            cx.err(
                "qlbe.diosi_mode",
                format!("expected `monitoring` or `diosi`, got `{other}`"),
            );
            LVariant::Monitoring
        }
    };
    let trace_mode = match cx.string(&qlbe_table, "qlbe", "trace_mode", "discrete").as_str() {
        "discrete" => TraceMode::Discrete,
        "continuous" => TraceMode::Continuous,
        other => {
            cx.err(
                "qlbe.trace_mode",
                format!("expected `discrete` or `continuous`, got `{other}`"),
            );
            TraceMode::Discrete
        }
    };
    let kinetic = cx.bool_(&qlbe_table, "qlbe", "kinetic", false);
    let coherence_pair = match (qlbe_table.get("pair_a"), qlbe_table.get("pair_b")) {
        (None, None) => None,
        (Some(a), Some(b)) => Some((
            cx.int_triple(a, "qlbe.pair_a"),
            cx.int_triple(b, "qlbe.pair_b"),
        )),
        _ => {
            cx.err("qlbe.pair_a", "pair_a and pair_b must be given together");
            None
        }
    };

    // [quadrature]
    let quad_table = section(root, "quadrature", cx)
        .cloned()
        .unwrap_or_else(empty_table);
    cx.warn_unknown(
        &quad_table,
        "quadrature",
        &[
            "radial_nodes",
            "angular_order",
            "plane_nodes_per_axis",
            "rel_tol",
            "max_refinements",
        ],
    );
    let dq = QuadratureSpec::default();
    let quadrature = QuadratureSpec {
        radial_nodes: cx.usize_(&quad_table, "quadrature", "radial_nodes", dq.radial_nodes),
        angular_order: cx.usize_(&quad_table, "quadrature", "angular_order", dq.angular_order),
        plane_nodes_per_axis: cx.usize_(
            &quad_table,
            "quadrature",
            "plane_nodes_per_axis",
            dq.plane_nodes_per_axis,
        ),
        rel_tol: cx.positive_f64(&quad_table, "quadrature", "rel_tol", dq.rel_tol),
        max_refinements: cx.usize_(
            &quad_table,
            "quadrature",
            "max_refinements",
            dq.max_refinements as usize,
        ) as u32,
    };
    if let Err(e) = quadrature.validate() {
        cx.err("quadrature", e);
    }

    // [evolution]
    let evo_table = section(root, "evolution", cx)
        .cloned()
        .unwrap_or_else(empty_table);
    cx.warn_unknown(
        &evo_table,
        "evolution",
        &["t_end", "dt", "method", "record_every", "renormalize", "initial"],
    );
    let t_end = cx.positive_f64(&evo_table, "evolution", "t_end", 1.0);
    let dt = cx.positive_f64(&evo_table, "evolution", "dt", 1e-3);
    let method = match cx.string(&evo_table, "evolution", "method", "rk4").as_str() {
        "rk4" => StepMethod::Rk4,
        "euler" => StepMethod::Euler,
        other => {
            cx.err(
                "evolution.method",
                format!("expected `rk4` or `euler`, got `{other}`"),
            );
            StepMethod::Rk4
        }
    };
    let record_every = cx.usize_(&evo_table, "evolution", "record_every", 1).max(1);
    let renormalize = cx.bool_(&evo_table, "evolution", "renormalize", false);
    let initial = match cx.string(&evo_table, "evolution", "initial", "thermal").as_str() {
        "thermal" => InitialState::Thermal,
        "cold" => InitialState::Cold,
        "superposition" => InitialState::Superposition,
        other => {
            cx.err(
                "evolution.initial",
                format!("expected `thermal`, `cold` or `superposition`, got `{other}`"),
            );
            InitialState::Thermal
        }
    };

    // [output] is reserved for the runner (prefix etc.); accept and ignore
    // unknown keys there too.
    if let Some(t) = section(root, "output", cx) {
        cx.warn_unknown(t, "output", &["prefix"]);
    }

    // cross-field checks
    if let Some(model) = &model {
        let nc = model.n_channels();
        if nc > 1 && nc != channel_energies.len() {
            cx.err(
                "model",
                format!(
                    "amplitude matrix is {nc}×{nc} but channels.energies has {} entries",
                    channel_energies.len()
                ),
            );
        }
        if matches!(model, ModelConfig::TwoChannel { .. }) && channel_energies.len() != 2 {
            cx.err("channels.energies", "two-channel model needs exactly 2 energies");
        }
    }

    let gas = match GasParams::new(gas_mass, gas_beta, gas_density) {
        Ok(g) => Some(g),
        Err(e) => {
            cx.err("gas", e);
            None
        }
    };

    if !cx.errors.is_empty() {
        return None;
    }
    Some(Scenario {
        mode: mode?,
        gas: gas?,
        channel_energies,
        brownian_mass,
        model: model?,
        grid_points,
        grid_pmax,
        variant,
        trace_mode,
        kinetic,
        coherence_pair,
        quadrature,
        t_end,
        dt,
        method,
        record_every,
        renormalize,
        initial,
        seed,
    })
}

fn parse_model(root: &Table, energies: &[f64], cx: &mut Context) -> Option<ModelConfig> {
    let t = match section(root, "model", cx) {
        Some(t) => t.clone(),
        None => {
            // default: unit constant amplitude on every channel pair needs a
            // size; use a diagonal unit amplitude over the channel count
            let n = energies.len();
            return Some(ModelConfig::Constant {
                amplitudes: CMatrix::identity(n, n),
            });
        }
    };
    cx.warn_unknown(
        &t,
        "model",
        &["kind", "amplitude", "amplitudes", "radius", "amplitude0", "width"],
    );
    let kind = cx.string(&t, "model", "kind", "constant");
    match kind.as_str() {
        "constant" => {
            let amplitudes = if let Some(v) = t.get("amplitudes") {
                cx.complex_matrix(v, "model.amplitudes")
            } else if let Some(v) = t.get("amplitude") {
                let c = cx.complex(v, "model.amplitude");
                let n = energies.len();
                CMatrix::from_fn(n, n, |i, j| if i == j { c } else { C64::new(0.0, 0.0) })
            } else {
                CMatrix::identity(energies.len(), energies.len())
            };
            Some(ModelConfig::Constant { amplitudes })
        }
        "hard-sphere" => {
            let radius = cx.positive_f64(&t, "model", "radius", 1.0);
            Some(ModelConfig::HardSphere { radius })
        }
        "gaussian-born" => {
            let amplitude0 = cx.f64(&t, "model", "amplitude0", 1.0);
            let width = cx.positive_f64(&t, "model", "width", 1.0);
            Some(ModelConfig::GaussianBorn { amplitude0, width })
        }
        "two-channel" => {
            let amplitudes = match t.get("amplitudes") {
                Some(v) => cx.complex_matrix(v, "model.amplitudes"),
                None => {
                    cx.err("model.amplitudes", "required for two-channel models");
                    CMatrix::identity(2, 2)
                }
            };
            if amplitudes.nrows() != 2 {
                cx.err(
                    "model.amplitudes",
                    format!("two-channel model needs a 2×2 matrix, got {}×{0}", amplitudes.nrows()),
                );
            }
            Some(ModelConfig::TwoChannel { amplitudes })
        }
        other => {
            cx.err(
                "model.kind",
                format!(
                    "unknown kind `{other}`; expected constant, hard-sphere, gaussian-born or two-channel"
                ),
            );
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_channel_rates_gets_defaults() {
        let text = "mode = \"channel-rates\"\n";
        let (s, warnings) = Scenario::from_toml(text).unwrap();
        assert!(warnings.is_empty());
        assert_eq!(s.mode, Mode::ChannelRates);
        assert_eq!(s.gas.mass, 1.0);
        assert_eq!(s.gas.beta, 1.0);
        assert_eq!(s.gas.density, 1.0);
        assert_eq!(s.channel_energies, vec![0.0]);
        assert_eq!(s.grid_points, 21);
        assert_eq!(s.seed, 1);
        assert!(matches!(s.model, ModelConfig::Constant { .. }));
        assert_eq!(s.variant, LVariant::Monitoring);
        assert_eq!(s.trace_mode, TraceMode::Discrete);
    }

    #[test]
    fn negative_beta_names_the_field() {
        let text = "mode = \"channel-rates\"\n[gas]\nbeta = -2.0\n";
        let err = Scenario::from_toml(text).unwrap_err();
        match err {
            ScenarioError::Validation(msgs) => {
                assert!(msgs.iter().any(|m| m.contains("gas.beta")), "{msgs:?}");
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn all_errors_collected_not_just_first() {
        let text = "mode = \"qlbe-evolve\"\n[gas]\nbeta = -1.0\nmass = 0.0\n[grid]\npoints = 8\n";
        let err = Scenario::from_toml(text).unwrap_err();
        match err {
            ScenarioError::Validation(msgs) => {
                assert!(msgs.iter().any(|m| m.contains("gas.beta")), "{msgs:?}");
                assert!(msgs.iter().any(|m| m.contains("gas.mass")), "{msgs:?}");
                assert!(msgs.iter().any(|m| m.contains("grid.points")), "{msgs:?}");
                assert!(msgs.len() >= 3);
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn unknown_keys_warn_but_parse() {
        let text = "mode = \"qlbe-rates\"\nfuture_key = 1\n[gas]\nflavor = \"argon\"\n";
        let (_, warnings) = Scenario::from_toml(text).unwrap();
        assert_eq!(warnings.len(), 2);
        assert!(warnings[0].contains("future_key"));
        assert!(warnings[1].contains("gas.flavor"));
    }

    #[test]
    fn syntax_error_is_a_parse_error() {
        let err = Scenario::from_toml("mode = [unclosed").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse(_)));
    }

    #[test]
    fn model_sections_parse() {
        let hs = "mode = \"qlbe-rates\"\n[model]\nkind = \"hard-sphere\"\nradius = 0.5\n";
        let (s, _) = Scenario::from_toml(hs).unwrap();
        assert!(matches!(s.model, ModelConfig::HardSphere { radius } if radius == 0.5));

        let gb = "mode = \"qlbe-rates\"\n[model]\nkind = \"gaussian-born\"\namplitude0 = 2.0\nwidth = 0.3\n";
        let (s, _) = Scenario::from_toml(gb).unwrap();
        assert!(matches!(s.model, ModelConfig::GaussianBorn { amplitude0, .. } if amplitude0 == 2.0));

        let tc = concat!(
            "mode = \"channel-evolve\"\n",
            "[channels]\nenergies = [0.0, 1.5]\n",
            "[model]\nkind = \"two-channel\"\namplitudes = [[1.0, [0.5, -0.5]], [[0.5, 0.5], 2.0]]\n",
        );
        let (s, _) = Scenario::from_toml(tc).unwrap();
        match &s.model {
            ModelConfig::TwoChannel { amplitudes } => {
                assert_eq!(amplitudes[(0, 1)], C64::new(0.5, -0.5));
                assert_eq!(amplitudes[(1, 1)], C64::new(2.0, 0.0));
            }
            other => panic!("wrong model {other:?}"),
        }
        let model = s.model.build(&s);
        assert_eq!(model.amplitude(0, &nalgebra::Vector3::x(), 0, &nalgebra::Vector3::x()).unwrap().re, 1.0);
    }

    #[test]
    fn constant_amplitude_expands_over_channels() {
        let text = concat!(
            "mode = \"channel-evolve\"\n",
            "[channels]\nenergies = [0.0, 0.5, 1.0]\n",
            "[model]\nkind = \"constant\"\namplitude = [0.0, 1.0]\n",
        );
        let (s, _) = Scenario::from_toml(text).unwrap();
        match &s.model {
            ModelConfig::Constant { amplitudes } => {
                assert_eq!(amplitudes.nrows(), 3);
                assert_eq!(amplitudes[(1, 1)], C64::new(0.0, 1.0));
                assert_eq!(amplitudes[(0, 1)], C64::new(0.0, 0.0));
            }
            other => panic!("wrong model {other:?}"),
        }
    }

    #[test]
    fn amplitude_matrix_channel_count_mismatch_is_an_error() {
        let text = concat!(
            "mode = \"channel-rates\"\n",
            "[channels]\nenergies = [0.0, 1.0, 2.0]\n",
            "[model]\nkind = \"constant\"\namplitudes = [[1.0, 0.0], [0.0, 1.0]]\n",
        );
        let err = Scenario::from_toml(text).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation(_)));
    }

    #[test]
    fn qlbe_options_and_pair_parse() {
        let text = concat!(
            "mode = \"qlbe-evolve\"\nseed = 42\n",
            "[brownian]\nmass = 4.0\n",
            "[grid]\npoints = 9\npmax = 3.5\n",
            "[qlbe]\ndiosi_mode = \"diosi\"\ntrace_mode = \"continuous\"\nkinetic = true\n",
            "pair_a = [0, 0, 1]\npair_b = [0, 0, -1]\n",
            "[evolution]\nt_end = 2.0\ndt = 0.01\nmethod = \"euler\"\ninitial = \"cold\"\n",
        );
        let (s, warnings) = Scenario::from_toml(text).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        assert_eq!(s.seed, 42);
        assert_eq!(s.brownian_mass, 4.0);
        assert_eq!(s.variant, LVariant::Diosi);
        assert_eq!(s.trace_mode, TraceMode::Continuous);
        assert!(s.kinetic);
        assert_eq!(s.coherence_pair, Some(([0, 0, 1], [0, 0, -1])));
        assert_eq!(s.method, StepMethod::Euler);
        assert_eq!(s.initial, InitialState::Cold);
        let grid = s.grid().unwrap();
        assert_eq!(grid.points_per_axis(), 9);
        assert_eq!(grid.extent(), 3.5);
    }

    #[test]
    fn auto_grid_extent_uses_thermal_momentum() {
        let text = "mode = \"qlbe-rates\"\n[brownian]\nmass = 9.0\n[gas]\nbeta = 1.0\n";
        let (s, _) = Scenario::from_toml(text).unwrap();
        let grid = s.grid().unwrap();
        assert!((grid.extent() - 15.0).abs() < 1e-12); // 5·√(9/1)
    }

    #[test]
    fn unknown_mode_is_an_error() {
        let err = Scenario::from_toml("mode = \"make-coffee\"\n").unwrap_err();
        match err {
            ScenarioError::Validation(msgs) => assert!(msgs[0].contains("make-coffee")),
            other => panic!("expected validation error, got {other}"),
        }
    }
}
