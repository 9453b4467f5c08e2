//! Scenario files.
//!
//! A scenario is a TOML document. Top-level keys:
//!
//! ```toml
//! name = "fig3c"
//! description = "..."            # optional
//! max_dim = 128                   # optional, bound on every truncation
//! audit_dim = 80                  # optional, truncation used by audit-truncation
//! workers = 1                     # optional, concurrent runs in a batch
//!
//! [model]
//! kind = "squid_ring"             # squid_ring | signal_mode | two_mode
//! dim = 60                        # ring / signal truncation
//! dim_b = 5                       # two_mode: probe truncation
//! inductance = 3e-10              # squid_ring: H, F, A, Phi_x / Phi_0
//! capacitance = 5e-15
//! critical_current = 2e-6
//! external_flux_frac = 0.5
//! chi_a = 1.0                     # signal_mode / two_mode
//! chi_b = 1.0
//! kappa_a = 0.0
//! kappa_b = 50.0
//! epsilon = [0.0, 25.0]           # [re, im] or a real number
//!
//! [initial]                       # or [[initial]] for several states
//! kind = "eigenstate"             # fock (n) | coherent (alpha) | eigenstate (k) | cat (alpha, parity)
//! k = [0, 1]                      # eigenstate accepts a list; one run per entry
//!
//! [[channels]]
//! operator = "a2"                 # a | a2 | adag_a
//! rate = 0.2
//!
//! [[sweep]]                       # optional; one run per entry and initial state
//! label = "lossy"
//! channels = [{ operator = "a", rate = 0.2 }]
//!
//! [time]                          # optional; time evolution
//! t_max = 40.0
//! dt_out = 1.0
//! method = "dopri5"               # dopri5 (rtol, atol) | rk4 (dt)
//!
//! [steady]                        # optional; steady-state solve
//! method = "auto"                 # auto | algebraic | evolve | propagator
//! tolerance = 1e-9
//!
//! [analysis]
//! observables = ["energy", "entropy", "parity", "purity", "negativity", "cattiness"]
//! wigner_times = [0.0]
//! wigner_steady = true
//! reference = { kind = "final" }  # initial | final | steady | state | steady_of
//!
//! [grid]
//! half_width = 19.5               # default 2 (sqrt(dim) + 2)
//! points = 256
//!
//! [spectrum]                      # optional, squid_ring only
//! levels = 20
//! potential_points = 401
//! flux_range = [-1.0, 1.0]        # in units of Phi_0, relative to Phi_x
//!
//! [validation]                    # optional, two_mode only
//! horizon = 3.0                   # in units of 1 / Gamma_2
//! samples = 31
//! initial = { kind = "coherent", alpha = 1.2 }
//!
//! [output]
//! dir = "out/fig3c"
//! ```
//!
//! Unknown keys are errors. Parsing reports every problem it finds.

use num_complex::Complex64;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::lindblad::{Method, SteadyMethod};
use crate::models::{CircuitParams, CouplerParams};

pub const DEFAULT_MAX_DIM: usize = 128;
pub const DEFAULT_AUDIT_DIM: usize = 80;

#[derive(Clone, Debug, PartialEq)]
pub enum ModelConfig {
    SquidRing { circuit: CircuitParams, dim: usize },
    SignalMode { coupler: CouplerParams, dim: usize },
    TwoMode { coupler: CouplerParams, dim: usize, dim_b: usize },
}

impl ModelConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelConfig::SquidRing { .. } => "squid_ring",
            ModelConfig::SignalMode { .. } => "signal_mode",
            ModelConfig::TwoMode { .. } => "two_mode",
        }
    }

    /// Truncation of the mode the states and channels refer to.
    pub fn dim(&self) -> usize {
        match *self {
            ModelConfig::SquidRing { dim, .. } | ModelConfig::SignalMode { dim, .. } | ModelConfig::TwoMode { dim, .. } => dim,
        }
    }

    pub fn with_dim(&self, dim: usize) -> Self {
        let mut m = self.clone();
        match &mut m {
            ModelConfig::SquidRing { dim: d, .. } | ModelConfig::SignalMode { dim: d, .. } | ModelConfig::TwoMode { dim: d, .. } => {
                *d = dim
            }
        }
        m
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSpec {
    Fock(usize),
    Coherent(Complex64),
    /// k-th eigenvector of the model Hamiltonian, ascending energy.
    Eigenstate(usize),
    Cat { alpha: Complex64, even: bool },
}

impl StateSpec {
    /// Short name used for batch directories.
    pub fn label(&self) -> String {
        match self {
            StateSpec::Fock(n) => format!("fock{n:02}"),
            StateSpec::Coherent(_) => "coherent".into(),
            StateSpec::Eigenstate(k) => format!("eig{k:02}"),
            StateSpec::Cat { even, .. } => if *even { "cat_even" } else { "cat_odd" }.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelOp {
    A,
    A2,
    AdagA,
}

impl ChannelOp {
    pub fn name(self) -> &'static str {
        match self {
            ChannelOp::A => "a",
            ChannelOp::A2 => "a2",
            ChannelOp::AdagA => "adag_a",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "a" => Some(ChannelOp::A),
            "a2" => Some(ChannelOp::A2),
            "adag_a" => Some(ChannelOp::AdagA),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub operator: ChannelOp,
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub channels: Vec<ChannelSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeConfig {
    pub t_max: f64,
    pub dt_out: f64,
    pub method: Method,
}

impl TimeConfig {
    /// Output times 0, dt_out, 2 dt_out, ..., ending exactly at t_max.
    pub fn grid(&self) -> Vec<f64> {
        let n = (self.t_max / self.dt_out - 1e-9).ceil().max(0.0) as usize;
        let mut g: Vec<f64> = (0..n).map(|i| i as f64 * self.dt_out).collect();
        g.push(self.t_max);
        g
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyConfig {
    pub method: SteadyMethod,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Quantity {
    Energy,
    Entropy,
    Parity,
    Purity,
    Negativity,
    Cattiness,
}

impl Quantity {
    pub const ALL: [Quantity; 6] =
        [Quantity::Energy, Quantity::Entropy, Quantity::Parity, Quantity::Purity, Quantity::Negativity, Quantity::Cattiness];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Energy => "energy",
            Quantity::Entropy => "entropy",
            Quantity::Parity => "parity",
            Quantity::Purity => "purity",
            Quantity::Negativity => "negativity",
            Quantity::Cattiness => "cattiness",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|q| q.name() == s)
    }
}

/// Reference state for cattiness.
#[derive(Clone, Debug, PartialEq)]
pub enum ReferenceSpec {
    /// The run's own initial state.
    Initial,
    /// The run's last output state.
    Final,
    /// The run's steady state.
    Steady,
    State(StateSpec),
    /// Steady state of the same model reached from `initial` under `channels`.
    SteadyOf { initial: StateSpec, channels: Vec<ChannelSpec> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    pub observables: Vec<Quantity>,
    pub wigner_times: Vec<f64>,
    pub wigner_steady: bool,
    pub reference: Option<ReferenceSpec>,
}

impl AnalysisConfig {
    pub fn wants(&self, q: Quantity) -> bool {
        self.observables.contains(&q)
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            observables: vec![Quantity::Energy, Quantity::Entropy, Quantity::Parity, Quantity::Purity],
            wigner_times: Vec::new(),
            wigner_steady: false,
            reference: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridConfig {
    pub half_width: Option<f64>,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: None, points: crate::phase_space::DEFAULT_POINTS }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumConfig {
    pub levels: usize,
    pub potential_points: usize,
    /// Flux window relative to Phi_x, in units of Phi_0.
    pub flux_range: (f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationConfig {
    /// Horizon in units of 1 / Gamma_2.
    pub horizon: f64,
    pub samples: usize,
    pub initial: StateSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: Option<String>,
    pub max_dim: usize,
    pub audit_dim: usize,
    pub workers: usize,
    pub model: ModelConfig,
    pub initial: Vec<StateSpec>,
    pub channels: Vec<ChannelSpec>,
    pub sweep: Vec<SweepPoint>,
    pub time: Option<TimeConfig>,
    pub steady: Option<SteadyConfig>,
    pub analysis: AnalysisConfig,
    pub grid: GridConfig,
    pub spectrum: Option<SpectrumConfig>,
    pub validation: Option<ValidationConfig>,
    pub output_dir: Option<String>,
}

/// Collects validation messages while walking a table.
struct Ctx {
    errors: Vec<String>,
}

impl Ctx {
    fn err(&mut self, msg: String) {
        self.errors.push(msg);
    }

    fn unknown(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(format!("{}: unknown key", join(path, k)));
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            None => None,
            Some(Value::Table(s)) => Some(s),
            Some(_) => {
                self.err(format!("{}: expected a table", join(path, key)));
                None
            }
        }
    }

    fn float(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match t.get(key) {
            None => None,
            Some(v) => {
                let f = as_float(v);
                if f.is_none() {
                    self.err(format!("{}: expected a number", join(path, key)));
                }
                f
            }
        }
    }

    fn req_float(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        if !t.contains_key(key) {
            self.err(format!("{}: missing", join(path, key)));
        }
        self.float(t, path, key)
    }

    fn uint(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        match t.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as usize),
            Some(_) => {
                self.err(format!("{}: expected a nonnegative integer", join(path, key)));
                None
            }
        }
    }

    fn req_uint(&mut self, t: &Table, path: &str, key: &str) -> Option<usize> {
        if !t.contains_key(key) {
            self.err(format!("{}: missing", join(path, key)));
        }
        self.uint(t, path, key)
    }

    fn string<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a str> {
        match t.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.err(format!("{}: expected a string", join(path, key)));
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, path: &str, key: &str) -> Option<bool> {
        match t.get(key) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.err(format!("{}: expected true or false", join(path, key)));
                None
            }
        }
    }

    fn complex(&mut self, t: &Table, path: &str, key: &str) -> Option<Complex64> {
        let v = t.get(key)?;
        if let Some(re) = as_float(v) {
            return Some(Complex64::new(re, 0.0));
        }
        if let Value::Array(a) = v {
            if let [re, im] = a.as_slice() {
                if let (Some(re), Some(im)) = (as_float(re), as_float(im)) {
                    return Some(Complex64::new(re, im));
                }
            }
        }
        self.err(format!("{}: expected a number or [re, im]", join(path, key)));
        None
    }

    fn positive(&mut self, path: &str, key: &str, v: Option<f64>) -> Option<f64> {
        match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                self.err(format!("{}: must be positive, got {x}", join(path, key)));
                None
            }
            other => other,
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_float(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

const TOP_KEYS: &[&str] = &[
    "name",
    "description",
    "max_dim",
    "audit_dim",
    "workers",
    "model",
    "initial",
    "channels",
    "sweep",
    "time",
    "steady",
    "analysis",
    "grid",
    "spectrum",
    "validation",
    "output",
];

/// Parses and validates a scenario. `Error::Config` carries every message found.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.message().to_string()]))?;
    let mut cx = Ctx { errors: Vec::new() };
    cx.unknown(&root, "", TOP_KEYS);

    let name = cx.string(&root, "", "name").unwrap_or("scenario").to_string();
    let description = cx.string(&root, "", "description").map(str::to_string);
    let max_dim = cx.uint(&root, "", "max_dim").unwrap_or(DEFAULT_MAX_DIM);
    let audit_dim = cx.uint(&root, "", "audit_dim").unwrap_or(DEFAULT_AUDIT_DIM);
    let workers = cx.uint(&root, "", "workers").unwrap_or(1);
    if workers == 0 {
        cx.err("workers: must be at least 1".into());
    }

    let model = match cx.table(&root, "", "model") {
        Some(t) => parse_model(&mut cx, t, max_dim),
        None => {
            cx.err("model: missing".into());
            None
        }
    };
    let dim = model.as_ref().map(ModelConfig::dim);

    let initial = match root.get("initial") {
        None => Vec::new(),
        Some(Value::Table(t)) => parse_initial(&mut cx, t, "initial", dim),
        Some(Value::Array(a)) => {
            let mut out = Vec::new();
            for (i, v) in a.iter().enumerate() {
                let path = format!("initial[{i}]");
                match v {
                    Value::Table(t) => out.extend(parse_initial(&mut cx, t, &path, dim)),
                    _ => cx.err(format!("{path}: expected a table")),
                }
            }
            out
        }
        Some(_) => {
            cx.err("initial: expected a table or an array of tables".into());
            Vec::new()
        }
    };

    let channels = parse_channel_list(&mut cx, root.get("channels"), "channels");

    let mut sweep = Vec::new();
    match root.get("sweep") {
        None => {}
        Some(Value::Array(a)) => {
            for (i, v) in a.iter().enumerate() {
                let path = format!("sweep[{i}]");
                let Value::Table(t) = v else {
                    cx.err(format!("{path}: expected a table"));
                    continue;
                };
                cx.unknown(t, &path, &["label", "channels"]);
                let label = cx.string(t, &path, "label").map(str::to_string).unwrap_or_else(|| format!("sweep{i:02}"));
                if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                    cx.err(format!("{path}.label: use letters, digits, '_' or '-'"));
                }
                let channels = parse_channel_list(&mut cx, t.get("channels"), &format!("{path}.channels"));
                sweep.push(SweepPoint { label, channels });
            }
        }
        Some(_) => cx.err("sweep: expected an array of tables".into()),
    }

    let time = cx.table(&root, "", "time").and_then(|t| parse_time(&mut cx, t));
    let steady = cx.table(&root, "", "steady").and_then(|t| parse_steady(&mut cx, t));
    let analysis = match cx.table(&root, "", "analysis") {
        Some(t) => parse_analysis(&mut cx, t, dim),
        None => AnalysisConfig::default(),
    };
    let grid = match cx.table(&root, "", "grid") {
        Some(t) => {
            cx.unknown(t, "grid", &["half_width", "points"]);
            let half_width = cx.float(t, "grid", "half_width");
            let half_width = cx.positive("grid", "half_width", half_width);
            let points = cx.uint(t, "grid", "points").unwrap_or(crate::phase_space::DEFAULT_POINTS);
            if points < crate::phase_space::MIN_POINTS {
                cx.err(format!("grid.points: at least {} required", crate::phase_space::MIN_POINTS));
            }
            GridConfig { half_width, points }
        }
        None => GridConfig::default(),
    };
    let spectrum = cx.table(&root, "", "spectrum").and_then(|t| {
        cx.unknown(t, "spectrum", &["levels", "potential_points", "flux_range"]);
        let levels = cx.uint(t, "spectrum", "levels").unwrap_or(20);
        let potential_points = cx.uint(t, "spectrum", "potential_points").unwrap_or(401);
        let flux_range = match t.get("flux_range") {
            None => Some((-1.0, 1.0)),
            Some(Value::Array(a)) if a.len() == 2 => match (as_float(&a[0]), as_float(&a[1])) {
                (Some(lo), Some(hi)) if lo < hi => Some((lo, hi)),
                _ => None,
            },
            Some(_) => None,
        };
        if flux_range.is_none() {
            cx.err("spectrum.flux_range: expected [lo, hi] with lo < hi".into());
        }
        if potential_points < 2 {
            cx.err("spectrum.potential_points: at least 2 required".into());
        }
        if let Some(d) = dim {
            if levels == 0 || levels > d {
                cx.err(format!("spectrum.levels: must be in 1..={d}"));
            }
        }
        Some(SpectrumConfig { levels, potential_points, flux_range: flux_range? })
    });
    let validation = cx.table(&root, "", "validation").and_then(|t| {
        cx.unknown(t, "validation", &["horizon", "samples", "initial"]);
        let horizon = cx.float(t, "validation", "horizon").or(Some(3.0));
        let horizon = cx.positive("validation", "horizon", horizon);
        let samples = cx.uint(t, "validation", "samples").unwrap_or(31);
        if samples < 2 {
            cx.err("validation.samples: at least 2 required".into());
        }
        let initial = match cx.table(t, "validation", "initial") {
            Some(s) => {
                let v = parse_initial(&mut cx, s, "validation.initial", dim);
                if v.len() != 1 {
                    cx.err("validation.initial: exactly one state required".into());
                }
                v.first().copied()
            }
            None => Some(StateSpec::Coherent(Complex64::new(1.2, 0.0))),
        };
        Some(ValidationConfig { horizon: horizon?, samples, initial: initial? })
    });
    let output_dir = cx.table(&root, "", "output").and_then(|t| {
        cx.unknown(t, "output", &["dir"]);
        cx.string(t, "output", "dir").map(str::to_string)
    });

    // Cross-section checks.
    if let Some(m) = &model {
        if spectrum.is_some() && !matches!(m, ModelConfig::SquidRing { .. }) {
            cx.err("spectrum: only available for model.kind = \"squid_ring\"".into());
        }
        if validation.is_some() && !matches!(m, ModelConfig::TwoMode { .. }) {
            cx.err("validation: only available for model.kind = \"two_mode\"".into());
        }
        if audit_dim > max_dim {
            cx.err(format!("audit_dim: {audit_dim} exceeds max_dim {max_dim}"));
        }
    }
    let dynamic = time.is_some() || steady.is_some();
    if dynamic && initial.is_empty() {
        cx.err("initial: required when [time] or [steady] is present".into());
    }
    if !dynamic && spectrum.is_none() && validation.is_none() {
        cx.err("nothing to do: add [time], [steady], [spectrum] or [validation]".into());
    }
    if let Some(t) = &time {
        for &w in &analysis.wigner_times {
            if !(0.0..=t.t_max).contains(&w) {
                cx.err(format!("analysis.wigner_times: {w} outside [0, t_max]"));
            }
        }
    } else if !analysis.wigner_times.iter().all(|&w| w == 0.0) {
        cx.err("analysis.wigner_times: nonzero times need [time]".into());
    }
    if analysis.wigner_steady && steady.is_none() {
        cx.err("analysis.wigner_steady: needs [steady]".into());
    }
    if analysis.wants(Quantity::Cattiness) && analysis.reference.is_none() {
        cx.err("analysis.reference: required for cattiness".into());
    }
    if matches!(analysis.reference, Some(ReferenceSpec::Steady)) && steady.is_none() {
        cx.err("analysis.reference: kind = \"steady\" needs [steady]".into());
    }
    if matches!(analysis.reference, Some(ReferenceSpec::Final)) && time.is_none() {
        cx.err("analysis.reference: kind = \"final\" needs [time]".into());
    }

    if !cx.errors.is_empty() {
        return Err(Error::Config(cx.errors));
    }
    Ok(ScenarioConfig {
        name,
        description,
        max_dim,
        audit_dim,
        workers,
        model: model.expect("checked"),
        initial,
        channels,
        sweep,
        time,
        steady,
        analysis,
        grid,
        spectrum,
        validation,
        output_dir,
    })
}

fn check_dim(cx: &mut Ctx, key: &str, dim: Option<usize>, min: usize, max_dim: usize) -> Option<usize> {
    match dim {
        Some(d) if d < min => {
            cx.err(format!("model.{key}: must be at least {min}"));
            None
        }
        Some(d) if d > max_dim => {
            cx.err(format!("model.{key}: {d} exceeds max_dim {max_dim}"));
            None
        }
        other => other,
    }
}

fn parse_model(cx: &mut Ctx, t: &Table, max_dim: usize) -> Option<ModelConfig> {
    const RING: &[&str] = &["kind", "dim", "inductance", "capacitance", "critical_current", "external_flux_frac"];
    const SIGNAL: &[&str] = &["kind", "dim", "chi_a", "chi_b", "kappa_a", "kappa_b", "epsilon"];
    const TWO_MODE: &[&str] = &["kind", "dim", "dim_b", "chi_a", "chi_b", "kappa_a", "kappa_b", "epsilon"];
    let p = "model";
    let dim = cx.req_uint(t, p, "dim");
    match cx.string(t, p, "kind") {
        Some("squid_ring") => {
            cx.unknown(t, p, RING);
            let dim = check_dim(cx, "dim", dim, 2, max_dim);
            let d = CircuitParams::standard();
            let inductance = cx.float(t, p, "inductance").unwrap_or(d.inductance);
            let capacitance = cx.float(t, p, "capacitance").unwrap_or(d.capacitance);
            let critical_current = cx.float(t, p, "critical_current").unwrap_or(d.critical_current);
            let fx = cx.float(t, p, "external_flux_frac").unwrap_or(d.external_flux_frac);
            let circuit = match CircuitParams::new(inductance, capacitance, critical_current, fx) {
                Ok(c) => Some(c),
                Err(e) => {
                    cx.err(format!("model: {e}"));
                    None
                }
            };
            Some(ModelConfig::SquidRing { circuit: circuit?, dim: dim? })
        }
        Some(kind @ ("signal_mode" | "two_mode")) => {
            let two = kind == "two_mode";
            cx.unknown(t, p, if two { TWO_MODE } else { SIGNAL });
            let dim = check_dim(cx, "dim", dim, 3, max_dim);
            let chi_a = cx.req_float(t, p, "chi_a");
            let chi_b = cx.req_float(t, p, "chi_b");
            let kappa_a = cx.float(t, p, "kappa_a").or(Some(0.0));
            let kappa_b = cx.req_float(t, p, "kappa_b");
            let epsilon = if t.contains_key("epsilon") {
                cx.complex(t, p, "epsilon")
            } else {
                cx.err("model.epsilon: missing".into());
                None
            };
            let coupler = match (chi_a, chi_b, kappa_a, kappa_b, epsilon) {
                (Some(ca), Some(cb), Some(ka), Some(kb), Some(e)) => match CouplerParams::new(ca, cb, ka, kb, e) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        cx.err(format!("model: {e}"));
                        None
                    }
                },
                _ => None,
            };
            if two {
                let dim_b = cx.req_uint(t, p, "dim_b");
                let dim_b = check_dim(cx, "dim_b", dim_b, 2, max_dim);
                if let (Some(a), Some(b)) = (dim, dim_b) {
                    if a * b > max_dim * max_dim {
                        cx.err(format!("model: dim * dim_b = {} exceeds max_dim^2", a * b));
                    }
                }
                Some(ModelConfig::TwoMode { coupler: coupler?, dim: dim?, dim_b: dim_b? })
            } else {
                Some(ModelConfig::SignalMode { coupler: coupler?, dim: dim? })
            }
        }
        Some(other) => {
            cx.err(format!("model.kind: unknown model \"{other}\" (squid_ring, signal_mode, two_mode)"));
            None
        }
        None => {
            cx.err("model.kind: missing".into());
            None
        }
    }
}

fn parse_initial(cx: &mut Ctx, t: &Table, path: &str, dim: Option<usize>) -> Vec<StateSpec> {
    let in_range = |cx: &mut Ctx, key: &str, n: usize| {
        if let Some(d) = dim {
            if n >= d {
                cx.err(format!("{path}.{key}: {n} outside the truncation (dim {d})"));
                return false;
            }
        }
        true
    };
    match cx.string(t, path, "kind") {
        Some("fock") => {
            cx.unknown(t, path, &["kind", "n"]);
            match cx.req_uint(t, path, "n") {
                Some(n) if in_range(cx, "n", n) => vec![StateSpec::Fock(n)],
                _ => vec![],
            }
        }
        Some("coherent") => {
            cx.unknown(t, path, &["kind", "alpha"]);
            match cx.complex(t, path, "alpha") {
                Some(a) => vec![StateSpec::Coherent(a)],
                None if !t.contains_key("alpha") => vec![StateSpec::Coherent(Complex64::new(0.0, 0.0))],
                None => vec![],
            }
        }
        Some("cat") => {
            cx.unknown(t, path, &["kind", "alpha", "parity"]);
            if !t.contains_key("alpha") {
                cx.err(format!("{path}.alpha: missing"));
            }
            let alpha = cx.complex(t, path, "alpha");
            let even = match cx.string(t, path, "parity") {
                Some("even") | None => Some(true),
                Some("odd") => Some(false),
                Some(other) => {
                    cx.err(format!("{path}.parity: expected \"even\" or \"odd\", got \"{other}\""));
                    None
                }
            };
            match (alpha, even) {
                (Some(alpha), Some(even)) => vec![StateSpec::Cat { alpha, even }],
                _ => vec![],
            }
        }
        Some("eigenstate") => {
            cx.unknown(t, path, &["kind", "k"]);
            let ks: Vec<usize> = match t.get("k") {
                None => vec![0],
                Some(Value::Integer(i)) if *i >= 0 => vec![*i as usize],
                Some(Value::Array(a)) if !a.is_empty() => {
                    let ks: Vec<Option<usize>> =
                        a.iter().map(|v| if let Value::Integer(i) = v { usize::try_from(*i).ok() } else { None }).collect();
                    if ks.iter().any(Option::is_none) {
                        cx.err(format!("{path}.k: expected nonnegative integers"));
                        vec![]
                    } else {
                        ks.into_iter().flatten().collect()
                    }
                }
                Some(_) => {
                    cx.err(format!("{path}.k: expected a nonnegative integer or a nonempty list"));
                    vec![]
                }
            };
            ks.into_iter().filter(|&k| in_range(cx, "k", k)).map(StateSpec::Eigenstate).collect()
        }
        Some(other) => {
            cx.err(format!("{path}.kind: unknown state \"{other}\" (fock, coherent, eigenstate, cat)"));
            vec![]
        }
        None => {
            cx.err(format!("{path}.kind: missing"));
            vec![]
        }
    }
}

fn parse_channel_list(cx: &mut Ctx, v: Option<&Value>, path: &str) -> Vec<ChannelSpec> {
    let Some(v) = v else { return Vec::new() };
    let Value::Array(a) = v else {
        cx.err(format!("{path}: expected an array of tables"));
        return Vec::new();
    };
    let mut out = Vec::new();
    for (i, item) in a.iter().enumerate() {
        let p = format!("{path}[{i}]");
        let Value::Table(t) = item else {
            cx.err(format!("{p}: expected a table"));
            continue;
        };
        cx.unknown(t, &p, &["operator", "rate"]);
        let op = match cx.string(t, &p, "operator") {
            Some(s) => {
                let op = ChannelOp::parse(s);
                if op.is_none() {
                    cx.err(format!("{p}.operator: unknown operator \"{s}\" (a, a2, adag_a)"));
                }
                op
            }
            None => {
                cx.err(format!("{p}.operator: missing"));
                None
            }
        };
        let rate = cx.req_float(t, &p, "rate");
        if let Some(r) = rate {
            if !(r >= 0.0 && r.is_finite()) {
                cx.err(format!("{p}.rate: must be nonnegative, got {r}"));
                continue;
            }
        }
        if let (Some(operator), Some(rate)) = (op, rate) {
            out.push(ChannelSpec { operator, rate });
        }
    }
    out
}

fn parse_time(cx: &mut Ctx, t: &Table) -> Option<TimeConfig> {
    let p = "time";
    let t_max = cx.req_float(t, p, "t_max");
    let t_max = cx.positive(p, "t_max", t_max);
    let dt_out = cx.req_float(t, p, "dt_out");
    let dt_out = cx.positive(p, "dt_out", dt_out);
    let method = match cx.string(t, p, "method").unwrap_or("dopri5") {
        "dopri5" => {
            cx.unknown(t, p, &["t_max", "dt_out", "method", "rtol", "atol"]);
            let Method::Dopri5 { rtol: r0, atol: a0 } = Method::default() else { unreachable!() };
            let rtol = cx.float(t, p, "rtol").or(Some(r0));
            let rtol = cx.positive(p, "rtol", rtol);
            let atol = cx.float(t, p, "atol").or(Some(a0));
            let atol = cx.positive(p, "atol", atol);
            Some(Method::Dopri5 { rtol: rtol?, atol: atol? })
        }
        "rk4" => {
            cx.unknown(t, p, &["t_max", "dt_out", "method", "dt"]);
            let dt = cx.req_float(t, p, "dt");
            let dt = cx.positive(p, "dt", dt);
            Some(Method::Rk4 { dt: dt? })
        }
        other => {
            cx.err(format!("time.method: unknown method \"{other}\" (dopri5, rk4)"));
            None
        }
    };
    Some(TimeConfig { t_max: t_max?, dt_out: dt_out?, method: method? })
}

fn parse_steady(cx: &mut Ctx, t: &Table) -> Option<SteadyConfig> {
    cx.unknown(t, "steady", &["method", "tolerance"]);
    let method = match cx.string(t, "steady", "method").unwrap_or("auto") {
        "auto" => Some(SteadyMethod::Auto),
        "algebraic" => Some(SteadyMethod::Algebraic),
        "evolve" => Some(SteadyMethod::Evolve),
        "propagator" => Some(SteadyMethod::Propagator),
        other => {
            cx.err(format!("steady.method: unknown method \"{other}\" (auto, algebraic, evolve, propagator)"));
            None
        }
    };
    let tolerance = cx.float(t, "steady", "tolerance").or(Some(1e-9));
    let tolerance = cx.positive("steady", "tolerance", tolerance);
    Some(SteadyConfig { method: method?, tolerance: tolerance? })
}

fn parse_analysis(cx: &mut Ctx, t: &Table, dim: Option<usize>) -> AnalysisConfig {
    let p = "analysis";
    cx.unknown(t, p, &["observables", "wigner_times", "wigner_steady", "reference"]);
    let mut out = AnalysisConfig::default();
    match t.get("observables") {
        None => {}
        Some(Value::Array(a)) => {
            out.observables.clear();
            for v in a {
                match v.as_str().and_then(Quantity::parse) {
                    Some(q) if !out.observables.contains(&q) => out.observables.push(q),
                    Some(_) => {}
                    None => cx.err(format!(
                        "analysis.observables: unknown entry {v} (energy, entropy, parity, purity, negativity, cattiness)"
                    )),
                }
            }
            out.observables.sort();
        }
        Some(_) => cx.err("analysis.observables: expected a list of names".into()),
    }
    match t.get("wigner_times") {
        None => {}
        Some(Value::Array(a)) => {
            for v in a {
                match as_float(v) {
                    Some(x) => out.wigner_times.push(x),
                    None => cx.err("analysis.wigner_times: expected numbers".into()),
                }
            }
        }
        Some(_) => cx.err("analysis.wigner_times: expected a list of numbers".into()),
    }
    out.wigner_steady = cx.boolean(t, p, "wigner_steady").unwrap_or(false);
    if let Some(r) = cx.table(t, p, "reference") {
        out.reference = parse_reference(cx, r, dim);
    }
    out
}

fn parse_reference(cx: &mut Ctx, t: &Table, dim: Option<usize>) -> Option<ReferenceSpec> {
    let p = "analysis.reference";
    match cx.string(t, p, "kind") {
        Some(k @ ("initial" | "final" | "steady")) => {
            cx.unknown(t, p, &["kind"]);
            Some(match k {
                "initial" => ReferenceSpec::Initial,
                "final" => ReferenceSpec::Final,
                _ => ReferenceSpec::Steady,
            })
        }
        Some("state") => {
            cx.unknown(t, p, &["kind", "state"]);
            let s = cx.table(t, p, "state");
            if s.is_none() {
                cx.err(format!("{p}.state: missing"));
            }
            let v = parse_initial(cx, s?, &format!("{p}.state"), dim);
            if v.len() != 1 {
                cx.err(format!("{p}.state: exactly one state required"));
                return None;
            }
            Some(ReferenceSpec::State(v[0]))
        }
        Some("steady_of") => {
            cx.unknown(t, p, &["kind", "initial", "channels"]);
            let s = cx.table(t, p, "initial");
            if s.is_none() {
                cx.err(format!("{p}.initial: missing"));
            }
            let v = parse_initial(cx, s?, &format!("{p}.initial"), dim);
            let channels = parse_channel_list(cx, t.get("channels"), &format!("{p}.channels"));
            if v.len() != 1 {
                cx.err(format!("{p}.initial: exactly one state required"));
                return None;
            }
            if channels.is_empty() {
                cx.err(format!("{p}.channels: at least one channel required"));
            }
            Some(ReferenceSpec::SteadyOf { initial: v[0], channels })
        }
        Some(other) => {
            cx.err(format!("{p}.kind: unknown reference \"{other}\" (initial, final, steady, state, steady_of)"));
            None
        }
        None => {
            cx.err(format!("{p}.kind: missing"));
            None
        }
    }
}

// ---------------------------------------------------------------------------------------------
// Serialization

fn complex_value(z: Complex64) -> Value {
    if z.im == 0.0 {
        Value::Float(z.re)
    } else {
        Value::Array(vec![Value::Float(z.re), Value::Float(z.im)])
    }
}

fn uint_value(n: usize) -> Value {
    Value::Integer(n as i64)
}

fn state_table(s: &StateSpec) -> Table {
    let mut t = Table::new();
    match *s {
        StateSpec::Fock(n) => {
            t.insert("kind".into(), "fock".into());
            t.insert("n".into(), uint_value(n));
        }
        StateSpec::Coherent(a) => {
            t.insert("kind".into(), "coherent".into());
            t.insert("alpha".into(), complex_value(a));
        }
        StateSpec::Eigenstate(k) => {
            t.insert("kind".into(), "eigenstate".into());
            t.insert("k".into(), uint_value(k));
        }
        StateSpec::Cat { alpha, even } => {
            t.insert("kind".into(), "cat".into());
            t.insert("alpha".into(), complex_value(alpha));
            t.insert("parity".into(), if even { "even" } else { "odd" }.into());
        }
    }
    t
}

fn channels_value(chs: &[ChannelSpec]) -> Value {
    Value::Array(
        chs.iter()
            .map(|c| {
                let mut t = Table::new();
                t.insert("operator".into(), c.operator.name().into());
                t.insert("rate".into(), Value::Float(c.rate));
                Value::Table(t)
            })
            .collect(),
    )
}

impl ScenarioConfig {
    pub fn to_table(&self) -> Table {
        let mut root = Table::new();
        root.insert("name".into(), self.name.clone().into());
        if let Some(d) = &self.description {
            root.insert("description".into(), d.clone().into());
        }
        root.insert("max_dim".into(), uint_value(self.max_dim));
        root.insert("audit_dim".into(), uint_value(self.audit_dim));
        root.insert("workers".into(), uint_value(self.workers));

        let mut m = Table::new();
        m.insert("kind".into(), self.model.kind().into());
        m.insert("dim".into(), uint_value(self.model.dim()));
        match &self.model {
            ModelConfig::SquidRing { circuit, .. } => {
                m.insert("inductance".into(), Value::Float(circuit.inductance));
                m.insert("capacitance".into(), Value::Float(circuit.capacitance));
                m.insert("critical_current".into(), Value::Float(circuit.critical_current));
                m.insert("external_flux_frac".into(), Value::Float(circuit.external_flux_frac));
            }
            ModelConfig::SignalMode { coupler, .. } | ModelConfig::TwoMode { coupler, .. } => {
                m.insert("chi_a".into(), Value::Float(coupler.chi_a));
                m.insert("chi_b".into(), Value::Float(coupler.chi_b));
                m.insert("kappa_a".into(), Value::Float(coupler.kappa_a));
                m.insert("kappa_b".into(), Value::Float(coupler.kappa_b));
                m.insert(
                    "epsilon".into(),
                    Value::Array(vec![Value::Float(coupler.epsilon.re), Value::Float(coupler.epsilon.im)]),
                );
                if let ModelConfig::TwoMode { dim_b, .. } = &self.model {
                    m.insert("dim_b".into(), uint_value(*dim_b));
                }
            }
        }
        root.insert("model".into(), Value::Table(m));

        if !self.initial.is_empty() {
            let ks: Option<Vec<Value>> =
                self.initial.iter().map(|s| if let StateSpec::Eigenstate(k) = s { Some(uint_value(*k)) } else { None }).collect();
            let v = match ks {
                Some(ks) if ks.len() > 1 => {
                    let mut t = Table::new();
                    t.insert("kind".into(), "eigenstate".into());
                    t.insert("k".into(), Value::Array(ks));
                    Value::Table(t)
                }
                _ if self.initial.len() == 1 => Value::Table(state_table(&self.initial[0])),
                _ => Value::Array(self.initial.iter().map(|s| Value::Table(state_table(s))).collect()),
            };
            root.insert("initial".into(), v);
        }
        if !self.channels.is_empty() {
            root.insert("channels".into(), channels_value(&self.channels));
        }
        if !self.sweep.is_empty() {
            let pts = self
                .sweep
                .iter()
                .map(|s| {
                    let mut t = Table::new();
                    t.insert("label".into(), s.label.clone().into());
                    t.insert("channels".into(), channels_value(&s.channels));
                    Value::Table(t)
                })
                .collect();
            root.insert("sweep".into(), Value::Array(pts));
        }
        if let Some(tc) = &self.time {
            let mut t = Table::new();
            t.insert("t_max".into(), Value::Float(tc.t_max));
            t.insert("dt_out".into(), Value::Float(tc.dt_out));
            match tc.method {
                Method::Dopri5 { rtol, atol } => {
                    t.insert("method".into(), "dopri5".into());
                    t.insert("rtol".into(), Value::Float(rtol));
                    t.insert("atol".into(), Value::Float(atol));
                }
                Method::Rk4 { dt } => {
                    t.insert("method".into(), "rk4".into());
                    t.insert("dt".into(), Value::Float(dt));
                }
            }
            root.insert("time".into(), Value::Table(t));
        }
        if let Some(s) = &self.steady {
            let mut t = Table::new();
            let m = match s.method {
                SteadyMethod::Auto => "auto",
                SteadyMethod::Algebraic => "algebraic",
                SteadyMethod::Evolve => "evolve",
                SteadyMethod::Propagator => "propagator",
            };
            t.insert("method".into(), m.into());
            t.insert("tolerance".into(), Value::Float(s.tolerance));
            root.insert("steady".into(), Value::Table(t));
        }

        let mut a = Table::new();
        a.insert(
            "observables".into(),
            Value::Array(self.analysis.observables.iter().map(|q| Value::from(q.name())).collect()),
        );
        a.insert("wigner_times".into(), Value::Array(self.analysis.wigner_times.iter().map(|&x| Value::Float(x)).collect()));
        a.insert("wigner_steady".into(), Value::Boolean(self.analysis.wigner_steady));
        if let Some(r) = &self.analysis.reference {
            let mut t = Table::new();
            match r {
                ReferenceSpec::Initial => {
                    t.insert("kind".into(), "initial".into());
                }
                ReferenceSpec::Final => {
                    t.insert("kind".into(), "final".into());
                }
                ReferenceSpec::Steady => {
                    t.insert("kind".into(), "steady".into());
                }
                ReferenceSpec::State(s) => {
                    t.insert("kind".into(), "state".into());
                    t.insert("state".into(), Value::Table(state_table(s)));
                }
                ReferenceSpec::SteadyOf { initial, channels } => {
                    t.insert("kind".into(), "steady_of".into());
                    t.insert("initial".into(), Value::Table(state_table(initial)));
                    t.insert("channels".into(), channels_value(channels));
                }
            }
            a.insert("reference".into(), Value::Table(t));
        }
        root.insert("analysis".into(), Value::Table(a));

        let mut g = Table::new();
        if let Some(h) = self.grid.half_width {
            g.insert("half_width".into(), Value::Float(h));
        }
        g.insert("points".into(), uint_value(self.grid.points));
        root.insert("grid".into(), Value::Table(g));

        if let Some(s) = &self.spectrum {
            let mut t = Table::new();
            t.insert("levels".into(), uint_value(s.levels));
            t.insert("potential_points".into(), uint_value(s.potential_points));
            t.insert("flux_range".into(), Value::Array(vec![Value::Float(s.flux_range.0), Value::Float(s.flux_range.1)]));
            root.insert("spectrum".into(), Value::Table(t));
        }
        if let Some(v) = &self.validation {
            let mut t = Table::new();
            t.insert("horizon".into(), Value::Float(v.horizon));
            t.insert("samples".into(), uint_value(v.samples));
            t.insert("initial".into(), Value::Table(state_table(&v.initial)));
            root.insert("validation".into(), Value::Table(t));
        }
        if let Some(d) = &self.output_dir {
            let mut t = Table::new();
            t.insert("dir".into(), d.clone().into());
            root.insert("output".into(), Value::Table(t));
        }
        root
    }

    /// TOML text that parses back to an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_table()).expect("config tables always serialize")
    }

    /// Channel sets to run: one per sweep point, or the top-level list.
    pub fn channel_sets(&self) -> Vec<(Option<String>, Vec<ChannelSpec>)> {
        if self.sweep.is_empty() {
            vec![(None, self.channels.clone())]
        } else {
            self.sweep.iter().map(|s| (Some(s.label.clone()), s.channels.clone())).collect()
        }
    }
}
