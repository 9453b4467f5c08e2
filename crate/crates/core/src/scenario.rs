//! The pipeline behind the CLI: build the model, evolve and/or solve for the steady state,
//! analyse, and write CSV files plus a manifest per run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{
    ChannelOp, ChannelSpec, ModelConfig, Quantity, ReferenceSpec, ScenarioConfig, SpectrumConfig, StateSpec,
};
use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, cat_state, coherent_state, fock_state, number_op, DensityMatrix, FockOperator, StateVector};
use crate::lindblad::{
    evolve_generator, partial_trace_signal, steady_state, Diagnostics, EvolveOptions, Generator, LindbladChannel, Method, SteadyOptions,
    SteadyState, Trajectory,
};
use crate::linalg;
use crate::models::{
    displaced_two_mode_hamiltonian, effective_rates, potential_curve, signal_mode_hamiltonian, squid_hamiltonian, CouplerParams,
    PHI0,
};
use crate::observables;
use crate::phase_space::{self, GridSpec, PhaseSpaceAxes, WignerGrid};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scale separation below which `validate_coupler` refuses to run.
pub const MIN_SEPARATION: f64 = 20.0;
/// Scale separation below which it warns.
pub const WARN_SEPARATION: f64 = 50.0;

/// Fixed float format for every CSV: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A model ready to simulate. For `two_mode` the state space is signal (x) probe; states and
/// channels named in the config act on the signal factor.
#[derive(Clone, Debug)]
pub struct System {
    pub model: ModelConfig,
    pub h: FockOperator,
    /// Hamiltonian whose eigenvectors define `StateSpec::Eigenstate` (the signal Hamiltonian).
    pub signal_h: FockOperator,
    pub dim: usize,
    pub dim_b: usize,
    /// Channels implied by the model (cavity damping of the coupler modes).
    pub model_channels: Vec<LindbladChannel>,
    pub axes: Option<PhaseSpaceAxes>,
}

pub fn build_system(model: &ModelConfig) -> Result<System> {
    match model {
        ModelConfig::SquidRing { circuit, dim } => {
            let h = squid_hamiltonian(circuit, *dim)?;
            Ok(System {
                model: model.clone(),
                signal_h: h.clone(),
                h,
                dim: *dim,
                dim_b: 1,
                model_channels: vec![],
                axes: Some(PhaseSpaceAxes::for_circuit(circuit)),
            })
        }
        ModelConfig::SignalMode { coupler, dim } => {
            let h = signal_mode_hamiltonian(coupler, *dim)?;
            let mut model_channels = Vec::new();
            if coupler.kappa_a > 0.0 {
                model_channels.push(LindbladChannel::new(annihilation_op(*dim)?, coupler.kappa_a)?);
            }
            Ok(System { model: model.clone(), signal_h: h.clone(), h, dim: *dim, dim_b: 1, model_channels, axes: None })
        }
        ModelConfig::TwoMode { coupler, dim, dim_b } => {
            let h = displaced_two_mode_hamiltonian(coupler, *dim, *dim_b)?;
            let a = annihilation_op(*dim)?.kron(&FockOperator::identity(*dim_b));
            let b = FockOperator::identity(*dim).kron(&annihilation_op(*dim_b)?);
            let mut model_channels = vec![LindbladChannel::new(b, coupler.kappa_b)?];
            if coupler.kappa_a > 0.0 {
                model_channels.push(LindbladChannel::new(a, coupler.kappa_a)?);
            }
            Ok(System {
                model: model.clone(),
                signal_h: signal_mode_hamiltonian(coupler, *dim)?,
                h,
                dim: *dim,
                dim_b: *dim_b,
                model_channels,
                axes: None,
            })
        }
    }
}

fn channel_operator(op: ChannelOp, dim: usize) -> Result<FockOperator> {
    let a = annihilation_op(dim)?;
    Ok(match op {
        ChannelOp::A => a,
        ChannelOp::A2 => &a * &a,
        ChannelOp::AdagA => number_op(dim)?,
    })
}

impl System {
    fn embed(&self, op: FockOperator) -> FockOperator {
        if self.dim_b == 1 {
            op
        } else {
            op.kron(&FockOperator::identity(self.dim_b))
        }
    }

    /// Model channels plus the configured ones.
    pub fn channels(&self, specs: &[ChannelSpec]) -> Result<Vec<LindbladChannel>> {
        let mut out = self.model_channels.clone();
        for c in specs {
            out.push(LindbladChannel::new(self.embed(channel_operator(c.operator, self.dim)?), c.rate)?);
        }
        Ok(out)
    }

    /// Pure signal state for `spec`.
    pub fn signal_state(&self, spec: &StateSpec, eigen: &mut Option<linalg::CMat>) -> Result<StateVector> {
        match *spec {
            StateSpec::Fock(n) => fock_state(n, self.dim),
            StateSpec::Coherent(alpha) => coherent_state(alpha, self.dim),
            StateSpec::Cat { alpha, even } => cat_state(alpha, even, self.dim),
            StateSpec::Eigenstate(k) => {
                if k >= self.dim {
                    return Err(Error::OutOfRange { index: k, dim: self.dim });
                }
                if eigen.is_none() {
                    *eigen = Some(linalg::hermitian_eigen(self.signal_h.matrix())?.1);
                }
                let v = eigen.as_ref().expect("just computed").column(k).into_owned();
                StateVector::new(fix_phase(v))
            }
        }
    }

    /// Full-space density matrix: the signal state, with the probe in its vacuum for `two_mode`.
    pub fn initial_state(&self, spec: &StateSpec, eigen: &mut Option<linalg::CMat>) -> Result<DensityMatrix> {
        let s = self.signal_state(spec, eigen)?.to_density();
        if self.dim_b == 1 {
            return Ok(s);
        }
        let vac = fock_state(0, self.dim_b)?.to_density();
        DensityMatrix::new(linalg::kron(s.matrix(), vac.matrix()))
    }

    /// Reduced signal state.
    pub fn reduce(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if self.dim_b == 1 {
            Ok(rho.clone())
        } else {
            partial_trace_signal(rho, self.dim, self.dim_b)
        }
    }
}

/// Eigenvectors are fixed up to a phase; make the largest-modulus entry real and positive so
/// outputs do not depend on the eigensolver's choice.
fn fix_phase(mut v: linalg::CVec) -> linalg::CVec {
    let big = v.iter().copied().fold(Complex64::new(0.0, 0.0), |m, z| if z.norm() > m.norm() * (1.0 + 1e-12) { z } else { m });
    if big.norm() > 0.0 {
        let ph = big.conj() / big.norm();
        v.iter_mut().for_each(|z| *z *= ph);
    }
    v
}

pub fn grid_spec(cfg: &ScenarioConfig) -> GridSpec {
    let hw = cfg.grid.half_width.unwrap_or_else(|| phase_space::recommended_half_width(cfg.model.dim()));
    GridSpec::square(hw, cfg.grid.points)
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SteadySummary {
    pub method: String,
    pub residual: f64,
    pub norm_bound: f64,
    pub time_reached: Option<f64>,
    pub null_dimension: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub run: String,
    pub code_version: String,
    pub wall_time_s: f64,
    /// "ok" or "failed".
    pub status: String,
    pub failure: Option<String>,
    /// True when a failed run wrote the part of the trajectory computed before the failure.
    pub partial: bool,
    pub diagnostics: Option<Diagnostics>,
    /// ||L[rho]||_F of the last trajectory state.
    pub final_residual: Option<f64>,
    pub steady: Option<SteadySummary>,
    pub files: Vec<FileEntry>,
    pub config: toml::Table,
}

impl RunManifest {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub runs: Vec<RunManifest>,
    /// Files written outside the per-run directories (spectrum, index).
    pub files: Vec<FileEntry>,
}

impl ScenarioOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &RunManifest> {
        self.runs.iter().filter(|r| !r.ok())
    }
}

fn write_file(dir: &Path, name: &str, contents: &str, files: &mut Vec<FileEntry>) -> Result<()> {
    fs::write(dir.join(name), contents)?;
    let digest = Sha256::digest(contents.as_bytes());
    let mut hex = String::with_capacity(64);
    for b in digest {
        let _ = write!(hex, "{b:02x}");
    }
    files.push(FileEntry { path: name.to_string(), bytes: contents.len() as u64, sha256: hex });
    Ok(())
}

fn write_manifest(dir: &Path, m: &RunManifest) -> Result<()> {
    let text = toml::to_string(m).map_err(|e| Error::Numerical(format!("manifest serialization: {e}")))?;
    fs::write(dir.join("manifest.toml"), text)?;
    Ok(())
}

/// One unit of work: an initial state and a channel set.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub label: String,
    pub initial: StateSpec,
    pub channels: Vec<ChannelSpec>,
}

pub fn run_specs(cfg: &ScenarioConfig) -> Vec<RunSpec> {
    let sets = cfg.channel_sets();
    let mut out = Vec::new();
    for (sweep, chans) in &sets {
        for s in &cfg.initial {
            let label = match (sweep, cfg.initial.len() > 1) {
                (Some(l), true) => format!("{l}_{}", s.label()),
                (Some(l), false) => l.clone(),
                (None, true) => s.label(),
                (None, false) => String::new(),
            };
            out.push(RunSpec { label, initial: *s, channels: chans.clone() });
        }
    }
    out
}

/// Everything one run computes, kept in memory for callers that want more than the files.
#[derive(Clone, Debug, Default)]
pub struct RunResult {
    pub trajectory: Option<Trajectory>,
    /// Quantities on the reduced signal state at each output time.
    pub series: BTreeMap<&'static str, Vec<f64>>,
    pub steady: Option<SteadyState>,
    /// Quantities of the reduced steady state.
    pub steady_values: BTreeMap<&'static str, f64>,
    pub reference_negativity: Option<f64>,
}

/// Shared per-scenario data.
pub struct Context<'a> {
    pub cfg: &'a ScenarioConfig,
    pub system: System,
    pub grid: GridSpec,
    /// Negativity of a reference that does not depend on the run.
    pub fixed_reference: Option<f64>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ScenarioConfig) -> Result<Self> {
        let system = build_system(&cfg.model)?;
        let grid = grid_spec(cfg);
        grid.validate()?;
        let rule = phase_space::recommended_half_width(cfg.model.dim());
        if grid.half_width() < rule {
            log::info!("{}: Wigner half-width {} below the coverage rule {rule:.3}; grids are flagged undersized", cfg.name, grid.half_width());
        }
        let mut ctx = Context { cfg, system, grid, fixed_reference: None };
        let mut eigen = None;
        ctx.fixed_reference = match &cfg.analysis.reference {
            Some(ReferenceSpec::State(s)) => {
                let rho = ctx.system.signal_state(s, &mut eigen)?.to_density();
                Some(phase_space::negativity(&phase_space::wigner(&rho, &ctx.grid)?))
            }
            Some(ReferenceSpec::SteadyOf { initial, channels }) => {
                let rho0 = ctx.system.initial_state(initial, &mut eigen)?;
                let chans = ctx.system.channels(channels)?;
                let tol = cfg.steady.map(|s| s.tolerance).unwrap_or(1e-9);
                let opts = SteadyOptions { initial: Some(rho0), tolerance: tol, ..Default::default() };
                let ss = steady_state(&ctx.system.h, &chans, &opts)?;
                let rho = ctx.system.reduce(&ss.rho)?;
                Some(phase_space::negativity(&phase_space::wigner(&rho, &ctx.grid)?))
            }
            _ => None,
        };
        Ok(ctx)
    }

    fn wigner(&self, rho: &DensityMatrix) -> Result<WignerGrid> {
        let w = phase_space::wigner(rho, &self.grid)?;
        Ok(match self.system.axes {
            Some(a) => w.with_axes(a),
            None => w,
        })
    }

    /// Quantity values of a full-space state.
    fn evaluate(&self, full: &DensityMatrix, reference: Option<f64>) -> Result<BTreeMap<&'static str, f64>> {
        let rho = self.system.reduce(full)?;
        let mut out = BTreeMap::new();
        let mut negativity = None;
        for &q in &self.cfg.analysis.observables {
            let v = match q {
                Quantity::Energy => observables::energy(full, &self.system.h)?,
                Quantity::Entropy => observables::entropy_from_clipped(&rho.eigenvalues()?),
                Quantity::Parity => observables::parity_expect(&rho),
                Quantity::Purity => observables::purity(&rho),
                Quantity::Negativity | Quantity::Cattiness => {
                    let n = match negativity {
                        Some(n) => n,
                        None => {
                            let n = phase_space::negativity(&phase_space::wigner(&rho, &self.grid)?);
                            negativity = Some(n);
                            n
                        }
                    };
                    if q == Quantity::Negativity {
                        n
                    } else {
                        // Partial trajectories of "final"-referenced runs have no reference yet.
                        match reference {
                            Some(r) if r > phase_space::REFERENCE_FLOOR => n / r,
                            Some(_) => return Err(Error::UndefinedReference),
                            None => f64::NAN,
                        }
                    }
                }
            };
            out.insert(q.name(), v);
        }
        Ok(out)
    }

    /// Runs one initial state / channel set and writes its files into `dir`.
    pub fn execute(&self, spec: &RunSpec, dir: &Path) -> Result<(RunManifest, RunResult)> {
        fs::create_dir_all(dir)?;
        let start = Instant::now();
        let mut files = Vec::new();
        let mut manifest = RunManifest {
            scenario: self.cfg.name.clone(),
            run: spec.label.clone(),
            code_version: CODE_VERSION.to_string(),
            wall_time_s: 0.0,
            status: "ok".into(),
            failure: None,
            partial: false,
            diagnostics: None,
            final_residual: None,
            steady: None,
            files: vec![],
            config: self.cfg.to_table(),
        };
        let outcome = self.compute(spec, dir, &mut files, &mut manifest);
        if let Err(e) = &outcome {
            manifest.status = "failed".into();
            manifest.failure = Some(e.to_string());
        }
        manifest.wall_time_s = start.elapsed().as_secs_f64();
        manifest.files = files;
        write_manifest(dir, &manifest)?;
        Ok((manifest, outcome.unwrap_or_default()))
    }

    fn compute(&self, spec: &RunSpec, dir: &Path, files: &mut Vec<FileEntry>, manifest: &mut RunManifest) -> Result<RunResult> {
        let cfg = self.cfg;
        let mut eigen = None;
        let rho0 = self.system.initial_state(&spec.initial, &mut eigen)?;
        let channels = self.system.channels(&spec.channels)?;
        let gen = Generator::new(&self.system.h, &channels)?;
        let mut result = RunResult::default();

        if let Some(sc) = &cfg.steady {
            let opts = SteadyOptions { method: sc.method, initial: Some(rho0.clone()), tolerance: sc.tolerance, ..Default::default() };
            let ss = steady_state(&self.system.h, &channels, &opts)?;
            manifest.steady = Some(SteadySummary {
                method: format!("{:?}", ss.method).to_lowercase(),
                residual: ss.residual,
                norm_bound: ss.norm_bound,
                time_reached: ss.time_reached,
                null_dimension: ss.null_dimension,
            });
            result.steady = Some(ss);
        }

        let mut reference = self.fixed_reference;
        let reduced0 = self.system.reduce(&rho0)?;
        match &cfg.analysis.reference {
            Some(ReferenceSpec::Initial) => {
                reference = Some(phase_space::negativity(&phase_space::wigner(&reduced0, &self.grid)?));
            }
            Some(ReferenceSpec::Steady) => {
                let ss = result.steady.as_ref().expect("steady section required by the parser");
                let r = self.system.reduce(&ss.rho)?;
                reference = Some(phase_space::negativity(&phase_space::wigner(&r, &self.grid)?));
            }
            _ => {}
        }

        if let Some(tc) = &cfg.time {
            let times = tc.grid();
            let opts = EvolveOptions { method: tc.method, keep_states: true, ..Default::default() };
            let traj = match evolve_generator(&gen, &rho0, &times, &opts) {
                Ok(t) => t,
                Err(Error::IntegrationFailure { t_reached, reason, partial }) => {
                    if let Some(p) = &partial {
                        manifest.partial = true;
                        manifest.diagnostics = Some(p.diagnostics.clone());
                        let rows = self.series_rows(p, None)?;
                        write_file(dir, "trajectory.csv", &trajectory_csv(cfg, &p.times, &rows), files)?;
                    }
                    return Err(Error::IntegrationFailure { t_reached, reason, partial });
                }
                Err(e) => return Err(e),
            };
            if matches!(cfg.analysis.reference, Some(ReferenceSpec::Final)) {
                let last = self.system.reduce(traj.final_state().expect("nonempty"))?;
                reference = Some(phase_space::negativity(&phase_space::wigner(&last, &self.grid)?));
            }
            let rows = self.series_rows(&traj, reference)?;
            write_file(dir, "trajectory.csv", &trajectory_csv(cfg, &traj.times, &rows), files)?;
            for (q, _) in rows.first().into_iter().flatten() {
                result.series.insert(q, rows.iter().map(|r| r[q]).collect());
            }
            for &tw in &cfg.analysis.wigner_times {
                let idx = nearest(&traj.times, tw);
                let r = self.system.reduce(&traj.states[idx])?;
                write_file(dir, &format!("wigner_t{:08.3}.csv", traj.times[idx]), &self.wigner(&r)?.to_csv(), files)?;
            }
            manifest.diagnostics = Some(traj.diagnostics.clone());
            manifest.final_residual = Some(linalg::frobenius(&gen.apply(traj.final_state().expect("nonempty").matrix())));
            result.trajectory = Some(traj);
        } else {
            for &tw in &cfg.analysis.wigner_times {
                debug_assert_eq!(tw, 0.0);
                write_file(dir, "wigner_t0000.000.csv", &self.wigner(&reduced0)?.to_csv(), files)?;
            }
        }

        if let Some(ss) = &result.steady {
            let values = self.evaluate(&ss.rho, reference)?;
            let mut csv = String::from("quantity,value\n");
            for (k, v) in &values {
                let _ = writeln!(csv, "{k},{}", fmt_f64(*v));
            }
            let _ = writeln!(csv, "residual,{}", fmt_f64(ss.residual));
            write_file(dir, "steady.csv", &csv, files)?;
            if cfg.analysis.wigner_steady {
                let r = self.system.reduce(&ss.rho)?;
                write_file(dir, "wigner_steady.csv", &self.wigner(&r)?.to_csv(), files)?;
            }
            result.steady_values = values;
        }
        result.reference_negativity = reference;
        Ok(result)
    }

    fn series_rows(&self, traj: &Trajectory, reference: Option<f64>) -> Result<Vec<BTreeMap<&'static str, f64>>> {
        traj.states.par_iter().map(|s| self.evaluate(s, reference)).collect()
    }
}

fn nearest(times: &[f64], t: f64) -> usize {
    let mut best = 0;
    for (i, &x) in times.iter().enumerate() {
        if (x - t).abs() < (times[best] - t).abs() {
            best = i;
        }
    }
    best
}

fn trajectory_csv(cfg: &ScenarioConfig, times: &[f64], rows: &[BTreeMap<&'static str, f64>]) -> String {
    let cols: Vec<&'static str> = cfg.analysis.observables.iter().map(|q| q.name()).collect();
    let mut s = String::from("t");
    for c in &cols {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (t, row) in times.iter().zip(rows) {
        s.push_str(&fmt_f64(*t));
        for c in &cols {
            s.push(',');
            s.push_str(&fmt_f64(row[c]));
        }
        s.push('\n');
    }
    s
}

/// Potential curve and lowest eigenvalues of the ring.
pub fn write_spectrum(cfg: &ScenarioConfig, sc: &SpectrumConfig, dir: &Path, files: &mut Vec<FileEntry>) -> Result<Vec<f64>> {
    let ModelConfig::SquidRing { circuit, dim } = &cfg.model else {
        return Err(Error::InvalidParameter { name: "spectrum", reason: "needs a squid_ring model".into() });
    };
    let h = squid_hamiltonian(circuit, *dim)?;
    let eig = linalg::hermitian_eigenvalues(h.matrix())?;
    let levels: Vec<f64> = eig.into_iter().take(sc.levels).collect();
    let mut csv = String::from("level,energy\n");
    for (k, e) in levels.iter().enumerate() {
        let _ = writeln!(csv, "{k},{}", fmt_f64(*e));
    }
    write_file(dir, "spectrum.csv", &csv, files)?;

    let (lo, hi) = sc.flux_range;
    let n = sc.potential_points;
    let rel: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let phis: Vec<f64> = rel.iter().map(|r| r * PHI0).collect();
    let u = potential_curve(circuit, &phis);
    let mut csv = String::from("flux_rel_phi0,flux_wb,potential\n");
    for ((r, p), u) in rel.iter().zip(&phis).zip(&u) {
        let _ = writeln!(csv, "{},{},{}", fmt_f64(*r), fmt_f64(*p), fmt_f64(*u));
    }
    write_file(dir, "potential.csv", &csv, files)?;
    Ok(levels)
}

fn run_dir(out: &Path, label: &str) -> PathBuf {
    if label.is_empty() {
        out.to_path_buf()
    } else {
        out.join(label)
    }
}

/// Runs every (initial state, channel set) pair of the scenario, `workers` at a time, each in
/// its own directory under `out`. Failed runs are recorded in their manifests.
pub fn run_scenario(cfg: &ScenarioConfig, out: &Path, workers: usize) -> Result<ScenarioOutcome> {
    fs::create_dir_all(out)?;
    let mut files = Vec::new();
    let start = Instant::now();
    if let Some(sc) = &cfg.spectrum {
        write_spectrum(cfg, sc, out, &mut files)?;
    }
    let specs = run_specs(cfg);
    let mut runs = Vec::new();
    if cfg.time.is_none() && cfg.steady.is_none() {
        // Spectrum-only scenario: one manifest for the top-level files.
        let manifest = RunManifest {
            scenario: cfg.name.clone(),
            run: String::new(),
            code_version: CODE_VERSION.to_string(),
            wall_time_s: start.elapsed().as_secs_f64(),
            status: "ok".into(),
            failure: None,
            partial: false,
            diagnostics: None,
            final_residual: None,
            steady: None,
            files: files.clone(),
            config: cfg.to_table(),
        };
        write_manifest(out, &manifest)?;
        runs.push(manifest);
    } else {
        let ctx = Context::new(cfg)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        let results: Vec<Result<RunManifest>> =
            pool.install(|| specs.par_iter().map(|s| ctx.execute(s, &run_dir(out, &s.label)).map(|r| r.0)).collect());
        for r in results {
            runs.push(r?);
        }
    }
    if specs.len() > 1 {
        let mut csv = String::from("run,status,directory\n");
        for r in &runs {
            let _ = writeln!(csv, "{},{},{}", r.run, r.status, r.run);
        }
        write_file(out, "runs.csv", &csv, &mut files)?;
    }
    Ok(ScenarioOutcome { runs, files })
}

// ---------------------------------------------------------------------------------------------
// Coupler validation

#[derive(Clone, Debug, Serialize)]
pub struct CouplerReport {
    pub separation: f64,
    pub warning: Option<String>,
    pub gamma2: f64,
    pub gamma_perp: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
}

/// kappa_b / max(kappa_a, sqrt(chi_a chi_b) beta0). Infinite when the signal has no scale.
pub fn scale_separation(c: &CouplerParams) -> f64 {
    let slow = c.kappa_a.max(c.g() * c.beta0());
    if slow == 0.0 {
        f64::INFINITY
    } else {
        c.kappa_b / slow
    }
}

/// Full two-mode evolution (probe displaced, cavity damping on both modes) against the
/// effective signal master equation, compared by trace distance of the signal state.
pub fn validate_coupler(cfg: &ScenarioConfig) -> Result<CouplerReport> {
    let ModelConfig::TwoMode { coupler, dim, dim_b } = &cfg.model else {
        return Err(Error::InvalidParameter { name: "model", reason: "validate-coupler needs a two_mode model".into() });
    };
    let Some(v) = &cfg.validation else {
        return Err(Error::InvalidParameter { name: "validation", reason: "missing [validation] section".into() });
    };
    let sep = scale_separation(coupler);
    if sep < MIN_SEPARATION {
        return Err(Error::ScaleSeparation(format!("kappa_b is only {sep:.3} times the signal scale (need >= {MIN_SEPARATION})")));
    }
    let warning = (sep < WARN_SEPARATION).then(|| format!("scale separation {sep:.3} below {WARN_SEPARATION}"));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    let rates = effective_rates(coupler)?;

    let system = build_system(&cfg.model)?;
    let mut eigen = None;
    let full0 = system.initial_state(&v.initial, &mut eigen)?;
    let full_channels = system.channels(&cfg.channels)?;

    let h_eff = signal_mode_hamiltonian(coupler, *dim)?;
    let mut eff_channels = Vec::new();
    let a = annihilation_op(*dim)?;
    if coupler.kappa_a > 0.0 {
        eff_channels.push(LindbladChannel::new(a.clone(), coupler.kappa_a)?);
    }
    if rates.gamma2 > 0.0 {
        eff_channels.push(LindbladChannel::new(&a * &a, rates.gamma2)?);
        eff_channels.push(LindbladChannel::new(number_op(*dim)?, rates.gamma_perp)?);
    }
    for c in &cfg.channels {
        eff_channels.push(LindbladChannel::new(channel_operator(c.operator, *dim)?, c.rate)?);
    }
    let eff0 = system.signal_state(&v.initial, &mut eigen)?.to_density();

    // Horizon 3 / Gamma_2; with no effective rate fall back to the probe time scale.
    let scale = if rates.gamma2 > 0.0 { 1.0 / rates.gamma2 } else { 1.0 / coupler.kappa_b };
    let t_end = v.horizon * scale;
    let times: Vec<f64> = (0..v.samples).map(|i| t_end * i as f64 / (v.samples - 1) as f64).collect();
    // Both sides share the integrator error, so it must sit well below the distances of interest.
    let method = cfg.time.map(|t| t.method).unwrap_or(Method::Dopri5 { rtol: 1e-12, atol: 1e-13 });
    let opts = EvolveOptions { method, keep_states: true, ..Default::default() };
    let full = evolve_generator(&Generator::new(&system.h, &full_channels)?, &full0, &times, &opts)?;
    let eff = evolve_generator(&Generator::new(&h_eff, &eff_channels)?, &eff0, &times, &opts)?;
    let distances = full
        .states
        .iter()
        .zip(&eff.states)
        .map(|(f, e)| observables::trace_distance(&partial_trace_signal(f, *dim, *dim_b)?, e))
        .collect::<Result<Vec<f64>>>()?;
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(CouplerReport {
        separation: sep,
        warning,
        gamma2: rates.gamma2,
        gamma_perp: rates.gamma_perp,
        times,
        distances,
        max_distance,
    })
}

pub fn coupler_report_csv(r: &CouplerReport) -> String {
    let mut s = String::from("t,trace_distance\n");
    for (t, d) in r.times.iter().zip(&r.distances) {
        let _ = writeln!(s, "{},{}", fmt_f64(*t), fmt_f64(*d));
    }
    s
}

// ---------------------------------------------------------------------------------------------
// Truncation audit

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub run: String,
    pub quantity: String,
    /// "trajectory" or "steady".
    pub source: String,
    pub max_drift: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditReport {
    pub dim: usize,
    pub audit_dim: usize,
    pub rows: Vec<AuditRow>,
    pub max_drift: f64,
}

/// Re-runs the scenario at `audit_dim` and reports the largest change of each quantity.
/// Nothing is written to disk.
pub fn audit_truncation(cfg: &ScenarioConfig, workers: usize) -> Result<AuditReport> {
    let mut big = cfg.clone();
    big.model = cfg.model.with_dim(cfg.audit_dim);
    // Same phase-space grid for both runs.
    big.grid.half_width = Some(grid_spec(cfg).half_width());
    let specs = run_specs(cfg);
    let base = Context::new(cfg)?;
    let wide = Context::new(&big)?;
    let scratch = std::env::temp_dir().join(format!("catbath-audit-{}", std::process::id()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let pairs: Vec<Result<(RunResult, RunResult)>> = pool.install(|| {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let a = base.execute(s, &scratch.join(format!("{i}a")))?.1;
                let b = wide.execute(s, &scratch.join(format!("{i}b")))?.1;
                Ok((a, b))
            })
            .collect()
    });
    let _ = fs::remove_dir_all(&scratch);
    let mut rows = Vec::new();
    for (s, pair) in specs.iter().zip(pairs) {
        let (a, b) = pair?;
        for (q, va) in &a.series {
            if let Some(vb) = b.series.get(q) {
                let d = va.iter().zip(vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                rows.push(AuditRow { run: s.label.clone(), quantity: q.to_string(), source: "trajectory".into(), max_drift: d });
            }
        }
        for (q, va) in &a.steady_values {
            if let Some(vb) = b.steady_values.get(q) {
                rows.push(AuditRow {
                    run: s.label.clone(),
                    quantity: q.to_string(),
                    source: "steady".into(),
                    max_drift: (va - vb).abs(),
                });
            }
        }
    }
    let max_drift = rows.iter().map(|r| r.max_drift).fold(0.0, f64::max);
    Ok(AuditReport { dim: cfg.model.dim(), audit_dim: cfg.audit_dim, rows, max_drift })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SMALL: &str = r#"
name = "small"
[model]
kind = "squid_ring"
dim = 16
[initial]
kind = "eigenstate"
k = [0, 1]
[[channels]]
operator = "a2"
rate = 0.2
[time]
t_max = 1.0
dt_out = 0.5
[analysis]
observables = ["energy", "entropy", "parity", "purity", "negativity", "cattiness"]
wigner_times = [1.0]
reference = { kind = "initial" }
[grid]
points = 32
"#;

    #[test]
    fn batch_writes_one_directory_per_state() {
        let cfg = parse_config(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path(), 2).unwrap();
        assert_eq!(out.runs.len(), 2);
        for r in &out.runs {
            assert!(r.ok(), "{:?}", r.failure);
            let csv = fs::read_to_string(dir.path().join(&r.run).join("trajectory.csv")).unwrap();
            let mut lines = csv.lines();
            assert_eq!(lines.next().unwrap(), "t,energy,entropy,parity,purity,negativity,cattiness");
            assert_eq!(lines.count(), 3);
            assert!(dir.path().join(&r.run).join("wigner_t0001.000.csv").exists());
            assert!(dir.path().join(&r.run).join("manifest.toml").exists());
        }
    }

    #[test]
    fn checksums_match_files() {
        let cfg = parse_config(SMALL).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path(), 1).unwrap();
        for r in &out.runs {
            for f in &r.files {
                let bytes = fs::read(dir.path().join(&r.run).join(&f.path)).unwrap();
                let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
                assert_eq!(hex, f.sha256);
            }
        }
    }

    #[test]
    fn two_mode_channels_act_on_signal() {
        let cfg = parse_config(
            r#"
[model]
kind = "two_mode"
dim = 4
dim_b = 3
chi_a = 0.0
chi_b = 0.0
kappa_a = 0.5
kappa_b = 2.0
epsilon = 0.0
[initial]
kind = "fock"
n = 1
[time]
t_max = 1.0
dt_out = 1.0
[analysis]
observables = ["parity"]
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let ctx = Context::new(&cfg).unwrap();
        let spec = &run_specs(&cfg)[0];
        let (_, res) = ctx.execute(spec, dir.path()).unwrap();
        // Signal damped at kappa_a: parity 1 - 2 e^{-kappa_a t}.
        let p = res.series["parity"][1];
        assert!((p - (1.0 - 2.0 * (-0.5f64).exp())).abs() < 1e-7, "{p}");
    }

    #[test]
    fn scale_separation_is_enforced() {
        let text = |kb: f64| {
            format!(
                "[model]\nkind = \"two_mode\"\ndim = 4\ndim_b = 3\nchi_a = 1.0\nchi_b = 1.0\nkappa_b = {kb}\nepsilon = [0.0, {}]\n[validation]\n",
                kb / 2.0
            )
        };
        // beta0 = 1, g = 1: separation = kappa_b.
        let cfg = parse_config(&text(10.0)).unwrap();
        assert!(matches!(validate_coupler(&cfg), Err(Error::ScaleSeparation(_))));
    }
}
