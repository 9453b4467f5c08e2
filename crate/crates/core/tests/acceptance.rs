//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. Set
//! `CATBATH_ACCEPTANCE=1,5,11` to run a subset. The process fails only when a criterion
//! outside `KNOWN_RED` fails; the known-red criteria are discussed in the README.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use catbath::config::{parse_config, ScenarioConfig, StateSpec};
use catbath::hilbert::{fock_state, parity_op, DensityMatrix, FockOperator};
use catbath::lindblad::{
    dissipator_apply, evolve_generator, liouvillian_matrix, steady_state, EvolveOptions, Generator, LindbladChannel,
    SteadyMethod, SteadyOptions,
};
use catbath::linalg::{self, CMat};
use catbath::models::{effective_rates, CouplerParams};
use catbath::observables::{fidelity, parity_expect, trace_distance};
use catbath::phase_space::{line_cut, negativity, wigner, wigner_points, GridSpec};
use catbath::presets::{self, PRESETS};
use catbath::scenario::{grid_spec, run_specs, validate_coupler, Context, RunResult};
use catbath::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail with the current model and thresholds.
const KNOWN_RED: &[u32] = &[4, 9, 10];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Preset runs, each computed once.
struct Runs {
    dir: tempfile::TempDir,
    cache: BTreeMap<String, Vec<(String, RunResult)>>,
}

impl Runs {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().expect("tempdir"), cache: BTreeMap::new() }
    }

    fn config(name: &str) -> ScenarioConfig {
        parse_config(presets::get(name).expect("preset").text).expect("preset parses")
    }

    fn get(&mut self, name: &str) -> Result<&[(String, RunResult)], Error> {
        if !self.cache.contains_key(name) {
            let start = Instant::now();
            let cfg = Self::config(name);
            let ctx = Context::new(&cfg)?;
            let mut out = Vec::new();
            for spec in run_specs(&cfg) {
                let dir = self.dir.path().join(name).join(&spec.label);
                let (manifest, result) = ctx.execute(&spec, &dir)?;
                if let Some(f) = manifest.failure {
                    return Err(Error::Numerical(format!("{name}/{}: {f}", spec.label)));
                }
                out.push((spec.label.clone(), result));
            }
            eprintln!("  [{name}: {} run(s), {:.1} s]", out.len(), start.elapsed().as_secs_f64());
            self.cache.insert(name.to_string(), out);
        }
        Ok(&self.cache[name])
    }

    fn single(&mut self, name: &str) -> Result<&RunResult, Error> {
        Ok(&self.get(name)?[0].1)
    }
}

fn series<'a>(r: &'a RunResult, q: &str) -> &'a [f64] {
    r.series.get(q).map(|v| v.as_slice()).unwrap_or(&[])
}

fn times(r: &RunResult) -> &[f64] {
    &r.trajectory.as_ref().expect("trajectory").times
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

// -----------------------------------------------------------------------------------------

fn c1_lindblad_oracle() -> Result<Verdict, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for case in 0..40 {
        let n = 2 + case % 11;
        let rand_mat = |rng: &mut ChaCha8Rng| CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let g = rand_mat(&mut rng);
        let h = (&g + g.adjoint()) * c(0.5, 0.0);
        let k = 1 + case % 3;
        let ops: Vec<(CMat, f64)> = (0..k).map(|_| (rand_mat(&mut rng), rng.gen_range(0.0..2.0))).collect();
        let r = rand_mat(&mut rng);
        let rho = &r * r.adjoint();
        let rho = &rho / rho.trace();

        let channels = ops
            .iter()
            .map(|(l, rate)| LindbladChannel::new(FockOperator::new(l.clone())?, *rate))
            .collect::<Result<Vec<_>, _>>()?;
        let hop = FockOperator::new(h.clone())?;
        let sup = liouvillian_matrix(&hop, &channels)?;
        let mut direct = (&h * &rho - &rho * &h) * c(0.0, -1.0);
        for (ch, (l, rate)) in channels.iter().zip(&ops) {
            let ld = l.adjoint();
            let ldl = &ld * l;
            let d = l * &rho * &ld - (&ldl * &rho + &rho * &ldl) * c(0.5, 0.0);
            worst = worst.max(max_abs_diff(&dissipator_apply(ch, &rho)?, &(&d * c(*rate, 0.0))));
            direct += d * c(*rate, 0.0);
        }
        worst = worst.max(max_abs_diff(&sup.apply(&rho), &direct));
        worst = worst.max(max_abs_diff(&Generator::new(&hop, &channels)?.apply(&rho), &direct));
    }

    // Amplitude damping of a qubit.
    let kappa = 0.7;
    let a = catbath::hilbert::annihilation_op(2)?;
    let sup = liouvillian_matrix(&FockOperator::zeros(2), &[LindbladChannel::new(a, kappa)?])?;
    let mut eig: Vec<Complex64> = linalg::eigenvalues(sup.matrix())?;
    eig.sort_by(|x, y| y.re.partial_cmp(&x.re).unwrap());
    let expected = [0.0, -kappa / 2.0, -kappa / 2.0, -kappa];
    let spec_err = eig.iter().zip(expected).map(|(z, e)| (z - c(e, 0.0)).norm()).fold(0.0, f64::max);

    Ok(verdict(
        worst < 1e-12 && spec_err < 1e-12,
        format!("max superoperator/direct mismatch {worst:.2e} over 40 cases (dim 2..12); qubit damping spectrum error {spec_err:.2e}"),
    ))
}

const TRAJECTORY_PRESETS: &[&str] = &["fig2", "fig3c", "fig4", "fig6a", "fig6b", "fig6c"];

fn c2_conservation(runs: &mut Runs) -> Result<Verdict, Error> {
    let (mut drift, mut herm, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    let mut count = 0;
    for name in TRAJECTORY_PRESETS {
        for (_, r) in runs.get(name)? {
            let d = &r.trajectory.as_ref().expect("trajectory").diagnostics;
            drift = drift.max(d.max_trace_drift);
            herm = herm.max(d.max_hermitian_deviation);
            min_eig = min_eig.min(d.min_eigenvalue);
            count += 1;
        }
    }
    Ok(verdict(
        drift < 1e-7 && herm < 1e-9 && min_eig > -1e-7,
        format!("{count} trajectories: trace drift {drift:.2e}, Hermiticity {herm:.2e}, min eigenvalue {min_eig:.2e}"),
    ))
}

fn max_parity_change(
    h: &FockOperator,
    channels: &[LindbladChannel],
    rho0: &DensityMatrix,
    t_max: f64,
) -> Result<f64, Error> {
    let grid: Vec<f64> = (0..=40).map(|i| t_max * i as f64 / 40.0).collect();
    let traj = evolve_generator(&Generator::new(h, channels)?, rho0, &grid, &EvolveOptions::default())?;
    let p0 = parity_expect(rho0);
    Ok(traj.states.iter().map(|s| (parity_expect(s) - p0).abs()).fold(0.0, f64::max))
}

fn c3_parity(runs: &mut Runs) -> Result<Verdict, Error> {
    let mut preset_dev: f64 = 0.0;
    for name in ["fig2", "fig3c", "fig6b"] {
        for (_, r) in runs.get(name)? {
            let p = series(r, "parity");
            preset_dev = preset_dev.max(p.iter().map(|x| (x - p[0]).abs()).fold(0.0, f64::max));
        }
    }
    // A mixed-parity start under a^2 and a^dag a, then with single-photon loss added.
    let cfg = Runs::config("fig3c");
    let ctx = Context::new(&cfg)?;
    let mut eigen = None;
    let rho0 = ctx.system.initial_state(&StateSpec::Coherent(c(1.0, 0.5)), &mut eigen)?;
    let dim = cfg.model.dim();
    let a = catbath::hilbert::annihilation_op(dim)?;
    let conserving = vec![
        LindbladChannel::new(&a * &a, 0.2)?,
        LindbladChannel::new(catbath::hilbert::number_op(dim)?, 0.05)?,
    ];
    let dev = max_parity_change(&ctx.system.h, &conserving, &rho0, 10.0)?;
    let mut breaking = conserving.clone();
    breaking.push(LindbladChannel::new(a.clone(), 0.02)?);
    let broken = max_parity_change(&ctx.system.h, &breaking, &rho0, 10.0)?;
    Ok(verdict(
        preset_dev < 1e-7 && dev < 1e-7 && broken > 1e-3,
        format!(
            "preset max |dPi| {preset_dev:.2e}; coherent(1+0.5i) under a2+adag_a {dev:.2e}; with (a, 0.02) added {broken:.3e} (needs > 1e-3)"
        ),
    ))
}

fn c4_fig2(runs: &mut Runs) -> Result<Verdict, Error> {
    let cfg = Runs::config("fig2");
    let ctx = Context::new(&cfg)?;
    let levels = linalg::hermitian_eigenvalues(ctx.system.h.matrix())?;
    let gap = levels[1] - levels[0];
    let results = runs.get("fig2")?;
    let mut rise_fall = 0;
    let (mut worst_s, mut worst_p) = (0.0f64, 1.0f64);
    let mut finals = Vec::new();
    for (_, r) in results {
        let s = series(r, "entropy");
        let smax = s.iter().copied().fold(0.0, f64::max);
        let last = *s.last().unwrap();
        if smax > s[0] + 1e-3 && last < smax - 1e-3 {
            rise_fall += 1;
        }
        worst_s = worst_s.max(last);
        worst_p = worst_p.min(*series(r, "purity").last().unwrap());
        finals.push(*series(r, "energy").last().unwrap());
    }
    let spread = finals.iter().copied().fold(f64::MIN, f64::max) - finals.iter().copied().fold(f64::MAX, f64::min);
    let t_end = times(&results[0].1).last().copied().unwrap_or(0.0);
    Ok(verdict(
        rise_fall == results.len() && worst_s < 0.05 && worst_p > 0.95 && spread <= 2.0 * gap,
        format!(
            "t = {t_end}: rise-then-fall {rise_fall}/{}; max final entropy {worst_s:.4} (< 0.05); min final purity {worst_p:.4} (> 0.95); \
             final energy spread {spread:.3e} vs 2(E1-E0) = {:.3e}",
            results.len(),
            2.0 * gap
        ),
    ))
}

/// Sign changes of W through the origin, perpendicular to and along the axis joining the two
/// Wigner maxima. Samples with |W| below 1e-3 max|W| are skipped.
fn fringes(rho: &DensityMatrix, grid: &GridSpec) -> Result<(usize, usize), Error> {
    let w = wigner(rho, grid)?;
    let (mut best, mut at) = (f64::MIN, (1.0, 0.0));
    for i in 0..grid.nx {
        for j in 0..grid.np {
            if w.at(i, j) > best {
                best = w.at(i, j);
                at = (grid.x(i), grid.p(j));
            }
        }
    }
    let norm = (at.0 * at.0 + at.1 * at.1).sqrt().max(1e-12);
    let axis = (at.0 / norm, at.1 / norm);
    let floor = 1e-3 * w.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let count = |dir: (f64, f64)| -> Result<usize, Error> {
        let l = grid.half_width();
        let cut = line_cut(rho, (-l * dir.0, -l * dir.1), (l * dir.0, l * dir.1), 1601)?;
        let signs: Vec<bool> = cut.iter().filter(|v| v.abs() > floor).map(|v| *v > 0.0).collect();
        Ok(signs.windows(2).filter(|s| s[0] != s[1]).count())
    };
    Ok((count((-axis.1, axis.0))?, count(axis)?))
}

fn c5_fig3(runs: &mut Runs) -> Result<Verdict, Error> {
    let lossy = runs.single("fig3b")?.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    let cfg = Runs::config("fig3c");
    let ctx = Context::new(&cfg)?;
    let r = runs.single("fig3c")?;
    let cat = r.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    let rho = &r.steady.as_ref().expect("steady").rho;
    let (across, along) = fringes(rho, &ctx.grid)?;
    Ok(verdict(
        lossy < 1e-3 && cat > 0.05 && across >= 2,
        format!(
            "N(a steady) {lossy:.2e} (< 1e-3); N(a2 steady) {cat:.4} (> 0.05); fringe sign changes across the inter-well axis {across} (>= 2), along it {along}"
        ),
    ))
}

fn c6_fig5(runs: &mut Runs) -> Result<Verdict, Error> {
    let results = runs.get("fig5")?;
    let s0 = &results[0].1.steady.as_ref().expect("steady").rho;
    let s1 = &results[1].1.steady.as_ref().expect("steady").rho;
    let (p0, p1) = (parity_expect(s0), parity_expect(s1));
    let f = fidelity(s0, s1)?;
    Ok(verdict(
        (p0 - 1.0).abs() < 1e-3 && (p1 + 1.0).abs() < 1e-3 && f < 0.5,
        format!("parity {p0:+.6} and {p1:+.6}; mutual fidelity {f:.3e} (< 0.5)"),
    ))
}

fn c7_fig6(runs: &mut Runs) -> Result<Verdict, Error> {
    let lossy = runs.single("fig6a")?.clone();
    let two = runs.single("fig6b")?.clone();
    let both = runs.single("fig6c")?.clone();
    let t = times(&lossy).to_vec();
    let cat_lossy = series(&lossy, "cattiness");
    // Sampling time: the loss-only cat has just become a mixture.
    let Some(idx) = cat_lossy.iter().position(|&v| v <= 0.01) else {
        return Ok(verdict(false, "loss-only cattiness never drops to 1%"));
    };
    let n_lossy = series(&lossy, "negativity")[idx];
    let n_both = series(&both, "negativity")[idx];
    let ratio = n_both / n_lossy;
    let (c2, cb) = (series(&two, "cattiness"), series(&both, "cattiness"));
    let ordered = (idx..t.len()).all(|i| c2[i] >= cb[i] && cb[i] >= cat_lossy[i]);
    Ok(verdict(
        ratio >= 5.0 && ordered,
        format!(
            "sampling time t = {} (loss-only Cat first <= 1%); N(combined)/N(loss-only) = {ratio:.2} (>= 5); \
             two-photon >= combined >= loss-only for t >= {}: {ordered}",
            t[idx], t[idx]
        ),
    ))
}

fn c8_rates() -> Result<Verdict, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut exact, mut worst) = (0, 0.0f64);
    for _ in 0..100 {
        let chi_a = 10f64.powf(rng.gen_range(-3.0..7.0));
        let chi_b = 10f64.powf(rng.gen_range(-3.0..7.0));
        let kappa_a = rng.gen_range(0.0..10.0);
        let kappa_b = 10f64.powf(rng.gen_range(-1.0..9.0));
        let eps = c(rng.gen_range(-1e7..1e7), rng.gen_range(-1e7..1e7));
        let r = effective_rates(&CouplerParams::new(chi_a, chi_b, kappa_a, kappa_b, eps)?)?;
        if r.gamma_perp / r.gamma2 == 0.25 {
            exact += 1;
        }
        let beta0 = 2.0 * eps.norm() / kappa_b;
        let expected = 16.0 * chi_a * chi_b * beta0 * beta0 / kappa_b;
        worst = worst.max((r.gamma2 - expected).abs() / expected);
    }
    Ok(verdict(exact == 100 && worst < 1e-13, format!("Gamma_perp/Gamma_2 = 1/4 exactly in {exact}/100; max relative Gamma_2 error {worst:.2e}")))
}

fn c9_supp(runs: &mut Runs) -> Result<Verdict, Error> {
    let na = runs.single("supp_purrcat_a")?.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    let nb = runs.single("supp_purrcat_b")?.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    let ra = runs.single("supp_purrcat_ring_a")?.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    let rb = runs.single("supp_purrcat_ring_b")?.steady_values.get("negativity").copied().unwrap_or(f64::NAN);
    Ok(verdict(
        na > 0.02 && nb > 0.0,
        format!("signal mode steady N: (a2 0.2, adag_a 0.05) {na:.3e} (> 0.02), (a2 0.02, adag_a 0.08) {nb:.3e} (> 0); ring with the same channels: {ra:.4}, {rb:.4}"),
    ))
}

fn c10_coupler() -> Result<Verdict, Error> {
    let cfg = Runs::config("coupler_validation");
    let r = validate_coupler(&cfg)?;
    let t_end = r.times.last().copied().unwrap_or(0.0);
    Ok(verdict(
        r.separation >= 50.0 && r.max_distance < 0.05,
        format!("separation {:.1}; max trace distance over [0, {t_end:.3}] = {:.4} (< 0.05)", r.separation, r.max_distance),
    ))
}

fn c11_wigner(runs: &mut Runs) -> Result<Verdict, Error> {
    let dim = 60;
    let grid = GridSpec::default_for_dim(dim);
    let vac = fock_state(0, dim)?.to_density();
    let wv = wigner(&vac, &grid)?;
    let mut gauss: f64 = 0.0;
    for i in 0..grid.nx {
        for j in 0..grid.np {
            let (x, p) = (grid.x(i), grid.p(j));
            gauss = gauss.max((wv.at(i, j) - (-(x * x + p * p)).exp() / PI).abs());
        }
    }
    let one = fock_state(1, dim)?.to_density();
    let center = (wigner_points(&one, &[(0.0, 0.0)])?[0] + 1.0 / PI).abs();

    // Acceptance states on the grids their presets declare.
    let mut states: Vec<(String, DensityMatrix, GridSpec)> = Vec::new();
    {
        let cfg = Runs::config("fig6a");
        let ctx = Context::new(&cfg)?;
        let mut eigen = None;
        let g = ctx.system.signal_state(&StateSpec::Eigenstate(0), &mut eigen)?.to_density();
        states.push(("ring ground state".into(), g, ctx.grid));
    }
    for name in ["fig3b", "fig3c", "supp_purrcat_a", "supp_purrcat_b"] {
        let grid = grid_spec(&Runs::config(name));
        let rho = runs.single(name)?.steady.as_ref().expect("steady").rho.clone();
        states.push((format!("{name} steady"), rho, grid));
    }
    for name in ["fig6a", "fig6c"] {
        let grid = grid_spec(&Runs::config(name));
        let r = runs.single(name)?;
        let traj = r.trajectory.as_ref().expect("trajectory");
        let idx = traj.times.iter().position(|&t| t >= 18.0).unwrap_or(0);
        states.push((format!("{name} t={}", traj.times[idx]), traj.states[idx].clone(), grid));
    }
    let mut norm_err: f64 = 0.0;
    for rho in [&vac, &one] {
        norm_err = norm_err.max((wigner(rho, &grid)?.integral() - 1.0).abs());
    }
    let mut refine: (f64, String) = (0.0, String::new());
    for (label, rho, g) in &states {
        let w = wigner(rho, g)?;
        norm_err = norm_err.max((w.integral() - 1.0).abs());
        let d = (negativity(&wigner(rho, &g.refined())?) - negativity(&w)).abs();
        if d >= refine.0 {
            refine = (d, label.clone());
        }
    }
    let refine_label = refine.1;
    let refine = refine.0;

    // (pi/2) W_alpha(0) = <Pi>, with W_alpha = 2 W(x, p) the density over the alpha plane.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut parity_err: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let g = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let rho = DensityMatrix::normalized(&g * g.adjoint())?;
        let w_alpha = 2.0 * wigner_points(&rho, &[(0.0, 0.0)])?[0];
        let pi = catbath::observables::energy(&rho, &parity_op(n)?)?;
        parity_err = parity_err.max((PI / 2.0 * w_alpha - pi).abs());
    }
    Ok(verdict(
        gauss < 1e-6 && center < 1e-6 && norm_err < 5e-3 && parity_err < 1e-6 && refine < 1e-3,
        format!(
            "vacuum {gauss:.1e}; fock(1) centre {center:.1e}; normalization {norm_err:.1e}; (pi/2)W_alpha(0)-<Pi> {parity_err:.1e}; \
             refinement dN {refine:.1e} (worst: {refine_label}, {} states)",
            states.len()
        ),
    ))
}

fn c12_solvers() -> Result<Verdict, Error> {
    let mut compared = Vec::new();
    let mut skipped = Vec::new();
    let mut worst: f64 = 0.0;
    for p in PRESETS {
        let cfg = parse_config(p.text)?;
        if cfg.steady.is_none() {
            continue;
        }
        let ctx = Context::new(&cfg)?;
        for spec in run_specs(&cfg) {
            let mut eigen = None;
            let rho0 = ctx.system.initial_state(&spec.initial, &mut eigen)?;
            let channels = ctx.system.channels(&spec.channels)?;
            let alg = SteadyOptions { method: SteadyMethod::Algebraic, ..Default::default() };
            let label = if spec.label.is_empty() { p.name.to_string() } else { format!("{}/{}", p.name, spec.label) };
            match steady_state(&ctx.system.h, &channels, &alg) {
                Ok(a) => {
                    let long = SteadyOptions { method: SteadyMethod::Propagator, initial: Some(rho0), ..Default::default() };
                    let b = steady_state(&ctx.system.h, &channels, &long)?;
                    let d = trace_distance(&a.rho, &b.rho)?;
                    worst = worst.max(d);
                    compared.push(format!("{label} {d:.1e}"));
                }
                Err(Error::DegenerateNullSpace { dim }) => skipped.push(format!("{label} (null dim {dim})")),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(verdict(
        !compared.is_empty() && worst < 1e-6,
        format!("unique fixed point: [{}]; degenerate, skipped: [{}]", compared.join(", "), skipped.join(", ")),
    ))
}

fn main() {
    let only: Option<Vec<u32>> =
        std::env::var("CATBATH_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: u32| only.as_ref().is_none_or(|v| v.contains(&id));
    let mut runs = Runs::new();
    let criteria: Vec<(u32, &str, Box<dyn Fn(&mut Runs) -> Result<Verdict, Error>>)> = vec![
        (1, "Lindblad correctness oracle", Box::new(|_| c1_lindblad_oracle())),
        (2, "conservation along preset trajectories", Box::new(c2_conservation)),
        (3, "parity conservation under a2 / adag_a", Box::new(c3_parity)),
        (4, "energy and entropy from 20 eigenstates", Box::new(c4_fig2)),
        (5, "cooling to a mixture vs a cat", Box::new(c5_fig3)),
        (6, "parity-preserving steady states", Box::new(c6_fig5)),
        (7, "two-photon bath prolongs the cat", Box::new(c7_fig6)),
        (8, "effective rates", Box::new(|_| c8_rates())),
        (9, "persistent cat with dephasing", Box::new(c9_supp)),
        (10, "adiabatic elimination", Box::new(|_| c10_coupler())),
        (11, "Wigner suite", Box::new(c11_wigner)),
        (12, "solver equivalence", Box::new(|_| c12_solvers())),
    ];
    let start = Instant::now();
    let mut lines: Vec<String> = Vec::new();
    let mut unexpected = Vec::new();
    for (id, title, f) in &criteria {
        if !wanted(*id) {
            continue;
        }
        let t = Instant::now();
        let v = f(&mut runs).unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && KNOWN_RED.contains(id) { " [known red]" } else { "" };
        let line = format!("criterion {id:>2} {tag}{note}  {title}: {} ({:.1} s)", v.detail, t.elapsed().as_secs_f64());
        println!("{line}");
        lines.push(line);
        if !v.pass && !KNOWN_RED.contains(id) {
            unexpected.push(*id);
        }
    }
    let passed = lines.iter().filter(|l| l.contains(" PASS ")).count();
    println!("acceptance: {passed}/{} criteria pass in {:.1} s", lines.len(), start.elapsed().as_secs_f64());
    drop(runs);
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
