use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, FockOperator};
use crate::linalg::{self, CMat};
use crate::observables;

use super::{Generator, LindbladChannel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4) with PI step control.
    Dopri5 { rtol: f64, atol: f64 },
    /// Classical fixed-step Runge-Kutta.
    Rk4 { dt: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Dopri5 { rtol: 1e-9, atol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    Energy,
    Entropy,
    Parity,
    Purity,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::Energy => "energy",
            Observable::Entropy => "entropy",
            Observable::Parity => "parity",
            Observable::Purity => "purity",
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    pub method: Method,
    pub max_steps: usize,
    /// Runs whose trace drifts further than this before renormalization fail.
    pub max_trace_drift: f64,
    pub observables: Vec<Observable>,
    /// Keep every output state in the trajectory (otherwise only the last one).
    pub keep_states: bool,
    /// Runs whose output states have an eigenvalue below `-max_negativity` fail.
    pub max_negativity: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            method: Method::default(),
            max_steps: 50_000_000,
            max_trace_drift: 1e-7,
            observables: Vec::new(),
            keep_states: true,
            max_negativity: 1e-7,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evaluations: usize,
    /// max |Tr rho - 1| at output times, before renormalization.
    pub max_trace_drift: f64,
    /// max |rho - rho^dag| at output times.
    pub max_hermitian_deviation: f64,
    /// Smallest eigenvalue seen at output times.
    pub min_eigenvalue: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Output states (all of them, or only the final one when `keep_states` is off).
    pub states: Vec<DensityMatrix>,
    pub observables: BTreeMap<String, Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&DensityMatrix> {
        self.states.last()
    }

    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.observables.get(name).map(Vec::as_slice)
    }
}

pub fn evolve(
    rho0: &DensityMatrix,
    h: &FockOperator,
    channels: &[LindbladChannel],
    t_grid: &[f64],
    options: &EvolveOptions,
) -> Result<Trajectory> {
    let gen = Generator::new(h, channels)?;
    evolve_generator(&gen, rho0, t_grid, options)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidParameter { name: "t_grid", reason: "must start at 0".into() });
    }
    if !t_grid.windows(2).all(|w| w[1] > w[0]) || !t_grid.iter().all(|t| t.is_finite()) {
        return Err(Error::InvalidParameter { name: "t_grid", reason: "must be finite and strictly increasing".into() });
    }
    Ok(())
}

struct Recorder<'a> {
    gen: &'a Generator,
    options: &'a EvolveOptions,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, raw: &CMat) -> Result<()> {
        let tr = linalg::trace(raw);
        let drift = (tr - linalg::ONE).norm();
        let d = &mut self.traj.diagnostics;
        d.max_trace_drift = d.max_trace_drift.max(drift);
        if drift > self.options.max_trace_drift || !drift.is_finite() {
            return Err(self.fail(t, format!("trace drift {drift:e} exceeds {:e}", self.options.max_trace_drift)));
        }
        let rho = DensityMatrix::from_matrix_unchecked(raw / Complex64::new(tr.re, 0.0))?;
        d.max_hermitian_deviation = d.max_hermitian_deviation.max(linalg::hermitian_deviation(rho.matrix()));
        let eigs = rho.eigenvalues()?;
        let min = eigs.first().copied().unwrap_or(0.0);
        d.min_eigenvalue = if self.traj.times.is_empty() { min } else { d.min_eigenvalue.min(min) };
        if min < -self.options.max_negativity {
            return Err(self.fail(t, format!("eigenvalue {min:e} below -{:e}", self.options.max_negativity)));
        }
        for &obs in &self.options.observables {
            let v = match obs {
                Observable::Energy => observables::energy_matrix(rho.matrix(), self.gen.hamiltonian()),
                Observable::Entropy => observables::entropy_from_clipped(&eigs),
                Observable::Parity => observables::parity_expect(&rho),
                Observable::Purity => observables::purity(&rho),
            };
            self.traj.observables.entry(obs.name().to_string()).or_default().push(v);
        }
        self.traj.times.push(t);
        if !self.options.keep_states {
            self.traj.states.clear();
        }
        self.traj.states.push(rho);
        Ok(())
    }

    fn fail(&mut self, t: f64, reason: String) -> Error {
        let partial = std::mem::replace(
            &mut self.traj,
            Trajectory { times: vec![], states: vec![], observables: BTreeMap::new(), diagnostics: Diagnostics::default() },
        );
        Error::IntegrationFailure { t_reached: t, reason, partial: Some(Box::new(partial)) }
    }
}

/// Integrates `drho/dt = L[rho]` and records trace-normalized states at `t_grid`.
pub fn evolve_generator(gen: &Generator, rho0: &DensityMatrix, t_grid: &[f64], options: &EvolveOptions) -> Result<Trajectory> {
    check_grid(t_grid)?;
    if rho0.dim() != gen.dim() {
        return Err(Error::DimensionMismatch { expected: gen.dim(), found: rho0.dim() });
    }
    rho0.validate()?;
    let mut rec = Recorder {
        gen,
        options,
        traj: Trajectory { times: vec![], states: vec![], observables: BTreeMap::new(), diagnostics: Diagnostics::default() },
    };
    let mut y = rho0.matrix().clone();
    rec.record(0.0, &y)?;
    if t_grid.len() == 1 {
        return Ok(rec.traj);
    }
    match options.method {
        Method::Dopri5 { rtol, atol } => dopri5(gen, &mut y, t_grid, rtol, atol, &mut rec)?,
        Method::Rk4 { dt } => rk4(gen, &mut y, t_grid, dt, &mut rec)?,
    }
    Ok(rec.traj)
}

struct Workspace {
    y: CMat,
    s: CMat,
}

impl Workspace {
    fn new(n: usize) -> Self {
        Self { y: CMat::zeros(n, n), s: CMat::zeros(n, n) }
    }

    fn rhs(&mut self, gen: &Generator, rho: &CMat, out: &mut CMat) {
        gen.apply_hermitian_into(rho, out, &mut self.y, &mut self.s);
    }
}

/// out = y + h * sum c_i k_i
fn combine(out: &mut CMat, y: &CMat, h: f64, terms: &[(f64, &CMat)]) {
    let o = out.as_mut_slice();
    o.copy_from_slice(y.as_slice());
    for &(c, k) in terms {
        if c == 0.0 {
            continue;
        }
        let f = h * c;
        for (oi, ki) in o.iter_mut().zip(k.as_slice()) {
            *oi += ki * f;
        }
    }
}

fn rk4(gen: &Generator, y: &mut CMat, t_grid: &[f64], dt: f64, rec: &mut Recorder) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter { name: "dt", reason: format!("must be positive, got {dt}") });
    }
    let n = gen.dim();
    let mut ws = Workspace::new(n);
    let mut k: Vec<CMat> = (0..4).map(|_| CMat::zeros(n, n)).collect();
    let mut tmp = CMat::zeros(n, n);
    let mut t = 0.0;
    for &target in &t_grid[1..] {
        while t < target {
            let h = dt.min(target - t);
            if rec.traj.diagnostics.steps_accepted >= rec.options.max_steps {
                return Err(rec.fail(t, "step budget exhausted".into()));
            }
            let (k0, rest) = k.split_at_mut(1);
            let (k1, rest) = rest.split_at_mut(1);
            let (k2, k3) = rest.split_at_mut(1);
            ws.rhs(gen, y, &mut k0[0]);
            combine(&mut tmp, y, h, &[(0.5, &k0[0])]);
            ws.rhs(gen, &tmp, &mut k1[0]);
            combine(&mut tmp, y, h, &[(0.5, &k1[0])]);
            ws.rhs(gen, &tmp, &mut k2[0]);
            combine(&mut tmp, y, h, &[(1.0, &k2[0])]);
            ws.rhs(gen, &tmp, &mut k3[0]);
            combine(&mut tmp, y, h, &[(1.0 / 6.0, &k0[0]), (1.0 / 3.0, &k1[0]), (1.0 / 3.0, &k2[0]), (1.0 / 6.0, &k3[0])]);
            std::mem::swap(y, &mut tmp);
            t = if target - t <= h * (1.0 + 1e-12) { target } else { t + h };
            let d = &mut rec.traj.diagnostics;
            d.steps_accepted += 1;
            d.rhs_evaluations += 4;
        }
        rec.record(target, y)?;
    }
    Ok(())
}

// Dormand-Prince 5(4) tableau (the generator is autonomous, so the nodes c_i are not needed).
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

fn dopri5(gen: &Generator, y: &mut CMat, t_grid: &[f64], rtol: f64, atol: f64, rec: &mut Recorder) -> Result<()> {
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::InvalidParameter { name: "tolerance", reason: "rtol and atol must be positive".into() });
    }
    let n = gen.dim();
    let mut ws = Workspace::new(n);
    let mut k: Vec<CMat> = (0..7).map(|_| CMat::zeros(n, n)).collect();
    let mut stage = CMat::zeros(n, n);
    let mut ynew = CMat::zeros(n, n);
    let mut t = 0.0;
    let mut h = (0.01 / gen.norm_bound().max(1e-12)).min(t_grid[1]);
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    ws.rhs(gen, y, &mut k[0]);
    rec.traj.diagnostics.rhs_evaluations += 1;

    for &target in &t_grid[1..] {
        while t < target {
            let d = &rec.traj.diagnostics;
            if d.steps_accepted + d.steps_rejected >= rec.options.max_steps {
                return Err(rec.fail(t, "step budget exhausted".into()));
            }
            let remaining = target - t;
            let clipped = h >= remaining;
            let step = if clipped { remaining } else { h };
            if step < 1e-14 * t.max(1.0) {
                return Err(rec.fail(t, format!("step size underflow (h = {step:e})")));
            }

            {
                let (k0, rest) = k.split_at_mut(1);
                let k0 = &k0[0];
                combine(&mut stage, y, step, &[(A21, k0)]);
                ws.rhs(gen, &stage, &mut rest[0]);
                combine(&mut stage, y, step, &[(A31, k0), (A32, &rest[0])]);
                ws.rhs(gen, &stage, &mut rest[1]);
                combine(&mut stage, y, step, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])]);
                ws.rhs(gen, &stage, &mut rest[2]);
                combine(&mut stage, y, step, &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])]);
                ws.rhs(gen, &stage, &mut rest[3]);
                combine(&mut stage, y, step, &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])]);
                ws.rhs(gen, &stage, &mut rest[4]);
                combine(&mut ynew, y, step, &[(A71, k0), (A73, &rest[1]), (A74, &rest[2]), (A75, &rest[3]), (A76, &rest[4])]);
                ws.rhs(gen, &ynew, &mut rest[5]);
            }
            rec.traj.diagnostics.rhs_evaluations += 6;

            let err = error_norm(y, &ynew, &k, step, rtol, atol);
            if !err.is_finite() {
                return Err(rec.fail(t, "non-finite error estimate".into()));
            }
            let fac11 = err.powf(0.2 - BETA * 0.75);
            if err <= 1.0 {
                let fac = (fac11 / fac_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                let mut hnew = step / fac;
                if last_rejected {
                    hnew = hnew.min(step);
                }
                fac_old = err.max(1e-4);
                t = if clipped { target } else { t + step };
                std::mem::swap(y, &mut ynew);
                k.swap(0, 6);
                rec.traj.diagnostics.steps_accepted += 1;
                last_rejected = false;
                // A step shortened to hit an output time should not shrink the controller's step.
                h = if clipped { h.max(hnew) } else { hnew };
            } else {
                h = step / (fac11 / SAFETY).min(1.0 / FAC_MIN);
                rec.traj.diagnostics.steps_rejected += 1;
                last_rejected = true;
            }
        }
        rec.record(target, y)?;
    }
    Ok(())
}

fn error_norm(y: &CMat, ynew: &CMat, k: &[CMat], h: f64, rtol: f64, atol: f64) -> f64 {
    let e = [(0, E1), (2, E3), (3, E4), (4, E5), (5, E6), (6, E7)];
    let len = y.len();
    let mut acc = 0.0;
    for idx in 0..len {
        let mut err = Complex64::new(0.0, 0.0);
        for &(s, c) in &e {
            err += k[s].as_slice()[idx] * c;
        }
        let sc = atol + rtol * y.as_slice()[idx].norm().max(ynew.as_slice()[idx].norm());
        acc += (err * h).norm_sqr() / (sc * sc);
    }
    (acc / len as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{annihilation_op, fock_state, number_op, StateVector};
    use crate::linalg::CVec;

    #[test]
    fn diagonal_h_keeps_populations() {
        let dim = 5;
        let h = number_op(dim).unwrap();
        let v = StateVector::new(CVec::from_fn(dim, |i, _| Complex64::new(1.0 + i as f64, 0.5))).unwrap();
        let rho0 = v.to_density();
        let grid: Vec<f64> = (0..6).map(|i| i as f64 * 0.7).collect();
        let traj = evolve(&rho0, &h, &[], &grid, &EvolveOptions::default()).unwrap();
        for s in &traj.states {
            for i in 0..dim {
                assert!((s.matrix()[(i, i)] - rho0.matrix()[(i, i)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn amplitude_damping_decay_law() {
        let kappa = 0.6;
        let a = annihilation_op(2).unwrap();
        let ch = [LindbladChannel::new(a, kappa).unwrap()];
        let rho0 = fock_state(1, 2).unwrap().to_density();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.25).collect();
        let opts = EvolveOptions { observables: vec![Observable::Energy], ..Default::default() };
        let h = FockOperator::zeros(2);
        let traj = evolve(&rho0, &h, &ch, &grid, &opts).unwrap();
        let n = number_op(2).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let pop = observables::energy(s, &n).unwrap();
            assert!((pop - (-kappa * t).exp()).abs() < 1e-6, "t={t} pop={pop}");
        }
        assert!(traj.diagnostics.max_trace_drift < 1e-12);

        let rk = EvolveOptions { method: Method::Rk4 { dt: 0.01 }, ..Default::default() };
        let traj = evolve(&rho0, &h, &ch, &grid, &rk).unwrap();
        let last = traj.final_state().unwrap();
        assert!((observables::energy(last, &n).unwrap() - (-kappa * 5.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn parity_conserved_under_two_photon_loss() {
        let dim = 10;
        let a = annihilation_op(dim).unwrap();
        let h = &number_op(dim).unwrap() + &(&(&a * &a) + &(&a.adjoint() * &a.adjoint())).scale(0.3);
        let ch = [LindbladChannel::new(&a * &a, 0.4).unwrap(), LindbladChannel::new(number_op(dim).unwrap(), 0.1).unwrap()];
        let rho0 = crate::hilbert::coherent_state(Complex64::new(1.1, 0.4), dim).unwrap().to_density();
        let p0 = observables::parity_expect(&rho0);
        let grid: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let opts = EvolveOptions { observables: vec![Observable::Parity], ..Default::default() };
        let traj = evolve(&rho0, &h, &ch, &grid, &opts).unwrap();
        for p in traj.series("parity").unwrap() {
            assert!((p - p0).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let h = number_op(3).unwrap();
        let rho0 = fock_state(0, 3).unwrap().to_density();
        assert!(evolve(&rho0, &h, &[], &[0.5, 1.0], &EvolveOptions::default()).is_err());
        assert!(evolve(&rho0, &h, &[], &[0.0, 1.0, 1.0], &EvolveOptions::default()).is_err());
    }
}
