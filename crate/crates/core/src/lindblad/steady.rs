use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{fock_state, DensityMatrix, FockOperator};
use crate::linalg::{self, CMat, CVec, ZERO};

use super::liouvillian::{parity_sectors, superoperator_block};
use super::{evolve_generator, EvolveOptions, Generator, LindbladChannel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Algebraic solve, falling back to the propagator when the null space is degenerate.
    #[default]
    Auto,
    /// Null-space solve of the superoperator with the trace constraint.
    Algebraic,
    /// Long-time integration with the Runge-Kutta integrator.
    Evolve,
    /// Long-time propagation by a matrix exponential of the superoperator, squared repeatedly.
    Propagator,
}

#[derive(Clone, Debug)]
pub struct SteadyOptions {
    pub method: SteadyMethod,
    /// Start of the long-time paths; defaults to the vacuum.
    pub initial: Option<DensityMatrix>,
    /// Accept when `||L[rho]||_F <= tolerance * norm_bound`.
    pub tolerance: f64,
    /// Time budget for the long-time paths.
    pub t_max: f64,
    /// Residual check interval for the integrator path.
    pub chunk: f64,
    pub evolve: EvolveOptions,
    /// Pivots below `null_tol * max pivot` count toward the null space.
    pub null_tol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            method: SteadyMethod::Auto,
            initial: None,
            tolerance: 1e-9,
            t_max: 1e9,
            chunk: 10.0,
            evolve: EvolveOptions { keep_states: false, ..EvolveOptions::default() },
            null_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// `||L[rho]||_F`
    pub residual: f64,
    /// The bound the residual is measured against.
    pub norm_bound: f64,
    pub method: SteadyMethod,
    /// Evolution time reached by the long-time paths.
    pub time_reached: Option<f64>,
    /// Numerically detected null-space dimension (algebraic path only).
    pub null_dimension: Option<usize>,
}

pub fn steady_state(h: &FockOperator, channels: &[LindbladChannel], options: &SteadyOptions) -> Result<SteadyState> {
    let gen = Generator::new(h, channels)?;
    if !gen.has_channels() {
        return Err(Error::NoChannels);
    }
    match options.method {
        SteadyMethod::Algebraic => algebraic(&gen, options),
        SteadyMethod::Evolve => by_evolution(&gen, options),
        SteadyMethod::Propagator => by_propagator(&gen, options),
        SteadyMethod::Auto => match algebraic(&gen, options) {
            Err(Error::DegenerateNullSpace { dim }) => {
                log::info!("null space of dimension {dim}; using the propagator from the initial state");
                by_propagator(&gen, options)
            }
            other => other,
        },
    }
}

fn sectors(gen: &Generator) -> Vec<Vec<usize>> {
    let n = gen.dim();
    if gen.parity_block_diagonal() {
        parity_sectors(n).into_iter().collect()
    } else {
        vec![(0..n * n).collect()]
    }
}

fn initial_state(gen: &Generator, options: &SteadyOptions) -> Result<DensityMatrix> {
    match &options.initial {
        Some(rho) if rho.dim() != gen.dim() => Err(Error::DimensionMismatch { expected: gen.dim(), found: rho.dim() }),
        Some(rho) => Ok(rho.clone()),
        None => Ok(fock_state(0, gen.dim())?.to_density()),
    }
}

fn finish(gen: &Generator, raw: CMat, method: SteadyMethod, time: Option<f64>, null: Option<usize>, options: &SteadyOptions) -> Result<SteadyState> {
    let tr = linalg::trace(&raw);
    let mut m = raw / Complex64::new(tr.re, 0.0);
    // Remove the anti-Hermitian rounding left by the linear algebra.
    m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let residual = linalg::frobenius(&gen.apply(&m));
    let bound = gen.norm_bound();
    if residual > options.tolerance * bound {
        return Err(Error::NonConvergence(format!(
            "residual {residual:e} above {:e} ({method:?})",
            options.tolerance * bound
        )));
    }
    let rho = DensityMatrix::new(m)?;
    Ok(SteadyState { rho, residual, norm_bound: bound, method, time_reached: time, null_dimension: null })
}

fn algebraic(gen: &Generator, options: &SteadyOptions) -> Result<SteadyState> {
    let n = gen.dim();
    let secs = sectors(gen);
    let mut null = 0;
    let mut blocks = Vec::with_capacity(secs.len());
    for idx in &secs {
        let block = superoperator_block(gen, idx);
        let piv = linalg::full_pivot_diagonal(&block);
        let top = piv.iter().cloned().fold(0.0, f64::max);
        null += piv.iter().filter(|&&p| p <= options.null_tol * top).count();
        blocks.push(block);
    }
    if null > 1 {
        return Err(Error::DegenerateNullSpace { dim: null });
    }
    // The trace lives in the first index set; the others carry no stationary weight.
    let idx = &secs[0];
    let mut block = blocks.swap_remove(0);
    let anchor = idx.iter().position(|&q| q == 0).expect("diagonal in first sector");
    for (col, &q) in idx.iter().enumerate() {
        let (i, j) = (q % n, q / n);
        block[(anchor, col)] = if i == j { linalg::ONE } else { ZERO };
    }
    let mut rhs = CMat::zeros(idx.len(), 1);
    rhs[(anchor, 0)] = linalg::ONE;
    let x = linalg::solve(&block, &rhs);
    let mut raw = CMat::zeros(n, n);
    for (p, &q) in idx.iter().enumerate() {
        raw[(q % n, q / n)] = x[(p, 0)];
    }
    finish(gen, raw, SteadyMethod::Algebraic, None, Some(null), options)
}

fn by_evolution(gen: &Generator, options: &SteadyOptions) -> Result<SteadyState> {
    let mut rho = initial_state(gen, options)?;
    let threshold = options.tolerance * gen.norm_bound();
    let mut t = 0.0;
    while t < options.t_max {
        let dt = options.chunk.min(options.t_max - t);
        let traj = evolve_generator(gen, &rho, &[0.0, dt], &options.evolve)?;
        rho = traj.states.last().cloned().expect("final state");
        t += dt;
        if linalg::frobenius(&gen.apply(rho.matrix())) <= threshold {
            return finish(gen, rho.into_matrix(), SteadyMethod::Evolve, Some(t), None, options);
        }
    }
    Err(Error::NonConvergence(format!("residual above {threshold:e} at t = {t}")))
}

/// Propagates each invariant index set with P = exp(tau B), then P^2, P^4, ..., so the
/// evolution time doubles per product. Stops once the residual is below tolerance and an
/// extra doubling changes the state by less than 1e-12, or stops contracting below 1e-9.
fn by_propagator(gen: &Generator, options: &SteadyOptions) -> Result<SteadyState> {
    let n = gen.dim();
    let rho0 = initial_state(gen, options)?;
    let threshold = options.tolerance * gen.norm_bound();
    let mut parts = Vec::new();
    for idx in sectors(gen) {
        let v: Vec<Complex64> = idx.iter().map(|&q| rho0.matrix()[(q % n, q / n)]).collect();
        if v.iter().all(|z| *z == ZERO) {
            continue;
        }
        let block = superoperator_block(gen, &idx);
        parts.push((idx, block, CVec::from_vec(v)));
    }
    // One time unit per first step; expm handles large norms by scaling and squaring.
    let tau = 1.0;
    let mut props: Vec<CMat> = parts.iter().map(|(_, b, _)| linalg::expm(&(b * Complex64::new(tau, 0.0)))).collect();
    let mut t = 0.0;
    let mut step = tau;
    let assemble = |parts: &[(Vec<usize>, CMat, CVec)]| {
        let mut raw = CMat::zeros(n, n);
        for (idx, _, v) in parts {
            for (p, &q) in idx.iter().enumerate() {
                raw[(q % n, q / n)] = v[p];
            }
        }
        raw
    };
    let mut prev = assemble(&parts);
    let mut last_change = f64::INFINITY;
    loop {
        for ((_, _, v), p) in parts.iter_mut().zip(&props) {
            *v = p * &*v;
        }
        t += step;
        let raw = assemble(&parts);
        let tr = linalg::trace(&raw).re;
        let cur = &raw / Complex64::new(tr, 0.0);
        let residual = linalg::frobenius(&gen.apply(&cur));
        let change = linalg::frobenius(&(&cur - &prev));
        prev = cur;
        if residual <= threshold {
            // Squaring also squares the rounding in P, so the change can stall above 1e-12.
            let stalled = change < 1e-9 && change >= last_change;
            if change < 1e-12 || stalled {
                if stalled {
                    log::debug!("propagator change stalled at {change:e} (t = {t:e})");
                }
                return finish(gen, raw, SteadyMethod::Propagator, Some(t), None, options);
            }
        }
        last_change = change;
        if t >= options.t_max {
            return Err(Error::NonConvergence(format!("residual {residual:e} at t = {t:e}")));
        }
        for p in props.iter_mut() {
            *p = linalg::mul(p, p);
        }
        step *= 2.0;
    }
}
