//! Lindblad master equation: channels, the generator, time evolution and steady states.
//!
//! `drho/dt = -i[H, rho] + sum_j r_j (L_j rho L_j^dag - 1/2 {L_j^dag L_j, rho})`
//!
//! Superoperators act on column-stacked density matrices: `vec(rho)[i + N j] = rho[i, j]`.

mod integrate;
mod liouvillian;
mod steady;

pub use integrate::{evolve, evolve_generator, Diagnostics, EvolveOptions, Method, Observable, Trajectory};
pub use liouvillian::{liouvillian_matrix, parity_sectors, Liouvillian};
pub use steady::{steady_state, SteadyMethod, SteadyOptions, SteadyState};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, FockOperator};
use crate::linalg::{self, CMat, ONE, ZERO};

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladChannel {
    operator: FockOperator,
    rate: f64,
}

impl LindbladChannel {
    pub fn new(operator: FockOperator, rate: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter { name: "rate", reason: format!("must be nonnegative, got {rate}") });
        }
        Ok(Self { operator, rate })
    }

    pub fn operator(&self) -> &FockOperator {
        &self.operator
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dim(&self) -> usize {
        self.operator.dim()
    }
}

fn check_shape(expected: usize, m: &CMat) -> Result<()> {
    if m.nrows() != expected {
        return Err(Error::DimensionMismatch { expected, found: m.nrows() });
    }
    if m.ncols() != expected {
        return Err(Error::DimensionMismatch { expected, found: m.ncols() });
    }
    Ok(())
}

/// `rate (L rho L^dag - 1/2 {L^dag L, rho})`.
pub fn dissipator_apply(channel: &LindbladChannel, rho: &CMat) -> Result<CMat> {
    check_shape(channel.dim(), rho)?;
    let l = channel.operator.matrix();
    let ld = l.adjoint();
    let ldl = linalg::mul(&ld, l);
    let mut out = linalg::mul(&linalg::mul(l, rho), &ld);
    let half = Complex64::new(-0.5, 0.0);
    linalg::gemm_into(&mut out, &ldl, rho, half, true);
    linalg::gemm_into(&mut out, rho, &ldl, half, true);
    Ok(out * Complex64::new(channel.rate, 0.0))
}

/// Column-compressed sparse copy of a jump operator.
#[derive(Clone, Debug)]
pub(crate) struct SparseCols {
    /// `cols[k]` lists `(row, value)` for the nonzeros in column k.
    pub cols: Vec<Vec<(usize, Complex64)>>,
}

impl SparseCols {
    fn from_dense(m: &CMat) -> Self {
        let cols = (0..m.ncols())
            .map(|k| (0..m.nrows()).filter(|&i| m[(i, k)] != ZERO).map(|i| (i, m[(i, k)])).collect())
            .collect();
        Self { cols }
    }

    fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        self.cols.iter().enumerate().flat_map(|(k, c)| c.iter().map(move |&(i, v)| (i, k, v)))
    }
}

/// Precomputed form of the master-equation right-hand side.
///
/// `H_eff = H - i/2 sum r L^dag L` so that `L[rho] = -i (H_eff rho - rho H_eff^dag) + sum r L rho L^dag`.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    h: CMat,
    heff: CMat,
    jumps: Vec<(f64, SparseCols)>,
    norm_bound: f64,
}

impl Generator {
    pub fn new(h: &FockOperator, channels: &[LindbladChannel]) -> Result<Self> {
        h.check_hermitian()?;
        let dim = h.dim();
        let mut heff = h.matrix().clone();
        let mut jumps = Vec::with_capacity(channels.len());
        let mut bound = 2.0 * spectral_norm(h.matrix())?;
        for ch in channels {
            if ch.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ch.dim() });
            }
            if ch.rate == 0.0 {
                continue;
            }
            let l = ch.operator.matrix();
            let ldl = linalg::mul(&l.adjoint(), l);
            heff -= ldl * Complex64::new(0.0, 0.5 * ch.rate);
            bound += 2.0 * ch.rate * spectral_norm(l)?.powi(2);
            jumps.push((ch.rate, SparseCols::from_dense(l)));
        }
        Ok(Self { dim, h: h.matrix().clone(), heff, jumps, norm_bound: bound })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hamiltonian(&self) -> &CMat {
        &self.h
    }

    pub fn has_channels(&self) -> bool {
        !self.jumps.is_empty()
    }

    /// Upper bound on the induced Frobenius norm of the generator: `2||H|| + sum 2 r ||L||^2`.
    pub fn norm_bound(&self) -> f64 {
        self.norm_bound
    }

    pub(crate) fn heff(&self) -> &CMat {
        &self.heff
    }

    pub(crate) fn jumps(&self) -> &[(f64, SparseCols)] {
        &self.jumps
    }

    /// Applies the generator to an arbitrary (not necessarily Hermitian) matrix.
    pub fn apply(&self, rho: &CMat) -> CMat {
        let mut out = CMat::zeros(self.dim, self.dim);
        linalg::gemm_into(&mut out, &self.heff, rho, -linalg::I, false);
        let heff_dag = self.heff.adjoint();
        linalg::gemm_into(&mut out, rho, &heff_dag, linalg::I, true);
        let mut scratch = CMat::zeros(self.dim, self.dim);
        self.add_jumps(rho, &mut out, &mut scratch);
        out
    }

    /// Applies the generator to a Hermitian matrix using one dense product. The result is
    /// projected onto Hermitian matrices.
    pub(crate) fn apply_hermitian_into(&self, rho: &CMat, out: &mut CMat, y: &mut CMat, scratch: &mut CMat) {
        let n = self.dim;
        linalg::gemm_into(y, &self.heff, rho, ONE, false);
        // -i (Y - Y^dag)
        for j in 0..n {
            for i in 0..n {
                let d = y[(i, j)] - y[(j, i)].conj();
                out[(i, j)] = Complex64::new(d.im, -d.re);
            }
        }
        self.add_jumps(rho, out, scratch);
        // Without this the anti-Hermitian rounding part of rho would see the jump terms
        // but not the matching decay, and grow.
        for j in 0..n {
            out[(j, j)].im = 0.0;
            for i in 0..j {
                let m = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = m;
                out[(j, i)] = m.conj();
            }
        }
    }

    fn add_jumps(&self, rho: &CMat, out: &mut CMat, t: &mut CMat) {
        let n = self.dim;
        for (rate, l) in &self.jumps {
            // t = L rho
            t.fill(ZERO);
            for (i, j, v) in l.triplets() {
                for c in 0..n {
                    t[(i, c)] += v * rho[(j, c)];
                }
            }
            // out += rate * t L^dag, (t L^dag)[:, k] = sum_l t[:, l] conj(L[k, l])
            for (k, lc, w) in l.triplets() {
                let f = w.conj() * *rate;
                out.column_mut(k).axpy(f, &t.column(lc), ONE);
            }
        }
    }

    /// True when H is parity-even and every jump operator has definite parity, so the
    /// superoperator does not mix the `(i + j)` even and odd index sets.
    pub fn parity_block_diagonal(&self) -> bool {
        let scale = linalg::max_abs(&self.h).max(f64::MIN_POSITIVE);
        let n = self.dim;
        for j in 0..n {
            for i in 0..n {
                if (i + j) % 2 == 1 && self.h[(i, j)].norm() > 1e-12 * scale {
                    return false;
                }
            }
        }
        self.jumps.iter().all(|(_, l)| {
            let mut parity = None;
            l.triplets().all(|(i, k, _)| {
                let p = (i + k) % 2;
                *parity.get_or_insert(p) == p
            })
        })
    }
}

fn spectral_norm(m: &CMat) -> Result<f64> {
    Ok(linalg::singular_values(m)?.first().copied().unwrap_or(0.0))
}

/// Frobenius norm of `L[rho]`.
pub fn residual_norm(rho: &CMat, h: &FockOperator, channels: &[LindbladChannel]) -> Result<f64> {
    let gen = Generator::new(h, channels)?;
    check_shape(gen.dim, rho)?;
    Ok(linalg::frobenius(&gen.apply(rho)))
}

/// Traces out the probe factor of a signal (x) probe state.
pub fn partial_trace_signal(rho: &DensityMatrix, dim_a: usize, dim_b: usize) -> Result<DensityMatrix> {
    partial_trace_signal_matrix(rho.matrix(), dim_a, dim_b).and_then(DensityMatrix::from_matrix_unchecked)
}

pub(crate) fn partial_trace_signal_matrix(rho: &CMat, dim_a: usize, dim_b: usize) -> Result<CMat> {
    check_shape(dim_a * dim_b, rho)?;
    Ok(CMat::from_fn(dim_a, dim_a, |i, k| (0..dim_b).map(|j| rho[(i * dim_b + j, k * dim_b + j)]).sum()))
}
