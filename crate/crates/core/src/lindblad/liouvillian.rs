use crate::error::Result;
use crate::hilbert::FockOperator;
use crate::linalg::{self, CMat};

use super::{Generator, LindbladChannel};

/// Dense N^2 x N^2 superoperator on column-stacked density matrices.
#[derive(Clone, Debug)]
pub struct Liouvillian {
    dim: usize,
    matrix: CMat,
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        let v = linalg::CVec::from_column_slice(rho.as_slice());
        let out = &self.matrix * v;
        CMat::from_column_slice(self.dim, self.dim, out.as_slice())
    }

    /// max_j |sum_i L[(i,i), j]|: deviation of the trace functional from a left null vector.
    pub fn trace_defect(&self) -> f64 {
        let n = self.dim;
        (0..n * n)
            .map(|col| (0..n).map(|i| self.matrix[(i + n * i, col)]).sum::<num_complex::Complex64>().norm())
            .fold(0.0, f64::max)
    }
}

/// `-i(I (x) H - H^T (x) I) + sum r [conj(L) (x) L - 1/2 I (x) L^dag L - 1/2 (L^dag L)^T (x) I]`.
pub fn liouvillian_matrix(h: &FockOperator, channels: &[LindbladChannel]) -> Result<Liouvillian> {
    let gen = Generator::new(h, channels)?;
    let n = gen.dim();
    let all: Vec<usize> = (0..n * n).collect();
    Ok(Liouvillian { dim: n, matrix: superoperator_block(&gen, &all) })
}

/// Vectorized indices `i + N j` split by the parity of `i + j`; the even set holds the diagonal.
pub fn parity_sectors(dim: usize) -> [Vec<usize>; 2] {
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for j in 0..dim {
        for i in 0..dim {
            if (i + j) % 2 == 0 {
                even.push(i + dim * j);
            } else {
                odd.push(i + dim * j);
            }
        }
    }
    [even, odd]
}

/// Restriction of the superoperator to the vectorized indices `idx`. Couplings to indices
/// outside `idx` are dropped, so `idx` must be an invariant subspace for the result to be exact.
pub(crate) fn superoperator_block(gen: &Generator, idx: &[usize]) -> CMat {
    let n = gen.dim();
    let mut pos = vec![usize::MAX; n * n];
    for (p, &q) in idx.iter().enumerate() {
        pos[q] = p;
    }
    // G = -i H_eff; L = I (x) G + conj(G) (x) I + sum r conj(L) (x) L
    let g = gen.heff() * (-linalg::I);
    let m = idx.len();
    let mut out = CMat::zeros(m, m);
    for (col, &q) in idx.iter().enumerate() {
        let (k, l) = (q % n, q / n);
        for i in 0..n {
            let r = pos[i + n * l];
            if r != usize::MAX {
                out[(r, col)] += g[(i, k)];
            }
        }
        for j in 0..n {
            let r = pos[k + n * j];
            if r != usize::MAX {
                out[(r, col)] += g[(j, l)].conj();
            }
        }
        for (rate, jl) in gen.jumps() {
            for &(i, vi) in &jl.cols[k] {
                for &(j, vj) in &jl.cols[l] {
                    let r = pos[i + n * j];
                    if r != usize::MAX {
                        out[(r, col)] += vi * vj.conj() * *rate;
                    }
                }
            }
        }
    }
    out
}
