//! Dense complex linear algebra helpers.
//!
//! Matrices are stored as `nalgebra::DMatrix<Complex64>` (column-major). Products,
//! factorizations and eigensolves are delegated to `faer` through zero-copy views,
//! which is several times faster than nalgebra's generic kernels at the sizes used here.

use faer::linalg::matmul::matmul;
use faer::linalg::solvers::Solve;
use faer::{Accum, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub(crate) fn view(m: &CMat) -> MatRef<'_, Complex64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn from_faer(m: MatRef<'_, Complex64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `dst = alpha * a * b`, or `dst += alpha * a * b` when `accumulate` is set.
pub fn gemm_into(dst: &mut CMat, a: &CMat, b: &CMat, alpha: Complex64, accumulate: bool) {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(dst.nrows(), a.nrows());
    assert_eq!(dst.ncols(), b.ncols());
    let (nr, nc) = (dst.nrows(), dst.ncols());
    let dview = faer::MatMut::from_column_major_slice_mut(dst.as_mut_slice(), nr, nc);
    let acc = if accumulate { Accum::Add } else { Accum::Replace };
    matmul(dview, acc, view(a), view(b), alpha, Par::Seq);
}

pub fn mul(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.ncols());
    gemm_into(&mut out, a, b, ONE, false);
    out
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximum absolute column sum.
pub fn norm1(m: &CMat) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// max |M - M^dag|.
pub fn hermitian_deviation(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut dev: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn trace(m: &CMat) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    let mut out = mul(a, b);
    gemm_into(&mut out, b, a, -ONE, true);
    out
}

/// Kronecker product with `a` acting on the left (slow) factor.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    CMat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors in columns.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let evd = view(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, from_faer(evd.U())))
}

pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    view(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("Hermitian eigensolver: {e:?}")))
}

/// Eigenvalues of a general square matrix (unordered).
pub fn eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    view(m)
        .eigenvalues()
        .map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))
}

/// Singular values in nonincreasing order.
pub fn singular_values(m: &CMat) -> Result<Vec<f64>> {
    view(m)
        .singular_values()
        .map_err(|e| Error::Numerical(format!("SVD: {e:?}")))
}

/// Solve `a x = b` with partial-pivoting LU.
pub fn solve(a: &CMat, b: &CMat) -> CMat {
    let lu = view(a).partial_piv_lu();
    let x = lu.solve(view(b));
    from_faer(x.as_ref())
}

/// Moduli of the diagonal of U in a full-pivoting LU, in pivot order.
pub fn full_pivot_diagonal(a: &CMat) -> Vec<f64> {
    let lu = view(a).full_piv_lu();
    let u = lu.U();
    (0..u.nrows().min(u.ncols())).map(|i| u[(i, i)].norm()).collect()
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// Matrix exponential by degree-13 Padé approximation with scaling and squaring.
pub fn expm(a: &CMat) -> CMat {
    let n = a.nrows();
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a * Complex64::new(0.5f64.powi(s), 0.0);
    let b = |k: usize| Complex64::new(PADE13[k], 0.0);
    let a2 = mul(&scaled, &scaled);
    let a4 = mul(&a2, &a2);
    let a6 = mul(&a4, &a2);
    let id = identity(n);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let mut u_poly = &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    gemm_into(&mut u_poly, &a6, &inner_u, ONE, true);
    let u = mul(&scaled, &u_poly);

    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let mut v = &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    gemm_into(&mut v, &a6, &inner_v, ONE, true);

    let mut r = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        r = mul(&r, &r);
    }
    r
}
