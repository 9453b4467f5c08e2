//! Scalar diagnostics of density matrices.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{DensityMatrix, FockOperator, NEGATIVE_EIGEN_TOL};
use crate::linalg::{self, CMat};

/// Eigenvalues below this contribute nothing to the entropy.
pub const ENTROPY_CLIP: f64 = 1e-14;

fn same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Re Tr(rho H).
pub fn energy(rho: &DensityMatrix, h: &FockOperator) -> Result<f64> {
    same_dim(rho.dim(), h.dim())?;
    let tr = trace_product(rho.matrix(), h.matrix());
    debug_assert!(tr.im.abs() < 1e-10 * (1.0 + tr.re.abs()), "Tr(rho H) has imaginary part {}", tr.im);
    Ok(tr.re)
}

pub(crate) fn energy_matrix(rho: &CMat, h: &CMat) -> f64 {
    trace_product(rho, h).re
}

/// Tr(A B) without forming the product.
fn trace_product(a: &CMat, b: &CMat) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// -sum lambda ln lambda over the spectrum, in nats.
pub fn entropy(rho: &DensityMatrix) -> Result<f64> {
    entropy_from_eigenvalues(&rho.eigenvalues()?)
}

pub(crate) fn entropy_from_eigenvalues(eigs: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for &l in eigs {
        if l < -NEGATIVE_EIGEN_TOL {
            return Err(Error::InvalidState(format!("eigenvalue {l:e} below tolerance")));
        }
        if l > ENTROPY_CLIP {
            s -= l * l.ln();
        }
    }
    Ok(s.max(0.0))
}

/// Entropy ignoring eigenvalues below the clip, whatever their sign.
pub(crate) fn entropy_from_clipped(eigs: &[f64]) -> f64 {
    eigs.iter().filter(|&&l| l > ENTROPY_CLIP).map(|&l| -l * l.ln()).sum::<f64>().max(0.0)
}

/// Tr(rho^2).
pub fn purity(rho: &DensityMatrix) -> f64 {
    // Tr(rho rho) = sum |rho_ij|^2 for Hermitian rho.
    rho.matrix().iter().map(|z| z.norm_sqr()).sum()
}

/// Re Tr(rho Pi) with Pi = (-1)^n.
pub fn parity_expect(rho: &DensityMatrix) -> f64 {
    (0..rho.dim()).map(|n| if n % 2 == 0 { rho.matrix()[(n, n)].re } else { -rho.matrix()[(n, n)].re }).sum()
}

/// Half the trace norm of the difference, from singular values.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let diff = a.matrix() - b.matrix();
    Ok(0.5 * linalg::singular_values(&diff)?.iter().sum::<f64>())
}

fn psd_sqrt(m: &CMat) -> Result<CMat> {
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, vecs) = linalg::hermitian_eigen(&herm)?;
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = Complex64::new(v.max(0.0).sqrt(), 0.0);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= s;
        }
    }
    Ok(linalg::mul(&scaled, &vecs.adjoint()))
}

/// Uhlmann fidelity `(Tr |sqrt(rho1) sqrt(rho2)|)^2`, in [0, 1].
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    same_dim(a.dim(), b.dim())?;
    let prod = linalg::mul(&psd_sqrt(a.matrix())?, &psd_sqrt(b.matrix())?);
    let f = linalg::singular_values(&prod)?.iter().sum::<f64>();
    Ok((f * f).min(1.0))
}
