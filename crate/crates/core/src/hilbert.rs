//! Truncated Fock-space operators and states.
//!
//! Everything is dense and built exactly in the truncated basis, so the canonical
//! commutator `[a, a^dag] = I` fails in the last diagonal entry.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, ONE, ZERO};

/// Relative Hermiticity tolerance used when an operator is asserted Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FockOperator {
    entries: CMat,
}

impl FockOperator {
    pub fn new(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidDimension { dim: 0, reason: "operator must be non-empty".into() });
        }
        Ok(Self { entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { entries: CMat::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { entries: CMat::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint() }
    }

    /// max|M - M^dag|.
    pub fn hermitian_deviation(&self) -> f64 {
        linalg::hermitian_deviation(&self.entries)
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian_deviation() <= HERMITIAN_TOL * linalg::max_abs(&self.entries).max(f64::MIN_POSITIVE)
    }

    /// Errors unless the operator is Hermitian within the relative tolerance.
    pub fn check_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian { deviation: self.hermitian_deviation() })
        }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self { entries: linalg::commutator(&self.entries, &other.entries) }
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { entries: linalg::kron(&self.entries, &other.entries) }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.dim());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn scale(&self, s: impl Into<Complex64>) -> Self {
        Self { entries: &self.entries * s.into() }
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    pub fn apply(&self, v: &StateVector) -> CVec {
        &self.entries * &v.amplitudes
    }

    pub fn expect(&self, v: &StateVector) -> Complex64 {
        v.amplitudes.dotc(&(&self.entries * &v.amplitudes))
    }
}

impl<'a> Add<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn add(self, rhs: &FockOperator) -> FockOperator {
        FockOperator { entries: &self.entries + &rhs.entries }
    }
}

impl<'a> Sub<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn sub(self, rhs: &FockOperator) -> FockOperator {
        FockOperator { entries: &self.entries - &rhs.entries }
    }
}

impl<'a> Mul<&'a FockOperator> for &'a FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: &FockOperator) -> FockOperator {
        FockOperator { entries: linalg::mul(&self.entries, &rhs.entries) }
    }
}

impl Mul<f64> for &FockOperator {
    type Output = FockOperator;
    fn mul(self, rhs: f64) -> FockOperator {
        self.scale(rhs)
    }
}

impl Neg for &FockOperator {
    type Output = FockOperator;
    fn neg(self) -> FockOperator {
        FockOperator { entries: -&self.entries }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: CVec,
}

impl StateVector {
    /// Normalizes the given amplitudes.
    pub fn new(amplitudes: CVec) -> Result<Self> {
        let norm = amplitudes.norm();
        if amplitudes.is_empty() {
            return Err(Error::InvalidDimension { dim: 0, reason: "state must be non-empty".into() });
        }
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidState(format!("state vector has norm {norm}")));
        }
        Ok(Self { amplitudes: amplitudes / Complex64::new(norm, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVec {
        &self.amplitudes
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { entries: &self.amplitudes * self.amplitudes.adjoint() }
    }
}

/// Density matrix with trace 1, Hermitian, and no eigenvalue below -1e-8.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMat,
}

pub const TRACE_TOL: f64 = 1e-9;
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-8;

impl DensityMatrix {
    /// Validates all invariants.
    pub fn new(entries: CMat) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(entries)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Divides by the trace, then validates.
    pub fn normalized(entries: CMat) -> Result<Self> {
        let tr = linalg::trace(&entries);
        if !(tr.re.abs() > 0.0) {
            return Err(Error::InvalidState(format!("trace {tr} cannot be normalized")));
        }
        Self::new(entries / Complex64::new(tr.re, 0.0))
    }

    /// Only the shape is checked.
    pub fn from_matrix_unchecked(entries: CMat) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch { expected: entries.nrows(), found: entries.ncols() });
        }
        if entries.nrows() == 0 {
            return Err(Error::InvalidDimension { dim: 0, reason: "density matrix must be non-empty".into() });
        }
        Ok(Self { entries })
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
        }
        let dev = linalg::hermitian_deviation(&self.entries);
        if dev > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:e})")));
        }
        let min = self.min_eigenvalue()?;
        if min < -NEGATIVE_EIGEN_TOL {
            return Err(Error::InvalidState(format!("eigenvalue {min:e} below tolerance")));
        }
        Ok(())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { entries: CMat::identity(dim, dim) / Complex64::new(dim as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.entries
    }

    pub fn into_matrix(self) -> CMat {
        self.entries
    }

    pub fn trace(&self) -> Complex64 {
        linalg::trace(&self.entries)
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let herm = (&self.entries + self.entries.adjoint()) * Complex64::new(0.5, 0.0);
        linalg::hermitian_eigenvalues(&herm)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    /// Convex combination `w * self + (1 - w) * other`.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Self { entries: &self.entries * Complex64::new(w, 0.0) + &other.entries * Complex64::new(1.0 - w, 0.0) })
    }
}

fn check_dim(dim: usize, min: usize) -> Result<()> {
    if dim < min {
        return Err(Error::InvalidDimension { dim, reason: format!("need dim >= {min}") });
    }
    Ok(())
}

/// `<n-1|a|n> = sqrt(n)`.
pub fn annihilation_op(dim: usize) -> Result<FockOperator> {
    check_dim(dim, 2)?;
    let mut m = CMat::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(FockOperator { entries: m })
}

pub fn creation_op(dim: usize) -> Result<FockOperator> {
    Ok(annihilation_op(dim)?.adjoint())
}

pub fn number_op(dim: usize) -> Result<FockOperator> {
    check_dim(dim, 1)?;
    Ok(diagonal(dim, |n| n as f64))
}

pub fn parity_op(dim: usize) -> Result<FockOperator> {
    check_dim(dim, 1)?;
    Ok(diagonal(dim, |n| if n % 2 == 0 { 1.0 } else { -1.0 }))
}

fn diagonal(dim: usize, f: impl Fn(usize) -> f64) -> FockOperator {
    let mut m = CMat::zeros(dim, dim);
    for n in 0..dim {
        m[(n, n)] = Complex64::new(f(n), 0.0);
    }
    FockOperator { entries: m }
}

pub fn fock_state(n: usize, dim: usize) -> Result<StateVector> {
    check_dim(dim, 1)?;
    if n >= dim {
        return Err(Error::OutOfRange { index: n, dim });
    }
    let mut v = CVec::zeros(dim);
    v[n] = ONE;
    Ok(StateVector { amplitudes: v })
}

/// Smallest dimension for which a coherent state of amplitude `alpha` is considered well truncated.
pub fn recommended_coherent_dim(alpha: Complex64) -> usize {
    let r = alpha.norm();
    (r * r + 5.0 * r + 10.0).ceil() as usize
}

fn coherent_amplitudes(alpha: Complex64, dim: usize) -> CVec {
    // Unnormalized: c_n = alpha^n / sqrt(n!). The Gaussian prefactor cancels on normalization.
    let mut v = CVec::zeros(dim);
    let mut c = ONE;
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        v[n] = c;
    }
    v
}

/// Truncated coherent state, renormalized. Logs a warning when `dim` is below the recommended size.
pub fn coherent_state(alpha: Complex64, dim: usize) -> Result<StateVector> {
    check_dim(dim, 1)?;
    let rec = recommended_coherent_dim(alpha);
    if dim < rec {
        log::warn!("coherent state |{alpha}> truncated at dim {dim} (recommended >= {rec})");
    }
    StateVector::new(coherent_amplitudes(alpha, dim))
}

/// Cat state (|alpha> + sign |-alpha>) / norm with `sign = +1` (even) or `-1` (odd).
pub fn cat_state(alpha: Complex64, even: bool, dim: usize) -> Result<StateVector> {
    check_dim(dim, 1)?;
    if alpha == ZERO && !even {
        return Err(Error::InvalidState("odd cat with alpha = 0 vanishes".into()));
    }
    let rec = recommended_coherent_dim(alpha);
    if dim < rec {
        log::warn!("cat state with alpha {alpha} truncated at dim {dim} (recommended >= {rec})");
    }
    let mut v = coherent_amplitudes(alpha, dim);
    for n in 0..dim {
        if (n % 2 == 1) == even {
            v[n] = ZERO;
        }
    }
    StateVector::new(v)
}

/// `f(M) = V f(D) V^dag` for Hermitian `M`.
pub fn hermitian_function(m: &FockOperator, f: impl Fn(f64) -> f64) -> Result<FockOperator> {
    m.check_hermitian()?;
    let herm = (&m.entries + m.entries.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, vecs) = linalg::hermitian_eigen(&herm)?;
    let mut scaled = vecs.clone();
    for (j, &lam) in vals.iter().enumerate() {
        let fl = Complex64::new(f(lam), 0.0);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= fl;
        }
    }
    let mut out = linalg::mul(&scaled, &vecs.adjoint());
    // Symmetrize away rounding so the result is Hermitian to machine precision.
    out = (&out + out.adjoint()) * Complex64::new(0.5, 0.0);
    Ok(FockOperator { entries: out })
}
