//! Wigner functions on phase-space grids, negativity and relative cattiness.
//!
//! Quadratures are dimensionless: x = (a + a^dag)/sqrt2, p = -i(a - a^dag)/sqrt2, with
//! hbar = 1 so that the Wigner function integrates to one over dx dp.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::DensityMatrix;
use crate::linalg::CMat;
use crate::models::CircuitParams;

pub const DEFAULT_POINTS: usize = 256;
pub const MIN_POINTS: usize = 16;

/// Recommended grid half-width for a state truncated at `dim`.
pub fn recommended_half_width(dim: usize) -> f64 {
    2.0 * ((dim as f64).sqrt() + 2.0)
}

/// Uniform grid; values are sampled at cell midpoints.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, points: usize) -> Self {
        Self { x_min: -half_width, x_max: half_width, nx: points, p_min: -half_width, p_max: half_width, np: points }
    }

    /// Half-width 2(sqrt(dim) + 2) with 256 points per axis.
    pub fn default_for_dim(dim: usize) -> Self {
        Self::square(recommended_half_width(dim), DEFAULT_POINTS)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < MIN_POINTS || self.np < MIN_POINTS {
            return Err(Error::InvalidGrid(format!("need at least {MIN_POINTS} points per axis, got {}x{}", self.nx, self.np)));
        }
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x_min, self.x_max) || !ok(self.p_min, self.p_max) {
            return Err(Error::InvalidGrid("ranges must be finite and ordered".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.np as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dp()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp()
    }

    /// Smallest distance from the origin to the grid boundary.
    pub fn half_width(&self) -> f64 {
        [-self.x_min, self.x_max, -self.p_min, self.p_max].into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Same extent with twice the points per axis.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx, np: 2 * self.np, ..*self }
    }
}

/// Affine maps from the dimensionless quadratures to the ring's flux and charge:
/// Phi = phi_x + flux_scale * x, Q = charge_scale * p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceAxes {
    pub phi_x: f64,
    pub flux_scale: f64,
    pub charge_scale: f64,
}

impl PhaseSpaceAxes {
    pub fn for_circuit(params: &CircuitParams) -> Self {
        Self {
            phi_x: params.external_flux_frac * crate::models::PHI0,
            flux_scale: params.phi_zp() * std::f64::consts::SQRT_2,
            charge_scale: params.q_zp() * std::f64::consts::SQRT_2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    /// Row-major in x: `values[i * np + j] = W(x_i, p_j)`.
    pub values: Vec<f64>,
    /// Set when the grid is narrower than the recommended half-width for the state's dimension.
    pub undersized: bool,
    pub axes: Option<PhaseSpaceAxes>,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        self.spec.cell_area()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.np + j]
    }

    /// sum W dx dp
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn with_axes(mut self, axes: PhaseSpaceAxes) -> Self {
        self.axes = Some(axes);
        self
    }

    /// Comment header with axis metadata, then one `x,p,W` row per grid point.
    pub fn to_csv(&self) -> String {
        let s = &self.spec;
        let mut out = String::with_capacity(64 * s.nx * s.np + 512);
        let _ = writeln!(out, "# wigner grid, dimensionless quadratures x=(a+a^dag)/sqrt2, p=-i(a-a^dag)/sqrt2");
        let _ = writeln!(
            out,
            "# nx={} np={} x_min={:.16e} x_max={:.16e} p_min={:.16e} p_max={:.16e} cell_area={:.16e}",
            s.nx,
            s.np,
            s.x_min,
            s.x_max,
            s.p_min,
            s.p_max,
            s.cell_area()
        );
        if let Some(a) = &self.axes {
            let _ = writeln!(out, "# flux_wb = {:.16e} + {:.16e} * x", a.phi_x, a.flux_scale);
            let _ = writeln!(out, "# charge_c = {:.16e} * p", a.charge_scale);
        }
        let _ = writeln!(out, "# undersized={}", self.undersized);
        out.push_str("x,p,W\n");
        for i in 0..s.nx {
            let x = s.x(i);
            for j in 0..s.np {
                let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", x, s.p(j), self.at(i, j));
            }
        }
        out
    }
}

/// Per-state tables for the displaced-parity sum.
struct Kernel {
    n: usize,
    /// ln k!
    ln_fact: Vec<f64>,
    /// `diag[k][m] = (-1)^m rho_{m, m+k}`
    diag: Vec<Vec<Complex64>>,
    /// `inv[k][m] = 1 / sqrt((m+1)(m+k+1))`
    inv: Vec<Vec<f64>>,
    /// `root[k][m] = sqrt(m (m+k))`
    root: Vec<Vec<f64>>,
}

impl Kernel {
    fn new(rho: &CMat) -> Self {
        let n = rho.nrows();
        let mut ln_fact = vec![0.0; n + 1];
        for k in 1..=n {
            ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
        }
        let diag = (0..n)
            .map(|k| (0..n - k).map(|m| if m % 2 == 0 { rho[(m, m + k)] } else { -rho[(m, m + k)] }).collect())
            .collect();
        let inv = (0..n).map(|k| (0..n - k).map(|m| 1.0 / (((m + 1) * (m + k + 1)) as f64).sqrt()).collect()).collect();
        let root = (0..n).map(|k| (0..n - k).map(|m| ((m * (m + k)) as f64).sqrt()).collect()).collect();
        Self { n, ln_fact, diag, inv, root }
    }

    /// W(x, p) = (1/pi) [S_0 + 2 Re sum_{k>=1} e^{ik theta} S_k] with
    /// S_k = sum_m rho_{m,m+k} (-1)^m e^{-B/2} B^{k/2} sqrt(m!/(m+k)!) L_m^k(B), B = 2(x^2 + p^2).
    ///
    /// LANES points are advanced together so the recurrences overlap.
    fn eval_lanes(&self, pts: &[(f64, f64); LANES]) -> [f64; LANES] {
        const BIG: f64 = 1e100;
        let n = self.n;
        let mut b = [0.0; LANES];
        let mut ln_b = [0.0; LANES];
        let mut unit = [Complex64::new(1.0, 0.0); LANES];
        for l in 0..LANES {
            let (x, p) = pts[l];
            let r2 = x * x + p * p;
            b[l] = 2.0 * r2;
            if r2 > 0.0 {
                ln_b[l] = b[l].ln();
                unit[l] = Complex64::new(x, p) / r2.sqrt();
            }
        }
        let mut phase = [Complex64::new(1.0, 0.0); LANES];
        let mut total = [0.0; LANES];
        for k in 0..n {
            if k > 0 {
                for l in 0..LANES {
                    phase[l] *= unit[l];
                }
            }
            let (diag, inv, root) = (&self.diag[k], &self.inv[k], &self.root[k]);
            let kf = k as f64;
            // h_m = sqrt(k!) sqrt(m!/(m+k)!) L_m^k(B); the remaining factor is kept as a logarithm.
            let mut h_prev = [0.0; LANES];
            let mut h = [1.0; LANES];
            let mut s_re = [diag[0].re; LANES];
            let mut s_im = [diag[0].im; LANES];
            let mut log_scale = [0.0; LANES];
            let steps = root[..n - k - 1].iter().zip(&inv[..n - k - 1]).zip(&diag[1..n - k]);
            for (mm, ((&r, &q), &d)) in steps.enumerate() {
                let c0 = (2 * mm + 1) as f64 + kf;
                let mut big = false;
                for l in 0..LANES {
                    let next = ((c0 - b[l]) * h[l] - r * h_prev[l]) * q;
                    h_prev[l] = h[l];
                    h[l] = next;
                    big |= next.abs() > BIG;
                }
                if big {
                    for l in 0..LANES {
                        if h[l].abs() > BIG {
                            h[l] /= BIG;
                            h_prev[l] /= BIG;
                            s_re[l] /= BIG;
                            s_im[l] /= BIG;
                            log_scale[l] += BIG.ln();
                        }
                    }
                }
                for l in 0..LANES {
                    s_re[l] += d.re * h[l];
                    s_im[l] += d.im * h[l];
                }
            }
            for l in 0..LANES {
                if k > 0 && b[l] == 0.0 {
                    continue;
                }
                let radial = if k == 0 { 0.0 } else { 0.5 * kf * ln_b[l] };
                let scale = (log_scale[l] - 0.5 * b[l] + radial - 0.5 * self.ln_fact[k]).exp();
                let s = Complex64::new(s_re[l], s_im[l]) * scale;
                total[l] += if k == 0 { s.re } else { 2.0 * (phase[l] * s).re };
            }
        }
        total.map(|t| t / std::f64::consts::PI)
    }

    fn eval_many(&self, pts: &[(f64, f64)]) -> Vec<f64> {
        let mut out = Vec::with_capacity(pts.len());
        for chunk in pts.chunks(LANES) {
            let mut lanes = [(1.0, 0.0); LANES];
            lanes[..chunk.len()].copy_from_slice(chunk);
            out.extend_from_slice(&self.eval_lanes(&lanes)[..chunk.len()]);
        }
        out
    }
}

const LANES: usize = 16;

fn check_state(rho: &DensityMatrix) -> Result<()> {
    if rho.dim() == 0 {
        return Err(Error::InvalidDimension { dim: 0, reason: "empty state".into() });
    }
    Ok(())
}

/// Wigner function at arbitrary points.
pub fn wigner_points(rho: &DensityMatrix, points: &[(f64, f64)]) -> Result<Vec<f64>> {
    check_state(rho)?;
    let kernel = Kernel::new(rho.matrix());
    Ok(points.par_chunks(LANES).flat_map_iter(|c| kernel.eval_many(c)).collect())
}

pub fn wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    check_state(rho)?;
    spec.validate()?;
    let undersized = spec.half_width() < recommended_half_width(rho.dim()) - 1e-12;
    let kernel = Kernel::new(rho.matrix());
    let values: Vec<f64> = (0..spec.nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = spec.x(i);
            let row: Vec<(f64, f64)> = (0..spec.np).map(|j| (x, spec.p(j))).collect();
            kernel.eval_many(&row)
        })
        .collect();
    Ok(WignerGrid { spec: *spec, values, undersized, axes: None })
}

/// N = 1/2 sum (|W| - W) dx dp.
pub fn negativity(w: &WignerGrid) -> f64 {
    0.5 * w.values.iter().map(|&v| v.abs() - v).sum::<f64>() * w.cell_area()
}

/// N(rho) / N(rho_ref) on the same grid.
pub fn cattiness(rho: &DensityMatrix, rho_ref: &DensityMatrix, spec: &GridSpec) -> Result<f64> {
    let n_ref = negativity(&wigner(rho_ref, spec)?);
    cattiness_with_reference(rho, n_ref, spec)
}

/// Reference negativities at or below this are rounding noise of a nonnegative W.
pub const REFERENCE_FLOOR: f64 = 1e-12;

/// Cattiness against a precomputed reference negativity.
pub fn cattiness_with_reference(rho: &DensityMatrix, reference_negativity: f64, spec: &GridSpec) -> Result<f64> {
    if !(reference_negativity > REFERENCE_FLOOR) {
        return Err(Error::UndefinedReference);
    }
    Ok(negativity(&wigner(rho, spec)?) / reference_negativity)
}

/// W sampled at `n` evenly spaced points on the segment from `from` to `to`, endpoints included.
pub fn line_cut(rho: &DensityMatrix, from: (f64, f64), to: (f64, f64), n: usize) -> Result<Vec<f64>> {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            (from.0 + s * (to.0 - from.0), from.1 + s * (to.1 - from.1))
        })
        .collect();
    wigner_points(rho, &pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{cat_state, coherent_state, fock_state};
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn vacuum_is_gaussian() {
        let rho = fock_state(0, 6).unwrap().to_density();
        let spec = GridSpec::square(4.0, 20);
        let w = wigner(&rho, &spec).unwrap();
        for i in 0..spec.nx {
            for j in 0..spec.np {
                let (x, p) = (spec.x(i), spec.p(j));
                assert!((w.at(i, j) - (-(x * x + p * p)).exp() / PI).abs() < 1e-12);
            }
        }
        assert!((wigner_points(&rho, &[(0.0, 0.0)]).unwrap()[0] - 1.0 / PI).abs() < 1e-15);
        assert_eq!(negativity(&w), 0.0);
    }

    #[test]
    fn single_photon_center_and_profile() {
        let rho = fock_state(1, 5).unwrap().to_density();
        let pts = [(0.0, 0.0), (0.7, -0.2), (1.3, 0.9)];
        let w = wigner_points(&rho, &pts).unwrap();
        for (&(x, p), v) in pts.iter().zip(&w) {
            let r2 = x * x + p * p;
            let want = -(1.0 - 2.0 * r2) * (-r2).exp() / PI;
            assert!((v - want).abs() < 1e-14);
        }
    }

    #[test]
    fn coherent_state_is_displaced_gaussian() {
        let alpha = Complex64::new(1.2, -0.5);
        let rho = coherent_state(alpha, 40).unwrap().to_density();
        let (x0, p0) = (alpha.re * 2f64.sqrt(), alpha.im * 2f64.sqrt());
        let pts = [(x0, p0), (x0 + 0.4, p0 - 0.3), (0.0, 0.0)];
        let w = wigner_points(&rho, &pts).unwrap();
        for (&(x, p), v) in pts.iter().zip(&w) {
            let want = (-((x - x0).powi(2) + (p - p0).powi(2))).exp() / PI;
            assert!((v - want).abs() < 1e-10, "{v} vs {want}");
        }
    }

    #[test]
    fn cat_interference_sign() {
        let even = cat_state(c(2.0), true, 40).unwrap().to_density();
        let odd = cat_state(c(2.0), false, 40).unwrap().to_density();
        assert!(wigner_points(&even, &[(0.0, 0.0)]).unwrap()[0] > 0.0);
        assert!(wigner_points(&odd, &[(0.0, 0.0)]).unwrap()[0] < 0.0);
    }

    #[test]
    fn far_field_stays_finite() {
        let rho = cat_state(c(3.0), true, 60).unwrap().to_density();
        let v = wigner_points(&rho, &[(40.0, 35.0), (19.0, -19.0)]).unwrap();
        assert!(v.iter().all(|w| w.is_finite() && w.abs() < 1e-20));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::square(3.0, 8).validate().is_err());
        let bad = GridSpec { x_min: 1.0, x_max: -1.0, ..GridSpec::square(3.0, 32) };
        assert!(bad.validate().is_err());
        let rho = fock_state(0, 30).unwrap().to_density();
        let w = wigner(&rho, &GridSpec::square(3.0, 16)).unwrap();
        assert!(w.undersized);
    }

    #[test]
    fn cattiness_examples() {
        let spec = GridSpec::square(6.0, 64);
        let cat = cat_state(c(1.5), false, 30).unwrap().to_density();
        assert_eq!(cattiness(&cat, &cat, &spec).unwrap(), 1.0);
        let coh = coherent_state(c(1.0), 30).unwrap().to_density();
        assert!(cattiness(&coh, &cat, &spec).unwrap() < 1e-9);
        assert!(matches!(cattiness(&cat, &coh, &spec), Err(Error::UndefinedReference)));
    }

    #[test]
    fn csv_layout() {
        let rho = fock_state(0, 4).unwrap().to_density();
        let w = wigner(&rho, &GridSpec::square(4.0, 16)).unwrap().with_axes(PhaseSpaceAxes::for_circuit(&CircuitParams::standard()));
        let csv = w.to_csv();
        assert!(csv.contains("# flux_wb = "));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 16 * 16);
    }
}
