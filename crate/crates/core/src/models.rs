//! Model Hamiltonians: the rf-SQUID ring and the two-cavity SQUID coupler.
//!
//! Ring Hamiltonians are returned in units of hbar*omega_LC, coupler Hamiltonians in
//! units of hbar (angular frequency). The ring is written about the external bias,
//! phi = Phi - Phi_x, so the fx = 1/2 potential is even and parity is (-1)^n.
//!
//! Two-mode operators use the ordering signal (x) probe: the signal mode `a` is the
//! left (slow) tensor factor.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_op, hermitian_function, number_op, FockOperator};

/// Planck constant (exact SI), J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Superconducting flux quantum h/2e, Wb.
pub const PHI0: f64 = PI * HBAR / E_CHARGE;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Ring inductance, H.
    pub inductance: f64,
    /// Junction capacitance, F.
    pub capacitance: f64,
    /// Critical current, A.
    pub critical_current: f64,
    /// External flux in units of the flux quantum.
    pub external_flux_frac: f64,
}

impl CircuitParams {
    pub fn new(inductance: f64, capacitance: f64, critical_current: f64, external_flux_frac: f64) -> Result<Self> {
        let p = Self { inductance, capacitance, critical_current, external_flux_frac };
        p.validate()?;
        Ok(p)
    }

    /// Lambda = 3e-10 H, C = 5e-15 F, Ic = 2 uA, Phi_x = Phi0/2.
    pub fn standard() -> Self {
        Self { inductance: 3e-10, capacitance: 5e-15, critical_current: 2e-6, external_flux_frac: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be positive, got {v}") })
            }
        };
        pos("inductance", self.inductance)?;
        pos("capacitance", self.capacitance)?;
        // Ic = 0 is allowed: it is the bare LC oscillator.
        if !(self.critical_current >= 0.0 && self.critical_current.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "critical_current",
                reason: format!("must be nonnegative, got {}", self.critical_current),
            });
        }
        let fx = self.external_flux_frac;
        if !(0.0..1.0).contains(&fx) {
            return Err(Error::InvalidParameter { name: "external_flux_frac", reason: format!("must lie in [0, 1), got {fx}") });
        }
        Ok(())
    }

    pub fn omega_lc(&self) -> f64 {
        1.0 / (self.inductance * self.capacitance).sqrt()
    }

    /// Zero-point flux sqrt(hbar / (2 C omega)), Wb.
    pub fn phi_zp(&self) -> f64 {
        (HBAR / (2.0 * self.capacitance * self.omega_lc())).sqrt()
    }

    /// Zero-point charge sqrt(hbar C omega / 2), C.
    pub fn q_zp(&self) -> f64 {
        (HBAR * self.capacitance * self.omega_lc() / 2.0).sqrt()
    }

    pub fn beta_l(&self) -> f64 {
        2.0 * PI * self.inductance * self.critical_current / PHI0
    }

    pub fn is_double_well(&self) -> bool {
        self.beta_l() > 1.0
    }

    /// Josephson energy hbar Ic / 2e in units of hbar omega.
    pub fn josephson_ratio(&self) -> f64 {
        self.critical_current / (2.0 * E_CHARGE * self.omega_lc())
    }

    /// 2 pi Phi_zp / Phi0: the cosine argument per unit of (a + a^dag).
    pub fn cosine_scale(&self) -> f64 {
        2.0 * PI * self.phi_zp() / PHI0
    }

    /// Potential energy at shifted flux `phi` (Wb), in units of hbar omega.
    pub fn potential(&self, phi: f64) -> f64 {
        let phi_x = self.external_flux_frac * PHI0;
        let inductive = phi * phi / (2.0 * self.inductance);
        let josephson = HBAR * self.critical_current / (2.0 * E_CHARGE) * (2.0 * PI * (phi + phi_x) / PHI0).cos();
        (inductive - josephson) / (HBAR * self.omega_lc())
    }
}

/// Shifted flux operator phi = Phi_zp (a + a^dag) in webers.
pub fn squid_flux_operator(params: &CircuitParams, dim: usize) -> Result<FockOperator> {
    params.validate()?;
    let a = annihilation_op(dim)?;
    Ok((&a + &a.adjoint()).scale(params.phi_zp()))
}

/// H / (hbar omega) = a^dag a + 1/2 - (E_J / hbar omega) cos(2 pi (phi + Phi_x) / Phi0).
pub fn squid_hamiltonian(params: &CircuitParams, dim: usize) -> Result<FockOperator> {
    params.validate()?;
    let a = annihilation_op(dim)?;
    let x = &a + &a.adjoint();
    let k = params.cosine_scale();
    let shift = 2.0 * PI * params.external_flux_frac;
    let cosine = hermitian_function(&x, |v| (k * v + shift).cos())?;
    let oscillator = &number_op(dim)? + &FockOperator::identity(dim).scale(0.5);
    Ok(&oscillator - &cosine.scale(params.josephson_ratio()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplerParams {
    pub chi_a: f64,
    pub chi_b: f64,
    pub kappa_a: f64,
    pub kappa_b: f64,
    /// Probe drive amplitude.
    pub epsilon: Complex64,
}

impl CouplerParams {
    pub fn new(chi_a: f64, chi_b: f64, kappa_a: f64, kappa_b: f64, epsilon: Complex64) -> Result<Self> {
        let c = Self { chi_a, chi_b, kappa_a, kappa_b, epsilon };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, reason: format!("must be nonnegative, got {v}") })
            }
        };
        nonneg("chi_a", self.chi_a)?;
        nonneg("chi_b", self.chi_b)?;
        nonneg("kappa_a", self.kappa_a)?;
        if !(self.kappa_b > 0.0 && self.kappa_b.is_finite()) {
            return Err(Error::InvalidParameter { name: "kappa_b", reason: format!("must be positive, got {}", self.kappa_b) });
        }
        if !(self.epsilon.re.is_finite() && self.epsilon.im.is_finite()) {
            return Err(Error::InvalidParameter { name: "epsilon", reason: "must be finite".into() });
        }
        Ok(())
    }

    /// Steady probe amplitude 2|epsilon| / kappa_b.
    pub fn beta0(&self) -> f64 {
        2.0 * self.epsilon.norm() / self.kappa_b
    }

    /// sqrt(chi_a chi_b).
    pub fn g(&self) -> f64 {
        (self.chi_a * self.chi_b).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRates {
    pub gamma2: f64,
    pub gamma_perp: f64,
}

/// Gamma_2 = 16 chi_a chi_b beta0^2 / kappa_b and Gamma_perp = Gamma_2 / 4.
pub fn effective_rates(coupler: &CouplerParams) -> Result<EffectiveRates> {
    coupler.validate()?;
    let b0 = coupler.beta0();
    let gamma2 = 16.0 * coupler.chi_a * coupler.chi_b * b0 * b0 / coupler.kappa_b;
    Ok(EffectiveRates { gamma2, gamma_perp: gamma2 / 4.0 })
}

/// H_a / hbar = chi_a a^dag^2 a^2 + 4 g beta0^2 a^dag a + g beta0^2 (a^2 + a^dag^2).
pub fn signal_mode_hamiltonian(coupler: &CouplerParams, dim: usize) -> Result<FockOperator> {
    coupler.validate()?;
    if dim < 3 {
        return Err(Error::InvalidDimension { dim, reason: "signal mode needs dim >= 3".into() });
    }
    let a = annihilation_op(dim)?;
    Ok(signal_terms(coupler, &a))
}

fn signal_terms(coupler: &CouplerParams, a: &FockOperator) -> FockOperator {
    let ad = a.adjoint();
    let a2 = a * a;
    let ad2 = &ad * &ad;
    let s = coupler.g() * coupler.beta0().powi(2);
    let kerr = (&ad2 * &a2).scale(coupler.chi_a);
    let detune = (&ad * a).scale(4.0 * s);
    let squeeze = (&a2 + &ad2).scale(s);
    &(&kerr + &detune) + &squeeze
}

fn embed(dim_a: usize, dim_b: usize) -> Result<(FockOperator, FockOperator)> {
    let a = annihilation_op(dim_a)?;
    let b = annihilation_op(dim_b)?;
    Ok((a.kron(&FockOperator::identity(dim_b)), FockOperator::identity(dim_a).kron(&b)))
}

/// chi_b b^dag^2 b^2 + chi_a a^dag^2 a^2 + g (b^2 a^dag^2 + b^dag^2 a^2 + 4 a^dag a b^dag b)
fn interaction(coupler: &CouplerParams, a: &FockOperator, b: &FockOperator) -> FockOperator {
    let (ad, bd) = (a.adjoint(), b.adjoint());
    let (a2, b2, ad2, bd2) = (a * a, b * b, &ad * &ad, &bd * &bd);
    let kerr_b = (&bd2 * &b2).scale(coupler.chi_b);
    let kerr_a = (&ad2 * &a2).scale(coupler.chi_a);
    let conv = &(&b2 * &ad2) + &(&bd2 * &a2);
    let cross = (&(&ad * a) * &(&bd * b)).scale(4.0);
    &(&kerr_b + &kerr_a) + &(&conv + &cross).scale(coupler.g())
}

/// Lab-frame coupler Hamiltonian on signal (x) probe, in units of hbar.
pub fn two_mode_hamiltonian(coupler: &CouplerParams, dim_a: usize, dim_b: usize) -> Result<FockOperator> {
    coupler.validate()?;
    let (a, b) = embed(dim_a, dim_b)?;
    let drive = &b.scale(coupler.epsilon.conj()) + &b.adjoint().scale(coupler.epsilon);
    Ok(&interaction(coupler, &a, &b) + &drive)
}

/// Coupler Hamiltonian with the probe displaced by its steady amplitude, b = beta0 + b',
/// beta0 real. In this frame the drive cancels against the displacement term generated by
/// kappa_b D[b], so the result is the interaction with b replaced by beta0 + b' and no drive;
/// evolve it with kappa_b D[b'] on the probe.
pub fn displaced_two_mode_hamiltonian(coupler: &CouplerParams, dim_a: usize, dim_b: usize) -> Result<FockOperator> {
    coupler.validate()?;
    let (a, b) = embed(dim_a, dim_b)?;
    let shifted = &b + &FockOperator::identity(dim_a * dim_b).scale(coupler.beta0());
    Ok(interaction(coupler, &a, &shifted))
}

/// H_a (x) I + 4 g beta0 (b + b^dag) a^dag a + 2 g beta0 (b^dag a^2 + b a^dag^2), probe displaced.
pub fn linearized_hamiltonian(coupler: &CouplerParams, dim_a: usize, dim_b: usize) -> Result<FockOperator> {
    coupler.validate()?;
    let (a, b) = embed(dim_a, dim_b)?;
    let (ad, bd) = (a.adjoint(), b.adjoint());
    let gb = coupler.g() * coupler.beta0();
    let h_a = signal_terms(coupler, &a);
    let dephase = (&(&b + &bd) * &(&ad * &a)).scale(4.0 * gb);
    let pair = (&(&bd * &(&a * &a)) + &(&b * &(&ad * &ad))).scale(2.0 * gb);
    Ok(&(&h_a + &dephase) + &pair)
}

/// Potential curve U(phi) / hbar omega sampled at the shifted fluxes `phis` (Wb).
pub fn potential_curve(params: &CircuitParams, phis: &[f64]) -> Vec<f64> {
    phis.iter().map(|&p| params.potential(p)).collect()
}
