use std::f64::consts::PI;

use catbath::hilbert::{cat_state, coherent_state, fock_state, hermitian_function, DensityMatrix, FockOperator};
use catbath::lindblad::{dissipator_apply, liouvillian_matrix, Generator, LindbladChannel};
use catbath::linalg::CMat;
use catbath::models::{effective_rates, CouplerParams};
use catbath::observables::{fidelity, parity_expect, trace_distance};
use catbath::phase_space::{wigner, wigner_points, GridSpec};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ginibre(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    let g = ginibre(rng, n);
    (&g + g.adjoint()) * c(0.5, 0.0)
}

/// Full-rank or low-rank random state.
fn random_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let rank = rng.gen_range(1..=n);
    let g = CMat::from_fn(n, rank, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    DensityMatrix::normalized(&g * g.adjoint()).unwrap()
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMat {
    ginibre(rng, n).qr().q()
}

fn max_diff(a: &CMat, b: &CMat) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// L rho L^dag - (L^dag L rho + rho L^dag L) / 2, written out with nalgebra products.
fn direct_dissipator(l: &CMat, rho: &CMat) -> CMat {
    let ld = l.adjoint();
    let ldl = &ld * l;
    l * rho * &ld - (&ldl * rho + rho * &ldl) * c(0.5, 0.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generator_matches_direct_evaluation(seed in any::<u64>(), n in 2usize..=12, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n);
        let ops: Vec<(CMat, f64)> = (0..k).map(|_| (ginibre(&mut rng, n), rng.gen_range(0.0..2.0))).collect();
        let rho = random_state(&mut rng, n).into_matrix();
        let arbitrary = ginibre(&mut rng, n);

        let channels: Vec<LindbladChannel> =
            ops.iter().map(|(l, r)| LindbladChannel::new(FockOperator::new(l.clone()).unwrap(), *r).unwrap()).collect();
        let hop = FockOperator::new(h.clone()).unwrap();
        let gen = Generator::new(&hop, &channels).unwrap();
        let sup = liouvillian_matrix(&hop, &channels).unwrap();

        for x in [&rho, &arbitrary] {
            let mut expected = (&h * x - x * &h) * c(0.0, -1.0);
            for (l, r) in &ops {
                expected += direct_dissipator(l, x) * c(*r, 0.0);
            }
            let scale = 1.0 + expected.iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(max_diff(&gen.apply(x), &expected) < 1e-12 * scale);
            prop_assert!(max_diff(&sup.apply(x), &expected) < 1e-12 * scale);
        }
        for ((l, r), ch) in ops.iter().zip(&channels) {
            let d = dissipator_apply(ch, &rho).unwrap();
            let expected = direct_dissipator(l, &rho) * c(*r, 0.0);
            let scale = 1.0 + expected.iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(max_diff(&d, &expected) < 1e-12 * scale);
        }
        // Trace-preserving and Hermiticity-preserving.
        let out = gen.apply(&rho);
        prop_assert!(out.trace().norm() < 1e-11 * (1.0 + out.norm()));
        prop_assert!(max_diff(&out, &out.adjoint()) < 1e-11 * (1.0 + out.norm()));
    }

    #[test]
    fn hermitian_function_is_unitarily_covariant(seed in any::<u64>(), n in 2usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_hermitian(&mut rng, n);
        let u = random_unitary(&mut rng, n);
        let f = |x: f64| x.exp() - 0.5 * x * x;
        let fm = hermitian_function(&FockOperator::new(m.clone()).unwrap(), f).unwrap();
        let rotated = &u * &m * u.adjoint();
        let rotated = (&rotated + rotated.adjoint()) * c(0.5, 0.0);
        let frot = hermitian_function(&FockOperator::new(rotated).unwrap(), f).unwrap();
        let expected = &u * fm.matrix() * u.adjoint();
        let scale = 1.0 + expected.norm();
        prop_assert!(max_diff(frot.matrix(), &expected) < 1e-10 * scale);
    }

    #[test]
    fn trace_distance_is_a_metric(seed in any::<u64>(), n in 2usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b, x) = (random_state(&mut rng, n), random_state(&mut rng, n), random_state(&mut rng, n));
        let ab = trace_distance(&a, &b).unwrap();
        let ba = trace_distance(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&ab));
        prop_assert!(trace_distance(&a, &a).unwrap() < 1e-7);
        let via = trace_distance(&a, &x).unwrap() + trace_distance(&x, &b).unwrap();
        prop_assert!(ab <= via + 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric_and_bounded(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_state(&mut rng, n), random_state(&mut rng, n));
        let f = fidelity(&a, &b).unwrap();
        prop_assert!((f - fidelity(&b, &a).unwrap()).abs() < 1e-8);
        prop_assert!((-1e-12..=1.0 + 1e-9).contains(&f));
        // Fuchs-van de Graaf.
        let d = trace_distance(&a, &b).unwrap();
        prop_assert!(1.0 - f.sqrt() <= d + 1e-8);
        prop_assert!(d <= (1.0 - f).max(0.0).sqrt() + 1e-8);
    }

    #[test]
    fn wigner_is_linear_in_rho(seed in any::<u64>(), n in 2usize..=20, w in 0.0..1.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_state(&mut rng, n), random_state(&mut rng, n));
        let mix = a.mix(&b, w).unwrap();
        let pts: Vec<(f64, f64)> = (0..24).map(|_| (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0))).collect();
        let wa = wigner_points(&a, &pts).unwrap();
        let wb = wigner_points(&b, &pts).unwrap();
        let wm = wigner_points(&mix, &pts).unwrap();
        for i in 0..pts.len() {
            prop_assert!((wm[i] - (w * wa[i] + (1.0 - w) * wb[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_value_is_parity(seed in any::<u64>(), n in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, n);
        let w0 = wigner_points(&rho, &[(0.0, 0.0)]).unwrap()[0];
        // Density over the complex alpha plane (x = sqrt(2) Re alpha): W_alpha = 2 W(x, p).
        let w_alpha = 2.0 * w0;
        prop_assert!((PI / 2.0 * w_alpha - parity_expect(&rho)).abs() < 1e-12);
    }

    #[test]
    fn wigner_is_bounded(seed in any::<u64>(), n in 1usize..=40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, n);
        let pts: Vec<(f64, f64)> = (0..16).map(|_| (rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0))).collect();
        for v in wigner_points(&rho, &pts).unwrap() {
            prop_assert!(v.is_finite() && v.abs() <= 1.0 / PI + 1e-12);
        }
    }

    #[test]
    fn dephasing_rate_is_a_quarter(chi_a in 0.0..1e7f64, chi_b in 0.0..1e7f64, kappa_a in 0.0..1e3f64,
                                   kappa_b in 1e-3..1e9f64, re in -1e8..1e8f64, im in -1e8..1e8f64) {
        let cp = CouplerParams::new(chi_a, chi_b, kappa_a, kappa_b, c(re, im)).unwrap();
        let r = effective_rates(&cp).unwrap();
        prop_assert_eq!(r.gamma_perp * 4.0, r.gamma2);
    }
}

#[test]
fn two_photon_rate_matches_scalar_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let chi_a = 10f64.powf(rng.gen_range(-2.0..7.0));
        let chi_b = 10f64.powf(rng.gen_range(-2.0..7.0));
        let kappa_b = 10f64.powf(rng.gen_range(0.0..9.0));
        let eps = c(rng.gen_range(-1e6..1e6), rng.gen_range(-1e6..1e6));
        let cp = CouplerParams::new(chi_a, chi_b, 0.0, kappa_b, eps).unwrap();
        let beta0 = 2.0 * (eps.re * eps.re + eps.im * eps.im).sqrt() / kappa_b;
        let expected = 16.0 * chi_a * chi_b * beta0 * beta0 / kappa_b;
        let got = effective_rates(&cp).unwrap().gamma2;
        assert!((got - expected).abs() <= 1e-13 * expected, "{got} vs {expected}");
    }
}

#[test]
fn grid_negativity_of_coherent_and_cat_states() {
    let spec = GridSpec::default_for_dim(30);
    let coh = coherent_state(c(1.5, 0.5), 30).unwrap().to_density();
    let w = wigner(&coh, &spec).unwrap();
    assert!(catbath::phase_space::negativity(&w) < 1e-9);
    assert!((w.integral() - 1.0).abs() < 5e-3);
    let cat = cat_state(c(2.0, 0.0), true, 30).unwrap().to_density();
    let w = wigner(&cat, &spec).unwrap();
    assert!(catbath::phase_space::negativity(&w) > 0.1);
    assert!((w.integral() - 1.0).abs() < 5e-3);
}

#[test]
fn fock_wigner_center_alternates() {
    for n in 0..8 {
        let rho = fock_state(n, 12).unwrap().to_density();
        let w0 = wigner_points(&rho, &[(0.0, 0.0)]).unwrap()[0];
        let expected = if n % 2 == 0 { 1.0 / PI } else { -1.0 / PI };
        assert!((w0 - expected).abs() < 1e-14);
    }
}

#[test]
fn ket_based_mix_matches_projector_sum() {
    let a = fock_state(0, 3).unwrap();
    let b = fock_state(2, 3).unwrap();
    let m = a.to_density().mix(&b.to_density(), 0.25).unwrap();
    let mut expected = DMatrix::zeros(3, 3);
    expected[(0, 0)] = c(0.25, 0.0);
    expected[(2, 2)] = c(0.75, 0.0);
    assert!(max_diff(m.matrix(), &expected) < 1e-15);
}
