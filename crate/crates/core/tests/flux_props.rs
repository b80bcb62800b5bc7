use std::f64::consts::PI;

use extem::angular_momentum::{
    decompose, l_component, l_component_circular, moment_divergence_at, moment_tensor_at, nls_flux, pi_flux,
    realspace_omega_flux, s_component, s_component_circular, spin_canonical, FluxReport, SurfaceLattice,
};
use extem::estimators::EstimatorRegistry;
use extem::field_config::{field_at, make_gaussian_packet, stress_at, stress_divergence_at, ModeSet};
use extem::index_algebra::{grade_basis, IndexList, Signature};
use extem::multivector::{wedge, Multivector};
use extem::sampling::{packet_spec, point};
use extem::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const CASES: [(usize, usize, usize, usize); 7] =
    [(1, 3, 2, 0), (1, 3, 2, 3), (1, 4, 2, 0), (1, 4, 3, 0), (2, 3, 2, 0), (2, 3, 2, 4), (1, 5, 3, 0)];

fn packet(case: usize, seed: u64) -> ModeSet {
    let (k, n, r, ell) = CASES[case];
    let sig = Signature::new(k, n).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    make_gaussian_packet(&packet_spec(&mut rng, sig, r, ell, 3).unwrap(), ell).unwrap()
}

/// `(Σ 2 w/(2χ) max|F̂|, 2π max|ξ| · same)`: bounds on `|F|` and `|∂F|`.
fn field_bounds(ms: &ModeSet) -> (f64, f64) {
    let f: f64 = ms.modes().iter().map(|m| 2.0 * m.measure() * m.fhat().max_abs()).sum();
    (f, 2.0 * PI * ms.max_frequency() * f)
}

/// `2π Σ w/(2χ) ‖Â‖²_E`, the natural size of `S` and `Π/ξ`.
fn spin_scale(ms: &ModeSet) -> f64 {
    2.0 * PI * ms.modes().iter().map(|m| m.measure() * m.amp().norm().powi(2)).sum::<f64>()
}

/// `2π max|ξ| Σ w/(2χ) ‖∂Â‖‖Â‖`, the natural size of `L`.
fn orbital_scale(ms: &ModeSet) -> f64 {
    let s: f64 = ms
        .modes()
        .iter()
        .map(|m| {
            let g: f64 = m.amp_grad().unwrap().iter().map(|g| g.norm()).sum();
            m.measure() * g * m.amp().norm()
        })
        .sum();
    2.0 * PI * ms.max_frequency() * s
}

fn pairs_without(d: usize, ell: usize) -> impl Iterator<Item = IndexList> {
    grade_basis(d, 2).iter().copied().filter(move |p| !p.contains(ell))
}

#[test]
fn moment_tensor_matches_triple_sum() {
    let ms = packet(0, 3);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let d = 4;
    for _ in 0..20 {
        let x = point(&mut rng, d, 2.0);
        let alpha = point(&mut rng, d, 1.0);
        let m = moment_tensor_at(&ms, &x, &alpha).unwrap();
        let t = stress_at(&ms, &x).unwrap();
        for j in 0..d {
            for p in grade_basis(d, 2) {
                let v = p.to_vec();
                let (a, b) = (v[0], v[1]);
                let expect = (x[a] - alpha[a]) * t.get(j, b) - (x[b] - alpha[b]) * t.get(j, a);
                assert!((m.get(j, *p) - expect).norm() < 1e-12 * t.max_abs().max(1.0) * 4.0);
            }
        }
    }
    let zero = moment_tensor_at(&ms, &x_fixed(), &x_fixed()).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
}

fn x_fixed() -> Vec<f64> {
    vec![0.3, -0.1, 0.7, 0.2]
}

#[test]
fn divergence_identity_holds_off_shell() {
    for case in 0..CASES.len() {
        let mut ms = packet(case, 20 + case as u64);
        for i in (0..ms.len()).step_by(3) {
            let chi = ms.modes()[i].chi();
            ms.detune_mode(i, chi * (1.0 + 0.2 * (i % 5) as f64)).unwrap();
        }
        let (fb, db) = field_bounds(&ms);
        let d = ms.sig().dim();
        let mut rng = ChaCha20Rng::seed_from_u64(case as u64);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = point(&mut rng, d, 3.0);
            let alpha = point(&mut rng, d, 1.0);
            let lhs = moment_divergence_at(&ms, &x, &alpha).unwrap();
            let arm: Vec<f64> = x.iter().zip(&alpha).map(|(a, b)| a - b).collect();
            let rhs =
                wedge(&Multivector::vector(ms.sig(), &arm).unwrap(), &stress_divergence_at(&ms, &x).unwrap()).unwrap();
            let arm_norm = arm.iter().map(|v| v * v).sum::<f64>().sqrt();
            let scale = fb * (fb + db * (1.0 + arm_norm)) * d as f64;
            worst = worst.max((&lhs - &rhs).max_abs() / scale);
        }
        assert!(worst <= 1e-10, "case {case}: {worst:e}");
        // the detuned field is not conserved
        let div = stress_divergence_at(&ms, &[0.2, 0.1, -0.3, 0.4, 0.0, 0.1][..d]).unwrap();
        assert!(div.max_abs() > 1e-8 * fb * db, "case {case}");
    }
}

#[test]
fn free_fields_conserve_energy_and_angular_momentum() {
    for case in 0..CASES.len() {
        let ms = packet(case, 40 + case as u64);
        let (fb, db) = field_bounds(&ms);
        let d = ms.sig().dim();
        let mut rng = ChaCha20Rng::seed_from_u64(case as u64 + 7);
        for _ in 0..100 {
            let x = point(&mut rng, d, 3.0);
            let alpha = point(&mut rng, d, 1.0);
            let div = stress_divergence_at(&ms, &x).unwrap();
            assert!(div.max_abs() <= 1e-10 * fb * db * d as f64, "case {case}");
            let arm: f64 = x.iter().zip(&alpha).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let m = moment_divergence_at(&ms, &x, &alpha).unwrap();
            assert!(m.max_abs() <= 1e-10 * fb * (fb + db * (1.0 + arm)) * d as f64, "case {case}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn spin_oracle_triangle(case in 0usize..7, seed: u64) {
        let ms = packet(case, seed);
        let scale = spin_scale(&ms);
        let (_, _, s) = nls_flux(&ms, 0.0).unwrap();
        for p in pairs_without(ms.sig().dim(), ms.ell()) {
            let vals = [
                s_component(&ms, p).unwrap(),
                s_component_circular(&ms, p).unwrap(),
                spin_canonical(&ms, p).unwrap(),
                s.get(p).re,
            ];
            for a in &vals {
                for b in &vals {
                    prop_assert!((a - b).abs() <= 1e-12 * scale, "pair {}: {:?}", p, vals);
                }
            }
        }
    }

    #[test]
    fn orbital_routes_agree(case in 0usize..7, seed: u64) {
        let ms = packet(case, seed);
        let scale = orbital_scale(&ms);
        let (_, l, _) = nls_flux(&ms, 0.0).unwrap();
        for p in pairs_without(ms.sig().dim(), ms.ell()) {
            let a = l_component(&ms, p).unwrap();
            let b = l_component_circular(&ms, p).unwrap();
            prop_assert!(a.im.abs() <= 1e-12 * scale);
            prop_assert!((a.re - b).abs() <= 1e-10 * scale, "pair {}: {} vs {}", p, a.re, b);
            prop_assert!((a.re - l.get(p).re).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn registry_routes_agree(case in 0usize..7, seed: u64) {
        let ms = packet(case, seed);
        let reg = EstimatorRegistry::builtin();
        for p in pairs_without(ms.sig().dim(), ms.ell()) {
            prop_assert!(reg.spin_spread(&ms, p).unwrap() <= 1e-12 * spin_scale(&ms));
            prop_assert!(reg.orbital_spread(&ms, p).unwrap() <= 1e-10 * orbital_scale(&ms));
        }
    }

    #[test]
    fn report_is_real_and_excludes_ell(case in 0usize..7, seed: u64, x_ell in -2.0f64..2.0) {
        let ms = packet(case, seed);
        let d = ms.sig().dim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
        let alpha = point(&mut rng, d, 1.0);
        let rep = decompose(&ms, x_ell, &alpha).unwrap();
        let scale = spin_scale(&ms) + orbital_scale(&ms);
        let size = scale * (1.0 + ms.max_frequency()) * (1.0 + x_ell.abs() + alpha.iter().map(|a| a.abs()).sum::<f64>());
        for mv in [&rep.omega, &rep.n_part, &rep.l_part, &rep.s_part, &rep.pi_part] {
            prop_assert!(mv.max_imag() <= 1e-12 * size);
        }
        for (p, c) in rep.l_part.iter().chain(rep.s_part.iter()) {
            if p.contains(ms.ell()) {
                prop_assert!(c.norm() <= 1e-12 * scale);
            }
        }
        let sum = &(&(&rep.n_part + &rep.l_part) + &rep.s_part)
            - &wedge(&Multivector::vector(ms.sig(), &alpha).unwrap(), &rep.pi_part).unwrap();
        prop_assert!((&sum - &rep.omega).max_abs() <= 1e-12 * size);
    }

    #[test]
    fn alpha_shift_law(case in 0usize..7, seed: u64, x_ell in -2.0f64..2.0) {
        let ms = packet(case, seed);
        let d = ms.sig().dim();
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xa1fa);
        let alpha = point(&mut rng, d, 2.0);
        let base = decompose(&ms, x_ell, &vec![0.0; d]).unwrap();
        let moved = decompose(&ms, x_ell, &alpha).unwrap();
        let pi = pi_flux(&ms);
        let expect = &base.omega - &wedge(&Multivector::vector(ms.sig(), &alpha).unwrap(), &pi).unwrap();
        let size = (pi.max_abs() * 2.0 + base.omega.max_abs()).max(1e-300);
        prop_assert!((&moved.omega - &expect).max_abs() <= 1e-12 * size);
    }

    #[test]
    fn report_records_round_trip(case in 0usize..7, seed: u64) {
        let ms = packet(case, seed);
        let d = ms.sig().dim();
        let rep = decompose(&ms, 0.5, &point(&mut ChaCha20Rng::seed_from_u64(seed), d, 1.0)).unwrap();
        let back = FluxReport::from_records(&rep.records()).unwrap();
        prop_assert_eq!(back.records(), rep.records());
    }
}

#[test]
fn realspace_alpha_shift_is_exact_on_one_lattice() {
    let sig = Signature::new(1, 3).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let spec = packet_spec(&mut rng, sig, 2, 0, 5).unwrap();
    let ms = make_gaussian_packet(&spec, 0).unwrap();
    let lat = SurfaceLattice::around_packet(&spec, 0, 0.4, 4.0, vec![12; 3]).unwrap();
    let alpha = [0.3, -0.7, 1.1, 0.25];
    let a0 = realspace_omega_flux(&ms, 0.4, &[0.0; 4], &lat).unwrap();
    let a1 = realspace_omega_flux(&ms, 0.4, &alpha, &lat).unwrap();
    let expect = &a0.omega - &wedge(&Multivector::vector(sig, &alpha).unwrap(), &a0.pi).unwrap();
    assert!((&a1.omega - &expect).max_abs() <= 1e-12 * (a0.omega.max_abs() + a0.pi.max_abs()));
    assert_eq!(a0.pi, a1.pi);
}

#[test]
fn realspace_flux_of_empty_field_is_zero() {
    let sig = Signature::new(1, 3).unwrap();
    let ms = ModeSet::empty(sig, 2, 0).unwrap();
    let lat = SurfaceLattice::new(vec![0.0; 3], vec![1.0; 3], vec![4; 3]).unwrap();
    let f = realspace_omega_flux(&ms, 0.0, &[0.0; 4], &lat).unwrap();
    assert!(f.omega.is_zero() && f.pi.is_zero());
    assert!(f.warning.is_none());
}

#[test]
fn small_lattice_is_flagged() {
    let sig = Signature::new(1, 3).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let mut spec = packet_spec(&mut rng, sig, 2, 0, 1).unwrap();
    spec.extent = vec![4.0 * spec.spread; 3];
    spec.points = vec![16; 3];
    let ms = make_gaussian_packet(&spec, 0).unwrap();
    let tight = SurfaceLattice::around_packet(&spec, 0, 0.0, 1.0, vec![8; 3]).unwrap();
    assert!(realspace_omega_flux(&ms, 0.0, &[0.0; 4], &tight).unwrap().warning.is_some());
    let wide = SurfaceLattice::around_packet(&spec, 0, 0.0, 6.0, vec![24; 3]).unwrap();
    assert!(realspace_omega_flux(&ms, 0.0, &[0.0; 4], &wide).unwrap().warning.is_none());
}

/// Real-space Ω converges to the frequency-space decomposition for a
/// quickly evaluated packet; the full study lives in the acceptance suite.
#[test]
fn realspace_matches_decomposition_on_small_grids() {
    let sig = Signature::new(1, 3).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(33);
    let mut spec = packet_spec(&mut rng, sig, 2, 0, 1).unwrap();
    spec.spread = 0.15;
    spec.extent = vec![4.0 * spec.spread; 3];
    spec.points = vec![16; 3];
    let ms = make_gaussian_packet(&spec, 0).unwrap();
    let alpha = [0.0, 0.2, -0.1, 0.3];
    let x_ell = 0.7;
    let lat = SurfaceLattice::around_packet(&spec, 0, x_ell, 6.0, vec![32; 3]).unwrap();
    let real = realspace_omega_flux(&ms, x_ell, &alpha, &lat).unwrap();
    let freq = decompose(&ms, x_ell, &alpha).unwrap();
    let err = (&real.omega - &freq.omega).max_abs() / freq.omega.max_abs();
    assert!(err < 1e-4, "{err:e}");
    let err = (&real.pi - &freq.pi_part).max_abs() / freq.pi_part.max_abs();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn field_free_sets_give_zero_report() {
    let sig = Signature::new(1, 3).unwrap();
    let ms = ModeSet::empty(sig, 2, 0).unwrap();
    let rep = decompose(&ms, 1.0, &[0.1, 0.2, 0.3, 0.4]).unwrap();
    assert!(rep.omega.is_zero() && rep.pi_part.is_zero());
    assert!(field_at(&ms, &[0.0; 4]).unwrap().is_zero());
}

#[test]
fn modes_without_gradients_are_unsupported_for_orbital_parts() {
    let ms = packet(0, 2);
    let stripped = ModeSet::parse(&ms.to_text()).unwrap();
    assert!(matches!(nls_flux(&stripped, 0.0), Err(Error::Unsupported(_))));
    assert!(s_component(&stripped, IndexList::pair(1, 2).unwrap()).is_ok());
    assert!(matches!(l_component(&stripped, IndexList::pair(1, 2).unwrap()), Err(Error::Unsupported(_))));
}
