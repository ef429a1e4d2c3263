use num_complex::Complex64;
use oscrelax::relaxation::{step, step_oscillator1};
use oscrelax::su2::{
    compute_abcd, compute_euler, realified, su2_reconstruction_error, wigner_d_matrix,
    AbcdIntermediates, HalfInteger, StepCoefficients,
};
use oscrelax::{SystemParams, ThermalState};
use proptest::prelude::*;

fn coeffs(a: f64, b: f64, g: f64) -> StepCoefficients {
    StepCoefficients::from_parts(a, b, Complex64::new(0.0, g))
}

fn system() -> impl Strategy<Value = SystemParams> {
    (0.5..10.0f64, 0.5..10.0f64, 0.1..5.0f64, 0.05..1.0f64, 0.1..3.0f64)
        .prop_map(|(w1, w2, w, l, t)| SystemParams::new(w1, w2, w, l, t).unwrap())
}

fn temperatures() -> impl Strategy<Value = ThermalState> {
    (0.5..10.0f64, 0.5..10.0f64).prop_map(|(a, b)| ThermalState::from_temperatures(a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn euler_form_reconstructs(a in -20.0..20.0f64, b in 0.0..20.0f64, g in -4.0..4.0f64) {
        let c = coeffs(a, b, g);
        let euler = compute_euler(&c, &compute_abcd(&c)).unwrap();
        prop_assert!(su2_reconstruction_error(&c, &euler) <= 1e-10);
        prop_assert!(euler.cos_beta_half.powi(2) - 1.0 >= -1e-12);
    }
}

proptest! {
    #[test]
    fn delta_ignores_b_and_c(a in -20.0..20.0f64, b in 0.0..20.0f64, g in -4.0..4.0f64) {
        let c = coeffs(a, b, g);
        let abcd = compute_abcd(&c);
        let full = compute_euler(&c, &abcd).unwrap();
        let zeroed = AbcdIntermediates { x: Complex64::new(0.0, 0.0), y: Complex64::new(0.0, 0.0), ..abcd };
        let delta = (-Complex64::i() * (zeroed.z / zeroed.scalar).atan()).re;
        prop_assert!((delta - full.delta).abs() <= 1e-14);
        let (cbh, d) = realified(&c);
        prop_assert!((cbh - full.cos_beta_half).abs() <= 1e-12 * cbh);
        prop_assert!((d - full.delta).abs() <= 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn wigner_matrices_are_unitary(twice_j in 0i32..=10, beta in -6.3..6.3f64) {
        let d = wigner_d_matrix(HalfInteger::from_twice(twice_j), Complex64::new(beta, 0.0)).unwrap();
        let n = d.nrows();
        let gram = &d * d.adjoint();
        let err = (gram - nalgebra::DMatrix::<Complex64>::identity(n, n)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-12);
    }

    #[test]
    fn step_conserves_occupation(p in system(), s in temperatures()) {
        let next = step(&p, &s).unwrap().new_state;
        prop_assert!((next.nbar_total(&p) - s.nbar_total(&p)).abs() <= 1e-9);
    }

    #[test]
    fn boltzmann_factor_in_unit_interval(p in system(), s in temperatures()) {
        let r = step_oscillator1(&p, &s).unwrap();
        prop_assert!(r.boltzmann_factor > 0.0 && r.boltzmann_factor < 1.0);
    }

    #[test]
    fn equal_frequencies_commute_with_swap(
        w in 0.5..10.0f64, wi in 0.1..5.0f64, l in 0.05..1.0f64, t in 0.1..3.0f64, s in temperatures()
    ) {
        let p = SystemParams::new(w, w, wi, l, t).unwrap();
        let a = step(&p, &s).unwrap().new_state;
        let b = step(&p, &s.swapped()).unwrap().new_state;
        prop_assert_eq!(a, b.swapped());
    }

    #[test]
    fn equilibrium_states_are_fixed(p in system(), x in 0.05..20.0f64) {
        let s = ThermalState::new(x / p.omega1, x / p.omega2).unwrap();
        let next = step(&p, &s).unwrap().new_state;
        prop_assert!((next.theta1 - s.theta1).abs() <= 1e-12 * s.theta1);
        prop_assert!((next.theta2 - s.theta2).abs() <= 1e-12 * s.theta2);
    }
}
