//! Szegő kernel functions, the combining-multiples search, and the random ensemble.

use std::f64::consts::PI;

use equidist::crspace::fourier_basis;
use equidist::geometry::{stratify, WeightedAction};
use equidist::sampling::*;
use equidist::szego::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

#[test]
fn leading_coefficient_on_the_round_sphere() {
    // S_m = (m+1)/(2π²) exactly, so S_m/m → 1/(2π²)
    let action = WeightedAction::standard(1);
    let strat = stratify(&action);
    let x = [C64::new(0.8, 0.0), C64::new(0.0, 0.6)];
    let m: Vec<u64> = (20..=60).step_by(10).collect();
    let lc = leading_coefficient(&action, &strat, &x, &m).unwrap();
    assert!((lc.estimate - 1.0 / (2.0 * PI * PI)).abs() < 1e-10);
}

#[test]
fn kernel_vanishes_on_singular_circle_for_odd_m() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let x = vec![C64::new(0.0, 0.0), C64::from_polar(1.0, 0.7)];
    for m in 1..40u64 {
        let s = szego_function(&fourier_basis(&action, m), std::slice::from_ref(&x));
        if m % 2 == 1 {
            assert_eq!(s.values[0], 0.0);
        } else {
            assert!(s.values[0] > 0.0);
        }
    }
}

#[test]
fn certificate_for_one_two() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let strat = stratify(&action);
    let pts = moduli_lattice(1, 64);
    let grid: Vec<u64> = (1..=30).map(|j| 2 * j).collect();
    let c = find_combining_multiples(
        &action,
        &strat,
        &grid,
        0.5,
        &pts,
        &lattice_id(1, 64),
        DEFAULT_K_CAP,
    )
    .unwrap();
    assert_eq!(c.k_list[0], 1);
    assert!(c.c_hat > 0.0 && c.big_c_hat / c.c_hat <= 50.0 && c.stable);
    // the certificate survives a JSON round trip with its published field names
    let js = serde_json::to_value(&c).unwrap();
    assert!(js.get("C_hat").is_some() && js.get("c_hat").is_some());
    assert!(find_combining_multiples(&action, &strat, &[3], 0.5, &pts, "x", 8).is_err());
}

#[test]
fn upper_bound_is_stable_for_one_two() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let pts = moduli_lattice(1, 48);
    let m: Vec<u64> = (10..=60).step_by(2).collect();
    let r = check_upper_bound(&action, &m, &pts).unwrap();
    assert!(r.pass, "spread {}", r.spread_top_half);
}

#[test]
fn coefficient_second_moments_are_uniform() {
    // E|λ_j|² = 1/d for a uniform point on S^{2d−1}
    let d = 5;
    let t = 4000u64;
    let mut acc = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for i in 0..t {
        let u = sample_unit_sphere(d, &SeededStream::new(3, 0, i)).unwrap();
        for j in 0..d {
            let v = u[j].norm_sqr();
            acc[j] += v;
            sq[j] += v * v;
        }
    }
    for j in 0..d {
        let mean = acc[j] / t as f64;
        let se = ((sq[j] / t as f64 - mean * mean) / t as f64).sqrt();
        assert!(
            (mean - 0.2).abs() < 4.0 * se,
            "coordinate {j}: {mean} ± {se}"
        );
    }
}

#[test]
fn draws_do_not_depend_on_evaluation_order() {
    let fwd: Vec<Vec<C64>> = (0..20)
        .map(|i| sample_unit_sphere(4, &SeededStream::new(1, 2, i)).unwrap())
        .collect();
    let rev: Vec<Vec<C64>> = (0..20)
        .rev()
        .map(|i| sample_unit_sphere(4, &SeededStream::new(1, 2, i)).unwrap())
        .collect();
    for (a, b) in fwd.iter().zip(rev.iter().rev()) {
        assert_eq!(a, b);
    }
    assert_ne!(
        fwd[0],
        sample_unit_sphere(4, &SeededStream::new(1, 3, 0)).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kernel_is_orbit_invariant(seed in 0u64..10_000, m in 1u64..30, theta in -4.0f64..4.0) {
        let action = WeightedAction::new(&[1, 3]).unwrap();
        let x = sample_unit_sphere(2, &SeededStream::new(seed, 0, 0)).unwrap();
        let b = fourier_basis(&action, m);
        let a = b.kernel_diagonal(&x);
        let c = b.kernel_diagonal(&action.act(&x, theta));
        prop_assert!((a - c).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn samples_are_unit_vectors(seed in any::<u64>(), dim in 1usize..40) {
        let u = sample_unit_sphere(dim, &SeededStream::new(seed, 0, 0)).unwrap();
        prop_assert!((u.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-13);
    }
}
