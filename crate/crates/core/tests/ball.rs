//! Bergman space of the unit ball in C²: kernel partial sums, β_k search and
//! boundary pairings.

use std::f64::consts::PI;

use equidist::bergman::*;
use equidist::currents::TestFunction;
use equidist::geometry::build_sphere_grid;
use equidist::sampling::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn diff_sq() -> TestFunction {
    let c = C64::new(1.0, 0.0);
    TestFunction {
        terms: vec![(c, vec![1, 0], vec![1, 0]), (-c, vec![0, 1], vec![0, 1])],
    }
}

#[test]
fn quadrature_norms_match_closed_form() {
    let grid = build_sphere_grid(1, 12).unwrap();
    for a in [[0u32, 0], [3, 1], [2, 5], [7, 0]] {
        let q = ball_norm_oracle(&grid, &a);
        assert!((q - ball_norm(&a)).abs() < 1e-12 * ball_norm(&a), "{a:?}");
    }
}

#[test]
fn peak_section_is_unit_and_attains_the_kernel() {
    let basis = BergmanBasis::new(2, 20).unwrap();
    let b = basis.count_through_degree(12);
    let x0 = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
    let h = peak_section(&basis, b, &x0).unwrap();
    assert!((h.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-13);
    let v = basis.evaluate(&h, &x0);
    assert!((v.norm_sqr() - basis.partial_sum(b, &x0)).abs() < 1e-10);
}

#[test]
fn boundary_limit_for_constant_phi() {
    let grid = build_sphere_grid(1, 8).unwrap();
    let one = TestFunction::constant(1, 1.0);
    let lim = boundary_limit(2, &one, ShellProfile::default(), &grid);
    assert!((lim + 3.0 * PI * ShellProfile::default().integral()).abs() < 1e-10);
}

#[test]
fn weak_pairing_matches_disk_oracle() {
    let basis = BergmanBasis::new(2, 4).unwrap();
    let z1 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
    for (k, phi) in [(5u64, TestFunction::constant(1, 1.0)), (7, diff_sq())] {
        let ev = BallEvaluator::new(
            k,
            &phi,
            ShellProfile::default(),
            default_ball_resolution(4).scaled(2.0),
            false,
        );
        let weak = ev.boundary_pair(&basis, &z1).unwrap().value.re;
        let direct = z1_disk_oracle(k, &phi, ShellProfile::default(), 200);
        assert!(
            (weak - direct).abs() < 1e-3 * direct.abs(),
            "k={k}: {weak} vs {direct}"
        );
    }
}

#[test]
fn literal_correction_has_no_hessian_term_for_constant_phi() {
    let basis = BergmanBasis::new(2, 12).unwrap();
    let one = TestFunction::constant(1, 1.0);
    let ev = BallEvaluator::new(
        4,
        &one,
        ShellProfile::default(),
        default_ball_resolution(12),
        false,
    );
    let b = basis.count_through_degree(8);
    let u = sample_unit_sphere(b, &SeededStream::new(2, 4, 0)).unwrap();
    let pair = ev.boundary_pair(&basis, &u).unwrap().value.re;
    let lit = ev.log_kernel_correction_truncated(&basis, &u, 16).unwrap();
    assert!((pair - lit).abs() < 1e-12 * pair.abs().max(1.0));
}

#[test]
fn mean_pairing_matches_exact_expectation() {
    let model = BallModel::new(2).unwrap();
    let basis = BergmanBasis::new(2, 40).unwrap();
    let grid = annulus_grid(&model, 4, 60, 60);
    let c = find_beta_k(&model, &basis, 4, 0.5 * boundary_kernel_level(2), &grid).unwrap();
    let one = TestFunction::constant(1, 1.0);
    let ev = BallEvaluator::new(
        4,
        &one,
        ShellProfile::default(),
        default_ball_resolution(c.max_degree),
        false,
    );
    let vals: Vec<f64> = (0..40)
        .map(|t| {
            let u = sample_unit_sphere(c.b_k, &SeededStream::new(11, 4, t)).unwrap();
            ev.boundary_pair(&basis, &u).unwrap().value.re
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let e = ev.expected(&basis, c.b_k);
    assert!((mean - e).abs() < 4.0 * se, "{mean} ± {se} vs {e}");
}

#[test]
fn beta_search_is_monotone_and_certified() {
    let model = BallModel::new(2).unwrap();
    let basis = BergmanBasis::new(2, 60).unwrap();
    let target = 0.5 * boundary_kernel_level(2);
    let (certs, raw) = beta_sequence(&model, &basis, &[4, 5, 6], target, 50, 50).unwrap();
    assert!(raw);
    assert!(certs.windows(2).all(|w| w[0].b_k <= w[1].b_k));
    assert!(certs.iter().all(|c| c.achieved_inf >= target));
    assert!(find_beta_k(&model, &basis, 2, target, &annulus_grid(&model, 2, 10, 10)).is_err());
}

#[test]
fn loglog_slope_recovers_power_law() {
    let pts: Vec<(f64, f64)> = [4.0, 8.0, 16.0]
        .iter()
        .map(|&k: &f64| (k, 3.0 * k.powf(-2.0)))
        .collect();
    assert!((loglog_slope(&pts) + 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partial_sums_increase_to_the_kernel(seed in 0u64..10_000, r in 0.0f64..0.7) {
        let basis = BergmanBasis::new(2, 120).unwrap();
        let dir = sample_unit_sphere(2, &SeededStream::new(seed, 0, 0)).unwrap();
        let z: Vec<C64> = dir.iter().map(|c| c * r).collect();
        let mut prev = 0.0;
        for d in [0u32, 5, 20, 60, 120] {
            let p = basis.partial_sum(basis.count_through_degree(d), &z);
            prop_assert!(p >= prev);
            prev = p;
        }
        let closed = bergman_kernel_closed(2, &z).unwrap();
        prop_assert!((prev / closed - 1.0).abs() < 1e-10);
    }
}
