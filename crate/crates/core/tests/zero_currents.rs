//! Zero-current pairings on the weighted 3-sphere: the root-based and weak
//! evaluators checked against each other and against exact expectations.

use std::f64::consts::PI;

use equidist::crspace::*;
use equidist::currents::*;
use equidist::geometry::{build_sphere_grid, stratify, WeightedAction};
use equidist::sampling::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

fn single(action: &WeightedAction, m: u64, seed: u64) -> (ExtendedSection, Vec<FourierBasis>) {
    let b = vec![fourier_basis(action, m)];
    let s = sample_section(&b, &SeededStream::new(seed, m, 0)).unwrap();
    (extend(&s, &b).unwrap(), b)
}

fn mixed() -> TestFunction {
    TestFunction::constant(1, 0.3).sum(&TestFunction::re_z1_zbar2())
}

#[test]
fn weighted_single_component_evaluators_agree() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let pkg = TestFormPackage::new(mixed());
    for (m, seed) in [(9u64, 1u64), (12, 2)] {
        let (ext, _) = single(&action, m, seed);
        let roots = pair_roots(&ext, &pkg).unwrap();
        let ev = WeakEvaluator::new([1, 2], &pkg, m, default_cr_resolution([1, 2], m), true);
        let weak = ev.pair(&ext);
        assert!(weak.converged);
        let rel = (roots.value.re - weak.value.re).abs() / roots.value.re.abs();
        assert!(
            rel < 1e-3,
            "m={m}: roots {} weak {}",
            roots.value.re,
            weak.value.re
        );
    }
}

#[test]
fn constant_test_function_pairs_to_orbit_count() {
    // weights (1,1): every section of degree m vanishes on m orbits, each pairing to 2π
    let action = WeightedAction::standard(1);
    let pkg = TestFormPackage::new(TestFunction::constant(1, 1.0));
    let m = 15;
    let (ext, b) = single(&action, m, 4);
    let ev = WeakEvaluator::new([1, 1], &pkg, m, default_cr_resolution([1, 1], m), false);
    assert!((ev.pair(&ext).value.re - 2.0 * PI * m as f64).abs() < 1e-4);
    assert!((ev.expected(&b) - 2.0 * PI * m as f64).abs() < 1e-4);
}

#[test]
fn monte_carlo_mean_matches_exact_expectation() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let strat = stratify(&action);
    let pkg = TestFormPackage::new(TestFunction::constant(1, 1.0));
    let m = 4;
    let bases = assemble_am(&action, &strat, m, &[1, 2]).unwrap();
    let top = bases.last().unwrap().m;
    let ev = WeakEvaluator::new([1, 2], &pkg, m, default_cr_resolution([1, 2], top), false);
    let vals: Vec<f64> = (0..60)
        .map(|t| {
            let s = sample_section(&bases, &SeededStream::new(8, m, t)).unwrap();
            ev.pair(&extend(&s, &bases).unwrap()).value.re
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let exact = ev.expected(&bases);
    assert!((mean - exact).abs() < 4.0 * se, "{mean} ± {se} vs {exact}");
}

#[test]
fn ratio_formula_reduces_to_alpha_for_one_component() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let grid = build_sphere_grid(1, 16).unwrap();
    let f = TestFunction::constant(1, 1.0);
    let e = expected_pairing(&action, 2, &[1], 10, &f, &grid).re;
    let lc = limit_constant(1, 2, &[1]).unwrap();
    assert!((e - lc * levi_reference(&action, &f, &grid)).abs() < 1e-10);
}

#[test]
fn extension_rejects_mismatched_bases() {
    let action = WeightedAction::new(&[1, 2]).unwrap();
    let b = vec![fourier_basis(&action, 4)];
    let s = sample_section(&b, &SeededStream::new(1, 0, 0)).unwrap();
    assert!(extend(&s, &[fourier_basis(&action, 6)]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn pairing_ignores_scale(seed in 0u64..1000, m in 3u64..14, re in 0.1f64..5.0, im in -5.0f64..5.0) {
        let action = WeightedAction::new(&[1, 2]).unwrap();
        let pkg = TestFormPackage::new(mixed());
        let b = vec![fourier_basis(&action, m)];
        let s = sample_section(&b, &SeededStream::new(seed, m, 0)).unwrap();
        let a = pair_roots(&extend(&s, &b).unwrap(), &pkg).unwrap().value.re;
        let c = pair_roots(&extend(&s.scaled(C64::new(re, im)), &b).unwrap(), &pkg).unwrap().value.re;
        prop_assert!((a - c).abs() < 1e-8 * a.abs().max(1.0));
    }

    #[test]
    fn pairing_is_linear_in_the_test_function(seed in 0u64..1000, m in 3u64..14, c in -2.0f64..2.0) {
        let action = WeightedAction::new(&[1, 2]).unwrap();
        let b = vec![fourier_basis(&action, m)];
        let s = sample_section(&b, &SeededStream::new(seed, m, 1)).unwrap();
        let ext = extend(&s, &b).unwrap();
        let f = TestFunction::constant(1, c);
        let g = TestFunction::re_z1_zbar2();
        let pf = pair_roots(&ext, &TestFormPackage::new(f.clone())).unwrap().value.re;
        let pg = pair_roots(&ext, &TestFormPackage::new(g.clone())).unwrap().value.re;
        let pfg = pair_roots(&ext, &TestFormPackage::new(f.sum(&g))).unwrap().value.re;
        prop_assert!((pfg - pf - pg).abs() < 1e-9 * (1.0 + pfg.abs()));
    }
}
