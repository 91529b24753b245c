//! Native checks of the browser bindings (success paths only: JsError needs a JS host).

use std::f64::consts::PI;

use equidist_demo::*;

#[test]
fn round_sphere_profile_is_flat() {
    let v = szego_profile(1, 1, 10, 16).unwrap();
    assert_eq!(v.len(), 34);
    for pair in v.chunks(2) {
        assert!((pair[1] - 11.0 / (20.0 * PI * PI)).abs() < 1e-12);
    }
}

#[test]
fn partial_sums_approach_the_kernel() {
    let v = bergman_ratio(80, 0.5).unwrap();
    assert_eq!(v.len(), 81);
    assert!(v.windows(2).all(|w| w[1] >= w[0]));
    assert!((v[80] - 1.0).abs() < 1e-12);
}

#[test]
fn zero_orbits_are_counted() {
    // a homogeneous polynomial of degree m in two variables vanishes on m orbits
    let z = section_zeros(1, 1, 12, 3).unwrap();
    assert_eq!(z.len(), 24);
    assert!(z.chunks(2).all(|p| (0.0..=1.0).contains(&p[0])));
    // weights (1,2), m odd: ⌊m/2⌋ orbits off the axis plus the orbit z₁ = 0
    let z = section_zeros(1, 2, 9, 3).unwrap();
    assert_eq!(z.len(), 2 * 5);
    assert_eq!(&z[8..], &[1.0, 0.0]);
}
