//! Browser bindings for three small views of the library: the Szegő kernel
//! profile of a weighted 3-sphere, Bergman kernel partial sums on the ball in
//! C², and the zero orbits of a random CR function.
//!
//! Every function returns a flat `Vec<f64>` (a Float64Array on the JS side).

use equidist::bergman::{bergman_kernel_closed, BergmanBasis};
use equidist::crspace::fourier_basis;
use equidist::geometry::WeightedAction;
use equidist::poly::roots_companion;
use equidist::sampling::{sample_unit_sphere, SeededStream};
use equidist::szego::{moduli_lattice, szego_function};
use num_complex::Complex64 as C64;
use wasm_bindgen::prelude::*;

fn js_err(e: equidist::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Pairs (|z₂|², S_m/m) along the moduli lattice of S³ with weights (p1, p2).
#[wasm_bindgen]
pub fn szego_profile(p1: u32, p2: u32, m: u32, res: u32) -> Result<Vec<f64>, JsError> {
    let action = WeightedAction::new(&[p1 as u64, p2 as u64]).map_err(js_err)?;
    let pts = moduli_lattice(1, res.clamp(2, 2000) as usize);
    let prof = szego_function(&fourier_basis(&action, m as u64), &pts);
    let mut out = Vec::with_capacity(2 * pts.len());
    for (x, s) in pts.iter().zip(&prof.normalized) {
        out.push(x[1].norm_sqr());
        out.push(*s);
    }
    Ok(out)
}

/// P_b(z)/B(z, z) at z = (r, 0) for the partial sums through each total degree 0..=max_degree.
#[wasm_bindgen]
pub fn bergman_ratio(max_degree: u32, r: f64) -> Result<Vec<f64>, JsError> {
    if !(0.0..1.0).contains(&r) {
        return Err(JsError::new("r must lie in [0, 1)"));
    }
    let basis = BergmanBasis::new(2, max_degree.min(400)).map_err(js_err)?;
    let z = [C64::new(r, 0.0), C64::new(0.0, 0.0)];
    let full = bergman_kernel_closed(2, &z).map_err(js_err)?;
    Ok((0..=max_degree.min(400))
        .map(|d| basis.partial_sum(basis.count_through_degree(d), &z) / full)
        .collect())
}

/// Zero orbits of a uniformly random unit-norm u ∈ H⁰_{b,m} as pairs (|x₂|², arg x₂)
/// of a point x on each orbit. With p1 > 1 an orbit can be listed up to p1 times.
#[wasm_bindgen]
pub fn section_zeros(p1: u32, p2: u32, m: u32, seed: u64) -> Result<Vec<f64>, JsError> {
    let action = WeightedAction::new(&[p1 as u64, p2 as u64]).map_err(js_err)?;
    let basis = fourier_basis(&action, m as u64);
    if basis.dim() == 0 {
        return Ok(Vec::new());
    }
    let c =
        sample_unit_sphere(basis.dim(), &SeededStream::new(seed, m as u64, 0)).map_err(js_err)?;
    // restrict to z₁ = 1: a polynomial in t = z₂
    let top = basis.exponents.iter().map(|a| a[1]).max().unwrap() as usize;
    let mut poly = vec![C64::new(0.0, 0.0); top + 1];
    let mut on_axis = true;
    for ((a, ln), ci) in basis.exponents.iter().zip(&basis.ln_norm_sq).zip(&c) {
        poly[a[1] as usize] += ci * (-0.5 * ln).exp();
        on_axis &= a[0] != 0;
    }
    let low = poly.iter().position(|v| v.norm() > 0.0).unwrap_or(0);
    let (pf1, pf2) = (p1 as f64, p2 as f64);
    let mut out = Vec::new();
    for t in roots_companion(&poly[low..]) {
        // scale (1, t) along the action onto the unit sphere
        let t2 = t.norm_sqr();
        let (mut lo, mut hi) = (-60.0f64, 0.0f64);
        for _ in 0..200 {
            let s = 0.5 * (lo + hi);
            if (2.0 * pf1 * s).exp() + (2.0 * pf2 * s).exp() * t2 > 1.0 {
                hi = s;
            } else {
                lo = s;
            }
        }
        out.push((2.0 * pf2 * lo).exp() * t2);
        out.push(t.arg());
    }
    if low > 0 {
        // t = 0 is a root: the orbit z₂ = 0
        out.push(0.0);
        out.push(0.0);
    }
    if on_axis {
        // every monomial contains z₁, so u vanishes on the orbit z₁ = 0
        out.push(1.0);
        out.push(0.0);
    }
    Ok(out)
}
