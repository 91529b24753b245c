//! Univariate complex polynomial roots. Coefficients are stored in ascending order.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

#[inline]
pub fn horner(coeffs: &[C64], x: C64) -> C64 {
    coeffs
        .iter()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn horner_with_derivative(coeffs: &[C64], x: C64) -> (C64, C64) {
    let mut p = C64::new(0.0, 0.0);
    let mut dp = C64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Roots as eigenvalues of the companion matrix, polished by two Newton steps.
/// The leading coefficient must be nonzero.
pub fn roots_companion(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Vec::new();
    }
    let lead = coeffs[d];
    if d == 1 {
        return vec![-coeffs[0] / lead];
    }
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[(i, d - 1)] = -coeffs[i] / lead;
    }
    let eig = m
        .clone()
        .schur()
        .eigenvalues()
        .expect("complex Schur form is triangular");
    eig.iter()
        .map(|&r| {
            let mut x = r;
            for _ in 0..2 {
                let (p, dp) = horner_with_derivative(coeffs, x);
                if dp.norm() == 0.0 {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() || step.norm() > 1e-3 * (1.0 + x.norm()) {
                    break;
                }
                x -= step;
            }
            x
        })
        .collect()
}

/// Aberth–Ehrlich simultaneous iteration. `init`, when given, must have
/// exactly `degree` entries and is used as the starting approximation.
/// Returns the approximations and whether every root met the step tolerance.
pub fn roots_aberth(
    coeffs: &[C64],
    init: Option<&[C64]>,
    tol: f64,
    max_iter: usize,
) -> (Vec<C64>, bool) {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return (Vec::new(), true);
    }
    if d == 1 {
        return (vec![-coeffs[0] / coeffs[1]], true);
    }
    let mut z: Vec<C64> = match init {
        Some(v) if v.len() == d => v.to_vec(),
        _ => initial_circle(coeffs),
    };
    let mut done = vec![false; d];
    let mut converged = false;
    for _ in 0..max_iter {
        let mut all = true;
        for i in 0..d {
            if done[i] {
                continue;
            }
            let (p, dp) = horner_with_derivative(coeffs, z[i]);
            if p.norm() == 0.0 {
                done[i] = true;
                continue;
            }
            let ratio = p / dp;
            let mut s = C64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    let diff = z[i] - z[j];
                    if diff.norm_sqr() > 0.0 {
                        s += diff.inv();
                    }
                }
            }
            let w = ratio / (C64::new(1.0, 0.0) - ratio * s);
            if w.is_finite() {
                z[i] -= w;
            }
            if w.norm() <= tol * (1.0 + z[i].norm()) {
                done[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            converged = true;
            break;
        }
    }
    (z, converged)
}

/// Starting points on a circle whose radius is the geometric mean of the root moduli.
fn initial_circle(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[d].norm();
    let c0 = coeffs[0].norm();
    let radius = if c0 > 0.0 {
        (c0 / lead).powf(1.0 / d as f64)
    } else {
        1.0
    };
    (0..d)
        .map(|k| {
            C64::from_polar(
                radius,
                2.0 * std::f64::consts::PI * (k as f64 + 0.25) / d as f64 + 0.4,
            )
        })
        .collect()
}

/// Groups roots closer than `rel_tol·(1 + |r|)` into clusters with multiplicity.
pub fn cluster_roots(roots: &[C64], rel_tol: f64) -> Vec<(C64, usize)> {
    let mut out: Vec<(C64, usize)> = Vec::new();
    for &r in roots {
        match out
            .iter_mut()
            .find(|(c, _)| (c - r).norm() <= rel_tol * (1.0 + r.norm()))
        {
            Some((c, m)) => {
                *c = (*c * (*m as f64) + r) / (*m as f64 + 1.0);
                *m += 1;
            }
            None => out.push((r, 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(roots: &[C64]) -> Vec<C64> {
        let mut c = vec![C64::new(1.0, 0.0)];
        for &r in roots {
            let mut next = vec![C64::new(0.0, 0.0); c.len() + 1];
            for (i, &ci) in c.iter().enumerate() {
                next[i + 1] += ci;
                next[i] -= ci * r;
            }
            c = next;
        }
        c
    }

    #[test]
    fn companion_and_aberth_agree_with_known_roots() {
        let roots: Vec<C64> = (0..12)
            .map(|k| C64::from_polar(0.5 + 0.07 * k as f64, 0.9 * k as f64))
            .collect();
        let c = from_roots(&roots);
        for found in [roots_companion(&c), roots_aberth(&c, None, 1e-14, 500).0] {
            for r in &roots {
                let best = found
                    .iter()
                    .map(|f| (f - r).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9, "{best}");
            }
        }
    }

    #[test]
    fn clustering_counts_multiplicity() {
        let c = from_roots(&[C64::new(0.3, 0.0), C64::new(0.3, 0.0), C64::new(-1.0, 0.5)]);
        let r = roots_companion(&c);
        let cl = cluster_roots(&r, 1e-6);
        assert_eq!(cl.len(), 2);
        assert!(cl
            .iter()
            .any(|(z, m)| *m == 2 && (z - C64::new(0.3, 0.0)).norm() < 1e-7));
    }
}
