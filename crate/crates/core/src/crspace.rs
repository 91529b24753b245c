//! Fourier components of CR functions on weighted spheres, realized as
//! weighted-homogeneous monomial spaces with orthonormal bases.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::geometry::{holomorphic_tangent_basis, QuadratureGrid, Stratification, WeightedAction};
use crate::numeric::{ln_factorial, CompensatedSum};
use crate::Error;

/// Which L² inner product the norms refer to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    /// Round surface measure on S^{2n+1}.
    Sphere,
    /// Lebesgue measure on the unit ball of C^{n+1}.
    Ball,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FourierBasis {
    pub weights: Vec<u64>,
    /// Fourier weight (weighted degree) shared by all exponents.
    pub m: u64,
    pub exponents: Vec<Vec<u32>>,
    /// ln ‖z^α‖² for each exponent.
    pub ln_norm_sq: Vec<f64>,
    pub kind: NormKind,
}

impl FourierBasis {
    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.ln_norm_sq.iter().map(|l| (0.5 * l).exp()).collect()
    }

    /// Values of the orthonormal basis functions z^α/‖z^α‖ at a point.
    pub fn values(&self, z: &[C64]) -> Vec<C64> {
        let logs: Vec<(f64, f64)> = z.iter().map(|c| (c.norm().ln(), c.arg())).collect();
        self.exponents
            .iter()
            .zip(&self.ln_norm_sq)
            .map(|(a, ln)| {
                let mut lm = -0.5 * ln;
                let mut ph = 0.0;
                for (&aj, &(l, t)) in a.iter().zip(&logs) {
                    if aj > 0 {
                        if l == f64::NEG_INFINITY {
                            return C64::new(0.0, 0.0);
                        }
                        lm += aj as f64 * l;
                        ph += aj as f64 * t;
                    }
                }
                C64::from_polar(lm.exp(), ph)
            })
            .collect()
    }

    /// Σ_α |z^α|²/‖z^α‖², compensated.
    pub fn kernel_diagonal(&self, z: &[C64]) -> f64 {
        let logs: Vec<f64> = z.iter().map(|c| c.norm_sqr().ln()).collect();
        let mut acc = CompensatedSum::new();
        for (a, ln) in self.exponents.iter().zip(&self.ln_norm_sq) {
            let mut l = -ln;
            let mut zero = false;
            for (&aj, &lz) in a.iter().zip(&logs) {
                if aj > 0 {
                    if lz == f64::NEG_INFINITY {
                        zero = true;
                        break;
                    }
                    l += aj as f64 * lz;
                }
            }
            if !zero {
                acc.add(l.exp());
            }
        }
        acc.value()
    }
}

/// ‖z^α‖² = 2π^{n+1} α!/(n+|α|)! for the round measure on S^{2n+1}.
pub fn monomial_norm_sq(alpha: &[u32]) -> f64 {
    ln_monomial_norm_sq(alpha).exp()
}

pub fn ln_monomial_norm_sq(alpha: &[u32]) -> f64 {
    let n = alpha.len() as u64 - 1;
    let total: u64 = alpha.iter().map(|&a| a as u64).sum();
    (2.0f64).ln()
        + (n + 1) as f64 * PI.ln()
        + alpha.iter().map(|&a| ln_factorial(a as u64)).sum::<f64>()
        - ln_factorial(n + total)
}

/// Quadrature estimate of ∫|z^α|² dσ.
pub fn monomial_norm_sq_oracle(grid: &QuadratureGrid, alpha: &[u32]) -> f64 {
    grid.moment(alpha, alpha)
}

/// All α ∈ ℕ^{n+1} with Σ p_j α_j = m, ordered by decreasing α_1, then α_2, ….
pub fn weighted_exponents(weights: &[u64], m: u64) -> Vec<Vec<u32>> {
    fn rec(weights: &[u64], m: u64, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if weights.len() == 1 {
            if m % weights[0] == 0 {
                prefix.push((m / weights[0]) as u32);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        let p = weights[0];
        for a in (0..=m / p).rev() {
            prefix.push(a as u32);
            rec(&weights[1..], m - a * p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(weights, m, &mut Vec::new(), &mut out);
    out
}

pub fn fourier_basis(action: &WeightedAction, m: u64) -> FourierBasis {
    let exponents = weighted_exponents(action.weights(), m);
    let ln_norm_sq = exponents.iter().map(|a| ln_monomial_norm_sq(a)).collect();
    FourierBasis {
        weights: action.weights().to_vec(),
        m,
        exponents,
        ln_norm_sq,
        kind: NormKind::Sphere,
    }
}

/// Bases of H^0_{b,k_j α m}, j = 0..t−1.
pub fn assemble_am(
    action: &WeightedAction,
    strat: &Stratification,
    m: u64,
    k_list: &[u64],
) -> Result<Vec<FourierBasis>, Error> {
    validate_k_list(k_list)?;
    Ok(k_list
        .iter()
        .map(|&k| fourier_basis(action, k * strat.alpha * m))
        .collect())
}

pub fn validate_k_list(k_list: &[u64]) -> Result<(), Error> {
    if k_list.first() != Some(&1) {
        return Err(Error::InvalidInput("k_list must start at 1".into()));
    }
    if k_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "k_list must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// One Fourier component: its weight and coefficients against the orthonormal basis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Component {
    pub m: u64,
    pub coeffs: Vec<C64>,
}

/// A finite sum of Fourier components with strictly increasing weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CRSection {
    pub components: Vec<Component>,
}

impl CRSection {
    pub fn new(components: Vec<Component>) -> Result<Self, Error> {
        if components.windows(2).any(|w| w[1].m <= w[0].m) {
            return Err(Error::InvalidInput(
                "component weights must be strictly increasing".into(),
            ));
        }
        Ok(Self { components })
    }

    pub fn norm_sq(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.coeffs.iter())
            .map(|c| c.norm_sqr())
            .sum()
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| Component {
                    m: c.m,
                    coeffs: c.coeffs.iter().map(|v| v * s).collect(),
                })
                .collect(),
        }
    }

    /// Values u_j(z) of each component separately.
    pub fn component_values(&self, bases: &[FourierBasis], z: &[C64]) -> Vec<C64> {
        self.components
            .iter()
            .zip(bases)
            .map(|(c, b)| b.values(z).iter().zip(&c.coeffs).map(|(v, a)| v * a).sum())
            .collect()
    }
}

/// Σ_j Σ_α c_α z^α/‖z^α‖ at one point.
pub fn evaluate(section: &CRSection, bases: &[FourierBasis], z: &[C64]) -> C64 {
    section.component_values(bases, z).into_iter().sum()
}

pub fn evaluate_many(section: &CRSection, bases: &[FourierBasis], points: &[Vec<C64>]) -> Vec<C64> {
    points.iter().map(|z| evaluate(section, bases, z)).collect()
}

/// max |G − I| for the orthonormal basis under the grid, phases summed exactly.
pub fn gram_deviation(basis: &FourierBasis, grid: &QuadratureGrid) -> f64 {
    let d = basis.dim();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in i..d {
            let raw = grid.moment(&basis.exponents[i], &basis.exponents[j]);
            let g = raw * (-0.5 * (basis.ln_norm_sq[i] + basis.ln_norm_sq[j])).exp();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g - target).abs());
        }
    }
    worst
}

/// |∫ K_m(x,y) f_j(y) dσ(y) − f_j(x)| evaluated by brute-force quadrature over the grid nodes.
pub fn reproducing_error(basis: &FourierBasis, grid: &QuadratureGrid, j: usize, x: &[C64]) -> f64 {
    let fx = basis.values(x);
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    grid.for_each_node(|y, w| {
        let fy = basis.values(y);
        let k: C64 = fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).sum();
        let v = k * fy[j] * w;
        re.add(v.re);
        im.add(v.im);
    });
    (C64::new(re.value(), im.value()) - fx[j]).norm()
}

/// Size of the tangential Cauchy–Riemann derivative Z̄u at a sphere point,
/// computed by central differences along sphere curves with velocity U and iU.
pub fn cr_residual(section: &CRSection, bases: &[FourierBasis], x: &[C64], h: f64) -> f64 {
    let along = |v: &[C64], t: f64| -> C64 {
        let p: Vec<C64> = x.iter().zip(v).map(|(a, b)| a + b * t).collect();
        let nrm = p.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let p: Vec<C64> = p.iter().map(|c| c / nrm).collect();
        evaluate(section, bases, &p)
    };
    let mut worst: f64 = 0.0;
    for u in holomorphic_tangent_basis(x) {
        let iu: Vec<C64> = u.iter().map(|c| c * C64::i()).collect();
        let du = (along(&u, h) - along(&u, -h)) / (2.0 * h);
        let diu = (along(&iu, h) - along(&iu, -h)) / (2.0 * h);
        let zbar = 0.5 * (du + C64::i() * diu);
        worst = worst.max(zbar.norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_sphere_grid;

    #[test]
    fn enumeration_examples() {
        let a = WeightedAction::new(&[1, 1]).unwrap();
        assert_eq!(
            fourier_basis(&a, 3).exponents,
            vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]
        );
        let a = WeightedAction::new(&[1, 2]).unwrap();
        assert_eq!(
            fourier_basis(&a, 4).exponents,
            vec![vec![4, 0], vec![2, 1], vec![0, 2]]
        );
        assert_eq!(fourier_basis(&a, 1).exponents, vec![vec![1, 0]]);
        assert_eq!(fourier_basis(&a, 0).exponents, vec![vec![0, 0]]);
    }

    #[test]
    fn closed_form_norms() {
        let pi2 = PI * PI;
        assert!((monomial_norm_sq(&[0, 0]) - 2.0 * pi2).abs() < 1e-13);
        assert!((monomial_norm_sq(&[1, 0]) - pi2).abs() < 1e-13);
        assert!((monomial_norm_sq(&[2, 3]) - pi2 / 30.0).abs() < 1e-14);
        let g = build_sphere_grid(1, 4).unwrap();
        assert!((monomial_norm_sq_oracle(&g, &[2, 3]) - pi2 / 30.0).abs() < 1e-13);
    }

    #[test]
    fn evaluate_normalized_coordinate() {
        let a = WeightedAction::standard(1);
        let b = fourier_basis(&a, 1);
        let s = CRSection::new(vec![Component {
            m: 1,
            coeffs: vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
        }])
        .unwrap();
        let v = evaluate(&s, &[b], &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!((v - C64::new(1.0 / PI, 0.0)).norm() < 1e-15);
    }
}
