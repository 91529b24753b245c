//! Weighted spheres S^{2n+1} with a diagonal circle action, their orbit-type
//! strata, the Reeb/Levi data of the round contact structure, and tensor
//! quadrature grids in Hopf coordinates.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::numeric::{gauss_legendre_on, gcd, lcm, CompensatedSum};
use crate::Error;

/// Diagonal circle action e^{iθ}∘z = (e^{ip_1θ}z_1, …, e^{ip_{n+1}θ}z_{n+1}).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightedAction {
    weights: Vec<u64>,
}

impl WeightedAction {
    pub fn new(weights: &[u64]) -> Result<Self, Error> {
        if weights.len() < 2 {
            return Err(Error::InvalidInput("need at least two weights".into()));
        }
        if weights.iter().any(|&p| p == 0) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let g = weights.iter().fold(0, |g, &p| gcd(g, p));
        if g != 1 {
            return Err(Error::InvalidInput(format!(
                "weights {weights:?} have gcd {g}; normalize the action first"
            )));
        }
        Ok(Self {
            weights: weights.to_vec(),
        })
    }

    /// The standard free action with all weights 1.
    pub fn standard(n: usize) -> Self {
        Self {
            weights: vec![1; n + 1],
        }
    }

    /// CR dimension n (the sphere is S^{2n+1} ⊂ C^{n+1}).
    pub fn n(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn act(&self, z: &[C64], theta: f64) -> Vec<C64> {
        z.iter()
            .zip(&self.weights)
            .map(|(zj, &p)| zj * C64::from_polar(1.0, p as f64 * theta))
            .collect()
    }

    /// ρ_p(z) = Σ p_j |z_j|².
    pub fn rho(&self, z: &[C64]) -> f64 {
        z.iter()
            .zip(&self.weights)
            .map(|(zj, &p)| p as f64 * zj.norm_sqr())
            .sum()
    }

    /// Weighted degree ⟨p, α⟩ of a multi-index.
    pub fn weighted_degree(&self, alpha: &[u32]) -> u64 {
        alpha
            .iter()
            .zip(&self.weights)
            .map(|(&a, &p)| a as u64 * p)
            .sum()
    }
}

/// Points sharing one orbit period.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StratumDescriptor {
    pub period: u64,
    /// Coordinate supports (0-based index sets) whose points have this period.
    pub supports: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stratification {
    pub weights: Vec<u64>,
    pub periods: Vec<u64>,
    pub alpha: u64,
    pub strata: Vec<StratumDescriptor>,
}

impl Stratification {
    pub fn t(&self) -> usize {
        self.periods.len()
    }

    /// Period of a point: gcd of the weights over its support.
    pub fn period_of(&self, x: &[C64]) -> u64 {
        x.iter()
            .zip(&self.weights)
            .filter(|(z, _)| z.norm() > 1e-14)
            .fold(0, |g, (_, &p)| gcd(g, p))
    }

    /// Indices of strata whose descriptors match the support of `x`.
    pub fn matching_strata(&self, x: &[C64]) -> Vec<usize> {
        let support: Vec<usize> = (0..x.len()).filter(|&j| x[j].norm() > 1e-14).collect();
        self.strata
            .iter()
            .enumerate()
            .filter(|(_, s)| s.supports.iter().any(|sup| *sup == support))
            .map(|(i, _)| i)
            .collect()
    }
}

pub fn stratify(action: &WeightedAction) -> Stratification {
    let w = action.weights();
    let k = w.len();
    let mut by_period: Vec<StratumDescriptor> = Vec::new();
    for mask in 1u32..(1u32 << k) {
        let support: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let period = support.iter().fold(0, |g, &j| gcd(g, w[j]));
        match by_period.iter_mut().find(|s| s.period == period) {
            Some(s) => s.supports.push(support),
            None => by_period.push(StratumDescriptor {
                period,
                supports: vec![support],
            }),
        }
    }
    by_period.sort_by_key(|s| s.period);
    let periods: Vec<u64> = by_period.iter().map(|s| s.period).collect();
    let alpha = periods.iter().fold(1, |a, &p| lcm(a, p));
    Stratification {
        weights: w.to_vec(),
        periods,
        alpha,
        strata: by_period,
    }
}

/// Chordal distance from a unit vector `x` to the closure of the points whose
/// period is at least `period`.
pub fn dist_to_stratum(x: &[C64], period: u64, strat: &Stratification) -> f64 {
    if period <= 1 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for s in strat.strata.iter().filter(|s| s.period >= period) {
        for sup in &s.supports {
            let a: f64 = sup.iter().map(|&j| x[j].norm_sqr()).sum::<f64>().sqrt();
            let d = (2.0 - 2.0 * a).max(0.0).sqrt();
            best = best.min(d);
        }
    }
    best
}

/// Real one-form on C^{n+1} ≅ R^{2n+2}, coefficients on (da_1, db_1, …) with z_j = a_j + i b_j.
pub type RealOneForm = Vec<f64>;

/// Reeb one form ω0 = −η_std/ρ_p at a sphere point.
pub fn reeb_form(action: &WeightedAction, z: &[C64]) -> RealOneForm {
    let rho = action.rho(z);
    let mut out = Vec::with_capacity(2 * z.len());
    for zj in z {
        // η_std = Σ a db − b da
        out.push(zj.im / rho);
        out.push(-zj.re / rho);
    }
    out
}

/// The action generator T at z as a real tangent vector.
pub fn reeb_vector(action: &WeightedAction, z: &[C64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * z.len());
    for (zj, &p) in z.iter().zip(action.weights()) {
        let v = C64::i() * p as f64 * zj;
        out.push(v.re);
        out.push(v.im);
    }
    out
}

/// Pairing of a real one-form with a complex vector Σ U_j ∂/∂z_j + Σ V_j ∂/∂z̄_j.
pub fn pair_one_form(form: &[f64], u: &[C64], v: &[C64]) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..u.len() {
        let (a, b) = (form[2 * j], form[2 * j + 1]);
        let holo = 0.5 * C64::new(a, -b);
        acc += holo * u[j] + holo.conj() * v[j];
    }
    acc
}

/// An orthonormal basis of T^{1,0}_z X = {U : Σ z̄_j U_j = 0}.
pub fn holomorphic_tangent_basis(z: &[C64]) -> Vec<Vec<C64>> {
    let dim = z.len();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for e in 0..dim {
        let mut v = vec![C64::new(0.0, 0.0); dim];
        v[e] = C64::new(1.0, 0.0);
        let project = |v: &mut Vec<C64>, w: &[C64]| {
            let ww: f64 = w.iter().map(|a| a.norm_sqr()).sum();
            let c: C64 = w
                .iter()
                .zip(v.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                / ww;
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= c * wi;
            }
        };
        project(&mut v, z);
        for b in &basis {
            project(&mut v, b);
        }
        let nrm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            v.iter_mut().for_each(|c| *c /= nrm);
            basis.push(v);
        }
        if basis.len() == dim - 1 {
            break;
        }
    }
    basis
}

/// Levi form L_X(U, V̄) = (i/2)·dω0(U, V̄) at a sphere point.
///
/// dω0 = −dη_std/ρ_p + dρ_p∧η_std/ρ_p²; both pieces are evaluated, the second
/// vanishes on the contact distribution.
pub fn levi_form(action: &WeightedAction, z: &[C64], u: &[C64], v: &[C64]) -> C64 {
    let rho = action.rho(z);
    // dη_std = i Σ dz_j∧dz̄_j, evaluated on (U, V̄)
    let deta: C64 = C64::i() * u.iter().zip(v).map(|(a, b)| a * b.conj()).sum::<C64>();
    // dρ(U) = Σ p_j z̄_j U_j, dρ(V̄) = Σ p_j z_j V̄_j, η(U) = (i/2)Σ... via pair_one_form
    let eta: Vec<f64> = z.iter().flat_map(|zj| [-zj.im, zj.re]).collect();
    let zero = vec![C64::new(0.0, 0.0); z.len()];
    let vbar: Vec<C64> = v.iter().map(|c| c.conj()).collect();
    let eta_u = pair_one_form(&eta, u, &zero);
    let eta_vbar = pair_one_form(&eta, &zero, &vbar);
    let w = action.weights();
    let drho_u: C64 = (0..z.len()).map(|j| w[j] as f64 * z[j].conj() * u[j]).sum();
    let drho_vbar: C64 = (0..z.len()).map(|j| w[j] as f64 * z[j] * vbar[j]).sum();
    let wedge = drho_u * eta_vbar - drho_vbar * eta_u;
    let domega = -deta / rho + wedge / (rho * rho);
    0.5 * C64::i() * domega
}

/// Hermitian Levi matrix in the orthonormal frame of `holomorphic_tangent_basis`.
pub fn levi_matrix(action: &WeightedAction, z: &[C64]) -> Vec<Vec<C64>> {
    let b = holomorphic_tangent_basis(z);
    b.iter()
        .map(|u| b.iter().map(|v| levi_form(action, z, u, v)).collect())
        .collect()
}

/// Tensor quadrature on S^{2n+1}: a collapsed Gauss rule on the moment simplex
/// s_j = |z_j|² times uniform grids in each phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub n: usize,
    /// Simplex nodes (each sums to 1) with their weights in the measure ds_1…ds_n.
    pub simplex: Vec<(Vec<f64>, f64)>,
    pub phases: usize,
    pub order_tag: String,
}

/// Default node cap for sphere grids.
pub const DEFAULT_NODE_CAP: usize = 20_000_000;

pub fn build_sphere_grid(n: usize, level: usize) -> Result<QuadratureGrid, Error> {
    build_sphere_grid_capped(n, level, DEFAULT_NODE_CAP)
}

pub fn build_sphere_grid_capped(
    n: usize,
    level: usize,
    cap: usize,
) -> Result<QuadratureGrid, Error> {
    if level == 0 {
        return Err(Error::InvalidInput("grid level must be >= 1".into()));
    }
    let ns = level + n + 1;
    let phases = 4 * level + 2;
    let count = (ns as f64).powi(n as i32) * (phases as f64).powi(n as i32 + 1);
    if count > cap as f64 {
        return Err(Error::Resource(format!(
            "sphere grid n={n} level={level} needs {count:.0} nodes (cap {cap})"
        )));
    }
    let simplex = simplex_rule(n, ns);
    Ok(QuadratureGrid {
        n,
        simplex,
        phases,
        order_tag: format!(
            "hopf-gauss n={n} simplex={ns}^{n} phases={phases}^{}",
            n + 1
        ),
    })
}

/// Collapsed-coordinate Gauss rule on {s ≥ 0, Σ s = 1} in the measure ds_1…ds_n.
fn simplex_rule(n: usize, ns: usize) -> Vec<(Vec<f64>, f64)> {
    let (u, w) = gauss_legendre_on(ns, 0.0, 1.0);
    let mut out = Vec::new();
    let total = ns.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut s = vec![0.0; n + 1];
        let mut left = 1.0;
        let mut weight = 1.0;
        for i in 0..n {
            let k = rem % ns;
            rem /= ns;
            s[i] = left * u[k];
            weight *= w[k] * left;
            left *= 1.0 - u[k];
        }
        s[n] = left;
        out.push((s, weight));
    }
    out
}

impl QuadratureGrid {
    pub fn len(&self) -> usize {
        self.simplex.len() * self.phases.pow(self.n as u32 + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Factor turning simplex weights into surface weights once phases are summed.
    fn phase_factor(&self) -> f64 {
        (2.0 * PI / self.phases as f64).powi(self.n as i32 + 1) / 2f64.powi(self.n as i32)
    }

    pub fn total_weight(&self) -> f64 {
        let mut acc = CompensatedSum::new();
        for (_, w) in &self.simplex {
            acc.add(*w);
        }
        acc.value() * (2.0 * PI).powi(self.n as i32 + 1) / 2f64.powi(self.n as i32)
    }

    /// Visit every node (z, weight) in a fixed order.
    pub fn for_each_node<F: FnMut(&[C64], f64)>(&self, mut f: F) {
        let k = self.n + 1;
        let np = self.phases;
        let pf = self.phase_factor();
        let total_phase = np.pow(k as u32);
        let mut z = vec![C64::new(0.0, 0.0); k];
        let cis: Vec<C64> = (0..np)
            .map(|j| C64::from_polar(1.0, 2.0 * PI * j as f64 / np as f64))
            .collect();
        for (s, w) in &self.simplex {
            let r: Vec<f64> = s.iter().map(|v| v.max(0.0).sqrt()).collect();
            for idx in 0..total_phase {
                let mut rem = idx;
                for j in 0..k {
                    z[j] = cis[rem % np] * r[j];
                    rem /= np;
                }
                f(&z, w * pf);
            }
        }
    }

    /// Integrate a complex function over the sphere.
    pub fn integrate<F: Fn(&[C64]) -> C64>(&self, f: F) -> C64 {
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        self.for_each_node(|z, w| {
            let v = f(z) * w;
            re.add(v.re);
            im.add(v.im);
        });
        C64::new(re.value(), im.value())
    }

    /// Integrate a function of the moduli s_j = |z_j|² only; phases summed analytically.
    pub fn integrate_torus_invariant<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for (s, w) in &self.simplex {
            acc.add(w * f(s));
        }
        acc.value() * (2.0 * PI).powi(self.n as i32 + 1) / 2f64.powi(self.n as i32)
    }

    /// Quadrature value of ∫ z^α z̄^β dσ, with the phase sums done in closed form.
    pub fn moment(&self, alpha: &[u32], beta: &[u32]) -> f64 {
        let np = self.phases as i64;
        for (a, b) in alpha.iter().zip(beta) {
            if (*a as i64 - *b as i64).rem_euclid(np) != 0 {
                return 0.0;
            }
        }
        let half: Vec<f64> = alpha
            .iter()
            .zip(beta)
            .map(|(a, b)| 0.5 * (*a as f64 + *b as f64))
            .collect();
        self.integrate_torus_invariant(|s| {
            s.iter()
                .zip(&half)
                .map(|(sj, h)| if *h == 0.0 { 1.0 } else { sj.powf(*h) })
                .product()
        })
    }

    /// Write nodes as CSV: re/im of each coordinate, then the weight, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let k = self.n + 1;
        let mut header: Vec<String> = Vec::new();
        for j in 1..=k {
            header.push(format!("z{j}_re"));
            header.push(format!("z{j}_im"));
        }
        header.push("weight".into());
        writeln!(out, "{}", header.join(","))?;
        let mut err = Ok(());
        self.for_each_node(|z, w| {
            if err.is_err() {
                return;
            }
            let mut row: Vec<String> = z
                .iter()
                .flat_map(|c| [format!("{:.16e}", c.re), format!("{:.16e}", c.im)])
                .collect();
            row.push(format!("{w:.16e}"));
            err = writeln!(out, "{}", row.join(","));
        });
        err
    }
}

/// (i/π)∫_X L_X∧f∧ω0, optionally with a pointwise weight.
///
/// For n ≥ 2 the scalar f stands for the (n−1,n−1) form f·(iL_X)^{n−1}/(n−1)!.
/// The integrand is the positive density (n/π)·f·w/ρ_p^{n+1} against dσ.
pub fn levi_pairing_integral<F, W>(
    action: &WeightedAction,
    grid: &QuadratureGrid,
    f: F,
    weight: Option<W>,
) -> C64
where
    F: Fn(&[C64]) -> C64,
    W: Fn(&[C64]) -> f64,
{
    let n = action.n() as f64;
    let nn = action.n() as i32;
    grid.integrate(|z| {
        let rho = action.rho(z);
        let w = weight.as_ref().map_or(1.0, |g| g(z));
        f(z) * (n / PI * w / rho.powi(nn + 1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn stratify_small_weights() {
        let s = stratify(&WeightedAction::new(&[1, 1]).unwrap());
        assert_eq!(s.periods, vec![1]);
        assert_eq!(s.alpha, 1);
        let s = stratify(&WeightedAction::new(&[1, 2]).unwrap());
        assert_eq!(s.periods, vec![1, 2]);
        assert_eq!(s.alpha, 2);
        let two = s.strata.iter().find(|d| d.period == 2).unwrap();
        assert_eq!(two.supports, vec![vec![1]]);
        let s = stratify(&WeightedAction::new(&[2, 3]).unwrap());
        assert_eq!(s.periods, vec![1, 2, 3]);
        assert_eq!(s.alpha, 6);
    }

    #[test]
    fn rejects_non_normalized_weights() {
        assert!(WeightedAction::new(&[2, 4]).is_err());
    }

    #[test]
    fn distance_to_singular_circle() {
        let a = WeightedAction::new(&[1, 2]).unwrap();
        let s = stratify(&a);
        assert_eq!(dist_to_stratum(&[c(0.0, 0.0), c(1.0, 0.0)], 2, &s), 0.0);
        let d = dist_to_stratum(&[c(1.0, 0.0), c(0.0, 0.0)], 2, &s);
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(dist_to_stratum(&[c(0.6, 0.0), c(0.0, 0.8)], 1, &s), 0.0);
    }

    #[test]
    fn sphere_area_and_half_moment() {
        let g = build_sphere_grid(1, 4).unwrap();
        assert!((g.total_weight() - 2.0 * PI * PI).abs() < 1e-12);
        let m = g.moment(&[1, 0], &[1, 0]);
        assert!((m - PI * PI).abs() < 1e-12);
        let direct = g.integrate(|z| C64::new(z[0].norm_sqr(), 0.0));
        assert!((direct.re - PI * PI).abs() < 1e-11);
        let g2 = build_sphere_grid(2, 2).unwrap();
        assert!((g2.total_weight() - PI.powi(3)).abs() < 1e-11);
    }

    #[test]
    fn reeb_normalization_and_levi_positivity() {
        let a = WeightedAction::new(&[1, 2]).unwrap();
        let z = [c(0.6, 0.3), c(0.2, -(1.0f64 - 0.45 - 0.04).sqrt())];
        let w = reeb_form(&a, &z);
        let t = reeb_vector(&a, &z);
        let val: f64 = w.iter().zip(&t).map(|(x, y)| x * y).sum();
        assert!((val + 1.0).abs() < 1e-12);
        let b = holomorphic_tangent_basis(&z);
        assert_eq!(b.len(), 1);
        let zero = vec![c(0.0, 0.0); 2];
        assert!(pair_one_form(&w, &b[0], &zero).norm() < 1e-12);
        let l = levi_matrix(&a, &z);
        assert!(l[0][0].re > 0.0 && l[0][0].im.abs() < 1e-14);
        assert!((l[0][0].re - 0.5 / a.rho(&z)).abs() < 1e-12);
    }

    #[test]
    fn free_levi_constant() {
        let a = WeightedAction::standard(1);
        let g = build_sphere_grid(1, 3).unwrap();
        let v = levi_pairing_integral(&a, &g, |_| C64::new(1.0, 0.0), None::<fn(&[C64]) -> f64>);
        assert!((v.re - 2.0 * PI).abs() < 1e-12);
    }
}
