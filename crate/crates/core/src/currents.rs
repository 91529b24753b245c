//! Zero currents of random CR functions, paired against test forms on X×ℝ.
//!
//! X×ℝ is identified with C^{n+1}∖{0} through z_j = e^{−p_jη}x_j. A CR
//! function with Fourier components u_j of weights m_j then extends to the
//! polynomial U(z) = Σ_j u_j(z), whose restriction to the slice η is
//! Σ_j e^{−m_jη}u_j(x).
//!
//! Orientation: the test form f∧ω0∧χ_ε(η)dη is realized as Φ = f·χ_ε(η)·dη∧ω0,
//! which makes the zero current of z_1^m pair positively with f ≡ 1.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::crspace::{evaluate, CRSection, FourierBasis};
use crate::fiber::{FiberPlan, FiberResolution, FlatTestForm};
use crate::geometry::{levi_pairing_integral, QuadratureGrid, WeightedAction};
use crate::numeric::{bump, CompensatedSum};
use crate::poly::{cluster_roots, roots_aberth, roots_companion};
use crate::Error;

/// A real test function f(x) = Re Σ c·x^α·x̄^β on the sphere.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFunction {
    pub terms: Vec<(C64, Vec<u32>, Vec<u32>)>,
}

impl TestFunction {
    pub fn constant(n: usize, c: f64) -> Self {
        Self {
            terms: vec![(C64::new(c, 0.0), vec![0; n + 1], vec![0; n + 1])],
        }
    }

    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// Re(x_1·x̄_2) on S³.
    pub fn re_z1_zbar2() -> Self {
        Self {
            terms: vec![(C64::new(1.0, 0.0), vec![1, 0], vec![0, 1])],
        }
    }

    pub fn sum(&self, other: &TestFunction) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self { terms }
    }

    pub fn eval(&self, x: &[C64]) -> f64 {
        let mut acc = 0.0;
        for (c, a, b) in &self.terms {
            let mut v = *c;
            for (j, xj) in x.iter().enumerate() {
                if a[j] > 0 {
                    v *= xj.powu(a[j]);
                }
                if b[j] > 0 {
                    v *= xj.conj().powu(b[j]);
                }
            }
            acc += v.re;
        }
        acc
    }

    /// Largest |frequency| of f along orbits of the action.
    pub fn charge(&self, weights: &[u64]) -> usize {
        self.terms
            .iter()
            .map(|(_, a, b)| {
                let q: i64 = weights
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(&p, (&ai, &bi))| p as i64 * (ai as i64 - bi as i64))
                    .sum();
                q.unsigned_abs() as usize
            })
            .max()
            .unwrap_or(0)
    }

    /// Whether f depends on the phases of x_2, …, x_{n+1} relative to x_1.
    pub fn phase_dependent(&self) -> bool {
        self.terms
            .iter()
            .any(|(_, a, b)| a.iter().zip(b).skip(1).any(|(x, y)| x != y))
    }
}

/// Test data of the equidistribution statement: f, the bump χ and the rule ε_m.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFormPackage {
    pub f: TestFunction,
    /// ε_m = m^{−eps_power}.
    pub eps_power: f64,
}

impl TestFormPackage {
    pub fn new(f: TestFunction) -> Self {
        Self { f, eps_power: 1.5 }
    }

    pub fn eps(&self, m: u64) -> f64 {
        (m.max(1) as f64).powf(-self.eps_power)
    }

    /// χ_ε(η) = χ(η/ε)/ε with χ the unit-mass bump on (−1, 1).
    pub fn chi_eps(&self, eta: f64, eps: f64) -> f64 {
        bump(eta / eps) / eps
    }
}

/// Solves Σ e^{2p_jη}|z_j|² = 1, returning η and the sphere point x = e^{pη}∘z.
pub fn cone_coordinates(weights: &[u64], z: &[C64]) -> (f64, Vec<C64>) {
    let r2: Vec<f64> = z.iter().map(|c| c.norm_sqr()).collect();
    let eta = if weights.iter().all(|&p| p == weights[0]) {
        -0.5 * r2.iter().sum::<f64>().ln() / weights[0] as f64
    } else {
        // ln Σ e^{2pη}|z|² is convex increasing in η; Newton from the right converges monotonically
        let mut eta = weights
            .iter()
            .zip(&r2)
            .filter(|(_, &r)| r > 0.0)
            .map(|(&p, &r)| -0.5 * r.ln() / p as f64)
            .fold(f64::INFINITY, f64::min);
        for _ in 0..100 {
            let mut s = 0.0;
            let mut ds = 0.0;
            for (&p, &r) in weights.iter().zip(&r2) {
                let t = (2.0 * p as f64 * eta).exp() * r;
                s += t;
                ds += 2.0 * p as f64 * t;
            }
            let step = s.ln() * s / ds;
            eta -= step;
            if step.abs() <= 1e-16 * (1.0 + eta.abs()) {
                break;
            }
        }
        eta
    };
    let x = z
        .iter()
        .zip(weights)
        .map(|(c, &p)| c * (p as f64 * eta).exp())
        .collect();
    (eta, x)
}

/// The flat form Φ = f(x)·χ_ε(η)·dη∧ω0 on C², through its (1,1) part.
pub struct CrTestForm {
    pub weights: [u64; 2],
    pub f: TestFunction,
    pub eps: f64,
}

impl FlatTestForm for CrTestForm {
    fn coeffs(&self, z: [C64; 2]) -> [[C64; 2]; 2] {
        let zero = [[C64::new(0.0, 0.0); 2]; 2];
        let (eta, x) = cone_coordinates(&self.weights, &z);
        if eta.abs() >= self.eps {
            return zero;
        }
        let g = self.f.eval(&x) * bump(eta / self.eps) / self.eps;
        if g == 0.0 {
            return zero;
        }
        let p = [self.weights[0] as f64, self.weights[1] as f64];
        let rho = p[0] * x[0].norm_sqr() + p[1] * x[1].norm_sqr();
        let mut b = zero;
        for j in 0..2 {
            for k in 0..2 {
                b[j][k] = z[j].conj()
                    * z[k]
                    * (g * (2.0 * (p[j] + p[k]) * eta).exp() / (2.0 * rho * rho));
            }
        }
        b
    }

    fn s_range(&self) -> (f64, f64) {
        (-self.eps, self.eps)
    }

    fn theta_modes(&self) -> usize {
        self.f.charge(&self.weights)
    }

    fn psi_dependent(&self) -> bool {
        self.f.phase_dependent()
    }

    fn fd_step(&self) -> f64 {
        3e-3 * self.eps
    }
}

/// A CR section together with its cone polynomial.
#[derive(Clone, Debug)]
pub struct ExtendedSection {
    pub section: CRSection,
    pub bases: Vec<FourierBasis>,
}

pub fn extend(section: &CRSection, bases: &[FourierBasis]) -> Result<ExtendedSection, Error> {
    if section.components.len() != bases.len() {
        return Err(Error::InvalidInput(
            "one basis per component required".into(),
        ));
    }
    for (c, b) in section.components.iter().zip(bases) {
        if c.m != b.m || c.coeffs.len() != b.dim() {
            return Err(Error::InvalidInput(format!(
                "component of weight {} does not match basis of weight {} (dim {})",
                c.m,
                b.m,
                b.dim()
            )));
        }
    }
    Ok(ExtendedSection {
        section: section.clone(),
        bases: bases.to_vec(),
    })
}

impl ExtendedSection {
    pub fn weights(&self) -> &[u64] {
        &self.bases[0].weights
    }

    /// U(z) for z ∈ C^{n+1}.
    pub fn eval(&self, z: &[C64]) -> C64 {
        evaluate(&self.section, &self.bases, z)
    }

    /// U at the point of X×ℝ with coordinates (x, η).
    pub fn slice(&self, x: &[C64], eta: f64) -> C64 {
        let z: Vec<C64> = x
            .iter()
            .zip(self.weights())
            .map(|(c, &p)| c * (-(p as f64) * eta).exp())
            .collect();
        self.eval(&z)
    }

    /// Σ_j e^{−m_jη}u_j(x).
    pub fn v(&self, x: &[C64], eta: f64) -> C64 {
        self.section
            .component_values(&self.bases, x)
            .into_iter()
            .zip(&self.section.components)
            .map(|(u, c)| u * (-(c.m as f64) * eta).exp())
            .sum()
    }

    /// Terms (m_j, u_j(x)) of U restricted to the orbit through x.
    pub fn fiber_terms(&self, x: &[C64], out: &mut Vec<(u64, C64)>) {
        for (u, c) in self
            .section
            .component_values(&self.bases, x)
            .into_iter()
            .zip(&self.section.components)
        {
            out.push((c.m, u));
        }
    }

    pub fn degrees(&self) -> Vec<u64> {
        self.section.components.iter().map(|c| c.m).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    Roots,
    WeakLog,
    ExpectedKernel,
}

impl Evaluator {
    pub fn name(&self) -> &'static str {
        match self {
            Evaluator::Roots => "roots",
            Evaluator::WeakLog => "weak_log",
            Evaluator::ExpectedKernel => "expected_kernel",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairingResult {
    pub value: C64,
    pub evaluator: Evaluator,
    pub error_estimate: f64,
    pub m: u64,
    pub k_list: Vec<u64>,
    pub trial: Option<u64>,
    pub components: usize,
    /// False when a refinement check disagreed by more than its declared tolerance.
    pub converged: bool,
    pub notes: Vec<String>,
}

/// ∫ over the orbit through x of f·ω0, oriented positively. Orbits inside a
/// coordinate axis are covered p times by θ ∈ [0, 2π) and weighted 1/p.
pub fn orbit_integral(weights: &[u64], f: &TestFunction, x: &[C64]) -> f64 {
    let period = x
        .iter()
        .zip(weights)
        .filter(|(c, _)| c.norm() > 0.0)
        .fold(0, |g, (_, &p)| crate::numeric::gcd(g, p))
        .max(1);
    let nt = 2 * f.charge(weights) + 8;
    let mut acc = CompensatedSum::new();
    for k in 0..nt {
        let th = 2.0 * PI * k as f64 / nt as f64;
        let y: Vec<C64> = x
            .iter()
            .zip(weights)
            .map(|(c, &p)| c * C64::from_polar(1.0, p as f64 * th))
            .collect();
        acc.add(f.eval(&y));
    }
    acc.value() * 2.0 * PI / nt as f64 / period as f64
}

/// Exact pairing for a single-component section on a weighted S³: the zero set
/// is a finite union of orbits, found from the roots of the dehomogenized form.
pub fn pair_roots(ext: &ExtendedSection, pkg: &TestFormPackage) -> Result<PairingResult, Error> {
    let w = ext.weights();
    if w.len() != 2 {
        return Err(Error::InvalidInput("pair_roots needs n = 1".into()));
    }
    if ext.section.components.len() != 1 {
        return Err(Error::InvalidInput(
            "pair_roots needs a single Fourier component".into(),
        ));
    }
    let (p1, p2) = (w[0], w[1]);
    let basis = &ext.bases[0];
    let comp = &ext.section.components[0];
    let coeffs: Vec<C64> = comp
        .coeffs
        .iter()
        .zip(basis.norms())
        .map(|(c, nrm)| c / nrm)
        .collect();
    let cmax = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if cmax == 0.0 {
        return Err(Error::InvalidInput("zero section has no divisor".into()));
    }
    let mut notes = Vec::new();
    // U = z_1^{a} z_2^{a0} R(w), w = z_2^{p1}/z_1^{p2}; monomials ordered by α_2 = a0 + p1·k
    let live: Vec<(usize, C64)> = basis
        .exponents
        .iter()
        .zip(&coeffs)
        .filter(|(_, c)| c.norm() > 1e-12 * cmax)
        .map(|(a, c)| (a[1] as usize, *c))
        .collect();
    if live.len() < coeffs.iter().filter(|c| c.norm() > 0.0).count() {
        notes.push(
            "dropped coefficients below 1e-12 relative (degree drop to an axis orbit)".into(),
        );
    }
    let a2_min = live.iter().map(|t| t.0).min().unwrap();
    let a2_max = live.iter().map(|t| t.0).max().unwrap();
    let p1u = p1 as usize;
    let deg = (a2_max - a2_min) / p1u;
    let mut r = vec![C64::new(0.0, 0.0); deg + 1];
    for (a2, c) in &live {
        r[(a2 - a2_min) / p1u] = *c;
    }
    let mult_z2_axis = a2_min;
    let mult_z1_axis = ((comp.m - p2 * a2_max as u64) / p1) as usize;

    let f = &pkg.f;
    let orbit_of_root = |wr: C64| -> Vec<C64> {
        // z = (1, w^{1/p1}) projected along the action onto the sphere
        let z2 = if p1 == 1 {
            wr
        } else {
            wr.powf(1.0 / p1 as f64)
        };
        cone_coordinates(w, &[C64::new(1.0, 0.0), z2]).1
    };
    let sum_roots = |roots: &[C64]| -> f64 {
        let mut acc = CompensatedSum::new();
        for (root, mult) in cluster_roots(roots, 1e-8) {
            acc.add(mult as f64 * orbit_integral(w, f, &orbit_of_root(root)));
        }
        acc.value()
    };
    let axis = mult_z1_axis as f64
        * orbit_integral(w, f, &[C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
        + mult_z2_axis as f64 * orbit_integral(w, f, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    let (value, err) = if deg == 0 {
        (axis, 0.0)
    } else {
        let comp_roots = roots_companion(&r);
        let (polished, _) = roots_aberth(&r, Some(&comp_roots), 1e-15, 50);
        let a = sum_roots(&comp_roots);
        let b = sum_roots(&polished);
        (axis + b, (a - b).abs())
    };
    Ok(PairingResult {
        value: C64::new(value, 0.0),
        evaluator: Evaluator::Roots,
        error_estimate: err + 1e-12 * value.abs(),
        m: comp.m,
        k_list: Vec::new(),
        trial: None,
        components: 1,
        converged: true,
        notes,
    })
}

/// Default clip level L = 40 + 2·ln m for log|U|.
pub fn default_clip(m: u64) -> f64 {
    40.0 + 2.0 * (m.max(1) as f64).ln()
}

/// Fiber grid adequate for sections of top weighted degree `max_degree`.
pub fn default_cr_resolution(weights: [u64; 2], max_degree: u64) -> FiberResolution {
    let d = max_degree as usize;
    let psi_freq = d / weights[1] as usize;
    FiberResolution {
        n_q: 24 + d,
        n_psi: 32 + 2 * psi_freq,
        n_cheb: 120,
    }
}

/// Weak evaluator (i/π)∫ log|U| ∂∂̄Φ for one test package at one m, on a base
/// grid and optionally a 1.5× refined grid.
pub struct WeakEvaluator {
    pub m: u64,
    pub eps: f64,
    pub clip: f64,
    pub coarse: FiberPlan,
    pub fine: Option<FiberPlan>,
    /// Relative disagreement allowed between the two grids.
    pub tolerance: f64,
}

impl WeakEvaluator {
    pub fn new(
        weights: [u64; 2],
        pkg: &TestFormPackage,
        m: u64,
        res: FiberResolution,
        refine: bool,
    ) -> Self {
        let eps = pkg.eps(m);
        let form = CrTestForm {
            weights,
            f: pkg.f.clone(),
            eps,
        };
        let coarse = FiberPlan::new(weights, &form, res);
        let fine = refine.then(|| FiberPlan::new(weights, &form, res.scaled(1.5)));
        Self {
            m,
            eps,
            clip: default_clip(m),
            coarse,
            fine,
            tolerance: 0.01,
        }
    }

    fn run(plan: &FiberPlan, ext: &ExtendedSection, clip: f64) -> (f64, usize) {
        let p = plan.pair(|_, _, x, out| ext.fiber_terms(x, out), clip);
        (p.value, p.clipped + p.null_fibers)
    }

    /// The pairing on the finest available grid with error bars from the grid
    /// comparison and from doubling the clip level when clipping occurred.
    pub fn pair(&self, ext: &ExtendedSection) -> PairingResult {
        let mut notes = Vec::new();
        if ext.section.components.len() > 1 {
            notes.push("multi-component section: slice zero sets are not orbit unions".into());
        }
        let (v0, c0) = Self::run(&self.coarse, ext, self.clip);
        let (value, clipped, grid_err) = match &self.fine {
            Some(fine) => {
                let (v1, c1) = Self::run(fine, ext, self.clip);
                (v1, c1, (v1 - v0).abs())
            }
            None => (v0, c0, 0.0),
        };
        let clip_err = if clipped > 0 {
            let plan = self.fine.as_ref().unwrap_or(&self.coarse);
            let (v2, _) = Self::run(plan, ext, 2.0 * self.clip);
            notes.push(format!("{clipped} clipped nodes"));
            (v2 - value).abs()
        } else {
            0.0
        };
        let converged = self.fine.is_none() || grid_err <= self.tolerance * value.abs().max(1e-3);
        if !converged {
            notes.push(format!(
                "grid refinement changed the value by {grid_err:.3e}"
            ));
        }
        PairingResult {
            value: C64::new(value, 0.0),
            evaluator: Evaluator::WeakLog,
            error_estimate: grid_err + clip_err,
            m: self.m,
            k_list: Vec::new(),
            trial: None,
            components: ext.section.components.len(),
            converged,
            notes,
        }
    }

    /// E[pairing] for a uniform draw from the unit sphere of the span of `bases`:
    /// ∫ D·½ln Σ_j e^{2m_j s}S_{m_j}(x) dV.
    pub fn expected(&self, bases: &[FourierBasis]) -> f64 {
        let plan = self.fine.as_ref().unwrap_or(&self.coarse);
        plan.integrate_invariant(|_, _, x| {
            let terms: Vec<(f64, f64)> = bases
                .iter()
                .map(|b| (b.m as f64, b.kernel_diagonal(x).max(1e-300).ln()))
                .collect();
            move |s: f64| {
                let top = terms
                    .iter()
                    .map(|(m, l)| 2.0 * m * s + l)
                    .fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = terms
                    .iter()
                    .map(|(m, l)| (2.0 * m * s + l - top).exp())
                    .sum();
                0.5 * (top + sum.ln())
            }
        })
    }
}

/// (i/π)∫_X L_X∧f∧ω0 by sphere quadrature.
pub fn levi_reference(action: &WeightedAction, f: &TestFunction, grid: &QuadratureGrid) -> f64 {
    levi_pairing_integral(
        action,
        grid,
        |x| C64::new(f.eval(x), 0.0),
        None::<fn(&[C64]) -> f64>,
    )
    .re
}

/// (i/π)∫ [Σ_j k_jα S_{k_jαm} / Σ_j S_{k_jαm}] L_X∧f∧ω0, the large-m value of
/// (1/m)·pairing for a uniform random section.
pub fn expected_pairing(
    action: &WeightedAction,
    alpha: u64,
    k_list: &[u64],
    m: u64,
    f: &TestFunction,
    grid: &QuadratureGrid,
) -> C64 {
    let bases: Vec<FourierBasis> = k_list
        .iter()
        .map(|&k| crate::crspace::fourier_basis(action, k * alpha * m))
        .collect();
    let weight = |x: &[C64]| {
        let mut num = 0.0;
        let mut den = 0.0;
        for (b, &k) in bases.iter().zip(k_list) {
            let s = b.kernel_diagonal(x);
            num += (k * alpha) as f64 * s;
            den += s;
        }
        if den > 0.0 {
            num / den
        } else {
            alpha as f64
        }
    };
    levi_pairing_integral(action, grid, |x| C64::new(f.eval(x), 0.0), Some(weight))
}

/// α·(Σ_j k_j^{n+1})/(Σ_j k_j^n).
pub fn limit_constant(n: usize, alpha: u64, k_list: &[u64]) -> Result<f64, Error> {
    crate::crspace::validate_k_list(k_list)?;
    let num: f64 = k_list.iter().map(|&k| (k as f64).powi(n as i32 + 1)).sum();
    let den: f64 = k_list.iter().map(|&k| (k as f64).powi(n as i32)).sum();
    Ok(alpha as f64 * num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crspace::{fourier_basis, Component};

    fn single(action: &WeightedAction, m: u64, coeffs: Vec<C64>) -> ExtendedSection {
        let b = fourier_basis(action, m);
        let s = CRSection::new(vec![Component { m, coeffs }]).unwrap();
        extend(&s, &[b]).unwrap()
    }

    #[test]
    fn limit_constant_examples() {
        assert_eq!(limit_constant(1, 1, &[1]).unwrap(), 1.0);
        assert!((limit_constant(1, 2, &[1, 3]).unwrap() - 5.0).abs() < 1e-15);
        assert!((limit_constant(2, 1, &[1, 2]).unwrap() - 1.8).abs() < 1e-15);
    }

    #[test]
    fn cone_coordinates_round_trip() {
        let w = [1u64, 2];
        let x = [C64::new(0.6, 0.1), C64::new(0.3, -0.7)];
        let nrm: f64 = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let x = [x[0] / nrm, x[1] / nrm];
        let eta = 0.37;
        let z = [x[0] * (-eta as f64).exp(), x[1] * (-2.0 * eta as f64).exp()];
        let (e, y) = cone_coordinates(&w, &z);
        assert!((e - eta).abs() < 1e-14);
        assert!((y[0] - x[0]).norm() < 1e-14 && (y[1] - x[1]).norm() < 1e-14);
    }

    #[test]
    fn axis_monomial_pairs_to_its_orbit() {
        let a = WeightedAction::standard(1);
        let m = 6;
        let mut c = vec![C64::new(0.0, 0.0); m as usize + 1];
        c[0] = C64::new(1.0, 0.0); // exponents ordered by decreasing α_1: z_1^m first
        let ext = single(&a, m, c);
        let pkg = TestFormPackage::new(TestFunction::constant(1, 1.0));
        let r = pair_roots(&ext, &pkg).unwrap();
        assert!((r.value.re - 2.0 * PI * m as f64).abs() < 1e-10);
        let weak = WeakEvaluator::new([1, 1], &pkg, m, default_cr_resolution([1, 1], m), false);
        let v = weak.pair(&ext);
        assert!(
            (v.value.re - r.value.re).abs() < 1e-3 * r.value.re,
            "{} {}",
            v.value.re,
            r.value.re
        );
    }
}
