//! Bergman space of the unit ball in C^N: monomial basis, kernel partial sums,
//! cut indices β_k, peak sections, and the boundary pairing of random zero
//! divisors against 2ik·r·ψ(kr)·φ·∂r∧∂̄r with r = (|z|²−1)/2.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::currents::{default_clip, Evaluator, PairingResult, TestFunction};
use crate::fiber::{FiberPlan, FiberResolution, FlatTestForm};
use crate::geometry::{levi_pairing_integral, QuadratureGrid, WeightedAction};
use crate::numeric::{bump, gauss_legendre_on, ln_factorial, CompensatedSum};
use crate::sampling::{sample_unit_sphere, SeededStream};
use crate::Error;

/// The unit ball in C^N with defining function r = (|z|²−1)/2.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BallModel {
    pub big_n: usize,
}

impl BallModel {
    pub fn new(big_n: usize) -> Result<Self, Error> {
        if big_n == 0 {
            return Err(Error::InvalidInput("N must be >= 1".into()));
        }
        Ok(Self { big_n })
    }

    pub fn r(&self, z: &[C64]) -> f64 {
        0.5 * (z.iter().map(|c| c.norm_sqr()).sum::<f64>() - 1.0)
    }

    /// |dr| in the Euclidean metric; equals 1 on the boundary sphere.
    pub fn dr_norm(&self, z: &[C64]) -> f64 {
        z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Range of |z|² on the shell {1/(2k) ≤ |r| ≤ 1/k}.
    pub fn annulus(&self, k: u64) -> (f64, f64) {
        (1.0 - 2.0 / k as f64, 1.0 - 1.0 / k as f64)
    }
}

/// ln ‖z^α‖² = ln(π^N α!/(N+|α|)!) on the unit ball.
pub fn ln_ball_norm_sq(alpha: &[u32]) -> f64 {
    let big_n = alpha.len() as u64;
    let total: u64 = alpha.iter().map(|&a| a as u64).sum();
    big_n as f64 * PI.ln() + alpha.iter().map(|&a| ln_factorial(a as u64)).sum::<f64>()
        - ln_factorial(big_n + total)
}

pub fn ball_norm(alpha: &[u32]) -> f64 {
    ln_ball_norm_sq(alpha).exp()
}

/// Quadrature value of ∫_B |z^α|² dV = ∫_S|x^α|²dσ / (2|α|+2N).
pub fn ball_norm_oracle(grid: &QuadratureGrid, alpha: &[u32]) -> f64 {
    let total: u32 = alpha.iter().sum();
    grid.moment(alpha, alpha) / (2.0 * (total as f64 + alpha.len() as f64))
}

/// B(z,z) = N!/(π^N (1−|z|²)^{N+1}).
pub fn bergman_kernel_closed(big_n: usize, z: &[C64]) -> Result<f64, Error> {
    let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    if r2 >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "|z|^2 = {r2} is not inside the ball"
        )));
    }
    Ok((ln_factorial(big_n as u64) - big_n as f64 * PI.ln()).exp()
        / (1.0 - r2).powi(big_n as i32 + 1))
}

/// Orthonormal monomials g_j = z^α/‖z^α‖ in graded lexicographic order.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BergmanBasis {
    pub big_n: usize,
    pub exponents: Vec<Vec<u32>>,
    pub ln_norm_sq: Vec<f64>,
    pub degree: Vec<u32>,
}

impl BergmanBasis {
    /// All monomials of total degree ≤ max_degree.
    pub fn new(big_n: usize, max_degree: u32) -> Result<Self, Error> {
        if big_n == 0 {
            return Err(Error::InvalidInput("N must be >= 1".into()));
        }
        let mut exponents = Vec::new();
        let mut degree = Vec::new();
        let ones = vec![1u64; big_n];
        for d in 0..=max_degree {
            for a in crate::crspace::weighted_exponents(&ones, d as u64) {
                exponents.push(a);
                degree.push(d);
            }
        }
        let ln_norm_sq = exponents.iter().map(|a| ln_ball_norm_sq(a)).collect();
        Ok(Self {
            big_n,
            exponents,
            ln_norm_sq,
            degree,
        })
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Smallest index count covering every monomial of degree ≤ d.
    pub fn count_through_degree(&self, d: u32) -> usize {
        self.degree.partition_point(|&x| x <= d)
    }

    fn ln_abs_sq(&self, j: usize, ln_mod_sq: &[f64]) -> f64 {
        let mut l = -self.ln_norm_sq[j];
        for (&a, &lz) in self.exponents[j].iter().zip(ln_mod_sq) {
            if a > 0 {
                if lz == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                l += a as f64 * lz;
            }
        }
        l
    }

    /// g_1(z), …, g_b(z).
    pub fn values(&self, b: usize, z: &[C64]) -> Vec<C64> {
        (0..b.min(self.len()))
            .map(|j| {
                let mut v = C64::new((-0.5 * self.ln_norm_sq[j]).exp(), 0.0);
                for (&a, c) in self.exponents[j].iter().zip(z) {
                    if a > 0 {
                        v *= c.powu(a);
                    }
                }
                v
            })
            .collect()
    }

    /// P_b(z) = Σ_{j≤b} |g_j(z)|².
    pub fn partial_sum(&self, b: usize, z: &[C64]) -> f64 {
        let lz: Vec<f64> = z.iter().map(|c| c.norm_sqr().ln()).collect();
        let mut acc = CompensatedSum::new();
        for j in 0..b.min(self.len()) {
            acc.add(self.ln_abs_sq(j, &lz).exp());
        }
        acc.value()
    }

    /// (d, Σ_{j≤b, deg g_j = d} |g_j(x)|²) for each degree present.
    pub fn degree_sums(&self, b: usize, x: &[C64]) -> Vec<(u32, f64)> {
        let lz: Vec<f64> = x.iter().map(|c| c.norm_sqr().ln()).collect();
        let mut out: Vec<(u32, f64)> = Vec::new();
        for j in 0..b.min(self.len()) {
            let v = self.ln_abs_sq(j, &lz).exp();
            match out.last_mut() {
                Some((d, s)) if *d == self.degree[j] => *s += v,
                _ => out.push((self.degree[j], v)),
            }
        }
        out
    }

    /// Σ_j c_j g_j(z).
    pub fn evaluate(&self, coeffs: &[C64], z: &[C64]) -> C64 {
        self.values(coeffs.len(), z)
            .into_iter()
            .zip(coeffs)
            .map(|(g, c)| g * c)
            .sum()
    }

    /// Terms (d, Σ_{deg g_j = d} c_j g_j(x)) of λ ↦ u(λx).
    pub fn fiber_terms(&self, coeffs: &[C64], x: &[C64], out: &mut Vec<(u64, C64)>) {
        for ((g, c), &d) in self
            .values(coeffs.len(), x)
            .into_iter()
            .zip(coeffs)
            .zip(&self.degree)
        {
            match out.last_mut() {
                Some((e, s)) if *e == d as u64 => *s += g * c,
                _ => out.push((d as u64, g * c)),
            }
        }
    }
}

/// Points of annulus(k) with |z|² on n_r levels and |z_1|²/|z|² on n_q levels.
/// P_b is torus invariant, so phases are fixed to zero.
pub fn annulus_grid(model: &BallModel, k: u64, n_r: usize, n_q: usize) -> Vec<Vec<C64>> {
    let (lo, hi) = model.annulus(k);
    let mut out = Vec::with_capacity(n_r * n_q);
    for i in 0..n_r {
        let t = if n_r == 1 {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n_r - 1) as f64
        };
        let lattice = crate::szego::moduli_lattice(model.big_n - 1, n_q.max(2) - 1);
        for x in lattice {
            out.push(x.into_iter().map(|c| c * t.sqrt()).collect());
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BetaCertificate {
    pub k: u64,
    pub b_k: usize,
    pub max_degree: u32,
    pub achieved_inf: f64,
    pub c0_target: f64,
    pub grid_points: usize,
}

fn shell_inf(model: &BallModel, basis: &BergmanBasis, b: usize, grid: &[Vec<C64>]) -> f64 {
    let p = model.big_n as i32 + 1;
    crate::par_map(grid, |z| model.r(z).abs().powi(p) * basis.partial_sum(b, z))
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

/// Smallest b with inf over the annulus grid of |r|^{N+1}·P_b ≥ c0_target.
pub fn find_beta_k(
    model: &BallModel,
    basis: &BergmanBasis,
    k: u64,
    c0_target: f64,
    grid: &[Vec<C64>],
) -> Result<BetaCertificate, Error> {
    if k < 3 {
        return Err(Error::InvalidInput("annulus(k) needs k >= 3".into()));
    }
    let cert = |b: usize, inf: f64| BetaCertificate {
        k,
        b_k: b,
        max_degree: basis.degree[b - 1],
        achieved_inf: inf,
        c0_target,
        grid_points: grid.len(),
    };
    let first = shell_inf(model, basis, 1, grid);
    if first >= c0_target {
        return Ok(cert(1, first));
    }
    // doubling, then bisection: P_b is nondecreasing in b
    let (mut lo, mut hi) = (1usize, 2usize);
    loop {
        let b = hi.min(basis.len());
        let v = shell_inf(model, basis, b, grid);
        if v >= c0_target {
            hi = b;
            break;
        }
        if b == basis.len() {
            return Err(Error::SearchFailed(format!(
                "k={k}: all {b} basis functions reach only {v:.4e} < {c0_target:.4e}"
            )));
        }
        lo = b;
        hi = 2 * b;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if shell_inf(model, basis, mid, grid) >= c0_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(cert(hi, shell_inf(model, basis, hi, grid)))
}

/// β_k for each k, forced nondecreasing. The flag reports whether the raw
/// search was already monotone.
pub fn beta_sequence(
    model: &BallModel,
    basis: &BergmanBasis,
    ks: &[u64],
    c0_target: f64,
    n_r: usize,
    n_q: usize,
) -> Result<(Vec<BetaCertificate>, bool), Error> {
    let mut out: Vec<BetaCertificate> = Vec::new();
    let mut monotone = true;
    for &k in ks {
        let grid = annulus_grid(model, k, n_r, n_q);
        let mut c = find_beta_k(model, basis, k, c0_target, &grid)?;
        if let Some(prev) = out.last() {
            if c.b_k < prev.b_k {
                monotone = false;
                c.b_k = prev.b_k;
                c.max_degree = basis.degree[c.b_k - 1];
                c.achieved_inf = shell_inf(model, basis, c.b_k, &grid);
            }
        }
        out.push(c);
    }
    Ok((out, monotone))
}

/// Limit of |r|^{N+1}·B(z,z) at the boundary: N!/(π^N 2^{N+1}).
pub fn boundary_kernel_level(big_n: usize) -> f64 {
    (ln_factorial(big_n as u64) - big_n as f64 * PI.ln()).exp() / 2f64.powi(big_n as i32 + 1)
}

/// Coefficients of h = Σ_{j≤b} conj(g_j(x₀)) g_j / √P_b(x₀).
pub fn peak_section(basis: &BergmanBasis, b: usize, x0: &[C64]) -> Result<Vec<C64>, Error> {
    let g = basis.values(b, x0);
    let p: f64 = g.iter().map(|v| v.norm_sqr()).sum();
    if p <= 1e-300 {
        return Err(Error::InvalidInput("P_b(x0) vanishes".into()));
    }
    let s = p.sqrt();
    Ok(g.into_iter().map(|v| v.conj() / s).collect())
}

/// Shell profile ψ: c0 times the unit-mass bump moved onto [−1, −1/2].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ShellProfile {
    pub c0: f64,
}

impl Default for ShellProfile {
    fn default() -> Self {
        Self { c0: 1.0 }
    }
}

impl ShellProfile {
    pub fn eval(&self, t: f64) -> f64 {
        self.c0 * 4.0 * bump(4.0 * t + 3.0)
    }

    /// ∫ψ by Gauss–Legendre, independent of the stored c0.
    pub fn integral(&self) -> f64 {
        let (x, w) = gauss_legendre_on(200, -1.0, -0.5);
        x.iter().zip(&w).map(|(t, wt)| wt * self.eval(*t)).sum()
    }
}

/// The form Ψ = 2ik·r·ψ(kr)·φ·∂r∧∂̄r on C², through its (1,1) coefficients.
pub struct BallTestForm {
    pub k: u64,
    pub phi: TestFunction,
    pub psi: ShellProfile,
}

impl FlatTestForm for BallTestForm {
    fn coeffs(&self, z: [C64; 2]) -> [[C64; 2]; 2] {
        let zero = [[C64::new(0.0, 0.0); 2]; 2];
        let r = 0.5 * (z[0].norm_sqr() + z[1].norm_sqr() - 1.0);
        let t = self.k as f64 * r;
        if !(-1.0..=-0.5).contains(&t) {
            return zero;
        }
        let v = 0.5 * self.k as f64 * r * self.psi.eval(t) * self.phi.eval(&z);
        if v == 0.0 {
            return zero;
        }
        let mut b = zero;
        for j in 0..2 {
            for l in 0..2 {
                b[j][l] = z[j].conj() * z[l] * v;
            }
        }
        b
    }

    fn s_range(&self) -> (f64, f64) {
        let k = self.k as f64;
        (0.5 * (1.0 - 2.0 / k).ln(), 0.5 * (1.0 - 1.0 / k).ln())
    }

    fn theta_modes(&self) -> usize {
        self.phi.charge(&[1, 1])
    }

    fn psi_dependent(&self) -> bool {
        self.phi.phase_dependent()
    }

    fn fd_step(&self) -> f64 {
        1e-4 / (2.0 * self.k as f64)
    }
}

pub fn default_ball_resolution(max_degree: u32) -> FiberResolution {
    let d = max_degree as usize;
    FiberResolution {
        n_q: 24 + d,
        n_psi: 32 + 2 * d,
        n_cheb: 40,
    }
}

/// Weak evaluator for the boundary pairing at one k (N = 2).
pub struct BallEvaluator {
    pub k: u64,
    pub clip: f64,
    pub coarse: FiberPlan,
    pub fine: Option<FiberPlan>,
    pub tolerance: f64,
    form: BallTestForm,
}

impl BallEvaluator {
    pub fn new(
        k: u64,
        phi: &TestFunction,
        psi: ShellProfile,
        res: FiberResolution,
        refine: bool,
    ) -> Self {
        let form = BallTestForm {
            k,
            phi: phi.clone(),
            psi,
        };
        let coarse = FiberPlan::new([1, 1], &form, res);
        let fine = refine.then(|| FiberPlan::new([1, 1], &form, res.scaled(1.5)));
        Self {
            k,
            clip: default_clip(k),
            coarse,
            fine,
            tolerance: 0.01,
            form,
        }
    }

    fn run(plan: &FiberPlan, basis: &BergmanBasis, coeffs: &[C64], clip: f64) -> (f64, usize) {
        let p = plan.pair(|_, _, x, out| basis.fiber_terms(coeffs, x, out), clip);
        (p.value, p.clipped + p.null_fibers)
    }

    /// (i/π)∫ log|u|·∂∂̄Ψ for u = Σ c_j g_j.
    pub fn boundary_pair(
        &self,
        basis: &BergmanBasis,
        coeffs: &[C64],
    ) -> Result<PairingResult, Error> {
        if basis.big_n != 2 {
            return Err(Error::InvalidInput(
                "the boundary evaluator is implemented for N = 2".into(),
            ));
        }
        if coeffs.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::InvalidInput("u is identically zero".into()));
        }
        let mut notes = Vec::new();
        let (v0, c0) = Self::run(&self.coarse, basis, coeffs, self.clip);
        let (value, clipped, grid_err) = match &self.fine {
            Some(f) => {
                let (v1, c1) = Self::run(f, basis, coeffs, self.clip);
                (v1, c1, (v1 - v0).abs())
            }
            None => (v0, c0, 0.0),
        };
        let clip_err = if clipped > 0 {
            let plan = self.fine.as_ref().unwrap_or(&self.coarse);
            notes.push(format!("{clipped} clipped nodes"));
            (Self::run(plan, basis, coeffs, 2.0 * self.clip).0 - value).abs()
        } else {
            0.0
        };
        let converged = self.fine.is_none() || grid_err <= self.tolerance * value.abs().max(1e-3);
        Ok(PairingResult {
            value: C64::new(value, 0.0),
            evaluator: Evaluator::WeakLog,
            error_estimate: grid_err + clip_err,
            m: self.k,
            k_list: Vec::new(),
            trial: None,
            components: 1,
            converged,
            notes,
        })
    }

    /// E[boundary_pair] over the unit sphere of span(g_1, …, g_b): ∫ D·½ln P_b dV.
    pub fn expected(&self, basis: &BergmanBasis, b: usize) -> f64 {
        let plan = self.fine.as_ref().unwrap_or(&self.coarse);
        plan.integrate_invariant(|_, _, x| {
            let terms: Vec<(f64, f64)> = basis
                .degree_sums(b, x)
                .into_iter()
                .filter(|t| t.1 > 0.0)
                .map(|(d, s)| (d as f64, s.ln()))
                .collect();
            move |s: f64| {
                let top = terms
                    .iter()
                    .map(|(d, l)| 2.0 * d * s + l)
                    .fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = terms
                    .iter()
                    .map(|(d, l)| (2.0 * d * s + l - top).exp())
                    .sum();
                0.5 * (top + sum.ln())
            }
        })
    }

    /// Pairing minus its expectation: the fluctuation of the random zero current.
    pub fn log_kernel_correction(
        &self,
        basis: &BergmanBasis,
        coeffs: &[C64],
        expected: f64,
    ) -> Result<f64, Error> {
        Ok(self.boundary_pair(basis, coeffs)?.value.re - expected)
    }

    /// boundary_pair + (1/π)∫ log P_b·k·r·ψ(kr)·∂∂̄φ∧∂r∧∂̄r, with only the
    /// φ-Hessian part of ∂∂̄Ψ paired against log P_b.
    pub fn log_kernel_correction_truncated(
        &self,
        basis: &BergmanBasis,
        coeffs: &[C64],
        n_s: usize,
    ) -> Result<f64, Error> {
        let pair = self.boundary_pair(basis, coeffs)?.value.re;
        Ok(pair + hessian_term(basis, coeffs.len(), &self.form, n_s))
    }

    pub fn form(&self) -> &BallTestForm {
        &self.form
    }
}

/// (1/π)∫ log P_b·k·r·ψ(kr)·∂∂̄φ∧∂r∧∂̄r by a product rule in (|z|², q, phases).
fn hessian_term(basis: &BergmanBasis, b: usize, form: &BallTestForm, n_s: usize) -> f64 {
    let k = form.k as f64;
    let (lo, hi) = (1.0 - 2.0 / k, 1.0 - 1.0 / k);
    let (ts, wt) = gauss_legendre_on(n_s, lo, hi);
    let (qs, wq) = gauss_legendre_on(n_s, 0.0, 1.0);
    let nph = 2 * form.phi.charge(&[1, 1]) + 8;
    let h = 1e-4;
    let hess = |z: [C64; 2]| -> [[C64; 2]; 2] {
        // φ_{jk̄} = ¼(∂_{x_j} − i∂_{y_j})(∂_{x_k} + i∂_{y_k})φ
        let f = |d: [f64; 4]| {
            form.phi
                .eval(&[z[0] + C64::new(d[0], d[1]), z[1] + C64::new(d[2], d[3])])
        };
        let second = |a: usize, c: usize| {
            let at = |sa: f64, sc: f64| {
                let mut d = [0.0; 4];
                d[a] += sa;
                d[c] += sc;
                f(d)
            };
            (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
        };
        let mut m = [[C64::new(0.0, 0.0); 2]; 2];
        for j in 0..2 {
            for l in 0..2 {
                let (xj, yj, xl, yl) = (2 * j, 2 * j + 1, 2 * l, 2 * l + 1);
                let re = second(xj, xl) + second(yj, yl);
                let im = second(xj, yl) - second(yj, xl);
                m[j][l] = C64::new(re, im) * 0.25;
            }
        }
        m
    };
    let mut acc = CompensatedSum::new();
    for (t, w1) in ts.iter().zip(&wt) {
        let r = 0.5 * (t - 1.0);
        let g = k * r * form.psi.eval(k * r);
        for (q, w2) in qs.iter().zip(&wq) {
            for a in 0..nph {
                for c in 0..nph {
                    let z = [
                        C64::from_polar((t * (1.0 - q)).sqrt(), 2.0 * PI * a as f64 / nph as f64),
                        C64::from_polar((t * q).sqrt(), 2.0 * PI * c as f64 / nph as f64),
                    ];
                    let hm = hess(z);
                    let cr = |j: usize, l: usize| z[j].conj() * z[l] * 0.25;
                    let wedge = hm[0][0] * cr(1, 1) + hm[1][1] * cr(0, 0)
                        - hm[0][1] * cr(1, 0)
                        - hm[1][0] * cr(0, 1);
                    // dz1∧dz̄1∧dz2∧dz̄2 = −4 dV; dV = ¼ dt dq dφ1 dφ2 in these coordinates
                    let dens = wedge.re * -4.0 * 0.25 * (2.0 * PI / nph as f64).powi(2);
                    acc.add(w1 * w2 * g * basis.partial_sum(b, &z).ln() * dens);
                }
            }
        }
    }
    acc.value() / PI
}

/// Direct integral of Ψ over the zero disk of u = z_1 (N = 2).
pub fn z1_disk_oracle(k: u64, phi: &TestFunction, psi: ShellProfile, n: usize) -> f64 {
    let kf = k as f64;
    let (ts, wt) = gauss_legendre_on(n, 1.0 - 2.0 / kf, 1.0 - 1.0 / kf);
    let nph = 2 * phi.charge(&[1, 1]) + 8;
    let mut acc = 0.0;
    for (t, w) in ts.iter().zip(&wt) {
        let r = 0.5 * (t - 1.0);
        let mut ang = 0.0;
        for a in 0..nph {
            let z = [
                C64::new(0.0, 0.0),
                C64::from_polar(t.sqrt(), 2.0 * PI * a as f64 / nph as f64),
            ];
            ang += phi.eval(&z);
        }
        ang *= 2.0 * PI / nph as f64;
        // 2·B_{22̄} = k r ψ(kr) φ |z_2|², dA = ½ dt dφ
        acc += w * kf * r * psi.eval(kf * r) * t * 0.5 * ang;
    }
    acc
}

/// −(n+2)·(i/2π)·c0·∫_X L_X∧ω0∧φ on the unit sphere S^{2N−1}.
pub fn boundary_limit(
    big_n: usize,
    phi: &TestFunction,
    psi: ShellProfile,
    grid: &QuadratureGrid,
) -> f64 {
    let action = WeightedAction::standard(big_n - 1);
    let levi = levi_pairing_integral(
        &action,
        grid,
        |x| C64::new(phi.eval(x), 0.0),
        None::<fn(&[C64]) -> f64>,
    )
    .re;
    -((big_n + 1) as f64) * psi.integral() * 0.5 * levi
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceRow {
    pub k: u64,
    pub b_k: usize,
    pub trials: usize,
    pub expected: f64,
    pub mean_correction: f64,
    pub r_hat: f64,
    pub r_hat_stderr: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VarianceTable {
    pub rows: Vec<VarianceRow>,
    pub slope: f64,
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.0 > 0.0 && p.1 > 0.0)
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Monte Carlo R̂_k = mean of |log_kernel_correction|² for u uniform on the
/// unit sphere of span(g_1, …, g_{b_k}).
pub fn variance_rk(
    basis: &BergmanBasis,
    betas: &[BetaCertificate],
    phi: &TestFunction,
    psi: ShellProfile,
    trials: usize,
    master_seed: u64,
) -> Result<VarianceTable, Error> {
    if trials < 30 {
        return Err(Error::InvalidInput(
            "variance estimate needs at least 30 trials".into(),
        ));
    }
    let mut rows = Vec::new();
    for c in betas {
        let ev = BallEvaluator::new(c.k, phi, psi, default_ball_resolution(c.max_degree), false);
        let expected = ev.expected(basis, c.b_k);
        let idx: Vec<u64> = (0..trials as u64).collect();
        let corr: Vec<Result<f64, Error>> = crate::par_map(&idx, |&t| {
            let u = sample_unit_sphere(c.b_k, &SeededStream::new(master_seed, c.k, t))?;
            ev.log_kernel_correction(basis, &u, expected)
        });
        let corr: Vec<f64> = corr.into_iter().collect::<Result<_, _>>()?;
        let sq: Vec<f64> = corr.iter().map(|v| v * v).collect();
        let n = sq.len() as f64;
        let r_hat = sq.iter().sum::<f64>() / n;
        let var = sq.iter().map(|v| (v - r_hat).powi(2)).sum::<f64>() / (n - 1.0);
        rows.push(VarianceRow {
            k: c.k,
            b_k: c.b_k,
            trials,
            expected,
            mean_correction: corr.iter().sum::<f64>() / n,
            r_hat,
            r_hat_stderr: (var / n).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.r_hat)).collect();
    Ok(VarianceTable {
        slope: loglog_slope(&pts),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_match_small_cases() {
        assert!((ball_norm(&[0, 0]) - PI * PI / 2.0).abs() < 1e-13);
        assert!((ball_norm(&[3]) - PI / 4.0).abs() < 1e-13);
        assert!((ball_norm(&[1, 0]) - PI * PI / 6.0).abs() < 1e-13);
    }

    #[test]
    fn kernel_at_origin() {
        assert!(
            (bergman_kernel_closed(2, &[C64::new(0.0, 0.0); 2]).unwrap() - 2.0 / (PI * PI)).abs()
                < 1e-15
        );
        assert!(
            (bergman_kernel_closed(1, &[C64::new(0.0, 0.0)]).unwrap() - 1.0 / PI).abs() < 1e-15
        );
        let basis = BergmanBasis::new(2, 5).unwrap();
        assert!((basis.partial_sum(7, &[C64::new(0.0, 0.0); 2]) - 2.0 / (PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn profile_has_unit_mass() {
        assert!((ShellProfile::default().integral() - 1.0).abs() < 1e-10);
    }
}
