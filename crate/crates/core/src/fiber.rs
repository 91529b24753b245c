//! Weak pairings ∫ log|P|·(i/π)∂∂̄Φ over regions of C² ∖ {0}, organized along
//! the complex orbits of a weighted C* action.
//!
//! A point is written z = (λ^{p_1}x_1, λ^{p_2}x_2) with λ = e^{s+iθ} and the base
//! point x = (√(1−q), √q·e^{iψ}) on the unit sphere. Lebesgue measure becomes
//! ½·e^{2(p_1+p_2)s}·ρ_p(x) dq dψ dθ ds with (q, ψ, θ) ∈ [0,1]×[0,2π)².
//!
//! The density D = (i/π)∂∂̄Φ is computed by centered finite differences of the
//! flat (1,1) coefficients of Φ, expanded in Fourier modes along θ and in a
//! Chebyshev series along s, once per grid. A holomorphic function restricted
//! to an orbit is a sparse polynomial in λ; its log-modulus has closed-form
//! Fourier modes in θ given the polynomial's roots, so the θ integral is exact
//! and the s integral is split at the root moduli where it has kinks.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::numeric::{
    chebyshev_coeffs, chebyshev_nodes, clenshaw, gauss_legendre, gauss_legendre_on, gcd,
};
use crate::poly::{roots_aberth, roots_companion};

/// A real 2-form Φ on a region of C², seen through its (1,1) part iΣ B_{jk̄} dz_j∧dz̄_k.
pub trait FlatTestForm: Sync {
    /// B_{jk̄}(z), indexed [j][k].
    fn coeffs(&self, z: [C64; 2]) -> [[C64; 2]; 2];
    /// Interval of s = log|λ| outside which Φ vanishes (the same for every base point).
    fn s_range(&self) -> (f64, f64);
    /// Largest |n| with a nonzero e^{inθ} mode of Φ along orbits.
    fn theta_modes(&self) -> usize;
    /// Whether Φ depends on the base phase ψ.
    fn psi_dependent(&self) -> bool;
    /// Finite-difference step in the flat coordinates.
    fn fd_step(&self) -> f64;
}

/// D(z) with (i/π)∂∂̄L∧Φ = L-independent density: ∫(i/π)∂∂̄L∧Φ = ∫ L·D dV.
///
/// Richardson combination of second-order stencils at h and 2h, so the step
/// can stay large relative to the scale of Φ and roundoff in its coefficients
/// is not amplified.
pub fn ddbar_density(form: &dyn FlatTestForm, z: [C64; 2], h: f64) -> f64 {
    (4.0 * ddbar_stencil(form, z, h) - ddbar_stencil(form, z, 2.0 * h)) / 3.0
}

fn ddbar_stencil(form: &dyn FlatTestForm, z: [C64; 2], h: f64) -> f64 {
    let shift = |d: [f64; 4]| -> [[C64; 2]; 2] {
        form.coeffs([z[0] + C64::new(d[0], d[1]), z[1] + C64::new(d[2], d[3])])
    };
    let e = |i: usize, v: f64| {
        let mut d = [0.0; 4];
        d[i] = v;
        d
    };
    let c0 = form.coeffs(z);
    let h2 = h * h;
    // Δ_1 B_{22̄}
    let mut lap1 = -4.0 * c0[1][1].re;
    for i in [0, 1] {
        lap1 += shift(e(i, h))[1][1].re + shift(e(i, -h))[1][1].re;
    }
    // Δ_2 B_{11̄}
    let mut lap2 = -4.0 * c0[0][0].re;
    for i in [2, 3] {
        lap2 += shift(e(i, h))[0][0].re + shift(e(i, -h))[0][0].re;
    }
    let mixed = |a: usize, b: usize| -> C64 {
        let at = |sa: f64, sb: f64| {
            let mut d = [0.0; 4];
            d[a] = sa;
            d[b] = sb;
            shift(d)[1][0]
        };
        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h2)
    };
    // coordinates ordered (x1, y1, x2, y2)
    let fx1x2 = mixed(0, 2);
    let fy1y2 = mixed(1, 3);
    let fx1y2 = mixed(0, 3);
    let fy1x2 = mixed(1, 2);
    let cross = fx1x2.re + fy1y2.re - fx1y2.im + fy1x2.im;
    (lap1 / h2 + lap2 / h2 - 2.0 * cross) / PI
}

/// Resolution of a fiber grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FiberResolution {
    pub n_q: usize,
    pub n_psi: usize,
    pub n_cheb: usize,
}

impl FiberResolution {
    /// The same grid with every count scaled by `f` (rounded up).
    pub fn scaled(&self, f: f64) -> Self {
        let s = |v: usize| ((v as f64) * f).ceil() as usize;
        Self {
            n_q: s(self.n_q),
            n_psi: s(self.n_psi),
            n_cheb: s(self.n_cheb),
        }
    }
}

/// Precomputed density modes for one test form on one grid.
pub struct FiberPlan {
    weights: [u64; 2],
    q: Vec<f64>,
    n_psi: usize,
    s_lo: f64,
    s_hi: f64,
    modes: usize,
    psi_dependent: bool,
    n_cheb: usize,
    /// Chebyshev coefficients, indexed [row][mode][k], row = qi·rows_per_q + l.
    table: Vec<C64>,
    gl: (Vec<f64>, Vec<f64>),
}

/// Outcome of one weak pairing.
#[derive(Clone, Copy, Debug, Default)]
pub struct FiberPairing {
    pub value: f64,
    /// Quadrature nodes where the orbit mean of log|P| fell below the clip level.
    pub clipped: usize,
    /// Orbits on which P vanished identically.
    pub null_fibers: usize,
    /// Root solves that needed the companion fallback.
    pub fallbacks: usize,
}

impl FiberPlan {
    pub fn new(weights: [u64; 2], form: &dyn FlatTestForm, res: FiberResolution) -> Self {
        let (q, wq) = gauss_legendre_on(res.n_q, 0.0, 1.0);
        let (s_lo, s_hi) = form.s_range();
        let modes = form.theta_modes();
        let psi_dependent = form.psi_dependent();
        let n_theta = if modes == 0 { 1 } else { 2 * modes + 2 };
        let rows_per_q = if psi_dependent { res.n_psi } else { 1 };
        let nodes = chebyshev_nodes(res.n_cheb);
        let h = form.fd_step();
        let base_w_psi = 2.0 * PI / res.n_psi as f64;
        let (p1, p2) = (weights[0] as f64, weights[1] as f64);
        let mut table = vec![C64::new(0.0, 0.0); res.n_q * rows_per_q * (modes + 1) * res.n_cheb];
        let row_len = (modes + 1) * res.n_cheb;
        let rows: Vec<(usize, usize)> = (0..res.n_q)
            .flat_map(|qi| (0..rows_per_q).map(move |l| (qi, l)))
            .collect();
        let computed: Vec<Vec<C64>> = crate::par_map(&rows, |&(qi, l)| {
            let x = base_point(q[qi], 2.0 * PI * l as f64 / res.n_psi as f64);
            let rho = p1 * x[0].norm_sqr() + p2 * x[1].norm_sqr();
            let mut vals = vec![vec![C64::new(0.0, 0.0); res.n_cheb]; modes + 1];
            for (k, &t) in nodes.iter().enumerate() {
                let s = 0.5 * (s_lo + s_hi) + 0.5 * (s_hi - s_lo) * t;
                let vol = 0.5 * ((2.0 * (p1 + p2)) * s).exp() * rho;
                for it in 0..n_theta {
                    let th = 2.0 * PI * it as f64 / n_theta as f64;
                    let z = [
                        x[0] * C64::from_polar((p1 * s).exp(), p1 * th),
                        x[1] * C64::from_polar((p2 * s).exp(), p2 * th),
                    ];
                    let d = ddbar_density(form, z, h) * vol;
                    for (n, v) in vals.iter_mut().enumerate() {
                        v[k] += C64::from_polar(d / n_theta as f64, -(n as f64) * th);
                    }
                }
            }
            let scale = wq[qi] * base_w_psi * 2.0 * PI;
            let mut out = Vec::with_capacity(row_len);
            for v in vals {
                let c = chebyshev_coeffs(&v);
                out.extend(c.into_iter().map(|z| z * scale));
            }
            out
        });
        for (r, row) in computed.into_iter().enumerate() {
            table[r * row_len..(r + 1) * row_len].copy_from_slice(&row);
        }
        let n_gl = res.n_cheb / 2 + 3;
        Self {
            weights,
            q,
            n_psi: res.n_psi,
            s_lo,
            s_hi,
            modes,
            psi_dependent,
            n_cheb: res.n_cheb,
            table,
            gl: gauss_legendre(n_gl),
        }
    }

    pub fn n_q(&self) -> usize {
        self.q.len()
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn q_nodes(&self) -> &[f64] {
        &self.q
    }

    pub fn weights(&self) -> [u64; 2] {
        self.weights
    }

    pub fn base_point(&self, qi: usize, l: usize) -> [C64; 2] {
        base_point(self.q[qi], 2.0 * PI * l as f64 / self.n_psi as f64)
    }

    fn row(&self, qi: usize, l: usize) -> &[C64] {
        let rows_per_q = if self.psi_dependent { self.n_psi } else { 1 };
        let r = qi * rows_per_q + if self.psi_dependent { l } else { 0 };
        let len = (self.modes + 1) * self.n_cheb;
        &self.table[r * len..(r + 1) * len]
    }

    #[inline]
    fn t_of(&self, s: f64) -> f64 {
        (2.0 * s - (self.s_lo + self.s_hi)) / (self.s_hi - self.s_lo)
    }

    /// ∫ D·log|P| dV where, on the orbit through each base point, P(λ) = Σ c_j λ^{e_j}
    /// with the terms supplied by `fiber(qi, l, x, out)`. log|P| is floored at −clip.
    pub fn pair<F>(&self, mut fiber: F, clip: f64) -> FiberPairing
    where
        F: FnMut(usize, usize, &[C64; 2], &mut Vec<(u64, C64)>),
    {
        let mut total = crate::numeric::CompensatedSum::new();
        let mut out = FiberPairing::default();
        let mut terms: Vec<(u64, C64)> = Vec::new();
        let mut work = FiberWork::default();
        for qi in 0..self.q.len() {
            work.warm.clear();
            for l in 0..self.n_psi {
                let x = self.base_point(qi, l);
                terms.clear();
                fiber(qi, l, &x, &mut terms);
                let v = self.pair_fiber(qi, l, &terms, clip, &mut work, &mut out);
                total.add(v);
            }
        }
        out.value = total.value();
        out
    }

    fn pair_fiber(
        &self,
        qi: usize,
        l: usize,
        terms: &[(u64, C64)],
        clip: f64,
        work: &mut FiberWork,
        out: &mut FiberPairing,
    ) -> f64 {
        let row = self.row(qi, l);
        let cmax = terms.iter().map(|t| t.1.norm()).fold(0.0, f64::max);
        let kept: Vec<(u64, C64)> = terms
            .iter()
            .copied()
            .filter(|t| t.1.norm() > 1e-14 * cmax && t.1.norm() > 0.0)
            .collect();
        if kept.is_empty() {
            out.null_fibers += 1;
            // log|P| = −clip everywhere on this orbit
            return -clip * self.integrate_mode0_constant(row);
        }
        let e0 = kept[0].0;
        let g = kept.iter().fold(0, |acc, t| gcd(acc, t.0 - e0));
        let lead = kept.last().unwrap().1;
        let roots: Vec<C64> = if kept.len() == 1 {
            Vec::new()
        } else {
            let deg = ((kept.last().unwrap().0 - e0) / g) as usize;
            let mut qc = vec![C64::new(0.0, 0.0); deg + 1];
            for t in &kept {
                qc[((t.0 - e0) / g) as usize] = t.1;
            }
            if deg == 1 {
                vec![-qc[0] / qc[1]]
            } else {
                let init = if work.warm.len() == deg {
                    Some(work.warm.as_slice())
                } else {
                    None
                };
                let (r, ok) = roots_aberth(&qc, init, 1e-13, 80);
                let r = if ok {
                    r
                } else {
                    let (r2, ok2) = roots_aberth(&qc, None, 1e-13, 400);
                    if ok2 {
                        r2
                    } else {
                        out.fallbacks += 1;
                        roots_companion(&qc)
                    }
                };
                work.warm = r.clone();
                r
            }
        };
        let gf = g as f64;
        let mut ln_mu: Vec<f64> = roots.iter().map(|r| r.norm().ln()).collect();
        ln_mu.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut prefix = vec![0.0; ln_mu.len() + 1];
        for (i, v) in ln_mu.iter().enumerate() {
            prefix[i + 1] = prefix[i] + v;
        }
        let suffix_total = prefix[ln_mu.len()];
        let ln_lead = lead.norm().ln();
        let mode0 = |s: f64| -> f64 {
            // roots with ln|μ| < g s contribute g s, the rest ln|μ|
            let gs = gf * s;
            let k = ln_mu.partition_point(|&v| v < gs);
            e0 as f64 * s + ln_lead + k as f64 * gs + (suffix_total - prefix[k])
        };
        let need_higher = self.modes >= g as usize && !roots.is_empty();
        let mut kinks: Vec<f64> = ln_mu
            .iter()
            .map(|v| v / gf)
            .filter(|&s| s > self.s_lo && s < self.s_hi)
            .collect();
        kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        let mut edges = Vec::with_capacity(kinks.len() + 2);
        edges.push(self.s_lo);
        edges.extend(kinks);
        edges.push(self.s_hi);
        let mut acc = 0.0;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in self.gl.0.iter().zip(&self.gl.1) {
                let s = mid + half * x;
                let t = self.t_of(s);
                let mut l0 = mode0(s);
                if l0 < -clip {
                    l0 = -clip;
                    out.clipped += 1;
                }
                let w0 = clenshaw(&row[..self.n_cheb], t).re;
                let mut v = w0 * l0;
                if need_higher {
                    let gs = gf * s;
                    let mut n = g as usize;
                    let mut j = 1usize;
                    while n <= self.modes {
                        let mut ln = C64::new(0.0, 0.0);
                        for r in &roots {
                            let lr = r.norm().ln();
                            if lr < gs {
                                ln -=
                                    (r.conj() * (-s * gf).exp()).powu(j as u32) / (2.0 * j as f64);
                            } else {
                                ln -= (r.inv() * (s * gf).exp()).powu(j as u32) / (2.0 * j as f64);
                            }
                        }
                        let wn = clenshaw(&row[n * self.n_cheb..(n + 1) * self.n_cheb], t);
                        v += 2.0 * (wn * ln.conj()).re;
                        n += g as usize;
                        j += 1;
                    }
                }
                acc += wt * half * v;
            }
        }
        acc
    }

    fn integrate_mode0_constant(&self, row: &[C64]) -> f64 {
        let half = 0.5 * (self.s_hi - self.s_lo);
        self.gl
            .0
            .iter()
            .zip(&self.gl.1)
            .map(|(x, w)| w * half * clenshaw(&row[..self.n_cheb], *x).re)
            .sum()
    }

    /// ∫ D·L dV for an orbit-invariant function L given on each orbit as a
    /// smooth profile in s, produced by `profile(qi, l, x)`.
    pub fn integrate_invariant<F, G>(&self, mut profile: F) -> f64
    where
        F: FnMut(usize, usize, &[C64; 2]) -> G,
        G: Fn(f64) -> f64,
    {
        let mut total = crate::numeric::CompensatedSum::new();
        let half = 0.5 * (self.s_hi - self.s_lo);
        let mid = 0.5 * (self.s_hi + self.s_lo);
        for qi in 0..self.q.len() {
            for l in 0..self.n_psi {
                let x = self.base_point(qi, l);
                let p = profile(qi, l, &x);
                let row = self.row(qi, l);
                let mut acc = 0.0;
                for (t, w) in self.gl.0.iter().zip(&self.gl.1) {
                    let s = mid + half * t;
                    acc += w * half * clenshaw(&row[..self.n_cheb], *t).re * p(s);
                }
                total.add(acc);
            }
        }
        total.value()
    }
}

#[derive(Default)]
struct FiberWork {
    warm: Vec<C64>,
}

pub fn base_point(q: f64, psi: f64) -> [C64; 2] {
    [
        C64::new((1.0 - q).max(0.0).sqrt(), 0.0),
        C64::from_polar(q.max(0.0).sqrt(), psi),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Φ = 2i·G(|z|²)·∂r∧∂̄r with r = |z|²/2 and G a bump in log|z|.
    struct Radial;
    impl FlatTestForm for Radial {
        fn coeffs(&self, z: [C64; 2]) -> [[C64; 2]; 2] {
            let r2 = z[0].norm_sqr() + z[1].norm_sqr();
            let s = 0.5 * r2.ln();
            let g = crate::numeric::bump((s + 0.3) / 0.2);
            let mut b = [[C64::new(0.0, 0.0); 2]; 2];
            for j in 0..2 {
                for k in 0..2 {
                    b[j][k] = 0.5 * g * z[j].conj() * z[k];
                }
            }
            b
        }
        fn s_range(&self) -> (f64, f64) {
            (-0.5, -0.1)
        }
        fn theta_modes(&self) -> usize {
            0
        }
        fn psi_dependent(&self) -> bool {
            false
        }
        fn fd_step(&self) -> f64 {
            1e-5
        }
    }

    #[test]
    fn linear_function_pairs_to_zero_and_line_has_expected_mass() {
        let plan = FiberPlan::new(
            [1, 1],
            &Radial,
            FiberResolution {
                n_q: 12,
                n_psi: 8,
                n_cheb: 48,
            },
        );
        // u = 1: no zeros
        let v = plan.pair(|_, _, _, t| t.push((0, C64::new(1.0, 0.0))), 60.0);
        assert!(v.value.abs() < 1e-8, "{}", v.value);
        // u = z_1: zero set is the line {z_1 = 0}; direct integral of Φ over it
        let v = plan.pair(|_, _, x, t| t.push((1, x[0])), 60.0);
        let (ss, ws) = gauss_legendre_on(200, -0.5, -0.1);
        // on {z_1=0}: Φ = 2i·G·¼|z_2|²dz∧dz̄ = G·|z_2|²dA; dA = ρ dρ dφ = e^{2s} ds dφ
        let direct: f64 = ss
            .iter()
            .zip(&ws)
            .map(|(s, w)| {
                let g = crate::numeric::bump((s + 0.3) / 0.2);
                w * g * (2.0 * s).exp() * (2.0 * s).exp() * 2.0 * PI
            })
            .sum();
        assert!(
            (v.value - direct).abs() < 1e-6 * direct.abs(),
            "{} {}",
            v.value,
            direct
        );
    }
}
