//! Szegő kernel functions S_m(x) = Σ|f_j(x)|² on the diagonal, their uniform
//! bounds, and the search for combining multiples that bound Σ_j S_{k_j m}
//! from both sides.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::crspace::{fourier_basis, FourierBasis};
use crate::geometry::{dist_to_stratum, Stratification, WeightedAction};
use crate::Error;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SzegoProfile {
    pub m: u64,
    pub values: Vec<f64>,
    pub min: f64,
    pub max: f64,
    /// S_m/m^n (equal to `values` when m = 0).
    pub normalized: Vec<f64>,
}

fn scale(m: u64, n: usize) -> f64 {
    if m == 0 {
        1.0
    } else {
        (m as f64).powi(n as i32)
    }
}

pub fn szego_function(basis: &FourierBasis, points: &[Vec<C64>]) -> SzegoProfile {
    let n = basis.weights.len() - 1;
    let values = crate::par_map(points, |x| basis.kernel_diagonal(x));
    let s = scale(basis.m, n);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SzegoProfile {
        m: basis.m,
        normalized: values.iter().map(|v| v / s).collect(),
        values,
        min,
        max,
    }
}

impl SzegoProfile {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,S_m,S_m_over_m_n")?;
        for (i, (v, r)) in self.values.iter().zip(&self.normalized).enumerate() {
            writeln!(out, "{i},{v:.17e},{r:.17e}")?;
        }
        Ok(())
    }
}

/// Points of the sphere with moduli² on the lattice {k/res} of the simplex and
/// all phases zero. S_m is torus invariant, so these represent every orbit type,
/// including the coordinate strata.
pub fn moduli_lattice(n: usize, res: usize) -> Vec<Vec<C64>> {
    fn rec(left: usize, slots: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(left - k, slots - 1, prefix, out);
            prefix.pop();
        }
    }
    let res = res.max(1);
    let mut ks = Vec::new();
    rec(res, n + 1, &mut Vec::new(), &mut ks);
    ks.into_iter()
        .map(|k| {
            k.iter()
                .map(|&kj| C64::new((kj as f64 / res as f64).sqrt(), 0.0))
                .collect()
        })
        .collect()
}

pub fn lattice_id(n: usize, res: usize) -> String {
    format!("moduli-lattice n={n} res={res}")
}

/// Memoizes S_m at a fixed point set.
pub struct KernelCache<'a> {
    action: &'a WeightedAction,
    points: &'a [Vec<C64>],
    table: HashMap<u64, Vec<f64>>,
}

impl<'a> KernelCache<'a> {
    pub fn new(action: &'a WeightedAction, points: &'a [Vec<C64>]) -> Self {
        Self {
            action,
            points,
            table: HashMap::new(),
        }
    }

    pub fn get(&mut self, m: u64) -> &[f64] {
        let action = self.action;
        let points = self.points;
        self.table.entry(m).or_insert_with(|| {
            let basis = fourier_basis(action, m);
            crate::par_map(points, |x| basis.kernel_diagonal(x))
        })
    }
}

fn relative_spread(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi <= 0.0 {
        return if lo == hi { 0.0 } else { f64::INFINITY };
    }
    (hi - lo) / hi
}

fn top_half<T: Copy>(xs: &[T]) -> &[T] {
    &xs[xs.len() / 2..]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UpperBoundReport {
    pub m_range: Vec<u64>,
    /// max over the points of S_m/m^n, per m.
    pub per_m: Vec<f64>,
    pub c_upper: f64,
    pub spread_top_half: f64,
    pub pass: bool,
}

pub fn check_upper_bound(
    action: &WeightedAction,
    m_range: &[u64],
    points: &[Vec<C64>],
) -> Result<UpperBoundReport, Error> {
    if m_range.is_empty() {
        return Err(Error::InvalidInput("m_range is empty".into()));
    }
    let n = action.n();
    let per_m: Vec<f64> = m_range
        .iter()
        .map(|&m| {
            let basis = fourier_basis(action, m);
            let s = scale(m, n);
            crate::par_map(points, |x| basis.kernel_diagonal(x) / s)
                .into_iter()
                .fold(0.0, f64::max)
        })
        .collect();
    let c_upper = per_m.iter().cloned().fold(0.0, f64::max);
    let spread = relative_spread(top_half(&per_m));
    Ok(UpperBoundReport {
        m_range: m_range.to_vec(),
        per_m,
        c_upper,
        spread_top_half: spread,
        pass: spread < 0.1,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LeadingCoefficient {
    pub estimate: f64,
    /// Fitted exponent p in |S_m/m^n − estimate| ≈ C m^{−p}; None if the sequence is already flat.
    pub rate: Option<f64>,
    pub sequence: Vec<(u64, f64)>,
    pub warnings: Vec<String>,
}

/// Richardson extrapolation of S_m/m^n assuming a 1/m correction, from the two
/// largest m in the range.
pub fn leading_coefficient(
    action: &WeightedAction,
    strat: &Stratification,
    x: &[C64],
    m_range: &[u64],
) -> Result<LeadingCoefficient, Error> {
    if m_range.len() < 2 {
        return Err(Error::InvalidInput("need at least two m values".into()));
    }
    let mut warnings = Vec::new();
    if strat.period_of(x) != 1 {
        return Err(Error::InvalidInput(
            "point is not in the regular stratum".into(),
        ));
    }
    let mut ms = m_range.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let m_max = *ms.last().unwrap();
    let d = if strat.periods.iter().any(|&p| p > 1) {
        dist_to_stratum(x, 2, strat)
    } else {
        f64::INFINITY
    };
    if d < 2.0 / (m_max as f64).sqrt() {
        warnings.push(format!(
            "point lies {d:.3e} from the singular set (< 2/sqrt({m_max})); the estimate is contaminated by the Gaussian tail"
        ));
    }
    let n = action.n();
    let sequence: Vec<(u64, f64)> = ms
        .iter()
        .map(|&m| (m, fourier_basis(action, m).kernel_diagonal(x) / scale(m, n)))
        .collect();
    let (m1, r1) = sequence[sequence.len() - 2];
    let (m2, r2) = sequence[sequence.len() - 1];
    let estimate = (m2 as f64 * r2 - m1 as f64 * r1) / (m2 - m1) as f64;
    let pts: Vec<(f64, f64)> = sequence
        .iter()
        .filter_map(|&(m, r)| {
            let e = (r - estimate).abs();
            (e > 1e-14 * estimate.abs().max(1e-300) && m > 0).then(|| ((m as f64).ln(), e.ln()))
        })
        .collect();
    let rate = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    } else {
        None
    };
    Ok(LeadingCoefficient {
        estimate,
        rate,
        sequence,
        warnings,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub m: u64,
    pub ratio: f64,
    pub used: usize,
    pub skipped: usize,
}

/// max |S_m(x) − S_m(x₁)| / (m^{n+1/2} |x − x₁|) over the pairs.
pub fn lipschitz_ratio(
    action: &WeightedAction,
    m: u64,
    pairs: &[(Vec<C64>, Vec<C64>)],
) -> Result<LipschitzReport, Error> {
    if pairs.is_empty() {
        return Err(Error::InvalidInput("no sample pairs".into()));
    }
    let basis = fourier_basis(action, m);
    let denom = (m.max(1) as f64).powf(action.n() as f64 + 0.5);
    let ratios = crate::par_map(pairs, |(x, y)| {
        let d = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if d < 1e-8 {
            return None;
        }
        Some((basis.kernel_diagonal(x) - basis.kernel_diagonal(y)).abs() / (denom * d))
    });
    let used = ratios.iter().filter(|r| r.is_some()).count();
    Ok(LipschitzReport {
        m,
        ratio: ratios.iter().flatten().cloned().fold(0.0, f64::max),
        used,
        skipped: pairs.len() - used,
    })
}

/// Persisted outcome of the combining-multiples search.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiplesCertificate {
    pub weights: Vec<u64>,
    pub alpha: u64,
    pub k_list: Vec<u64>,
    pub c_hat: f64,
    #[serde(rename = "C_hat")]
    pub big_c_hat: f64,
    pub grid_id: String,
    pub m_grid: Vec<u64>,
    pub free_level: f64,
    pub c_target: f64,
    /// Lower and upper constants restricted to each m.
    pub c_hat_by_m: Vec<f64>,
    #[serde(rename = "C_hat_by_m")]
    pub big_c_hat_by_m: Vec<f64>,
    /// Whether ĉ and Ĉ vary by less than 10% over the top half of m_grid.
    pub stable: bool,
}

pub const DEFAULT_K_CAP: u64 = 64;

/// Greedy search for 1 = k_0 < k_1 < … such that
/// min over points and m' ∈ m_grid of Σ_j S_{k_j m'}(x)/m'^n reaches
/// c_target times the free-stratum level. The free-stratum level is the largest
/// S_{m'}/m'^n over period-1 points at the largest m'.
///
/// Each step appends the smallest k reaching the target if one exists below
/// `k_cap`; otherwise the k with the best minimum, provided it improves.
pub fn find_combining_multiples(
    action: &WeightedAction,
    strat: &Stratification,
    m_grid: &[u64],
    c_target: f64,
    points: &[Vec<C64>],
    grid_id: &str,
    k_cap: u64,
) -> Result<MultiplesCertificate, Error> {
    if m_grid.is_empty() || points.is_empty() {
        return Err(Error::InvalidInput("empty m_grid or point set".into()));
    }
    if let Some(&bad) = m_grid.iter().find(|&&m| m == 0 || m % strat.alpha != 0) {
        return Err(Error::InvalidInput(format!(
            "m_grid entry {bad} is not a positive multiple of alpha = {}",
            strat.alpha
        )));
    }
    if !(0.0..1.0).contains(&c_target) {
        return Err(Error::InvalidInput(format!(
            "c_target {c_target} outside [0,1)"
        )));
    }
    let n = action.n();
    let mut ms = m_grid.to_vec();
    ms.sort_unstable();
    ms.dedup();
    let m_top = *ms.last().unwrap();
    let mut cache = KernelCache::new(action, points);

    let free: Vec<usize> = (0..points.len())
        .filter(|&i| strat.period_of(&points[i]) == 1)
        .collect();
    let top = cache.get(m_top).to_vec();
    let free_level = free
        .iter()
        .map(|&i| top[i] / scale(m_top, n))
        .fold(0.0, f64::max);

    // ratio table for a given k list: [m index][point]
    let table = |cache: &mut KernelCache, ks: &[u64]| -> Vec<Vec<f64>> {
        ms.iter()
            .map(|&m| {
                let mut acc = vec![0.0; points.len()];
                for &k in ks {
                    for (a, v) in acc.iter_mut().zip(cache.get(k * m)) {
                        *a += v;
                    }
                }
                let s = scale(m, n);
                acc.into_iter().map(|v| v / s).collect()
            })
            .collect()
    };
    let global_min = |t: &[Vec<f64>]| {
        t.iter()
            .flat_map(|r| r.iter())
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };

    let mut k_list: Vec<u64> = if c_target == 0.0 {
        (1..=strat.t() as u64).collect()
    } else {
        vec![1]
    };
    let target = c_target * free_level;
    let mut current = global_min(&table(&mut cache, &k_list));
    while current < target {
        let last = *k_list.last().unwrap();
        let mut best: Option<(u64, f64)> = None;
        let mut hit = None;
        for k in last + 1..=k_cap {
            let mut cand = k_list.clone();
            cand.push(k);
            let v = global_min(&table(&mut cache, &cand));
            if v >= target {
                hit = Some((k, v));
                break;
            }
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        match hit.or(best.filter(|&(_, v)| v > current)) {
            Some((k, v)) => {
                k_list.push(k);
                current = v;
            }
            None => {
                return Err(Error::SearchFailed(format!(
                    "no k <= {k_cap} raises min ratio {current:.4e} towards target {target:.4e} (k_list so far {k_list:?})"
                )))
            }
        }
    }

    let t = table(&mut cache, &k_list);
    let lo: Vec<f64> = t
        .iter()
        .map(|r| r.iter().cloned().fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = t
        .iter()
        .map(|r| r.iter().cloned().fold(0.0, f64::max))
        .collect();
    let stable = relative_spread(top_half(&lo)) < 0.1 && relative_spread(top_half(&hi)) < 0.1;
    Ok(MultiplesCertificate {
        weights: action.weights().to_vec(),
        alpha: strat.alpha,
        k_list,
        c_hat: lo.iter().cloned().fold(f64::INFINITY, f64::min),
        big_c_hat: hi.iter().cloned().fold(0.0, f64::max),
        grid_id: grid_id.to_string(),
        m_grid: ms,
        free_level,
        c_target,
        c_hat_by_m: lo,
        big_c_hat_by_m: hi,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::stratify;
    use std::f64::consts::PI;

    #[test]
    fn vacuous_target_returns_consecutive_multiples() {
        let a = WeightedAction::new(&[1, 2]).unwrap();
        let st = stratify(&a);
        let pts = moduli_lattice(1, 8);
        let c = find_combining_multiples(&a, &st, &[2, 4], 0.0, &pts, "t", 8).unwrap();
        assert_eq!(c.k_list, vec![1, 2]);
        assert!(find_combining_multiples(&a, &st, &[3], 0.5, &pts, "t", 8).is_err());
    }

    #[test]
    fn standard_sphere_kernel_is_constant() {
        let a = WeightedAction::standard(1);
        let pts = moduli_lattice(1, 7);
        for m in [0u64, 1, 5, 30] {
            let p = szego_function(&fourier_basis(&a, m), &pts);
            let exact = (m as f64 + 1.0) / (2.0 * PI * PI);
            for v in &p.values {
                assert!((v - exact).abs() < 1e-12 * exact);
            }
        }
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(moduli_lattice(1, 4).len(), 5);
        assert_eq!(moduli_lattice(2, 3).len(), 10);
        for x in moduli_lattice(2, 5) {
            let s: f64 = x.iter().map(|c| c.norm_sqr()).sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }
}
