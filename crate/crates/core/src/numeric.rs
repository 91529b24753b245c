//! Small numerical building blocks shared by the model modules.

use std::f64::consts::PI;

/// Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice, in slice order.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

pub fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: u64, b: u64) -> u64 {
    if a == 0 || b == 0 {
        0
    } else {
        a / gcd(a, b) * b
    }
}

pub fn ln_factorial(k: u64) -> f64 {
    if k < 2 {
        0.0
    } else {
        statrs::function::gamma::ln_gamma(k as f64 + 1.0)
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|t| c + h * t).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Chebyshev points of the first kind on [-1, 1], ordered increasingly.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| -(PI * (j as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Chebyshev coefficients of the interpolant through values at `chebyshev_nodes(n)`.
pub fn chebyshev_coeffs<T>(values: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = values.len();
    let mut c = vec![T::default(); n];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut acc = T::default();
        for (j, &v) in values.iter().enumerate() {
            // node j corresponds to angle pi (n - j - 1/2) / n because of the increasing order
            let ang = PI * (n as f64 - j as f64 - 0.5) / n as f64;
            acc = acc + v * (k as f64 * ang).cos();
        }
        let scale = if k == 0 { 1.0 } else { 2.0 } / n as f64;
        *ck = acc * scale;
    }
    c
}

/// Clenshaw evaluation of a Chebyshev series at t in [-1, 1].
#[inline]
pub fn clenshaw<T>(c: &[T], t: f64) -> T
where
    T: Copy
        + Default
        + std::ops::Add<Output = T>
        + std::ops::Sub<Output = T>
        + std::ops::Mul<f64, Output = T>,
{
    let mut b1 = T::default();
    let mut b2 = T::default();
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + b1 * (2.0 * t) - b2;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => c0 + b1 * t - b2,
        None => T::default(),
    }
}

/// Normalized smooth bump on (-1, 1): c * exp(-1 / (1 - t^2)) with unit integral.
pub fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - t * t)).exp() / BUMP_MASS
    }
}

/// Integral of exp(-1/(1-t^2)) over (-1, 1).
pub const BUMP_MASS: f64 = 0.443_993_816_168_079_4;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1usize, 2, 5, 16, 40] {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(t, v)| v * t.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg as f64 + 1.0)
                };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} {q} {exact}");
            }
        }
    }

    #[test]
    fn bump_has_unit_mass() {
        let (x, w) = gauss_legendre(200);
        let m: f64 = x.iter().zip(&w).map(|(t, v)| v * bump(*t)).sum();
        assert!((m - 1.0).abs() < 1e-12, "{m}");
    }

    #[test]
    fn chebyshev_round_trip() {
        let n = 24;
        let xs = chebyshev_nodes(n);
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let vals: Vec<f64> = xs.iter().map(|&t| f(t)).collect();
        let c = chebyshev_coeffs(&vals);
        for t in [-0.9, -0.3, 0.0, 0.41, 0.99] {
            assert!((clenshaw(&c, t) - f(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn compensated_sum_recovers_cancellation() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(&xs), 2.0);
    }
}
