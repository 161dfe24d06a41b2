//! Small numerical helpers shared across modules.

/// `x |x|^(p-1)`, the odd power used by the forcing term.
#[inline]
pub fn signed_pow(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x.abs()
    } else if p == 3.0 {
        x * x * x
    } else {
        x * x.abs().powf(p - 1.0)
    }
}

/// Neumaier-compensated accumulator. Simulation clocks use it so that the
/// distance to the blow-up time stays accurate after 1e5+ small steps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new(start: f64) -> Self {
        Self {
            sum: start,
            comp: 0.0,
        }
    }

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

/// Cumulative trapezoid of `y` over abscissae `x`; the first entry is 0.
pub fn cumulative_trapezoid(x: &[f64], y: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), y.len());
    let mut out = Vec::with_capacity(x.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        if i > 0 {
            acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// Four-point Lagrange interpolation on a uniform grid starting at `x0`
/// with spacing `h`. `fetch(i)` returns the sample at integer index `i`
/// and must accept every index in `lo..=hi`; the stencil is shifted to stay
/// inside that range.
pub fn cubic_uniform<F: Fn(isize) -> f64>(
    x: f64,
    x0: f64,
    h: f64,
    lo: isize,
    hi: isize,
    fetch: F,
) -> f64 {
    let pos = (x - x0) / h;
    let mut base = pos.floor() as isize - 1;
    if base < lo {
        base = lo;
    }
    if base + 3 > hi {
        base = hi - 3;
    }
    let xi = pos - base as f64;
    // Lagrange basis at nodes 0,1,2,3.
    let l0 = -(xi - 1.0) * (xi - 2.0) * (xi - 3.0) / 6.0;
    let l1 = xi * (xi - 2.0) * (xi - 3.0) / 2.0;
    let l2 = -xi * (xi - 1.0) * (xi - 3.0) / 2.0;
    let l3 = xi * (xi - 1.0) * (xi - 2.0) / 6.0;
    l0 * fetch(base) + l1 * fetch(base + 1) + l2 * fetch(base + 2) + l3 * fetch(base + 3)
}

/// Second-order finite-difference derivative of uniformly sampled data,
/// one-sided at the ends.
pub fn gradient_uniform(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut g = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (f[1] - f[0]) / h;
            g[0] = d;
            g[1] = d;
        }
        return g;
    }
    g[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        g[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    g[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    g
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Surface area of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    // |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2); Gamma at half-integers by recursion.
    let half = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / gamma_half_integer(n)
}

/// Gamma(n/2) for positive integer n.
fn gamma_half_integer(n: usize) -> f64 {
    assert!(n >= 1);
    let (mut g, mut k) = if n.is_multiple_of(2) {
        (1.0, 2usize) // Gamma(1)
    } else {
        (std::f64::consts::PI.sqrt(), 1usize) // Gamma(1/2)
    };
    while k < n {
        g *= k as f64 / 2.0;
        k += 2;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((unit_sphere_area(2) - 2.0 * pi).abs() < 1e-13);
        assert!((unit_sphere_area(3) - 4.0 * pi).abs() < 1e-13);
        assert!((unit_sphere_area(4) - 2.0 * pi * pi).abs() < 1e-12);
    }

    #[test]
    fn cubic_is_exact_on_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let h = 0.1;
        let samples: Vec<f64> = (0..20).map(|i| f(i as f64 * h)).collect();
        for &x in &[0.0, 0.03, 0.77, 1.5, 1.9] {
            let v = cubic_uniform(x, 0.0, h, 0, 19, |i| samples[i as usize]);
            assert!((v - f(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn compensated_clock_tracks_small_steps() {
        let mut c = CompensatedSum::new(0.0);
        for _ in 0..1_000_000 {
            c.add(1e-7);
        }
        assert!((c.value() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn signed_pow_is_odd() {
        for &p in &[1.5, 2.0, 2.5, 3.0] {
            assert_eq!(signed_pow(-2.0, p), -signed_pow(2.0, p));
            assert!((signed_pow(2.0, p) - 2f64.powf(p)).abs() < 1e-12);
        }
    }
}
