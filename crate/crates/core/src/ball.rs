//! Unit-ball grids and the ρ^α-weighted quadrature on them.
//!
//! In 1-D the ball is the interval `y ∈ [-1, 1]`; for `N ≥ 2` fields are
//! radial and the grid is `r = |y| ∈ [0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::unit_sphere_area;

/// Uniform nodes on the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallGrid {
    pub dim: usize,
    /// `y` in 1-D, `r = |y|` otherwise.
    pub nodes: Vec<f64>,
    pub dy: f64,
}

impl BallGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "ball grid needs at least 3 nodes, got {n}"
            )));
        }
        let (lo, dy) = if dim == 1 {
            (-1.0, 2.0 / (n - 1) as f64)
        } else {
            (0.0, 1.0 / (n - 1) as f64)
        };
        let mut nodes: Vec<f64> = (0..n).map(|i| lo + i as f64 * dy).collect();
        nodes[n - 1] = 1.0;
        Ok(Self { dim, nodes, dy })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Exact volume of the unit ball in `R^dim`.
    pub fn exact_volume(&self) -> f64 {
        unit_sphere_area(self.dim) / self.dim as f64
    }
}

/// Which power of ρ multiplies the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightPower {
    Alpha,
    AlphaMinus1,
    AlphaMinus2,
    /// Unweighted (ρ^0).
    One,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallQuadrature {
    pub grid: BallGrid,
    pub alpha: f64,
    /// Plain volume weights (Jacobian included for radial grids).
    pub weights: Vec<f64>,
    rho_alpha: Vec<f64>,
    rho_alpha_m1: Vec<f64>,
    rho_alpha_m2: Vec<f64>,
}

impl BallQuadrature {
    /// 1-D: trapezoid in `y`. Radial: weights `∫ φ_i(r) r^(N-1) |S^(N-1)| dr`
    /// for the hat functions `φ_i`, which integrate piecewise-linear data
    /// against the exact Jacobian.
    pub fn new(grid: BallGrid, alpha: f64) -> Result<Self> {
        if !(alpha > 2.0) {
            return Err(Error::InvalidWeight { alpha, bound: 2.0 });
        }
        let n = grid.len();
        let h = grid.dy;
        let weights = if grid.dim == 1 {
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            w
        } else {
            let m = grid.dim as f64;
            let area = unit_sphere_area(grid.dim);
            // ∫_{a}^{b} φ(r) r^(m-1) dr for a hat rising from a to b, and falling.
            let mono = |a: f64, b: f64, k: f64| (b.powf(k) - a.powf(k)) / k;
            (0..n)
                .map(|i| {
                    let ri = grid.nodes[i];
                    let mut w = 0.0;
                    if i > 0 {
                        let a = grid.nodes[i - 1];
                        // φ = (r - a) / h on [a, ri]
                        w += (mono(a, ri, m + 1.0) - a * mono(a, ri, m)) / h;
                    }
                    if i + 1 < n {
                        let b = grid.nodes[i + 1];
                        // φ = (b - r) / h on [ri, b]
                        w += (b * mono(ri, b, m) - mono(ri, b, m + 1.0)) / h;
                    }
                    w * area
                })
                .collect()
        };
        let rho: Vec<f64> = grid
            .nodes
            .iter()
            .map(|&y| (1.0 - y * y).max(0.0))
            .collect();
        let pw = |e: f64| rho.iter().map(|&r| r.powf(e)).collect::<Vec<_>>();
        Ok(Self {
            rho_alpha: pw(alpha),
            rho_alpha_m1: pw(alpha - 1.0),
            rho_alpha_m2: pw(alpha - 2.0),
            grid,
            alpha,
            weights,
        })
    }

    pub fn rho_power(&self, power: WeightPower) -> Option<&[f64]> {
        match power {
            WeightPower::Alpha => Some(&self.rho_alpha),
            WeightPower::AlphaMinus1 => Some(&self.rho_alpha_m1),
            WeightPower::AlphaMinus2 => Some(&self.rho_alpha_m2),
            WeightPower::One => None,
        }
    }

    /// `Σ_i weight_i ρ_i^power f_i`.
    pub fn integrate(&self, f: &[f64], power: WeightPower) -> f64 {
        debug_assert_eq!(f.len(), self.weights.len());
        match self.rho_power(power) {
            Some(r) => self
                .weights
                .iter()
                .zip(r)
                .zip(f)
                .map(|((w, r), f)| w * r * f)
                .sum(),
            None => self.weights.iter().zip(f).map(|(w, f)| w * f).sum(),
        }
    }

    /// Integrate a node-wise expression without materializing it.
    pub fn integrate_with<F: Fn(usize) -> f64>(&self, power: WeightPower, f: F) -> f64 {
        let rho = self.rho_power(power);
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            let r = rho.map_or(1.0, |r| r[i]);
            acc += w * r * f(i);
        }
        acc
    }
}

/// Free-function form used by the energy code and tests.
pub fn ball_integrate(quad: &BallQuadrature, integrand: &[f64], power: WeightPower) -> f64 {
    quad.integrate(integrand, power)
}
