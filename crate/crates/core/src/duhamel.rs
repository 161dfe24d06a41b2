//! One-dimensional solver built directly on the Duhamel representation
//!
//! ```text
//! 2u(t,x) = u0(x+t) + u0(x-t) + ∫_{x-t}^{x+t} u1 + ∫_0^t ∫_{x-t+s}^{x+t-s} h(s,ζ) dζ ds
//! ```
//!
//! with source `h = u_t|u_t|^(p-1)`. Time steps equal the grid spacing so
//! every light-cone integral runs along grid diagonals. `u_t` comes from the
//! time derivative of the same formula:
//!
//! ```text
//! u_t = ½(u0'(x+t) - u0'(x-t)) + ½(u1(x+t) + u1(x-t))
//!       + ½ ∫_0^t [h(s, x+t-s) + h(s, x-t+s)] ds
//! ```
//!
//! The source at the new level enters `u_t` implicitly through the
//! trapezoid end weight and is resolved with two Picard sweeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::signed_pow;
use crate::profile::InitialProfile;
use crate::solver::{SpatialGrid, WaveHistory};

/// Step cap; the source history grows as steps × nx.
pub const MAX_DUHAMEL_STEPS: usize = 200_000;

/// How the source `h` is continued outside the computational interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// Period `2R`; the profiles must be periodic as well.
    Periodic,
    /// `h = 0` outside the grid (compactly supported solutions).
    Zero,
}

/// The fixed data of a Duhamel run.
#[derive(Debug, Clone)]
pub struct DuhamelProblem {
    pub grid: SpatialGrid,
    pub p: f64,
    pub nonlinear: bool,
    pub extension: Extension,
    pub u0: InitialProfile,
    pub u1: InitialProfile,
}

/// Stored source samples `h(t_m, x_j)`, one row per time level.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourceHistory {
    levels: Vec<Vec<f64>>,
    /// Prefix sums per level: `prefix[m][k] = Σ_{i<k} h_m[i]`.
    prefix: Vec<Vec<f64>>,
}

impl SourceHistory {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, m: usize) -> &[f64] {
        &self.levels[m]
    }

    fn push(&mut self, h: Vec<f64>) {
        let mut pre = Vec::with_capacity(h.len() + 1);
        let mut acc = 0.0;
        pre.push(0.0);
        for v in &h {
            acc += v;
            pre.push(acc);
        }
        self.levels.push(h);
        self.prefix.push(pre);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelState {
    /// Number of completed steps; `t = step * dx`.
    pub step: usize,
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
    pub source_history: SourceHistory,
    /// Picard contraction ratio of the last step (0 when nothing moved).
    pub picard_ratio: f64,
}

/// Fields of one Duhamel time level without the source history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuhamelSnapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl DuhamelProblem {
    pub fn new(
        grid: SpatialGrid,
        p: f64,
        nonlinear: bool,
        extension: Extension,
        u0: InitialProfile,
        u1: InitialProfile,
    ) -> Result<Self> {
        if grid.dim != 1 {
            return Err(Error::InvalidGrid(
                "the Duhamel representation is one-dimensional".into(),
            ));
        }
        Ok(Self {
            grid,
            p,
            nonlinear,
            extension,
            u0,
            u1,
        })
    }

    fn dx(&self) -> f64 {
        self.grid.dx
    }

    fn x(&self, k: isize) -> f64 {
        self.grid.start() + k as f64 * self.grid.dx
    }

    fn source(&self, v: f64) -> f64 {
        if self.nonlinear {
            signed_pow(v, self.p)
        } else {
            0.0
        }
    }

    fn period(&self) -> usize {
        self.grid.nx - 1
    }

    /// `h_m` at an arbitrary integer node index.
    fn h_at(&self, hist: &SourceHistory, m: usize, k: isize) -> f64 {
        let n = self.grid.nx as isize;
        match self.extension {
            Extension::Zero => {
                if k < 0 || k >= n {
                    0.0
                } else {
                    hist.levels[m][k as usize]
                }
            }
            Extension::Periodic => {
                let per = self.period() as isize;
                hist.levels[m][k.rem_euclid(per) as usize]
            }
        }
    }

    /// `Σ_{k=a}^{b} h_m[k]` over the extended line.
    fn h_range_sum(&self, hist: &SourceHistory, m: usize, a: isize, b: isize) -> f64 {
        if b < a {
            return 0.0;
        }
        let pre = &hist.prefix[m];
        match self.extension {
            Extension::Zero => {
                let n = self.grid.nx as isize;
                let lo = a.max(0);
                let hi = b.min(n - 1);
                if hi < lo {
                    0.0
                } else {
                    pre[(hi + 1) as usize] - pre[lo as usize]
                }
            }
            Extension::Periodic => {
                let per = self.period() as isize;
                // Sum over the unique points 0..per.
                let full = pre[per as usize];
                let cum = |k: isize| -> f64 {
                    // Σ_{i<k} over the periodic line, relative to index 0.
                    let q = k.div_euclid(per);
                    let r = k.rem_euclid(per);
                    q as f64 * full + pre[r as usize]
                };
                cum(b + 1) - cum(a)
            }
        }
    }

    /// Trapezoid of `h_m` over nodes `a..=b` in space (times dx).
    fn h_trapezoid(&self, hist: &SourceHistory, m: usize, a: isize, b: isize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let s = self.h_range_sum(hist, m, a, b)
            - 0.5 * (self.h_at(hist, m, a) + self.h_at(hist, m, b));
        s * self.dx()
    }

    /// `∫ u1` over nodes `a..=b` by the trapezoid rule.
    fn u1_trapezoid(&self, a: isize, b: isize) -> f64 {
        if b <= a {
            return 0.0;
        }
        let mut s = 0.5 * (self.u1.eval(self.x(a)) + self.u1.eval(self.x(b)));
        for k in a + 1..b {
            s += self.u1.eval(self.x(k));
        }
        s * self.dx()
    }

    /// Initial level: sampled data and the source at t = 0.
    pub fn initial_state(&self) -> Result<DuhamelState> {
        let u = self.u0.sample(&self.grid.coords)?;
        let ut = self.u1.sample(&self.grid.coords)?;
        let mut source_history = SourceHistory::default();
        source_history.push(ut.iter().map(|&v| self.source(v)).collect());
        Ok(DuhamelState {
            step: 0,
            t: 0.0,
            u,
            ut,
            source_history,
            picard_ratio: 0.0,
        })
    }

    /// `u_t` at level `n` and node `j` from the stored levels `0..n` plus
    /// a trial source value at level `n`, node `j`.
    fn ut_known_part(&self, hist: &SourceHistory, n: usize, j: isize) -> f64 {
        let nn = n as isize;
        let x = self.x(j);
        let t = n as f64 * self.dx();
        let mut v = 0.5 * (self.u0.derivative(x + t) - self.u0.derivative(x - t))
            + 0.5 * (self.u1.eval(x + t) + self.u1.eval(x - t));
        // Trapezoid in s over levels 0..=n; the level-n term is added by the caller.
        let mut s = 0.0;
        for m in 0..n {
            let w = if m == 0 { 0.5 } else { 1.0 };
            let mm = m as isize;
            s += w * (self.h_at(hist, m, j + nn - mm) + self.h_at(hist, m, j - nn + mm));
        }
        v += 0.5 * self.dx() * s;
        v
    }

    fn u_at(&self, hist: &SourceHistory, n: usize, j: isize) -> f64 {
        let nn = n as isize;
        let x = self.x(j);
        let t = n as f64 * self.dx();
        let mut twice = self.u0.eval(x + t) + self.u0.eval(x - t) + self.u1_trapezoid(j - nn, j + nn);
        // Levels m = 0..n-1; the level-n slice has zero width.
        let mut s = 0.0;
        for m in 0..n {
            let w = if m == 0 { 0.5 } else { 1.0 };
            let half = nn - m as isize;
            s += w * self.h_trapezoid(hist, m, j - half, j + half);
        }
        twice += s * self.dx();
        0.5 * twice
    }
}

/// Advance one characteristic step `dt = dx`.
pub fn duhamel_advance(problem: &DuhamelProblem, mut state: DuhamelState) -> Result<DuhamelState> {
    let n = state.step + 1;
    if n > MAX_DUHAMEL_STEPS {
        return Err(Error::NumericalFailure {
            t: state.t,
            reason: format!("Duhamel step cap of {MAX_DUHAMEL_STEPS} reached"),
        });
    }
    let nx = problem.grid.nx;
    let hist = &state.source_history;
    let half_dt = 0.5 * problem.dx();

    let known: Vec<f64> = (0..nx)
        .map(|j| problem.ut_known_part(hist, n, j as isize))
        .collect();
    let u: Vec<f64> = (0..nx).map(|j| problem.u_at(hist, n, j as isize)).collect();

    // Level-n end of the s-trapezoid: weight ½, both characteristics meet at x,
    // so the contribution is ½ · dt · ½ · 2h = ½ dt h.
    let h0 = hist.levels[n - 1].clone();
    let sweep = |h: &[f64]| -> Vec<f64> {
        known
            .iter()
            .zip(h)
            .map(|(k, hv)| k + half_dt * hv)
            .collect()
    };
    let ut1 = sweep(&h0);
    let h1: Vec<f64> = ut1.iter().map(|&v| problem.source(v)).collect();
    let ut2 = sweep(&h1);
    let h2: Vec<f64> = ut2.iter().map(|&v| problem.source(v)).collect();

    let diff = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let d0 = diff(&h1, &h0);
    let d1 = diff(&h2, &h1);
    let scale = crate::numerics::max_abs(&h2).max(1e-300);
    let ratio = if d0 <= 1e-14 * scale { 0.0 } else { d1 / d0 };
    let t = n as f64 * problem.dx();
    if ratio > 0.5 {
        return Err(Error::NumericalFailure {
            t,
            reason: format!(
                "Picard sweeps contract by {ratio:.3} (> 0.5); refine the grid (dt = dx)"
            ),
        });
    }

    let mut u = u;
    let mut ut = ut2;
    if problem.extension == Extension::Periodic {
        u[nx - 1] = u[0];
        ut[nx - 1] = ut[0];
    }
    if u.iter().chain(&ut).any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure {
            t,
            reason: "non-finite Duhamel values".into(),
        });
    }
    let mut h_new: Vec<f64> = ut.iter().map(|&v| problem.source(v)).collect();
    if problem.extension == Extension::Periodic {
        h_new[nx - 1] = h_new[0];
    }
    state.source_history.push(h_new);
    state.step = n;
    state.t = t;
    state.u = u;
    state.ut = ut;
    state.picard_ratio = ratio;
    Ok(state)
}

/// Run to `t_end` (rounded down to a whole number of steps) or until
/// `max|u_t|` exceeds `stop_above`, returning every level.
pub fn duhamel_run(
    problem: &DuhamelProblem,
    t_end: f64,
    stop_above: f64,
) -> Result<Vec<DuhamelSnapshot>> {
    let steps = (t_end / problem.dx() + 1e-9).floor() as usize;
    if steps > MAX_DUHAMEL_STEPS {
        return Err(Error::InvalidGrid(format!(
            "{steps} Duhamel steps exceed the cap of {MAX_DUHAMEL_STEPS}"
        )));
    }
    let mut state = problem.initial_state()?;
    let mut out = vec![snapshot(&state)];
    for _ in 0..steps {
        state = duhamel_advance(problem, state)?;
        out.push(snapshot(&state));
        if crate::numerics::max_abs(&state.ut) > stop_above {
            break;
        }
    }
    Ok(out)
}

fn snapshot(state: &DuhamelState) -> DuhamelSnapshot {
    DuhamelSnapshot {
        t: state.t,
        u: state.u.clone(),
        ut: state.ut.clone(),
    }
}

/// Maximum discrepancy between a finite-difference history and a Duhamel
/// trajectory over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub max_abs_u: f64,
    pub max_abs_ut: f64,
    /// `max_abs_u / max|u|` over the compared Duhamel levels.
    pub rel_u: f64,
    pub rel_ut: f64,
    pub worst_time: f64,
    pub compared_levels: usize,
}

/// Compare on the Duhamel levels inside `window`, interpolating the
/// finite-difference history linearly in time and onto the Duhamel nodes
/// linearly in space.
pub fn cross_validate(
    fd: &WaveHistory,
    duhamel_grid: &SpatialGrid,
    duhamel: &[DuhamelSnapshot],
    window: (f64, f64),
) -> Result<Discrepancy> {
    let g = &fd.grid;
    if g.dim != 1 || duhamel_grid.dim != 1 {
        return Err(Error::IncompatibleGrids("both grids must be 1-D".into()));
    }
    let lo = g.start().max(duhamel_grid.start());
    let hi = (g.start() + g.radius * 2.0).min(duhamel_grid.start() + duhamel_grid.radius * 2.0);
    if hi <= lo {
        return Err(Error::IncompatibleGrids("grids do not overlap".into()));
    }
    let mut out = Discrepancy {
        max_abs_u: 0.0,
        max_abs_ut: 0.0,
        rel_u: 0.0,
        rel_ut: 0.0,
        worst_time: window.0,
        compared_levels: 0,
    };
    let mut scale_u = 0.0_f64;
    let mut scale_ut = 0.0_f64;
    let tol = 1e-12 * (1.0 + window.1.abs());
    for snap in duhamel
        .iter()
        .filter(|s| s.t >= window.0 - tol && s.t <= window.1 + tol)
    {
        let Some(state) = fd.state_at(snap.t.min(fd.span().1)) else {
            continue;
        };
        if snap.t > fd.span().1 + tol {
            continue;
        }
        out.compared_levels += 1;
        for (j, &x) in duhamel_grid.coords.iter().enumerate() {
            if x < lo - 1e-12 || x > hi + 1e-12 {
                continue;
            }
            let (fu, fut) = interp_linear(g, &state.u, &state.ut, x);
            let du = (fu - snap.u[j]).abs();
            let dut = (fut - snap.ut[j]).abs();
            scale_u = scale_u.max(snap.u[j].abs());
            scale_ut = scale_ut.max(snap.ut[j].abs());
            if du > out.max_abs_u || dut > out.max_abs_ut {
                out.worst_time = snap.t;
            }
            out.max_abs_u = out.max_abs_u.max(du);
            out.max_abs_ut = out.max_abs_ut.max(dut);
        }
    }
    if out.compared_levels == 0 {
        return Err(Error::IncompatibleGrids(
            "no Duhamel level falls inside the window and the history span".into(),
        ));
    }
    out.rel_u = if scale_u > 0.0 { out.max_abs_u / scale_u } else { out.max_abs_u };
    out.rel_ut = if scale_ut > 0.0 { out.max_abs_ut / scale_ut } else { out.max_abs_ut };
    Ok(out)
}

fn interp_linear(g: &SpatialGrid, u: &[f64], ut: &[f64], x: f64) -> (f64, f64) {
    let pos = ((x - g.start()) / g.dx).clamp(0.0, (g.nx - 1) as f64);
    let i = (pos.floor() as usize).min(g.nx - 2);
    let w = pos - i as f64;
    if w.abs() < 1e-9 {
        return (u[i], ut[i]);
    }
    if (1.0 - w).abs() < 1e-9 {
        return (u[i + 1], ut[i + 1]);
    }
    (
        u[i] * (1.0 - w) + u[i + 1] * w,
        ut[i] * (1.0 - w) + ut[i + 1] * w,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_problem(u0: InitialProfile, u1: InitialProfile) -> DuhamelProblem {
        let grid = SpatialGrid::new(1, 1.0, 41).unwrap();
        DuhamelProblem::new(grid, 2.0, false, Extension::Zero, u0, u1).unwrap()
    }

    #[test]
    fn static_linear_profile_is_exact() {
        let prob = linear_problem(
            InitialProfile::Linear {
                slope: 1.0,
                intercept: 0.0,
            },
            InitialProfile::zero(),
        );
        let traj = duhamel_run(&prob, 0.5, f64::INFINITY).unwrap();
        for s in &traj {
            for (x, u) in prob.grid.coords.iter().zip(&s.u) {
                assert!((u - x).abs() < 1e-12);
            }
            assert!(s.ut.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn unit_velocity_gives_u_equal_t() {
        let prob = linear_problem(InitialProfile::zero(), InitialProfile::Constant { value: 1.0 });
        let traj = duhamel_run(&prob, 0.5, f64::INFINITY).unwrap();
        assert_eq!(traj.len(), 11);
        for s in &traj {
            assert!(s.u.iter().all(|u| (u - s.t).abs() < 1e-12));
            assert!(s.ut.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn hat_function_follows_dalembert() {
        // Piecewise-linear data is exact on characteristic-aligned grids.
        let hat = |x: f64| (1.0 - (x / 0.3).abs()).max(0.0);
        let grid = SpatialGrid::new(1, 2.0, 201).unwrap();
        let values: Vec<f64> = grid.coords.iter().map(|&x| hat(x)).collect();
        let u0 = InitialProfile::Sampled {
            x0: grid.start(),
            dx: grid.dx,
            values,
        };
        let prob = DuhamelProblem::new(grid.clone(), 2.0, false, Extension::Zero, u0, InitialProfile::zero())
            .unwrap();
        let traj = duhamel_run(&prob, 1.0, f64::INFINITY).unwrap();
        for s in &traj {
            for (x, u) in grid.coords.iter().zip(&s.u) {
                let exact = 0.5 * (hat(x + s.t) + hat(x - s.t));
                assert!((u - exact).abs() < 1e-12, "t={} x={x}", s.t);
            }
        }
    }

    #[test]
    fn constant_velocity_matches_separable_ode() {
        // u_t(t) = c / (1 - c t) for p = 2; agreement within 2% up to u_t = 100.
        let c = 1.0;
        let grid = SpatialGrid::new(1, 4e-3, 9).unwrap(); // dx = 1e-3
        let prob = DuhamelProblem::new(
            grid,
            2.0,
            true,
            Extension::Periodic,
            InitialProfile::zero(),
            InitialProfile::Constant { value: c },
        )
        .unwrap();
        let traj = duhamel_run(&prob, 1.0, 100.0).unwrap();
        let mut checked = 0;
        for s in &traj {
            let exact = c / (1.0 - c * s.t);
            if exact > 100.0 {
                break;
            }
            for v in &s.ut {
                assert!((v - exact).abs() / exact < 0.02, "t = {}: {v} vs {exact}", s.t);
            }
            checked += 1;
        }
        assert!(checked > 900);
        let last = traj.iter().rev().find(|s| c / (1.0 - c * s.t) <= 100.0).unwrap();
        assert!(c / (1.0 - c * last.t) > 90.0);
    }

    #[test]
    fn picard_sweeps_contract() {
        let grid = SpatialGrid::new(1, 2.0, 201).unwrap();
        let prob = DuhamelProblem::new(
            grid,
            2.0,
            true,
            Extension::Zero,
            InitialProfile::zero(),
            InitialProfile::Gaussian {
                amplitude: 2.0,
                width: 0.4,
                center: 0.0,
            },
        )
        .unwrap();
        let mut state = prob.initial_state().unwrap();
        for _ in 0..30 {
            state = duhamel_advance(&prob, state).unwrap();
            assert!(state.picard_ratio <= 0.5);
        }
        assert_eq!(state.source_history.len(), 31);
    }

    #[test]
    fn radial_grid_is_rejected() {
        let grid = SpatialGrid::new(2, 1.0, 11).unwrap();
        assert!(DuhamelProblem::new(
            grid,
            2.0,
            true,
            Extension::Zero,
            InitialProfile::zero(),
            InitialProfile::zero()
        )
        .is_err());
    }
}
