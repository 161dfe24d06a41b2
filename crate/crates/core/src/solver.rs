//! Explicit finite-difference solver for `u_tt - Δu = u_t|u_t|^(p-1)` on a
//! 1-D interval or a radially symmetric ball.
//!
//! The equation is integrated as the first-order system
//! `u' = v`, `v' = Δu + v|v|^(p-1)` with the two-stage explicit midpoint
//! method. Near blow-up the step shrinks like `1 / max|v|^(p-1)` so each
//! step grows the solution by a bounded factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Boundary, SimParams};
use crate::numerics::{max_abs, signed_pow, unit_sphere_area, CompensatedSum};
use crate::profile::InitialProfile;

/// Uniform grid on `[-R, R]` (N = 1) or on the radius `[0, R]` (N >= 2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub dim: usize,
    pub radius: f64,
    pub nx: usize,
    pub dx: f64,
    pub coords: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(dim: usize, radius: f64, nx: usize) -> Result<Self> {
        if dim == 0 || nx < 2 || !(radius > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "dim = {dim}, nx = {nx}, radius = {radius}"
            )));
        }
        let (start, dx) = if dim == 1 {
            (-radius, 2.0 * radius / (nx - 1) as f64)
        } else {
            (0.0, radius / (nx - 1) as f64)
        };
        let coords = (0..nx).map(|i| start + i as f64 * dx).collect();
        Ok(Self {
            dim,
            radius,
            nx,
            dx,
            coords,
        })
    }

    pub fn from_params(params: &SimParams) -> Result<Self> {
        Self::new(params.dim, params.domain_radius, params.nx)
    }

    pub fn is_radial(&self) -> bool {
        self.dim >= 2
    }

    pub fn start(&self) -> f64 {
        self.coords[0]
    }

    /// Trapezoid weights for `∫ f dx` over the domain, including the radial
    /// Jacobian `r^(N-1) |S^(N-1)|`.
    pub fn volume_weights(&self) -> Vec<f64> {
        let mut w = vec![self.dx; self.nx];
        w[0] *= 0.5;
        w[self.nx - 1] *= 0.5;
        if self.is_radial() {
            let area = unit_sphere_area(self.dim);
            for (wi, &r) in w.iter_mut().zip(&self.coords) {
                *wi *= area * r.powi(self.dim as i32 - 1);
            }
        }
        w
    }
}

/// Fields `u` and `u_t` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveState {
    pub t: f64,
    pub u: Vec<f64>,
    pub ut: Vec<f64>,
}

impl WaveState {
    pub fn max_abs_ut(&self) -> f64 {
        max_abs(&self.ut)
    }

    fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.ut).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HaltReason {
    ReachedTEnd,
    BlowupDetected,
    NumericalFailure,
}

impl HaltReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            HaltReason::ReachedTEnd => "ReachedTEnd",
            HaltReason::BlowupDetected => "BlowupDetected",
            HaltReason::NumericalFailure => "NumericalFailure",
        }
    }
}

/// Per-step scalar summary of a state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub max_u: f64,
    pub max_ut: f64,
    pub l2_u: f64,
    pub l2_ut: f64,
}

/// Stored trajectory of a run.
///
/// `series` has one row per time step (plus the initial state); `states`
/// holds full fields every `snapshot_stride` steps together with the first
/// and the final state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveHistory {
    pub grid: SpatialGrid,
    pub states: Vec<WaveState>,
    pub dt_sequence: Vec<f64>,
    pub series: Vec<SeriesRow>,
    pub halt_reason: HaltReason,
    pub blowup_threshold: f64,
    pub failure: Option<String>,
}

impl WaveHistory {
    pub fn last_state(&self) -> &WaveState {
        self.states.last().expect("history always holds the initial state")
    }

    pub fn span(&self) -> (f64, f64) {
        (self.states[0].t, self.last_state().t)
    }

    /// Linear-in-time interpolation of the stored fields; `None` outside the span.
    pub fn state_at(&self, t: f64) -> Option<WaveState> {
        let (lo, hi) = self.bracket(t)?;
        let (a, b) = (&self.states[lo], &self.states[hi]);
        if lo == hi {
            return Some(a.clone());
        }
        let w = (t - a.t) / (b.t - a.t);
        let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
            x.iter().zip(y).map(|(p, q)| p + w * (q - p)).collect()
        };
        Some(WaveState {
            t,
            u: mix(&a.u, &b.u),
            ut: mix(&a.ut, &b.ut),
        })
    }

    /// Indices of the stored states bracketing `t`.
    pub fn bracket(&self, t: f64) -> Option<(usize, usize)> {
        let (t0, t1) = self.span();
        if !(t >= t0 && t <= t1) {
            return None;
        }
        let hi = self.states.partition_point(|s| s.t < t);
        if hi == 0 {
            return Some((0, 0));
        }
        if self.states[hi].t == t {
            return Some((hi, hi));
        }
        Some((hi - 1, hi))
    }
}

/// Sample the initial profiles on the grid.
pub fn init_state(
    grid: &SpatialGrid,
    u0: &InitialProfile,
    u1: &InitialProfile,
) -> Result<WaveState> {
    Ok(WaveState {
        t: 0.0,
        u: u0.sample(&grid.coords)?,
        ut: u1.sample(&grid.coords)?,
    })
}

/// Second-order discrete Laplacian written into `out`.
///
/// Radial grids use `f'' + (N-1)/r f'` with the symmetric limit
/// `2N (f_1 - f_0) / dx^2` at the origin. Dirichlet nodes get zero.
pub fn laplacian_into(grid: &SpatialGrid, boundary: Boundary, f: &[f64], out: &mut [f64]) {
    let n = grid.nx;
    let h2 = grid.dx * grid.dx;
    debug_assert_eq!(f.len(), n);
    if grid.is_radial() {
        let dm1 = (grid.dim - 1) as f64;
        out[0] = 2.0 * grid.dim as f64 * (f[1] - f[0]) / h2;
        for i in 1..n - 1 {
            let r = grid.coords[i];
            out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2
                + dm1 / r * (f[i + 1] - f[i - 1]) / (2.0 * grid.dx);
        }
        out[n - 1] = match boundary {
            Boundary::Dirichlet => 0.0,
            // Mirror ghost f_n = f_{n-2}; the first-derivative term vanishes.
            _ => 2.0 * (f[n - 2] - f[n - 1]) / h2,
        };
        return;
    }
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    match boundary {
        Boundary::Neumann => {
            out[0] = 2.0 * (f[1] - f[0]) / h2;
            out[n - 1] = 2.0 * (f[n - 2] - f[n - 1]) / h2;
        }
        Boundary::Dirichlet => {
            out[0] = 0.0;
            out[n - 1] = 0.0;
        }
        Boundary::Periodic => {
            // Unique points are 0..n-1; the last node duplicates the first.
            let m = n - 1;
            out[0] = (f[1] - 2.0 * f[0] + f[m - 1]) / h2;
            out[n - 1] = out[0];
        }
    }
}

pub fn laplacian(grid: &SpatialGrid, boundary: Boundary, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    laplacian_into(grid, boundary, f, &mut out);
    out
}

/// Midpoint stepper with reusable scratch buffers.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: SpatialGrid,
    p: f64,
    nonlinear: bool,
    boundary: Boundary,
    lap: Vec<f64>,
    u_half: Vec<f64>,
    ut_half: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: &SpatialGrid, params: &SimParams) -> Self {
        let n = grid.nx;
        Self {
            grid: grid.clone(),
            p: params.p,
            nonlinear: params.nonlinear,
            boundary: params.boundary,
            lap: vec![0.0; n],
            u_half: vec![0.0; n],
            ut_half: vec![0.0; n],
        }
    }

    #[inline]
    fn forcing(&self, v: f64) -> f64 {
        if self.nonlinear {
            signed_pow(v, self.p)
        } else {
            0.0
        }
    }

    fn frozen(&self, i: usize) -> bool {
        self.boundary == Boundary::Dirichlet
            && (i == self.grid.nx - 1 || (i == 0 && !self.grid.is_radial()))
    }

    /// Advance `state` in place by `dt`.
    pub fn advance(&mut self, state: &mut WaveState, dt: f64) -> Result<()> {
        let n = self.grid.nx;
        laplacian_into(&self.grid, self.boundary, &state.u, &mut self.lap);
        for i in 0..n {
            if self.frozen(i) {
                self.u_half[i] = state.u[i];
                self.ut_half[i] = state.ut[i];
                continue;
            }
            let v = state.ut[i];
            self.u_half[i] = state.u[i] + 0.5 * dt * v;
            self.ut_half[i] = v + 0.5 * dt * (self.lap[i] + self.forcing(v));
        }
        laplacian_into(&self.grid, self.boundary, &self.u_half, &mut self.lap);
        for i in 0..n {
            if self.frozen(i) {
                continue;
            }
            let v = self.ut_half[i];
            state.u[i] += dt * v;
            state.ut[i] += dt * (self.lap[i] + self.forcing(v));
        }
        if self.boundary == Boundary::Periodic && !self.grid.is_radial() {
            state.u[n - 1] = state.u[0];
            state.ut[n - 1] = state.ut[0];
        }
        state.t += dt;
        if !state.is_finite() {
            return Err(Error::NumericalFailure {
                t: state.t,
                reason: "non-finite field values".into(),
            });
        }
        Ok(())
    }
}

/// One midpoint step of size `dt`; requires `dt <= cfl * dx`.
pub fn step(state: &WaveState, grid: &SpatialGrid, params: &SimParams, dt: f64) -> Result<WaveState> {
    if !(dt > 0.0) || dt > params.cfl * grid.dx * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "dt = {dt} violates 0 < dt <= cfl * dx = {}",
            params.cfl * grid.dx
        )));
    }
    let mut next = state.clone();
    Stepper::new(grid, params).advance(&mut next, dt)?;
    Ok(next)
}

pub fn series_row(grid: &SpatialGrid, weights: &[f64], state: &WaveState) -> SeriesRow {
    let l2 = |f: &[f64]| {
        f.iter()
            .zip(weights)
            .map(|(v, w)| v * v * w)
            .sum::<f64>()
            .sqrt()
    };
    debug_assert_eq!(weights.len(), grid.nx);
    SeriesRow {
        t: state.t,
        max_u: max_abs(&state.u),
        max_ut: max_abs(&state.ut),
        l2_u: l2(&state.u),
        l2_ut: l2(&state.ut),
    }
}

/// `∫ (u_t^2 + |∇u|^2)`, conserved by the linear wave equation.
pub fn linear_energy(grid: &SpatialGrid, state: &WaveState) -> f64 {
    let w = grid.volume_weights();
    let grad = crate::numerics::gradient_uniform(&state.u, grid.dx);
    state
        .ut
        .iter()
        .zip(&grad)
        .zip(&w)
        .map(|((v, g), wi)| (v * v + g * g) * wi)
        .sum()
}

/// Warning text when the light cone of the data can reach a Neumann or
/// Dirichlet boundary before `t_end`.
pub fn light_cone_warning(
    params: &SimParams,
    u0: &InitialProfile,
    u1: &InitialProfile,
) -> Option<String> {
    if params.boundary == Boundary::Periodic {
        return None;
    }
    let support = match (u0.support_radius(), u1.support_radius()) {
        (Some(a), Some(b)) => a.max(b),
        _ => {
            return Some(
                "initial data are not compactly supported; boundary closure affects the solution"
                    .into(),
            )
        }
    };
    if params.domain_radius < support + params.t_end {
        Some(format!(
            "domain radius {} is smaller than support {} + t_end {}; the boundary is inside the light cone",
            params.domain_radius, support, params.t_end
        ))
    } else {
        None
    }
}

/// Integrate from `state0` until blow-up, `t_end`, or failure.
///
/// The step is `dt_base * min(1, 0.1 / max|u_t|^(p-1))`, clipped so the run
/// lands on `t_end`. Blow-up is declared once `max|u_t|` exceeds the
/// threshold.
pub fn run(state0: WaveState, grid: &SpatialGrid, params: &SimParams, dt_base: f64) -> WaveHistory {
    let weights = grid.volume_weights();
    let stride = params.snapshot_stride.max(1);
    let mut stepper = Stepper::new(grid, params);
    let mut state = state0;
    let mut clock = CompensatedSum::new(state.t);
    let mut series = vec![series_row(grid, &weights, &state)];
    let mut states = vec![state.clone()];
    let mut dt_sequence = Vec::new();
    let mut failure = None;
    let mut steps = 0usize;

    let halt = loop {
        let max_ut = series.last().expect("non-empty").max_ut;
        if max_ut > params.blowup_threshold {
            break HaltReason::BlowupDetected;
        }
        let t = clock.value();
        if t >= params.t_end {
            break HaltReason::ReachedTEnd;
        }
        let mut dt = dt_base;
        if params.nonlinear && max_ut > 0.0 {
            dt *= (0.1 / max_ut.powf(params.p - 1.0)).min(1.0);
        }
        let last_step = t + dt >= params.t_end;
        if last_step {
            dt = params.t_end - t;
        }
        if let Err(e) = stepper.advance(&mut state, dt) {
            failure = Some(e.to_string());
            break HaltReason::NumericalFailure;
        }
        clock.add(dt);
        state.t = if last_step { params.t_end } else { clock.value() };
        steps += 1;
        dt_sequence.push(dt);
        series.push(series_row(grid, &weights, &state));
        if steps.is_multiple_of(stride) {
            states.push(state.clone());
        }
    };
    if states.last().map(|s| s.t) != Some(state.t) && failure.is_none() {
        states.push(state);
    }
    WaveHistory {
        grid: grid.clone(),
        states,
        dt_sequence,
        series,
        halt_reason: halt,
        blowup_threshold: params.blowup_threshold,
        failure,
    }
}
