//! Self-similar variables
//!
//! ```text
//! y = (x - a) / √(T' - t),   s = -log(T' - t),   v(t, x) = (T' - t)^(-β) w(s, y)
//! ```
//!
//! applied to `v = u_t` of a stored trajectory. Radial runs only admit the
//! center `a = 0`.

use serde::{Deserialize, Serialize};

use crate::ball::BallGrid;
use crate::error::{Error, Result};
use crate::model::DerivedConstants;
use crate::numerics::{cubic_uniform, cumulative_trapezoid, gradient_uniform};
use crate::profile::InitialProfile;
use crate::solver::{SpatialGrid, WaveHistory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimFrame {
    pub a: f64,
    pub t_prime: f64,
    pub s0: f64,
    pub beta: f64,
}

impl SelfSimFrame {
    pub fn new(a: f64, t_prime: f64, consts: &DerivedConstants) -> Result<Self> {
        if !(t_prime > 0.0 && t_prime.is_finite()) {
            return Err(Error::FrameOutOfRange(format!(
                "T' = {t_prime} must be positive"
            )));
        }
        Ok(Self {
            a,
            t_prime,
            s0: -t_prime.ln(),
            beta: consts.beta,
        })
    }

    pub fn s_of_t(&self, t: f64) -> f64 {
        -(self.t_prime - t).ln()
    }

    pub fn t_of_s(&self, s: f64) -> f64 {
        self.t_prime - (-s).exp()
    }

    /// Physical radius of the unit ball at similarity time `s`.
    pub fn ball_radius(&self, s: f64) -> f64 {
        (-0.5 * s).exp()
    }

    /// `n` uniformly spaced similarity times from `s0` to `s_end`.
    pub fn uniform_s_grid(&self, s_end: f64, n: usize) -> Vec<f64> {
        assert!(n >= 2);
        let ds = (s_end - self.s0) / (n - 1) as f64;
        (0..n).map(|k| self.s0 + k as f64 * ds).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WSnapshot {
    pub s: f64,
    pub w: Vec<f64>,
    /// Derivative along the ball coordinate (`∂_y` in 1-D, `∂_r` radially).
    pub grad_w: Vec<f64>,
}

/// The resampled trajectory. `w00` is shared by every snapshot, so it is
/// kept once here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WTrajectory {
    pub frame: SelfSimFrame,
    pub ball: BallGrid,
    pub w00: Vec<f64>,
    pub grad_w00: Vec<f64>,
    pub snaps: Vec<WSnapshot>,
}

fn check_ball_inside(grid: &SpatialGrid, frame: &SelfSimFrame, radius: f64) -> Result<()> {
    let tol = 1e-12 * grid.radius;
    if grid.is_radial() {
        if frame.a != 0.0 {
            return Err(Error::FrameOutOfRange(format!(
                "radial runs need the frame center at 0, got a = {}",
                frame.a
            )));
        }
        if radius > grid.radius + tol {
            return Err(Error::FrameOutOfRange(format!(
                "ball radius {radius} exceeds the domain radius {}",
                grid.radius
            )));
        }
    } else if frame.a - radius < -grid.radius - tol || frame.a + radius > grid.radius + tol {
        return Err(Error::FrameOutOfRange(format!(
            "ball [{}, {}] leaves the domain [-{}, {}]",
            frame.a - radius,
            frame.a + radius,
            grid.radius,
            grid.radius
        )));
    }
    Ok(())
}

/// Cubic interpolation of a grid field at physical position `x`. Radial
/// grids are continued evenly through the origin.
pub fn interpolate_field(grid: &SpatialGrid, f: &[f64], x: f64, odd: bool) -> f64 {
    let n = grid.nx as isize;
    if grid.is_radial() {
        let sign = if odd { -1.0 } else { 1.0 };
        let r = x.abs();
        let v = cubic_uniform(r, 0.0, grid.dx, -3, n - 1, |i| {
            if i < 0 {
                sign * f[(-i) as usize]
            } else {
                f[i as usize]
            }
        });
        if odd && x < 0.0 {
            -v
        } else {
            v
        }
    } else {
        cubic_uniform(x, grid.start(), grid.dx, 0, n - 1, |i| f[i as usize])
    }
}

/// Centered-difference derivative on the physical grid; radial fields are
/// even, so the derivative vanishes at the origin.
fn physical_gradient(grid: &SpatialGrid, f: &[f64]) -> Vec<f64> {
    let mut g = gradient_uniform(f, grid.dx);
    if grid.is_radial() {
        g[0] = 0.0;
    }
    g
}

fn sample_on_ball(
    grid: &SpatialGrid,
    ball: &BallGrid,
    frame: &SelfSimFrame,
    radius: f64,
    f: &[f64],
    df: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let xs = ball.nodes.iter().map(|&y| frame.a + y * radius);
    let mut v = Vec::with_capacity(ball.len());
    let mut dv = Vec::with_capacity(ball.len());
    for x in xs {
        v.push(interpolate_field(grid, f, x, false));
        dv.push(interpolate_field(grid, df, x, true));
    }
    (v, dv)
}

/// Resample `u_t` of `hist` at the similarity times `s_grid`: linear in
/// time between stored states, cubic in space. Gradients come from
/// centered differences of the physical field and the chain rule
/// `∇_y w = (T' - t)^(β + 1/2) ∇_x v`.
pub fn to_selfsimilar(
    hist: &WaveHistory,
    frame: &SelfSimFrame,
    s_grid: &[f64],
    ball: &BallGrid,
) -> Result<WTrajectory> {
    let grid = &hist.grid;
    if ball.dim != grid.dim {
        return Err(Error::IncompatibleGrids(format!(
            "ball dimension {} differs from the run dimension {}",
            ball.dim, grid.dim
        )));
    }
    let (t_lo, t_hi) = hist.span();
    let beta = frame.beta;

    let state0 = &hist.states[0];
    if state0.t != 0.0 {
        return Err(Error::FrameOutOfRange(
            "history must start at t = 0 for w00".into(),
        ));
    }
    let r0 = frame.t_prime.sqrt();
    check_ball_inside(grid, frame, r0)?;
    let du0 = physical_gradient(grid, &state0.u);
    let (w00, g00) = sample_on_ball(grid, ball, frame, r0, &state0.u, &du0);
    let w00: Vec<f64> = w00.iter().map(|v| v * frame.t_prime.powf(beta)).collect();
    let grad_w00: Vec<f64> = g00
        .iter()
        .map(|v| v * frame.t_prime.powf(beta + 0.5))
        .collect();

    let mut grad_cache: Vec<Option<Vec<f64>>> = vec![None; hist.states.len()];
    let mut snaps = Vec::with_capacity(s_grid.len());
    for &s in s_grid {
        let t = frame.t_of_s(s);
        let tol = 1e-12 * (1.0 + t_hi.abs());
        if !(t >= t_lo - tol && t <= t_hi + tol) || s < frame.s0 - 1e-12 {
            return Err(Error::FrameOutOfRange(format!(
                "s = {s} maps to t = {t}, outside the stored span [{t_lo}, {t_hi}]"
            )));
        }
        let radius = frame.ball_radius(s);
        check_ball_inside(grid, frame, radius)?;
        let (i, j) = hist
            .bracket(t.clamp(t_lo, t_hi))
            .ok_or_else(|| Error::FrameOutOfRange(format!("no states bracket t = {t}")))?;
        let mut sample = |k: usize| {
            let st = &hist.states[k];
            let g = grad_cache[k].get_or_insert_with(|| physical_gradient(grid, &st.ut));
            sample_on_ball(grid, ball, frame, radius, &st.ut, g)
        };
        let (vi, gi) = sample(i);
        let (v, g) = if i == j {
            (vi, gi)
        } else {
            let (vj, gj) = sample(j);
            let (ti, tj) = (hist.states[i].t, hist.states[j].t);
            let lam = ((t - ti) / (tj - ti)).clamp(0.0, 1.0);
            let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
                a.iter().zip(b).map(|(x, y)| x * (1.0 - lam) + y * lam).collect()
            };
            (mix(&vi, &vj), mix(&gi, &gj))
        };
        let tau = (-s).exp();
        let sw = tau.powf(beta);
        let sg = tau.powf(beta + 0.5);
        snaps.push(WSnapshot {
            s,
            w: v.iter().map(|x| x * sw).collect(),
            grad_w: g.iter().map(|x| x * sg).collect(),
        });
    }
    Ok(WTrajectory {
        frame: *frame,
        ball: ball.clone(),
        w00,
        grad_w00,
        snaps,
    })
}

/// The one-snapshot trajectory at `s0` straight from the initial profiles,
/// without a run: `w0 = T'^β u1(a + y√T')`, `w00 = T'^β u0(a + y√T')` and the
/// gradients with `T'^(β+½)`. Radial balls evaluate the profiles at the
/// radius and differentiate in `r`.
pub fn initial_trajectory(
    u0: &InitialProfile,
    u1: &InitialProfile,
    frame: &SelfSimFrame,
    ball: &BallGrid,
) -> Result<WTrajectory> {
    if ball.dim >= 2 && frame.a != 0.0 {
        return Err(Error::FrameOutOfRange(format!(
            "radial data need the frame center at 0, got a = {}",
            frame.a
        )));
    }
    let r0 = frame.t_prime.sqrt();
    let sw = frame.t_prime.powf(frame.beta);
    let sg = frame.t_prime.powf(frame.beta + 0.5);
    let xs: Vec<f64> = ball.nodes.iter().map(|&y| frame.a + y * r0).collect();
    let on_ball = |f: &dyn Fn(f64) -> f64, scale: f64| -> Vec<f64> {
        xs.iter().map(|&x| scale * f(x)).collect()
    };
    let w = on_ball(&|x| u1.eval(x), sw);
    let grad_w = on_ball(&|x| u1.derivative(x), sg);
    let w00 = on_ball(&|x| u0.eval(x), sw);
    let grad_w00 = on_ball(&|x| u0.derivative(x), sg);
    if let Some(v) = [&w, &grad_w, &w00, &grad_w00]
        .into_iter()
        .flatten()
        .find(|v| !v.is_finite())
    {
        return Err(Error::Profile(format!("non-finite value {v} on the initial ball")));
    }
    Ok(WTrajectory {
        frame: *frame,
        ball: ball.clone(),
        w00,
        grad_w00,
        snaps: vec![WSnapshot {
            s: frame.s0,
            w,
            grad_w,
        }],
    })
}

/// Values of `v` at the physical grid points inside the ball at time
/// `t(s)`, as `(index, value)` pairs.
pub fn from_selfsimilar(
    snap: &WSnapshot,
    frame: &SelfSimFrame,
    ball: &BallGrid,
    grid: &SpatialGrid,
) -> Vec<(usize, f64)> {
    let radius = frame.ball_radius(snap.s);
    let scale = (-snap.s).exp().powf(-frame.beta);
    let n = ball.len() as isize;
    let start = ball.nodes[0];
    grid.coords
        .iter()
        .enumerate()
        .filter_map(|(k, &x)| {
            let y = (x - frame.a) / radius;
            if y.abs() > 1.0 + 1e-12 {
                return None;
            }
            let y = y.clamp(-1.0, 1.0);
            let w = if ball.dim == 1 {
                cubic_uniform(y, start, ball.dy, 0, n - 1, |i| snap.w[i as usize])
            } else {
                cubic_uniform(y.abs(), 0.0, ball.dy, -3, n - 1, |i| {
                    snap.w[i.unsigned_abs()]
                })
            };
            Some((k, w * scale))
        })
        .collect()
}

/// Cumulative `∫_{s0}^{s} w ds'` and its gradient at every snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct WIntegral {
    pub s: Vec<f64>,
    pub integral: Vec<Vec<f64>>,
    pub grad: Vec<Vec<f64>>,
}

pub fn w_time_integral(snaps: &[WSnapshot]) -> WIntegral {
    let s: Vec<f64> = snaps.iter().map(|w| w.s).collect();
    let m = snaps.first().map_or(0, |w| w.w.len());
    let mut integral = vec![vec![0.0; m]; snaps.len()];
    let mut grad = vec![vec![0.0; m]; snaps.len()];
    for i in 0..m {
        let col: Vec<f64> = snaps.iter().map(|w| w.w[i]).collect();
        let gcol: Vec<f64> = snaps.iter().map(|w| w.grad_w[i]).collect();
        for (k, v) in cumulative_trapezoid(&s, &col).into_iter().enumerate() {
            integral[k][i] = v;
        }
        for (k, v) in cumulative_trapezoid(&s, &gcol).into_iter().enumerate() {
            grad[k][i] = v;
        }
    }
    WIntegral { s, integral, grad }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{HaltReason, SeriesRow, WaveState};

    /// A synthetic history `u_t(t, x) = (T - t)^(-β) φ(x)` sampled densely.
    fn synthetic(grid: &SpatialGrid, t_blow: f64, beta: f64, phi: impl Fn(f64) -> f64, u0: impl Fn(f64) -> f64) -> WaveHistory {
        let times: Vec<f64> = (0..=4000).map(|k| 0.99 * t_blow * k as f64 / 4000.0).collect();
        let states: Vec<WaveState> = times
            .iter()
            .map(|&t| WaveState {
                t,
                u: grid.coords.iter().map(|&x| u0(x)).collect(),
                ut: grid.coords.iter().map(|&x| (t_blow - t).powf(-beta) * phi(x)).collect(),
            })
            .collect();
        WaveHistory {
            grid: grid.clone(),
            dt_sequence: times.windows(2).map(|w| w[1] - w[0]).collect(),
            series: times
                .iter()
                .map(|&t| SeriesRow {
                    t,
                    max_u: 0.0,
                    max_ut: 0.0,
                    l2_u: 0.0,
                    l2_ut: 0.0,
                })
                .collect(),
            states,
            halt_reason: HaltReason::ReachedTEnd,
            blowup_threshold: 1e8,
            failure: None,
        }
    }

    #[test]
    fn profile_data_agree_with_grid_sampling() {
        let c = DerivedConstants::new(2.0).unwrap();
        let grid = SpatialGrid::new(1, 3.0, 1201).unwrap();
        let u0 = InitialProfile::Gaussian {
            amplitude: 0.5,
            width: 0.8,
            center: 0.2,
        };
        let u1 = InitialProfile::Gaussian {
            amplitude: 2.0,
            width: 1.0,
            center: -0.1,
        };
        let state = crate::solver::init_state(&grid, &u0, &u1).unwrap();
        let mut hist = synthetic(&grid, 1.0, c.beta, |_| 0.0, |_| 0.0);
        hist.states = vec![state];
        let frame = SelfSimFrame::new(0.3, 0.6, &c).unwrap();
        let ball = BallGrid::new(1, 51).unwrap();
        let traj = to_selfsimilar(&hist, &frame, &[frame.s0], &ball).unwrap();
        let direct = initial_trajectory(&u0, &u1, &frame, &ball).unwrap();
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-4);
        assert!(close(&direct.snaps[0].w, &traj.snaps[0].w));
        assert!(close(&direct.snaps[0].grad_w, &traj.snaps[0].grad_w));
        assert!(close(&direct.w00, &traj.w00));
        assert!(close(&direct.grad_w00, &traj.grad_w00));
        assert_eq!(direct.snaps[0].s, frame.s0);
    }

    #[test]
    fn round_trip_of_time_and_s() {
        let c = DerivedConstants::new(2.0).unwrap();
        let f = SelfSimFrame::new(0.0, 0.7, &c).unwrap();
        for &t in &[0.0, 0.3, 0.69, 0.6999] {
            let back = f.t_of_s(f.s_of_t(t));
            assert!((back - t).abs() <= 1e-12 * t.abs().max(1e-300) + 1e-15);
        }
        assert!((f.s0 + 0.7f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exact_ode_profile_is_constant() {
        let c = DerivedConstants::new(2.0).unwrap();
        let grid = SpatialGrid::new(1, 2.0, 201).unwrap();
        let hist = synthetic(&grid, 1.0, c.beta, |_| c.kappa, |_| 0.0);
        let frame = SelfSimFrame::new(0.0, 1.0, &c).unwrap();
        let ball = BallGrid::new(1, 41).unwrap();
        let s = frame.uniform_s_grid(3.0, 30);
        let traj = to_selfsimilar(&hist, &frame, &s, &ball).unwrap();
        // Linear-in-time interpolation of (T - t)^(-1) errs by about
        // (Δt / (T - t))^2 / 4 relative.
        let dt = 0.99 / 4000.0;
        for snap in &traj.snaps {
            let bound = (dt * snap.s.exp()).powi(2) / 4.0 * 1.1 + 1e-12;
            for (w, g) in snap.w.iter().zip(&snap.grad_w) {
                assert!((w - c.kappa).abs() < bound, "s = {}: {w}", snap.s);
                assert!(g.abs() < 1e-9);
            }
        }
        assert!(traj.w00.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn separable_profile_converges_to_center_value() {
        // w(s, y) = φ(y e^(-s/2)) for v = (T - t)^(-β) φ(x).
        let c = DerivedConstants::new(2.0).unwrap();
        let grid = SpatialGrid::new(1, 2.0, 801).unwrap();
        let phi = |x: f64| 1.0 + 0.5 * (2.0 * x).sin();
        let hist = synthetic(&grid, 1.0, c.beta, phi, |_| 0.0);
        let frame = SelfSimFrame::new(0.0, 1.0, &c).unwrap();
        let ball = BallGrid::new(1, 21).unwrap();
        let traj = to_selfsimilar(&hist, &frame, &[0.5, 1.5, 3.0], &ball).unwrap();
        for snap in &traj.snaps {
            for (y, w) in ball.nodes.iter().zip(&snap.w) {
                let exact = phi(y * (-snap.s / 2.0).exp());
                assert!((w - exact).abs() < 2e-5, "s = {}, y = {y}: {w} vs {exact}", snap.s);
            }
        }
    }

    #[test]
    fn zero_history_maps_to_zero() {
        let c = DerivedConstants::new(2.0).unwrap();
        let grid = SpatialGrid::new(1, 2.0, 101).unwrap();
        let hist = synthetic(&grid, 1.0, c.beta, |_| 0.0, |_| 0.0);
        let frame = SelfSimFrame::new(0.0, 1.0, &c).unwrap();
        let ball = BallGrid::new(1, 11).unwrap();
        let traj = to_selfsimilar(&hist, &frame, &frame.uniform_s_grid(2.0, 5), &ball).unwrap();
        assert!(traj.snaps.iter().all(|s| s.w.iter().all(|&v| v == 0.0)));
        let back = from_selfsimilar(&traj.snaps[3], &frame, &ball, &grid);
        assert!(!back.is_empty() && back.iter().all(|&(_, v)| v == 0.0));
    }

    #[test]
    fn constant_w_inverts_to_the_ode_profile() {
        let c = DerivedConstants::new(1.5).unwrap();
        let frame = SelfSimFrame::new(0.0, 1.0, &c).unwrap();
        let ball = BallGrid::new(1, 11).unwrap();
        let grid = SpatialGrid::new(1, 2.0, 101).unwrap();
        let snap = WSnapshot {
            s: 1.0,
            w: vec![c.kappa; 11],
            grad_w: vec![0.0; 11],
        };
        let t = frame.t_of_s(1.0);
        let exact = c.kappa * (1.0 - t).powf(-c.beta);
        for (_, v) in from_selfsimilar(&snap, &frame, &ball, &grid) {
            assert!((v - exact).abs() < 1e-12 * exact);
        }
    }

    #[test]
    fn ball_outside_domain_is_rejected() {
        let c = DerivedConstants::new(2.0).unwrap();
        let grid = SpatialGrid::new(1, 0.5, 101).unwrap();
        let hist = synthetic(&grid, 1.0, c.beta, |_| 1.0, |_| 0.0);
        let frame = SelfSimFrame::new(0.0, 1.0, &c).unwrap();
        let ball = BallGrid::new(1, 11).unwrap();
        assert!(matches!(
            to_selfsimilar(&hist, &frame, &[0.0], &ball),
            Err(Error::FrameOutOfRange(_))
        ));
        // Late times fall outside the stored span.
        let grid = SpatialGrid::new(1, 2.0, 101).unwrap();
        let hist = synthetic(&grid, 1.0, c.beta, |_| 1.0, |_| 0.0);
        assert!(to_selfsimilar(&hist, &frame, &[10.0], &ball).is_err());
    }

    #[test]
    fn time_integral_oracles() {
        let s: Vec<f64> = (0..=200).map(|k| 0.5 + k as f64 * 0.01).collect();
        let psi = [0.3, -1.0, 2.0];
        let snaps: Vec<WSnapshot> = s
            .iter()
            .map(|&s| WSnapshot {
                s,
                w: psi.iter().map(|p| (-s).exp() * p).collect(),
                grad_w: vec![2.0; 3],
            })
            .collect();
        let wi = w_time_integral(&snaps);
        let last = wi.integral.last().unwrap();
        for (v, p) in last.iter().zip(&psi) {
            let exact = ((-0.5f64).exp() - (-2.5f64).exp()) * p;
            assert!((v - exact).abs() < 1e-5 * p.abs());
        }
        assert!(wi.grad.last().unwrap().iter().all(|v| (v - 4.0).abs() < 1e-12));
        assert!(wi.integral[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn time_integral_is_additive() {
        let snaps: Vec<WSnapshot> = (0..50)
            .map(|k| {
                let s = 0.1 * k as f64;
                WSnapshot {
                    s,
                    w: vec![s.sin(), s * s],
                    grad_w: vec![s.cos(), 1.0],
                }
            })
            .collect();
        let whole = w_time_integral(&snaps);
        let first = w_time_integral(&snaps[..20]);
        let second = w_time_integral(&snaps[19..]);
        for i in 0..2 {
            let sum = first.integral[19][i] + second.integral[30][i];
            assert!((sum - whole.integral[49][i]).abs() < 1e-12);
        }
    }
}
