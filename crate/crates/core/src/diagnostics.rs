//! Blow-up time and rate estimation, the `κ` lower bound, and the bound
//! monitors on stored trajectories.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ball::{BallGrid, BallQuadrature, WeightPower};
use crate::error::{Error, Result};
use crate::model::DerivedConstants;
use crate::numerics::{cumulative_trapezoid, gradient_uniform, max_abs};
use crate::selfsim::{interpolate_field, w_time_integral, WTrajectory};
use crate::solver::{HaltReason, WaveHistory};

/// Minimum number of samples in a fit window.
pub const MIN_FIT_SAMPLES: usize = 20;
/// Slack on the `κ` lower bound.
pub const DEFAULT_LOWER_BOUND_SLACK: f64 = 0.1;
/// The fit window spans `[threshold / FIT_WINDOW_FACTOR, threshold]`.
pub const FIT_WINDOW_FACTOR: f64 = 100.0;
/// Heuristic boundedness: last-quarter sup ≤ this × earlier sup.
pub const BOUNDED_RATIO: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub t_hat: f64,
    pub t_hat_uncertainty: f64,
    pub beta_hat: f64,
    pub kappa_hat: f64,
    pub fit_window: (f64, f64),
    /// RMS of the residual in `log max|u_t|`.
    pub fit_residual: f64,
    pub fit_samples: usize,
    pub verdicts: BTreeMap<String, Verdict>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct PowerFit {
    t_hat: f64,
    beta: f64,
    log_kappa: f64,
    rms: f64,
}

/// Least squares of `log v = log κ − β log(T − t)` at fixed `T`.
fn linear_fit(t: &[f64], logv: &[f64], t_hat: f64) -> PowerFit {
    let n = t.len() as f64;
    let xs: Vec<f64> = t.iter().map(|&ti| -(t_hat - ti).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = logv.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(logv) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let log_kappa = my - beta * mx;
    let ss: f64 = xs
        .iter()
        .zip(logv)
        .map(|(x, y)| {
            let r = y - (log_kappa + beta * x);
            r * r
        })
        .sum();
    PowerFit {
        t_hat,
        beta,
        log_kappa,
        rms: (ss / n).sqrt(),
    }
}

/// Variable projection: the linear parameters are eliminated and the
/// residual is minimized over `d = T − t_last` on a log grid, then refined
/// by golden-section search in `log d`.
fn power_law_fit(t: &[f64], v: &[f64]) -> PowerFit {
    let logv: Vec<f64> = v.iter().map(|x| x.ln()).collect();
    let t_last = *t.last().expect("non-empty");
    let span = (t_last - t[0]).max(f64::MIN_POSITIVE);
    let scale = t_last.abs().max(span);
    let lo = (scale * 1e-15).ln();
    let hi = (span * 100.0).ln();
    let cost = |ld: f64| linear_fit(t, &logv, t_last + ld.exp()).rms;
    let n_grid = 400;
    let mut best = (lo, f64::INFINITY);
    for k in 0..=n_grid {
        let ld = lo + (hi - lo) * k as f64 / n_grid as f64;
        let c = cost(ld);
        if c < best.1 {
            best = (ld, c);
        }
    }
    let step = (hi - lo) / n_grid as f64;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (cost(c), cost(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = cost(d);
        }
    }
    let ld = if fc < fd { c } else { d };
    let ld = if cost(ld) <= best.1 { ld } else { best.0 };
    linear_fit(t, &logv, t_last + ld.exp())
}

/// Fit `v ≈ κ̂ (T̂ − t)^(−β̂)` to samples with `v ∈ [threshold/100, threshold]`.
pub fn estimate_t_from_samples(t: &[f64], v: &[f64], threshold: f64) -> Result<BlowupReport> {
    let lo = threshold / FIT_WINDOW_FACTOR;
    let (wt, wv): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(v)
        .filter(|(_, &vi)| vi >= lo && vi <= threshold && vi.is_finite())
        .map(|(a, b)| (*a, *b))
        .unzip();
    if wt.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientGrowth {
            found: wt.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let fit = power_law_fit(&wt, &wv);

    // Refits on the lower and upper halves of the window (split in log v).
    let mid = (lo * threshold).sqrt();
    let mut spread: f64 = 0.0;
    for keep in [|x: f64, m: f64| x <= m, |x: f64, m: f64| x >= m] {
        let (ht, hv): (Vec<f64>, Vec<f64>) = wt
            .iter()
            .zip(&wv)
            .filter(|(_, &vi)| keep(vi, mid))
            .map(|(a, b)| (*a, *b))
            .unzip();
        if ht.len() >= 5 {
            spread = spread.max((power_law_fit(&ht, &hv).t_hat - fit.t_hat).abs());
        }
    }
    let floor = 1e-12 * fit.t_hat.abs().max(1.0);
    Ok(BlowupReport {
        t_hat: fit.t_hat,
        t_hat_uncertainty: spread.max(floor),
        beta_hat: fit.beta,
        kappa_hat: fit.log_kappa.exp(),
        fit_window: (wt[0], *wt.last().expect("non-empty")),
        fit_residual: fit.rms,
        fit_samples: wt.len(),
        verdicts: BTreeMap::new(),
    })
}

/// Blow-up time and rate from the per-step `max|u_t|` series.
pub fn estimate_t(hist: &WaveHistory) -> Result<BlowupReport> {
    if hist.halt_reason != HaltReason::BlowupDetected {
        return Err(Error::InsufficientGrowth {
            found: 0,
            needed: MIN_FIT_SAMPLES,
        });
    }
    let t: Vec<f64> = hist.series.iter().map(|r| r.t).collect();
    let v: Vec<f64> = hist.series.iter().map(|r| r.max_ut).collect();
    estimate_t_from_samples(&t, &v, hist.blowup_threshold)
}

/// `F(t) = ∫_0^t max|u_t|^p` by the trapezoid rule over the per-step series.
pub fn compute_f(hist: &WaveHistory, p: f64) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = hist.series.iter().map(|r| r.t).collect();
    let y: Vec<f64> = hist.series.iter().map(|r| r.max_ut.powf(p)).collect();
    let f = cumulative_trapezoid(&t, &y);
    (t, f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    /// `sup (T̂ − t)^β max|u_t|` over the fit window.
    pub sup_scaled_ut: f64,
    /// `inf (T̂ − t)^β F(t)` over the fit window.
    pub inf_scaled_f: f64,
    pub kappa: f64,
    pub slack: f64,
    pub ut_verdict: Verdict,
    pub f_verdict: Verdict,
}

/// The lower bounds on the blow-up rate: both quantities must reach `κ (1 − ε)`.
/// Samples inside the report's fit window are used; too few of them
/// (a trajectory that stops early) gives INCONCLUSIVE.
pub fn lower_bound_check(
    hist: &WaveHistory,
    report: &BlowupReport,
    consts: &DerivedConstants,
    slack: f64,
) -> LowerBoundReport {
    let (t, f) = compute_f(hist, consts.p);
    let (lo, hi) = report.fit_window;
    let mut sup_ut = f64::NEG_INFINITY;
    let mut inf_f = f64::INFINITY;
    let mut count = 0usize;
    for (k, row) in hist.series.iter().enumerate() {
        if row.t < lo || row.t > hi || row.t >= report.t_hat {
            continue;
        }
        count += 1;
        let scale = (report.t_hat - t[k]).powf(consts.beta);
        sup_ut = sup_ut.max(scale * row.max_ut);
        inf_f = inf_f.min(scale * f[k]);
    }
    let target = consts.kappa * (1.0 - slack);
    let (ut_verdict, f_verdict) = if count < MIN_FIT_SAMPLES {
        (Verdict::Inconclusive, Verdict::Inconclusive)
    } else {
        (Verdict::from_bool(sup_ut >= target), Verdict::from_bool(inf_f >= target))
    };
    LowerBoundReport {
        sup_scaled_ut: if count > 0 { sup_ut } else { f64::NAN },
        inf_scaled_f: if count > 0 { inf_f } else { f64::NAN },
        kappa: consts.kappa,
        slack,
        ut_verdict,
        f_verdict,
    }
}

/// A monitored series with its running sup and the heuristic verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub components: BTreeMap<String, Vec<f64>>,
    pub sup: f64,
    /// Last-quarter sup ≤ 1.05 × sup of the first three quarters.
    pub bounded: bool,
}

fn bounded_verdict(values: &[f64]) -> bool {
    let n = values.len();
    if n < 4 {
        return true;
    }
    let cut = (3 * n) / 4;
    let early = values[..cut].iter().cloned().fold(0.0_f64, f64::max);
    let late = values[cut..].iter().cloned().fold(0.0_f64, f64::max);
    late <= BOUNDED_RATIO * early || late == 0.0
}

fn finish(times: Vec<f64>, values: Vec<f64>, components: BTreeMap<String, Vec<f64>>) -> BoundSeries {
    let sup = values.iter().cloned().fold(0.0_f64, f64::max);
    let bounded = bounded_verdict(&values);
    BoundSeries {
        times,
        values,
        components,
        sup,
        bounded,
    }
}

/// `‖w(s)‖²_{L²(B)} + ‖∫_{s0}^s w‖²_{L²(B)} + ‖∇∫_{s0}^s w‖²_{L²(B)}` per snapshot.
pub fn thm1_monitor(traj: &WTrajectory, quad: &BallQuadrature) -> BoundSeries {
    let wi = w_time_integral(&traj.snaps);
    let sq = |f: &[f64]| quad.integrate_with(WeightPower::One, |i| f[i] * f[i]);
    let w_l2: Vec<f64> = traj.snaps.iter().map(|s| sq(&s.w)).collect();
    let int_l2: Vec<f64> = wi.integral.iter().map(|f| sq(f)).collect();
    let grad_l2: Vec<f64> = wi.grad.iter().map(|f| sq(f)).collect();
    let values = (0..w_l2.len())
        .map(|k| w_l2[k] + int_l2[k] + grad_l2[k])
        .collect();
    let mut comps = BTreeMap::new();
    comps.insert("w_l2".to_string(), w_l2);
    comps.insert("integral_l2".to_string(), int_l2);
    comps.insert("integral_grad_l2".to_string(), grad_l2);
    finish(wi.s, values, comps)
}

/// Number of ball nodes for the shrinking-ball norms.
pub const PROP1_BALL_NODES: usize = 201;

/// `(T̂ − t)^(2β − N/2) [‖u_t‖²_{L²} + ‖u‖²_{L²} + ‖∇u‖²_{L²}]` on the ball of
/// radius `√(T̂ − t)` around `a`, per stored state. Fields are interpolated
/// onto a fixed ball grid so that balls smaller than a cell still resolve.
pub fn prop1_monitor(
    hist: &WaveHistory,
    t_hat: f64,
    a: f64,
    consts: &DerivedConstants,
) -> Result<BoundSeries> {
    let grid = &hist.grid;
    let n = grid.dim as f64;
    let expo = 2.0 * consts.beta - n / 2.0;
    if expo <= 0.0 {
        return Err(Error::Regime(format!(
            "2β − N/2 = {expo} ≤ 0; the scaled bound is not defined"
        )));
    }
    if grid.is_radial() && a != 0.0 {
        return Err(Error::FrameOutOfRange(
            "radial runs only admit the center a = 0".into(),
        ));
    }
    let ball = BallGrid::new(grid.dim, PROP1_BALL_NODES)?;
    // α only affects the ρ tables, which are not used here.
    let quad = BallQuadrature::new(ball, 3.0)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut ut_part = Vec::new();
    let mut u_part = Vec::new();
    for st in &hist.states {
        let tau = t_hat - st.t;
        if tau <= 0.0 {
            continue;
        }
        let r = tau.sqrt();
        let inside = if grid.is_radial() {
            r <= grid.radius
        } else {
            a - r >= -grid.radius && a + r <= grid.radius
        };
        if !inside {
            continue;
        }
        let du = {
            let mut g = gradient_uniform(&st.u, grid.dx);
            if grid.is_radial() {
                g[0] = 0.0;
            }
            g
        };
        let at = |f: &[f64], odd: bool, i: usize| {
            interpolate_field(grid, f, a + quad.grid.nodes[i] * r, odd)
        };
        let vol = r.powi(grid.dim as i32);
        let ut2 = vol
            * quad.integrate_with(WeightPower::One, |i| {
                let v = at(&st.ut, false, i);
                v * v
            });
        let u2 = vol
            * quad.integrate_with(WeightPower::One, |i| {
                let v = at(&st.u, false, i);
                let g = at(&du, true, i);
                v * v + g * g
            });
        let scale = tau.powf(expo);
        times.push(st.t);
        ut_part.push(scale * ut2);
        u_part.push(scale * u2);
        values.push(scale * (ut2 + u2));
    }
    let mut comps = BTreeMap::new();
    comps.insert("ut_part".to_string(), ut_part);
    comps.insert("u_part".to_string(), u_part);
    Ok(finish(times, values, comps))
}

/// Largest ratio of `max|u_t(t)|` to the Duhamel bound
/// `‖u0'‖∞ + ‖u1‖∞ + ∫_0^t max|u_t|^p` over the stored states (1-D).
pub fn duhamel_bound_ratio(hist: &WaveHistory, p: f64) -> Result<f64> {
    if hist.grid.dim != 1 {
        return Err(Error::Regime("the Duhamel bound is one-dimensional".into()));
    }
    let s0 = &hist.states[0];
    let base = max_abs(&gradient_uniform(&s0.u, hist.grid.dx)) + max_abs(&s0.ut);
    let (t, f) = compute_f(hist, p);
    let mut worst: f64 = 0.0;
    for (k, row) in hist.series.iter().enumerate() {
        debug_assert_eq!(row.t, t[k]);
        let bound = base + f[k];
        if bound > 0.0 {
            worst = worst.max(row.max_ut / bound);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ode_exact_kt;
    use crate::solver::{SeriesRow, SpatialGrid, WaveState};

    /// Exact ODE samples at geometrically shrinking distances to T.
    fn ode_samples(p: f64, t_blow: f64, threshold: f64) -> (Vec<f64>, Vec<f64>) {
        let c = DerivedConstants::new(p).unwrap();
        let mut t = Vec::new();
        let mut v = Vec::new();
        let mut d = t_blow;
        loop {
            let ti = t_blow - d;
            let k = ode_exact_kt(ti, t_blow, &c).unwrap();
            if k > threshold {
                break;
            }
            t.push(ti);
            v.push(k);
            d *= 0.97;
        }
        (t, v)
    }

    /// Spatially constant history following the exact ODE.
    fn ode_history(p: f64, t_blow: f64, threshold: f64) -> WaveHistory {
        let c = DerivedConstants::new(p).unwrap();
        let (t, v) = ode_samples(p, t_blow, threshold);
        let grid = SpatialGrid::new(1, 1.0, 41).unwrap();
        let u_of = |ti: f64| {
            // ∫ κ (T − s)^(−β) ds
            if (c.beta - 1.0).abs() < 1e-12 {
                c.kappa * (t_blow.ln() - (t_blow - ti).ln())
            } else {
                c.kappa / (c.beta - 1.0) * ((t_blow - ti).powf(1.0 - c.beta) - t_blow.powf(1.0 - c.beta))
            }
        };
        let states: Vec<WaveState> = t
            .iter()
            .zip(&v)
            .map(|(&ti, &vi)| WaveState {
                t: ti,
                u: vec![u_of(ti); 41],
                ut: vec![vi; 41],
            })
            .collect();
        WaveHistory {
            grid,
            dt_sequence: t.windows(2).map(|w| w[1] - w[0]).collect(),
            series: t
                .iter()
                .zip(&v)
                .map(|(&ti, &vi)| SeriesRow {
                    t: ti,
                    max_u: u_of(ti).abs(),
                    max_ut: vi,
                    l2_u: 0.0,
                    l2_ut: 0.0,
                })
                .collect(),
            states,
            halt_reason: HaltReason::BlowupDetected,
            blowup_threshold: threshold,
            failure: None,
        }
    }

    #[test]
    fn rates_are_recovered_from_exact_samples() {
        for &p in &[1.5, 2.0, 2.5] {
            let c = DerivedConstants::new(p).unwrap();
            let (t, v) = ode_samples(p, 1.0, 1e8);
            let r = estimate_t_from_samples(&t, &v, 1e8).unwrap();
            assert!((r.t_hat - 1.0).abs() < 1e-3, "p = {p}: T = {}", r.t_hat);
            assert!((r.beta_hat - c.beta).abs() < 1e-3, "p = {p}: β = {}", r.beta_hat);
            assert!((r.kappa_hat - c.kappa).abs() < 1e-2, "p = {p}: κ = {}", r.kappa_hat);
            assert!(r.fit_window.1 < r.t_hat);
            assert!(r.fit_residual >= 0.0);
        }
    }

    #[test]
    fn shrinking_the_window_stays_within_uncertainty() {
        let (t, v) = ode_samples(2.0, 1.0, 1e8);
        let full = estimate_t_from_samples(&t, &v, 1e8).unwrap();
        let cut = t.len() - 5;
        let small = estimate_t_from_samples(&t[..cut], &v[..cut], v[cut - 1]).unwrap();
        assert!((small.t_hat - full.t_hat).abs() <= full.t_hat_uncertainty);
    }

    #[test]
    fn flat_data_has_insufficient_growth() {
        let t: Vec<f64> = (0..100).map(|k| k as f64 * 0.01).collect();
        let v = vec![3.0; 100];
        assert!(matches!(
            estimate_t_from_samples(&t, &v, 1e8),
            Err(Error::InsufficientGrowth { .. })
        ));
    }

    #[test]
    fn lower_bound_is_attained_by_the_ode() {
        for &p in &[1.5, 2.0, 2.5] {
            let c = DerivedConstants::new(p).unwrap();
            let hist = ode_history(p, 1.0, 1e8);
            let r = estimate_t(&hist).unwrap();
            let lb = lower_bound_check(&hist, &r, &c, DEFAULT_LOWER_BOUND_SLACK);
            assert_eq!(lb.ut_verdict, Verdict::Pass);
            assert_eq!(lb.f_verdict, Verdict::Pass);
            assert!((lb.sup_scaled_ut / c.kappa - 1.0).abs() < 1e-2, "p = {p}");
            assert!((lb.inf_scaled_f / c.kappa - 1.0).abs() < 1e-2, "p = {p}: {}", lb.inf_scaled_f);
        }
    }

    #[test]
    fn truncated_trajectory_is_inconclusive() {
        let c = DerivedConstants::new(2.0).unwrap();
        let hist = ode_history(2.0, 1.0, 1e8);
        let r = estimate_t(&hist).unwrap();
        let mut short = hist.clone();
        let keep = short.series.iter().take_while(|row| row.max_ut < 10.0).count();
        short.series.truncate(keep);
        short.states.truncate(keep);
        let lb = lower_bound_check(&short, &r, &c, 0.1);
        assert_eq!(lb.ut_verdict, Verdict::Inconclusive);
        assert_eq!(lb.f_verdict, Verdict::Inconclusive);
    }

    #[test]
    fn f_series_oracle() {
        // F(t) = t / (1 − t) for p = 2, T = 1; densely sampled.
        let t: Vec<f64> = (0..=5000).map(|k| 0.5 * k as f64 / 5000.0).collect();
        let grid = SpatialGrid::new(1, 1.0, 9).unwrap();
        let hist = WaveHistory {
            grid,
            states: vec![],
            dt_sequence: vec![],
            series: t
                .iter()
                .map(|&ti| SeriesRow {
                    t: ti,
                    max_u: 0.0,
                    max_ut: 1.0 / (1.0 - ti),
                    l2_u: 0.0,
                    l2_ut: 0.0,
                })
                .collect(),
            halt_reason: HaltReason::ReachedTEnd,
            blowup_threshold: 1e8,
            failure: None,
        };
        let (_, f) = compute_f(&hist, 2.0);
        assert!((f.last().unwrap() - 1.0).abs() < 1e-6);
        assert!(f.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn prop1_constant_series_equals_two() {
        // ‖u_t‖² on the ball of radius √(T − t) is 2√(T − t)(T − t)^(−2).
        let c = DerivedConstants::new(2.0).unwrap();
        let hist = ode_history(2.0, 1.0, 1e4);
        let b = prop1_monitor(&hist, 1.0, 0.0, &c).unwrap();
        assert!(!b.times.is_empty());
        for v in &b.components["ut_part"] {
            assert!((v - 2.0).abs() < 1e-9 * 2.0, "{v}");
        }
        assert!(b.components["u_part"].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn prop1_rejects_the_critical_regime() {
        // p = 5, N = 1: 2β − 1/2 = 0.
        let c = DerivedConstants::new(5.0).unwrap();
        let hist = ode_history(2.0, 1.0, 1e3);
        assert!(matches!(prop1_monitor(&hist, 1.0, 0.0, &c), Err(Error::Regime(_))));
    }

    #[test]
    fn bounded_verdict_heuristic() {
        assert!(bounded_verdict(&[1.0, 2.0, 2.0, 2.0, 2.05, 2.09, 2.1, 2.0]));
        assert!(!bounded_verdict(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]));
        assert!(bounded_verdict(&[0.0; 10]));
    }

    #[test]
    fn duhamel_bound_holds_on_the_ode() {
        let hist = ode_history(2.0, 1.0, 1e6);
        let r = duhamel_bound_ratio(&hist, 2.0).unwrap();
        assert!(r <= 1.05, "{r}");
    }
}
