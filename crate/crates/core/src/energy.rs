//! The weighted Lyapunov energy `E(s)` of the rescaled equation, the
//! initial-data criterion and the dissipation identity.
//!
//! Ball fields carry a value and a derivative along the ball coordinate;
//! with `y` that coordinate (the radius for radial grids),
//! `|∇w|^2 = w_y^2` and `y·∇w = y w_y`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ball::{BallQuadrature, WeightPower};
use crate::error::{Error, Result};
use crate::model::DerivedConstants;
use crate::selfsim::WTrajectory;

/// The memory weight `g(s) = e^((β+1)s)` and kernel `h(s) = e^(-(β+1)s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GH {
    pub beta: f64,
}

impl GH {
    pub fn g(&self, s: f64) -> f64 {
        ((self.beta + 1.0) * s).exp()
    }

    pub fn h(&self, s: f64) -> f64 {
        (-(self.beta + 1.0) * s).exp()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyTerms {
    pub s: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub memory_grad: f64,
    pub memory_w: f64,
    pub memory_mixed: f64,
    pub initial_grad: f64,
    pub initial_w: f64,
    pub total: f64,
}

impl EnergyTerms {
    pub fn sum_of_parts(&self) -> f64 {
        self.kinetic
            + self.potential
            + self.memory_grad
            + self.memory_w
            + self.memory_mixed
            + self.initial_grad
            + self.initial_w
    }
}

/// Trapezoid weights for abscissae `s[0..=k]`.
fn trapezoid_weights(s: &[f64], k: usize) -> Vec<f64> {
    let mut c = vec![0.0; k + 1];
    for j in 0..k {
        let h = 0.5 * (s[j + 1] - s[j]);
        c[j] += h;
        c[j + 1] += h;
    }
    c
}

fn check_trajectory(traj: &WTrajectory, quad: &BallQuadrature) -> Result<()> {
    if traj.snaps.is_empty() {
        return Err(Error::HistoryTooShort("no snapshots".into()));
    }
    if traj.ball != quad.grid {
        return Err(Error::IncompatibleGrids(
            "trajectory and quadrature use different ball grids".into(),
        ));
    }
    let s0 = traj.frame.s0;
    if (traj.snaps[0].s - s0).abs() > 1e-9 * (1.0 + s0.abs()) {
        return Err(Error::HistoryTooShort(format!(
            "snapshots start at s = {} instead of s0 = {s0}",
            traj.snaps[0].s
        )));
    }
    Ok(())
}

/// `E(s_k)` with the memory integrals taken by the trapezoid rule over the
/// stored snapshots `0..=k`.
pub fn energy_e(
    traj: &WTrajectory,
    k: usize,
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<EnergyTerms> {
    check_trajectory(traj, quad)?;
    if k >= traj.snaps.len() {
        return Err(Error::HistoryTooShort(format!(
            "index {k} beyond {} snapshots",
            traj.snaps.len()
        )));
    }
    Ok(energy_unchecked(traj, k, quad, consts))
}

fn energy_unchecked(
    traj: &WTrajectory,
    k: usize,
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> EnergyTerms {
    let beta = consts.beta;
    let p = consts.p;
    let alpha = quad.alpha;
    let n = quad.grid.dim as f64;
    let y = &quad.grid.nodes;
    let gh = GH { beta };
    let snap = &traj.snaps[k];
    let s = snap.s;
    let w = &snap.w;
    let dw = &snap.grad_w;
    let g = gh.g(s);
    let gs0 = gh.g(traj.frame.s0);

    let kinetic = 0.5 * beta * g * quad.integrate_with(WeightPower::Alpha, |i| w[i] * w[i]);
    let potential =
        -g / (p + 1.0) * quad.integrate_with(WeightPower::Alpha, |i| w[i].abs().powf(p + 1.0));

    let svals: Vec<f64> = traj.snaps[..=k].iter().map(|x| x.s).collect();
    let c = trapezoid_weights(&svals, k);
    let (mut mem_grad, mut mem_w, mut mem_mixed) = (0.0, 0.0, 0.0);
    for (tau, ct) in traj.snaps[..=k].iter().zip(&c) {
        if *ct == 0.0 {
            continue;
        }
        let wt = &tau.w;
        let dwt = &tau.grad_w;
        let gt = gh.g(tau.s) * ct;
        mem_grad += gt
            * quad.integrate_with(WeightPower::Alpha, |i| {
                let d = dwt[i] - dw[i];
                d * d - dw[i] * dw[i] + 2.0 * dwt[i] * dwt[i]
            });
        mem_w += gt
            * quad.integrate_with(WeightPower::AlphaMinus2, |i| {
                let d = wt[i] - w[i];
                (d * d - w[i] * w[i]) * ((2.0 * (alpha - 1.0) + n) * y[i] * y[i] - n)
            });
        mem_mixed += gt
            * quad.integrate_with(WeightPower::AlphaMinus1, |i| {
                let ygw = y[i] * dw[i];
                let d = wt[i] - ygw;
                d * d - ygw * ygw
            });
    }
    let memory_grad = -0.5 * mem_grad;
    let memory_w = alpha * mem_w;
    let memory_mixed = -alpha * mem_mixed;

    let d00 = &traj.grad_w00;
    let initial_grad = 0.5
        * gs0
        * quad.integrate_with(WeightPower::Alpha, |i| {
            let a = d00[i] + dw[i];
            a * a - dw[i] * dw[i]
        });
    let initial_w = alpha
        * gs0
        * quad.integrate_with(WeightPower::AlphaMinus1, |i| {
            let a = y[i] * d00[i] - w[i];
            a * a - w[i] * w[i]
        });

    let mut t = EnergyTerms {
        s,
        kinetic,
        potential,
        memory_grad,
        memory_w,
        memory_mixed,
        initial_grad,
        initial_w,
        total: 0.0,
    };
    t.total = t.sum_of_parts();
    t
}

/// `E` at every snapshot.
pub fn energy_series(
    traj: &WTrajectory,
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<Vec<EnergyTerms>> {
    check_trajectory(traj, quad)?;
    Ok((0..traj.snaps.len())
        .into_par_iter()
        .map(|k| energy_unchecked(traj, k, quad, consts))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CriterionVerdict {
    Satisfied,
    Violated,
}

impl CriterionVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionVerdict::Satisfied => "SATISFIED",
            CriterionVerdict::Violated => "VIOLATED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    /// The criterion without the `g(s0)` factor.
    pub value: f64,
    pub verdict: CriterionVerdict,
}

/// The initial-data criterion, evaluated literally:
///
/// ```text
///   β/2 ∫ρ^α w0² − 1/(p+1) ∫ρ^α |w0|^(p+1)
/// + ½ { ∫ρ^α |∇w00 + ∇w0|² − ∫ρ^α |∇w0|² }
/// + α { ∫ρ^(α−1) [y∇w00 − w0]² − ∫ρ^(α−1) w0² }
/// ```
///
/// Only the gradient of `w00` enters.
pub fn initial_criterion(
    w0: &[f64],
    grad_w0: &[f64],
    grad_w00: &[f64],
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<CriterionValue> {
    let n = quad.grid.len();
    for (name, f) in [("w0", w0), ("grad_w0", grad_w0), ("grad_w00", grad_w00)] {
        if f.len() != n {
            return Err(Error::IncompatibleGrids(format!(
                "{name} has {} values, the ball grid {n}",
                f.len()
            )));
        }
    }
    let beta = consts.beta;
    let p = consts.p;
    let alpha = quad.alpha;
    let y = &quad.grid.nodes;
    let value = 0.5 * beta * quad.integrate_with(WeightPower::Alpha, |i| w0[i] * w0[i])
        - quad.integrate_with(WeightPower::Alpha, |i| w0[i].abs().powf(p + 1.0)) / (p + 1.0)
        + 0.5
            * quad.integrate_with(WeightPower::Alpha, |i| {
                let a = grad_w00[i] + grad_w0[i];
                a * a - grad_w0[i] * grad_w0[i]
            })
        + alpha
            * quad.integrate_with(WeightPower::AlphaMinus1, |i| {
                let a = y[i] * grad_w00[i] - w0[i];
                a * a - w0[i] * w0[i]
            });
    let verdict = if value >= 0.0 {
        CriterionVerdict::Satisfied
    } else {
        CriterionVerdict::Violated
    };
    Ok(CriterionValue { value, verdict })
}

/// The five dissipation terms at one similarity time; each is ≤ 0.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DissipationTerms {
    pub potential: f64,
    pub ws: f64,
    pub w2: f64,
    pub yw: f64,
    pub grad: f64,
}

impl DissipationTerms {
    pub fn sum(&self) -> f64 {
        self.potential + self.ws + self.w2 + self.yw + self.grad
    }

    pub fn all_nonpositive(&self) -> bool {
        [self.potential, self.ws, self.w2, self.yw, self.grad]
            .iter()
            .all(|&v| v <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub s: f64,
    /// Centered difference of `E`.
    pub lhs: f64,
    pub rhs: f64,
    pub terms: DissipationTerms,
    pub abs_residual: f64,
    /// `|lhs − rhs| / (|lhs| + |rhs| + ε)`.
    pub rel_residual: f64,
}

const RESIDUAL_EPS: f64 = 1e-300;

/// Right-hand side of the dissipation identity at snapshot `k`, with
/// `w_s` by centered differences of the neighbors.
pub fn dissipation_terms(
    traj: &WTrajectory,
    k: usize,
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<DissipationTerms> {
    if k == 0 || k + 1 >= traj.snaps.len() {
        return Err(Error::HistoryTooShort(format!(
            "snapshot {k} needs neighbors on both sides ({} stored)",
            traj.snaps.len()
        )));
    }
    let beta = consts.beta;
    let p = consts.p;
    let alpha = quad.alpha;
    let y = &quad.grid.nodes;
    let (prev, cur, next) = (&traj.snaps[k - 1], &traj.snaps[k], &traj.snaps[k + 1]);
    let ds2 = next.s - prev.s;
    let ws: Vec<f64> = next.w.iter().zip(&prev.w).map(|(a, b)| (a - b) / ds2).collect();
    let w = &cur.w;
    let dw = &cur.grad_w;
    let g = GH { beta }.g(cur.s);
    Ok(DissipationTerms {
        potential: -(beta + 1.0) / (p + 1.0)
            * g
            * quad.integrate_with(WeightPower::Alpha, |i| w[i].abs().powf(p + 1.0)),
        ws: -g * quad.integrate_with(WeightPower::Alpha, |i| {
            (1.0 - y[i] * y[i] / 8.0) * ws[i] * ws[i]
        }),
        w2: -(alpha - beta * (beta + 1.0) / 2.0)
            * g
            * quad.integrate_with(WeightPower::Alpha, |i| w[i] * w[i]),
        yw: -alpha * g * quad.integrate_with(WeightPower::AlphaMinus1, |i| {
            let a = y[i] * w[i];
            a * a
        }),
        grad: -0.5 * g * quad.integrate_with(WeightPower::Alpha, |i| {
            let a = dw[i] + 0.5 * y[i] * ws[i];
            a * a
        }),
    })
}

/// Residual of the dissipation identity at every interior snapshot, given
/// the energy series from [`energy_series`].
pub fn dissipation_series(
    traj: &WTrajectory,
    energies: &[EnergyTerms],
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<Vec<DissipationReport>> {
    if energies.len() != traj.snaps.len() {
        return Err(Error::HistoryTooShort(
            "energy series does not match the snapshots".into(),
        ));
    }
    if traj.snaps.len() < 3 {
        return Err(Error::HistoryTooShort(
            "the centered difference needs at least 3 snapshots".into(),
        ));
    }
    (1..traj.snaps.len() - 1)
        .into_par_iter()
        .map(|k| {
            let terms = dissipation_terms(traj, k, quad, consts)?;
            let lhs = (energies[k + 1].total - energies[k - 1].total)
                / (energies[k + 1].s - energies[k - 1].s);
            let rhs = terms.sum();
            let abs_residual = (lhs - rhs).abs();
            Ok(DissipationReport {
                s: traj.snaps[k].s,
                lhs,
                rhs,
                terms,
                abs_residual,
                rel_residual: abs_residual / (lhs.abs() + rhs.abs() + RESIDUAL_EPS),
            })
        })
        .collect()
}

/// Single-point form: residual at snapshot `k`.
pub fn dissipation_residual(
    traj: &WTrajectory,
    k: usize,
    quad: &BallQuadrature,
    consts: &DerivedConstants,
) -> Result<DissipationReport> {
    let terms = dissipation_terms(traj, k, quad, consts)?;
    let e_prev = energy_e(traj, k - 1, quad, consts)?;
    let e_next = energy_e(traj, k + 1, quad, consts)?;
    let lhs = (e_next.total - e_prev.total) / (e_next.s - e_prev.s);
    let rhs = terms.sum();
    let abs_residual = (lhs - rhs).abs();
    Ok(DissipationReport {
        s: traj.snaps[k].s,
        lhs,
        rhs,
        terms,
        abs_residual,
        rel_residual: abs_residual / (lhs.abs() + rhs.abs() + RESIDUAL_EPS),
    })
}

/// Outcome of the discrete monotonicity check on `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub samples: usize,
    pub violations: usize,
    /// Largest `(E_{k+1} − E_k) / tol_k` seen; ≤ 1 means within tolerance.
    pub worst_ratio: f64,
    pub worst_s: f64,
    pub monotone: bool,
}

/// `E_{k+1} ≤ E_k + tol_k` with `tol_k = 10 (ds² + dx²) max(|E_k|, |E_{k+1}|)`.
pub fn check_monotone(energies: &[EnergyTerms], dx: f64) -> MonotonicityReport {
    let mut rep = MonotonicityReport {
        samples: energies.len(),
        violations: 0,
        worst_ratio: f64::NEG_INFINITY,
        worst_s: energies.first().map_or(0.0, |e| e.s),
        monotone: true,
    };
    for pair in energies.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let ds = b.s - a.s;
        let scale = a.total.abs().max(b.total.abs()).max(f64::MIN_POSITIVE);
        let tol = 10.0 * (ds * ds + dx * dx) * scale;
        let ratio = (b.total - a.total) / tol;
        if ratio > rep.worst_ratio {
            rep.worst_ratio = ratio;
            rep.worst_s = b.s;
        }
        if ratio > 1.0 {
            rep.violations += 1;
        }
    }
    rep.monotone = rep.violations == 0;
    rep
}
