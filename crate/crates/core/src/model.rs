//! Problem parameters, the constants `beta = 1/(p-1)` and `kappa = beta^beta`,
//! and the exact blow-up kernel `k_t = kappa (T - t)^(-beta)` of the ODE
//! `k_tt = k_t |k_t|^(p-1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{signed_pow, CompensatedSum};

pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_SNAPSHOT_STRIDE: usize = 10;
const MIN_NX: usize = 8;

/// Closure used at the ends of the spatial domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Mirror ghost points (zero normal derivative).
    #[default]
    Neumann,
    /// 1-D only: the interval wraps, first and last points coincide.
    Periodic,
    /// Boundary nodes frozen at their initial values.
    Dirichlet,
}

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub p: f64,
    /// Spatial dimension N. N = 1 is a full interval; N >= 2 is radial.
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub domain_radius: f64,
    pub nx: usize,
    pub cfl: f64,
    pub t_end: f64,
    #[serde(default = "default_threshold")]
    pub blowup_threshold: f64,
    pub alpha: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Debug switch: `false` drops the `u_t|u_t|^(p-1)` forcing.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_dim() -> usize {
    1
}
fn default_threshold() -> f64 {
    DEFAULT_BLOWUP_THRESHOLD
}
fn default_true() -> bool {
    true
}
fn default_stride() -> usize {
    DEFAULT_SNAPSHOT_STRIDE
}

impl SimParams {
    /// 1-D parameters with the library defaults for everything but `p` and `alpha`.
    pub fn one_dim(p: f64, alpha: f64) -> Self {
        Self {
            p,
            dim: 1,
            domain_radius: 4.0,
            nx: 801,
            cfl: 0.5,
            t_end: 1.0,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
            alpha,
            boundary: Boundary::Neumann,
            nonlinear: true,
            snapshot_stride: DEFAULT_SNAPSHOT_STRIDE,
        }
    }

    pub fn derived(&self) -> Result<DerivedConstants> {
        DerivedConstants::new(self.p)
    }
}

/// `beta = 1/(p-1)` and `kappa = beta^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub p: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl DerivedConstants {
    pub fn new(p: f64) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::InvalidExponent(p));
        }
        let beta = 1.0 / (p - 1.0);
        Ok(Self {
            p,
            beta,
            kappa: beta.powf(beta),
        })
    }

    /// Lower bound that the weight exponent alpha must exceed strictly.
    pub fn alpha_bound(&self) -> f64 {
        (self.beta * (self.beta + 1.0) / 2.0).max(2.0)
    }
}

/// Which of the hypotheses on `(p, N)` hold. Computed, never assumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegimeFlags {
    /// `1 < p <= 1 + 2/(N-1)`, with `p < 3` for N = 1 and `p != 3` for N = 2.
    pub thm1: bool,
    /// `1 < p <= 1 + 2/N`.
    pub blowup: bool,
    /// `2 beta - N/2 > 0`, needed by the rate-scaled diagnostics.
    pub rate_scaled: bool,
}

impl RegimeFlags {
    pub fn compute(p: f64, dim: usize, beta: f64) -> Self {
        let n = dim as f64;
        let thm1 = match dim {
            0 => false,
            // N = 2: p <= 3 with p != 3
            1 | 2 => p < 3.0,
            _ => p <= 1.0 + 2.0 / (n - 1.0),
        };
        Self {
            thm1,
            blowup: p <= 1.0 + 2.0 / n,
            rate_scaled: 2.0 * beta - n / 2.0 > 0.0,
        }
    }
}

/// Parameters that passed validation, annotated with derived data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedParams {
    pub params: SimParams,
    pub consts: DerivedConstants,
    pub regime: RegimeFlags,
    pub warnings: Vec<String>,
}

/// Check `params` against the model hypotheses.
///
/// Fatal: `p <= 1`, a weight `alpha` at or below its bound, and grid problems
/// (`nx < 8`, `cfl` outside `(0, 1]`, non-positive sizes, periodic closure in
/// a radial geometry). Regime violations are reported as flags and warnings.
pub fn validate_params(params: &SimParams) -> std::result::Result<ValidatedParams, Vec<Error>> {
    let mut errors = Vec::new();
    let consts = match DerivedConstants::new(params.p) {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(e);
            None
        }
    };
    if let Some(c) = consts {
        let bound = c.alpha_bound();
        if !(params.alpha.is_finite() && params.alpha > bound) {
            errors.push(Error::InvalidWeight {
                alpha: params.alpha,
                bound,
            });
        }
    }
    if params.dim == 0 {
        errors.push(Error::InvalidGrid("dimension must be at least 1".into()));
    }
    if params.nx < MIN_NX {
        errors.push(Error::InvalidGrid(format!(
            "nx = {} is below the minimum of {MIN_NX}",
            params.nx
        )));
    }
    if !(params.cfl > 0.0 && params.cfl <= 1.0) {
        errors.push(Error::InvalidGrid(format!(
            "cfl = {} must lie in (0, 1]",
            params.cfl
        )));
    }
    if !(params.domain_radius.is_finite() && params.domain_radius > 0.0) {
        errors.push(Error::InvalidGrid(format!(
            "domain_radius = {} must be positive",
            params.domain_radius
        )));
    }
    if !(params.t_end.is_finite() && params.t_end > 0.0) {
        errors.push(Error::InvalidGrid(format!(
            "t_end = {} must be positive",
            params.t_end
        )));
    }
    if !(params.blowup_threshold.is_finite() && params.blowup_threshold > 0.0) {
        errors.push(Error::InvalidGrid(format!(
            "blowup_threshold = {} must be positive",
            params.blowup_threshold
        )));
    }
    if params.snapshot_stride == 0 {
        errors.push(Error::InvalidGrid("snapshot_stride must be at least 1".into()));
    }
    if params.dim >= 2 && params.boundary == Boundary::Periodic {
        errors.push(Error::InvalidGrid(
            "periodic closure is only defined for the 1-D interval".into(),
        ));
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let consts = consts.expect("exponent validated above");
    let regime = RegimeFlags::compute(params.p, params.dim, consts.beta);
    let mut warnings = Vec::new();
    if !regime.thm1 {
        warnings.push(format!(
            "p = {} lies outside the bounded-profile regime for N = {}",
            params.p, params.dim
        ));
    }
    if !regime.blowup {
        warnings.push(format!(
            "p = {} exceeds 1 + 2/N; the negative-energy blow-up criterion does not apply",
            params.p
        ));
    }
    if !regime.rate_scaled {
        warnings.push("2 beta - N/2 <= 0: rate-scaled ball norms are not monitored".into());
    }
    Ok(ValidatedParams {
        params: params.clone(),
        consts,
        regime,
        warnings,
    })
}

/// First validation error, for callers that do not need the full list.
pub fn validate(params: &SimParams) -> Result<ValidatedParams> {
    validate_params(params).map_err(|mut errs| errs.remove(0))
}

/// Exact ODE blow-up profile `kappa (T - t)^(-beta)`.
pub fn ode_exact_kt(t: f64, blowup_time: f64, consts: &DerivedConstants) -> Result<f64> {
    if !(t < blowup_time) {
        return Err(Error::Domain(format!(
            "t = {t} is not before the blow-up time {blowup_time}"
        )));
    }
    Ok(consts.kappa * (blowup_time - t).powf(-consts.beta))
}

/// Blow-up time of the exact profile that starts from `kt0 > 0` at t = 0.
pub fn ode_blowup_time(kt0: f64, consts: &DerivedConstants) -> f64 {
    (consts.kappa / kt0).powf(1.0 / consts.beta)
}

/// Time integrator for `k' = k|k|^(p-1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OdeScheme {
    /// First order.
    #[default]
    ForwardEuler,
    /// Two-stage explicit midpoint; the same scheme the wave solver uses.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OdeStop {
    Threshold,
    ReachedTEnd,
    /// `max_steps` exhausted first.
    StepLimit,
}

/// Settings for [`ode_integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeRun {
    pub kt0: f64,
    pub dt: f64,
    pub t_end: f64,
    pub p: f64,
    pub threshold: f64,
    pub scheme: OdeScheme,
    /// Keep every `record_stride`-th step; the final sub-threshold sample
    /// is always kept.
    pub record_stride: usize,
    pub max_steps: usize,
}

impl OdeRun {
    pub fn new(kt0: f64, dt: f64, t_end: f64, p: f64) -> Self {
        Self {
            kt0,
            dt,
            t_end,
            p,
            threshold: DEFAULT_BLOWUP_THRESHOLD,
            scheme: OdeScheme::ForwardEuler,
            record_stride: 1,
            max_steps: usize::MAX,
        }
    }

    pub fn threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    pub fn scheme(mut self, scheme: OdeScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn record_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stop: OdeStop,
}

/// Integrate `k' = k|k|^(p-1)` from `kt0` with the step
/// `dt_local = dt * min(1, 0.1 / |k|^(p-1))`, stopping when `|k|` would
/// exceed `threshold` (the crossing sample is not recorded) or at `t_end`.
pub fn ode_integrate(run: &OdeRun) -> Result<OdeTrajectory> {
    if !(run.dt > 0.0 && run.dt.is_finite()) {
        return Err(Error::Domain(format!("dt = {} must be positive", run.dt)));
    }
    if !(run.p > 1.0) {
        return Err(Error::InvalidExponent(run.p));
    }
    let p = run.p;
    let f = |k: f64| signed_pow(k, p);
    let mut times = vec![0.0];
    let mut values = vec![run.kt0];
    let mut clock = CompensatedSum::new(0.0);
    let mut k = run.kt0;
    let mut steps = 0usize;
    let stop = loop {
        let t = clock.value();
        if t >= run.t_end {
            break OdeStop::ReachedTEnd;
        }
        if steps >= run.max_steps {
            break OdeStop::StepLimit;
        }
        let growth = k.abs().powf(p - 1.0);
        let mut h = run.dt * (0.1 / growth).min(1.0);
        if t + h > run.t_end {
            h = run.t_end - t;
        }
        let next = match run.scheme {
            OdeScheme::ForwardEuler => k + h * f(k),
            OdeScheme::Midpoint => k + h * f(k + 0.5 * h * f(k)),
        };
        if !next.is_finite() || next.abs() > run.threshold {
            break OdeStop::Threshold;
        }
        k = next;
        clock.add(h);
        steps += 1;
        if steps.is_multiple_of(run.record_stride) {
            times.push(clock.value());
            values.push(k);
        }
    };
    if *times.last().expect("non-empty") != clock.value() {
        times.push(clock.value());
        values.push(k);
    }
    Ok(OdeTrajectory {
        times,
        values,
        stop,
    })
}
