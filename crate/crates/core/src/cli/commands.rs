//! The five subcommands as library functions. Each writes its documents into
//! an output directory and returns whether its check passed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{FrameSpec, RunConfig, SweepSpec};
use super::io;
use crate::ball::{BallGrid, BallQuadrature};
use crate::diagnostics::{
    estimate_t, lower_bound_check, prop1_monitor, thm1_monitor, BlowupReport, BoundSeries, Verdict,
};
use crate::duhamel::{cross_validate, duhamel_run, Discrepancy, DuhamelProblem, Extension};
use crate::energy::{
    check_monotone, dissipation_series, energy_e, energy_series, initial_criterion, CriterionValue,
    CriterionVerdict, MonotonicityReport,
};
use crate::error::{Error, Result};
use crate::model::{Boundary, DerivedConstants};
use crate::selfsim::{initial_trajectory, to_selfsimilar, SelfSimFrame};
use crate::solver::{init_state, run, HaltReason, WaveHistory};

pub const ENV_MAX_PARALLEL: &str = "BLOWUPLAB_MAX_PARALLEL";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Exit status for an error surfaced by a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidExponent(_)
        | Error::InvalidWeight { .. }
        | Error::InvalidGrid(_)
        | Error::Profile(_)
        | Error::FrameOutOfRange(_)
        | Error::Regime(_) => EXIT_INVALID_CONFIG,
        _ => EXIT_INTERNAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::CheckFailed => EXIT_CHECK_FAILED,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub p: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl From<&DerivedConstants> for Constants {
    fn from(c: &DerivedConstants) -> Self {
        Self {
            p: c.p,
            beta: c.beta,
            kappa: c.kappa,
        }
    }
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    command: &'a str,
    version: &'a str,
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
}

/// Wall-clock bookkeeping kept out of the deterministic outputs.
struct Clock {
    started: f64,
    timer: Instant,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl Clock {
    fn start() -> Self {
        Self {
            started: unix_now(),
            timer: Instant::now(),
        }
    }

    fn write(&self, dir: &Path, command: &str) -> Result<()> {
        io::write_json(
            &dir.join(format!("metadata.{command}.json")),
            &Metadata {
                command,
                version: env!("CARGO_PKG_VERSION"),
                started_unix: self.started,
                finished_unix: unix_now(),
                elapsed_seconds: self.timer.elapsed().as_secs_f64(),
            },
        )
    }
}

/// Create `out` and record the config. A different config already stored
/// there (an analysis run inside a run directory) is kept, and this one is
/// saved as `config.<command>.toml`.
fn prepare_dir(cfg: &RunConfig, out: &Path, command: &str) -> Result<()> {
    io::ensure_dir(out)?;
    let main = out.join("config.toml");
    match std::fs::read_to_string(&main) {
        Ok(existing) if existing != cfg.source => {
            io::write_text(&out.join(format!("config.{command}.toml")), &cfg.source)
        }
        Ok(_) => Ok(()),
        Err(_) => io::write_text(&main, &cfg.source),
    }
}

fn frame_of(spec: FrameSpec, consts: &DerivedConstants) -> Result<SelfSimFrame> {
    SelfSimFrame::new(spec.a, spec.t_prime, consts)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct CrossValidation {
    pub t_end: f64,
    pub extension: &'static str,
    pub discrepancy: Discrepancy,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub schema: &'static str,
    pub halt_reason: &'static str,
    pub t_final: f64,
    pub steps: usize,
    pub stored_states: usize,
    pub failure: Option<String>,
    pub warnings: Vec<String>,
    pub constants: Constants,
    pub estimate: Option<BlowupReport>,
    pub estimate_error: Option<String>,
    pub cross_validation: Option<CrossValidation>,
}

pub struct SimulateOutcome {
    pub history: WaveHistory,
    pub report: SimulateReport,
}

/// Integrate the configured problem without writing anything.
pub fn simulate_in_memory(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let grid = cfg.grid()?;
    let (u0, u1) = cfg.profiles()?;
    let state0 = init_state(&grid, &u0, &u1)?;
    let hist = run(state0, &grid, &cfg.params, cfg.params.cfl * grid.dx);
    let consts = cfg.validated.consts;

    let (estimate, estimate_error) = if hist.halt_reason == HaltReason::BlowupDetected {
        match estimate_t(&hist) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        }
    } else {
        (None, None)
    };

    let cross_validation = if cfg.analysis.cross_validate && grid.dim == 1 {
        let t_end = match &estimate {
            Some(r) => cfg.analysis.cross_validate_fraction * r.t_hat,
            None => hist.last_state().t,
        };
        let extension = if cfg.params.boundary == Boundary::Periodic {
            Extension::Periodic
        } else {
            Extension::Zero
        };
        let problem = DuhamelProblem::new(
            grid.clone(),
            cfg.params.p,
            cfg.params.nonlinear,
            extension,
            u0,
            u1,
        )?;
        let snaps = duhamel_run(&problem, t_end, cfg.params.blowup_threshold)?;
        let discrepancy = cross_validate(&hist, &grid, &snaps, (0.0, t_end))?;
        Some(CrossValidation {
            t_end,
            extension: match extension {
                Extension::Periodic => "periodic",
                Extension::Zero => "zero",
            },
            discrepancy,
        })
    } else {
        None
    };

    let report = SimulateReport {
        schema: "blowuplab.simulate/1",
        halt_reason: hist.halt_reason.as_str(),
        t_final: hist.series.last().map_or(0.0, |r| r.t),
        steps: hist.dt_sequence.len(),
        stored_states: hist.states.len(),
        failure: hist.failure.clone(),
        warnings: cfg.validated.warnings.clone(),
        constants: (&consts).into(),
        estimate,
        estimate_error,
        cross_validation,
    };
    Ok(SimulateOutcome {
        history: hist,
        report,
    })
}

fn write_simulation(cfg: &RunConfig, out: &Path, sim: &SimulateOutcome, trajectory: bool) -> Result<()> {
    io::ensure_dir(out)?;
    io::write_text(&out.join("config.toml"), &cfg.source)?;
    io::write_text(&out.join("series.csv"), &io::series_csv(&sim.history.series))?;
    io::write_json(&out.join("report.json"), &sim.report)?;
    if trajectory {
        io::write_trajectory(&out.join("trajectory.bin"), &sim.history)?;
    }
    Ok(())
}

/// `simulate`: series.csv, report.json, trajectory.bin. The halt reason is
/// reported, not judged.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<(Status, SimulateOutcome)> {
    let clock = Clock::start();
    let sim = simulate_in_memory(cfg)?;
    write_simulation(cfg, out, &sim, cfg.analysis.write_trajectory)?;
    clock.write(out, "simulate")?;
    Ok((Status::Ok, sim))
}

// --------------------------------------------------------------- criterion

#[derive(Debug, Clone, Serialize)]
pub struct FollowUp {
    pub t_end: f64,
    pub halt_reason: &'static str,
    pub t_halt: f64,
    pub blowup_before_t_prime: bool,
    /// A VIOLATED criterion predicts blow-up before `T'`.
    pub prediction: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub schema: &'static str,
    pub a: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: f64,
    pub s0: f64,
    pub alpha: f64,
    pub ball_nodes: usize,
    pub value: f64,
    pub verdict: CriterionVerdict,
    pub energy_s0: f64,
    pub follow_up: Option<FollowUp>,
}

/// Criterion value and `E(s0)` from the initial profiles.
pub fn criterion_from_config(cfg: &RunConfig, frame: FrameSpec) -> Result<(CriterionValue, f64)> {
    let consts = cfg.validated.consts;
    let frame = frame_of(frame, &consts)?;
    let ball = BallGrid::new(cfg.params.dim, cfg.analysis.ball_nodes)?;
    let quad = BallQuadrature::new(ball.clone(), cfg.params.alpha)?;
    let (u0, u1) = cfg.profiles()?;
    let traj = initial_trajectory(&u0, &u1, &frame, &ball)?;
    let snap = &traj.snaps[0];
    let crit = initial_criterion(&snap.w, &snap.grad_w, &traj.grad_w00, &quad, &consts)?;
    let e0 = energy_e(&traj, 0, &quad, &consts)?;
    Ok((crit, e0.total))
}

fn follow_up(cfg: &RunConfig, frame: FrameSpec, verdict: CriterionVerdict) -> Result<FollowUp> {
    let mut run_cfg = cfg.clone();
    run_cfg.params.t_end = frame.t_prime;
    let grid = run_cfg.grid()?;
    let (u0, u1) = run_cfg.profiles()?;
    let hist = run(init_state(&grid, &u0, &u1)?, &grid, &run_cfg.params, run_cfg.params.cfl * grid.dx);
    Ok(follow_up_of(&hist, frame.t_prime, verdict))
}

fn follow_up_of(hist: &WaveHistory, t_prime: f64, verdict: CriterionVerdict) -> FollowUp {
    let t_halt = hist.series.last().map_or(0.0, |r| r.t);
    let blew_up = hist.halt_reason == HaltReason::BlowupDetected && t_halt < t_prime;
    let prediction = match (verdict, blew_up) {
        (CriterionVerdict::Violated, true) => "PASS",
        (CriterionVerdict::Violated, false) => "FAIL",
        (CriterionVerdict::Satisfied, _) => "NONE",
    };
    FollowUp {
        t_end: t_prime,
        halt_reason: hist.halt_reason.as_str(),
        t_halt,
        blowup_before_t_prime: blew_up,
        prediction,
    }
}

/// `criterion`: criterion.json. Fails only when a VIOLATED verdict is not
/// followed by blow-up before `T'`.
pub fn cmd_criterion(cfg: &RunConfig, out: &Path, frame: Option<FrameSpec>) -> Result<(Status, CriterionReport)> {
    let clock = Clock::start();
    let frame = frame.ok_or_else(|| {
        Error::Config("criterion needs a frame: set [frame] or pass --frame-a/--frame-T".into())
    })?;
    let (crit, e0) = criterion_from_config(cfg, frame)?;
    let follow = if cfg.analysis.follow_up {
        Some(follow_up(cfg, frame, crit.verdict)?)
    } else {
        None
    };
    let report = CriterionReport {
        schema: "blowuplab.criterion/1",
        a: frame.a,
        t_prime: frame.t_prime,
        s0: -frame.t_prime.ln(),
        alpha: cfg.params.alpha,
        ball_nodes: cfg.analysis.ball_nodes,
        value: crit.value,
        verdict: crit.verdict,
        energy_s0: e0,
        follow_up: follow,
    };
    prepare_dir(cfg, out, "criterion")?;
    io::write_json(&out.join("criterion.json"), &report)?;
    clock.write(out, "criterion")?;
    let failed = report.follow_up.as_ref().is_some_and(|f| f.prediction == "FAIL");
    let status = if failed { Status::CheckFailed } else { Status::Ok };
    Ok((status, report))
}

// ------------------------------------------------------------------ energy

#[derive(Debug, Clone, Serialize)]
pub struct DissipationSummary {
    pub samples: usize,
    pub max_rel_residual: f64,
    pub median_rel_residual: f64,
    pub mid_rel_residual: f64,
    pub terms_nonpositive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonitorSummary {
    pub sup: f64,
    pub bounded: bool,
    pub last: BTreeMap<String, f64>,
}

impl From<&BoundSeries> for MonitorSummary {
    fn from(b: &BoundSeries) -> Self {
        Self {
            sup: b.sup,
            bounded: b.bounded,
            last: b
                .components
                .iter()
                .filter_map(|(k, v)| v.last().map(|x| (k.clone(), *x)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub schema: &'static str,
    pub a: f64,
    #[serde(rename = "T_prime")]
    pub t_prime: f64,
    pub frame_source: &'static str,
    pub s0: f64,
    pub s_end: f64,
    pub s_samples: usize,
    pub ball_nodes: usize,
    pub criterion: CriterionValue,
    pub monotonicity: MonotonicityReport,
    pub dissipation: DissipationSummary,
    pub thm1: MonitorSummary,
    pub prop1: Option<MonitorSummary>,
    pub prop1_error: Option<String>,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Energy analysis of a stored history; returns the CSV text and the report.
pub fn energy_analysis(
    cfg: &RunConfig,
    hist: &WaveHistory,
    frame: Option<FrameSpec>,
) -> Result<(String, EnergyReport)> {
    let consts = cfg.validated.consts;
    let (spec, source) = match frame {
        Some(f) => (f, "config"),
        None => {
            let r = estimate_t(hist).map_err(|e| {
                Error::FrameOutOfRange(format!("no frame given and no blow-up time to default to: {e}"))
            })?;
            (FrameSpec { a: 0.0, t_prime: r.t_hat }, "estimate")
        }
    };
    let frame = frame_of(spec, &consts)?;
    let s_end = frame.s0 + cfg.analysis.s_span;
    let t_last = hist.last_state().t;
    if frame.t_of_s(s_end) > t_last {
        return Err(Error::FrameOutOfRange(format!(
            "s_end = {s_end} needs t = {} but the run stops at t = {t_last}; lower analysis.s_span",
            frame.t_of_s(s_end)
        )));
    }
    let s_grid = frame.uniform_s_grid(s_end, cfg.analysis.s_samples);
    let ball = BallGrid::new(hist.grid.dim, cfg.analysis.ball_nodes)?;
    let quad = BallQuadrature::new(ball.clone(), cfg.params.alpha)?;
    let traj = to_selfsimilar(hist, &frame, &s_grid, &ball)?;
    let snap0 = &traj.snaps[0];
    let criterion = initial_criterion(&snap0.w, &snap0.grad_w, &traj.grad_w00, &quad, &consts)?;
    let energies = energy_series(&traj, &quad, &consts)?;
    let diss = dissipation_series(&traj, &energies, &quad, &consts)?;
    let monotonicity = check_monotone(&energies, ball.dy);
    let rel: Vec<f64> = diss.iter().map(|d| d.rel_residual).collect();
    let dissipation = DissipationSummary {
        samples: diss.len(),
        max_rel_residual: rel.iter().cloned().fold(0.0, f64::max),
        median_rel_residual: median(rel.clone()),
        mid_rel_residual: rel[rel.len() / 2],
        terms_nonpositive: diss.iter().all(|d| d.terms.all_nonpositive()),
    };
    let thm1 = thm1_monitor(&traj, &quad);
    let (prop1, prop1_error) = match prop1_monitor(hist, frame.t_prime, frame.a, &consts) {
        Ok(b) => (Some((&b).into()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = EnergyReport {
        schema: "blowuplab.energy/1",
        a: frame.a,
        t_prime: frame.t_prime,
        frame_source: source,
        s0: frame.s0,
        s_end,
        s_samples: s_grid.len(),
        ball_nodes: ball.len(),
        criterion,
        monotonicity,
        dissipation,
        thm1: (&thm1).into(),
        prop1,
        prop1_error,
    };
    Ok((io::energy_csv(&energies, &diss), report))
}

/// `energy`: energy.csv and energy.json for the trajectory in `run_dir`.
/// Fails when `E` increases beyond tolerance.
pub fn cmd_energy(
    cfg: &RunConfig,
    out: &Path,
    run_dir: &Path,
    frame: Option<FrameSpec>,
) -> Result<(Status, EnergyReport)> {
    let clock = Clock::start();
    let hist = io::read_trajectory(&run_dir.join("trajectory.bin"))?;
    let (csv, report) = energy_analysis(cfg, &hist, frame)?;
    prepare_dir(cfg, out, "energy")?;
    io::write_text(&out.join("energy.csv"), &csv)?;
    io::write_json(&out.join("energy.json"), &report)?;
    clock.write(out, "energy")?;
    let status = if report.monotonicity.monotone {
        Status::Ok
    } else {
        Status::CheckFailed
    };
    Ok((status, report))
}

// -------------------------------------------------------------- rate-check

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub schema: &'static str,
    pub constants: Constants,
    pub t_hat: f64,
    pub t_hat_uncertainty: f64,
    pub beta_hat: f64,
    pub kappa_hat: f64,
    pub fit_window: (f64, f64),
    pub fit_samples: usize,
    pub sup_scaled_ut: f64,
    pub inf_scaled_f: f64,
    pub slack: f64,
    pub ut_verdict: Verdict,
    pub f_verdict: Verdict,
    pub verdict: Verdict,
}

pub fn rate_analysis(cfg: &RunConfig, hist: &WaveHistory) -> Result<RateReport> {
    if hist.grid.dim != 1 {
        return Err(Error::Regime(
            "the rate lower bound is checked for N = 1 only".into(),
        ));
    }
    let consts = cfg.validated.consts;
    let est = estimate_t(hist)?;
    let lb = lower_bound_check(hist, &est, &consts, cfg.analysis.lower_bound_slack);
    let verdict = match (lb.ut_verdict, lb.f_verdict) {
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        _ => Verdict::Inconclusive,
    };
    Ok(RateReport {
        schema: "blowuplab.rate_check/1",
        constants: (&consts).into(),
        t_hat: est.t_hat,
        t_hat_uncertainty: est.t_hat_uncertainty,
        beta_hat: est.beta_hat,
        kappa_hat: est.kappa_hat,
        fit_window: est.fit_window,
        fit_samples: est.fit_samples,
        sup_scaled_ut: lb.sup_scaled_ut,
        inf_scaled_f: lb.inf_scaled_f,
        slack: lb.slack,
        ut_verdict: lb.ut_verdict,
        f_verdict: lb.f_verdict,
        verdict,
    })
}

/// `rate-check`: rate_check.json. Fails on a FAIL verdict.
pub fn cmd_rate_check(cfg: &RunConfig, out: &Path, run_dir: &Path) -> Result<(Status, RateReport)> {
    let clock = Clock::start();
    if cfg.params.dim != 1 {
        return Err(Error::Regime(
            "the rate lower bound is checked for N = 1 only".into(),
        ));
    }
    let hist = io::read_trajectory(&run_dir.join("trajectory.bin"))?;
    let report = rate_analysis(cfg, &hist)?;
    prepare_dir(cfg, out, "rate-check")?;
    io::write_json(&out.join("rate_check.json"), &report)?;
    clock.write(out, "rate-check")?;
    let status = if report.verdict == Verdict::Fail {
        Status::CheckFailed
    } else {
        Status::Ok
    };
    Ok((status, report))
}

// ------------------------------------------------------------------- sweep

/// One row of the sweep summary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub coordinates: Vec<String>,
    pub amplitude_factor: f64,
    pub t_prime: Option<f64>,
    pub halt_reason: Option<&'static str>,
    pub t_halt: Option<f64>,
    pub criterion_value: Option<f64>,
    pub criterion_verdict: Option<CriterionVerdict>,
    pub energy_s0: Option<f64>,
    pub t_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub kappa_hat: Option<f64>,
    /// PASS/FAIL when the criterion is VIOLATED, empty otherwise.
    pub linkage: Option<&'static str>,
    pub error: Option<String>,
}

fn value_text(v: &toml::Value) -> String {
    match v {
        toml::Value::Float(x) => io::fmt_f64(*x),
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn sweep_csv(spec: &SweepSpec, rows: &[SweepRow]) -> String {
    let mut header = vec!["run".to_string()];
    header.extend(spec.axes.iter().map(|a| csv_field(&a.path)));
    header.extend(
        [
            "amplitude_factor",
            "T_prime",
            "halt_reason",
            "t_halt",
            "criterion_value",
            "criterion_verdict",
            "E_s0",
            "t_hat",
            "beta_hat",
            "kappa_hat",
            "linkage",
            "error",
        ]
        .map(String::from),
    );
    let mut out = header.join(",");
    out.push('\n');
    let num = |x: Option<f64>| x.map(io::fmt_f64).unwrap_or_default();
    for r in rows {
        let mut f = vec![r.index.to_string()];
        f.extend(r.coordinates.iter().map(|c| csv_field(c)));
        f.push(io::fmt_f64(r.amplitude_factor));
        f.push(num(r.t_prime));
        f.push(r.halt_reason.unwrap_or_default().to_string());
        f.push(num(r.t_halt));
        f.push(num(r.criterion_value));
        f.push(r.criterion_verdict.map(|v| v.as_str()).unwrap_or_default().to_string());
        f.push(num(r.energy_s0));
        f.push(num(r.t_hat));
        f.push(num(r.beta_hat));
        f.push(num(r.kappa_hat));
        f.push(r.linkage.unwrap_or_default().to_string());
        f.push(csv_field(r.error.as_deref().unwrap_or_default()));
        out.push_str(&f.join(","));
        out.push('\n');
    }
    out
}

/// Config of sweep run `k`, with its amplitude jitter applied.
pub fn sweep_config(spec: &SweepSpec, k: usize) -> Result<RunConfig> {
    let doc = spec.point(k)?;
    let text = toml::to_string(&doc).map_err(|e| Error::Config(format!("sweep run {k}: {e}")))?;
    let mut cfg = RunConfig::from_value(doc, text, spec.base_dir.clone(), &format!("sweep run {k}"))?;
    if cfg.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        cfg.amplitude_factor = 1.0 + cfg.jitter * rng.gen_range(-1.0..=1.0);
    }
    Ok(cfg)
}

fn sweep_one(spec: &SweepSpec, k: usize, out: &Path) -> SweepRow {
    let mut row = SweepRow {
        index: k,
        coordinates: spec.coordinates(k).into_iter().map(value_text).collect(),
        amplitude_factor: 1.0,
        ..Default::default()
    };
    let result = (|| -> Result<()> {
        let cfg = sweep_config(spec, k)?;
        row.amplitude_factor = cfg.amplitude_factor;
        let sim = simulate_in_memory(&cfg)?;
        write_simulation(&cfg, &out.join(format!("run_{k:04}")), &sim, false)?;
        let hist = &sim.history;
        row.halt_reason = Some(hist.halt_reason.as_str());
        row.t_halt = hist.series.last().map(|r| r.t);
        if let Some(e) = &sim.report.estimate {
            row.t_hat = Some(e.t_hat);
            row.beta_hat = Some(e.beta_hat);
            row.kappa_hat = Some(e.kappa_hat);
        }
        let frame = cfg.frame.or_else(|| {
            row.t_hat.map(|t| FrameSpec { a: 0.0, t_prime: t })
        });
        if let Some(frame) = frame {
            row.t_prime = Some(frame.t_prime);
            let (crit, e0) = criterion_from_config(&cfg, frame)?;
            row.criterion_value = Some(crit.value);
            row.criterion_verdict = Some(crit.verdict);
            row.energy_s0 = Some(e0);
            if cfg.frame.is_some() && crit.verdict == CriterionVerdict::Violated {
                row.linkage = Some(follow_up_of(hist, frame.t_prime, crit.verdict).prediction);
            }
        }
        Ok(())
    })();
    if let Err(e) = result {
        row.error = Some(e.to_string());
    }
    row
}

/// Effective concurrency: the spec's limit, capped by the environment.
pub fn sweep_parallelism(spec: &SweepSpec) -> usize {
    let env = std::env::var(ENV_MAX_PARALLEL)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    env.map_or(spec.max_parallel, |n| n.min(spec.max_parallel))
}

/// `sweep`: sweep.csv plus series.csv and report.json per run. Fails when a
/// VIOLATED run does not blow up before `T'`.
pub fn cmd_sweep(spec: &SweepSpec, out: &Path) -> Result<(Status, Vec<SweepRow>)> {
    let clock = Clock::start();
    io::ensure_dir(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(sweep_parallelism(spec))
        .build()
        .map_err(|e| Error::Config(format!("cannot start the sweep pool: {e}")))?;
    let rows: Vec<SweepRow> =
        pool.install(|| (0..spec.size()).into_par_iter().map(|k| sweep_one(spec, k, out)).collect());
    io::write_text(&out.join("sweep.csv"), &sweep_csv(spec, &rows))?;
    clock.write(out, "sweep")?;
    let failed = rows.iter().any(|r| r.linkage == Some("FAIL"));
    let status = if failed { Status::CheckFailed } else { Status::Ok };
    Ok((status, rows))
}

/// Output directory: the flag if given, else the config's `outputs`
/// relative to the config file.
pub fn output_dir(cfg_outputs: &Path, base_dir: &Path, flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None if cfg_outputs.is_absolute() => cfg_outputs.to_path_buf(),
        None => base_dir.join(cfg_outputs),
    }
}
