//! Closed-loop simulation under the continuous controller and under the
//! aperiodic event-triggered emulation, plus the sweep experiments.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::etc_bounds::{eps_d, etc_certificate, qtilde, Bound, EtcConstants, TriggerMatrix};
use crate::model::{
    closed_loop_rhs, ControllerGains, ModelError, Nonlinearity, PlantModel, RegulationTask, UncertaintyRealization,
};
use crate::synthesis::{eps_c_value, SynthesisCertificate};

/// States larger than this in magnitude abort the run.
pub const DIVERGENCE_GUARD: f64 = 1e12;
pub const DEFAULT_TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("state diverged at t = {t}")]
    NonFiniteState { t: f64, partial: Box<Trajectory> },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq)]
pub enum SampleSchedule {
    Periodic { h: f64 },
    /// Intervals drawn uniformly from `[h_min, h_max]`.
    Jittered { h_min: f64, h_max: f64, seed: u64 },
}

impl SampleSchedule {
    /// Supremum inter-sample time `h̄`.
    pub fn h_bar(&self) -> f64 {
        match *self {
            SampleSchedule::Periodic { h } => h,
            SampleSchedule::Jittered { h_max, .. } => h_max,
        }
    }

    fn h_min(&self) -> f64 {
        match *self {
            SampleSchedule::Periodic { h } => h,
            SampleSchedule::Jittered { h_min, .. } => h_min,
        }
    }

    /// Sample instants `0 = t_0 < t_1 < …` covering `[0, t_end]`.
    pub fn instants(&self, t_end: f64) -> Vec<f64> {
        let mut out = vec![0.0];
        match *self {
            SampleSchedule::Periodic { h } => {
                let n = (t_end / h).ceil() as usize;
                out.extend((1..=n).map(|s| s as f64 * h));
            }
            SampleSchedule::Jittered { h_min, h_max, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut t = 0.0;
                while t < t_end {
                    t += if h_max > h_min { rng.random_range(h_min..=h_max) } else { h_min };
                    out.push(t);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trigger {
    /// Continuous measurement and actuation.
    None,
    Matrix(TriggerMatrix),
    /// Shorthand for `Q̃(q0, q1)`.
    Thresholds { q0: f64, q1: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_end: f64,
    pub rk4_step: f64,
    pub schedule: SampleSchedule,
    pub trigger: Trigger,
    /// Defaults to the origin.
    pub x0: Option<DVector<f64>>,
    /// Defaults to zero.
    pub w0: Option<DVector<f64>>,
    pub tail_fraction: f64,
    /// Keep every integration point in the trajectory, not only the summary.
    pub record: bool,
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.rk4_step > 0.0) {
            return bad(format!("rk4_step = {} must be positive", self.rk4_step));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 1.0) {
            return bad(format!("tail_fraction = {} must lie in (0, 1)", self.tail_fraction));
        }
        match self.schedule {
            SampleSchedule::Periodic { h } if !(h > 0.0) => return bad(format!("sampling period {h} must be positive")),
            SampleSchedule::Jittered { h_min, h_max, .. } if !(h_min > 0.0 && h_max >= h_min) => {
                return bad(format!("jitter bounds [{h_min}, {h_max}] are invalid"))
            }
            _ => {}
        }
        if self.trigger != Trigger::None && self.rk4_step > self.schedule.h_min() / 4.0 {
            return bad(format!(
                "rk4_step = {} exceeds a quarter of the shortest sampling interval {}",
                self.rk4_step,
                self.schedule.h_min()
            ));
        }
        Ok(())
    }
}

/// Horizon of fifty time constants of the certified decay rate `α/λ_max(P)`.
pub fn default_t_end(alpha: f64, lambda_max_p: f64) -> f64 {
    50.0 * lambda_max_p / alpha
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    /// Per recorded row: an update event happened at this instant.
    pub row_events: Vec<bool>,
    pub sample_times: Vec<f64>,
    /// Per sample instant: the control input was recomputed.
    pub events: Vec<bool>,
    /// `max ‖y − y_d‖` over the tail window.
    pub regulation_error_tail: f64,
    pub event_rate: f64,
}

impl Trajectory {
    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| **e).count()
    }

    /// CSV with columns `t, x1.., w1.., u1.., y1.., event`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let (nx, nw, nu, ny) = match (self.x.first(), self.w.first(), self.u.first(), self.y.first()) {
            (Some(x), Some(w), Some(u), Some(y)) => (x.len(), w.len(), u.len(), y.len()),
            _ => (0, 0, 0, 0),
        };
        let mut header = vec!["t".to_string()];
        for (p, n) in [("x", nx), ("w", nw), ("u", nu), ("y", ny)] {
            header.extend((1..=n).map(|i| format!("{p}{i}")));
        }
        header.push("event".into());
        wtr.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![fmt_f64(self.times[k])];
            for v in [&self.x[k], &self.w[k], &self.u[k], &self.y[k]] {
                row.extend(v.iter().map(|z| fmt_f64(*z)));
            }
            row.push(if self.row_events[k] { "1" } else { "0" }.into());
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Seventeen significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct Recorder<'a> {
    rec: bool,
    y_d: &'a DVector<f64>,
    tail_start: f64,
    traj: Trajectory,
}

impl<'a> Recorder<'a> {
    fn new(cfg: &SimConfig, y_d: &'a DVector<f64>) -> Self {
        Self {
            rec: cfg.record,
            y_d,
            tail_start: cfg.t_end * (1.0 - cfg.tail_fraction),
            traj: Trajectory::default(),
        }
    }

    fn push(&mut self, t: f64, x: &DVector<f64>, w: &DVector<f64>, u: &DVector<f64>, y: DVector<f64>, event: bool) {
        if t >= self.tail_start {
            let e = (&y - self.y_d).norm();
            if e > self.traj.regulation_error_tail {
                self.traj.regulation_error_tail = e;
            }
        }
        if self.rec {
            self.traj.times.push(t);
            self.traj.x.push(x.clone());
            self.traj.w.push(w.clone());
            self.traj.u.push(u.clone());
            self.traj.y.push(y);
            self.traj.row_events.push(event);
        }
    }

    fn diverged(self, t: f64) -> SimError {
        SimError::NonFiniteState {
            t,
            partial: Box::new(self.traj),
        }
    }
}

fn finite(v: &DVector<f64>) -> bool {
    v.iter().all(|z| z.is_finite() && z.abs() <= DIVERGENCE_GUARD)
}

fn initial_state(model: &PlantModel, cfg: &SimConfig) -> Result<(DVector<f64>, DVector<f64>)> {
    let x = cfg.x0.clone().unwrap_or_else(|| DVector::zeros(model.n_x()));
    let w = cfg.w0.clone().unwrap_or_else(|| DVector::zeros(model.n_u()));
    if x.len() != model.n_x() || w.len() != model.n_u() {
        return Err(SimError::InvalidConfig(format!(
            "initial state sizes ({}, {}) do not match (n_x, n_u) = ({}, {})",
            x.len(),
            w.len(),
            model.n_x(),
            model.n_u()
        )));
    }
    Ok((x, w))
}

fn check_inputs(model: &PlantModel, gains: &ControllerGains, task: &RegulationTask, real: &UncertaintyRealization) -> Result<()> {
    model.check()?;
    gains.check_dims(model)?;
    if task.y_d.len() != model.n_y() {
        return Err(SimError::InvalidConfig(format!("y_d has {} entries, n_y = {}", task.y_d.len(), model.n_y())));
    }
    if real.da.shape() != model.a.shape() || real.db.shape() != model.b.shape() {
        return Err(SimError::InvalidConfig("realization shape does not match the model".into()));
    }
    Ok(())
}

/// Classical RK4 on the coupled `(x, w)` loop with continuous measurements.
pub fn simulate_continuous(
    model: &PlantModel,
    gains: &ControllerGains,
    task: &RegulationTask,
    real: &UncertaintyRealization,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    check_inputs(model, gains, task, real)?;
    cfg.check()?;
    let y_d = &task.y_d;
    let (mut x, mut w) = initial_state(model, cfg)?;
    let input = |x: &DVector<f64>, w: &DVector<f64>| &gains.c_c * w + &gains.d_c * (&model.c * x - y_d);
    let f = |x: &DVector<f64>, w: &DVector<f64>| closed_loop_rhs(model, gains, real, y_d, x, w);
    let n = (cfg.t_end / cfg.rk4_step).ceil() as usize;
    let h = cfg.t_end / n as f64;
    let mut rec = Recorder::new(cfg, y_d);
    rec.push(0.0, &x, &w, &input(&x, &w), &model.c * &x, false);
    for k in 1..=n {
        let (k1x, k1w) = f(&x, &w);
        let (k2x, k2w) = f(&(&x + &k1x * (h / 2.0)), &(&w + &k1w * (h / 2.0)));
        let (k3x, k3w) = f(&(&x + &k2x * (h / 2.0)), &(&w + &k2w * (h / 2.0)));
        let (k4x, k4w) = f(&(&x + &k3x * h), &(&w + &k3w * h));
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        w += (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (h / 6.0);
        let t = k as f64 * h;
        if !finite(&x) || !finite(&w) {
            return Err(rec.diverged(t));
        }
        rec.push(t, &x, &w, &input(&x, &w), &model.c * &x, false);
    }
    let mut traj = rec.traj;
    traj.event_rate = 1.0;
    Ok(traj)
}

/// Aperiodic event-triggered emulation: `w` follows the affine sample-and-hold
/// formula, `u` is recomputed only when the quadratic trigger fires.
pub fn simulate_aetc(
    model: &PlantModel,
    gains: &ControllerGains,
    task: &RegulationTask,
    real: &UncertaintyRealization,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    check_inputs(model, gains, task, real)?;
    cfg.check()?;
    let y_d = &task.y_d;
    let (nu, ny) = (model.n_u(), model.n_y());
    let q = match &cfg.trigger {
        Trigger::None => TriggerMatrix {
            q: DMatrix::zeros(2 * (nu + ny) + 1, 2 * (nu + ny) + 1),
        },
        Trigger::Matrix(q) => q.clone(),
        Trigger::Thresholds { q0, q1 } => qtilde(*q0, *q1, nu + ny),
    };
    if q.q.nrows() != 2 * (nu + ny) + 1 || q.q.ncols() != q.q.nrows() {
        return Err(SimError::InvalidConfig(format!(
            "trigger matrix is {:?}, expected size {}",
            q.q.shape(),
            2 * (nu + ny) + 1
        )));
    }
    let a_star = real.a_star(model);
    let b_star = real.b_star(model);
    let plant = |x: &DVector<f64>, u: &DVector<f64>| &a_star * x + &b_star * u + real.nonlinearity.eval(x);
    let stack = |w: &DVector<f64>, y: &DVector<f64>| -> Vec<f64> { w.iter().chain(y.iter()).copied().collect() };

    let instants = cfg.schedule.instants(cfg.t_end);
    let (mut x, w0) = initial_state(model, cfg)?;
    let mut rec = Recorder::new(cfg, y_d);

    let mut y_s = &model.c * &x;
    let mut w_s = w0;
    let mut u = &gains.c_c * &w_s + &gains.d_c * (&y_s - y_d);
    let mut info_j = stack(&w_s, &y_s);
    let mut events = Vec::with_capacity(instants.len());
    events.push(true);
    rec.push(0.0, &x, &w_s, &u, y_s.clone(), true);

    for s in 1..instants.len() {
        let (t0, t1) = (instants[s - 1], instants[s]);
        let slope = &gains.b_c * (&y_s - y_d);
        let n = ((t1 - t0) / cfg.rk4_step).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        for k in 1..=n {
            let k1 = plant(&x, &u);
            let k2 = plant(&(&x + &k1 * (h / 2.0)), &u);
            let k3 = plant(&(&x + &k2 * (h / 2.0)), &u);
            let k4 = plant(&(&x + &k3 * h), &u);
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let t = if k == n { t1 } else { t0 + k as f64 * h };
            if !finite(&x) {
                return Err(rec.diverged(t));
            }
            if k < n {
                let w = &w_s + &slope * (t - t0);
                rec.push(t, &x, &w, &u, &model.c * &x, false);
            }
        }
        w_s = &w_s + &slope * (t1 - t0);
        y_s = &model.c * &x;
        if !finite(&w_s) {
            return Err(rec.diverged(t1));
        }
        let info_s = stack(&w_s, &y_s);
        let fire = q.form(&info_j, &info_s) >= 0.0;
        if fire {
            u = &gains.c_c * &w_s + &gains.d_c * (&y_s - y_d);
            info_j = info_s;
        }
        events.push(fire);
        rec.push(t1, &x, &w_s, &u, y_s.clone(), fire);
    }
    let mut traj = rec.traj;
    traj.event_rate = events.iter().filter(|e| **e).count() as f64 / events.len() as f64;
    traj.sample_times = instants;
    traj.events = events;
    Ok(traj)
}

/// Dispatches on the trigger: continuous loop for [`Trigger::None`], else AETC.
pub fn simulate(
    model: &PlantModel,
    gains: &ControllerGains,
    task: &RegulationTask,
    real: &UncertaintyRealization,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    match cfg.trigger {
        Trigger::None => simulate_continuous(model, gains, task, real, cfg),
        _ => simulate_aetc(model, gains, task, real, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealizationMode {
    /// Each entry uniform on `[−bound, bound]`.
    Uniform,
    /// Random sign pattern at full magnitude.
    Vertex,
    Custom { da: DMatrix<f64>, db: DMatrix<f64> },
}

fn draw(rng: &mut ChaCha8Rng, bound: &DMatrix<f64>, mode: &RealizationMode) -> DMatrix<f64> {
    DMatrix::from_fn(bound.nrows(), bound.ncols(), |i, j| {
        let b = bound[(i, j)];
        match mode {
            RealizationMode::Vertex => {
                if rng.random::<bool>() {
                    b
                } else {
                    -b
                }
            }
            _ if b > 0.0 => rng.random_range(-b..=b),
            _ => {
                // Keep the stream position independent of the bound pattern.
                let _ = rng.random::<f64>();
                0.0
            }
        }
    })
}

pub fn sample_realization(
    model: &PlantModel,
    mode: &RealizationMode,
    nonlinearity: Nonlinearity,
    rng: &mut ChaCha8Rng,
) -> UncertaintyRealization {
    let (da, db) = match mode {
        RealizationMode::Custom { da, db } => (da.clone(), db.clone()),
        _ => (draw(rng, &model.a_bound, mode), draw(rng, &model.b_bound, mode)),
    };
    UncertaintyRealization { da, db, nonlinearity }
}

/// Generator of repetition `index` in a sweep seeded by `seed`. Every grid
/// point reuses the same realization for a given repetition.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbRow {
    pub k_b: f64,
    /// `sup ‖k(x₁) − k(x₂)‖` of the simulated nonlinearity.
    pub increment_bound: f64,
    pub worst_error: f64,
    pub mean_error: f64,
    /// `ε_c` at `increment_bound`.
    pub bound: f64,
    pub event_rate: f64,
    /// Runs that diverged or failed.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRow {
    pub xi: f64,
    pub q0: f64,
    pub q1: f64,
    pub h_bar: f64,
    pub h_max: Bound,
    pub eps_d: Bound,
    pub f1: Bound,
    pub f2: Bound,
    pub worst_error: f64,
    pub mean_error: f64,
    pub event_rate: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub reps: usize,
    pub seed: u64,
    pub mode: RealizationMode,
}

struct Stats {
    worst: f64,
    mean: f64,
    rate: f64,
    failures: usize,
}

fn run_tasks<F>(n_grid: usize, reps: usize, run: F) -> Vec<Stats>
where
    F: Fn(usize, usize) -> Result<Trajectory> + Sync,
{
    let results: Vec<Result<Trajectory>> = (0..n_grid * reps)
        .into_par_iter()
        .map(|t| run(t / reps, t % reps))
        .collect();
    results
        .chunks(reps.max(1))
        .map(|chunk| {
            let ok: Vec<&Trajectory> = chunk.iter().filter_map(|r| r.as_ref().ok()).collect();
            let failures = chunk.len() - ok.len();
            let worst = if failures > 0 {
                f64::INFINITY
            } else {
                ok.iter().map(|t| t.regulation_error_tail).fold(0.0, f64::max)
            };
            let n = ok.len().max(1) as f64;
            Stats {
                worst,
                mean: ok.iter().map(|t| t.regulation_error_tail).sum::<f64>() / n,
                rate: ok.iter().map(|t| t.event_rate).sum::<f64>() / n,
                failures,
            }
        })
        .collect()
}

/// Continuous-loop error against `ε_c` over a grid of sinusoid amplitudes.
pub fn sweep_kb(
    model: &PlantModel,
    cert: &SynthesisCertificate,
    task: &RegulationTask,
    kb_grid: &[f64],
    settings: &SweepSettings,
    cfg: &SimConfig,
) -> Result<Vec<KbRow>> {
    let mut cont = cfg.clone();
    cont.trigger = Trigger::None;
    cont.record = false;
    cont.check()?;
    let gains = &cert.gains;
    let stats = run_tasks(kb_grid.len(), settings.reps, |g, r| {
        let mut rng = task_rng(settings.seed, r as u64);
        let nl = Nonlinearity::sinusoid(kb_grid[g]);
        let real = sample_realization(model, &settings.mode, nl, &mut rng);
        simulate_continuous(model, gains, task, &real, &cont)
    });
    Ok(kb_grid
        .iter()
        .zip(stats)
        .map(|(&kb, s)| {
            let inc = Nonlinearity::sinusoid(kb).increment_bound(model.n_x()).unwrap_or(f64::INFINITY);
            KbRow {
                k_b: kb,
                increment_bound: inc,
                worst_error: s.worst,
                mean_error: s.mean,
                bound: eps_c_value(inc, cert.norm_cbar, &cert.p, cert.objective),
                event_rate: s.rate,
                failures: s.failures,
            }
        })
        .collect())
}

/// AETC error and event rate against `ε_d` over thresholds `q0 = q1 = ξ`.
#[allow(clippy::too_many_arguments)]
pub fn sweep_threshold(
    model: &PlantModel,
    cert: &SynthesisCertificate,
    constants: &EtcConstants,
    task: &RegulationTask,
    xi_grid: &[f64],
    nonlinearity_kb: f64,
    settings: &SweepSettings,
    cfg: &SimConfig,
) -> Result<Vec<ThresholdRow>> {
    let mut base = cfg.clone();
    base.record = false;
    if base.trigger == Trigger::None {
        base.trigger = Trigger::Thresholds { q0: 0.0, q1: 0.0 };
    }
    base.check()?;
    let gains = &cert.gains;
    let nl = || {
        if nonlinearity_kb > 0.0 {
            Nonlinearity::sinusoid(nonlinearity_kb)
        } else {
            Nonlinearity::None
        }
    };
    let k_b = nl().increment_bound(model.n_x()).unwrap_or(f64::INFINITY);
    let stats = run_tasks(xi_grid.len(), settings.reps, |g, r| {
        let mut rng = task_rng(settings.seed, r as u64);
        let real = sample_realization(model, &settings.mode, nl(), &mut rng);
        let mut c = base.clone();
        c.trigger = Trigger::Thresholds {
            q0: xi_grid[g],
            q1: xi_grid[g],
        };
        simulate_aetc(model, gains, task, &real, &c)
    });
    let h_bar = base.schedule.h_bar();
    Ok(xi_grid
        .iter()
        .zip(stats)
        .map(|(&xi, s)| {
            let etc = etc_certificate(constants.clone(), cert.alpha, cert.zeta, xi, xi, h_bar, k_b);
            ThresholdRow {
                xi,
                q0: xi,
                q1: xi,
                h_bar,
                h_max: etc.h_max,
                eps_d: eps_d(constants, cert.alpha, cert.zeta, h_bar, xi, xi, k_b),
                f1: etc.f1,
                f2: etc.f2,
                worst_error: s.worst,
                mean_error: s.mean,
                event_rate: s.rate,
                failures: s.failures,
            }
        })
        .collect())
}

fn fmt_bound(b: Bound) -> String {
    match b {
        Bound::Defined(v) => fmt_f64(v),
        Bound::Undefined => "undefined".into(),
    }
}

pub fn write_kb_csv<W: Write>(rows: &[KbRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["kb", "increment_bound", "worst_error", "mean_error", "eps_c", "event_rate", "failures"])?;
    for r in rows {
        wtr.write_record([
            fmt_f64(r.k_b),
            fmt_f64(r.increment_bound),
            fmt_f64(r.worst_error),
            fmt_f64(r.mean_error),
            fmt_f64(r.bound),
            fmt_f64(r.event_rate),
            r.failures.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_threshold_csv<W: Write>(rows: &[ThresholdRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "xi",
        "q0",
        "q1",
        "h_bar",
        "h_max",
        "eps_d",
        "f1",
        "f2",
        "worst_error",
        "mean_error",
        "event_rate",
        "failures",
    ])?;
    for r in rows {
        wtr.write_record([
            fmt_f64(r.xi),
            fmt_f64(r.q0),
            fmt_f64(r.q1),
            fmt_f64(r.h_bar),
            fmt_bound(r.h_max),
            fmt_bound(r.eps_d),
            fmt_bound(r.f1),
            fmt_bound(r.f2),
            fmt_f64(r.worst_error),
            fmt_f64(r.mean_error),
            fmt_f64(r.event_rate),
            r.failures.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
