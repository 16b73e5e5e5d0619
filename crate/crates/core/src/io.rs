//! TOML file formats for problems, gains, certificates, ETC bounds and
//! simulation or sweep configurations.
//!
//! Matrices are arrays of rows. Floats are written in shortest round-trip form,
//! so reading a written file reproduces every value bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use robreg_conic::SolveStatus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::etc_bounds::{Bound, EtcCertificate, EtcConstants, MaxMethod, TriggerMatrix};
use crate::model::{ControllerGains, ModelError, Nonlinearity, PlantModel, RegulationTask};
use crate::sim::{RealizationMode, SampleSchedule, SimConfig, SweepSettings, Trigger, DEFAULT_TAIL_FRACTION};
use crate::synthesis::{SynthesisCertificate, SynthesisOptions, ZetaDiagnostic};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid {what}: {message}")]
    Invalid { what: &'static str, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("serialize: {0}")]
    Serialize(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, IoError>;

type Rows = Vec<Vec<f64>>;

fn invalid(what: &'static str, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        what,
        message: message.into(),
    }
}

pub fn matrix_from_rows(what: &'static str, rows: &Rows) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(invalid(what, format!("row {i} has {} entries, expected {ncols}", r.len())));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn read_toml<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| IoError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value)?;
    fs::write(path, text).map_err(|source| IoError::Write {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: Rows,
    pub b: Rows,
    pub c: Rows,
    /// Zero when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_bound: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_bound: Option<Rows>,
    #[serde(default)]
    pub k_b: f64,
}

impl ModelSection {
    pub fn to_model(&self) -> Result<PlantModel> {
        let a = matrix_from_rows("model.a", &self.a)?;
        let b = matrix_from_rows("model.b", &self.b)?;
        let c = matrix_from_rows("model.c", &self.c)?;
        let a_bound = match &self.a_bound {
            Some(r) => matrix_from_rows("model.a_bound", r)?,
            None => DMatrix::zeros(a.nrows(), a.ncols()),
        };
        let b_bound = match &self.b_bound {
            Some(r) => matrix_from_rows("model.b_bound", r)?,
            None => DMatrix::zeros(b.nrows(), b.ncols()),
        };
        Ok(PlantModel::new(a, b, c, a_bound, b_bound, self.k_b)?)
    }

    pub fn from_model(m: &PlantModel) -> Self {
        Self {
            a: matrix_to_rows(&m.a),
            b: matrix_to_rows(&m.b),
            c: matrix_to_rows(&m.c),
            a_bound: Some(matrix_to_rows(&m.a_bound)),
            b_bound: Some(matrix_to_rows(&m.b_bound)),
            k_b: m.k_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub y_d: Vec<f64>,
    #[serde(default)]
    pub epsilon_request: f64,
}

impl TaskSection {
    pub fn to_task(&self) -> RegulationTask {
        RegulationTask {
            y_d: DVector::from_vec(self.y_d.clone()),
            epsilon_request: self.epsilon_request,
        }
    }

    pub fn from_task(t: &RegulationTask) -> Self {
        Self {
            y_d: t.y_d.iter().copied().collect(),
            epsilon_request: t.epsilon_request,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub eps_alg: Option<f64>,
    pub max_outer: Option<usize>,
    pub zeta_grid: Option<Vec<f64>>,
    pub gain_bound: Option<f64>,
    pub tol: Option<f64>,
    pub solver_max_iter: Option<usize>,
}

impl SynthesisSection {
    pub fn to_options(&self) -> SynthesisOptions {
        let mut o = SynthesisOptions::default();
        if let Some(v) = self.eps_alg {
            o.eps_alg = v;
        }
        if let Some(v) = self.max_outer {
            o.max_outer = v;
        }
        if let Some(v) = &self.zeta_grid {
            o.zeta_grid = v.clone();
        }
        o.gain_bound = self.gain_bound;
        if let Some(v) = self.tol {
            o.solver.tol = v;
        }
        if let Some(v) = self.solver_max_iter {
            o.solver.max_iter = v;
        }
        o
    }
}

/// Model, regulation task and optional synthesis settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub model: ModelSection,
    pub task: TaskSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<SynthesisSection>,
}

impl ProblemFile {
    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }

    pub fn parts(&self) -> Result<(PlantModel, RegulationTask, SynthesisOptions)> {
        let opts = self.synthesis.clone().unwrap_or_default().to_options();
        Ok((self.model.to_model()?, self.task.to_task(), opts))
    }

    pub fn new(model: &PlantModel, task: &RegulationTask) -> Self {
        Self {
            model: ModelSection::from_model(model),
            task: TaskSection::from_task(task),
            synthesis: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub b_c: Rows,
    pub c_c: Rows,
    pub d_c: Rows,
}

impl GainsSection {
    pub fn to_gains(&self) -> Result<ControllerGains> {
        Ok(ControllerGains {
            b_c: matrix_from_rows("gains.b_c", &self.b_c)?,
            c_c: matrix_from_rows("gains.c_c", &self.c_c)?,
            d_c: matrix_from_rows("gains.d_c", &self.d_c)?,
        })
    }

    pub fn from_gains(g: &ControllerGains) -> Self {
        Self {
            b_c: matrix_to_rows(&g.b_c),
            c_c: matrix_to_rows(&g.c_c),
            d_c: matrix_to_rows(&g.d_c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsFile {
    pub gains: GainsSection,
}

impl GainsFile {
    pub fn read(path: &Path) -> Result<ControllerGains> {
        read_toml::<Self>(path)?.gains.to_gains()
    }

    pub fn write(path: &Path, g: &ControllerGains) -> Result<()> {
        write_toml(
            path,
            &Self {
                gains: GainsSection::from_gains(g),
            },
        )
    }
}

fn status_name(s: SolveStatus) -> &'static str {
    match s {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Feasible => "feasible",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::Unbounded => "unbounded",
        SolveStatus::NumericalFailure => "numerical_failure",
    }
}

fn parse_status(s: &str) -> Result<SolveStatus> {
    Ok(match s {
        "optimal" => SolveStatus::Optimal,
        "feasible" => SolveStatus::Feasible,
        "infeasible" => SolveStatus::Infeasible,
        "unbounded" => SolveStatus::Unbounded,
        "numerical_failure" => SolveStatus::NumericalFailure,
        other => return Err(invalid("diagnostic status", other)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticSection {
    pub zeta: f64,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub iterations: usize,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateSection {
    pub alpha: f64,
    pub zeta: f64,
    pub objective: f64,
    pub norm_cbar: f64,
    pub k_b: f64,
    pub eps_c: f64,
    pub p: Rows,
    pub kappa: Rows,
    pub mu: Rows,
    pub gains: GainsSection,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticSection>,
}

impl CertificateSection {
    pub fn from_certificate(c: &SynthesisCertificate) -> Self {
        Self {
            alpha: c.alpha,
            zeta: c.zeta,
            objective: c.objective,
            norm_cbar: c.norm_cbar,
            k_b: c.k_b,
            eps_c: c.eps_c,
            p: matrix_to_rows(&c.p),
            kappa: matrix_to_rows(&c.kappa),
            mu: matrix_to_rows(&c.mu),
            gains: GainsSection::from_gains(&c.gains),
            diagnostics: c
                .diagnostics
                .iter()
                .map(|d| DiagnosticSection {
                    zeta: d.zeta,
                    status: status_name(d.status).into(),
                    alpha: d.alpha,
                    iterations: d.iterations,
                    violation: d.violation,
                })
                .collect(),
        }
    }

    pub fn to_certificate(&self) -> Result<SynthesisCertificate> {
        let diagnostics = self
            .diagnostics
            .iter()
            .map(|d| {
                Ok(ZetaDiagnostic {
                    zeta: d.zeta,
                    status: parse_status(&d.status)?,
                    alpha: d.alpha,
                    iterations: d.iterations,
                    violation: d.violation,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SynthesisCertificate {
            p: matrix_from_rows("certificate.p", &self.p)?,
            alpha: self.alpha,
            zeta: self.zeta,
            kappa: matrix_from_rows("certificate.kappa", &self.kappa)?,
            mu: matrix_from_rows("certificate.mu", &self.mu)?,
            gains: self.gains.to_gains()?,
            norm_cbar: self.norm_cbar,
            k_b: self.k_b,
            eps_c: self.eps_c,
            objective: self.objective,
            diagnostics,
        })
    }
}

/// A certificate together with the problem it certifies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub model: ModelSection,
    pub task: TaskSection,
    pub certificate: CertificateSection,
}

impl CertificateFile {
    pub fn new(model: &PlantModel, task: &RegulationTask, cert: &SynthesisCertificate) -> Self {
        Self {
            model: ModelSection::from_model(model),
            task: TaskSection::from_task(task),
            certificate: CertificateSection::from_certificate(cert),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }

    pub fn parts(&self) -> Result<(PlantModel, RegulationTask, SynthesisCertificate)> {
        let model = self.model.to_model()?;
        let cert = self.certificate.to_certificate()?;
        let n = model.n_x() + model.n_u();
        if cert.p.shape() != (n, n) {
            return Err(invalid("certificate.p", format!("shape {:?}, expected ({n}, {n})", cert.p.shape())));
        }
        cert.gains.check_dims(&model)?;
        Ok((model, self.task.to_task(), cert))
    }
}

/// A bound written as a number or the string `"undefined"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundValue {
    Value(f64),
    Text(String),
}

impl From<Bound> for BoundValue {
    fn from(b: Bound) -> Self {
        match b {
            Bound::Defined(v) => BoundValue::Value(v),
            Bound::Undefined => BoundValue::Text("undefined".into()),
        }
    }
}

impl BoundValue {
    pub fn to_bound(&self) -> Result<Bound> {
        match self {
            BoundValue::Value(v) => Ok(Bound::Defined(*v)),
            BoundValue::Text(s) if s == "undefined" => Ok(Bound::Undefined),
            BoundValue::Text(s) => Err(invalid("bound", format!("expected a number or \"undefined\", got {s:?}"))),
        }
    }
}

fn method_name(m: MaxMethod) -> String {
    match m {
        MaxMethod::Vertex => "vertex".into(),
        MaxMethod::Triangle => "triangle".into(),
    }
}

fn parse_method(s: &str) -> Result<MaxMethod> {
    match s {
        "vertex" => Ok(MaxMethod::Vertex),
        "triangle" => Ok(MaxMethod::Triangle),
        other => Err(invalid("max method", other)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    pub beta: f64,
    pub rho_b: f64,
    pub rho_ab: f64,
    pub theta_b: f64,
    pub theta_ab: f64,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub norm_cbar: f64,
    pub theta_b_method: String,
    pub theta_ab_method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtcSection {
    pub q0: f64,
    pub q1: f64,
    pub h_bar: f64,
    pub k_b: f64,
    pub h_max: BoundValue,
    pub f1: BoundValue,
    pub f2: BoundValue,
    pub eps_d: BoundValue,
    pub constants: ConstantsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EtcFile {
    pub etc: EtcSection,
}

impl EtcFile {
    pub fn new(e: &EtcCertificate, k_b: f64) -> Self {
        let c = &e.constants;
        Self {
            etc: EtcSection {
                q0: e.q0,
                q1: e.q1,
                h_bar: e.h_bar,
                k_b,
                h_max: e.h_max.into(),
                f1: e.f1.into(),
                f2: e.f2.into(),
                eps_d: e.eps_d.into(),
                constants: ConstantsSection {
                    beta: c.beta,
                    rho_b: c.rho_b,
                    rho_ab: c.rho_ab,
                    theta_b: c.theta_b,
                    theta_ab: c.theta_ab,
                    lambda_min_p: c.lambda_min_p,
                    lambda_max_p: c.lambda_max_p,
                    norm_cbar: c.norm_cbar,
                    theta_b_method: method_name(c.theta_b_method),
                    theta_ab_method: method_name(c.theta_ab_method),
                },
            },
        }
    }

    pub fn to_certificate(&self) -> Result<EtcCertificate> {
        let s = &self.etc;
        let c = &s.constants;
        Ok(EtcCertificate {
            constants: EtcConstants {
                beta: c.beta,
                rho_b: c.rho_b,
                rho_ab: c.rho_ab,
                theta_b: c.theta_b,
                theta_ab: c.theta_ab,
                lambda_min_p: c.lambda_min_p,
                lambda_max_p: c.lambda_max_p,
                norm_cbar: c.norm_cbar,
                theta_b_method: parse_method(&c.theta_b_method)?,
                theta_ab_method: parse_method(&c.theta_ab_method)?,
            },
            q0: s.q0,
            q1: s.q1,
            h_bar: s.h_bar,
            h_max: s.h_max.to_bound()?,
            f1: s.f1.to_bound()?,
            f2: s.f2.to_bound()?,
            eps_d: s.eps_d.to_bound()?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_toml(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSection {
    Periodic { h: f64 },
    Jittered { h_min: f64, h_max: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TriggerSection {
    None,
    Matrix { q: Rows },
    Thresholds { q0: f64, q1: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RealizationSection {
    Nominal,
    Uniform { seed: u64 },
    Vertex { seed: u64 },
    Custom { da: Rows, db: Rows },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySection {
    None,
    /// `k(x) = k_b/2 · sin(x)` coordinate-wise.
    Sinusoid { k_b: f64 },
    Constant { value: Vec<f64> },
}

impl NonlinearitySection {
    pub fn to_nonlinearity(&self) -> Nonlinearity {
        match self {
            NonlinearitySection::None => Nonlinearity::None,
            NonlinearitySection::Sinusoid { k_b } => Nonlinearity::sinusoid(*k_b),
            NonlinearitySection::Constant { value } => Nonlinearity::Constant(DVector::from_vec(value.clone())),
        }
    }
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_FRACTION
}

fn default_trigger() -> TriggerSection {
    TriggerSection::None
}

fn default_nonlinearity() -> NonlinearitySection {
    NonlinearitySection::None
}

fn default_realization() -> RealizationSection {
    RealizationSection::Nominal
}

/// Integration and sampling settings shared by simulation and sweep files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    pub t_end: f64,
    pub rk4_step: f64,
    pub schedule: ScheduleSection,
    #[serde(default = "default_trigger")]
    pub trigger: TriggerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default)]
    pub record: bool,
}

impl SimSection {
    pub fn to_config(&self) -> Result<SimConfig> {
        let schedule = match self.schedule {
            ScheduleSection::Periodic { h } => SampleSchedule::Periodic { h },
            ScheduleSection::Jittered { h_min, h_max, seed } => SampleSchedule::Jittered { h_min, h_max, seed },
        };
        let trigger = match &self.trigger {
            TriggerSection::None => Trigger::None,
            TriggerSection::Matrix { q } => {
                let q = matrix_from_rows("trigger.q", q)?;
                if q.nrows() != q.ncols() || q.nrows() % 2 == 0 {
                    return Err(invalid("trigger.q", format!("shape {:?} is not square of odd size", q.shape())));
                }
                Trigger::Matrix(TriggerMatrix { q })
            }
            TriggerSection::Thresholds { q0, q1 } => Trigger::Thresholds { q0: *q0, q1: *q1 },
        };
        Ok(SimConfig {
            t_end: self.t_end,
            rk4_step: self.rk4_step,
            schedule,
            trigger,
            x0: self.x0.clone().map(DVector::from_vec),
            w0: self.w0.clone().map(DVector::from_vec),
            tail_fraction: self.tail_fraction,
            record: self.record,
        })
    }
}

/// One closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    pub sim: SimSection,
    #[serde(default = "default_realization")]
    pub realization: RealizationSection,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: NonlinearitySection,
}

impl SimFile {
    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Sinusoid amplitude sweep under the continuous controller.
    Kb,
    /// Threshold sweep `q0 = q1 = ξ` under AETC.
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    Uniform,
    Vertex,
}

fn default_sweep_mode() -> SweepMode {
    SweepMode::Uniform
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sweep_mode")]
    pub mode: SweepMode,
    /// Sinusoid `k_b` applied during a threshold sweep.
    #[serde(default)]
    pub k_b: f64,
}

impl SweepSection {
    pub fn settings(&self) -> SweepSettings {
        SweepSettings {
            reps: self.reps,
            seed: self.seed,
            mode: match self.mode {
                SweepMode::Uniform => RealizationMode::Uniform,
                SweepMode::Vertex => RealizationMode::Vertex,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub sweep: SweepSection,
    pub sim: SimSection,
}

impl SweepFile {
    pub fn read(path: &Path) -> Result<Self> {
        read_toml(path)
    }
}
