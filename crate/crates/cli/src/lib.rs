//! Command implementations behind the `robreg` binary.
//!
//! Every command writes its outputs and a `manifest.toml` into the output
//! directory. Exit codes: 0 success, 2 domain failure, 1 usage or IO error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use robreg_core::etc_bounds::{etc_certificate, etc_constants, h_max_best, q1_perfect_tracking_bound, Bound, EtcConstants};
use robreg_core::io::{
    CertificateFile, EtcFile, GainsFile, NonlinearitySection, ProblemFile, RealizationSection, ScheduleSection,
    SimFile, SimSection, SweepFile, SweepKind, SweepMode, SweepSection, SynthesisSection, TriggerSection,
};
use robreg_core::model::{augment, example1, validate_model, ControllerGains, PlantModel, RegulationTask};
use robreg_core::sim::{
    fmt_f64, sample_realization, simulate, sweep_kb, sweep_threshold, task_rng, write_kb_csv, write_threshold_csv,
    KbRow, RealizationMode, SimError, ThresholdRow,
};
use robreg_core::synthesis::{certify_with, synthesize, IterationTrace, SynthesisCertificate, SynthesisError, SynthesisOptions};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    /// The inputs are well formed but the requested guarantee does not hold.
    #[error("{reason}: {detail}")]
    Domain { reason: String, detail: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain { .. } => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Domain { .. } => "domain",
        }
    }

    /// Single-line `key=value` record for the diagnostic stream.
    pub fn structured(&self) -> String {
        let (reason, detail) = match self {
            CliError::Usage(d) => ("usage", d.as_str()),
            CliError::Io(d) => ("io", d.as_str()),
            CliError::Domain { reason, detail } => (reason.as_str(), detail.as_str()),
        };
        format!(
            "robreg-error code={} kind={} reason={:?} detail={:?}",
            self.exit_code(),
            self.kind(),
            reason,
            detail
        )
    }

    fn domain(reason: &str, detail: impl Into<String>) -> Self {
        CliError::Domain {
            reason: reason.into(),
            detail: detail.into(),
        }
    }
}

impl From<robreg_core::io::IoError> for CliError {
    fn from(e: robreg_core::io::IoError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SynthesisError> for CliError {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::StalledBelowZero { .. } => CliError::domain("alpha not positive", e.to_string()),
            SynthesisError::AllSolvesFailed { .. } | SynthesisError::InitializationInfeasible(_) => {
                CliError::domain("certification failed", e.to_string())
            }
            SynthesisError::InvalidOption(_) | SynthesisError::DimensionMismatch(_) | SynthesisError::Model(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::domain("solver failure", e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonFiniteState { .. } => CliError::domain("diverged", e.to_string()),
            SimError::Io(_) | SimError::Csv(_) => CliError::Io(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Flags shared by every command.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptions {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub jobs: Option<usize>,
    pub out_dir: PathBuf,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self {
            seed: None,
            tol: None,
            max_iter: None,
            jobs: None,
            out_dir: PathBuf::from("robreg-out"),
        }
    }
}

impl GlobalOptions {
    fn apply(&self, opts: &mut SynthesisOptions) {
        if let Some(t) = self.tol {
            opts.solver.tol = t;
        }
        if let Some(m) = self.max_iter {
            opts.max_outer = m;
        }
    }

    /// Runs `f` on a worker pool of `jobs` threads, or the global pool.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.jobs {
            Some(0) => Err(CliError::Usage("--jobs must be at least 1".into())),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Usage(e.to_string()))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub config_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub version: String,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest over the contents of the input files, in order.
pub fn digest_inputs(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Output directory plus the list of files written so far.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        self.dir.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entries(&self) -> Vec<OutputEntry> {
        self.files
            .iter()
            .filter_map(|f| {
                fs::read(self.dir.join(f)).ok().map(|b| OutputEntry {
                    file: f.clone(),
                    sha256: sha256_hex(&b),
                })
            })
            .collect()
    }

    pub fn manifest(&mut self, command: &str, status: &str, digest: String, seed: Option<u64>, started: Instant) -> Result<RunManifest> {
        let m = RunManifest {
            command: command.to_string(),
            status: status.to_string(),
            config_digest: digest,
            seed,
            version: VERSION.to_string(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            outputs: self.entries(),
        };
        let text = toml::to_string(&m).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(self.dir.join(MANIFEST), text).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(m)
    }
}

/// Runs a command body and writes the manifest whether it succeeds or not.
fn with_manifest<T>(
    command: &str,
    g: &GlobalOptions,
    digest: String,
    seed: Option<u64>,
    body: impl FnOnce(&mut Outputs) -> Result<T>,
) -> Result<T> {
    let started = Instant::now();
    let mut out = Outputs::create(&g.out_dir)?;
    let res = body(&mut out);
    let status = match &res {
        Ok(_) => "ok",
        Err(e) => e.kind(),
    };
    out.manifest(command, status, digest, seed, started)?;
    res
}

fn write_certificate(out: &mut Outputs, name: &str, model: &PlantModel, task: &RegulationTask, cert: &SynthesisCertificate) -> Result<()> {
    CertificateFile::new(model, task, cert).write(&out.path(name))?;
    Ok(())
}

pub fn write_trace_csv(trace: &IterationTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let io = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["iteration", "zeta", "alpha", "objective", "step_alpha", "accepted", "solves", "note"])
        .map_err(io)?;
    for r in &trace.records {
        w.write_record([
            r.iteration.to_string(),
            fmt_f64(r.zeta),
            fmt_f64(r.alpha),
            fmt_f64(r.objective),
            fmt_f64(r.step_alpha),
            r.accepted.to_string(),
            r.solves.to_string(),
            r.note.clone(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_validate(path: &Path, g: &GlobalOptions) -> Result<Vec<String>> {
    let bytes = read_bytes(path)?;
    with_manifest("validate", g, digest_inputs(&[&bytes]), None, |_| {
        let (model, task, _) = ProblemFile::read(path)?.parts()?;
        let report = validate_model(&model, &task).map_err(|e| CliError::Usage(e.to_string()))?;
        let mut lines: Vec<String> = report
            .checks
            .iter()
            .map(|(name, ok)| format!("{name}: {}", if *ok { "ok" } else { "failed" }))
            .collect();
        lines.extend(report.warnings.iter().map(|w| format!("warning: {w}")));
        if !report.passed() {
            return Err(CliError::domain("validation failed", lines.join("; ")));
        }
        Ok(lines)
    })
}

pub fn cmd_synthesize(path: &Path, gain_bound: Option<f64>, g: &GlobalOptions) -> Result<SynthesisCertificate> {
    let bytes = read_bytes(path)?;
    with_manifest("synthesize", g, digest_inputs(&[&bytes]), None, |out| {
        let (model, task, mut opts) = ProblemFile::read(path)?.parts()?;
        g.apply(&mut opts);
        if gain_bound.is_some() {
            opts.gain_bound = gain_bound;
        }
        let res = g.install(|| synthesize(&model, &opts))?;
        match res {
            Ok((gains, cert, trace)) => {
                GainsFile::write(&out.path("gains.toml"), &gains)?;
                write_certificate(out, "certificate.toml", &model, &task, &cert)?;
                write_trace_csv(&trace, &out.path("trace.csv"))?;
                Ok(cert)
            }
            Err(SynthesisError::StalledBelowZero {
                certificate, trace, ..
            }) => {
                write_certificate(out, "certificate.toml", &model, &task, &certificate)?;
                write_trace_csv(&trace, &out.path("trace.csv"))?;
                Err(CliError::domain(
                    "alpha not positive",
                    format!("synthesis stalled at alpha/zeta = {:e}", certificate.objective),
                ))
            }
            Err(e) => Err(e.into()),
        }
    })
}

pub fn cmd_certify(problem: &Path, gains_path: &Path, zeta_grid: Option<Vec<f64>>, g: &GlobalOptions) -> Result<SynthesisCertificate> {
    let digest = digest_inputs(&[&read_bytes(problem)?, &read_bytes(gains_path)?]);
    with_manifest("certify", g, digest, None, |out| {
        let (model, task, mut opts) = ProblemFile::read(problem)?.parts()?;
        g.apply(&mut opts);
        let gains = GainsFile::read(gains_path)?;
        let grid = zeta_grid.unwrap_or(opts.zeta_grid.clone());
        let cert = g.install(|| certify_with(&model, &gains, &grid, &opts.solver))??;
        write_certificate(out, "certificate.toml", &model, &task, &cert)?;
        if !cert.certified() {
            return Err(CliError::domain(
                "alpha not positive",
                format!("best alpha/zeta = {:e}", cert.objective),
            ));
        }
        Ok(cert)
    })
}

fn load_certificate(path: &Path) -> Result<(PlantModel, RegulationTask, SynthesisCertificate, EtcConstants)> {
    let (model, task, cert) = CertificateFile::read(path)?.parts()?;
    let constants = constants_of(&model, &cert.gains, &cert)?;
    Ok((model, task, cert, constants))
}

fn constants_of(model: &PlantModel, gains: &ControllerGains, cert: &SynthesisCertificate) -> Result<EtcConstants> {
    let aug = augment(model, gains).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(etc_constants(&aug, model, &cert.p, gains))
}

fn require_certified(cert: &SynthesisCertificate) -> Result<()> {
    if cert.certified() {
        Ok(())
    } else {
        Err(CliError::domain(
            "alpha not positive",
            format!("certificate has alpha/zeta = {:e}", cert.objective),
        ))
    }
}

pub fn cmd_etc_bounds(
    cert_path: &Path,
    q0: f64,
    q1: f64,
    h_bar: f64,
    k_b: Option<f64>,
    g: &GlobalOptions,
) -> Result<robreg_core::etc_bounds::EtcCertificate> {
    let digest = digest_inputs(&[&read_bytes(cert_path)?, format!("{q0:e} {q1:e} {h_bar:e} {k_b:?}").as_bytes()]);
    with_manifest("etc-bounds", g, digest, None, |out| {
        if !(q0 >= 0.0 && q1 >= 0.0 && h_bar > 0.0) {
            return Err(CliError::Usage("q0, q1 must be nonnegative and h_bar positive".into()));
        }
        let (model, _, cert, constants) = load_certificate(cert_path)?;
        require_certified(&cert)?;
        let k_b = k_b.unwrap_or(model.k_b);
        let etc = etc_certificate(constants, cert.alpha, cert.zeta, q0, q1, h_bar, k_b);
        EtcFile::new(&etc, k_b).write(&out.path("etc.toml"))?;
        match (etc.h_max, etc.eps_d) {
            (Bound::Undefined, _) => Err(CliError::domain(
                "h_max undefined",
                format!(
                    "q1 = {q1:e} is not below the perfect-tracking bound {:e}",
                    q1_perfect_tracking_bound(&etc.constants, cert.alpha)
                ),
            )),
            (Bound::Defined(h), Bound::Undefined) => Err(CliError::domain(
                "eps_d undefined",
                format!("h_bar = {h_bar:e} exceeds h_max = {h:e}"),
            )),
            _ => Ok(etc),
        }
    })
}

fn realization_of(model: &PlantModel, r: &RealizationSection, nl: &NonlinearitySection, seed: Option<u64>) -> Result<robreg_core::model::UncertaintyRealization> {
    let nonlinearity = nl.to_nonlinearity();
    if let robreg_core::model::Nonlinearity::Constant(v) = &nonlinearity {
        if v.len() != model.n_x() {
            return Err(CliError::Usage(format!("constant nonlinearity has {} entries, n_x = {}", v.len(), model.n_x())));
        }
    }
    let (mode, s) = match r {
        RealizationSection::Nominal => {
            let mut real = robreg_core::model::UncertaintyRealization::nominal(model);
            real.nonlinearity = nonlinearity;
            return Ok(real);
        }
        RealizationSection::Uniform { seed: s } => (RealizationMode::Uniform, *s),
        RealizationSection::Vertex { seed: s } => (RealizationMode::Vertex, *s),
        RealizationSection::Custom { da, db } => (
            RealizationMode::Custom {
                da: robreg_core::io::matrix_from_rows("realization.da", da)?,
                db: robreg_core::io::matrix_from_rows("realization.db", db)?,
            },
            0,
        ),
    };
    let mut rng = task_rng(seed.unwrap_or(s), 0);
    let real = sample_realization(model, &mode, nonlinearity, &mut rng);
    if !real.in_box(model) {
        return Err(CliError::Usage("realization lies outside the uncertainty box".into()));
    }
    Ok(real)
}

pub fn cmd_simulate(cert_path: &Path, sim_path: &Path, g: &GlobalOptions) -> Result<robreg_core::sim::Trajectory> {
    let digest = digest_inputs(&[&read_bytes(cert_path)?, &read_bytes(sim_path)?]);
    with_manifest("simulate", g, digest, g.seed, |out| {
        let (model, task, cert) = CertificateFile::read(cert_path)?.parts()?;
        let file = SimFile::read(sim_path)?;
        let mut cfg = file.sim.to_config()?;
        cfg.record = true;
        let real = realization_of(&model, &file.realization, &file.nonlinearity, g.seed)?;
        let path = out.path("trajectory.csv");
        match simulate(&model, &cert.gains, &task, &real, &cfg) {
            Ok(traj) => {
                traj.write_csv(fs::File::create(&path)?)?;
                Ok(traj)
            }
            Err(SimError::NonFiniteState { t, partial }) => {
                partial.write_csv(fs::File::create(&path)?)?;
                Err(CliError::domain("diverged", format!("state exceeded the divergence guard at t = {t:e}")))
            }
            Err(e) => Err(e.into()),
        }
    })
}

pub enum SweepTable {
    Kb(Vec<KbRow>),
    Threshold(Vec<ThresholdRow>),
}

fn run_sweep(
    model: &PlantModel,
    task: &RegulationTask,
    cert: &SynthesisCertificate,
    constants: &EtcConstants,
    sweep: &SweepFile,
    seed: Option<u64>,
) -> Result<SweepTable> {
    let mut settings = sweep.sweep.settings();
    if let Some(s) = seed {
        settings.seed = s;
    }
    if sweep.sweep.reps == 0 || sweep.sweep.grid.is_empty() {
        return Err(CliError::Usage("sweep needs a nonempty grid and reps >= 1".into()));
    }
    let cfg = sweep.sim.to_config()?;
    Ok(match sweep.sweep.kind {
        SweepKind::Kb => SweepTable::Kb(sweep_kb(model, cert, task, &sweep.sweep.grid, &settings, &cfg)?),
        SweepKind::Threshold => SweepTable::Threshold(sweep_threshold(
            model,
            cert,
            constants,
            task,
            &sweep.sweep.grid,
            sweep.sweep.k_b,
            &settings,
            &cfg,
        )?),
    })
}

fn write_table(table: &SweepTable, path: &Path) -> Result<()> {
    let f = fs::File::create(path)?;
    match table {
        SweepTable::Kb(rows) => write_kb_csv(rows, f)?,
        SweepTable::Threshold(rows) => write_threshold_csv(rows, f)?,
    }
    Ok(())
}

pub fn cmd_sweep(cert_path: &Path, sweep_path: &Path, g: &GlobalOptions) -> Result<SweepTable> {
    let digest = digest_inputs(&[&read_bytes(cert_path)?, &read_bytes(sweep_path)?]);
    with_manifest("sweep", g, digest, g.seed, |out| {
        let (model, task, cert, constants) = load_certificate(cert_path)?;
        require_certified(&cert)?;
        let sweep = SweepFile::read(sweep_path)?;
        let table = g.install(|| run_sweep(&model, &task, &cert, &constants, &sweep, g.seed))??;
        write_table(&table, &out.path("table.csv"))?;
        Ok(table)
    })
}

/// Full pipeline settings of the numerical example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceConfig {
    pub problem: ProblemFile,
    pub fig1: SweepFile,
    pub fig2: SweepFile,
}

impl ReproduceConfig {
    /// Example-1 plant with gain bound 10 and the default figure grids.
    pub fn example1() -> Self {
        let (model, task) = example1();
        let mut problem = ProblemFile::new(&model, &task);
        problem.synthesis = Some(SynthesisSection {
            max_outer: Some(50),
            gain_bound: Some(10.0),
            ..SynthesisSection::default()
        });
        let fig1 = SweepFile {
            sweep: SweepSection {
                kind: SweepKind::Kb,
                grid: (0..9).map(|i| 0.25 * i as f64).collect(),
                reps: 20,
                seed: 1,
                mode: SweepMode::Uniform,
                k_b: 0.0,
            },
            sim: SimSection {
                t_end: 5000.0,
                rk4_step: 0.01,
                schedule: ScheduleSection::Periodic { h: 0.02 },
                trigger: TriggerSection::None,
                x0: None,
                w0: None,
                tail_fraction: 0.2,
                record: false,
            },
        };
        let fig2 = SweepFile {
            sweep: SweepSection {
                kind: SweepKind::Threshold,
                grid: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 3e-2, 1e-1, 3e-1],
                reps: 20,
                seed: 1,
                mode: SweepMode::Uniform,
                k_b: 0.0,
            },
            sim: SimSection {
                t_end: 5000.0,
                rk4_step: 0.005,
                schedule: ScheduleSection::Periodic { h: 0.02 },
                trigger: TriggerSection::Thresholds { q0: 0.0, q1: 0.0 },
                x0: None,
                w0: None,
                tail_fraction: 0.2,
                record: false,
            },
        };
        Self { problem, fig1, fig2 }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub struct ReproduceSummary {
    pub model: PlantModel,
    pub task: RegulationTask,
    pub certificate: SynthesisCertificate,
    pub trace: IterationTrace,
    pub constants: EtcConstants,
    /// `(q1, h_max)` maximising the sampling bound with `q0 = 0`.
    pub h_max_best: Option<(f64, f64)>,
    pub fig1: Vec<KbRow>,
    pub fig2: Vec<ThresholdRow>,
    pub synthesis_seconds: f64,
    pub fig1_seconds: f64,
    pub fig2_seconds: f64,
    pub manifest: Option<RunManifest>,
}

pub fn cmd_reproduce_example1(config: Option<&Path>, g: &GlobalOptions) -> Result<ReproduceSummary> {
    let cfg = match config {
        Some(p) => ReproduceConfig::read(p)?,
        None => ReproduceConfig::example1(),
    };
    let text = cfg.to_toml()?;
    let seed = g.seed.unwrap_or(cfg.fig1.sweep.seed);
    let mut summary = with_manifest("reproduce-example1", g, sha256_hex(text.as_bytes()), Some(seed), |out| {
        out.write("config.toml", text.as_bytes())?;
        let (model, task, mut opts) = cfg.problem.parts()?;
        g.apply(&mut opts);
        let t = Instant::now();
        let (gains, cert, trace) = g.install(|| synthesize(&model, &opts))??;
        let synthesis_seconds = t.elapsed().as_secs_f64();
        GainsFile::write(&out.path("gains.toml"), &gains)?;
        write_certificate(out, "certificate.toml", &model, &task, &cert)?;
        write_trace_csv(&trace, &out.path("trace.csv"))?;

        let constants = constants_of(&model, &gains, &cert)?;
        let best = h_max_best(&constants, cert.alpha);
        let (q1, h) = best.unwrap_or((0.0, 0.0));
        let etc = etc_certificate(constants.clone(), cert.alpha, cert.zeta, 0.0, q1, h.max(f64::MIN_POSITIVE), model.k_b);
        EtcFile::new(&etc, model.k_b).write(&out.path("etc.toml"))?;

        let t = Instant::now();
        let fig1 = match g.install(|| run_sweep(&model, &task, &cert, &constants, &cfg.fig1, g.seed))?? {
            SweepTable::Kb(rows) => rows,
            SweepTable::Threshold(_) => return Err(CliError::Usage("fig1 must be a kb sweep".into())),
        };
        let fig1_seconds = t.elapsed().as_secs_f64();
        write_kb_csv(&fig1, fs::File::create(out.path("fig1.csv"))?)?;

        let t = Instant::now();
        let fig2 = match g.install(|| run_sweep(&model, &task, &cert, &constants, &cfg.fig2, g.seed))?? {
            SweepTable::Threshold(rows) => rows,
            SweepTable::Kb(_) => return Err(CliError::Usage("fig2 must be a threshold sweep".into())),
        };
        let fig2_seconds = t.elapsed().as_secs_f64();
        write_threshold_csv(&fig2, fs::File::create(out.path("fig2.csv"))?)?;

        Ok(ReproduceSummary {
            model,
            task,
            certificate: cert,
            trace,
            constants,
            h_max_best: best,
            fig1,
            fig2,
            synthesis_seconds,
            fig1_seconds,
            fig2_seconds,
            manifest: None,
        })
    })?;
    let text = fs::read_to_string(g.out_dir.join(MANIFEST))?;
    summary.manifest = toml::from_str(&text).ok();
    Ok(summary)
}
