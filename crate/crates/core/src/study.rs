//! Convergence studies with manufactured solutions: configuration, the
//! built-in test problems, orchestration over mesh levels or time steps, and
//! CSV output.
//!
//! Configuration comes from `key=value` pairs. The same keys are accepted in
//! a config file and as command-line flags (`--key value`); later pairs
//! override earlier ones.

use std::f64::consts::PI;
use std::fmt;
use std::io;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use thiserror::Error;

use crate::assembly::ProblemSpec;
use crate::error_norms::{eoc, fct_norm_parts, h1_seminorm_error, l2_error, NormSeries};
use crate::fct::LimiterMatrix;
use crate::mesh::{MeshError, TriMesh};
use crate::stepper::{Limiter, Scheme, SchemeKind, StepError, Stepper, StepperOptions};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("config file line {line}: expected `key=value`")]
    Syntax { line: usize },
    #[error("grid `unstructured` needs a mesh file")]
    MissingMeshFile,
    #[error("end time {t_end} is not a multiple of the time step {tau}")]
    StepMismatch { t_end: f64, tau: f64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

/// Mesh family of a study.
#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    FriedrichsKeller,
    Shifted,
    /// A level-0 mesh read from file; level `L` is `L` uniform refinements.
    Unstructured(PathBuf),
}

impl GridKind {
    /// Builds the mesh of the given level.
    pub fn mesh(&self, level: u32) -> Result<TriMesh, MeshError> {
        Ok(match self {
            GridKind::FriedrichsKeller => TriMesh::friedrichs_keller(level),
            GridKind::Shifted => TriMesh::shifted(level),
            GridKind::Unstructured(path) => {
                let mut mesh = TriMesh::load(path)?;
                for _ in 0..level {
                    mesh = mesh.refine_uniform();
                }
                mesh
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    Space,
    Time,
}

/// Time profile `s(t)` of the manufactured solution `u = s(t) p(x) q(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeProfile {
    /// `s(t) = 100 t`; no temporal discretization error.
    Linear,
    /// `s(t) = 100 (1 + sin 2πt)`.
    Oscillating,
}

/// `u(t, x, y) = s(t) x²(1 - x²) y(1 - y)(1 - 2y)` with the source derived
/// for given `ε`, constant `b` and `c`. The solution vanishes on the
/// boundary of the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub eps: f64,
    pub velocity: [f64; 2],
    pub reaction: f64,
    pub profile: TimeProfile,
}

fn p(x: f64) -> (f64, f64, f64) {
    (x * x - x.powi(4), 2.0 * x - 4.0 * x.powi(3), 2.0 - 12.0 * x * x)
}

fn q(y: f64) -> (f64, f64, f64) {
    (y - 3.0 * y * y + 2.0 * y.powi(3), 1.0 - 6.0 * y + 6.0 * y * y, -6.0 + 12.0 * y)
}

impl Manufactured {
    pub fn new(eps: f64, profile: TimeProfile) -> Self {
        Self {
            eps,
            velocity: [2.0, 3.0],
            reaction: 1.0,
            profile,
        }
    }

    fn s(&self, t: f64) -> (f64, f64) {
        match self.profile {
            TimeProfile::Linear => (100.0 * t, 100.0),
            TimeProfile::Oscillating => (100.0 * (1.0 + (2.0 * PI * t).sin()), 200.0 * PI * (2.0 * PI * t).cos()),
        }
    }

    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        self.s(t).0 * p(x).0 * q(y).0
    }

    pub fn gradient(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let s = self.s(t).0;
        let (px, qy) = (p(x), q(y));
        [s * px.1 * qy.0, s * px.0 * qy.1]
    }

    pub fn source(&self, t: f64, x: f64, y: f64) -> f64 {
        let (s, ds) = self.s(t);
        let (px, qy) = (p(x), q(y));
        let [bx, by] = self.velocity;
        ds * px.0 * qy.0 - self.eps * s * (px.2 * qy.0 + px.0 * qy.2)
            + s * (bx * px.1 * qy.0 + by * px.0 * qy.1)
            + self.reaction * s * px.0 * qy.0
    }

    /// The problem data for end time `t_end` and step `tau`. Since `div b = 0`,
    /// `c0 = c`.
    pub fn spec(&self, t_end: f64, tau: f64) -> ProblemSpec {
        let (m0, m1) = (*self, *self);
        ProblemSpec::constant(self.eps, self.velocity, self.reaction, t_end, tau)
            .with_source(move |t, x, y| m0.source(t, x, y))
            .with_initial(move |x, y| m1.value(0.0, x, y))
    }
}

/// Limiter selection of a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimiterChoice {
    Zalesak,
    /// `α = v` on interior pairs and Zalesak values on pairs touching the
    /// boundary.
    Constant(f64),
    /// `α = v` on every pair.
    Uniform(f64),
}

impl From<LimiterChoice> for Limiter {
    fn from(c: LimiterChoice) -> Self {
        match c {
            LimiterChoice::Zalesak => Limiter::Zalesak,
            LimiterChoice::Constant(v) => Limiter::InteriorConstant(v),
            LimiterChoice::Uniform(v) => Limiter::Uniform(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridKind,
    pub levels: RangeInclusive<u32>,
    pub scheme: Scheme,
    pub limiter: LimiterChoice,
    pub eps: f64,
    pub tau: f64,
    pub t_end: f64,
    pub study: StudyKind,
    /// CSV destination; `None` writes to standard output.
    pub out: Option<PathBuf>,
    /// Number of time steps lengths `τ, τ/2, …` of a time study. The time
    /// study runs on the last level of `levels`.
    pub time_runs: usize,
    pub stepper: StepperOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            grid: GridKind::FriedrichsKeller,
            levels: 1..=3,
            scheme: Scheme::LinearFct,
            limiter: LimiterChoice::Zalesak,
            eps: 1e-8,
            tau: 1e-3,
            t_end: 1.0,
            study: StudyKind::Space,
            out: None,
            time_runs: 4,
            stepper: StepperOptions::default(),
        }
    }
}

fn invalid(key: &str, value: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.to_string(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| invalid(key, value, e))
}

pub fn parse_scheme(value: &str) -> Option<Scheme> {
    match value.to_ascii_lowercase().replace('-', "_").as_str() {
        "galerkin" => Some(Scheme::Galerkin),
        "low_order" | "low" => Some(Scheme::LowOrder),
        "linear_fct" | "linear" => Some(Scheme::LinearFct),
        "nonlinear_fct" | "nonlinear" => Some(Scheme::NonlinearFct),
        _ => None,
    }
}

pub fn parse_limiter(value: &str) -> Result<LimiterChoice, String> {
    let unit = |v: &str| -> Result<f64, String> {
        let v: f64 = v.parse().map_err(|e| format!("{e}"))?;
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err("limiter value must lie in [0, 1]".into())
        }
    };
    match value.split_once(':') {
        None if value == "zalesak" => Ok(LimiterChoice::Zalesak),
        Some(("constant", v)) => unit(v).map(LimiterChoice::Constant),
        Some(("uniform", v)) => unit(v).map(LimiterChoice::Uniform),
        _ => Err("expected `zalesak`, `constant:<v>` or `uniform:<v>`".into()),
    }
}

/// Parses `A..B`, `A..=B` or a single level `A`.
pub fn parse_levels(value: &str) -> Result<RangeInclusive<u32>, String> {
    let bound = |s: &str| s.trim().parse::<u32>().map_err(|e| e.to_string());
    let range = match value.split_once("..") {
        Some((a, b)) => bound(a)?..=bound(b.trim_start_matches('='))?,
        None => {
            let l = bound(value)?;
            l..=l
        }
    };
    if range.is_empty() {
        return Err("empty level range".into());
    }
    Ok(range)
}

impl ExperimentConfig {
    /// Applies one `key=value` setting. Keys match the long command-line flags
    /// (`mesh-file`, `t-end`, ...); underscores are accepted for dashes.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim().replace('_', "-").as_str() {
            "grid" => {
                self.grid = match value.split_once(':') {
                    _ if value == "fk" => GridKind::FriedrichsKeller,
                    _ if value == "shifted" => GridKind::Shifted,
                    _ if value == "unstructured" => match &self.grid {
                        GridKind::Unstructured(p) => GridKind::Unstructured(p.clone()),
                        _ => GridKind::Unstructured(PathBuf::new()),
                    },
                    Some(("unstructured", path)) => GridKind::Unstructured(path.into()),
                    _ => return Err(invalid("grid", value, "expected fk, shifted or unstructured:<path>")),
                }
            }
            "mesh-file" => self.grid = GridKind::Unstructured(value.into()),
            "levels" => self.levels = parse_levels(value).map_err(|r| invalid("levels", value, r))?,
            "scheme" => {
                self.scheme = parse_scheme(value)
                    .ok_or_else(|| invalid("scheme", value, "expected galerkin, low_order, linear_fct or nonlinear_fct"))?
            }
            "limiter" => self.limiter = parse_limiter(value).map_err(|r| invalid("limiter", value, r))?,
            "eps" => self.eps = parse_num("eps", value)?,
            "tau" => self.tau = parse_num("tau", value)?,
            "t-end" => self.t_end = parse_num("t-end", value)?,
            "study" => {
                self.study = match value {
                    "space" => StudyKind::Space,
                    "time" => StudyKind::Time,
                    _ => return Err(invalid("study", value, "expected space or time")),
                }
            }
            "out" => self.out = Some(value.into()),
            "time-runs" => self.time_runs = parse_num("time-runs", value)?,
            other => return Err(ConfigError::UnknownKey(other.into())),
        }
        Ok(())
    }

    /// Applies every `key=value` line of `text`; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: k + 1 })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    pub fn scheme_kind(&self) -> SchemeKind {
        SchemeKind::new(self.scheme, self.limiter.into())
    }

    fn checked_steps(t_end: f64, tau: f64) -> Result<usize, ConfigError> {
        let n = (t_end / tau).round();
        if (n * tau - t_end).abs() > 1e-9 * t_end.max(1.0) {
            return Err(ConfigError::StepMismatch { t_end, tau });
        }
        Ok(n as usize)
    }

    /// Number of time steps to reach `t_end`.
    pub fn steps(&self) -> Result<usize, ConfigError> {
        Self::checked_steps(self.t_end, self.tau)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.eps > 0.0) {
            return Err(invalid("eps", &self.eps.to_string(), "must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau", &self.tau.to_string(), "must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(invalid("t-end", &self.t_end.to_string(), "must be nonnegative"));
        }
        if matches!(&self.grid, GridKind::Unstructured(p) if p.as_os_str().is_empty()) {
            return Err(ConfigError::MissingMeshFile);
        }
        if self.study == StudyKind::Time && self.time_runs < 2 {
            return Err(invalid("time-runs", &self.time_runs.to_string(), "need at least two runs"));
        }
        self.steps().map(|_| ())
    }
}

/// Time-integrated errors of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunErrors {
    pub l2l2: f64,
    pub l2h1: f64,
    pub l2fct: f64,
    pub l2dh: f64,
    pub wall_time_s: f64,
    /// Largest fixed-point residual over all steps (nonlinear scheme).
    pub max_residual: Option<f64>,
    /// Largest number of fixed-point solves in one step (nonlinear scheme).
    pub max_iterations: Option<usize>,
}

/// Runs one manufactured problem to the end and accumulates the four
/// time-integrated error norms over steps `1..=N`.
///
/// The L² and H¹ errors use the exact solution; the FCT and `d_h` norms use
/// the nodal error `Π_h u - u_h` with the limiter of each step (`α ≡ 1` for
/// the Galerkin and `α ≡ 0` for the low-order scheme).
pub fn run_errors(
    mesh: &TriMesh,
    problem: &Manufactured,
    kind: SchemeKind,
    t_end: f64,
    tau: f64,
    opts: StepperOptions,
) -> Result<RunErrors, StepError> {
    let start = Instant::now();
    let spec = problem.spec(t_end, tau);
    let n_steps = (t_end / tau).round() as usize;
    let mut stepper = Stepper::new(mesh, &spec, kind, opts)?;
    let diffusion = stepper.operators().diffusion.clone();
    let fallback_alpha = LimiterMatrix::constant(
        stepper.pattern().clone(),
        if kind.scheme == Scheme::Galerkin { 1.0 } else { 0.0 },
    );
    let mut series = [(); 4].map(|_| NormSeries::new(tau));
    let mut max_residual: Option<f64> = None;
    let mut max_iterations: Option<usize> = None;
    let c0 = spec.c0;
    stepper.run_with(n_steps, |rec| {
        if rec.step == 0 {
            return;
        }
        let t = rec.t;
        let l2 = l2_error(mesh, &rec.u, |x, y| problem.value(t, x, y));
        let h1 = h1_seminorm_error(mesh, &rec.u, |x, y| problem.gradient(t, x, y));
        let e: Vec<f64> = mesh
            .nodes()
            .iter()
            .zip(&rec.u)
            .map(|(p, u)| problem.value(t, p.x, p.y) - u)
            .collect();
        let alpha = rec.alpha.as_ref().unwrap_or(&fallback_alpha);
        let parts = fct_norm_parts(mesh, &e, alpha, &diffusion);
        series[0].push(l2);
        series[1].push(h1);
        series[2].push(parts.combine(problem.eps, c0));
        series[3].push(parts.dh);
        if let Some(r) = rec.residual {
            max_residual = Some(max_residual.map_or(r, |m| m.max(r)));
        }
        if let Some(k) = rec.fixed_point_iters {
            max_iterations = Some(max_iterations.map_or(k, |m| m.max(k)));
        }
    })?;
    let [l2l2, l2h1, l2fct, l2dh] = series.map(|s| s.integrate());
    Ok(RunErrors {
        l2l2,
        l2h1,
        l2fct,
        l2dh,
        wall_time_s: start.elapsed().as_secs_f64(),
        max_residual,
        max_iterations,
    })
}

/// One row of a space study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub level: u32,
    pub h: f64,
    pub err_l2l2: f64,
    pub err_l2h1: f64,
    pub err_l2fct: f64,
    pub err_l2dh: f64,
    /// Orders against the previous row, in column order; `None` on the first
    /// row or when undefined.
    pub eoc: [Option<f64>; 4],
    pub wall_time_s: f64,
}

impl ErrorReport {
    pub fn errors(&self) -> [f64; 4] {
        [self.err_l2l2, self.err_l2h1, self.err_l2fct, self.err_l2dh]
    }
}

/// Outcome of a study: completed rows plus per-run failures.
#[derive(Debug)]
pub struct StudyOutcome<R> {
    pub rows: Vec<R>,
    pub failures: Vec<(String, String)>,
    /// Solver statistics per completed run (nonlinear scheme).
    pub max_residual: Option<f64>,
    pub max_iterations: Option<usize>,
}

impl<R> Default for StudyOutcome<R> {
    fn default() -> Self {
        Self {
            rows: Vec::new(),
            failures: Vec::new(),
            max_residual: None,
            max_iterations: None,
        }
    }
}

impl<R> StudyOutcome<R> {
    pub fn complete(&self) -> bool {
        self.failures.is_empty()
    }

    fn track(&mut self, run: &RunErrors) {
        if let Some(r) = run.max_residual {
            self.max_residual = Some(self.max_residual.map_or(r, |m| m.max(r)));
        }
        if let Some(k) = run.max_iterations {
            self.max_iterations = Some(self.max_iterations.map_or(k, |m| m.max(k)));
        }
    }
}

/// Fills the order columns of consecutive rows.
pub fn fill_eoc(rows: &mut [ErrorReport]) {
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    for col in 0..4 {
        let errs: Vec<f64> = rows.iter().map(|r| r.errors()[col]).collect();
        if rows.is_empty() {
            return;
        }
        rows[0].eoc[col] = None;
        if rows.len() > 1 {
            for (k, o) in eoc(&errs, &hs).into_iter().enumerate() {
                rows[k + 1].eoc[col] = o;
            }
        }
    }
}

/// Space study for the manufactured solution linear in time: one run per
/// level, errors integrated over `(0, t_end]`.
pub fn run_space_study(config: &ExperimentConfig) -> Result<StudyOutcome<ErrorReport>, StudyError> {
    config.validate()?;
    let problem = Manufactured::new(config.eps, TimeProfile::Linear);
    let mut outcome = StudyOutcome::default();
    for level in config.levels.clone() {
        let mesh = config.grid.mesh(level)?;
        info!("level {level}: {} nodes, h = {}", mesh.num_nodes(), mesh.h());
        match run_errors(&mesh, &problem, config.scheme_kind(), config.t_end, config.tau, config.stepper) {
            Ok(run) => {
                outcome.track(&run);
                outcome.rows.push(ErrorReport {
                    level,
                    h: mesh.h(),
                    err_l2l2: run.l2l2,
                    err_l2h1: run.l2h1,
                    err_l2fct: run.l2fct,
                    err_l2dh: run.l2dh,
                    eoc: [None; 4],
                    wall_time_s: run.wall_time_s,
                });
            }
            Err(e) => {
                warn!("level {level} failed: {e}");
                outcome.failures.push((format!("level {level}"), e.to_string()));
            }
        }
    }
    fill_eoc(&mut outcome.rows);
    Ok(outcome)
}

/// One row of a time study.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeReport {
    pub run: usize,
    pub tau: f64,
    pub h: f64,
    pub err_l2l2: f64,
    pub eoc_l2l2: Option<f64>,
    pub wall_time_s: f64,
}

/// Time study for the oscillating manufactured solution on the last level of
/// the range, with `τ` halved from run to run.
pub fn run_time_study(config: &ExperimentConfig) -> Result<StudyOutcome<TimeReport>, StudyError> {
    config.validate()?;
    let problem = Manufactured::new(config.eps, TimeProfile::Oscillating);
    let level = *config.levels.end();
    let mesh = config.grid.mesh(level)?;
    let mut outcome = StudyOutcome::default();
    for run in 0..config.time_runs {
        let tau = config.tau / f64::powi(2.0, run as i32);
        ExperimentConfig::checked_steps(config.t_end, tau)?;
        match run_errors(&mesh, &problem, config.scheme_kind(), config.t_end, tau, config.stepper) {
            Ok(errs) => {
                outcome.track(&errs);
                outcome.rows.push(TimeReport {
                    run,
                    tau,
                    h: mesh.h(),
                    err_l2l2: errs.l2l2,
                    eoc_l2l2: None,
                    wall_time_s: errs.wall_time_s,
                });
            }
            Err(e) => {
                warn!("run {run} (tau = {tau}) failed: {e}");
                outcome.failures.push((format!("tau {tau}"), e.to_string()));
            }
        }
    }
    let errs: Vec<f64> = outcome.rows.iter().map(|r| r.err_l2l2).collect();
    let taus: Vec<f64> = outcome.rows.iter().map(|r| r.tau).collect();
    if errs.len() > 1 {
        for (k, o) in eoc(&errs, &taus).into_iter().enumerate() {
            outcome.rows[k + 1].eoc_l2l2 = o;
        }
    }
    Ok(outcome)
}

pub const SPACE_COLUMNS: [&str; 11] = [
    "level",
    "h",
    "err_l2l2",
    "err_l2h1",
    "err_l2fct",
    "err_l2dh",
    "eoc_l2l2",
    "eoc_l2h1",
    "eoc_l2fct",
    "eoc_l2dh",
    "wall_time_s",
];

pub const TIME_COLUMNS: [&str; 6] = ["run", "tau", "h", "err_l2l2", "eoc_l2l2", "wall_time_s"];

/// 17 significant digits, enough to reproduce every `f64`.
fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn parse_f(field: &str) -> Result<f64, StudyError> {
    field.parse().map_err(|_| StudyError::Malformed(format!("not a number: `{field}`")))
}

fn parse_opt(field: &str) -> Result<Option<f64>, StudyError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_f(field).map(Some)
    }
}

pub fn write_space_csv<W: io::Write>(rows: &[ErrorReport], out: W) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SPACE_COLUMNS)?;
    for r in rows {
        let mut rec = vec![r.level.to_string(), fmt_f(r.h)];
        rec.extend(r.errors().map(fmt_f));
        rec.extend(r.eoc.map(fmt_opt));
        rec.push(fmt_f(r.wall_time_s));
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_space_csv<R: io::Read>(input: R) -> Result<Vec<ErrorReport>, StudyError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(SPACE_COLUMNS) {
        return Err(StudyError::Malformed("unexpected header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            let f = |k: usize| parse_f(&rec[k]);
            let o = |k: usize| parse_opt(&rec[k]);
            Ok(ErrorReport {
                level: rec[0].parse().map_err(|_| StudyError::Malformed(format!("bad level `{}`", &rec[0])))?,
                h: f(1)?,
                err_l2l2: f(2)?,
                err_l2h1: f(3)?,
                err_l2fct: f(4)?,
                err_l2dh: f(5)?,
                eoc: [o(6)?, o(7)?, o(8)?, o(9)?],
                wall_time_s: f(10)?,
            })
        })
        .collect()
}

pub fn write_time_csv<W: io::Write>(rows: &[TimeReport], out: W) -> Result<(), StudyError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIME_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.run.to_string(),
            fmt_f(r.tau),
            fmt_f(r.h),
            fmt_f(r.err_l2l2),
            fmt_opt(r.eoc_l2l2),
            fmt_f(r.wall_time_s),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_time_csv<R: io::Read>(input: R) -> Result<Vec<TimeReport>, StudyError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(TIME_COLUMNS) {
        return Err(StudyError::Malformed("unexpected header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TimeReport {
                run: rec[0].parse().map_err(|_| StudyError::Malformed(format!("bad run `{}`", &rec[0])))?,
                tau: parse_f(&rec[1])?,
                h: parse_f(&rec[2])?,
                err_l2l2: parse_f(&rec[3])?,
                eoc_l2l2: parse_opt(&rec[4])?,
                wall_time_s: parse_f(&rec[5])?,
            })
        })
        .collect()
}

/// Runs the configured study and writes its CSV. Returns `true` if every
/// run completed.
pub fn execute(config: &ExperimentConfig) -> Result<bool, StudyError> {
    fn sink(out: &Option<PathBuf>) -> Result<Box<dyn io::Write>, StudyError> {
        Ok(match out {
            Some(p) => Box::new(std::fs::File::create(p).map_err(ConfigError::from)?),
            None => Box::new(io::stdout().lock()),
        })
    }
    let complete = match config.study {
        StudyKind::Space => {
            let outcome = run_space_study(config)?;
            write_space_csv(&outcome.rows, sink(&config.out)?)?;
            outcome.complete()
        }
        StudyKind::Time => {
            let outcome = run_time_study(config)?;
            write_time_csv(&outcome.rows, sink(&config.out)?)?;
            outcome.complete()
        }
    };
    Ok(complete)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_solution_values() {
        let m = Manufactured::new(1e-8, TimeProfile::Linear);
        assert_eq!(m.value(1.0, 0.5, 0.5), 0.0);
        assert!((m.value(1.0, 0.5, 0.25) - 1.7578125).abs() < 1e-14);
        for (x, y) in [(0.0, 0.3), (1.0, 0.7), (0.4, 0.0), (0.6, 1.0)] {
            assert!(m.value(0.7, x, y).abs() < 1e-15);
        }
    }

    /// Central differences of the exact solution reproduce the source.
    #[test]
    fn source_matches_finite_differences() {
        for profile in [TimeProfile::Linear, TimeProfile::Oscillating] {
            let m = Manufactured {
                eps: 0.3,
                ..Manufactured::new(0.3, profile)
            };
            let d = 1e-4;
            for &(t, x, y) in &[(0.3, 0.2, 0.7), (0.8, 0.55, 0.15), (0.5, 0.9, 0.4)] {
                let u = |t, x, y| m.value(t, x, y);
                let ut = (u(t + d, x, y) - u(t - d, x, y)) / (2.0 * d);
                let ux = (u(t, x + d, y) - u(t, x - d, y)) / (2.0 * d);
                let uy = (u(t, x, y + d) - u(t, x, y - d)) / (2.0 * d);
                let lap = (u(t, x + d, y) + u(t, x - d, y) + u(t, x, y + d) + u(t, x, y - d) - 4.0 * u(t, x, y))
                    / (d * d);
                let f = ut - m.eps * lap + 2.0 * ux + 3.0 * uy + u(t, x, y);
                let rel = (f - m.source(t, x, y)).abs() / m.source(t, x, y).abs().max(1.0);
                assert!(rel < 1e-5, "{profile:?} at {t},{x},{y}: {rel}");
                let g = m.gradient(t, x, y);
                assert!((g[0] - ux).abs() < 1e-5 && (g[1] - uy).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn config_keys_and_overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# study\ngrid = shifted\nlevels=2..4\nlimiter=constant:0.5\nscheme=nonlinear_fct\n")
            .unwrap();
        c.set("t-end", "0.5").unwrap();
        c.set("levels", "3").unwrap();
        assert_eq!(c.grid, GridKind::Shifted);
        assert_eq!(c.levels, 3..=3);
        assert_eq!(c.limiter, LimiterChoice::Constant(0.5));
        assert_eq!(c.scheme, Scheme::NonlinearFct);
        assert_eq!(c.steps().unwrap(), 500);
        assert_eq!(c.scheme_kind().limiter, Limiter::InteriorConstant(0.5));

        assert!(matches!(c.set("limiter", "constant:1.5"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(c.set("levels", "4..2"), Err(ConfigError::InvalidValue { .. })));
        assert!(matches!(c.set("colour", "red"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.apply_text("grid fk"), Err(ConfigError::Syntax { line: 1 })));

        c.set("grid", "unstructured:mesh.txt").unwrap();
        assert_eq!(c.grid, GridKind::Unstructured("mesh.txt".into()));
        c.set("grid", "unstructured").unwrap();
        assert_eq!(c.grid, GridKind::Unstructured("mesh.txt".into()));
        let mut d = ExperimentConfig::default();
        d.set("grid", "unstructured").unwrap();
        assert!(matches!(d.validate(), Err(ConfigError::MissingMeshFile)));
        d.set("tau", "0.3").unwrap();
        d.set("mesh-file", "x").unwrap();
        assert!(matches!(d.validate(), Err(ConfigError::StepMismatch { .. })));
    }

    #[test]
    fn eoc_columns() {
        let row = |level, h, e: f64| ErrorReport {
            level,
            h,
            err_l2l2: e,
            err_l2h1: e.sqrt(),
            err_l2fct: e,
            err_l2dh: 0.0,
            eoc: [Some(9.0); 4],
            wall_time_s: 0.0,
        };
        let mut rows = vec![row(1, 0.25, 0.16), row(2, 0.125, 0.04)];
        fill_eoc(&mut rows);
        assert_eq!(rows[0].eoc, [None; 4]);
        assert!((rows[1].eoc[0].unwrap() - 2.0).abs() < 1e-14);
        assert!((rows[1].eoc[1].unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(rows[1].eoc[3], None);
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            ErrorReport {
                level: 1,
                h: 0.25,
                err_l2l2: 0.1 + 0.2,
                err_l2h1: 1.0 / 3.0,
                err_l2fct: f64::MIN_POSITIVE,
                err_l2dh: 0.0,
                eoc: [None; 4],
                wall_time_s: 0.123,
            },
            ErrorReport {
                level: 2,
                h: 0.125,
                err_l2l2: 2.0f64.sqrt(),
                err_l2h1: 1e-300,
                err_l2fct: 7.0,
                err_l2dh: 0.0,
                eoc: [Some(1.9), None, Some(-0.5), Some(std::f64::consts::E)],
                wall_time_s: 10.0,
            },
        ];
        let mut buf = Vec::new();
        write_space_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&SPACE_COLUMNS.join(",")));
        assert_eq!(read_space_csv(buf.as_slice()).unwrap(), rows);

        let times = vec![
            TimeReport {
                run: 0,
                tau: 0.05,
                h: 1.0 / 64.0,
                err_l2l2: 0.3,
                eoc_l2l2: None,
                wall_time_s: 1.5,
            },
            TimeReport {
                run: 1,
                tau: 0.025,
                h: 1.0 / 64.0,
                err_l2l2: 0.1 / 0.7,
                eoc_l2l2: Some(1.07),
                wall_time_s: 2.5,
            },
        ];
        let mut buf = Vec::new();
        write_time_csv(&times, &mut buf).unwrap();
        assert_eq!(read_time_csv(buf.as_slice()).unwrap(), times);
    }
}
