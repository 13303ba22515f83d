//! CSV tables, JSON reports and all-or-nothing output directories.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dynamics::TrajectoryRecord;
use crate::linalg::StateVector;
use crate::stroboscopic::{StroboscopicRun, SweepTable};

pub const TOOL_NAME: &str = "zeno";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check could not be run because its inputs violate a precondition.
    PreconditionFailed,
    Skipped,
}

impl CheckStatus {
    pub fn label(self) -> &'static str {
        match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::PreconditionFailed => "PRECONDITION",
            CheckStatus::Skipped => "SKIP",
        }
    }

    /// Skipped checks do not fail a run.
    pub fn is_ok(self) -> bool {
        matches!(self, CheckStatus::Pass | CheckStatus::Skipped)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub measured: Option<f64>,
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Check {
    /// Passes iff `measured` is finite and `<= tolerance`.
    pub fn bound(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        let status = if measured.is_finite() && measured <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { name: name.into(), status, measured: Some(measured), tolerance: Some(tolerance), detail: detail.into() }
    }

    pub fn with_status(name: &str, status: CheckStatus, detail: impl Into<String>) -> Self {
        Self { name: name.into(), status, measured: None, tolerance: None, detail: detail.into() }
    }

    pub fn line(&self) -> String {
        let mut s = format!("{:<12} {}", self.status.label(), self.name);
        if let Some(m) = self.measured {
            let _ = write!(s, " measured={m:.3e}");
        }
        if let Some(t) = self.tolerance {
            let _ = write!(s, " tol={t:.1e}");
        }
        if !self.detail.is_empty() {
            let _ = write!(s, " ({})", self.detail);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub reference_steps: usize,
    pub micro_substeps: usize,
    pub loss_order: Option<f64>,
    pub state_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub seeds: Vec<u64>,
    pub all_ones_fraction: f64,
    pub conditional_survival: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleSummary {
    pub seed: u64,
    pub n: usize,
    /// Outcome record, one character per measurement.
    pub outcomes: String,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub scenario_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    /// Seconds since the epoch, only when requested; omitted otherwise so that
    /// repeated runs stay byte-identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ensembles: Vec<EnsembleSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<SampleSummary>,
}

impl Report {
    pub fn new(command: &str, scenario_id: &str) -> Self {
        Self {
            tool: TOOL_NAME,
            tool_version: TOOL_VERSION,
            command: command.into(),
            scenario_id: scenario_id.into(),
            engine: None,
            timestamp: None,
            n_steps: None,
            seeds: Vec::new(),
            files: Vec::new(),
            checks: Vec::new(),
            passed: true,
            sweep: None,
            ensembles: Vec::new(),
            samples: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.status.is_ok();
        self.checks.push(check);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn state_header(out: &mut String, dim: usize) {
    out.push('t');
    for k in 0..dim {
        let _ = write!(out, ",re_{k},im_{k}");
    }
}

fn state_fields(out: &mut String, t: f64, psi: &StateVector) {
    out.push_str(&num(t));
    for z in psi.amplitudes() {
        let _ = write!(out, ",{},{}", num(z.re), num(z.im));
    }
}

/// `t, re_k, im_k, confinement_residual, norm_residual` per recorded time.
pub fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let dim = rec.final_state().dim();
    let mut out = String::new();
    state_header(&mut out, dim);
    out.push_str(",confinement_residual,norm_residual\n");
    for i in 0..rec.len() {
        state_fields(&mut out, rec.times[i], &rec.states[i]);
        let _ = writeln!(out, ",{},{}", num(rec.confinement_residual[i]), num(rec.norm_residual[i]));
    }
    out
}

/// Conditional states at `t = 0, t_1, .., t_n` with the running survival.
/// `confinement` holds `|E_{t_k} psi - psi|` for each row.
pub fn stroboscopic_csv(psi0: &StateVector, run: &StroboscopicRun, confinement: &[f64]) -> String {
    let mut out = String::new();
    state_header(&mut out, psi0.dim());
    out.push_str(",confinement_residual,norm_residual,survival\n");
    state_fields(&mut out, 0.0, psi0);
    let _ = writeln!(out, ",{},{},{}", num(confinement[0]), num((psi0.norm() - 1.0).abs()), num(1.0));
    let mut log_survival = 0.0f64;
    for k in 0..run.n {
        log_survival += run.step_probabilities[k].ln();
        let psi = &run.conditional_states[k];
        state_fields(&mut out, run.times[k], psi);
        let _ =
            writeln!(out, ",{},{},{}", num(confinement[k + 1]), num((psi.norm() - 1.0).abs()), num(log_survival.exp()));
    }
    out
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = String::from("n,survival,loss,state_error\n");
    for r in &table.rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, num(r.survival), num(r.loss), num(r.state_error));
    }
    out
}

/// Writes every file under `dir` or none of them: contents go to hidden
/// temporaries first and are renamed into place once all writes succeed.
pub fn write_all_or_nothing(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut staged = Vec::with_capacity(files.len());
    let mut placed = Vec::with_capacity(files.len());
    let result = (|| {
        for (name, contents) in files {
            let tmp = dir.join(format!(".{name}.tmp"));
            staged.push(tmp.clone());
            fs::write(&tmp, contents)?;
        }
        for (tmp, (name, _)) in staged.iter().zip(files) {
            let target = dir.join(name);
            fs::rename(tmp, &target)?;
            placed.push(target);
        }
        Ok(())
    })();
    if result.is_err() {
        for path in staged.iter().chain(&placed) {
            let _ = fs::remove_file(path);
        }
    }
    result
}
