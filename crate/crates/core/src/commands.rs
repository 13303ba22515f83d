//! simulate / sweep / verify, independent of argument parsing.
//!
//! Exit codes: 0 all checks pass, 1 some check failed, 2 the scenario is
//! unreadable or invalid, 3 runtime failure (impossible outcome, effective
//! generator not Hermitian, output not writable).

use std::path::Path;

use thiserror::Error;

use crate::artifact::{
    stroboscopic_csv, sweep_csv, trajectory_csv, write_all_or_nothing, Check, CheckStatus, EnsembleSummary, Report,
    SampleSummary, SweepSummary,
};
use crate::dynamics::{
    check_confinement, dragging_residual, hermiticity_scan, integrate_constant, integrate_general,
    integrate_rotating_frame, TrajectoryRecord, EFFECTIVE_HERMITICITY_TOL,
};
use crate::error::ZenoError;
use crate::projector_path::{DerivativeMode, ProjectorPath};
use crate::scenario::{Model, Scenario, ScenarioError};
use crate::stroboscopic::{
    convergence_sweep, run_conditional_on, sample_ensemble, short_time_factorization_check, MeasurementSchedule,
    StroboscopicRun,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const HERMITICITY_PROBES: usize = 100;
pub const NORM_TOL: f64 = 1e-8;
pub const CONFINEMENT_TOL: f64 = 1e-7;
pub const DRAGGING_TOL: f64 = 1e-7;
pub const ROUTE_TOL: f64 = 1e-6;
pub const REDUCTION_TOL: f64 = 1e-12;
pub const GAUGE_TOL: f64 = 1e-8;
pub const GAUGE_PROBES: usize = 50;
pub const TANGENCY_TOL: f64 = 1e-7;
pub const TANGENCY_PROBES: usize = 50;
pub const STROBO_NORM_TOL: f64 = 1e-10;
pub const SURVIVAL_PRODUCT_RTOL: f64 = 1e-12;
pub const FACTORIZATION_RATIO: (f64, f64) = (3.5, 4.5);
/// Below this the factorization defect is treated as exactly zero.
pub const FACTORIZATION_EXACT: f64 = 1e-13;
/// Sweep reference trajectory uses this many times the scenario step count.
pub const SWEEP_REFERENCE_FACTOR: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    /// Midpoint exponential of the effective generator.
    Effective,
    /// Constant-projector problem in the rotating frame.
    Frame,
    /// Repeated projective measurements, conditioned on outcome 1.
    Stroboscopic,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Effective => "effective",
            Engine::Frame => "frame",
            Engine::Stroboscopic => "stroboscopic",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Replaces the scenario's seed list.
    pub seed_override: Option<u64>,
    pub timestamp: Option<u64>,
}

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Runtime(#[from] ZenoError),
    #[error("cannot write outputs to {path}: {message}")]
    Output { path: String, message: String },
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Scenario(_) => EXIT_INVALID,
            CommandError::Runtime(_) | CommandError::Output { .. } => EXIT_RUNTIME,
        }
    }
}

/// A report plus the files that go next to it.
#[derive(Clone, Debug)]
pub struct Artifacts {
    pub report: Report,
    pub tables: Vec<(String, String)>,
}

impl Artifacts {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }

    /// Writes the tables and `report.json` under `dir`, all or nothing.
    pub fn write(&self, dir: &Path) -> Result<(), CommandError> {
        let mut files = self.tables.clone();
        files.push(("report.json".into(), self.report.to_json()));
        write_all_or_nothing(dir, &files)
            .map_err(|e| CommandError::Output { path: dir.display().to_string(), message: e.to_string() })
    }
}

pub fn load_model(path: &Path) -> Result<Model, CommandError> {
    Ok(Scenario::load(path)?.build()?)
}

fn seeds(model: &Model, opts: &RunOptions) -> Vec<u64> {
    match opts.seed_override {
        Some(s) => vec![s],
        None => model.scenario.stroboscopic.seeds.clone(),
    }
}

fn new_report(command: &str, model: &Model, opts: &RunOptions) -> Report {
    let mut r = Report::new(command, &model.scenario.id);
    r.timestamp = opts.timestamp;
    r.seeds = seeds(model, opts);
    r
}

fn tag(mut rec: TrajectoryRecord, model: &Model) -> TrajectoryRecord {
    rec.metadata.scenario_id = model.scenario.id.clone();
    rec
}

fn horizon(model: &Model) -> f64 {
    model.scenario.horizon
}

fn hermiticity_check(model: &Model) -> Result<Check, ZenoError> {
    let (residual, t) = hermiticity_scan(&model.hamiltonian, &model.projector_path, HERMITICITY_PROBES)?;
    Ok(Check::bound(
        "hermiticity",
        residual,
        EFFECTIVE_HERMITICITY_TOL,
        format!("max |K - K^dagger| over {HERMITICITY_PROBES} probes, worst t={t:.6}"),
    ))
}

fn trajectory_checks(rec: &TrajectoryRecord, ppath: &ProjectorPath) -> Result<Vec<Check>, ZenoError> {
    let conf = check_confinement(rec, ppath, CONFINEMENT_TOL)?;
    Ok(vec![
        Check::bound("norm", rec.max_norm_residual(), NORM_TOL, "max | |psi_t| - 1 |"),
        Check::bound(
            "confinement",
            conf.max_residual,
            CONFINEMENT_TOL,
            format!("max |E_t psi_t - psi_t|, worst t={:.6}", conf.worst_t),
        ),
    ])
}

fn stroboscopic_confinement(model: &Model, run: &StroboscopicRun) -> Result<Vec<f64>, ZenoError> {
    let ppath = &model.projector_path;
    let mut out = vec![ppath.projector_at(0.0)?.confinement_residual(&model.initial_state)];
    for (t, psi) in run.times.iter().zip(&run.conditional_states) {
        out.push(ppath.projector_at(*t)?.confinement_residual(psi));
    }
    Ok(out)
}

fn survival_checks(run: &StroboscopicRun) -> Vec<Check> {
    let product = run.step_probability_product();
    let rel = (run.survival_probability - product).abs() / product.abs().max(f64::MIN_POSITIVE);
    let norm = run.conditional_states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
    let mut checks = vec![
        Check::bound("survival_product", rel, SURVIVAL_PRODUCT_RTOL, "relative gap to product of step probabilities"),
        Check::bound("conditional_norm", norm, STROBO_NORM_TOL, "max | |psi_k| - 1 |"),
    ];
    let s = run.survival_probability;
    checks.push(Check {
        name: "survival_range".into(),
        status: if (0.0..=1.0).contains(&s) { CheckStatus::Pass } else { CheckStatus::Fail },
        measured: Some(s),
        tolerance: None,
        detail: "survival in [0, 1]".into(),
    });
    checks
}

fn ensemble(
    model: &Model,
    schedule: &MeasurementSchedule,
    seeds: &[u64],
    conditional: f64,
) -> Result<(EnsembleSummary, Vec<SampleSummary>), ZenoError> {
    let runs = sample_ensemble(schedule, &model.initial_state, seeds)?;
    let ones = runs.iter().filter(|r| r.all_ones()).count();
    let samples = runs
        .iter()
        .map(|r| SampleSummary {
            seed: r.seed.unwrap_or_default(),
            n: r.n,
            outcomes: r.outcomes.as_deref().unwrap_or_default().iter().map(|&o| char::from(b'0' + o)).collect(),
            probability: r.survival_probability,
        })
        .collect();
    let summary = EnsembleSummary {
        n: schedule.n(),
        seeds: seeds.to_vec(),
        all_ones_fraction: if seeds.is_empty() { 0.0 } else { ones as f64 / seeds.len() as f64 },
        conditional_survival: conditional,
    };
    Ok((summary, samples))
}

/// Runs one engine over the scenario horizon.
pub fn simulate(model: &Model, engine: Engine, opts: &RunOptions) -> Result<Artifacts, ZenoError> {
    let mut report = new_report("simulate", model, opts);
    report.engine = Some(engine.name().into());
    let t_end = horizon(model);
    let tables = match engine {
        Engine::Effective | Engine::Frame => {
            report.n_steps = Some(model.n_steps);
            report.push(hermiticity_check(model)?);
            let rec = match engine {
                Engine::Effective => integrate_general(
                    &model.hamiltonian,
                    &model.projector_path,
                    &model.initial_state,
                    t_end,
                    model.n_steps,
                )?,
                _ => integrate_rotating_frame(
                    &model.hamiltonian,
                    &model.projector_path,
                    &model.initial_state,
                    t_end,
                    model.n_steps,
                )?,
            };
            let rec = tag(rec, model);
            for c in trajectory_checks(&rec, &model.projector_path)? {
                report.push(c);
            }
            vec![("trajectory.csv".to_string(), trajectory_csv(&rec))]
        }
        Engine::Stroboscopic => {
            let strobo = &model.scenario.stroboscopic;
            let n = *strobo.n_list.last().expect("validated non-empty");
            let report_h = model.hamiltonian.validate(HERMITICITY_PROBES)?;
            report.push(Check::bound(
                "hermiticity",
                report_h.max_residual,
                EFFECTIVE_HERMITICITY_TOL,
                format!("max |H - H^dagger| over {HERMITICITY_PROBES} probes"),
            ));
            let schedule =
                MeasurementSchedule::new(&model.hamiltonian, &model.projector_path, t_end, n, strobo.micro_substeps)?;
            let run = run_conditional_on(&schedule, &model.initial_state)?;
            let confinement = stroboscopic_confinement(model, &run)?;
            for c in survival_checks(&run) {
                report.push(c);
            }
            report.push(Check::bound(
                "confinement",
                confinement.iter().copied().fold(0.0, f64::max),
                CONFINEMENT_TOL,
                format!("conditional states, n={n}"),
            ));
            if !report.seeds.is_empty() {
                let seeds = report.seeds.clone();
                let (summary, samples) = ensemble(model, &schedule, &seeds, run.survival_probability)?;
                report.ensembles.push(summary);
                report.samples = samples;
            }
            vec![("trajectory.csv".to_string(), stroboscopic_csv(&model.initial_state, &run, &confinement))]
        }
    };
    report.files = tables.iter().map(|(name, _)| name.clone()).chain(["report.json".to_string()]).collect();
    Ok(Artifacts { report, tables })
}

/// Stroboscopic convergence table over the scenario's `n_list`.
pub fn sweep(model: &Model, opts: &RunOptions) -> Result<Artifacts, ZenoError> {
    let mut report = new_report("sweep", model, opts);
    let strobo = &model.scenario.stroboscopic;
    let reference_steps = model.n_steps * SWEEP_REFERENCE_FACTOR;
    report.n_steps = Some(reference_steps);
    let table = convergence_sweep(
        &model.hamiltonian,
        &model.projector_path,
        &model.initial_state,
        horizon(model),
        &strobo.n_list,
        strobo.micro_substeps,
        reference_steps,
    )?;
    let note = (table.rows.len() < 2).then(|| "insufficient points".to_string());
    report.sweep = Some(SweepSummary {
        reference_steps,
        micro_substeps: strobo.micro_substeps,
        loss_order: table.loss_order,
        state_order: table.state_order,
        note,
    });
    let all_finite =
        table.rows.iter().all(|r| r.survival.is_finite() && r.loss.is_finite() && r.state_error.is_finite());
    report.push(Check::with_status(
        "finite",
        if all_finite { CheckStatus::Pass } else { CheckStatus::Fail },
        "every table entry finite",
    ));
    let in_range = table.rows.iter().all(|r| (0.0..=1.0).contains(&r.survival));
    report.push(Check::with_status(
        "survival_range",
        if in_range { CheckStatus::Pass } else { CheckStatus::Fail },
        "survival in [0, 1] for every n",
    ));
    if !report.seeds.is_empty() {
        let seeds = report.seeds.clone();
        for row in &table.rows {
            let schedule = MeasurementSchedule::new(
                &model.hamiltonian,
                &model.projector_path,
                horizon(model),
                row.n,
                strobo.micro_substeps,
            )?;
            let (summary, _) = ensemble(model, &schedule, &seeds, row.survival)?;
            report.ensembles.push(summary);
        }
    }
    let tables = vec![("sweep.csv".to_string(), sweep_csv(&table))];
    report.files = vec!["sweep.csv".into(), "report.json".into()];
    Ok(Artifacts { report, tables })
}

/// The invariant suite on one scenario.
pub fn verify(model: &Model, opts: &RunOptions) -> Result<Report, ZenoError> {
    let mut report = new_report("verify", model, opts);
    report.n_steps = Some(model.n_steps);
    let (h, p, psi0, t_end, n) =
        (&model.hamiltonian, &model.projector_path, &model.initial_state, horizon(model), model.n_steps);

    report.push(hermiticity_check(model)?);

    let general = tag(integrate_general(h, p, psi0, t_end, n)?, model);
    for c in trajectory_checks(&general, p)? {
        report.push(c);
    }

    let frame = integrate_rotating_frame(h, p, psi0, t_end, n)?;
    report.push(Check::bound(
        "route_equivalence",
        general.max_state_gap(&frame)?,
        ROUTE_TOL,
        "max |psi_general - psi_frame| over the trajectory",
    ));

    let fixed = ProjectorPath::constant(p.base().clone(), t_end)?;
    let reduced = integrate_general(h, &fixed, psi0, t_end, n)?;
    let direct = integrate_constant(h, p.base(), psi0, t_end, n)?;
    report.push(Check::bound(
        "reduction",
        reduced.max_state_gap(&direct)?,
        REDUCTION_TOL,
        "frame switched off: general vs constant-projector route",
    ));

    report.push(gauge_check(model, &general)?);

    if p.base().rank() == 1 {
        report.push(Check::bound(
            "dragging",
            dragging_residual(&general, p)?,
            DRAGGING_TOL,
            "max |psi psi^dagger - E_t|",
        ));
    } else {
        report.push(Check::with_status("dragging", CheckStatus::Skipped, format!("rank {} > 1", p.base().rank())));
    }

    report.push(factorization_check(model)?);
    report.push(tangency_check(p)?);

    let strobo = &model.scenario.stroboscopic;
    let n_meas = *strobo.n_list.last().expect("validated non-empty");
    let schedule = MeasurementSchedule::new(h, p, t_end, n_meas, strobo.micro_substeps)?;
    let run = run_conditional_on(&schedule, psi0)?;
    for c in survival_checks(&run) {
        report.push(c);
    }
    Ok(report)
}

fn gauge_check(model: &Model, general: &TrajectoryRecord) -> Result<Check, ZenoError> {
    let p = &model.projector_path;
    let gauged = match p.gauge_transform(model.gauge.clone()) {
        Ok(g) => g,
        Err(ZenoError::GaugePrecondition { t, residual }) => {
            return Ok(Check {
                name: "gauge_invariance".into(),
                status: CheckStatus::PreconditionFailed,
                measured: Some(residual),
                tolerance: None,
                detail: format!("gauge generator does not commute with E at t={t:.6}"),
            });
        }
        Err(e) => return Err(e),
    };
    let t_end = horizon(model);
    let mut projector_gap: f64 = 0.0;
    for k in 0..GAUGE_PROBES {
        let t = t_end * k as f64 / (GAUGE_PROBES - 1) as f64;
        projector_gap = projector_gap.max(p.projector_at(t)?.op().max_abs_diff(gauged.projector_at(t)?.op()));
    }
    let other = integrate_general(&model.hamiltonian, &gauged, &model.initial_state, t_end, model.n_steps)?;
    let state_gap = general.max_state_gap(&other)?;
    let source = if model.explicit_gauge { "scenario gauge" } else { "default gauge" };
    Ok(Check::bound(
        "gauge_invariance",
        projector_gap.max(state_gap),
        GAUGE_TOL,
        format!("{source}: projector gap {projector_gap:.3e} on {GAUGE_PROBES} probes, trajectory gap {state_gap:.3e}"),
    ))
}

fn factorization_check(model: &Model) -> Result<Check, ZenoError> {
    let h = model.hamiltonian.evaluate(0.0)?;
    let defects =
        short_time_factorization_check(&h, model.projector_path.base(), &model.initial_state, &[0.01, 0.005])?;
    let (d1, d2) = (defects[0].1, defects[1].1);
    if d1 <= FACTORIZATION_EXACT {
        return Ok(Check::bound(
            "factorization",
            d1,
            FACTORIZATION_EXACT,
            "defect vanishes: H commutes with E on psi0",
        ));
    }
    let ratio = d1 / d2;
    let (lo, hi) = FACTORIZATION_RATIO;
    Ok(Check {
        name: "factorization".into(),
        status: if (lo..=hi).contains(&ratio) { CheckStatus::Pass } else { CheckStatus::Fail },
        measured: Some(ratio),
        tolerance: None,
        detail: format!("defect(0.01)/defect(0.005) in [{lo}, {hi}]"),
    })
}

fn tangency_check(p: &ProjectorPath) -> Result<Check, ZenoError> {
    let t_end = p.horizon();
    let mut worst: f64 = 0.0;
    for k in 0..TANGENCY_PROBES {
        let t = t_end * k as f64 / (TANGENCY_PROBES - 1) as f64;
        let e = p.projector_at(t)?;
        let d = p.projector_derivative(t, DerivativeMode::Analytic)?;
        let rhs = &(&d * e.op()) + &(e.op() * &d);
        worst = worst.max(d.max_abs_diff(&rhs));
    }
    Ok(Check::bound("tangency", worst, TANGENCY_TOL, "max |dE - (dE E + E dE)|"))
}
