//! Continuous measurement modelled as `n` projective measurements of
//! `E_{t_k}` at `t_k = k T / n`, interleaved with unitary evolution under
//! `H_t`. No measurement is made at `t = 0`; the initial condition is
//! validated instead.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::integrate_general;
use crate::error::{Result, ZenoError};
use crate::hamiltonian::{HamiltonianPath, PathKind};
use crate::linalg::{expm_skew_hermitian, project_and_renormalize, Operator, Projector, StateVector, PROB_FLOOR};
use crate::projector_path::ProjectorPath;

pub const DEFAULT_MICRO_SUBSTEPS: usize = 10;

/// Precomputed interval propagators and measured projectors for one
/// `(scenario, n)` pair. Shared read-only by conditional and sampled runs.
#[derive(Clone, Debug)]
pub struct MeasurementSchedule {
    horizon: f64,
    /// `t_1 .. t_n`
    times: Vec<f64>,
    /// Evolution over `[t_{k-1}, t_k]`.
    propagators: Vec<Operator>,
    projectors: Vec<Projector>,
    initial_projector: Projector,
}

impl MeasurementSchedule {
    pub fn new(
        hpath: &HamiltonianPath,
        ppath: &ProjectorPath,
        horizon: f64,
        n: usize,
        micro_substeps: usize,
    ) -> Result<Self> {
        if hpath.dim() != ppath.dim() {
            return Err(ZenoError::DimensionMismatch { expected: ppath.dim(), found: hpath.dim() });
        }
        if n == 0 || micro_substeps == 0 {
            return Err(ZenoError::InvalidArgument("measurement count and micro substeps must be positive".into()));
        }
        if !(horizon > 0.0) || horizon > hpath.horizon().min(ppath.horizon()) * (1.0 + 1e-12) {
            return Err(ZenoError::OutsideHorizon { t: horizon, horizon: hpath.horizon().min(ppath.horizon()) });
        }
        let times: Vec<f64> = (1..=n).map(|k| horizon * k as f64 / n as f64).collect();
        let constant_h = matches!(hpath.kind(), PathKind::Constant(_));
        let mut propagators: Vec<Operator> = Vec::with_capacity(n);
        for k in 0..n {
            let t0 = if k == 0 { 0.0 } else { times[k - 1] };
            let t1 = times[k];
            if constant_h && k > 0 {
                let shared = propagators[0].clone();
                propagators.push(shared);
                continue;
            }
            propagators.push(interval_propagator(hpath, t0, t1, micro_substeps)?);
        }
        let projectors = times.iter().map(|&t| ppath.projector_at(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { horizon, times, propagators, projectors, initial_projector: ppath.projector_at(0.0)? })
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

fn interval_propagator(hpath: &HamiltonianPath, t0: f64, t1: f64, substeps: usize) -> Result<Operator> {
    let mut u = Operator::identity(hpath.dim());
    let h = (t1 - t0) / substeps as f64;
    for s in 0..substeps {
        let tm = t0 + (s as f64 + 0.5) * h;
        u = &expm_skew_hermitian(&hpath.evaluate(tm)?, h)? * &u;
    }
    Ok(u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StroboscopicRun {
    pub n: usize,
    /// Probability of the recorded outcome sequence. For conditional runs
    /// this is the survival probability of the all-1 branch.
    pub survival_probability: f64,
    pub log_survival: f64,
    pub step_probabilities: Vec<f64>,
    /// `t_1 .. t_n`
    pub times: Vec<f64>,
    pub conditional_states: Vec<StateVector>,
    /// Present for sampled runs: 1 if `E_{t_k}` was found, 0 otherwise.
    pub outcomes: Option<Vec<u8>>,
    pub seed: Option<u64>,
}

impl StroboscopicRun {
    pub fn final_state(&self) -> &StateVector {
        self.conditional_states.last().expect("runs hold at least one measurement")
    }

    /// `1 - survival`, accurate for survival close to 1.
    pub fn loss(&self) -> f64 {
        -self.log_survival.exp_m1()
    }

    pub fn step_probability_product(&self) -> f64 {
        self.step_probabilities.iter().product()
    }

    pub fn all_ones(&self) -> bool {
        self.outcomes.as_ref().is_none_or(|o| o.iter().all(|&x| x == 1))
    }
}

/// Conditions on outcome 1 at every measurement.
pub fn run_conditional(
    hpath: &HamiltonianPath,
    ppath: &ProjectorPath,
    psi0: &StateVector,
    horizon: f64,
    n: usize,
) -> Result<StroboscopicRun> {
    let schedule = MeasurementSchedule::new(hpath, ppath, horizon, n, DEFAULT_MICRO_SUBSTEPS)?;
    run_conditional_on(&schedule, psi0)
}

pub fn run_conditional_on(schedule: &MeasurementSchedule, psi0: &StateVector) -> Result<StroboscopicRun> {
    check_state(schedule, psi0)?;
    let residual = schedule.initial_projector.confinement_residual(psi0);
    if residual > crate::dynamics::INITIAL_CONDITION_TOL {
        return Err(ZenoError::InitialCondition { residual });
    }
    let n = schedule.n();
    let mut psi = psi0.clone();
    let mut log_survival: f64 = 0.0;
    let mut step_probabilities = Vec::with_capacity(n);
    let mut conditional_states = Vec::with_capacity(n);
    for k in 0..n {
        let evolved = StateVector::new_unchecked(&schedule.propagators[k] * &psi);
        let (next, p) = project_and_renormalize(&schedule.projectors[k], &evolved).map_err(|e| match e {
            ZenoError::ImpossibleOutcome { probability } => {
                ZenoError::ImpossibleOutcomeAt { step: k + 1, t: schedule.times[k], probability }
            }
            other => other,
        })?;
        log_survival += p.ln();
        step_probabilities.push(p);
        conditional_states.push(next.clone());
        psi = next;
    }
    Ok(StroboscopicRun {
        n,
        survival_probability: log_survival.exp(),
        log_survival,
        step_probabilities,
        times: schedule.times.clone(),
        conditional_states,
        outcomes: None,
        seed: None,
    })
}

/// Monte Carlo realization of the measurement record. Outcome 0 continues
/// in the complement `I - E_{t_k}`. Deterministic for a given seed.
pub fn run_sampled(
    hpath: &HamiltonianPath,
    ppath: &ProjectorPath,
    psi0: &StateVector,
    horizon: f64,
    n: usize,
    seed: u64,
) -> Result<StroboscopicRun> {
    let schedule = MeasurementSchedule::new(hpath, ppath, horizon, n, DEFAULT_MICRO_SUBSTEPS)?;
    run_sampled_on(&schedule, psi0, seed)
}

pub fn run_sampled_on(schedule: &MeasurementSchedule, psi0: &StateVector, seed: u64) -> Result<StroboscopicRun> {
    check_state(schedule, psi0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = schedule.n();
    let mut psi = psi0.clone();
    let mut log_survival: f64 = 0.0;
    let mut step_probabilities = Vec::with_capacity(n);
    let mut conditional_states = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for k in 0..n {
        let evolved = &schedule.propagators[k] * &psi;
        let found = schedule.projectors[k].op().matrix() * &evolved;
        let total = evolved.norm_squared();
        let p_one = (found.norm_squared() / total).clamp(0.0, 1.0);
        let draw: f64 = rng.random();
        let mut outcome = u8::from(draw < p_one);
        // never follow a branch below the impossibility floor
        if outcome == 1 && p_one < PROB_FLOOR {
            outcome = 0;
        } else if outcome == 0 && 1.0 - p_one < PROB_FLOOR {
            outcome = 1;
        }
        let (branch, p) = if outcome == 1 { (found, p_one) } else { (&evolved - &found, 1.0 - p_one) };
        let norm = branch.norm();
        psi = StateVector::new_unchecked(branch.map(|z| z / norm));
        log_survival += p.ln();
        step_probabilities.push(p);
        outcomes.push(outcome);
        conditional_states.push(psi.clone());
    }
    Ok(StroboscopicRun {
        n,
        survival_probability: log_survival.exp(),
        log_survival,
        step_probabilities,
        times: schedule.times.clone(),
        conditional_states,
        outcomes: Some(outcomes),
        seed: Some(seed),
    })
}

/// Sampled runs for each seed, in seed order.
pub fn sample_ensemble(
    schedule: &MeasurementSchedule,
    psi0: &StateVector,
    seeds: &[u64],
) -> Result<Vec<StroboscopicRun>> {
    seeds.par_iter().map(|&s| run_sampled_on(schedule, psi0, s)).collect()
}

fn check_state(schedule: &MeasurementSchedule, psi0: &StateVector) -> Result<()> {
    let d = schedule.initial_projector.dim();
    if psi0.dim() != d {
        return Err(ZenoError::DimensionMismatch { expected: d, found: psi0.dim() });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub survival: f64,
    /// `1 - survival`
    pub loss: f64,
    /// `|psi_strobo_T(n) - psi_eff_T|`
    pub state_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub reference_steps: usize,
    /// Fitted order of `1 - survival` in `1/n`.
    pub loss_order: Option<f64>,
    /// Fitted order of the state error in `1/n`.
    pub state_order: Option<f64>,
}

/// Stroboscopic runs for each `n` against a fine effective trajectory.
pub fn convergence_sweep(
    hpath: &HamiltonianPath,
    ppath: &ProjectorPath,
    psi0: &StateVector,
    horizon: f64,
    n_list: &[usize],
    micro_substeps: usize,
    reference_steps: usize,
) -> Result<SweepTable> {
    if n_list.is_empty() {
        return Err(ZenoError::InvalidArgument("n_list is empty".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ZenoError::InvalidArgument(format!("n_list must be strictly increasing: {n_list:?}")));
    }
    let reference = integrate_general(hpath, ppath, psi0, horizon, reference_steps)?;
    let target = reference.final_state();
    let rows = n_list
        .par_iter()
        .map(|&n| {
            let schedule = MeasurementSchedule::new(hpath, ppath, horizon, n, micro_substeps)?;
            let run = run_conditional_on(&schedule, psi0)?;
            Ok(SweepRow {
                n,
                survival: run.survival_probability,
                loss: run.loss(),
                state_error: run.final_state().distance(target),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.state_error).collect();
    Ok(SweepTable { loss_order: fit_order(&ns, &losses), state_order: fit_order(&ns, &errors), rows, reference_steps })
}

/// Least-squares slope of `ln value` against `ln(1/n)`. `None` with fewer
/// than two points or any non-positive value.
pub fn fit_order(ns: &[usize], values: &[f64]) -> Option<f64> {
    if ns.len() < 2 || ns.len() != values.len() || values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return None;
    }
    let xs: Vec<f64> = ns.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `|E exp(-i dt h) psi - exp(-i dt E h E) psi|` for each `dt`.
pub fn short_time_factorization_check(
    h: &Operator,
    e: &Projector,
    psi: &StateVector,
    dt_list: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if h.dim() != e.dim() || psi.dim() != e.dim() {
        return Err(ZenoError::DimensionMismatch { expected: e.dim(), found: h.dim().max(psi.dim()) });
    }
    let residual = e.confinement_residual(psi);
    if residual > crate::dynamics::INITIAL_CONDITION_TOL {
        return Err(ZenoError::InitialCondition { residual });
    }
    let compressed = (&(e.op() * h) * e.op()).symmetrized();
    dt_list
        .iter()
        .map(|&dt| {
            let measured = e.op().matrix() * (&expm_skew_hermitian(h, dt)? * psi);
            let effective = &expm_skew_hermitian(&compressed, dt)? * psi;
            Ok((dt, (measured - effective).norm()))
        })
        .collect()
}
