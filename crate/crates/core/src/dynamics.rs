//! Effective Zeno evolution under continuous measurement.
//!
//! Under continuous measurement of a constant projector `E` the state obeys
//! `dpsi/dt = -i E H_t E psi`. For a moving projector `E_t` the generator
//! becomes `K_t = E_t H_t E_t + i [dE_t/dt, E_t]`, which is Hermitian and
//! keeps `psi_t` inside the range of `E_t`. The same evolution is obtained
//! by solving the constant-projector problem in the frame rotated by `U_t`
//! and mapping back, which [`integrate_rotating_frame`] implements as an
//! independent route.
//!
//! All routes use the midpoint-exponential stepper
//! `psi_{k+1} = exp(-i h K(t_k + h/2)) psi_k`, so each step is unitary.
//! Confinement is monitored, never enforced.

use crate::error::{Result, ZenoError};
use crate::hamiltonian::HamiltonianPath;
use crate::linalg::{commutator, expm_skew_hermitian, Operator, Projector, StateVector, I};
use crate::projector_path::ProjectorPath;

pub const DEFAULT_STEPS_PER_UNIT_TIME: f64 = 1000.0;
pub const INITIAL_CONDITION_TOL: f64 = 1e-10;
pub const EFFECTIVE_HERMITICITY_TOL: f64 = 1e-9;

/// Default step count for a horizon `T`: 1000 steps per unit time.
pub fn default_steps(horizon: f64) -> usize {
    ((DEFAULT_STEPS_PER_UNIT_TIME * horizon).ceil() as usize).max(1)
}

#[derive(Clone, Debug)]
pub struct EffectiveGenerator {
    pub t: f64,
    /// `E_t H_t E_t + i [dE_t/dt, E_t]`, unsymmetrized.
    pub k: Operator,
    pub hermiticity_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    Constant,
    General,
    RotatingFrame,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Constant => "constant",
            Route::General => "general",
            Route::RotatingFrame => "rotating_frame",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordMetadata {
    pub scenario_id: String,
    pub route: Route,
    pub n_steps: usize,
    pub step: f64,
    pub seed: Option<u64>,
}

/// Time series of an integrated trajectory. Index 0 is `t = 0`.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    /// `|E_t psi_t - psi_t|`
    pub confinement_residual: Vec<f64>,
    /// `| |psi_t| - 1 |`
    pub norm_residual: Vec<f64>,
    pub metadata: RecordMetadata,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trajectory records always hold the initial state")
    }

    pub fn max_confinement_residual(&self) -> f64 {
        self.confinement_residual.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_norm_residual(&self) -> f64 {
        self.norm_residual.iter().copied().fold(0.0, f64::max)
    }

    /// Largest state distance between two records sampled on the same grid.
    pub fn max_state_gap(&self, other: &TrajectoryRecord) -> Result<f64> {
        if self.len() != other.len() {
            return Err(ZenoError::InvalidArgument(format!(
                "records have different lengths ({} vs {})",
                self.len(),
                other.len()
            )));
        }
        Ok(self.states.iter().zip(&other.states).map(|(a, b)| a.distance(b)).fold(0.0, f64::max))
    }

    fn with_capacity(n: usize, metadata: RecordMetadata) -> Self {
        Self {
            times: Vec::with_capacity(n + 1),
            states: Vec::with_capacity(n + 1),
            confinement_residual: Vec::with_capacity(n + 1),
            norm_residual: Vec::with_capacity(n + 1),
            metadata,
        }
    }

    fn push(&mut self, t: f64, psi: StateVector, e: &Projector) {
        self.confinement_residual.push(e.confinement_residual(&psi));
        self.norm_residual.push((psi.norm() - 1.0).abs());
        self.times.push(t);
        self.states.push(psi);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfinementReport {
    pub max_residual: f64,
    pub worst_t: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(ZenoError::DimensionMismatch { expected, found });
    }
    Ok(())
}

fn check_initial(e: &Projector, psi0: &StateVector) -> Result<()> {
    check_dims(e.dim(), psi0.dim())?;
    let residual = e.confinement_residual(psi0);
    if residual > INITIAL_CONDITION_TOL {
        return Err(ZenoError::InitialCondition { residual });
    }
    Ok(())
}

fn check_run(horizon: f64, path_horizon: f64, n_steps: usize) -> Result<()> {
    if n_steps == 0 {
        return Err(ZenoError::InvalidArgument("n_steps must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ZenoError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if horizon > path_horizon * (1.0 + 1e-12) {
        return Err(ZenoError::OutsideHorizon { t: horizon, horizon: path_horizon });
    }
    Ok(())
}

fn grid_time(horizon: f64, k: usize, n: usize) -> f64 {
    horizon * k as f64 / n as f64
}

/// `E_t H_t E_t + i [dE_t/dt, E_t]` with `dE_t/dt = -i [A_t, E_t]`.
pub fn effective_hamiltonian(hpath: &HamiltonianPath, ppath: &ProjectorPath, t: f64) -> Result<EffectiveGenerator> {
    check_dims(ppath.dim(), hpath.dim())?;
    let e = ppath.projector_at(t)?;
    let h = hpath.evaluate(t)?;
    let projected = &(e.op() * &h) * e.op();
    let k = if ppath.is_static() {
        projected
    } else {
        let e_dot = commutator(&ppath.generator_at(t)?, e.op())?.scale_complex(-I);
        &projected + &commutator(&e_dot, e.op())?.scale_complex(I)
    };
    let hermiticity_residual = k.hermiticity_residual();
    if hermiticity_residual > EFFECTIVE_HERMITICITY_TOL {
        return Err(ZenoError::EffectiveNotHermitian { t, residual: hermiticity_residual });
    }
    Ok(EffectiveGenerator { t, k, hermiticity_residual })
}

/// Largest hermiticity residual of the effective generator over `n_probe`
/// uniform times, with the time at which it occurs.
pub fn hermiticity_scan(hpath: &HamiltonianPath, ppath: &ProjectorPath, n_probe: usize) -> Result<(f64, f64)> {
    let n_probe = n_probe.max(2);
    let mut worst = (0.0, 0.0);
    for j in 0..n_probe {
        let t = grid_time(ppath.horizon(), j, n_probe - 1);
        let g = effective_hamiltonian(hpath, ppath, t)?;
        if g.hermiticity_residual > worst.0 {
            worst = (g.hermiticity_residual, t);
        }
    }
    Ok(worst)
}

/// Constant measured projector: steps with `exp(-i h E H_mid E)`.
pub fn integrate_constant(
    hpath: &HamiltonianPath,
    e: &Projector,
    psi0: &StateVector,
    horizon: f64,
    n_steps: usize,
) -> Result<TrajectoryRecord> {
    check_dims(e.dim(), hpath.dim())?;
    check_initial(e, psi0)?;
    check_run(horizon, hpath.horizon(), n_steps)?;
    let metadata = RecordMetadata {
        scenario_id: String::new(),
        route: Route::Constant,
        n_steps,
        step: horizon / n_steps as f64,
        seed: None,
    };
    let mut rec = TrajectoryRecord::with_capacity(n_steps, metadata);
    rec.push(0.0, psi0.clone(), e);
    let mut psi = psi0.clone();
    for k in 0..n_steps {
        let (t0, t1) = (grid_time(horizon, k, n_steps), grid_time(horizon, k + 1, n_steps));
        let h = hpath.evaluate(0.5 * (t0 + t1))?;
        let generator = (&(e.op() * &h) * e.op()).symmetrized();
        let u = expm_skew_hermitian(&generator, t1 - t0)?;
        psi = StateVector::new_unchecked(&u * &psi);
        rec.push(t1, psi.clone(), e);
    }
    Ok(rec)
}

/// Moving measured projector: steps with the midpoint effective generator.
pub fn integrate_general(
    hpath: &HamiltonianPath,
    ppath: &ProjectorPath,
    psi0: &StateVector,
    horizon: f64,
    n_steps: usize,
) -> Result<TrajectoryRecord> {
    check_dims(ppath.dim(), hpath.dim())?;
    check_initial(&ppath.projector_at(0.0)?, psi0)?;
    check_run(horizon, hpath.horizon().min(ppath.horizon()), n_steps)?;
    let metadata = RecordMetadata {
        scenario_id: String::new(),
        route: Route::General,
        n_steps,
        step: horizon / n_steps as f64,
        seed: None,
    };
    let mut rec = TrajectoryRecord::with_capacity(n_steps, metadata);
    rec.push(0.0, psi0.clone(), &ppath.projector_at(0.0)?);
    let mut psi = psi0.clone();
    for k in 0..n_steps {
        let (t0, t1) = (grid_time(horizon, k, n_steps), grid_time(horizon, k + 1, n_steps));
        let g = effective_hamiltonian(hpath, ppath, 0.5 * (t0 + t1))?;
        let u = expm_skew_hermitian(&g.k.symmetrized(), t1 - t0)?;
        psi = StateVector::new_unchecked(&u * &psi);
        rec.push(t1, psi.clone(), &ppath.projector_at(t1)?);
    }
    Ok(rec)
}

/// Solves the constant-projector problem in the frame rotated by `U_t` and
/// maps back with `psi_t = U_t psi~_t`.
///
/// The rotated Hamiltonian is `U^dagger H U + i (dU^dagger/dt) U`. With
/// `dU/dt = -i A U` the second term equals `-U^dagger A U`, so each step
/// uses `H~ = U_mid^dagger (H_mid - A_mid) U_mid` with the analytic generator
/// at the step midpoint.
pub fn integrate_rotating_frame(
    hpath: &HamiltonianPath,
    ppath: &ProjectorPath,
    psi0: &StateVector,
    horizon: f64,
    n_steps: usize,
) -> Result<TrajectoryRecord> {
    check_dims(ppath.dim(), hpath.dim())?;
    let base = ppath.base();
    check_initial(&ppath.projector_at(0.0)?, psi0)?;
    check_run(horizon, hpath.horizon().min(ppath.horizon()), n_steps)?;
    let metadata = RecordMetadata {
        scenario_id: String::new(),
        route: Route::RotatingFrame,
        n_steps,
        step: horizon / n_steps as f64,
        seed: None,
    };
    let mut rec = TrajectoryRecord::with_capacity(n_steps, metadata);
    rec.push(0.0, psi0.clone(), &ppath.projector_at(0.0)?);
    // U_0 = I, so the rotated initial state is psi0 itself
    let mut rotated = psi0.clone();
    for k in 0..n_steps {
        let (t0, t1) = (grid_time(horizon, k, n_steps), grid_time(horizon, k + 1, n_steps));
        let tm = 0.5 * (t0 + t1);
        let h = hpath.evaluate(tm)?;
        let h_rot = if ppath.is_static() {
            h
        } else {
            let u = ppath.unitary_at(tm)?;
            let shifted = &h - &ppath.generator_at(tm)?;
            &(&u.adjoint() * &shifted) * &u
        };
        let generator = (&(base.op() * &h_rot) * base.op()).symmetrized();
        let step = expm_skew_hermitian(&generator, t1 - t0)?;
        rotated = StateVector::new_unchecked(&step * &rotated);
        let psi = if ppath.is_static() {
            rotated.clone()
        } else {
            StateVector::new_unchecked(&ppath.unitary_at(t1)? * &rotated)
        };
        rec.push(t1, psi, &ppath.projector_at(t1)?);
    }
    Ok(rec)
}

/// Recomputes `max_t |E_t psi_t - psi_t|` over the record against `ppath`.
pub fn check_confinement(rec: &TrajectoryRecord, ppath: &ProjectorPath, tol: f64) -> Result<ConfinementReport> {
    let mut max_residual: f64 = 0.0;
    let mut worst_t = 0.0;
    for (t, psi) in rec.times.iter().zip(&rec.states) {
        let r = ppath.projector_at(*t)?.confinement_residual(psi);
        if r > max_residual || r.is_nan() {
            max_residual = r;
            worst_t = *t;
        }
    }
    Ok(ConfinementReport { max_residual, worst_t, tolerance: tol, passed: max_residual <= tol })
}

/// `max_t max_ij |psi_t psi_t^dagger - E_t|` for rank-1 paths.
pub fn dragging_residual(rec: &TrajectoryRecord, ppath: &ProjectorPath) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (t, psi) in rec.times.iter().zip(&rec.states) {
        worst = worst.max(psi.outer().max_abs_diff(ppath.projector_at(*t)?.op()));
    }
    Ok(worst)
}
