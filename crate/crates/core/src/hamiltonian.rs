//! Time-dependent Hermitian operators on a finite horizon `[0, T]`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, ZenoError};
use crate::linalg::{Operator, HERMITIAN_TOL};

/// Relative slack when checking that a query time lies in `[0, T]`.
const HORIZON_SLACK: f64 = 1e-12;

/// Scalar coefficient functions allowed in a linear combination.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Waveform {
    Const {
        value: f64,
    },
    /// sin(omega t + phase)
    Sin {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// cos(omega t + phase)
    Cos {
        #[serde(default = "one")]
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    /// c0 + c1 t + c2 t^2 + ...
    Poly {
        coefficients: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Waveform {
    pub fn sin() -> Self {
        Waveform::Sin { omega: 1.0, phase: 0.0 }
    }

    pub fn cos() -> Self {
        Waveform::Cos { omega: 1.0, phase: 0.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            Waveform::Const { value } => *value,
            Waveform::Sin { omega, phase } => (omega * t + phase).sin(),
            Waveform::Cos { omega, phase } => (omega * t + phase).cos(),
            Waveform::Poly { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Waveform::Const { value } => value.is_finite(),
            Waveform::Sin { omega, phase } | Waveform::Cos { omega, phase } => omega.is_finite() && phase.is_finite(),
            Waveform::Poly { coefficients } => coefficients.iter().all(|c| c.is_finite()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PathKind {
    Constant(Operator),
    LinearCombination(Vec<(Operator, Waveform)>),
    /// Piecewise-linear interpolation between samples, symmetrized on evaluation.
    Sampled {
        times: Vec<f64>,
        ops: Vec<Operator>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianPath {
    dim: usize,
    horizon: f64,
    kind: PathKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HermiticityReport {
    pub n_probe: usize,
    pub max_residual: f64,
    pub worst_t: f64,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(ZenoError::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

fn check_hermitian(op: &Operator) -> Result<()> {
    let residual = op.hermiticity_residual();
    if residual > HERMITIAN_TOL {
        return Err(ZenoError::NotHermitian { residual });
    }
    Ok(())
}

impl HamiltonianPath {
    pub fn constant(op: Operator, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        check_hermitian(&op)?;
        Ok(Self { dim: op.dim(), horizon, kind: PathKind::Constant(op) })
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        Self::constant(Operator::zeros(dim), horizon)
    }

    pub fn linear_combination(terms: Vec<(Operator, Waveform)>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        let dim = match terms.first() {
            Some((op, _)) => op.dim(),
            None => return Err(ZenoError::InvalidArgument("linear combination has no terms".into())),
        };
        for (op, w) in &terms {
            if op.dim() != dim {
                return Err(ZenoError::DimensionMismatch { expected: dim, found: op.dim() });
            }
            check_hermitian(op)?;
            if !w.is_finite() {
                return Err(ZenoError::InvalidArgument(format!("non-finite waveform {w:?}")));
            }
        }
        Ok(Self { dim, horizon, kind: PathKind::LinearCombination(terms) })
    }

    /// Samples must start at 0, end at `horizon` and be strictly increasing.
    /// Samples need not be Hermitian; [`HamiltonianPath::evaluate`]
    /// symmetrizes and [`HamiltonianPath::validate`] reports the residual.
    pub fn sampled(samples: Vec<(f64, Operator)>, horizon: f64) -> Result<Self> {
        check_horizon(horizon)?;
        if samples.len() < 2 {
            return Err(ZenoError::InvalidArgument("sampled path needs at least two samples".into()));
        }
        let dim = samples[0].1.dim();
        let slack = HORIZON_SLACK * horizon.max(1.0);
        if samples[0].0.abs() > slack {
            return Err(ZenoError::InvalidArgument(format!("first sample at t = {}, expected 0", samples[0].0)));
        }
        let last = samples[samples.len() - 1].0;
        if (last - horizon).abs() > slack {
            return Err(ZenoError::InvalidArgument(format!(
                "last sample at t = {last}, expected the horizon {horizon}"
            )));
        }
        for pair in samples.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(ZenoError::InvalidArgument(format!(
                    "sample times not strictly increasing at t = {}",
                    pair[1].0
                )));
            }
        }
        let mut times = Vec::with_capacity(samples.len());
        let mut ops = Vec::with_capacity(samples.len());
        for (t, op) in samples {
            if op.dim() != dim {
                return Err(ZenoError::DimensionMismatch { expected: dim, found: op.dim() });
            }
            times.push(t);
            ops.push(op);
        }
        Ok(Self { dim, horizon, kind: PathKind::Sampled { times, ops } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    /// True if the path is the constant zero operator.
    pub fn is_identically_zero(&self) -> bool {
        matches!(&self.kind, PathKind::Constant(op) if op.is_zero())
    }

    /// Clamps `t` into `[0, T]`, rejecting times beyond a round-off slack.
    pub fn clamp_time(&self, t: f64) -> Result<f64> {
        let slack = HORIZON_SLACK * self.horizon.max(1.0);
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(ZenoError::OutsideHorizon { t, horizon: self.horizon });
        }
        Ok(t.clamp(0.0, self.horizon))
    }

    pub fn evaluate(&self, t: f64) -> Result<Operator> {
        let t = self.clamp_time(t)?;
        Ok(match &self.kind {
            PathKind::Sampled { .. } => self.interpolate(t).symmetrized(),
            _ => self.evaluate_raw(t),
        })
    }

    fn evaluate_raw(&self, t: f64) -> Operator {
        match &self.kind {
            PathKind::Constant(op) => op.clone(),
            PathKind::LinearCombination(terms) => {
                let mut acc = Operator::zeros(self.dim);
                for (op, w) in terms {
                    acc = &acc + &op.scale(w.value(t));
                }
                acc
            }
            PathKind::Sampled { .. } => self.interpolate(t),
        }
    }

    fn interpolate(&self, t: f64) -> Operator {
        let PathKind::Sampled { times, ops } = &self.kind else {
            unreachable!("interpolate called on a non-sampled path")
        };
        // index of the first sample strictly after t, kept inside 1..len
        let upper = times.partition_point(|&s| s <= t).clamp(1, times.len() - 1);
        let (t0, t1) = (times[upper - 1], times[upper]);
        let w = (t - t0) / (t1 - t0);
        if w == 0.0 {
            return ops[upper - 1].clone();
        }
        if w == 1.0 {
            return ops[upper].clone();
        }
        &ops[upper - 1].scale(1.0 - w) + &ops[upper].scale(w)
    }

    /// Probes `n_probe` uniform times on `[0, T]` and reports the largest
    /// hermiticity residual of the unsymmetrized path.
    pub fn validate(&self, n_probe: usize) -> Result<HermiticityReport> {
        if n_probe < 2 {
            return Err(ZenoError::InvalidArgument(format!("n_probe must be at least 2, got {n_probe}")));
        }
        let mut report = HermiticityReport { n_probe, max_residual: 0.0, worst_t: 0.0 };
        for k in 0..n_probe {
            let t = self.horizon * k as f64 / (n_probe - 1) as f64;
            let r = self.evaluate_raw(t).hermiticity_residual();
            if r > report.max_residual {
                report.max_residual = r;
                report.worst_t = t;
            }
        }
        Ok(report)
    }
}
