//! Moving projectors `E_t = U_t E U_t^dagger` generated by a Hermitian
//! frame generator `A_t` through `dU/dt = -i A_t U`, `U_0 = I`.
//!
//! The frame unitary is propagated once at construction with a
//! fourth-order Magnus rule on a fixed stride and cached, so evaluation is
//! read-only and independent of query order. Gauge transformations compose
//! further unitary factors `V_t` whose generators commute with `E`; they
//! change `U_t` but leave `E_t` untouched.

use crate::error::{Result, ZenoError};
use crate::hamiltonian::HamiltonianPath;
use crate::linalg::{commutator, expm_skew_hermitian, Operator, Projector, C64, I};

/// Default number of frame substeps over the horizon (stride `1e-3 T`).
pub const DEFAULT_FRAME_SUBSTEPS: usize = 1000;
/// Idempotency tolerance for propagated projectors.
pub const PROPAGATED_PROJECTOR_TOL: f64 = 1e-8;
/// Commutation tolerance for gauge generators.
pub const GAUGE_COMMUTATION_TOL: f64 = 1e-10;
/// Probe points used to check the gauge precondition.
pub const GAUGE_PROBES: usize = 101;

/// Hermitian generator `A_t` of a frame rotation.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryGeneratorPath {
    generator: HamiltonianPath,
}

impl UnitaryGeneratorPath {
    pub fn new(generator: HamiltonianPath) -> Self {
        Self { generator }
    }

    pub fn zero(dim: usize, horizon: f64) -> Result<Self> {
        Ok(Self::new(HamiltonianPath::zero(dim, horizon)?))
    }

    pub fn generator(&self) -> &HamiltonianPath {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.generator.horizon()
    }
}

#[derive(Clone, Debug)]
struct FramePropagator {
    path: UnitaryGeneratorPath,
    /// `U` at `t_k = T k / n` for `k = 0..=n`.
    checkpoints: Vec<Operator>,
}

impl FramePropagator {
    fn new(path: UnitaryGeneratorPath, substeps: usize) -> Result<Self> {
        let d = path.dim();
        let horizon = path.horizon();
        let mut checkpoints = Vec::with_capacity(substeps + 1);
        checkpoints.push(Operator::identity(d));
        let trivial = path.generator.is_identically_zero();
        for k in 0..substeps {
            let prev = &checkpoints[k];
            let next = if trivial {
                prev.clone()
            } else {
                let t0 = horizon * k as f64 / substeps as f64;
                let t1 = horizon * (k + 1) as f64 / substeps as f64;
                &magnus_step(&path.generator, t0, t1 - t0)? * prev
            };
            checkpoints.push(next);
        }
        Ok(Self { path, checkpoints })
    }

    fn substeps(&self) -> usize {
        self.checkpoints.len() - 1
    }

    fn checkpoint_time(&self, k: usize) -> f64 {
        self.path.horizon() * k as f64 / self.substeps() as f64
    }

    fn unitary_at(&self, t: f64) -> Result<Operator> {
        let t = self.path.generator.clamp_time(t)?;
        let n = self.substeps();
        let mut k = ((t / self.path.horizon()) * n as f64).floor() as usize;
        k = k.min(n);
        while k > 0 && self.checkpoint_time(k) > t {
            k -= 1;
        }
        let tk = self.checkpoint_time(k);
        let tau = t - tk;
        if tau == 0.0 || self.path.generator.is_identically_zero() {
            return Ok(self.checkpoints[k].clone());
        }
        Ok(&magnus_step(&self.path.generator, tk, tau)? * &self.checkpoints[k])
    }
}

/// Fourth-order Magnus step for `dU/dt = -i A(t) U` over `[t0, t0 + h]`,
/// with the two Gauss-Legendre nodes.
fn magnus_step(generator: &HamiltonianPath, t0: f64, h: f64) -> Result<Operator> {
    let offset = 3f64.sqrt() / 6.0;
    let a1 = generator.evaluate(t0 + (0.5 - offset) * h)?;
    let a2 = generator.evaluate(t0 + (0.5 + offset) * h)?;
    // Omega = -i G with G = h/2 (A1 + A2) - i sqrt(3)/12 h^2 [A2, A1]
    let correction = commutator(&a2, &a1)?.scale_complex(C64::new(0.0, -3f64.sqrt() / 12.0 * h * h));
    let g = &(&a1 + &a2).scale(0.5 * h) + &correction;
    expm_skew_hermitian(&g.symmetrized(), 1.0)
}

/// How [`ProjectorPath::projector_derivative`] computes `dE_t/dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DerivativeMode {
    /// `-i [A_t, E_t]`
    Analytic,
    /// Central difference with the given step, one-sided second-order
    /// stencils at the horizon ends.
    FiniteDifference(f64),
}

#[derive(Clone, Debug)]
pub struct ProjectorPath {
    base: Projector,
    frame: FramePropagator,
    gauges: Vec<FramePropagator>,
}

impl ProjectorPath {
    pub fn new(base: Projector, frame: UnitaryGeneratorPath) -> Result<Self> {
        Self::with_frame_substeps(base, frame, DEFAULT_FRAME_SUBSTEPS)
    }

    /// Path with `E_t = E` for all `t`.
    pub fn constant(base: Projector, horizon: f64) -> Result<Self> {
        let dim = base.dim();
        Self::new(base, UnitaryGeneratorPath::zero(dim, horizon)?)
    }

    pub fn with_frame_substeps(base: Projector, frame: UnitaryGeneratorPath, substeps: usize) -> Result<Self> {
        if base.dim() != frame.dim() {
            return Err(ZenoError::DimensionMismatch { expected: base.dim(), found: frame.dim() });
        }
        if substeps == 0 {
            return Err(ZenoError::InvalidArgument("frame substeps must be positive".into()));
        }
        Ok(Self { base, frame: FramePropagator::new(frame, substeps)?, gauges: Vec::new() })
    }

    pub fn base(&self) -> &Projector {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn horizon(&self) -> f64 {
        self.frame.path.horizon()
    }

    pub fn frame(&self) -> &UnitaryGeneratorPath {
        &self.frame.path
    }

    /// True when no frame rotation or gauge factor is present, so `E_t = E`.
    pub fn is_static(&self) -> bool {
        self.frame.path.generator.is_identically_zero()
            && self.gauges.iter().all(|g| g.path.generator.is_identically_zero())
    }

    /// Checks `t` against the horizon, clamping round-off overshoot.
    pub fn clamp_time(&self, t: f64) -> Result<f64> {
        self.frame.path.generator.clamp_time(t)
    }

    /// Frame unitary `U_t`, including any gauge factors.
    pub fn unitary_at(&self, t: f64) -> Result<Operator> {
        let mut u = self.frame.unitary_at(t)?;
        for g in &self.gauges {
            u = &u * &g.unitary_at(t)?;
        }
        Ok(u)
    }

    /// Generator of [`ProjectorPath::unitary_at`]: with `U = W V`,
    /// `dU/dt = -i (A_W + W B_V W^dagger) U`.
    pub fn generator_at(&self, t: f64) -> Result<Operator> {
        let mut total = self.frame.path.generator.evaluate(t)?;
        if self.gauges.is_empty() {
            return Ok(total);
        }
        let mut w = self.frame.unitary_at(t)?;
        for g in &self.gauges {
            let b = g.path.generator.evaluate(t)?;
            total = &total + &(&(&w * &b) * &w.adjoint());
            w = &w * &g.unitary_at(t)?;
        }
        Ok(total.symmetrized())
    }

    pub fn projector_at(&self, t: f64) -> Result<Projector> {
        if self.is_static() {
            self.clamp_time(t)?;
            return Ok(self.base.clone());
        }
        let u = self.unitary_at(t)?;
        let op = (&(&u * self.base.op()) * &u.adjoint()).symmetrized();
        let projector = Projector::with_tolerance(op, PROPAGATED_PROJECTOR_TOL)?;
        if projector.rank() != self.base.rank() {
            return Err(ZenoError::NotProjector {
                reason: format!("rank changed from {} to {} at t = {t}", self.base.rank(), projector.rank()),
            });
        }
        Ok(projector)
    }

    pub fn projector_derivative(&self, t: f64, mode: DerivativeMode) -> Result<Operator> {
        let t = self.clamp_time(t)?;
        match mode {
            DerivativeMode::Analytic => {
                if self.is_static() {
                    return Ok(Operator::zeros(self.dim()));
                }
                let a = self.generator_at(t)?;
                let e = self.projector_at(t)?;
                Ok(commutator(&a, e.op())?.scale_complex(-I))
            }
            DerivativeMode::FiniteDifference(h) => self.finite_difference(t, h),
        }
    }

    fn finite_difference(&self, t: f64, h: f64) -> Result<Operator> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ZenoError::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
        }
        let horizon = self.horizon();
        if 2.0 * h > horizon {
            return Err(ZenoError::InvalidArgument(format!(
                "finite-difference step {h} too large for horizon {horizon}"
            )));
        }
        let e = |s: f64| -> Result<Operator> { Ok(self.projector_at(s)?.op().clone()) };
        let d = if t - h >= 0.0 && t + h <= horizon {
            &e(t + h)? - &e(t - h)?
        } else if t - h < 0.0 {
            // forward: (-3 E_t + 4 E_{t+h} - E_{t+2h}) / 2h
            &(&e(t + h)?.scale(4.0) - &e(t)?.scale(3.0)) - &e(t + 2.0 * h)?
        } else {
            &(&e(t)?.scale(3.0) - &e(t - h)?.scale(4.0)) + &e(t - 2.0 * h)?
        };
        Ok(d.scale(0.5 / h))
    }

    /// Composes a gauge rotation whose generator commutes with the base
    /// projector. The resulting path has different `U_t` but the same `E_t`.
    pub fn gauge_transform(&self, gauge: UnitaryGeneratorPath) -> Result<ProjectorPath> {
        if gauge.dim() != self.dim() {
            return Err(ZenoError::DimensionMismatch { expected: self.dim(), found: gauge.dim() });
        }
        if (gauge.horizon() - self.horizon()).abs() > 1e-12 * self.horizon().max(1.0) {
            return Err(ZenoError::InvalidArgument(format!(
                "gauge horizon {} differs from path horizon {}",
                gauge.horizon(),
                self.horizon()
            )));
        }
        check_gauge_commutes(&gauge, &self.base)?;
        let propagator = FramePropagator::new(gauge, self.frame.substeps())?;
        let mut out = self.clone();
        out.gauges.push(propagator);
        Ok(out)
    }

    /// First probed time at which `E_t` matches `target` entrywise within
    /// `tol`, probing `n_probe` uniform times on `[0, T]`.
    pub fn reaches_target(&self, target: &Projector, tol: f64, n_probe: usize) -> Result<Option<f64>> {
        if target.dim() != self.dim() {
            return Err(ZenoError::DimensionMismatch { expected: self.dim(), found: target.dim() });
        }
        if !(tol > 0.0) {
            return Err(ZenoError::InvalidArgument(format!("tolerance must be positive, got {tol}")));
        }
        let n_probe = n_probe.max(1);
        for j in 0..n_probe {
            let t = if n_probe == 1 { 0.0 } else { self.horizon() * j as f64 / (n_probe - 1) as f64 };
            if self.projector_at(t)?.op().max_abs_diff(target.op()) <= tol {
                return Ok(Some(t));
            }
        }
        Ok(None)
    }
}

fn check_gauge_commutes(gauge: &UnitaryGeneratorPath, base: &Projector) -> Result<()> {
    let horizon = gauge.horizon();
    for k in 0..GAUGE_PROBES {
        let t = horizon * k as f64 / (GAUGE_PROBES - 1) as f64;
        let b = gauge.generator().evaluate(t)?;
        let residual = commutator(&b, base.op())?.max_abs();
        if residual > GAUGE_COMMUTATION_TOL {
            return Err(ZenoError::GaugePrecondition { t, residual });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Waveform;
    use std::f64::consts::PI;

    fn rotating(omega: f64, horizon: f64) -> ProjectorPath {
        let a = HamiltonianPath::constant(Operator::sigma_y().scale(omega / 2.0), horizon).unwrap();
        ProjectorPath::new(Projector::diagonal(2, 1).unwrap(), UnitaryGeneratorPath::new(a)).unwrap()
    }

    #[test]
    fn unitary_at_examples() {
        let p = rotating(1.3, 2.0);
        assert_eq!(p.unitary_at(0.0).unwrap(), Operator::identity(2));

        for t in [0.25f64, 1.0, 1.2345, 2.0] {
            let (c, s) = ((1.3 * t / 2.0).cos(), (1.3 * t / 2.0).sin());
            let expected = Operator::from_real_rows(&[&[c, -s], &[s, c]]).unwrap();
            assert!(p.unitary_at(t).unwrap().max_abs_diff(&expected) < 1e-12, "t = {t}");
        }

        let a = HamiltonianPath::constant(Operator::diag(&[0.4, -1.1]), 1.0).unwrap();
        let p = ProjectorPath::new(Projector::diagonal(2, 1).unwrap(), UnitaryGeneratorPath::new(a)).unwrap();
        let u = p.unitary_at(0.77).unwrap();
        assert!((u.get(0, 0) - (-I * (0.4 * 0.77)).exp()).norm() < 1e-12);
        assert!((u.get(1, 1) - (I * (1.1 * 0.77)).exp()).norm() < 1e-12);
        assert!(p.unitary_at(1.5).is_err());
    }

    #[test]
    fn projector_at_examples() {
        let p = rotating(2.0, 1.0);
        assert!(p.projector_at(0.0).unwrap().op().max_abs_diff(p.base().op()) < 1e-15);

        // v = (cos(wt/2), sin(wt/2)), E_t = v v^T multiplied out by hand
        for t in [0.1f64, 0.5, 0.9] {
            let (c, s) = (t.cos(), t.sin());
            let expected = Operator::from_real_rows(&[&[c * c, c * s], &[c * s, s * s]]).unwrap();
            assert!(p.projector_at(t).unwrap().op().max_abs_diff(&expected) < 1e-12);
        }

        // generator commuting with E leaves it fixed
        let e = Projector::diagonal(2, 1).unwrap();
        let a = HamiltonianPath::constant(e.op().clone(), 1.0).unwrap();
        let p = ProjectorPath::new(e.clone(), UnitaryGeneratorPath::new(a)).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert!(p.projector_at(t).unwrap().op().max_abs_diff(e.op()) < 1e-12);
        }
    }

    #[test]
    fn derivative_examples() {
        let e = Projector::diagonal(2, 1).unwrap();
        let a = HamiltonianPath::constant(e.op().scale(0.8), 1.0).unwrap();
        let p = ProjectorPath::new(e, UnitaryGeneratorPath::new(a)).unwrap();
        assert!(p.projector_derivative(0.4, DerivativeMode::Analytic).unwrap().max_abs() < 1e-15);

        // A = sy/2: E_t = v v^T with v = (cos(t/2), sin(t/2)), so dE/dt at 0 = sx/2
        let p = rotating(1.0, 1.0);
        let analytic = p.projector_derivative(0.0, DerivativeMode::Analytic).unwrap();
        let fd = p.projector_derivative(0.0, DerivativeMode::FiniteDifference(1e-5)).unwrap();
        assert!(analytic.max_abs_diff(&Operator::sigma_x().scale(0.5)) < 1e-14);
        assert!(analytic.max_abs_diff(&fd) < 1e-8);

        assert!(p.projector_derivative(0.5, DerivativeMode::FiniteDifference(0.0)).is_err());
        assert!(p.projector_derivative(0.5, DerivativeMode::FiniteDifference(-1e-3)).is_err());
        assert!(p.projector_derivative(1.5, DerivativeMode::Analytic).is_err());
    }

    #[test]
    fn finite_difference_is_second_order() {
        let p = rotating(1.7, 1.0);
        for t in [0.0, 0.5, 1.0] {
            let exact = p.projector_derivative(t, DerivativeMode::Analytic).unwrap();
            let gap = |h| p.projector_derivative(t, DerivativeMode::FiniteDifference(h)).unwrap().max_abs_diff(&exact);
            let ratio = gap(1e-2) / gap(5e-3);
            assert!((3.0..=5.0).contains(&ratio), "t = {t}, ratio {ratio}");
        }
    }

    #[test]
    fn gauge_examples() {
        let p = rotating(PI, 1.0);
        let e = p.base().op().clone();

        let phase = HamiltonianPath::linear_combination(vec![(e.clone(), Waveform::cos())], 1.0).unwrap();
        let zero = UnitaryGeneratorPath::zero(2, 1.0).unwrap();
        let block = HamiltonianPath::linear_combination(
            vec![(e.scale(0.9), Waveform::sin()), (Operator::diag(&[0.0, 1.0]), Waveform::Const { value: -2.0 })],
            1.0,
        )
        .unwrap();

        for g in [UnitaryGeneratorPath::new(phase), zero, UnitaryGeneratorPath::new(block)] {
            let q = p.gauge_transform(g).unwrap();
            for k in 0..50 {
                let t = k as f64 / 49.0;
                let gap = p.projector_at(t).unwrap().op().max_abs_diff(q.projector_at(t).unwrap().op());
                assert!(gap <= 1e-8);
            }
        }

        let bad = UnitaryGeneratorPath::new(HamiltonianPath::constant(Operator::sigma_x(), 1.0).unwrap());
        assert!(matches!(p.gauge_transform(bad), Err(ZenoError::GaugePrecondition { .. })));
    }

    #[test]
    fn gauge_changes_unitary_but_not_derivative() {
        let p = rotating(PI, 1.0);
        let g = UnitaryGeneratorPath::new(HamiltonianPath::constant(p.base().op().scale(3.0), 1.0).unwrap());
        let q = p.gauge_transform(g).unwrap();
        assert!(p.unitary_at(0.6).unwrap().max_abs_diff(&q.unitary_at(0.6).unwrap()) > 0.1);
        let dp = p.projector_derivative(0.6, DerivativeMode::Analytic).unwrap();
        let dq = q.projector_derivative(0.6, DerivativeMode::Analytic).unwrap();
        assert!(dp.max_abs_diff(&dq) < 1e-12);
    }

    #[test]
    fn reaches_target_examples() {
        let horizon = 2.0;
        let p = rotating(PI / horizon, horizon);
        assert_eq!(p.reaches_target(p.base(), 1e-9, 11).unwrap(), Some(0.0));

        let flipped = Projector::new(Operator::diag(&[0.0, 1.0])).unwrap();
        let hit = p.reaches_target(&flipped, 1e-6, 101).unwrap().expect("path reaches |1><1|");
        assert!((hit - horizon).abs() <= horizon / 100.0);

        let e = Projector::diagonal(2, 1).unwrap();
        let a = HamiltonianPath::constant(e.op().clone(), horizon).unwrap();
        let fixed = ProjectorPath::new(e, UnitaryGeneratorPath::new(a)).unwrap();
        assert_eq!(fixed.reaches_target(&flipped, 1e-3, 101).unwrap(), None);
        assert!(fixed.reaches_target(&flipped, 0.0, 101).is_err());
    }

    #[test]
    fn time_dependent_frame_stays_a_projector() {
        let a = HamiltonianPath::linear_combination(
            vec![
                (Operator::sigma_y(), Waveform::Cos { omega: 3.0, phase: 0.1 }),
                (Operator::sigma_z(), Waveform::Poly { coefficients: vec![0.2, 1.0] }),
            ],
            1.0,
        )
        .unwrap();
        let p = ProjectorPath::new(Projector::diagonal(2, 1).unwrap(), UnitaryGeneratorPath::new(a)).unwrap();
        for k in 0..=20 {
            let e = p.projector_at(k as f64 / 20.0).unwrap();
            assert_eq!(e.spectral_rank(), 1);
            let u = p.unitary_at(k as f64 / 20.0).unwrap();
            assert!((&u.adjoint() * &u).max_abs_diff(&Operator::identity(2)) < 1e-12);
        }
    }

    #[test]
    fn frame_propagation_is_fourth_order() {
        let a = HamiltonianPath::linear_combination(
            vec![
                (Operator::sigma_y(), Waveform::Cos { omega: 3.0, phase: 0.1 }),
                (Operator::sigma_z(), Waveform::Poly { coefficients: vec![0.2, 1.0] }),
            ],
            1.0,
        )
        .unwrap();
        let e = Projector::diagonal(2, 1).unwrap();
        let frame = UnitaryGeneratorPath::new(a);
        let at = |n: usize| {
            ProjectorPath::with_frame_substeps(e.clone(), frame.clone(), n).unwrap().unitary_at(1.0).unwrap()
        };
        let reference = at(4000);
        let (e1, e2) = (at(10).max_abs_diff(&reference), at(20).max_abs_diff(&reference));
        assert!((12.0..=20.0).contains(&(e1 / e2)), "ratio {}", e1 / e2);
    }
}
