//! Dense complex linear algebra for small Hilbert spaces.
//!
//! [`Operator`], [`StateVector`] and [`Projector`] are thin newtypes over
//! `nalgebra` storage that enforce the structural invariants (squareness,
//! finiteness, normalization, hermiticity, idempotency) the dynamics rely on.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, ZenoError};

pub type C64 = nalgebra::Complex<f64>;

/// Tolerance for the normalization check on construction.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance used by [`Projector::new`] for hermiticity and idempotency.
pub const PROJECTOR_TOL: f64 = 1e-10;
/// Probabilities below this are treated as impossible measurement outcomes.
pub const PROB_FLOOR: f64 = 1e-14;
/// Maximum distance of trace(E) from an integer before a projector is rejected.
pub const RANK_TRACE_TOL: f64 = 1e-6;
/// Hermiticity tolerance for generators handed to [`expm_skew_hermitian`].
pub const HERMITIAN_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square complex matrix with finite entries.
#[derive(Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(ZenoError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(ZenoError::InvalidArgument("operator dimension must be positive".into()));
        }
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                let z = m[(i, j)];
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(ZenoError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        for r in rows {
            if r.len() != d {
                return Err(ZenoError::NotSquare { rows: d, cols: r.len() });
            }
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    /// Real-valued matrix given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        Self(DMatrix::from_fn(d, d, |i, j| if i == j { C64::new(values[i], 0.0) } else { ZERO }))
    }

    pub fn sigma_x() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]))
    }

    pub fn sigma_y() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]))
    }

    pub fn sigma_z() -> Self {
        Self(DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Entrywise maximum modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim(), other.dim(), "max_abs_diff: dimension mismatch");
        self.0.iter().zip(other.0.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Entrywise maximum modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |A - A^dagger| entrywise.
    pub fn hermiticity_residual(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol
    }

    /// (A + A^dagger) / 2
    pub fn symmetrized(&self) -> Self {
        Self((&self.0 + self.0.adjoint()).map(|z| z * 0.5))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn apply(&self, psi: &StateVector) -> DVector<C64> {
        &self.0 * &psi.0
    }

    fn check_same_dim(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(ZenoError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Operator{}", self.0)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

impl Mul<&StateVector> for &Operator {
    type Output = DVector<C64>;
    fn mul(self, rhs: &StateVector) -> DVector<C64> {
        &self.0 * &rhs.0
    }
}

/// Pure state. Constructors check normalization; integrators that need to
/// carry a slightly drifted state use [`StateVector::new_unchecked`].
#[derive(Clone, PartialEq)]
pub struct StateVector(DVector<C64>);

impl StateVector {
    pub fn new(v: DVector<C64>) -> Result<Self> {
        if v.is_empty() {
            return Err(ZenoError::InvalidArgument("state dimension must be positive".into()));
        }
        if let Some(k) = v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(ZenoError::NonFinite { row: k, col: 0 });
        }
        let residual = (v.norm() - 1.0).abs();
        if residual > NORM_TOL {
            return Err(ZenoError::NotNormalized { residual });
        }
        Ok(Self(v))
    }

    pub fn from_amplitudes(amps: &[C64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(amps))
    }

    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn normalized(v: DVector<C64>) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(ZenoError::InvalidArgument("cannot normalize a zero vector".into()));
        }
        Self::new(v.map(|z| z / n))
    }

    pub fn new_unchecked(v: DVector<C64>) -> Self {
        Self(v)
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn amplitudes(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// <self|other>
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.0.dotc(&other.0)
    }

    /// |psi><psi|
    pub fn outer(&self) -> Operator {
        Operator(&self.0 * self.0.adjoint())
    }

    /// Euclidean distance |self - other|, phase included.
    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    /// Rotates the global phase so the largest-magnitude amplitude is real
    /// and positive (first index wins ties).
    pub fn with_phase_convention(&self) -> Self {
        let mut best = 0;
        let mut best_abs = -1.0;
        for (k, z) in self.0.iter().enumerate() {
            if z.norm() > best_abs {
                best_abs = z.norm();
                best = k;
            }
        }
        if best_abs <= 0.0 {
            return self.clone();
        }
        let z = self.0[best];
        let phase = z.conj() / z.norm();
        let mut v = self.0.map(|a| a * phase);
        v[best] = C64::new(v[best].norm(), 0.0);
        Self(v)
    }
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector{:?}", self.0.as_slice())
    }
}

/// Hermitian idempotent operator with its rank.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    op: Operator,
    rank: usize,
}

impl Projector {
    pub fn new(op: Operator) -> Result<Self> {
        let p = Self::with_tolerance(op, PROJECTOR_TOL)?;
        let drift = (p.op.trace().re - p.rank as f64).abs();
        if drift > 1e-8 {
            return Err(ZenoError::NotProjector {
                reason: format!("trace deviates from rank {} by {drift:e}", p.rank),
            });
        }
        Ok(p)
    }

    /// Accepts `op` if it is Hermitian and idempotent within `tol`.
    pub fn with_tolerance(op: Operator, tol: f64) -> Result<Self> {
        let herm = op.hermiticity_residual();
        if herm > tol {
            return Err(ZenoError::NotProjector { reason: format!("not Hermitian (residual {herm:e})") });
        }
        let idem = (&op * &op).max_abs_diff(&op);
        if idem > tol {
            return Err(ZenoError::NotProjector { reason: format!("not idempotent (max |E^2 - E| = {idem:e})") });
        }
        let rank = rank_from_trace(&op)
            .ok_or_else(|| ZenoError::NotProjector { reason: format!("trace {} is not an integer", op.trace().re) })?;
        Ok(Self { op, rank })
    }

    /// Diagonal projector onto the first `rank` basis vectors.
    pub fn diagonal(dim: usize, rank: usize) -> Result<Self> {
        if rank > dim {
            return Err(ZenoError::InvalidArgument(format!("rank {rank} exceeds dimension {dim}")));
        }
        let values: Vec<f64> = (0..dim).map(|k| if k < rank { 1.0 } else { 0.0 }).collect();
        Ok(Self { op: Operator::diag(&values), rank })
    }

    /// Rank-1 projector |v><v|.
    pub fn from_state(psi: &StateVector) -> Self {
        Self { op: psi.outer(), rank: 1 }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// I - E
    pub fn complement(&self) -> Projector {
        Projector { op: &Operator::identity(self.dim()) - &self.op, rank: self.dim() - self.rank }
    }

    /// Rank counted from eigenvalues above 0.5.
    pub fn spectral_rank(&self) -> usize {
        eigen_hermitian(&self.op.symmetrized()).0.iter().filter(|&&l| l > 0.5).count()
    }

    /// Deterministic unit vector in the range of E: the normalized column of
    /// E with the largest norm, phase-fixed by
    /// [`StateVector::with_phase_convention`]. For rank one this is the top
    /// eigenvector.
    pub fn reference_state(&self) -> Result<StateVector> {
        let m = self.op.matrix();
        let mut best = 0;
        let mut best_norm = -1.0;
        for j in 0..m.ncols() {
            let n = m.column(j).norm();
            if n > best_norm {
                best_norm = n;
                best = j;
            }
        }
        if best_norm <= 0.0 {
            return Err(ZenoError::InvalidArgument("projector has rank zero".into()));
        }
        Ok(StateVector::normalized(m.column(best).into_owned())?.with_phase_convention())
    }

    /// |E psi - psi|
    pub fn confinement_residual(&self, psi: &StateVector) -> f64 {
        (self.op.apply(psi) - psi.vector()).norm()
    }
}

fn rank_from_trace(op: &Operator) -> Option<usize> {
    let tr = op.trace().re;
    let r = tr.round();
    if (tr - r).abs() > RANK_TRACE_TOL || r < 0.0 {
        None
    } else {
        Some(r as usize)
    }
}

pub fn adjoint(a: &Operator) -> Operator {
    a.adjoint()
}

/// ab - ba
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    a.check_same_dim(b)?;
    Ok(&(a * b) - &(b * a))
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
pub fn eigen_hermitian(h: &Operator) -> (Vec<f64>, DMatrix<C64>) {
    let eig = h.0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(h.dim(), h.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// exp(-i dt h) for Hermitian `h`, via eigendecomposition.
pub fn expm_skew_hermitian(h: &Operator, dt: f64) -> Result<Operator> {
    let residual = h.hermiticity_residual();
    if residual > HERMITIAN_TOL {
        return Err(ZenoError::NotHermitian { residual });
    }
    if !dt.is_finite() {
        return Err(ZenoError::InvalidArgument(format!("non-finite time step {dt}")));
    }
    let d = h.dim();
    if dt == 0.0 || h.is_zero() {
        return Ok(Operator::identity(d));
    }
    let eig = h.symmetrized().0.symmetric_eigen();
    let v = &eig.eigenvectors;
    let phases = eig.eigenvalues.map(|l| (-I * (l * dt)).exp());
    let mut vp = v.clone();
    for (j, p) in phases.iter().enumerate() {
        let mut col = vp.column_mut(j);
        col *= *p;
    }
    Ok(Operator(vp * v.adjoint()))
}

/// Conditions `psi` on outcome 1 of measuring `e`: returns (E psi / |E psi|, |E psi|^2).
pub fn project_and_renormalize(e: &Projector, psi: &StateVector) -> Result<(StateVector, f64)> {
    if e.dim() != psi.dim() {
        return Err(ZenoError::DimensionMismatch { expected: e.dim(), found: psi.dim() });
    }
    let projected = e.op().apply(psi);
    let norm_sq = projected.norm_squared();
    // normalize by the norm of the input so a slightly drifted psi still
    // yields a conditional probability
    let probability = norm_sq / psi.vector().norm_squared();
    if !(probability >= PROB_FLOOR) {
        return Err(ZenoError::ImpossibleOutcome { probability });
    }
    let state = StateVector::new_unchecked(projected.map(|z| z / norm_sq.sqrt()));
    Ok((state, probability))
}

/// (Hermitian and idempotent within `tol`, rank = round(trace)).
pub fn is_projector(a: &Operator, tol: f64) -> (bool, Option<usize>) {
    if a.hermiticity_residual() > tol {
        return (false, None);
    }
    if (a * a).max_abs_diff(a) > tol {
        return (false, None);
    }
    match rank_from_trace(a) {
        Some(r) => (true, Some(r)),
        None => (false, None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Scaling-and-squaring Taylor series, independent of the eigensolver.
    fn expm_taylor(h: &Operator, dt: f64) -> Operator {
        let d = h.dim();
        let m = h.matrix().map(|z| z * (-I * dt));
        let norm = m.iter().map(|z| z.norm()).sum::<f64>();
        let squarings = (norm.max(1e-300).log2().ceil() as i32 + 2).max(0);
        let scaled = m.map(|z| z / 2f64.powi(squarings));
        let mut term = DMatrix::<C64>::identity(d, d);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &scaled / C64::new(k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        Operator(sum)
    }

    #[test]
    fn adjoint_examples() {
        let id = Operator::identity(2);
        assert_eq!(adjoint(&id), id);
        assert_eq!(adjoint(&Operator::sigma_y()), Operator::sigma_y());
        let n = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        let expected = Operator::from_real_rows(&[&[0.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(adjoint(&n), expected);
    }

    #[test]
    fn commutator_examples() {
        let xz = commutator(&Operator::sigma_x(), &Operator::sigma_z()).unwrap();
        let expected = Operator::sigma_y().scale_complex(c(0.0, -2.0));
        assert!(xz.max_abs_diff(&expected) < 1e-15);

        let a = Operator::sigma_y();
        assert!(commutator(&a, &a).unwrap().is_zero());

        // hand multiplication: diag(1,0) sx = [[0,1],[0,0]], sx diag(1,0) = [[0,0],[1,0]]
        let k = commutator(&Operator::diag(&[1.0, 0.0]), &Operator::sigma_x()).unwrap();
        let expected = Operator::from_real_rows(&[&[0.0, 1.0], &[-1.0, 0.0]]).unwrap();
        assert_eq!(k, expected);

        let err = commutator(&Operator::identity(2), &Operator::identity(3)).unwrap_err();
        assert_eq!(err, ZenoError::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn expm_examples() {
        let u = expm_skew_hermitian(&Operator::sigma_x(), FRAC_PI_2).unwrap();
        let expected = Operator::sigma_x().scale_complex(-I);
        assert!(u.max_abs_diff(&expected) < 1e-14);

        let h = Operator::from_rows(&[vec![c(0.3, 0.0), c(1.0, -2.0)], vec![c(1.0, 2.0), c(-4.0, 0.0)]]).unwrap();
        assert_eq!(expm_skew_hermitian(&h, 0.0).unwrap(), Operator::identity(2));

        let u = expm_skew_hermitian(&Operator::diag(&[1.0, 2.0]), 0.3).unwrap();
        assert!((u.get(0, 0) - (-I * 0.3).exp()).norm() < 1e-15);
        assert!((u.get(1, 1) - (-I * 0.6).exp()).norm() < 1e-15);
        assert!(u.get(0, 1).norm() < 1e-15);
    }

    #[test]
    fn expm_matches_taylor_oracle() {
        let h = Operator::from_rows(&[
            vec![c(0.5, 0.0), c(0.2, -0.7), c(0.0, 0.1)],
            vec![c(0.2, 0.7), c(-1.0, 0.0), c(0.4, 0.0)],
            vec![c(0.0, -0.1), c(0.4, 0.0), c(0.25, 0.0)],
        ])
        .unwrap();
        for dt in [0.01, 0.7, 3.0] {
            let u = expm_skew_hermitian(&h, dt).unwrap();
            assert!(u.max_abs_diff(&expm_taylor(&h, dt)) < 1e-12, "dt = {dt}");
        }
    }

    #[test]
    fn expm_rejects_non_hermitian() {
        let a = Operator::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(expm_skew_hermitian(&a, 1.0), Err(ZenoError::NotHermitian { .. })));
    }

    #[test]
    fn project_examples() {
        let e = Projector::diagonal(2, 1).unwrap();
        let (s, p) = project_and_renormalize(&e, &StateVector::basis(2, 0)).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(s, StateVector::basis(2, 0));

        let err = project_and_renormalize(&e, &StateVector::basis(2, 1)).unwrap_err();
        assert!(matches!(err, ZenoError::ImpossibleOutcome { .. }));

        let plus = StateVector::from_amplitudes(&[c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)]).unwrap();
        let (s, p) = project_and_renormalize(&e, &plus).unwrap();
        assert!((p - 0.5).abs() < 1e-15);
        assert!(s.distance(&StateVector::basis(2, 0)) < 1e-15);

        let e3 = Projector::diagonal(3, 1).unwrap();
        assert!(matches!(
            project_and_renormalize(&e3, &plus),
            Err(ZenoError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn is_projector_examples() {
        assert_eq!(is_projector(&Operator::diag(&[1.0, 1.0, 0.0]), 1e-10), (true, Some(2)));
        assert_eq!(is_projector(&Operator::sigma_x(), 1e-10), (false, None));

        // (I + sx)/2 squared by hand: (I + 2 sx + sx^2)/4 = (2I + 2 sx)/4
        let p = (&Operator::identity(2) + &Operator::sigma_x()).scale(0.5);
        let squared = (&Operator::identity(2).scale(2.0) + &Operator::sigma_x().scale(2.0)).scale(0.25);
        assert!((&p * &p).max_abs_diff(&squared) < 1e-15);
        assert_eq!(is_projector(&p, 1e-10), (true, Some(1)));
    }

    #[test]
    fn projector_rejects_malformed() {
        assert!(Projector::new(Operator::diag(&[1.0, 0.5])).is_err());
        assert!(Projector::new(Operator::from_real_rows(&[&[1.0, 1.0], &[0.0, 0.0]]).unwrap()).is_err());
        let p = Projector::new(Operator::diag(&[0.0, 1.0, 1.0])).unwrap();
        assert_eq!(p.rank(), 2);
        assert_eq!(p.spectral_rank(), 2);
        assert_eq!(p.complement().rank(), 1);
    }

    #[test]
    fn operator_validation() {
        let nan = DMatrix::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(Operator::new(nan), Err(ZenoError::NonFinite { .. })));
        assert!(matches!(Operator::new(DMatrix::zeros(2, 3)), Err(ZenoError::NotSquare { .. })));
        assert!(StateVector::from_amplitudes(&[ONE, ONE]).is_err());
    }

    #[test]
    fn reference_state_phase_convention() {
        let v = StateVector::from_amplitudes(&[c(0.0, 0.6), c(0.0, -0.8)]).unwrap();
        let e = Projector::from_state(&v);
        let r = e.reference_state().unwrap();
        // largest component (index 1) made real positive
        assert!((r.amplitudes()[1] - c(0.8, 0.0)).norm() < 1e-15);
        assert!((r.amplitudes()[0] - c(-0.6, 0.0)).norm() < 1e-15);
        assert!(r.outer().max_abs_diff(e.op()) < 1e-15);
    }
}
