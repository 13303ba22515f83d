mod common;

use common::hermitian_from;
use nalgebra::DVector;
use proptest::prelude::*;
use zeno::linalg::{commutator, expm_skew_hermitian, is_projector, project_and_renormalize};
use zeno::{
    effective_hamiltonian, integrate_general, DerivativeMode, HamiltonianPath, Operator, Projector, ProjectorPath,
    StateVector, UnitaryGeneratorPath, C64,
};

fn hermitian(d: usize) -> impl Strategy<Value = Operator> {
    prop::collection::vec(-1.0f64..1.0, 2 * d * d).prop_map(move |xs| Operator::new(hermitian_from(d, &xs)).unwrap())
}

fn dim_and_hermitian(max_dim: usize) -> impl Strategy<Value = Operator> {
    (1..=max_dim).prop_flat_map(hermitian)
}

fn state(d: usize) -> impl Strategy<Value = StateVector> {
    prop::collection::vec(-1.0f64..1.0, 2 * d)
        .prop_filter("non-zero", |xs| xs.iter().map(|x| x * x).sum::<f64>() > 1e-3)
        .prop_map(move |xs| {
            StateVector::normalized(DVector::from_iterator(d, (0..d).map(|k| C64::new(xs[2 * k], xs[2 * k + 1]))))
                .unwrap()
        })
}

/// Rank-1 projector, constant frame generator and Hamiltonian in dimension `d`.
fn moving_rank_one(d: usize) -> impl Strategy<Value = (ProjectorPath, HamiltonianPath, StateVector)> {
    (state(d), hermitian(d), hermitian(d)).prop_map(|(psi, a, h)| {
        let e = Projector::from_state(&psi);
        let frame = UnitaryGeneratorPath::new(HamiltonianPath::constant(a, 1.0).unwrap());
        let path = ProjectorPath::with_frame_substeps(e, frame, 200).unwrap();
        (path, HamiltonianPath::constant(h, 1.0).unwrap(), psi)
    })
}

fn any_moving(max_dim: usize) -> impl Strategy<Value = (ProjectorPath, HamiltonianPath, StateVector)> {
    (2..=max_dim).prop_flat_map(moving_rank_one)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exponential_is_unitary(h in dim_and_hermitian(8), dt in -3.0f64..3.0) {
        let u = expm_skew_hermitian(&h, dt).unwrap();
        let d = h.dim();
        prop_assert!((&u.adjoint() * &u).max_abs_diff(&Operator::identity(d)) < 1e-12);
    }

    #[test]
    fn exponential_is_a_semigroup(h in dim_and_hermitian(8), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let ua = expm_skew_hermitian(&h, a).unwrap();
        let ub = expm_skew_hermitian(&h, b).unwrap();
        let uab = expm_skew_hermitian(&h, a + b).unwrap();
        prop_assert!((&ua * &ub).max_abs_diff(&uab) < 1e-9);
    }

    #[test]
    fn exponential_matches_taylor_oracle(h in dim_and_hermitian(6), dt in -2.0f64..2.0) {
        let u = expm_skew_hermitian(&h, dt).unwrap();
        let oracle = common::taylor_expm(h.matrix(), dt);
        prop_assert!((u.matrix() - oracle).camax() < 1e-10);
    }

    #[test]
    fn commutator_of_hermitians_is_anti_hermitian(a in hermitian(5), b in hermitian(5)) {
        let c = commutator(&a, &b).unwrap();
        prop_assert!((&c + &c.adjoint()).max_abs() < 1e-12);
        let back = commutator(&b, &a).unwrap();
        prop_assert!((&c + &back).max_abs() < 1e-15);
    }

    #[test]
    fn projection_lands_in_range((path, _h, psi) in any_moving(6), other in state(6), t in 0.0f64..1.0) {
        let e = path.projector_at(t).unwrap();
        let d = e.dim();
        let v = StateVector::normalized(other.vector().rows(0, d).into_owned()
            + psi.vector() * C64::new(0.3, 0.0));
        if let Ok(v) = v {
            match project_and_renormalize(&e, &v) {
                Ok((out, p)) => {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&p));
                    prop_assert!((out.norm() - 1.0).abs() < 1e-12);
                    prop_assert!(e.confinement_residual(&out) < 1e-10);
                }
                Err(_) => prop_assert!(e.confinement_residual(&v) > 0.99),
            }
        }
    }

    #[test]
    fn propagated_projector_stays_a_projector((path, _h, _psi) in any_moving(6), t in 0.0f64..1.0) {
        let e = path.projector_at(t).unwrap();
        let (ok, rank) = is_projector(e.op(), 1e-8);
        prop_assert!(ok);
        prop_assert_eq!(rank, Some(path.base().rank()));
    }

    #[test]
    fn derivative_is_tangent_and_off_diagonal((path, _h, _psi) in any_moving(6), t in 0.0f64..1.0) {
        let e = path.projector_at(t).unwrap();
        let de = path.projector_derivative(t, DerivativeMode::Analytic).unwrap();
        prop_assert!(de.hermiticity_residual() < 1e-10);
        let tangent = &(&de * e.op()) + &(e.op() * &de);
        prop_assert!(de.max_abs_diff(&tangent) < 1e-9);
        prop_assert!((&(e.op() * &de) * e.op()).max_abs() < 1e-9);
    }

    #[test]
    fn finite_differences_agree_with_analytic((path, _h, _psi) in any_moving(5), t in 0.0f64..1.0) {
        let analytic = path.projector_derivative(t, DerivativeMode::Analytic).unwrap();
        let fd = path.projector_derivative(t, DerivativeMode::FiniteDifference(1e-3)).unwrap();
        let scale = analytic.max_abs().max(1.0);
        prop_assert!(analytic.max_abs_diff(&fd) < 1e-4 * scale * scale);
    }

    #[test]
    fn effective_generator_is_hermitian((path, h, _psi) in any_moving(6), t in 0.0f64..1.0) {
        let g = effective_hamiltonian(&h, &path, t).unwrap();
        prop_assert!(g.hermiticity_residual < 1e-9);
        prop_assert!(g.k.hermiticity_residual() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn general_route_confines_and_conserves_norm((path, h, psi) in any_moving(4)) {
        let rec = integrate_general(&h, &path, &psi, 1.0, 400).unwrap();
        prop_assert!(rec.max_norm_residual() < 1e-10);
        // confinement error is second order in the step
        prop_assert!(rec.max_confinement_residual() < 1e-3);
        let fine = integrate_general(&h, &path, &psi, 1.0, 800).unwrap();
        prop_assert!(fine.max_confinement_residual() <= rec.max_confinement_residual() * 0.5 + 1e-12);
    }
}
