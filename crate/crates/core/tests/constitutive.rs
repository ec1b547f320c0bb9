use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use viscflow_core::eos::PressureLaw;
use viscflow_core::rheology::{random_sym, ViscousPotential, YoungFunction, YoungKind};
use viscflow_core::tensor::SymMatrix;

fn potentials() -> Vec<ViscousPotential> {
    vec![
        ViscousPotential::newtonian(1.0, 0.5).unwrap(),
        ViscousPotential::p_potential(1.0, 0.5, 1.5).unwrap(),
        ViscousPotential::p_potential(1.0, 0.0, 2.0).unwrap(),
        ViscousPotential::p_potential(1.0, 0.0, 3.0).unwrap(),
    ]
}

#[test]
fn fenchel_young_gap_on_subgradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for pot in potentials() {
        let closed = matches!(pot.kind, viscflow_core::rheology::PotentialKind::Newtonian { .. });
        let tol = if closed { 1e-8 } else { 1e-4 };
        for dim in [2, 3] {
            for _ in 0..1000 {
                let nrm = 3.0 * rng.gen::<f64>();
                let d = random_sym(&mut rng, dim, nrm);
                let s = pot.subdifferential(&d);
                let gap = pot.fenchel_young_gap(&d, &s).unwrap();
                assert!(gap <= tol && gap >= -1e-9, "{:?} d={dim}: {gap}", pot.kind);
            }
        }
    }
}

#[test]
fn structure_and_young_constants() {
    for gamma in [1.4, 2.0, 3.0] {
        let c = 1.0 / (gamma - 1.0);
        let law = PressureLaw::with_constants(
            viscflow_core::eos::EosKind::Isentropic { a: 1.0, gamma },
            c,
            c,
        )
        .unwrap();
        assert!(law.check_structure(200).unwrap().all_pass());
    }
    for pot in potentials() {
        for r in [0.5, 2.0, 10.0] {
            let a = pot.build_a_r(r).unwrap();
            let (a1, _) = a.delta22(1e-3, 1e3, 400);
            assert!(a1 > 2.0, "{:?}: {a1}", pot.kind);
        }
        let worst = pot.check_coercivity_s5(2.0, 2, 10_000, 5).unwrap();
        assert!(worst >= -1e-9, "{:?}: {worst}", pot.kind);
    }
}

#[test]
fn textbook_power_constant_is_not_a_lower_bound() {
    // the bare (μ0/p) z^p fails once p > 2
    let pot = ViscousPotential::p_potential(3.0, 0.0, 3.0).unwrap();
    let naive = YoungFunction { kind: YoungKind::Power { c: 1.0, p: 3.0 }, r: 2.0 };
    let d = SymMatrix::from_rows2(0.5, 0.0, -0.5) * 2f64.sqrt();
    let q = d * -2.0;
    let gap = pot.evaluate_f(&(d + q)) - pot.evaluate_f(&d) - pot.subdifferential(&d).ddot(&q);
    assert!(gap < naive.eval(q.deviatoric().norm()));
    let built = pot.build_a_r(2.0).unwrap();
    assert!(gap >= built.eval(q.deviatoric().norm()));
}

#[test]
fn young_functions_are_convex() {
    for pot in potentials() {
        let a = pot.build_a_r(3.0).unwrap();
        assert!(a.midpoint_convexity_defect(20.0, 120) <= 1e-12);
        assert_eq!(a.eval(0.0), 0.0);
    }
}

fn law_strategy() -> impl Strategy<Value = PressureLaw> {
    prop_oneof![
        (1.1f64..3.5).prop_map(|g| PressureLaw::isentropic(1.0, g).unwrap()),
        (1.2f64..3.0, 0.0f64..1.0).prop_map(|(g, b)| {
            PressureLaw::with_constants(
                viscflow_core::eos::EosKind::IsentropicPlusLinear { a: 1.0, gamma: g, b },
                0.1,
                10.0,
            )
            .unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn bregman_is_nonnegative(law in law_strategy(), r in 1e-3f64..20.0, rt in 1e-2f64..20.0) {
        let e = law.bregman(r, rt);
        prop_assert!(e >= -1e-10 * (1.0 + law.pot(r).abs() + law.pot(rt).abs()));
        prop_assert!(law.bregman(rt, rt).abs() <= 1e-12 * (1.0 + law.pot(rt).abs()));
    }

    #[test]
    fn pressure_is_monotone(law in law_strategy(), r in 1e-3f64..20.0, h in 1e-3f64..1.0) {
        prop_assert!(law.p(r + h) >= law.p(r));
    }

    #[test]
    fn fenchel_young_gap_is_nonnegative(
        c in proptest::collection::vec(-3.0f64..3.0, 6),
        s in proptest::collection::vec(-3.0f64..3.0, 6),
        dim in 2usize..=3,
    ) {
        let n = SymMatrix::dof(dim);
        let d = SymMatrix::from_coords(dim, &c[..n]);
        let st = SymMatrix::from_coords(dim, &s[..n]);
        for pot in potentials() {
            // only trace-free stresses are in the domain of the p-potential conjugate
            let st = if matches!(pot.kind, viscflow_core::rheology::PotentialKind::Newtonian { .. }) { st } else { st.deviatoric() };
            let gap = pot.fenchel_young_gap(&d, &st).unwrap();
            prop_assert!(gap >= -1e-9, "{:?}: {}", pot.kind, gap);
        }
    }

    #[test]
    fn young_midpoint_convexity(x in 0.0f64..50.0, y in 0.0f64..50.0, p in 1.2f64..4.0) {
        let pot = ViscousPotential::p_potential(1.0, 0.3, p).unwrap();
        let a = pot.build_a_r(2.0).unwrap();
        prop_assert!(a.eval(0.5 * (x + y)) <= 0.5 * (a.eval(x) + a.eval(y)) + 1e-12 * (1.0 + a.eval(x) + a.eval(y)));
    }

    #[test]
    fn kinetic_energy_is_midpoint_convex(
        r1 in 0.0f64..5.0, r2 in 0.0f64..5.0,
        m1 in proptest::collection::vec(-5.0f64..5.0, 2),
        m2 in proptest::collection::vec(-5.0f64..5.0, 2),
    ) {
        use viscflow_core::energy::kinetic_energy_lsc;
        let xi = [1.0, 0.0];
        let mid = [0.5 * (m1[0] + m2[0]), 0.5 * (m1[1] + m2[1])];
        let lhs = kinetic_energy_lsc(0.5 * (r1 + r2), &mid, &xi);
        let rhs = 0.5 * (kinetic_energy_lsc(r1, &m1, &xi) + kinetic_energy_lsc(r2, &m2, &xi));
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-12);
    }
}
