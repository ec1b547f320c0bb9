use std::sync::Arc;

use viscflow_core::domain::*;
use viscflow_core::eos::PressureLaw;
use viscflow_core::momentum::*;
use viscflow_core::relative_energy::*;
use viscflow_core::rheology::ViscousPotential;

fn gamma2() -> PressureLaw {
    PressureLaw::isentropic(1.0, 2.0).unwrap()
}

fn manufactured_model(m: usize, n: usize) -> (Model, Arc<Manufactured>) {
    let d = Domain::new(1.0, 1.0, m).unwrap();
    let bc = BoundaryData::at_rest(&d);
    let law = gamma2();
    let pot = ViscousPotential::newtonian(0.5, 0.2).unwrap();
    let s = Arc::new(Manufactured::new(0.5, 0.3, 1.0, 1.0).unwrap());
    let src = manufactured_sources(s.clone(), law.clone(), pot.clone(), 0.02);
    let model = Model::new(Space::new(d, n, bc).unwrap(), law, pot, 0.02).unwrap().with_sources(src);
    (model, s)
}

#[test]
fn relative_energy_closed_forms() {
    let d = Domain::new(1.0, 1.0, 8).unwrap();
    let space = Space::new(d, 1, BoundaryData::at_rest(&Domain::new(1.0, 1.0, 8).unwrap())).unwrap();
    let law = gamma2();
    let s = ClosureSolution { rho: Arc::new(|_, _| 1.0), u: Arc::new(|_, x| [x[1], 0.0]) };
    let n = space.domain.node_count();
    let coords: Vec<_> = (0..n).map(|k| space.domain.coords(k)).collect();
    let u: Vec<_> = coords.iter().map(|x| [x[1], 0.0]).collect();
    assert_eq!(rel_energy_fields(&space, &law, &vec![1.0; n], &u, &s, 0.0), 0.0);
    // γ = 2, a = 1: E_P(ρ|1) = (ρ − 1)², plus ½ρ|δu|² with δu = (1, 0)
    let rho = vec![1.5; n];
    let u1: Vec<_> = u.iter().map(|v| [v[0] + 1.0, v[1]]).collect();
    let e = rel_energy_fields(&space, &law, &rho, &u1, &s, 0.0);
    assert!((e - (0.25 + 0.75)).abs() < 1e-12, "{e}");
    // ∇ũ = e₁⊗e₂: Frobenius norm 1, divergence 0
    assert!((lipschitz_constant(&space, &law, &s, &[0.0]) - 2.0).abs() < 1e-6);
}

#[test]
fn rr5_identity_and_gronwall_on_manufactured_run() {
    let (model, s) = manufactured_model(12, 8);
    let dt = 0.05;
    let times: Vec<f64> = (0..=4).map(|k| k as f64 * dt).collect();
    check_strong(&model.space, s.as_ref(), &times).unwrap();
    let s0 = model.initial_state(|x, y| s.rho(0.0, [x, y]), |x, y| s.u(0.0, [x, y])).unwrap();
    let tr = model.advance(s0, 0.2, dt).unwrap();
    assert!(tr.failure.is_none());
    let reps = rr5_terms(&model, &tr, s.as_ref()).unwrap();
    assert_eq!(reps.len(), 4);
    for r in &reps {
        assert!(r.slack >= -1e-8 * r.scale);
        assert!(r.identity_defect.abs() <= 1e-9 * r.scale, "{}", r.identity_defect);
        assert_eq!(r.t_defect, 0.0);
        assert!(r.credit >= 0.0);
    }
    let c = lipschitz_constant(&model.space, &model.law, s.as_ref(), &times);
    let g = gronwall_monitor(&reps, c, 1e-12);
    assert!(g.pass, "margin {}", g.margin);
    // independent recurrence for the envelope
    let mut env = reps[0].rel_before;
    let mut credit = 0.0;
    let mut fac = 1.0;
    for (k, r) in reps.iter().enumerate() {
        credit += r.credit;
        fac /= 1.0 - dt * c;
        env = (reps[0].rel_before + credit) * fac;
        assert!((g.envelope[k + 1] - env).abs() <= 1e-12 * env.max(1e-300));
        assert_eq!(g.values[k + 1], r.rel_after);
    }
    assert!(env >= *g.values.last().unwrap());
}

#[test]
fn gronwall_flags_growth_beyond_envelope() {
    let (model, s) = manufactured_model(8, 5);
    let s0 = model.initial_state(|x, y| s.rho(0.0, [x, y]), |x, y| s.u(0.0, [x, y])).unwrap();
    let tr = model.advance(s0, 0.1, 0.05).unwrap();
    let mut reps = rr5_terms(&model, &tr, s.as_ref()).unwrap();
    for r in reps.iter_mut() {
        r.credit = 0.0;
        r.rel_after = 10.0 * (r.rel_before + 1.0);
    }
    assert!(!gronwall_monitor(&reps, 0.0, 1e-12).pass);
}

#[test]
fn vacuum_split_bounds() {
    let (model, s) = manufactured_model(10, 5);
    let law = &model.law;
    let n = model.space.domain.node_count();
    let coords: Vec<_> = (0..n).map(|k| model.space.domain.coords(k)).collect();
    let rho: Vec<f64> = coords.iter().map(|x| if x[0] < 0.3 { 0.05 } else { 1.2 + 0.1 * x[1] }).collect();
    let u: Vec<_> = coords.iter().map(|x| {
        let v = s.u(0.0, *x);
        [v[0] + 0.1 * x[0] * (1.0 - x[0]), v[1]]
    }).collect();
    let a = model.potential.build_a_r(2.0).unwrap();
    let split = vacuum_split_bound(&model.space, law, &rho, &u, s.as_ref(), 0.0, 0.1, (&a, 1.0)).unwrap();
    assert!(split.holds);
    assert!(split.low > 0.0 && split.high > 0.0);
    assert!(split.high <= split.high_young);
    assert!(split.c_high.is_finite());
    assert!((split.rel_energy - rel_energy_fields(&model.space, law, &rho, &u, s.as_ref(), 0.0)).abs() < 1e-15);
    assert!(vacuum_split_bound(&model.space, law, &rho, &u, s.as_ref(), 0.0, 0.0, (&a, 1.0)).is_err());
}

#[test]
fn reference_must_match_boundary_data() {
    let d = Domain::new(1.0, 1.0, 6).unwrap();
    let space = Space::new(d, 2, BoundaryData::at_rest(&Domain::new(1.0, 1.0, 6).unwrap())).unwrap();
    let moving = ClosureSolution { rho: Arc::new(|_, _| 1.0), u: Arc::new(|_, _| [1.0, 0.0]) };
    assert!(check_strong(&space, &moving, &[0.0]).is_err());
    let vacuum = ClosureSolution { rho: Arc::new(|_, _| 0.0), u: Arc::new(|_, _| [0.0, 0.0]) };
    assert!(check_strong(&space, &vacuum, &[0.0]).is_err());
}
