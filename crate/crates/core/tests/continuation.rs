mod common;

use common::*;
use vesicle_core::continuation::*;
use vesicle_core::harmonics::build_grid;
use vesicle_core::model::*;
use vesicle_core::symmetry::*;

const L_MAX: usize = 10;

fn cfg(l: usize, group: &str) -> ContinuationConfig {
    ContinuationConfig { l, subgroup: group.into(), l_max: L_MAX, max_points: 12, ..Default::default() }
}

fn problem(l: usize, group: &str, hint: f64) -> (ReducedProblem, vesicle_core::linear::ModeData, ModelState) {
    let model = Model::new(Constitutive::default(), L_MAX);
    setup(&model, &cfg(l, group), Some(hint)).unwrap()
}

fn opts() -> NewtonOptions {
    NewtonOptions { tol: 1e-9, max_iter: 20 }
}

#[test]
fn trivial_start_is_already_converged() {
    let model = Model::new(Constitutive::default(), L_MAX);
    let basis = reduce_basis(L_MAX, &Subgroup::named("D6d").unwrap(), true).unwrap();
    let (s, rep) = newton_solve(&model, &basis, 0.3, &ModelState::trivial(L_MAX), &opts()).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(s.field_norm(), 0.0);
}

#[test]
fn perturbation_returns_to_trivial_quadratically() {
    let model = Model::new(Constitutive::default(), L_MAX);
    let basis = reduce_basis(L_MAX, &Subgroup::named("D6d").unwrap(), true).unwrap();
    let mut r = rng(4);
    let mut x = vec![0.0; basis.dim()];
    for v in x.iter_mut().take(basis.len()) {
        *v = 0.02 * rand::Rng::random_range(&mut r, -1.0..1.0);
    }
    let (s, rep) = newton_solve(&model, &basis, 0.9, &basis.state(&x), &opts()).unwrap();
    assert!(s.field_norm() < 1e-9, "{}", s.field_norm());
    let h = &rep.history;
    assert!(h.len() >= 3);
    // r_{k+1} <= C r_k² while above the rounding floor
    for w in h.windows(2) {
        if w[1] > 1e-10 {
            assert!(w[1] <= 10.0 * w[0] * w[0], "{h:?}");
        }
    }
}

#[test]
fn detection_on_the_trivial_branch() {
    let model = Model::new(Constitutive::default(), L_MAX);
    let d6d = Subgroup::named("D6d").unwrap();
    let modes = detect_bifurcations(&model, 3, &d6d, None).unwrap();
    let want = ((1.0 - 0.12) / 3.0f64).sqrt();
    assert_eq!(modes.len(), 2);
    assert!((modes[0].lambda + want).abs() < 1e-10 && (modes[1].lambda - want).abs() < 1e-10);

    let scaled = Constitutive { bending: Modulus::constant(3.0), ..Default::default() };
    let m3 = detect_bifurcations(&Model::new(scaled, L_MAX), 3, &d6d, None).unwrap();
    for (a, b) in modes.iter().zip(&m3) {
        assert!((a.lambda - b.lambda).abs() < 1e-12);
    }

    let stiff = Constitutive { epsilon: 0.2, ..Default::default() };
    assert!(detect_bifurcations(&Model::new(stiff, L_MAX), 3, &d6d, None).unwrap().is_empty());

    let only_positive = detect_bifurcations(&model, 3, &d6d, Some((0.0, 1.0))).unwrap();
    assert_eq!(only_positive.len(), 1);
}

#[test]
fn switching_shapes_and_direction_recovery() {
    let (p3, m3, z3) = problem(3, "D6d", 0.5);
    let a = branch_switch(&p3, &m3, &z3, 1e-2, &opts()).unwrap();
    let b = branch_switch(&p3, &m3, &z3, -1e-2, &opts()).unwrap();
    assert!((a.lambda - b.lambda).abs() <= 0.05 * (a.lambda - m3.lambda).abs());

    let (p4, m4, z4) = problem(4, "O2xZ2c", 0.5);
    let a = branch_switch(&p4, &m4, &z4, 1e-2, &opts()).unwrap();
    let b = branch_switch(&p4, &m4, &z4, -1e-2, &opts()).unwrap();
    let (da, db) = (a.lambda - m4.lambda, b.lambda - m4.lambda);
    assert!(da * db < 0.0);
    assert!((da + db).abs() <= 0.05 * da.abs());

    let z = p3.basis.coordinates(&z3);
    let mut prev = f64::INFINITY;
    for t0 in [1e-2, 5e-3, 2.5e-3] {
        let pt = branch_switch(&p3, &m3, &z3, t0, &opts()).unwrap();
        let d: f64 = pt.x().iter().zip(&z).map(|(v, z)| (v / t0 - z).powi(2)).sum::<f64>().sqrt();
        assert!(d < prev && d < 0.1, "{d}");
        prev = d;
    }
}

#[test]
fn constant_moduli_switch_is_phase_dominant() {
    let (p, m, z) = problem(3, "D6d", 0.5);
    let t0 = 1e-2;
    let pt = branch_switch(&p, &m, &z, t0, &opts()).unwrap();
    let s = pt.state(&p.basis);
    let u = s.u.to_normalized();
    let beyond_one: f64 = u.iter().skip(4).map(|v| v * v).sum::<f64>().sqrt();
    assert!(beyond_one / t0 < 1e-2, "{beyond_one}");
    assert!(s.phi.l2_norm() > 0.5 * t0);
}

#[test]
fn continued_branch_invariants() {
    let (p, m, z) = problem(3, "D6d", 0.5);
    let c = cfg(3, "D6d");
    let branch = run_branch(&p, &m, &z, c.t0, &c).unwrap();
    assert!(branch.points.len() >= 10, "{:?}", branch.termination);
    let group = Subgroup::named("D6d").unwrap();
    for (k, pt) in branch.points.iter().enumerate() {
        assert!(pt.residual <= c.newton_tol);
        assert!(pt.min_j > 0.0);
        assert!(pt.amplitude >= 0.05 * c.t0);
        let s = pt.state(&p.basis);
        for g in &group.generators {
            let gs = act(g, &s).unwrap();
            assert!(gs.phi.axpy(-1.0, &s.phi).to_normalized().iter().all(|v| v.abs() < 1e-8));
            assert!(gs.u.axpy(-1.0, &s.u).to_normalized().iter().all(|v| v.abs() < 1e-8));
        }
        if k > 0 {
            let prev = &branch.points[k - 1];
            let d: f64 = pt.y().iter().zip(prev.y()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!((d - (pt.s - prev.s)).abs() < 1e-12);
        }
    }
    let lines = branch.to_json_lines().unwrap();
    assert_eq!(lines.lines().count(), branch.points.len());
    let back: BranchPoint = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(&back, &branch.points[0]);
}

#[test]
fn pitchfork_amplitude_law() {
    let (p, m, z) = problem(3, "D6d", 0.5);
    let c = ContinuationConfig { t0: 2e-3, ds: 2e-3, ds_min: 1e-6, ds_max: 2e-3, max_points: 7, ..cfg(3, "D6d") };
    let branch = run_branch(&p, &m, &z, c.t0, &c).unwrap();
    let xs: Vec<f64> = branch.points.iter().map(|q| q.lambda - m.lambda).collect();
    let ys: Vec<f64> = branch.points.iter().map(|q| q.amplitude.powi(2)).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(r2 >= 0.99, "{r2}");
}

#[test]
fn stepping_back_recovers_the_previous_point() {
    let (p, m, z) = problem(4, "O2xZ2c", 0.5);
    let c = ContinuationConfig { max_points: 5, ..cfg(4, "O2xZ2c") };
    let branch = run_branch(&p, &m, &z, c.t0, &c).unwrap();
    let n = p.dim();
    for k in 1..branch.points.len() - 1 {
        let (yprev, y, ynext) = (branch.points[k - 1].y(), branch.points[k].y(), branch.points[k + 1].y());
        let mut t: Vec<f64> = ynext.iter().zip(&yprev).map(|(a, b)| a - b).collect();
        let tn = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        t.iter_mut().for_each(|v| *v /= -tn);
        let ds: f64 = y.iter().zip(&yprev).zip(&t).map(|((a, b), t)| -(a - b) * t).sum();
        let pred: Vec<f64> = y.iter().zip(&t).map(|(a, t)| a + ds * t).collect();
        let b: f64 = t.iter().zip(&y).map(|(t, a)| t * a).sum::<f64>() + ds;
        let rep = p.solve_bordered(&pred, &t, b, &opts()).unwrap();
        assert!(rep.iterations > 0);
        let err = rep.x.iter().zip(&yprev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "k={k} err={err}");
        assert_eq!(rep.x.len(), n + 1);
    }
}

#[test]
fn branch_points_are_lagrangian_critical() {
    let (p, m, z) = problem(4, "O2xZ2c", 0.5);
    let c = ContinuationConfig { max_points: 6, ..cfg(4, "O2xZ2c") };
    let branch = run_branch(&p, &m, &z, c.t0, &c).unwrap();
    let model = &p.model;
    let grid = build_grid(L_MAX);
    let mut r = rng(31);
    for pt in branch.points.iter().skip(1) {
        let s = pt.state(&p.basis);
        let scale = pt.energy.abs().max(1.0);
        for _ in 0..4 {
            let dir = ModelState { phi: random_field(&mut r, L_MAX, L_MAX, 1.0, &grid), u: random_field(&mut r, L_MAX, L_MAX, 1.0, &grid), zeta: 0.5, xi: -0.5 };
            let d = lagrangian_fd(model, &s, pt.lambda, &dir, 1e-5).unwrap();
            assert!(d.abs() <= 1e-5 * scale, "{d}");
        }
    }
    // the check discriminates: off the branch the derivative is large
    let pt = &branch.points[2];
    let dir = ModelState { phi: random_field(&mut r, L_MAX, 4, 1.0, &grid), u: random_field(&mut r, L_MAX, 4, 1.0, &grid), zeta: 0.0, xi: 0.0 };
    let off = pt.state(&p.basis).axpy(0.05, &dir);
    assert!(lagrangian_fd(model, &off, pt.lambda, &dir, 1e-5).unwrap().abs() > 1e-3 * pt.energy.abs());
}

#[test]
fn pressure_continuation() {
    let (p, m, z) = problem(4, "O2xZ2c", 0.5);
    let c = ContinuationConfig { parameter: Parameter::Pressure, max_points: 5, ..cfg(4, "O2xZ2c") };
    let branch = run_branch(&p, &m, &z, c.t0, &c).unwrap();
    assert_eq!(branch.points.len(), 5);
    assert!(branch.points.iter().all(|q| q.residual <= c.newton_tol && q.lambda == branch.points[0].lambda));
    assert!(branch.points.iter().any(|q| q.parameter != 0.0));
}

#[test]
fn switch_refuses_when_not_releasing_lambda() {
    let (mut p, m, z) = problem(3, "D6d", 0.5);
    p.parameter = Parameter::Pressure;
    assert!(branch_switch(&p, &m, &z, 1e-2, &opts()).is_err());
}

#[test]
fn config_validation() {
    assert!(ContinuationConfig::default().validate().is_ok());
    assert!(ContinuationConfig { ds: 1.0, ..Default::default() }.validate().is_err());
    assert!(ContinuationConfig { newton_tol: 0.0, ..Default::default() }.validate().is_err());
    assert!(ContinuationConfig { l: 20, ..Default::default() }.validate().is_err());
    let parsed: ContinuationConfig = serde_json::from_str(r#"{"t0": 0.02, "parameter": "inverse_epsilon"}"#).unwrap();
    assert_eq!(parsed.parameter, Parameter::InverseEpsilon);
    assert!(serde_json::from_str::<ContinuationConfig>(r#"{"bogus": 1}"#).is_err());
}

#[test]
fn frozen_sphere_admits_no_phase_pattern() {
    let model = Model::new(Constitutive::default(), 3);
    let inside = frozen_u_probe(&model, 0.0, 12, 1).unwrap();
    assert_eq!(inside.full_system_patterns, 0);
    assert!(inside.trivial > 0);
    let outside = frozen_u_probe(&model, 0.9, 12, 2).unwrap();
    assert_eq!(outside.phase_only_patterns + outside.full_system_patterns, 0);
    assert!(outside.phase_only_trivial > outside.trials / 2);
}
