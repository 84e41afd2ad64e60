//! Acceptance criteria, one line each. Exits nonzero on any failure.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use vesicle_core::app::{equivariance_defect, reference_table_defect};
use vesicle_core::continuation::*;
use vesicle_core::geometry::geometry_from_u;
use vesicle_core::harmonics::{build_grid, SpectralField};
use vesicle_core::linear::*;
use vesicle_core::model::*;
use vesicle_core::symmetry::{fixed_space, GroupElement, Subgroup, CATALOG};

const L_MAX: usize = 16;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failures += 1;
        }
        println!("{} {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn run<T>(f: impl FnOnce() -> vesicle_core::Result<T>) -> T {
    f().unwrap_or_else(|e| panic!("{e}"))
}

fn trivial_annihilation(r: &mut Report, model: &Model) {
    let t = Instant::now();
    let zero = ModelState::trivial(L_MAX);
    let worst = (0..30)
        .map(|i| run(|| model.full_residual(&zero, -1.5 + 3.0 * i as f64 / 29.0)).inf_norm())
        .fold(0.0, f64::max);
    let secs = t.elapsed().as_secs_f64();
    r.line(1, "trivial branch", worst <= 1e-9 && secs < 10.0, format!("sup {worst:.3e} (tol 1e-9), {secs:.2} s (limit 10 s)"));
}

fn geometry_locks(r: &mut Report) {
    let grid = build_grid(L_MAX);
    let g = run(|| geometry_from_u(&SpectralField::zeros(L_MAX), &grid));
    let exact = g.nodes().iter().all(|n| n.h == -1.0 && n.k == 1.0 && n.j == 1.0);
    let c = 0.3;
    let g = run(|| geometry_from_u(&SpectralField::basis(L_MAX, 0, 0, c), &grid));
    let dil = g
        .nodes()
        .iter()
        .map(|n| (n.j - (2.0 * c).exp()).abs().max((n.h + (-c).exp()).abs()).max((n.k - (-2.0 * c).exp()).abs()))
        .fold(0.0, f64::max);
    let mut rr = rng(7);
    let mut gb = 0.0f64;
    for _ in 0..10 {
        let u = random_field(&mut rr, L_MAX, 4, 0.3, &grid);
        let g = run(|| geometry_from_u(&u, &grid));
        let k: Vec<f64> = g.nodes().iter().map(|n| n.k).collect();
        gb = gb.max((g.integrate_on_sigma(&k) - 4.0 * PI).abs());
    }
    r.line(
        2,
        "geometry locks",
        exact && dil <= 1e-10 && gb <= 1e-8,
        format!("sphere exact {exact}, dilation {dil:.3e} (tol 1e-10), Gauss-Bonnet {gb:.3e} (tol 1e-8)"),
    );
}

fn roots_closed_form(r: &mut Report) {
    let c = Constitutive::default();
    let mut worst = 0.0f64;
    let mut counts = true;
    for l in 2..=6 {
        let want = ((1.0 - c.epsilon * (l * (l + 1)) as f64) / 3.0).sqrt();
        let roots = characteristic_roots(l, &c).transversal;
        counts &= roots.len() == 2;
        for (got, w) in roots.iter().zip([-want, want]) {
            worst = worst.max((got - w).abs());
        }
    }
    r.line(3, "characteristic roots", counts && worst <= 1e-10, format!("max error {worst:.3e} (tol 1e-10), two roots per l: {counts}"));
}

fn sigma_tau_values(r: &mut Report) {
    let c = Constitutive { bending: Modulus { base: 0.9, jump: 0.2, width: 0.1 }, ..Default::default() };
    let (s2, t2) = sigma_tau(2, 0.0, &c);
    let hand = (s2 - 2.0 / 3.0).abs().max((t2 + 1.0 / 3.0).abs());
    let mut constant = 0.0f64;
    for l in 2..=10 {
        for b0 in [0.5, 1.0, 3.0] {
            for p in [0.0, 0.7] {
                let c = Constitutive { bending: Modulus::constant(b0), pressure: p, ..Default::default() };
                for lam in [-0.8, -0.2, 0.4, 0.9] {
                    constant = constant.max(sigma_tau(l, lam, &c).1.abs());
                }
            }
        }
    }
    let rich = Constitutive {
        bending: Modulus { base: 1.0, jump: 0.4, width: 0.3 },
        gaussian: Modulus { base: -0.3, jump: 0.2, width: 0.4 },
        pressure: 0.3,
        ..Default::default()
    };
    let tau1 = [-0.5, 0.0, 0.3].iter().map(|&lam| sigma_tau(1, lam, &rich).1.abs()).fold(0.0, f64::max);
    r.line(
        4,
        "sigma and tau",
        hand <= 1e-12 && constant == 0.0 && tau1 == 0.0,
        format!("hand values {hand:.3e} (tol 1e-12), constant-moduli |tau| {constant:.1e}, |tau_1| {tau1:.1e}"),
    );
}

fn linearization(r: &mut Report, model: &Model) {
    let grid = build_grid(8);
    let mut rr = rng(21);
    let mut worst = 0.0f64;
    for &lam in &[-1.2, -0.5, 0.0, 0.3, 0.9] {
        for _ in 0..20 {
            let z = ModelState { phi: random_field(&mut rr, 8, 8, 1.0, &grid), u: random_field(&mut rr, 8, 8, 1.0, &grid), zeta: 0.7, xi: -0.4 };
            worst = worst.max(run(|| linearization_defect(model, lam, &z, false)));
        }
    }
    r.line(5, "linearization vs FD", worst <= 1e-6, format!("max relative defect {worst:.3e} over 5 lambda x 20 directions (tol 1e-6)"));
}

fn null_space_census(r: &mut Report) {
    let c = Constitutive::default();
    let generic = run(|| null_space_dimension(0.05, 8, &c));
    let mut ok = generic.dimension == 3 && generic.separation >= 1e3;
    let mut detail = format!("generic {} (sep {:.1e})", generic.dimension, generic.separation);
    for l in [2usize, 3] {
        for md in modes(l, &c) {
            let ns = run(|| null_space_dimension(md.lambda, 8, &c));
            ok &= ns.dimension == 3 + 2 * l + 1 && ns.separation >= 1e3;
            detail += &format!(", l={l} at {:+.4}: {} (sep {:.1e})", md.lambda, ns.dimension, ns.separation);
        }
    }
    r.line(6, "null-space census", ok, detail);
}

fn coefficient_ratios(r: &mut Report) {
    let t = Instant::now();
    let (ratio, dims) = run(reference_table_defect);
    let mut degree_one = true;
    for name in CATALOG {
        let dim = run(|| fixed_space(1, &Subgroup::named(name)?)).dimension;
        let want = match *name {
            "O2_minus" => 1,
            // building blocks outside the reference catalog; x₃ is fixed
            "SO2" => 1,
            "trivial" => 3,
            _ => 0,
        };
        degree_one &= dim == want;
    }
    let secs = t.elapsed().as_secs_f64();
    r.line(
        7,
        "fixed-space coefficients",
        ratio <= 1e-6 && dims && degree_one && secs < 60.0,
        format!("max relative deviation {ratio:.3e} (tol 1e-6), reference dimensions one: {dims}, degree-1 census: {degree_one}, {secs:.2} s (limit 60 s)"),
    );
}

fn equivariance(r: &mut Report, model: &Model) {
    let grid = build_grid(L_MAX);
    let mut rr = rng(13);
    let mut worst = 0.0f64;
    for k in 0..20 {
        let s = ModelState {
            phi: random_field(&mut rr, L_MAX, 4, 0.3, &grid),
            u: random_field(&mut rr, L_MAX, 4, 0.05, &grid),
            zeta: 0.1,
            xi: -0.2,
        };
        let g = match k {
            0 => GroupElement::identity().neg(),
            1 => GroupElement::diag(1.0, 1.0, -1.0),
            _ => run(|| GroupElement::new(random_orthogonal(&mut rr, k % 2 == 0))),
        };
        worst = worst.max(run(|| equivariance_defect(model, &s, 0.2, &g)));
    }
    r.line(8, "equivariance", worst <= 1e-6, format!("max defect {worst:.3e} over 20 pairs incl. -I and reflections (tol 1e-6)"));
}

fn branches(r: &mut Report, model: &Model) -> Option<(ReducedProblem, Branch)> {
    let t = Instant::now();
    let opts = NewtonOptions { tol: 1e-9, max_iter: 20 };
    let cfg3 = ContinuationConfig { l: 3, subgroup: "D6d".into(), l_max: L_MAX, ..Default::default() };
    let (p3, m3, z3) = run(|| setup(model, &cfg3, Some(0.5)));
    let a = run(|| branch_switch(&p3, &m3, &z3, 1e-2, &opts));
    let b = run(|| branch_switch(&p3, &m3, &z3, -1e-2, &opts));
    let pitch = (a.lambda - b.lambda).abs() / (a.lambda - m3.lambda).abs();
    let z = p3.basis.coordinates(&z3);
    let recovery = a.x().iter().zip(&z).map(|(v, z)| (v / 1e-2 - z).powi(2)).sum::<f64>().sqrt();

    let cfg4 = ContinuationConfig { l: 4, subgroup: "O2xZ2c".into(), ..cfg3.clone() };
    let (p4, m4, z4) = run(|| setup(model, &cfg4, Some(0.5)));
    let c = run(|| branch_switch(&p4, &m4, &z4, 1e-2, &opts));
    let d = run(|| branch_switch(&p4, &m4, &z4, -1e-2, &opts));
    let (dc, dd) = (c.lambda - m4.lambda, d.lambda - m4.lambda);
    let trans = (dc + dd).abs() / dc.abs();
    let opposite = dc * dd < 0.0;

    let mut counts = Vec::new();
    let mut worst_res = 0.0f64;
    let mut min_j = f64::INFINITY;
    let mut kept = None;
    for sign in [1.0, -1.0] {
        let br = run(|| run_branch(&p3, &m3, &z3, sign * cfg3.t0, &cfg3));
        counts.push(br.points.len());
        for q in &br.points {
            worst_res = worst_res.max(q.residual);
            min_j = min_j.min(q.min_j);
        }
        if kept.is_none() {
            kept = Some(br);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    let pass = pitch <= 0.05
        && trans <= 0.05
        && opposite
        && recovery <= 0.1
        && counts.iter().all(|&n| n >= 10)
        && worst_res <= 1e-8
        && min_j > 0.0
        && secs < 300.0;
    r.line(
        9,
        "branch behavior",
        pass,
        format!(
            "l=3 pitchfork {pitch:.3e}, l=4 transcritical {trans:.3e} (tol 0.05, opposite sides {opposite}), recovery {recovery:.3e} (tol 0.1), points {counts:?} (min 10), residual {worst_res:.3e} (tol 1e-8), min J {min_j:.3}, {secs:.1} s (limit 300 s)"
        ),
    );
    kept.map(|b| (p3, b))
}

fn rigidity_probe(r: &mut Report) {
    let model = Model::new(Constitutive::default(), 4);
    let rep = run(|| frozen_u_probe(&model, 0.0, 50, 2024));
    r.line(
        10,
        "frozen-u probe",
        rep.full_system_patterns == 0,
        format!(
            "50 starts at lambda 0: {} full-system patterns (need 0); {} trivial, {} stalled, {} phase-equation-only patterns",
            rep.full_system_patterns, rep.trivial, rep.stalled, rep.phase_only_patterns
        ),
    );
}

fn energy_stationarity(r: &mut Report, found: Option<(ReducedProblem, Branch)>) {
    let Some((p, branch)) = found else {
        r.line(11, "energy stationarity", false, "no branch".into());
        return;
    };
    let grid = build_grid(L_MAX);
    let mut rr = rng(31);
    let mut worst = 0.0f64;
    let picks: Vec<_> = branch.points.iter().skip(1).step_by(3).take(5).collect();
    for pt in &picks {
        let s = pt.state(&p.basis);
        let scale = pt.energy.abs().max(1.0);
        for _ in 0..10 {
            let dir = ModelState {
                phi: random_field(&mut rr, L_MAX, L_MAX, 1.0, &grid),
                u: random_field(&mut rr, L_MAX, L_MAX, 1.0, &grid),
                zeta: 0.5,
                xi: -0.5,
            };
            worst = worst.max(run(|| lagrangian_fd(&p.model, &s, pt.lambda, &dir, 1e-5)).abs() / scale);
        }
    }
    r.line(
        11,
        "energy stationarity",
        picks.len() == 5 && worst <= 1e-5,
        format!("{} points x 10 directions, max |dL|/scale {worst:.3e} (tol 1e-5)", picks.len()),
    );
}

fn main() -> ExitCode {
    let t = Instant::now();
    let model = Model::new(Constitutive::default(), L_MAX);
    let mut r = Report { failures: 0 };
    trivial_annihilation(&mut r, &model);
    geometry_locks(&mut r);
    roots_closed_form(&mut r);
    sigma_tau_values(&mut r);
    linearization(&mut r, &model);
    null_space_census(&mut r);
    coefficient_ratios(&mut r);
    equivariance(&mut r, &model);
    let found = branches(&mut r, &model);
    rigidity_probe(&mut r);
    energy_stationarity(&mut r, found);
    println!("acceptance: {} of 11 passed in {:.1} s", 11 - r.failures, t.elapsed().as_secs_f64());
    if r.failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
