mod common;

use common::*;
use vesicle_core::harmonics::*;
use vesicle_core::model::*;
use vesicle_core::residual::*;

fn rich_constitutive() -> Constitutive {
    Constitutive {
        bending: Modulus { base: 1.0, jump: 0.4, width: 0.3 },
        gaussian: Modulus { base: -0.3, jump: 0.2, width: 0.4 },
        pressure: 0.3,
        epsilon: 0.05,
        ..Default::default()
    }
}

#[test]
fn trivial_state_annihilates_residual() {
    for c in [Constitutive::default(), rich_constitutive()] {
        let m = Model::new(c, 16);
        for i in 0..30 {
            let lam = -1.5 + 3.0 * i as f64 / 29.0;
            let r = m.full_residual(&ModelState::trivial(16), lam).unwrap();
            assert!(r.inf_norm() <= 1e-9, "λ = {lam}: {}", r.inf_norm());
        }
    }
}

#[test]
fn phase_linearization_by_richardson() {
    let m = Model::new(Constitutive::default(), 10);
    let lam = 0.2;
    for (l, mm) in [(2usize, 1i64), (3, -2), (5, 0)] {
        let rho = SpectralField::basis(10, l, mm, 1.0);
        let lin = |d: f64| {
            let s = ModelState { phi: rho.scaled(d), ..ModelState::trivial(10) };
            analyze(&m.phase_residual(&s, lam).unwrap()).get(l, mm) / d
        };
        let est = (4.0 * lin(5e-4) - lin(1e-3)) / 3.0;
        let want = 0.01 * (l * (l + 1)) as f64 + m.psi(lam)[2];
        assert!((est - want).abs() < 1e-7, "{est} vs {want}");
    }
}

#[test]
fn xi_shifts_phase_residual() {
    let m = Model::new(rich_constitutive(), 8);
    let grid = m.grid().clone();
    let mut r = rng(2);
    let s = ModelState { phi: random_field(&mut r, 8, 4, 0.2, &grid), u: random_field(&mut r, 8, 4, 0.1, &grid), zeta: 0.0, xi: 0.1 };
    let a = m.phase_residual(&s, 0.1).unwrap();
    let b = m.phase_residual(&ModelState { xi: 0.35, ..s.clone() }, 0.1).unwrap();
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((y - x + 0.25).abs() < 1e-12);
    }
}

#[test]
fn uniform_dilation_closed_form() {
    let m = Model::new(rich_constitutive(), 8);
    let c: f64 = 0.15;
    let rr = c.exp();
    for (lam, zeta, xi) in [(0.1, 0.0, 0.0), (-0.4, 0.3, -0.2)] {
        let s = ModelState { phi: SpectralField::zeros(8), u: SpectralField::basis(8, 0, 0, c), zeta, xi };
        let (gamma, mu) = m.multipliers(&s, lam);
        let want = 2.0 / rr * (m.constitutive.w(lam)[0] - gamma - mu * lam) - m.constitutive.pressure;
        let r = m.shape_residual(&s, lam).unwrap();
        assert!(r.values().iter().all(|v| (v - want).abs() < 1e-10));
    }
}

#[test]
fn full_residual_equals_parts() {
    let m = Model::new(rich_constitutive(), 10);
    let grid = m.grid().clone();
    let mut r = rng(4);
    let s = ModelState { phi: random_field(&mut r, 10, 5, 0.3, &grid), u: random_field(&mut r, 10, 4, 0.15, &grid), zeta: 0.2, xi: -0.1 };
    let f = m.full_residual(&s, 0.3).unwrap();
    assert_eq!(f.r_phase.values(), m.phase_residual(&s, 0.3).unwrap().values());
    assert_eq!(f.r_shape.values(), m.shape_residual(&s, 0.3).unwrap().values());
    let (a, p) = m.constraints(&s, 0.3).unwrap();
    assert!((f.c_area - a).abs() < 1e-14 && (f.c_phase - p).abs() < 1e-14);
}

/// The residual is the first variation of the constrained Lagrangian; any
/// transcription error in either equation shows up here.
#[test]
fn residual_is_the_lagrangian_gradient() {
    for c in [Constitutive::default(), rich_constitutive()] {
        let m = Model::new(c, 16);
        let grid = m.grid().clone();
        let mut r = rng(8);
        for _ in 0..3 {
            let s = ModelState { phi: random_field(&mut r, 16, 5, 0.4, &grid), u: random_field(&mut r, 16, 4, 0.15, &grid), zeta: 0.1, xi: 0.05 };
            let d = ModelState { phi: random_field(&mut r, 16, 6, 1.0, &grid), u: random_field(&mut r, 16, 6, 1.0, &grid), zeta: 0.3, xi: -0.7 };
            let lam = 0.25;
            let h = 1e-4;
            let lp = |a: f64| m.lagrangian(&s.axpy(a, &d), lam).unwrap();
            let fd = (8.0 * (lp(h) - lp(-h)) - (lp(2.0 * h) - lp(-2.0 * h))) / (12.0 * h);
            let an = m.lagrangian_variation(&s, lam, &d).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "fd {fd} vs analytic {an}");
        }
    }
}

#[test]
fn corrupted_multiplier_sign_breaks_trivial_branch() {
    let m = Model::new(Constitutive::default(), 8).with_corrupted_multiplier_sign();
    let r = m.full_residual(&ModelState::trivial(8), 0.5).unwrap();
    assert!(r.inf_norm() > 1e-3);
}

#[test]
fn reduced_jacobian_at_trivial_state() {
    let m = Model::new(Constitutive::default(), 6);
    // exclude ℓ=1 u-modes (translations)
    let full = ReducedBasis::full(6);
    let n = n_coeffs(6);
    let elems: Vec<_> = full.elements().iter().filter(|(_, u)| !(1..4).any(|k| u[k] != 0.0)).cloned().collect();
    let basis = ReducedBasis::new(6, elems, vec![]).unwrap();
    assert_eq!(basis.len(), 2 * n - 3);
    let j = reduced_jacobian(&m, &ModelState::trivial(6), 0.05, &basis).unwrap();
    assert_eq!(j.matrix.nrows(), basis.dim());
    assert!(j.condition() < 1e8, "condition {}", j.condition());
    // at a root, z_{2,m} directions are in the kernel
    let lam2 = ((1.0 - 0.06) / 3.0f64).sqrt();
    let j = reduced_jacobian(&m, &ModelState::trivial(6), lam2, &basis).unwrap();
    let s = j.singular_values();
    let scale = s.max();
    assert_eq!(s.iter().filter(|&&v| v <= 1e-6 * scale).count(), 5);
}

#[test]
fn basis_round_trip() {
    let basis = ReducedBasis::full(4);
    let grid = build_grid(4);
    let mut r = rng(1);
    let s = ModelState { phi: random_field(&mut r, 4, 4, 1.0, &grid), u: random_field(&mut r, 4, 4, 1.0, &grid), zeta: 0.5, xi: 2.0 };
    let x = basis.coordinates(&s);
    let back = basis.state(&x);
    for (a, b) in back.phi.coeffs().iter().zip(s.phi.coeffs()).chain(back.u.coeffs().iter().zip(s.u.coeffs())) {
        assert!((a - b).abs() < 1e-13);
    }
    assert_eq!((back.zeta, back.xi), (0.5, 2.0));
}
