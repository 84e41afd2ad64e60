//! Equilibrium residual `F(λ, v)`: the phase and shape equations on `Σ`, the
//! two constraints, their Galerkin projection and a finite-difference Jacobian.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::JetValue;
use crate::harmonics::{n_coeffs, GridField, SpectralField};
use crate::model::{Evaluated, Model, ModelState};

/// Pointwise field defects and raw constraint values.
#[derive(Clone, Debug)]
pub struct ResidualValue {
    pub r_phase: GridField,
    pub r_shape: GridField,
    pub c_area: f64,
    pub c_phase: f64,
}

impl ResidualValue {
    pub fn inf_norm(&self) -> f64 {
        self.r_phase.max_abs().max(self.r_shape.max_abs()).max(self.c_area.abs()).max(self.c_phase.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.r_phase.values().iter().chain(self.r_shape.values()).all(|v| v.is_finite())
            && self.c_area.is_finite()
            && self.c_phase.is_finite()
    }
}

/// Norms printed by `residual-check`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub phase: f64,
    pub shape: f64,
    pub area: f64,
    pub phase_constraint: f64,
}

impl From<&ResidualValue> for ResidualNorms {
    fn from(r: &ResidualValue) -> Self {
        ResidualNorms { phase: r.r_phase.max_abs(), shape: r.r_shape.max_abs(), area: r.c_area.abs(), phase_constraint: r.c_phase.abs() }
    }
}

struct Fields {
    phase: Option<Vec<f64>>,
    shape: Option<Vec<f64>>,
}

impl Model {
    fn residual_fields(&self, ev: &Evaluated, state: &ModelState, lambda: f64, phase: bool, shape: bool) -> Fields {
        let c = &self.constitutive;
        let grid = self.grid();
        let n = grid.n_nodes();
        let (gamma, mu) = self.multipliers(state, lambda);
        let nodes = ev.geom.nodes();
        let total = |k: usize| {
            let mut f = ev.phi.at(k);
            f.v += lambda;
            f
        };
        let phase = phase.then(|| {
            (0..n)
                .map(|k| {
                    let g = &nodes[k];
                    let f = total(k);
                    let t = f.v;
                    -c.epsilon * g.laplacian(&f) + c.b(t)[1] * g.h * g.h + c.e(t)[1] * g.k + c.w(t)[1] - mu
                })
                .collect()
        });
        let shape = shape.then(|| {
            let bh: Vec<f64> = (0..n).map(|k| c.b(total(k).v)[0] * nodes[k].h).collect();
            let bh_jet = grid.jet_of_values(&bh);
            let mu_sign = if self.corrupt_multiplier_sign { -1.0 } else { 1.0 };
            (0..n)
                .map(|k| {
                    let g = &nodes[k];
                    let f = total(k);
                    let t = f.v;
                    let bd = c.b(t);
                    let ed = c.e(t);
                    let ej: JetValue = f.compose(ed[0], ed[1], ed[2]);
                    let h = g.h;
                    // E-terms enter as +Cof L · D²E, the sign the first variation requires
                    g.laplacian(&bh_jet.at(k)) + 2.0 * h * g.laplacian(&ej)
                        - g.curvature_hessian(&ej)
                        + c.epsilon * (g.curvature_grad(&f) - h * g.grad_norm2(&f))
                        + 2.0 * bd[0] * h * (h * h - g.k)
                        - 2.0 * h * (c.w(t)[0] - gamma - mu_sign * mu * t)
                        - c.pressure
                })
                .collect()
        });
        Fields { phase, shape }
    }

    /// `−εΔ_Σφ + B'H² + E'K + W' − μ` at the total phase `λ + φ`.
    pub fn phase_residual(&self, state: &ModelState, lambda: f64) -> Result<GridField> {
        let ev = self.evaluate(state)?;
        let f = self.residual_fields(&ev, state, lambda, true, false);
        Ok(GridField::new(self.grid().clone(), f.phase.unwrap()))
    }

    /// Shape equation defect
    /// `Δ_Σ(BH) + 2HΔ_Σ E − L·D²_Σ E + ε(∇φ·L∇φ − H|∇φ|²) + 2BH(H²−K) − 2H[W − γ − μ(λ+φ)] − p`.
    pub fn shape_residual(&self, state: &ModelState, lambda: f64) -> Result<GridField> {
        let ev = self.evaluate(state)?;
        let f = self.residual_fields(&ev, state, lambda, false, true);
        Ok(GridField::new(self.grid().clone(), f.shape.unwrap()))
    }

    pub fn full_residual(&self, state: &ModelState, lambda: f64) -> Result<ResidualValue> {
        let ev = self.evaluate(state)?;
        let f = self.residual_fields(&ev, state, lambda, true, true);
        let grid = self.grid();
        let phi_vals: Vec<f64> = (0..grid.n_nodes()).map(|k| ev.phi.v[k]).collect();
        Ok(ResidualValue {
            r_phase: GridField::new(grid.clone(), f.phase.unwrap()),
            r_shape: GridField::new(grid.clone(), f.shape.unwrap()),
            c_area: ev.geom.area() - 4.0 * PI,
            c_phase: ev.geom.integrate_on_sigma(&phi_vals),
        })
    }

    /// Directional derivative of the Lagrangian implied by the residual,
    /// `∫ [R_φ (δφ − δu ∇u·∇φ/s) + R_u e^u s^{-1/2} δu] J ds` plus the
    /// constraint terms from `δζ, δξ`.
    pub fn lagrangian_variation(&self, state: &ModelState, lambda: f64, dir: &ModelState) -> Result<f64> {
        let ev = self.evaluate(state)?;
        let f = self.residual_fields(&ev, state, lambda, true, true);
        let (rp, rs) = (f.phase.unwrap(), f.shape.unwrap());
        let grid = self.grid();
        let dphi = crate::geometry::spectral_jet(&dir.phi, grid)?;
        let du = crate::harmonics::synthesize(&dir.u, grid)?;
        let mut dens = vec![0.0; grid.n_nodes()];
        for (k, g) in ev.geom.nodes().iter().enumerate() {
            let fj = ev.phi.at(k);
            let conv = (g.gu[0] * fj.g[0] + g.gu[1] * fj.g[1]) / g.s;
            let w = g.expu / g.s.sqrt();
            dens[k] = (rp[k] * (dphi.v[k] - du.values()[k] * conv) + rs[k] * w * du.values()[k]) * g.j;
        }
        let phi_vals: Vec<f64> = (0..grid.n_nodes()).map(|k| ev.phi.v[k] + lambda).collect();
        let area = ev.geom.area() - 4.0 * PI;
        let phase = ev.geom.integrate_on_sigma(&phi_vals) - 4.0 * PI * lambda;
        Ok(grid.integrate(&dens) - dir.zeta * area - dir.xi * phase)
    }
}

/// Orthonormal (in `L²(S²)`) symmetry-adapted directions for `(φ, u)`.
#[derive(Clone, Debug)]
pub struct ReducedBasis {
    l_max: usize,
    /// Each element is `(φ-part, u-part)` in orthonormal coefficients.
    elements: Vec<(Vec<f64>, Vec<f64>)>,
    /// u-directions whose coefficient is pinned to zero; each adds a forcing
    /// term `η ρ` to the shape equation and a Galerkin row along `ρ`.
    unfolding: Vec<Vec<f64>>,
}

impl ReducedBasis {
    pub fn new(l_max: usize, elements: Vec<(Vec<f64>, Vec<f64>)>, unfolding: Vec<Vec<f64>>) -> Result<Self> {
        let n = n_coeffs(l_max);
        if elements.iter().any(|(a, b)| a.len() != n || b.len() != n) || unfolding.iter().any(|a| a.len() != n) {
            return Err(Error::Internal("basis vector length does not match l_max".into()));
        }
        Ok(ReducedBasis { l_max, elements, unfolding })
    }

    /// Every `(φ, u)` harmonic up to `l_max`.
    pub fn full(l_max: usize) -> Self {
        let n = n_coeffs(l_max);
        let unit = |k: usize| {
            let mut v = vec![0.0; n];
            v[k] = 1.0;
            v
        };
        let mut elements: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|k| (unit(k), vec![0.0; n])).collect();
        elements.extend((0..n).map(|k| (vec![0.0; n], unit(k))));
        ReducedBasis { l_max, elements, unfolding: Vec::new() }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.elements
    }

    pub fn unfolding(&self) -> &[Vec<f64>] {
        &self.unfolding
    }

    /// Number of unknowns: coefficients, `ζ`, `ξ`, unfolding parameters.
    pub fn dim(&self) -> usize {
        self.elements.len() + 2 + self.unfolding.len()
    }

    /// State from reduced coordinates (unfolding parameters are ignored).
    pub fn state(&self, x: &[f64]) -> ModelState {
        let n = n_coeffs(self.l_max);
        let mut phi = vec![0.0; n];
        let mut u = vec![0.0; n];
        for (a, (ep, eu)) in x.iter().zip(&self.elements) {
            for i in 0..n {
                phi[i] += a * ep[i];
                u[i] += a * eu[i];
            }
        }
        let m = self.elements.len();
        ModelState {
            phi: SpectralField::from_normalized(self.l_max, &phi),
            u: SpectralField::from_normalized(self.l_max, &u),
            zeta: x[m],
            xi: x[m + 1],
        }
    }

    /// Orthogonal projection of a state onto the basis.
    pub fn coordinates(&self, s: &ModelState) -> Vec<f64> {
        let p = s.phi.resized(self.l_max).to_normalized();
        let u = s.u.resized(self.l_max).to_normalized();
        let mut x: Vec<f64> = self.elements.iter().map(|(ep, eu)| dot(ep, &p) + dot(eu, &u)).collect();
        x.push(s.zeta);
        x.push(s.xi);
        x.extend(std::iter::repeat_n(0.0, self.unfolding.len()));
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Galerkin-projected residual in a reduced basis. Constraint rows are scaled
/// by `1/√(4π)`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem<'a> {
    pub model: &'a Model,
    pub basis: &'a ReducedBasis,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(model: &'a Model, basis: &'a ReducedBasis) -> Result<Self> {
        if basis.l_max() > model.l_max() {
            return Err(Error::Resolution { field: basis.l_max(), grid: model.l_max() });
        }
        Ok(GalerkinSystem { model, basis })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Projects a residual onto the basis.
    pub fn project(&self, r: &ResidualValue, eta: &[f64]) -> Vec<f64> {
        let grid = self.model.grid();
        let l = self.basis.l_max();
        let pp = grid.analyze_normalized(r.r_phase.values(), l);
        let mut ps = grid.analyze_normalized(r.r_shape.values(), l);
        for (e, rho) in eta.iter().zip(&self.basis.unfolding) {
            for (p, v) in ps.iter_mut().zip(rho) {
                *p += e * v;
            }
        }
        let scale = 1.0 / (4.0 * PI).sqrt();
        let mut out: Vec<f64> = self.basis.elements.iter().map(|(ep, eu)| dot(ep, &pp) + dot(eu, &ps)).collect();
        out.push(r.c_area * scale);
        out.push(r.c_phase * scale);
        out.extend(self.basis.unfolding.iter().map(|rho| dot(rho, &ps)));
        out
    }

    pub fn eval(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let s = self.basis.state(x);
        let r = self.model.full_residual(&s, lambda)?;
        let eta = &x[self.basis.elements.len() + 2..];
        Ok(self.project(&r, eta))
    }

    /// Central-difference Jacobian in the reduced coordinates.
    pub fn jacobian(&self, x: &[f64], lambda: f64) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut j = DMatrix::zeros(n, n);
        let mut xp = x.to_vec();
        for k in 0..n {
            let h = f64::EPSILON.sqrt() * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let fp = self.eval(&xp, lambda)?;
            xp[k] = x[k] - h;
            let fm = self.eval(&xp, lambda)?;
            xp[k] = x[k];
            for i in 0..n {
                j[(i, k)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(j)
    }

    /// Central difference of the projected residual in `λ`.
    pub fn d_lambda(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let h = f64::EPSILON.sqrt() * lambda.abs().max(1.0);
        let fp = self.eval(x, lambda + h)?;
        let fm = self.eval(x, lambda - h)?;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    }
}

/// Finite-difference Jacobian of the reduced system.
#[derive(Clone, Debug)]
pub struct ReducedJacobian {
    pub basis: ReducedBasis,
    pub matrix: DMatrix<f64>,
}

impl ReducedJacobian {
    pub fn singular_values(&self) -> DVector<f64> {
        self.matrix.clone().svd(false, false).singular_values
    }

    /// 2-norm condition number.
    pub fn condition(&self) -> f64 {
        let s = self.singular_values();
        let max = s.max();
        let min = s.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Solves `J dx = b`, refusing matrices singular to working precision.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        solve_checked(&self.matrix, b)
    }
}

pub(crate) fn solve_checked(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let svd = m.clone().svd(true, true);
    let s = &svd.singular_values;
    let cond = if s.min() == 0.0 { f64::INFINITY } else { s.max() / s.min() };
    if !(cond < 1e14) {
        return Err(Error::Singular { condition: cond });
    }
    let x = svd.solve(&DVector::from_column_slice(b), 0.0).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// FD Jacobian of the Galerkin-projected residual at `state` along `basis`.
pub fn reduced_jacobian(model: &Model, state: &ModelState, lambda: f64, basis: &ReducedBasis) -> Result<ReducedJacobian> {
    let sys = GalerkinSystem::new(model, basis)?;
    let x = basis.coordinates(state);
    let matrix = sys.jacobian(&x, lambda)?;
    Ok(ReducedJacobian { basis: basis.clone(), matrix })
}
