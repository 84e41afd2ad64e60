//! Newton correction in symmetry-reduced coordinates, bifurcation detection on
//! the trivial branch, branch switching and pseudo-arclength continuation.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::n_coeffs;
use crate::linear::{characteristic_roots_variational, crossing_function_variational, mode_data_variational, ModeData};
use crate::model::{Constitutive, Model, ModelState};
use crate::residual::{GalerkinSystem, ReducedBasis};
use crate::symmetry::{bifurcation_direction, fixed_space, reduce_basis, Subgroup};

/// Scalar released as the continuation parameter.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    #[default]
    Lambda,
    Pressure,
    InverseEpsilon,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationConfig {
    /// Amplitude of the branch-switch predictor.
    pub t0: f64,
    pub ds: f64,
    pub ds_min: f64,
    pub ds_max: f64,
    /// Bound on the Euclidean norm of the projected residual.
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_points: usize,
    pub max_folds: usize,
    pub subgroup: String,
    pub l: usize,
    pub l_max: usize,
    pub parameter: Parameter,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            t0: 1e-2,
            ds: 0.02,
            ds_min: 1e-5,
            ds_max: 0.1,
            newton_tol: 1e-9,
            max_newton: 12,
            max_points: 20,
            max_folds: 4,
            subgroup: "D6d".into(),
            l: 3,
            l_max: 16,
            parameter: Parameter::Lambda,
        }
    }
}

impl ContinuationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("t0", self.t0.abs()), ("ds", self.ds), ("ds_min", self.ds_min), ("ds_max", self.ds_max), ("newton_tol", self.newton_tol)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if !(self.ds_min <= self.ds && self.ds <= self.ds_max) {
            return Err(Error::Config("step bounds must satisfy ds_min <= ds <= ds_max".into()));
        }
        if self.max_newton == 0 || self.max_points == 0 {
            return Err(Error::Config("max_newton and max_points must be positive".into()));
        }
        if self.l > self.l_max {
            return Err(Error::Config(format!("l = {} exceeds l_max = {}", self.l, self.l_max)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { tol: 1e-9, max_iter: 20 }
    }
}

#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Residual norm before each iteration and at the end.
    pub history: Vec<f64>,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Least-squares solve discarding singular values below `rcond·σ_max`.
fn lstsq(m: &DMatrix<f64>, b: &[f64], rcond: f64) -> Result<Vec<f64>> {
    let svd = m.clone().svd(true, true);
    let eps = rcond * svd.singular_values.max();
    let x = svd.solve(&DVector::from_column_slice(b), eps).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(x.iter().copied().collect())
}

/// Damped Newton iteration: steps are halved (up to ten times) while the
/// residual does not decrease or cannot be evaluated.
pub fn newton(
    f: impl Fn(&[f64]) -> Result<Vec<f64>>,
    jac: impl Fn(&[f64]) -> Result<DMatrix<f64>>,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonReport> {
    let mut x = x0.to_vec();
    let mut fx = f(&x)?;
    let mut r = norm(&fx);
    let mut history = vec![r];
    for it in 0..opts.max_iter {
        if r <= opts.tol {
            return Ok(NewtonReport { x, iterations: it, history });
        }
        let j = jac(&x)?;
        let neg: Vec<f64> = fx.iter().map(|v| -v).collect();
        let dx = crate::residual::solve_checked(&j, &neg)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..10 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + step * d).collect();
            if let Ok(ft) = f(&xt) {
                let rt = norm(&ft);
                if rt.is_finite() && rt < r {
                    x = xt;
                    fx = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        history.push(r);
        if !accepted {
            return Err(Error::NoConvergence { iterations: it + 1, residual: r });
        }
    }
    if r <= opts.tol {
        Ok(NewtonReport { x, iterations: opts.max_iter, history })
    } else {
        Err(Error::NoConvergence { iterations: opts.max_iter, residual: r })
    }
}

/// Galerkin system with one released scalar parameter.
#[derive(Clone, Debug)]
pub struct ReducedProblem {
    pub model: Model,
    pub basis: ReducedBasis,
    pub parameter: Parameter,
    /// `λ` held fixed when the parameter is not `λ`.
    pub lambda: f64,
    /// Subgroup name recorded on branches.
    pub label: String,
}

impl ReducedProblem {
    pub fn new(model: Model, basis: ReducedBasis, parameter: Parameter, lambda: f64) -> Result<Self> {
        if basis.l_max() > model.l_max() {
            return Err(Error::Resolution { field: basis.l_max(), grid: model.l_max() });
        }
        Ok(ReducedProblem { model, basis, parameter, lambda, label: String::new() })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Current value of the released parameter.
    pub fn parameter_value(&self) -> f64 {
        let c = &self.model.constitutive;
        match self.parameter {
            Parameter::Lambda => self.lambda,
            Parameter::Pressure => c.pressure,
            Parameter::InverseEpsilon => 1.0 / c.epsilon,
        }
    }

    /// Model and `λ` at parameter value `p`.
    pub fn model_at(&self, p: f64) -> (Cow<'_, Model>, f64) {
        let mut c: Constitutive = self.model.constitutive.clone();
        match self.parameter {
            Parameter::Lambda => return (Cow::Borrowed(&self.model), p),
            Parameter::Pressure => c.pressure = p,
            Parameter::InverseEpsilon => c.epsilon = 1.0 / p,
        }
        (Cow::Owned(self.model.with_constitutive(c)), self.lambda)
    }

    pub fn eval(&self, x: &[f64], p: f64) -> Result<Vec<f64>> {
        let (m, lambda) = self.model_at(p);
        GalerkinSystem::new(&m, &self.basis)?.eval(x, lambda)
    }

    pub fn jacobian(&self, x: &[f64], p: f64) -> Result<DMatrix<f64>> {
        let (m, lambda) = self.model_at(p);
        GalerkinSystem::new(&m, &self.basis)?.jacobian(x, lambda)
    }

    /// Central difference in the parameter.
    pub fn d_param(&self, x: &[f64], p: f64) -> Result<Vec<f64>> {
        let h = f64::EPSILON.sqrt() * p.abs().max(1.0);
        let fp = self.eval(x, p + h)?;
        let fm = self.eval(x, p - h)?;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    }

    /// `[J_x | F_p]`, an `n × (n+1)` matrix.
    pub fn extended_jacobian(&self, x: &[f64], p: f64) -> Result<DMatrix<f64>> {
        let n = x.len();
        let j = self.jacobian(x, p)?;
        let fp = self.d_param(x, p)?;
        let mut out = DMatrix::zeros(n, n + 1);
        out.view_mut((0, 0), (n, n)).copy_from(&j);
        for i in 0..n {
            out[(i, n)] = fp[i];
        }
        Ok(out)
    }

    /// Newton on the fixed-parameter system.
    pub fn solve(&self, x0: &[f64], p: f64, opts: &NewtonOptions) -> Result<NewtonReport> {
        newton(|x| self.eval(x, p), |x| self.jacobian(x, p), x0, opts)
    }

    /// Newton on `(F(x, p), g(x, p)) = 0` for a linear constraint
    /// `g = ⟨a, (x, p)⟩ − b`, unknowns `(x, p)`.
    pub fn solve_bordered(&self, y0: &[f64], a: &[f64], b: f64, opts: &NewtonOptions) -> Result<NewtonReport> {
        let n = self.dim();
        let f = |y: &[f64]| -> Result<Vec<f64>> {
            let mut r = self.eval(&y[..n], y[n])?;
            r.push(dot(a, y) - b);
            Ok(r)
        };
        let jac = |y: &[f64]| -> Result<DMatrix<f64>> {
            let e = self.extended_jacobian(&y[..n], y[n])?;
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n + 1)).copy_from(&e);
            for (k, v) in a.iter().enumerate() {
                m[(n, k)] = *v;
            }
            Ok(m)
        };
        newton(f, jac, y0, opts)
    }

    /// Point record for reduced coordinates `x` at parameter `p`.
    pub fn point(&self, x: &[f64], p: f64, iterations: usize, s: f64) -> Result<BranchPoint> {
        let (m, lambda) = self.model_at(p);
        let state = self.basis.state(x);
        let residual = norm(&GalerkinSystem::new(&m, &self.basis)?.eval(x, lambda)?);
        let geom = m.geometry(&state)?;
        let k = self.basis.len();
        Ok(BranchPoint {
            s,
            parameter: p,
            lambda,
            coefficients: x[..k].to_vec(),
            unfolding: x[k + 2..].to_vec(),
            zeta: state.zeta,
            xi: state.xi,
            residual,
            amplitude: norm(&x[..k]),
            energy: m.energy(&state, lambda)?,
            min_j: geom.min_j(),
            iterations,
        })
    }
}

/// One converged point of a branch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    /// Accumulated arclength in `(x, p)`.
    pub s: f64,
    /// Value of the released parameter.
    pub parameter: f64,
    pub lambda: f64,
    /// Reduced `(φ, u)` coordinates.
    pub coefficients: Vec<f64>,
    pub unfolding: Vec<f64>,
    pub zeta: f64,
    pub xi: f64,
    pub residual: f64,
    /// Euclidean norm of the `(φ, u)` coordinates.
    pub amplitude: f64,
    pub energy: f64,
    pub min_j: f64,
    pub iterations: usize,
}

impl BranchPoint {
    /// Full reduced vector `(coefficients, ζ, ξ, unfolding)`.
    pub fn x(&self) -> Vec<f64> {
        let mut x = self.coefficients.clone();
        x.push(self.zeta);
        x.push(self.xi);
        x.extend(&self.unfolding);
        x
    }

    /// `(x, p)`.
    pub fn y(&self) -> Vec<f64> {
        let mut y = self.x();
        y.push(self.parameter);
        y
    }

    pub fn state(&self, basis: &ReducedBasis) -> ModelState {
        basis.state(&self.x())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    StepFloor,
    MaxPoints,
    DegenerateSurface,
    FoldCount,
    /// The corrector fell back onto the trivial branch.
    TrivialReturn,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Branch {
    pub mode: ModeData,
    pub subgroup: String,
    pub parameter: Parameter,
    pub t0: f64,
    pub points: Vec<BranchPoint>,
    pub folds: usize,
    pub termination: Termination,
}

impl Branch {
    /// One JSON object per point.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for p in &self.points {
            out.push_str(&serde_json::to_string(p)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Newton on the Galerkin-projected residual in `basis`, starting from `v0`.
pub fn newton_solve(model: &Model, basis: &ReducedBasis, lambda: f64, v0: &ModelState, opts: &NewtonOptions) -> Result<(ModelState, NewtonReport)> {
    let sys = GalerkinSystem::new(model, basis)?;
    let report = newton(|x| sys.eval(x, lambda), |x| sys.jacobian(x, lambda), &basis.coordinates(v0), opts)?;
    Ok((basis.state(&report.x), report))
}

/// Characteristic roots of degree `l` in `interval` whose crossing function
/// changes sign and whose reduced Jacobian loses exactly one rank.
pub fn detect_bifurcations(model: &Model, l: usize, group: &Subgroup, interval: Option<(f64, f64)>) -> Result<Vec<ModeData>> {
    let fs = fixed_space(l, group)?;
    if fs.dimension != 1 {
        return Err(Error::FixedSpaceDimension { l, group: group.name.clone(), dim: fs.dimension });
    }
    let c = &model.constitutive;
    let basis = reduce_basis(model.l_max().min(l.max(2) + 2), group, true)?;
    let sys = GalerkinSystem::new(model, &basis)?;
    let mut out = Vec::new();
    for lambda in characteristic_roots_variational(l, c).transversal {
        if let Some((a, b)) = interval {
            if lambda < a || lambda > b {
                continue;
            }
        }
        let h = 1e-4 * (1.0 + lambda.abs());
        let (fa, fb) = (crossing_function_variational(lambda - h, l, c), crossing_function_variational(lambda + h, l, c));
        if fa * fb >= 0.0 {
            continue;
        }
        let j = sys.jacobian(&vec![0.0; sys.dim()], lambda)?;
        let mut sv: Vec<f64> = j.svd(false, false).singular_values.iter().copied().collect();
        sv.sort_by(f64::total_cmp);
        let top = sv[sv.len() - 1];
        let simple = sv[0] <= 1e-6 * top && sv.len() > 1 && sv[1] >= 1e3 * sv[0].max(f64::MIN_POSITIVE) && sv[1] > 1e-6 * top;
        if simple {
            out.push(mode_data_variational(l, lambda, c));
        }
    }
    Ok(out)
}

/// Solves with the amplitude pin `⟨v, ẑ⟩ = t₀` and `λ` released, starting
/// from `(t₀ẑ, λ_ℓ)`.
pub fn branch_switch(problem: &ReducedProblem, mode: &ModeData, direction: &ModelState, t0: f64, opts: &NewtonOptions) -> Result<BranchPoint> {
    if problem.parameter != Parameter::Lambda {
        return Err(Error::SwitchFailed("branch switching releases lambda".into()));
    }
    let n = problem.dim();
    let z = problem.basis.coordinates(direction);
    let zn = norm(&z);
    if (zn - 1.0).abs() > 1e-8 {
        return Err(Error::SwitchFailed(format!("direction not in the reduced space (norm {zn})")));
    }
    let mut y0: Vec<f64> = z.iter().map(|v| t0 * v).collect();
    y0.push(mode.lambda);
    let mut a = z.clone();
    a.push(0.0);
    let rep = problem.solve_bordered(&y0, &a, t0, opts)?;
    let p = problem.point(&rep.x[..n], rep.x[n], rep.iterations, 0.0)?;
    if p.amplitude < 0.1 * t0.abs() {
        return Err(Error::SwitchFailed(format!("corrector returned to the trivial branch (amplitude {:.3e})", p.amplitude)));
    }
    Ok(p)
}

/// Unit kernel vector of `[J_x | F_p]`, oriented so that `⟨T_x, x⟩ ≥ 0`.
fn initial_tangent(problem: &ReducedProblem, y: &[f64]) -> Result<Vec<f64>> {
    let n = problem.dim();
    let e = problem.extended_jacobian(&y[..n], y[n])?;
    // pad to square so the SVD returns the full right basis
    let mut sq = DMatrix::zeros(n + 1, n + 1);
    sq.view_mut((0, 0), (n, n + 1)).copy_from(&e);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Internal("svd without vectors".into()))?;
    let k = svd.singular_values.imin();
    let mut t: Vec<f64> = vt.row(k).iter().copied().collect();
    if dot(&t[..n], &y[..n]) < 0.0 {
        t.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(t)
}

/// Secant pseudo-arclength continuation from `start`.
pub fn continue_branch(problem: &ReducedProblem, mode: &ModeData, start: &BranchPoint, cfg: &ContinuationConfig) -> Result<Branch> {
    cfg.validate()?;
    let n = problem.dim();
    let opts = NewtonOptions { tol: cfg.newton_tol, max_iter: cfg.max_newton };
    let mut y = start.y();
    let mut t = initial_tangent(problem, &y)?;
    let mut ds = cfg.ds;
    let mut points = vec![start.clone()];
    let mut folds = 0;
    let mut last_dp = 0.0;
    let mut s = start.s;
    let mut degenerate = false;
    let termination = loop {
        if points.len() >= cfg.max_points {
            break Termination::MaxPoints;
        }
        if ds < cfg.ds_min {
            break if degenerate { Termination::DegenerateSurface } else { Termination::StepFloor };
        }
        let yp: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a + ds * b).collect();
        let b = dot(&t, &y) + ds;
        let step = problem.solve_bordered(&yp, &t, b, &opts).and_then(|rep| {
            let pt = problem.point(&rep.x[..n], rep.x[n], rep.iterations, 0.0)?;
            Ok((rep, pt))
        });
        let (rep, mut pt) = match step {
            Ok(v) => v,
            Err(e) => {
                degenerate = matches!(e, Error::DegenerateSurface(_));
                ds *= 0.5;
                continue;
            }
        };
        let dy: Vec<f64> = rep.x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let len = norm(&dy);
        if len > 1.1 * ds || pt.min_j <= 0.0 {
            degenerate = pt.min_j <= 0.0;
            ds *= 0.5;
            continue;
        }
        degenerate = false;
        if pt.amplitude < 0.05 * cfg.t0.abs() {
            break Termination::TrivialReturn;
        }
        s += len;
        pt.s = s;
        let dp = dy[n];
        if last_dp != 0.0 && dp * last_dp < 0.0 {
            folds += 1;
        }
        if dp != 0.0 {
            last_dp = dp;
        }
        points.push(pt);
        if folds >= cfg.max_folds {
            break Termination::FoldCount;
        }
        t = dy.iter().map(|v| v / len).collect();
        y = rep.x;
        if rep.iterations <= 3 {
            ds = (ds * 1.5).min(cfg.ds_max);
        }
    };
    Ok(Branch {
        mode: *mode,
        subgroup: problem.label.clone(),
        parameter: problem.parameter,
        t0: cfg.t0,
        points,
        folds,
        termination,
    })
}

/// Builds the reduced problem for `cfg.subgroup` and returns it with the
/// detected mode nearest to `lambda_hint` and its direction `ẑ_ℓ`.
pub fn setup(model: &Model, cfg: &ContinuationConfig, lambda_hint: Option<f64>) -> Result<(ReducedProblem, ModeData, ModelState)> {
    cfg.validate()?;
    let group = Subgroup::named(&cfg.subgroup)?;
    let modes = detect_bifurcations(model, cfg.l, &group, None)?;
    let mode = match lambda_hint {
        Some(h) => modes.into_iter().min_by(|a, b| (a.lambda - h).abs().total_cmp(&(b.lambda - h).abs())),
        None => modes.into_iter().next(),
    }
    .ok_or_else(|| Error::SwitchFailed(format!("no bifurcation point for l = {} in {}", cfg.l, cfg.subgroup)))?;
    let basis = reduce_basis(cfg.l_max, &group, true)?;
    let direction = bifurcation_direction(cfg.l_max, &group, &mode)?;
    let mut problem = ReducedProblem::new(model.clone(), basis, Parameter::Lambda, mode.lambda)?;
    problem.label = group.name.clone();
    Ok((problem, mode, direction))
}

/// Switches onto the branch at `mode` with amplitude `t0` and continues it;
/// a non-`λ` parameter is released after the switch.
pub fn run_branch(problem: &ReducedProblem, mode: &ModeData, direction: &ModelState, t0: f64, cfg: &ContinuationConfig) -> Result<Branch> {
    let opts = NewtonOptions { tol: cfg.newton_tol, max_iter: cfg.max_newton.max(20) };
    let start = branch_switch(problem, mode, direction, t0, &opts)?;
    let cfg = ContinuationConfig { t0, ..cfg.clone() };
    if cfg.parameter == Parameter::Lambda {
        return continue_branch(problem, mode, &start, &cfg);
    }
    let mut released = problem.clone();
    released.parameter = cfg.parameter;
    released.lambda = start.lambda;
    let p = released.parameter_value();
    let start = released.point(&start.x(), p, start.iterations, 0.0)?;
    continue_branch(&released, mode, &start, &cfg)
}

/// Outcome of the rigidity probe on the undeformed sphere.
#[derive(Clone, Debug, Serialize)]
pub struct FrozenProbeReport {
    pub lambda: f64,
    pub trials: usize,
    /// Nontrivial zeros of the phase equation and mass constraint alone.
    pub phase_only_patterns: usize,
    /// Starts where the phase equation alone converges to `φ ≡ 0`.
    pub phase_only_trivial: usize,
    /// Nontrivial zeros of the full system with `u ≡ 0`.
    pub full_system_patterns: usize,
    /// Starts converging to `φ ≡ 0`.
    pub trivial: usize,
    /// Starts where the full system stalls at a nonzero residual.
    pub stalled: usize,
    /// Smallest full-system residual reached from a nontrivial phase pattern.
    pub min_pattern_residual: f64,
}

/// Searches for nontrivial `φ` with `u ≡ 0` solving the full system, from
/// `trials` random starts. Each start is first relaxed on the phase equation
/// alone, then passed to Levenberg–Marquardt on phase, shape and constraint
/// equations with unknowns `(φ, ζ, ξ)`.
pub fn frozen_u_probe(model: &Model, lambda: f64, trials: usize, seed: u64) -> Result<FrozenProbeReport> {
    let l = model.l_max();
    let nc = n_coeffs(l);
    let grid = model.grid().clone();
    let phase_basis = {
        let unit = |k: usize| {
            let mut v = vec![0.0; nc];
            v[k] = 1.0;
            v
        };
        ReducedBasis::new(l, (0..nc).map(|k| (unit(k), vec![0.0; nc])).collect(), Vec::new())?
    };
    let sys = GalerkinSystem::new(model, &phase_basis)?;
    // x = (φ coefficients, ζ, ξ)
    let full = |x: &[f64]| -> Result<Vec<f64>> {
        let s = phase_basis.state(x);
        let r = model.full_residual(&s, lambda)?;
        let pp = grid.analyze_normalized(r.r_phase.values(), l);
        let ps = grid.analyze_normalized(r.r_shape.values(), l);
        let scale = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        let mut out = pp;
        out.extend(ps);
        out.push(r.c_area * scale);
        out.push(r.c_phase * scale);
        Ok(out)
    };
    let phase_only = |x: &[f64]| -> Result<Vec<f64>> {
        let mut r = sys.eval(x, lambda)?;
        r.remove(nc);
        Ok(r)
    };
    let fd = |f: &dyn Fn(&[f64]) -> Result<Vec<f64>>, x: &[f64], cols: &[usize]| -> Result<DMatrix<f64>> {
        let f0 = f(x)?;
        let mut j = DMatrix::zeros(f0.len(), cols.len());
        let mut xp = x.to_vec();
        for (c, &k) in cols.iter().enumerate() {
            let h = 1e-6 * x[k].abs().max(1.0);
            xp[k] = x[k] + h;
            let fp = f(&xp)?;
            xp[k] = x[k] - h;
            let fm = f(&xp)?;
            xp[k] = x[k];
            for i in 0..f0.len() {
                j[(i, c)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(j)
    };
    let phase_cols: Vec<usize> = (0..nc).chain([nc + 1]).collect();
    let all_cols: Vec<usize> = (0..nc + 2).collect();
    let tol = 1e-9;
    let pattern = |x: &[f64]| norm(&x[..nc]) > 1e-6;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = FrozenProbeReport {
        lambda,
        trials,
        phase_only_patterns: 0,
        phase_only_trivial: 0,
        full_system_patterns: 0,
        trivial: 0,
        stalled: 0,
        min_pattern_residual: f64::INFINITY,
    };
    for _ in 0..trials {
        let amp = rng.random_range(0.05..1.0);
        let mut c = vec![0.0; nc];
        for (k, v) in c.iter_mut().enumerate().skip(1) {
            let deg = (k as f64).sqrt().floor();
            *v = rng.random_range(-1.0..1.0) / (1.0 + deg);
        }
        let sup = grid.synthesize_normalized(&c, l).iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        let mut x: Vec<f64> = c.iter().map(|v| v * amp / sup).collect();
        x.push(0.0);
        x.push(0.0);

        // stage A: phase equation and mass constraint, unknowns (φ, ξ)
        let mut from_phase_pattern = false;
        for _ in 0..30 {
            let r = match phase_only(&x) {
                Ok(r) => r,
                Err(_) => break,
            };
            if norm(&r) <= tol {
                if pattern(&x) {
                    report.phase_only_patterns += 1;
                    from_phase_pattern = true;
                } else {
                    report.phase_only_trivial += 1;
                }
                break;
            }
            let j = fd(&phase_only, &x, &phase_cols)?;
            let neg: Vec<f64> = r.iter().map(|v| -v).collect();
            let dx = lstsq(&j, &neg, 1e-12)?;
            for (c, &k) in phase_cols.iter().enumerate() {
                x[k] += dx[c];
            }
        }
        if !x.iter().all(|v| v.is_finite()) {
            report.stalled += 1;
            continue;
        }

        // stage B: Levenberg–Marquardt on the full system
        let mut r = match full(&x) {
            Ok(r) => r,
            Err(_) => {
                report.stalled += 1;
                continue;
            }
        };
        let mut rn = norm(&r);
        let mut damping = 1e-3;
        for _ in 0..60 {
            if rn <= tol {
                break;
            }
            let j = fd(&full, &x, &all_cols)?;
            let jt = j.transpose();
            let g = &jt * DVector::from_column_slice(&r);
            let jtj = &jt * &j;
            let mut improved = false;
            for _ in 0..12 {
                let mut a = jtj.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += damping * (1.0 + jtj[(i, i)]);
                }
                let Some(dx) = a.lu().solve(&(-&g)) else {
                    damping *= 10.0;
                    continue;
                };
                let xt: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + d).collect();
                if let Ok(rt) = full(&xt) {
                    let rtn = norm(&rt);
                    if rtn < rn {
                        x = xt;
                        r = rt;
                        rn = rtn;
                        damping = (damping * 0.3).max(1e-12);
                        improved = true;
                        break;
                    }
                }
                damping *= 10.0;
            }
            if !improved {
                break;
            }
        }
        if from_phase_pattern {
            report.min_pattern_residual = report.min_pattern_residual.min(rn);
        }
        if rn <= tol && pattern(&x) {
            report.full_system_patterns += 1;
        } else if rn <= tol {
            report.trivial += 1;
        } else {
            report.stalled += 1;
        }
    }
    Ok(report)
}

/// Directional derivative of the constrained Lagrangian by central
/// differences, including the multiplier coordinates.
pub fn lagrangian_fd(model: &Model, state: &ModelState, lambda: f64, dir: &ModelState, h: f64) -> Result<f64> {
    let lp = model.lagrangian(&state.axpy(h, dir), lambda)?;
    let lm = model.lagrangian(&state.axpy(-h, dir), lambda)?;
    Ok((lp - lm) / (2.0 * h))
}
