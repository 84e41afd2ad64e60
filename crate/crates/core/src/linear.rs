//! Linearization about the trivial branch: characteristic roots, amplitude
//! factors, the analytic operator `L(λ)` and its null space.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{index_lm, n_coeffs, SpectralField};
use crate::model::{bisect, Constitutive, ModelState};

/// Closed-form operator components divided by the finite-difference linearization
/// of the implemented residual: the shape row carries an extra factor 2 and the
/// area row is `∫ν` rather than `∫2ν`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearNormalization {
    pub shape: f64,
    pub area: f64,
}

pub const NORMALIZATION: LinearNormalization = LinearNormalization { shape: 2.0, area: 0.5 };

/// One root of the characteristic equation with its amplitude factors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeData {
    pub l: usize,
    pub lambda: f64,
    pub sigma: f64,
    pub tau: f64,
    /// `σ̂'(λ_ℓ) = Ψ'''(λ_ℓ)`.
    pub slope: f64,
    pub pitchfork: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Roots {
    /// Sign-changing roots, ascending.
    pub transversal: Vec<f64>,
    /// Roots where `σ̂` touches zero without changing sign.
    pub tangential: Vec<f64>,
}

fn degree_factor(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

/// `σ̂(λ) = εℓ(ℓ+1) + Ψ''(λ)`.
pub fn crossing_function(lambda: f64, l: usize, c: &Constitutive) -> f64 {
    c.epsilon * degree_factor(l) + c.psi(lambda)[2]
}

/// Default search interval: the spinodal hull widened by 20%.
pub fn default_interval(c: &Constitutive) -> (f64, f64) {
    match c.spinodal() {
        Ok((a, b)) => {
            let pad = 0.1 * (b - a);
            (a - pad, b + pad)
        }
        Err(_) => c.scan_window(),
    }
}

pub fn characteristic_roots(l: usize, c: &Constitutive) -> Roots {
    characteristic_roots_in(l, c, default_interval(c))
}

/// Roots of `σ̂` on `interval` by sign scan and bisection; tangential roots
/// are located at the zeros of `Ψ'''` where `|σ̂|` is at rounding level.
pub fn characteristic_roots_in(l: usize, c: &Constitutive, interval: (f64, f64)) -> Roots {
    find_roots(|t| crossing_function(t, l, c), |t| c.psi(t)[3], interval, c.epsilon * degree_factor(l))
}

/// Root scan shared by the closed-form and variational crossing functions.
pub(crate) fn find_roots(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, (a, b): (f64, f64), scale: f64) -> Roots {
    let n = 4000;
    let xs: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Roots::default();
    let tol = 1e-12 * scale.max(1.0);
    for i in 0..n {
        let (f0, f1) = (fs[i], fs[i + 1]);
        if f0 == 0.0 {
            let left = if i > 0 { fs[i - 1] } else { f1 };
            if left * f1 < 0.0 {
                out.transversal.push(xs[i]);
            }
        } else if f0 * f1 < 0.0 {
            out.transversal.push(bisect(&f, xs[i], xs[i + 1], 1e-15));
        }
    }
    let dfs: Vec<f64> = xs.iter().map(|&x| df(x)).collect();
    for i in 0..n {
        if dfs[i] * dfs[i + 1] < 0.0 || (dfs[i] == 0.0 && i > 0) {
            let t = if dfs[i] == 0.0 { xs[i] } else { bisect(&df, xs[i], xs[i + 1], 1e-15) };
            if f(t).abs() <= tol && !out.transversal.iter().any(|r| (r - t).abs() < 1e-6) {
                out.tangential.push(t);
            }
        }
    }
    out
}

/// Closed-form `(σ_ℓ, τ_ℓ)`; `τ₁ = 0`.
pub fn sigma_tau(l: usize, lambda: f64, c: &Constitutive) -> (f64, f64) {
    let n = degree_factor(l);
    let (b, db, de) = (c.b(lambda)[0], c.b(lambda)[1], c.e(lambda)[1]);
    let sigma = -(de * (2.0 + n) + db * (2.0 - n)) / (n * b + c.pressure);
    let tau = if l < 2 { 0.0 } else { 2.0 * sigma / (2.0 - n) };
    (sigma, tau)
}

/// Displacement amplitude of null vectors of the variational linearization.
pub fn tau_variational(l: usize, lambda: f64, c: &Constitutive) -> f64 {
    if l < 2 {
        return 0.0;
    }
    let n = degree_factor(l);
    -2.0 * (c.b(lambda)[1] + c.e(lambda)[1]) / (n * c.b(lambda)[0] + c.pressure)
}

/// Crossing function of the variational linearization, including the
/// phase–shape coupling through `B' + E'`.
pub fn crossing_function_variational(lambda: f64, l: usize, c: &Constitutive) -> f64 {
    let n = degree_factor(l);
    let coupling = c.b(lambda)[1] + c.e(lambda)[1];
    crossing_function(lambda, l, c) + coupling * (n - 2.0) * tau_variational(l, lambda, c)
}

pub fn characteristic_roots_variational(l: usize, c: &Constitutive) -> Roots {
    let h = 1e-6;
    let f = |t: f64| crossing_function_variational(t, l, c);
    find_roots(f, |t| (f(t + h) - f(t - h)) / (2.0 * h), default_interval(c), c.epsilon * degree_factor(l))
}

pub fn mode_data(l: usize, lambda: f64, c: &Constitutive) -> ModeData {
    let (sigma, tau) = sigma_tau(l, lambda, c);
    ModeData { l, lambda, sigma, tau, slope: c.psi(lambda)[3], pitchfork: l % 2 == 1 }
}

/// Mode data for the variational linearization: `τ` from
/// [`tau_variational`], `σ = (2 − ℓ(ℓ+1))τ/2`, slope of the variational
/// crossing function.
pub fn mode_data_variational(l: usize, lambda: f64, c: &Constitutive) -> ModeData {
    let tau = tau_variational(l, lambda, c);
    let h = 1e-6;
    let slope = (crossing_function_variational(lambda + h, l, c) - crossing_function_variational(lambda - h, l, c)) / (2.0 * h);
    ModeData { l, lambda, sigma: 0.5 * (2.0 - degree_factor(l)) * tau, tau, slope, pitchfork: l % 2 == 1 }
}

/// Transversal roots for `l` with their mode data.
pub fn modes(l: usize, c: &Constitutive) -> Vec<ModeData> {
    characteristic_roots(l, c).transversal.into_iter().map(|t| mode_data(l, t, c)).collect()
}

/// Image of `L(λ)` applied to `(G, ν, ζ, ξ)`: two fields and two reals.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearImage {
    pub phase: SpectralField,
    pub shape: SpectralField,
    pub area: f64,
    pub mass: f64,
}

impl LinearImage {
    pub fn inf_norm(&self) -> f64 {
        let m = |f: &SpectralField| f.coeffs().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        m(&self.phase).max(m(&self.shape)).max(self.area.abs()).max(self.mass.abs())
    }
}

fn apply_generic(lambda: f64, z: &ModelState, c: &Constitutive, variational: bool) -> LinearImage {
    let l_max = z.l_max();
    let g = z.phi.resized(l_max);
    let nu = z.u.resized(l_max);
    let (b, db) = (c.b(lambda)[0], c.b(lambda)[1]);
    let de = c.e(lambda)[1];
    let psi2 = c.psi(lambda)[2];
    let p = c.pressure;
    let nc = n_coeffs(l_max);
    let mut phase = vec![0.0; nc];
    let mut shape = vec![0.0; nc];
    for k in 0..nc {
        let n = degree_factor(index_lm(k).0);
        let (gk, vk) = (g.coeffs()[k], nu.coeffs()[k]);
        phase[k] = (c.epsilon * n + psi2) * gk;
        let lap_g = if variational { -2.0 * (db + de) } else { 2.0 * (de - db) };
        shape[k] = lap_g * (-n) * gk + (b * n * n - (2.0 * b - p) * n - 2.0 * p) * vk - 4.0 * (db + de) * gk;
        if variational {
            phase[k] -= (db + de) * (2.0 - n) * vk;
        }
    }
    phase[0] -= z.xi;
    shape[0] -= 4.0 * (z.zeta + lambda * z.xi);
    let area = 4.0 * PI * nu.coeffs()[0];
    let mass = 4.0 * PI * g.coeffs()[0];
    LinearImage {
        phase: SpectralField::from_coeffs(l_max, phase).expect("length matches"),
        shape: SpectralField::from_coeffs(l_max, shape).expect("length matches"),
        area: if variational { 2.0 * area } else { area },
        mass,
    }
}

/// The four closed-form components of `L(λ)`.
pub fn apply_l(lambda: f64, z: &ModelState, c: &Constitutive) -> LinearImage {
    apply_generic(lambda, z, c, false)
}

/// Linearization of the implemented residual at the trivial state, in the
/// closed-form scaling of the shape row (twice the residual derivative) and with
/// the area row `2∫ν`.
pub fn apply_l_variational(lambda: f64, z: &ModelState, c: &Constitutive) -> LinearImage {
    apply_generic(lambda, z, c, true)
}

/// `L(λ)` as a matrix on orthonormal coordinates
/// `(G_k, ν_k, ζ, ξ)`, rows `(phase_k, shape_k, area, mass)`; constraint
/// rows are divided by `√(4π)`.
pub fn l_matrix(lambda: f64, l_max: usize, c: &Constitutive, variational: bool) -> DMatrix<f64> {
    let nc = n_coeffs(l_max);
    let dim = 2 * nc + 2;
    let mut m = DMatrix::zeros(dim, dim);
    let r4 = (4.0 * PI).sqrt();
    for col in 0..dim {
        let mut z = ModelState::trivial(l_max);
        // unit orthonormal coefficient -> unnormalized value
        if col < nc {
            let (l, mm) = index_lm(col);
            z.phi = SpectralField::basis(l_max, l, mm, 1.0 / crate::harmonics::harmonic_norm(l, mm));
        } else if col < 2 * nc {
            let (l, mm) = index_lm(col - nc);
            z.u = SpectralField::basis(l_max, l, mm, 1.0 / crate::harmonics::harmonic_norm(l, mm));
        } else if col == 2 * nc {
            z.zeta = 1.0;
        } else {
            z.xi = 1.0;
        }
        let img = apply_generic(lambda, &z, c, variational);
        let p = img.phase.to_normalized();
        let s = img.shape.to_normalized();
        for r in 0..nc {
            m[(r, col)] = p[r];
            m[(nc + r, col)] = s[r];
        }
        m[(2 * nc, col)] = img.area / r4;
        m[(2 * nc + 1, col)] = img.mass / r4;
    }
    m
}

/// Predicted null vectors: translations `(0, ρ_{1,j})` plus, at a root,
/// `z_{ℓ,m} = (ρ_{ℓ,m}, τ_ℓ ρ_{ℓ,m})`.
pub fn null_basis(l_max: usize, mode: Option<&ModeData>) -> Vec<ModelState> {
    let mut out: Vec<ModelState> = [1i64, -1, 0]
        .iter()
        .map(|&m| ModelState { u: SpectralField::basis(l_max, 1, m, 1.0), ..ModelState::trivial(l_max) })
        .collect();
    if let Some(md) = mode {
        if md.l >= 2 && md.l <= l_max {
            for m in -(md.l as i64)..=(md.l as i64) {
                out.push(ModelState {
                    phi: SpectralField::basis(l_max, md.l, m, 1.0),
                    u: SpectralField::basis(l_max, md.l, m, md.tau),
                    ..ModelState::trivial(l_max)
                });
            }
        }
    }
    out
}

/// Numerical null space of the discretized `L(λ)`.
#[derive(Clone, Debug)]
pub struct NullSpace {
    pub dimension: usize,
    /// Ascending singular values.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// Ratio between the smallest singular value above and the largest below
    /// the threshold.
    pub separation: f64,
    /// Right singular vectors spanning the null space, as states.
    pub vectors: Vec<ModelState>,
    pub warnings: Vec<String>,
}

pub fn null_space_dimension(lambda: f64, l_max: usize, c: &Constitutive) -> Result<NullSpace> {
    let mut warnings = Vec::new();
    let close: Vec<usize> = (1..=l_max)
        .filter(|&l| characteristic_roots(l, c).transversal.iter().any(|r| (r - lambda).abs() < 1e-8))
        .collect();
    if close.len() > 1 {
        warnings.push(format!("lambda = {lambda} is within root tolerance of roots for l = {close:?}"));
    }
    let m = l_matrix(lambda, l_max, c, false);
    let svd = m.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Internal("svd without vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let scale = sv.last().copied().unwrap_or(0.0);
    let threshold = 1e-7 * scale;
    let dimension = sv.iter().filter(|&&s| s <= threshold).count();
    let separation = if dimension == 0 || dimension == sv.len() {
        f64::INFINITY
    } else {
        sv[dimension] / sv[dimension - 1].max(f64::MIN_POSITIVE)
    };
    let nc = n_coeffs(l_max);
    let vectors = order[..dimension]
        .iter()
        .map(|&i| {
            let row = v_t.row(i);
            let p: Vec<f64> = (0..nc).map(|k| row[k]).collect();
            let u: Vec<f64> = (0..nc).map(|k| row[nc + k]).collect();
            ModelState {
                phi: SpectralField::from_normalized(l_max, &p),
                u: SpectralField::from_normalized(l_max, &u),
                zeta: row[2 * nc],
                xi: row[2 * nc + 1],
            }
        })
        .collect();
    Ok(NullSpace { dimension, singular_values: sv, threshold, separation, vectors, warnings })
}

/// Central difference of the implemented residual at the trivial state along
/// `z`, analysed to the degree of `z`.
pub fn fd_linearization(model: &crate::model::Model, lambda: f64, z: &ModelState, h: f64) -> Result<LinearImage> {
    let l = z.l_max();
    let lm = model.l_max();
    let lift = |s: f64| ModelState { phi: z.phi.resized(lm).scaled(s), u: z.u.resized(lm).scaled(s), zeta: s * z.zeta, xi: s * z.xi };
    let rp = model.full_residual(&lift(h), lambda)?;
    let rm = model.full_residual(&lift(-h), lambda)?;
    let grid = model.grid();
    let d = |a: &crate::harmonics::GridField, b: &crate::harmonics::GridField| {
        let v: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y) / (2.0 * h)).collect();
        SpectralField::from_normalized(l, &grid.analyze_normalized(&v, l))
    };
    Ok(LinearImage {
        phase: d(&rp.r_phase, &rm.r_phase),
        shape: d(&rp.r_shape, &rm.r_shape),
        area: (rp.c_area - rm.c_area) / (2.0 * h),
        mass: (rp.c_phase - rm.c_phase) / (2.0 * h),
    })
}

/// Relative sup-norm gap between the analytic operator and the normalized
/// finite-difference linearization along `z`.
pub fn linearization_defect(model: &crate::model::Model, lambda: f64, z: &ModelState, variational: bool) -> Result<f64> {
    let c = &model.constitutive;
    let an = if variational { apply_l_variational(lambda, z, c) } else { apply_l(lambda, z, c) };
    let fd = fd_linearization(model, lambda, z, 1e-5)?;
    let area = if variational { fd.area } else { fd.area * NORMALIZATION.area };
    let gap = LinearImage {
        phase: an.phase.axpy(-1.0, &fd.phase),
        shape: an.shape.axpy(-NORMALIZATION.shape, &fd.shape),
        area: an.area - area,
        mass: an.mass - fd.mass,
    };
    Ok(gap.inf_norm() / an.inf_norm().max(f64::MIN_POSITIVE))
}
