//! The `O(3)` action on states, representation matrices on each degree,
//! subgroup catalog, fixed-point spaces and symmetry-adapted bases.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{build_grid, coeff_index, harmonic_norm, harmonics_at, n_coeffs, QuadratureGrid, SpectralField};
use crate::linear::ModeData;
use crate::model::ModelState;
use crate::residual::ReducedBasis;

pub type Mat3 = [[f64; 3]; 3];

/// Orthogonal 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupElement(Mat3);

impl GroupElement {
    pub fn new(m: Mat3) -> Result<Self> {
        let g = GroupElement(m);
        let gtg = g.transpose().mul(&g);
        if gtg.distance(&GroupElement::identity()) > 1e-12 {
            return Err(Error::Domain("matrix is not orthogonal".into()));
        }
        Ok(g)
    }

    pub fn identity() -> Self {
        GroupElement([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        GroupElement([[a, 0.0, 0.0], [0.0, b, 0.0], [0.0, 0.0, c]])
    }

    /// Rotation by `angle` about the unit vector along `axis` (right-hand rule).
    pub fn rotation(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let [x, y, z] = [axis[0] / n, axis[1] / n, axis[2] / n];
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        GroupElement([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn mul(&self, o: &GroupElement) -> GroupElement {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        GroupElement(r)
    }

    pub fn transpose(&self) -> GroupElement {
        let m = &self.0;
        GroupElement([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn inverse(&self) -> GroupElement {
        self.transpose()
    }

    pub fn neg(&self) -> GroupElement {
        GroupElement(self.0.map(|r| r.map(|v| -v)))
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [0, 1, 2].map(|i| m[i][0] * x[0] + m[i][1] * x[1] + m[i][2] * x[2])
    }

    /// Max-entry distance.
    pub fn distance(&self, o: &GroupElement) -> f64 {
        let mut d = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.0[i][j] - o.0[i][j]).abs());
            }
        }
        d
    }
}

const CLOSURE_LIMIT: usize = 400;

/// Closure of a finite generator set under multiplication.
pub fn close_subgroup(generators: &[GroupElement]) -> Result<Vec<GroupElement>> {
    let mut elems = vec![GroupElement::identity()];
    let mut frontier = vec![GroupElement::identity()];
    while let Some(a) = frontier.pop() {
        for g in generators {
            let p = a.mul(g);
            if !elems.iter().any(|e| e.distance(&p) < 1e-9) {
                if elems.len() >= CLOSURE_LIMIT {
                    return Err(Error::ClosureBound(CLOSURE_LIMIT));
                }
                elems.push(p);
                frontier.push(p);
            }
        }
    }
    Ok(elems)
}

/// A closed subgroup of `O(3)`: a finite group, optionally extended by all
/// rotations about `e₃`.
#[derive(Clone, Debug)]
pub struct Subgroup {
    pub name: String,
    pub generators: Vec<GroupElement>,
    /// The closure of `generators`.
    pub elements: Vec<GroupElement>,
    /// Contains `SO(2)` about `e₃`.
    pub axial: bool,
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub const CATALOG: &[&str] = &["D6d", "O_minus", "O2xZ2c", "OxZ2c", "IxZ2c", "O2_minus", "T", "O", "I", "O2", "SO2", "trivial"];

fn tetra_generators() -> Vec<GroupElement> {
    vec![GroupElement([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]), GroupElement::diag(-1.0, -1.0, 1.0)]
}

fn quarter_turn_z() -> GroupElement {
    GroupElement([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
}

fn icosa_generators() -> Vec<GroupElement> {
    let a = 2.0 * std::f64::consts::PI / 5.0;
    let s5 = 5f64.sqrt();
    vec![GroupElement::rotation([0.0, 0.0, 1.0], a), GroupElement::rotation([-2.0 / s5, 0.0, 1.0 / s5], a)]
}

impl Subgroup {
    pub fn from_generators(name: &str, generators: Vec<GroupElement>, axial: bool) -> Result<Self> {
        let elements = close_subgroup(&generators)?;
        if axial && elements.iter().any(|g| (g.apply([0.0, 0.0, 1.0])[2].abs() - 1.0).abs() > 1e-9) {
            return Err(Error::Domain("finite part of an axial group must preserve the e3 axis".into()));
        }
        Ok(Subgroup { name: name.to_string(), generators, elements, axial })
    }

    /// Catalogued subgroup by name.
    pub fn named(name: &str) -> Result<Self> {
        let minus_i = GroupElement::identity().neg();
        let (gens, axial) = match name {
            "trivial" => (vec![], false),
            "T" => (tetra_generators(), false),
            "O" => {
                let mut g = tetra_generators();
                g.push(quarter_turn_z());
                (g, false)
            }
            "OxZ2c" => {
                let mut g = tetra_generators();
                g.push(quarter_turn_z());
                g.push(minus_i);
                (g, false)
            }
            "O_minus" => {
                let mut g = tetra_generators();
                g.push(quarter_turn_z().neg());
                (g, false)
            }
            "I" => (icosa_generators(), false),
            "IxZ2c" => {
                let mut g = icosa_generators();
                g.push(minus_i);
                (g, false)
            }
            "D6d" => {
                let (s, c) = (2.0 * std::f64::consts::PI / 3.0).sin_cos();
                let g1 = GroupElement([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]]);
                (vec![g1, GroupElement::diag(1.0, -1.0, -1.0), GroupElement::diag(1.0, 1.0, -1.0)], false)
            }
            "SO2" => (vec![], true),
            "O2" => (vec![GroupElement::diag(1.0, -1.0, -1.0)], true),
            "O2xZ2c" => (vec![GroupElement::diag(1.0, -1.0, -1.0), minus_i], true),
            "O2_minus" => (vec![GroupElement::diag(-1.0, 1.0, 1.0)], true),
            _ => return Err(Error::UnknownSubgroup(name.to_string())),
        };
        Subgroup::from_generators(name, gens, axial)
    }

    pub fn order(&self) -> Option<usize> {
        (!self.axial).then_some(self.elements.len())
    }
}

/// Representation of one group element on the degree-`ℓ` harmonics.
#[derive(Clone, Debug)]
pub struct RepMatrix {
    pub l: usize,
    pub g: GroupElement,
    /// Matrix in the unnormalized `ρ_{ℓ,m}` basis, index `m + ℓ`.
    pub entries: DMatrix<f64>,
    /// Same map in the orthonormal basis.
    pub normalized: DMatrix<f64>,
}

/// Smallest grid integrating products of two degree-`l` harmonics exactly.
fn grid_for(l: usize) -> std::sync::Arc<QuadratureGrid> {
    build_grid(l / 2 + 1)
}

/// Orthonormal-basis representation blocks `T_G^ℓ` for `ℓ = 0..=l_max`,
/// computed by sampling `Y(Gᵀx)` on `grid` and projecting.
pub fn rep_blocks_on(grid: &QuadratureGrid, l_max: usize, g: &GroupElement) -> Result<Vec<DMatrix<f64>>> {
    if 2 * l_max >= 4 * grid.l_max() {
        return Err(Error::Resolution { field: l_max, grid: grid.l_max() });
    }
    let gt = g.transpose();
    let nc = n_coeffs(l_max);
    let n = grid.n_nodes();
    // rows: nodes; columns: all harmonics up to l_max
    let mut a = DMatrix::zeros(n, nc);
    let mut b = DMatrix::zeros(n, nc);
    for k in 0..n {
        let x = grid.points()[k];
        let w = grid.weights()[k];
        for (i, (ya, yb)) in harmonics_at(l_max, x).into_iter().zip(harmonics_at(l_max, gt.apply(x))).enumerate() {
            a[(k, i)] = w * ya;
            b[(k, i)] = yb;
        }
    }
    let blocks: Vec<DMatrix<f64>> = (0..=l_max)
        .map(|l| {
            let (o, d) = (l * l, 2 * l + 1);
            a.columns(o, d).transpose() * b.columns(o, d)
        })
        .collect();
    for (l, blk) in blocks.iter().enumerate() {
        let defect = (blk * blk.transpose() - DMatrix::identity(2 * l + 1, 2 * l + 1)).amax();
        if defect > 1e-9 {
            return Err(Error::Internal(format!("degree {l} representation not orthogonal (defect {defect:e}); grid too coarse")));
        }
    }
    Ok(blocks)
}

fn norm_diag(l: usize) -> Vec<f64> {
    (-(l as i64)..=(l as i64)).map(|m| harmonic_norm(l, m)).collect()
}

fn to_unnormalized(l: usize, t: &DMatrix<f64>) -> DMatrix<f64> {
    let d = norm_diag(l);
    DMatrix::from_fn(2 * l + 1, 2 * l + 1, |i, j| t[(i, j)] * d[j] / d[i])
}

pub fn rep_matrix(l: usize, g: &GroupElement) -> Result<RepMatrix> {
    let grid = grid_for(l);
    let normalized = rep_blocks_on(&grid, l, g)?.pop().unwrap();
    Ok(RepMatrix { l, g: *g, entries: to_unnormalized(l, &normalized), normalized })
}

fn act_field(f: &SpectralField, blocks: &[DMatrix<f64>]) -> SpectralField {
    let l_max = f.l_max();
    let c = f.to_normalized();
    let mut out = vec![0.0; c.len()];
    for (l, blk) in blocks.iter().enumerate().take(l_max + 1) {
        let o = l * l;
        for i in 0..2 * l + 1 {
            out[o + i] = (0..2 * l + 1).map(|j| blk[(i, j)] * c[o + j]).sum();
        }
    }
    SpectralField::from_normalized(l_max, &out)
}

/// `(φ(Gᵀx), u(Gᵀx), ζ, ξ)`.
pub fn act(g: &GroupElement, state: &ModelState) -> Result<ModelState> {
    let l = state.l_max();
    let blocks = rep_blocks_on(&grid_for(l), l, g)?;
    Ok(ModelState { phi: act_field(&state.phi, &blocks), u: act_field(&state.u, &blocks), zeta: state.zeta, xi: state.xi })
}

/// Applies precomputed orthonormal blocks to a field.
pub fn act_field_with(f: &SpectralField, blocks: &[DMatrix<f64>]) -> SpectralField {
    act_field(f, blocks)
}

/// Fixed-point space of a subgroup on the degree-`ℓ` harmonics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedSpace {
    pub l: usize,
    pub group: String,
    pub dimension: usize,
    /// Orthonormal coefficient vectors, index `m + ℓ`.
    pub normalized: Vec<Vec<f64>>,
    /// The same vectors in the unnormalized basis.
    pub unnormalized: Vec<Vec<f64>>,
}

impl FixedSpace {
    /// Unnormalized vector `k` scaled so its smallest nonzero entry has
    /// magnitude one.
    pub fn integer_form(&self, k: usize) -> Vec<f64> {
        let v = &self.unnormalized[k];
        let big = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let small = v.iter().map(|x| x.abs()).filter(|&x| x > 1e-10 * big).fold(f64::INFINITY, f64::min);
        v.iter().map(|x| if x.abs() > 1e-10 * big { x / small } else { 0.0 }).collect()
    }

    /// Unnormalized coefficient on `ρ_{ℓ,m}` of vector `k`.
    pub fn coeff(&self, k: usize, m: i64) -> f64 {
        self.unnormalized[k][(m + self.l as i64) as usize]
    }
}

/// Orders `m = 0, 1, −1, 2, −2, …` and makes the first significant entry
/// positive.
fn fix_sign(l: usize, v: &mut [f64]) {
    let mut order = vec![0i64];
    for m in 1..=(l as i64) {
        order.push(m);
        order.push(-m);
    }
    for m in order {
        let x = v[(m + l as i64) as usize];
        if x.abs() > 1e-8 {
            if x < 0.0 {
                v.iter_mut().for_each(|a| *a = -*a);
            }
            return;
        }
    }
}

/// Reynolds projectors `(1/|𝒢|) Σ T_G^ℓ` for `ℓ = 0..=l_max`.
pub fn reynolds_projectors(l_max: usize, group: &Subgroup) -> Result<Vec<DMatrix<f64>>> {
    let grid = grid_for(l_max);
    let mut ps: Vec<DMatrix<f64>> = (0..=l_max).map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1)).collect();
    for g in &group.elements {
        for (p, t) in ps.iter_mut().zip(rep_blocks_on(&grid, l_max, g)?) {
            *p += t;
        }
    }
    let n = group.elements.len() as f64;
    Ok(ps
        .into_iter()
        .enumerate()
        .map(|(l, mut p)| {
            p /= n;
            if group.axial {
                // invariance under every rotation about e₃ keeps only m = 0
                let mut q = DMatrix::zeros(2 * l + 1, 2 * l + 1);
                q[(l, l)] = 1.0;
                p = &q * p * &q;
            }
            0.5 * (&p + p.transpose())
        })
        .collect())
}

fn fixed_space_from(l: usize, group: &Subgroup, p: DMatrix<f64>) -> FixedSpace {
    let eig = SymmetricEigen::new(p);
    let mut normalized = Vec::new();
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev > 1.0 - 1e-8 {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_sign(l, &mut v);
            normalized.push(v);
        }
    }
    let d = norm_diag(l);
    let unnormalized = normalized.iter().map(|v| v.iter().zip(&d).map(|(c, n)| c / n).collect()).collect();
    FixedSpace { l, group: group.name.clone(), dimension: normalized.len(), normalized, unnormalized }
}

/// `{c : T_G^ℓ c = c for all G}` from the Reynolds projector.
pub fn fixed_space(l: usize, group: &Subgroup) -> Result<FixedSpace> {
    let p = reynolds_projectors(l, group)?.pop().unwrap();
    Ok(fixed_space_from(l, group, p))
}

/// Fixed spaces of every degree `0..=l_max`.
pub fn fixed_spaces(l_max: usize, group: &Subgroup) -> Result<Vec<FixedSpace>> {
    Ok(reynolds_projectors(l_max, group)?.into_iter().enumerate().map(|(l, p)| fixed_space_from(l, group, p)).collect())
}

/// `ẑ_ℓ = (ρ̂_ℓ, τ_ℓρ̂_ℓ, 0, 0)` with unit coefficient norm.
pub fn bifurcation_direction(l_max: usize, group: &Subgroup, mode: &ModeData) -> Result<ModelState> {
    let fs = fixed_space(mode.l, group)?;
    if fs.dimension != 1 {
        return Err(Error::FixedSpaceDimension { l: mode.l, group: group.name.clone(), dim: fs.dimension });
    }
    if mode.l > l_max {
        return Err(Error::Resolution { field: mode.l, grid: l_max });
    }
    let scale = 1.0 / (1.0 + mode.tau * mode.tau).sqrt();
    let mut c = vec![0.0; n_coeffs(l_max)];
    for (i, v) in fs.normalized[0].iter().enumerate() {
        c[coeff_index(mode.l, i as i64 - mode.l as i64)] = v * scale;
    }
    let phi = SpectralField::from_normalized(l_max, &c);
    let u = phi.scaled(mode.tau);
    Ok(ModelState { phi, u, zeta: 0.0, xi: 0.0 })
}

/// Symmetry-adapted `(φ, u)` basis up to `l_max`. With `pinning`, u-modes in
/// the degree-1 fixed space (translations) are replaced by unfolding terms.
pub fn reduce_basis(l_max: usize, group: &Subgroup, pinning: bool) -> Result<ReducedBasis> {
    let nc = n_coeffs(l_max);
    let mut elements = Vec::new();
    let mut unfolding = Vec::new();
    for (l, fs) in fixed_spaces(l_max, group)?.into_iter().enumerate() {
        for v in &fs.normalized {
            let mut e = vec![0.0; nc];
            for (i, x) in v.iter().enumerate() {
                e[l * l + i] = *x;
            }
            elements.push((e.clone(), vec![0.0; nc]));
            if pinning && l == 1 {
                unfolding.push(e);
            } else {
                elements.push((vec![0.0; nc], e));
            }
        }
    }
    ReducedBasis::new(l_max, elements, unfolding)
}

/// Degrees with a nonzero fixed space.
pub fn active_degrees(l_max: usize, group: &Subgroup) -> Result<Vec<usize>> {
    Ok(fixed_spaces(l_max, group)?.into_iter().filter(|f| f.dimension > 0).map(|f| f.l).collect())
}
