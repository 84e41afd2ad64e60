//! Differential geometry of the radial graph `Σ = {e^{u(x)} x : x ∈ S²}`.
//!
//! Tangent quantities are expressed in the orthonormal frame `{e_θ, e_ψ}` of
//! `S²` (right-handed with `x`), and converted to Cartesian components where a
//! vector is needed. Intrinsic operators on `Σ` come from the pullback metric
//! `C = e^{2u}(1 + ∇u⊗∇u)` and its Christoffel symbols relative to `S²`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::harmonics::{GridField, Jet, QuadratureGrid, SpectralField};

/// Symmetric 2×2 tensor stored as `[t11, t12, t22]`.
pub type Sym2 = [f64; 3];

#[inline]
fn contract(a: &Sym2, b: &Sym2) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn quad_form(a: &Sym2, v: [f64; 2]) -> f64 {
    a[0] * v[0] * v[0] + 2.0 * a[1] * v[0] * v[1] + a[2] * v[1] * v[1]
}

#[inline]
fn sym_mul3(a: &Sym2, b: &Sym2, c: &Sym2) -> Sym2 {
    // a·b·c for symmetric inputs; result is symmetric when a == c
    let ab = [a[0] * b[0] + a[1] * b[1], a[0] * b[1] + a[1] * b[2], a[1] * b[0] + a[2] * b[1], a[1] * b[1] + a[2] * b[2]];
    [
        ab[0] * c[0] + ab[1] * c[1],
        ab[0] * c[1] + ab[1] * c[2],
        ab[2] * c[1] + ab[3] * c[2],
    ]
}

/// Value, frame gradient and `S²` Hessian of a scalar at one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct JetValue {
    pub v: f64,
    pub g: [f64; 2],
    pub h: Sym2,
}

impl JetValue {
    pub fn constant(v: f64) -> Self {
        JetValue { v, ..Default::default() }
    }

    pub fn mul(&self, o: &JetValue) -> JetValue {
        JetValue {
            v: self.v * o.v,
            g: [self.v * o.g[0] + o.v * self.g[0], self.v * o.g[1] + o.v * self.g[1]],
            h: [
                self.v * o.h[0] + o.v * self.h[0] + 2.0 * self.g[0] * o.g[0],
                self.v * o.h[1] + o.v * self.h[1] + self.g[0] * o.g[1] + self.g[1] * o.g[0],
                self.v * o.h[2] + o.v * self.h[2] + 2.0 * self.g[1] * o.g[1],
            ],
        }
    }

    /// Jet of `F(self)` from `(F, F', F'')` evaluated at `self.v`.
    pub fn compose(&self, f: f64, df: f64, d2f: f64) -> JetValue {
        let g = self.g;
        JetValue {
            v: f,
            g: [df * g[0], df * g[1]],
            h: [
                d2f * g[0] * g[0] + df * self.h[0],
                d2f * g[0] * g[1] + df * self.h[1],
                d2f * g[1] * g[1] + df * self.h[2],
            ],
        }
    }
}

impl Jet {
    pub fn at(&self, k: usize) -> JetValue {
        JetValue { v: self.v[k], g: [self.g1[k], self.g2[k]], h: [self.h11[k], self.h12[k], self.h22[k]] }
    }
}

/// Right-handed orthonormal frames `{e₁, e₂, x}` at the grid nodes.
#[derive(Clone, Debug)]
pub struct LocalFrame {
    pub e1: Vec<[f64; 3]>,
    pub e2: Vec<[f64; 3]>,
    pub x: Vec<[f64; 3]>,
}

impl LocalFrame {
    pub fn new(grid: &QuadratureGrid) -> Self {
        LocalFrame { e1: grid.e_theta().to_vec(), e2: grid.e_psi().to_vec(), x: grid.points().to_vec() }
    }
}

/// Cartesian vector field sampled along `S²`.
#[derive(Clone, Debug)]
pub struct TangentField3 {
    grid: Arc<QuadratureGrid>,
    values: Vec<[f64; 3]>,
}

impl TangentField3 {
    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 3]] {
        &self.values
    }
}

/// Geometric data of `Σ` at one quadrature node.
#[derive(Clone, Copy, Debug)]
pub struct NodeGeometry {
    pub u: f64,
    pub expu: f64,
    /// `∇u` in the frame.
    pub gu: [f64; 2],
    /// `D²u` in the frame.
    pub hu: Sym2,
    /// `1 + |∇u|²`.
    pub s: f64,
    pub j: f64,
    pub h: f64,
    pub k: f64,
    pub normal: [f64; 3],
    pub gradu: [f64; 3],
    /// `A(∇u) = (1+|∇u|²)1 − ∇u⊗∇u`.
    pub a: Sym2,
    /// Inverse metric `a^{αβ} = e^{-2u}(1+|∇u|²)^{-1} A`.
    pub cinv: Sym2,
    /// Second fundamental form `L_{αβ}`.
    pub lcov: Sym2,
    /// `a^{αγ} L_{γδ} a^{δβ}`.
    pub lup: Sym2,
}

impl NodeGeometry {
    /// Second covariant derivative of a scalar with respect to the metric of `Σ`.
    pub fn sigma_hessian(&self, f: &JetValue) -> Sym2 {
        let g = self.gu;
        let dot = (g[0] * f.g[0] + g[1] * f.g[1]) / self.s;
        let b = [self.hu[0] - 1.0 - g[0] * g[0], self.hu[1] - g[0] * g[1], self.hu[2] - 1.0 - g[1] * g[1]];
        [
            f.h[0] - 2.0 * g[0] * f.g[0] - dot * b[0],
            f.h[1] - g[0] * f.g[1] - g[1] * f.g[0] - dot * b[1],
            f.h[2] - 2.0 * g[1] * f.g[1] - dot * b[2],
        ]
    }

    /// `Δ_Σ f`.
    pub fn laplacian(&self, f: &JetValue) -> f64 {
        contract(&self.cinv, &self.sigma_hessian(f))
    }

    /// `|∇_Σ f|²`.
    pub fn grad_norm2(&self, f: &JetValue) -> f64 {
        quad_form(&self.cinv, f.g)
    }

    /// `∇_Σ f · L ∇_Σ f`.
    pub fn curvature_grad(&self, f: &JetValue) -> f64 {
        quad_form(&self.lup, f.g)
    }

    /// `L · D²_Σ f`.
    pub fn curvature_hessian(&self, f: &JetValue) -> f64 {
        contract(&self.lup, &self.sigma_hessian(f))
    }

    fn from_jet(u: JetValue, x: [f64; 3], et: [f64; 3], ep: [f64; 3]) -> Result<Self> {
        let g = u.g;
        let hu = u.h;
        let g2 = g[0] * g[0] + g[1] * g[1];
        let s = 1.0 + g2;
        let expu = u.v.exp();
        let j = expu * expu * s.sqrt();
        if !(j.is_finite() && j > 0.0 && s.is_finite()) {
            return Err(Error::DegenerateSurface(format!("area ratio {j} at u = {}", u.v)));
        }
        let a = [s - g[0] * g[0], -g[0] * g[1], s - g[1] * g[1]];
        let f = 1.0 / (expu * expu * s);
        let cinv = [f * a[0], f * a[1], f * a[2]];
        let lf = expu / s.sqrt();
        let lcov = [lf * (hu[0] - g[0] * g[0] - 1.0), lf * (hu[1] - g[0] * g[1]), lf * (hu[2] - g[1] * g[1] - 1.0)];
        let lup = sym_mul3(&cinv, &lcov, &cinv);
        let a_dot_h = contract(&a, &hu);
        let h = (a_dot_h - 2.0 * s) / (2.0 * expu * s.powf(1.5));
        let det_h = hu[0] * hu[2] - hu[1] * hu[1];
        let k = (det_h - a_dot_h + g2 + 1.0) / (expu * expu * s * s);
        let gradu = [g[0] * et[0] + g[1] * ep[0], g[0] * et[1] + g[1] * ep[1], g[0] * et[2] + g[1] * ep[2]];
        let rs = 1.0 / s.sqrt();
        let normal = [rs * (x[0] - gradu[0]), rs * (x[1] - gradu[1]), rs * (x[2] - gradu[2])];
        if !(h.is_finite() && k.is_finite()) {
            return Err(Error::DegenerateSurface("non-finite curvature".into()));
        }
        Ok(NodeGeometry { u: u.v, expu, gu: g, hu, s, j, h, k, normal, gradu, a, cinv, lcov, lup })
    }
}

/// Per-node geometry of `Σ` on a quadrature grid.
#[derive(Clone, Debug)]
pub struct GeometryBundle {
    grid: Arc<QuadratureGrid>,
    nodes: Vec<NodeGeometry>,
}

impl GeometryBundle {
    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn nodes(&self) -> &[NodeGeometry] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &NodeGeometry {
        &self.nodes[k]
    }

    pub fn field(&self, f: impl Fn(&NodeGeometry) -> f64) -> GridField {
        GridField::new(self.grid.clone(), self.nodes.iter().map(f).collect())
    }

    pub fn min_j(&self) -> f64 {
        self.nodes.iter().fold(f64::INFINITY, |a, n| a.min(n.j))
    }

    /// `∫_{S²} f J ds`, i.e. the integral of `f` over `Σ`.
    pub fn integrate_on_sigma(&self, f: &[f64]) -> f64 {
        self.grid.weights().iter().zip(&self.nodes).zip(f).map(|((w, n), v)| w * n.j * v).sum()
    }

    /// Area of `Σ`.
    pub fn area(&self) -> f64 {
        self.grid.weights().iter().zip(&self.nodes).map(|(w, n)| w * n.j).sum()
    }

    /// Builds the bundle from the jet of `u` on `grid`.
    pub fn from_u_jet(grid: &Arc<QuadratureGrid>, jet: &Jet) -> Result<Self> {
        let nodes = (0..grid.n_nodes())
            .map(|k| NodeGeometry::from_jet(jet.at(k), grid.points()[k], grid.e_theta()[k], grid.e_psi()[k]))
            .collect::<Result<Vec<_>>>()?;
        Ok(GeometryBundle { grid: grid.clone(), nodes })
    }

    /// CSV node table `theta,psi,u,H,K,J`.
    pub fn node_table_csv(&self) -> String {
        let mut s = String::from("theta,psi,u,H,K,J\n");
        for (k, n) in self.nodes.iter().enumerate() {
            let (t, p) = self.grid.node(k);
            s.push_str(&format!("{t},{p},{},{},{},{}\n", n.u, n.h, n.k, n.j));
        }
        s
    }
}

fn check_degree(f: &SpectralField, grid: &QuadratureGrid) -> Result<()> {
    if f.l_max() > grid.l_max() {
        return Err(Error::Resolution { field: f.l_max(), grid: grid.l_max() });
    }
    Ok(())
}

/// Jet of a spectral field on a grid.
pub fn spectral_jet(f: &SpectralField, grid: &QuadratureGrid) -> Result<Jet> {
    check_degree(f, grid)?;
    Ok(grid.jet_normalized(&f.to_normalized(), f.l_max()))
}

/// Geometry of the radial graph of `u`.
pub fn geometry_from_u(u: &SpectralField, grid: &Arc<QuadratureGrid>) -> Result<GeometryBundle> {
    let jet = spectral_jet(u, grid)?;
    GeometryBundle::from_u_jet(grid, &jet)
}

/// `∇_{S²} f` in Cartesian components, from the spectral expansion of `f`.
pub fn surface_gradient(f: &GridField) -> TangentField3 {
    let grid = f.grid();
    let jet = grid.jet_of_values(f.values());
    let values = (0..grid.n_nodes()).map(|k| grid.frame_to_cartesian(k, jet.g1[k], jet.g2[k])).collect();
    TangentField3 { grid: grid.clone(), values }
}

/// `Δ_Σ f = J⁻¹ div_{S²}(J C⁻¹ ∇f)`, with the divergence taken componentwise
/// on the Cartesian components of the flux.
pub fn laplace_beltrami_sigma(f: &GridField, g: &GeometryBundle) -> GridField {
    let grid = g.grid();
    let jet = grid.jet_of_values(f.values());
    let n = grid.n_nodes();
    let mut flux = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (k, node) in g.nodes.iter().enumerate() {
        let c = node.cinv;
        let (a, b) = (jet.g1[k], jet.g2[k]);
        let t = grid.frame_to_cartesian(k, node.j * (c[0] * a + c[1] * b), node.j * (c[1] * a + c[2] * b));
        for i in 0..3 {
            flux[i][k] = t[i];
        }
    }
    let mut div = vec![0.0; n];
    for (i, comp) in flux.iter().enumerate() {
        let dj = grid.jet_of_values(comp);
        for k in 0..n {
            div[k] += grid.frame_to_cartesian(k, dj.g1[k], dj.g2[k])[i];
        }
    }
    for (d, node) in div.iter_mut().zip(&g.nodes) {
        *d /= node.j;
    }
    GridField::new(grid.clone(), div)
}

/// Pointwise `Δ_Σ f` from the metric's Christoffel symbols; used by the residual.
pub fn laplace_beltrami_sigma_pointwise(f: &GridField, g: &GeometryBundle) -> GridField {
    let jet = g.grid().jet_of_values(f.values());
    g.field_from_jet(&jet, |n, j| n.laplacian(j))
}

/// `|∇_Σ f|²`.
pub fn grad_sigma_norm2(f: &GridField, g: &GeometryBundle) -> GridField {
    let jet = g.grid().jet_of_values(f.values());
    g.field_from_jet(&jet, |n, j| n.grad_norm2(j))
}

/// `(∇_Σ f · L∇_Σ f, L · D²_Σ f)`.
pub fn curvature_contract(f: &GridField, g: &GeometryBundle) -> (GridField, GridField) {
    let jet = g.grid().jet_of_values(f.values());
    (g.field_from_jet(&jet, |n, j| n.curvature_grad(j)), g.field_from_jet(&jet, |n, j| n.curvature_hessian(j)))
}

impl GeometryBundle {
    fn field_from_jet(&self, jet: &Jet, f: impl Fn(&NodeGeometry, &JetValue) -> f64) -> GridField {
        let values = self.nodes.iter().enumerate().map(|(k, n)| f(n, &jet.at(k))).collect();
        GridField::new(self.grid.clone(), values)
    }
}

/// Enclosed volume `(1/3)∫ e^{3u} ds`.
pub fn enclosed_volume(g: &GeometryBundle) -> f64 {
    let v: Vec<f64> = g.nodes.iter().map(|n| n.expu.powi(3)).collect();
    g.grid.integrate(&v) / 3.0
}

/// Triangulated surface `e^u x` in OBJ format, optionally colored by a scalar
/// (red for positive, blue for negative).
pub fn mesh_obj(u: &SpectralField, grid: &QuadratureGrid, scalar: Option<&SpectralField>) -> String {
    let nt = grid.n_theta();
    let np = grid.n_psi();
    let mut verts: Vec<[f64; 3]> = Vec::with_capacity(nt * np + 2);
    verts.push([0.0, 0.0, 1.0]);
    verts.extend_from_slice(grid.points());
    verts.push([0.0, 0.0, -1.0]);
    let values: Vec<f64> = match scalar {
        Some(f) => verts.iter().map(|&x| f.eval(x)).collect(),
        None => vec![0.0; verts.len()],
    };
    let vmax = values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let mut out = String::from("# radial graph e^u x\n");
    for (x, v) in verts.iter().zip(&values) {
        let r = u.eval(*x).exp();
        let p = [r * x[0], r * x[1], r * x[2]];
        if scalar.is_some() {
            let a = v.abs() / vmax;
            let (cr, cg, cb) = if *v >= 0.0 { (1.0, 1.0 - a, 1.0 - a) } else { (1.0 - a, 1.0 - a, 1.0) };
            out.push_str(&format!("v {} {} {} {} {} {}\n", p[0], p[1], p[2], cr, cg, cb));
        } else {
            out.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
        }
    }
    // OBJ indices are 1-based; vertex 1 is the north pole, node (i, j) is 2 + i*np + j
    let idx = |i: usize, j: usize| 2 + i * np + (j % np);
    let south = nt * np + 2;
    for j in 0..np {
        out.push_str(&format!("f 1 {} {}\n", idx(0, j), idx(0, j + 1)));
    }
    for i in 0..nt - 1 {
        for j in 0..np {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            out.push_str(&format!("f {a} {b} {c}\nf {a} {c} {d}\n"));
        }
    }
    for j in 0..np {
        out.push_str(&format!("f {} {} {}\n", idx(nt - 1, j), south, idx(nt - 1, j + 1)));
    }
    out
}
