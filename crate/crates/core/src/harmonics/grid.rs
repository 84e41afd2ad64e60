//! Gauss–Legendre × equispaced-azimuth quadrature and the transforms on it.
//!
//! Internally every transform works with coefficients in the orthonormal real
//! basis `Y_{l,m} = ρ_{l,m} / ‖ρ_{l,m}‖`, packed by [`coeff_index`]. The grid
//! integrates products exactly up to total degree `4 L_max - 1`, so fields of
//! degree up to `2 L_max - 1` (the "fine" degree) transform without aliasing.

use std::f64::consts::PI;

use super::coeff_index;
use super::legendre::{normalized_table, normalized_table_dtheta, normalized_table_dtheta2, tri, tri_len};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Tensor-product quadrature on the unit sphere with precomputed harmonic tables.
#[derive(Debug)]
pub struct QuadratureGrid {
    l_max: usize,
    l_fine: usize,
    n_theta: usize,
    n_psi: usize,
    theta: Vec<f64>,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    gl_weights: Vec<f64>,
    psi: Vec<f64>,
    weights: Vec<f64>,
    // per θ-row tables of degree <= l_fine, with the azimuthal normalization folded in
    leg: Vec<f64>,
    dleg: Vec<f64>,
    ddleg: Vec<f64>,
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
    points: Vec<[f64; 3]>,
    e_theta: Vec<[f64; 3]>,
    e_psi: Vec<[f64; 3]>,
}

/// Values, frame gradient and covariant Hessian of a field at every node.
///
/// Components refer to the orthonormal frame `{e_θ, e_ψ}`.
#[derive(Clone, Debug)]
pub struct Jet {
    pub v: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    pub h11: Vec<f64>,
    pub h12: Vec<f64>,
    pub h22: Vec<f64>,
}

impl Jet {
    pub fn zeros(n: usize) -> Self {
        Jet {
            v: vec![0.0; n],
            g1: vec![0.0; n],
            g2: vec![0.0; n],
            h11: vec![0.0; n],
            h12: vec![0.0; n],
            h22: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

impl QuadratureGrid {
    /// Grid with `N_θ = 2 L_max` Gauss nodes and `N_ψ = 4 L_max` azimuths.
    pub fn new(l_max: usize) -> Self {
        let l_max = l_max.max(1);
        let n_theta = 2 * l_max;
        let n_psi = 4 * l_max;
        let l_fine = 2 * l_max - 1;
        let (x, gl_weights) = gauss_legendre(n_theta);
        let theta: Vec<f64> = x.iter().map(|c| c.acos()).collect();
        let sin_t: Vec<f64> = x.iter().map(|c| (1.0 - c * c).sqrt()).collect();
        let dpsi = 2.0 * PI / n_psi as f64;
        let psi: Vec<f64> = (0..n_psi).map(|j| j as f64 * dpsi).collect();

        let mut weights = Vec::with_capacity(n_theta * n_psi);
        let mut points = Vec::with_capacity(n_theta * n_psi);
        let mut e_theta = Vec::with_capacity(n_theta * n_psi);
        let mut e_psi = Vec::with_capacity(n_theta * n_psi);
        for i in 0..n_theta {
            for &p in &psi {
                let (sp, cp) = p.sin_cos();
                weights.push(gl_weights[i] * dpsi);
                points.push([sin_t[i] * cp, sin_t[i] * sp, x[i]]);
                e_theta.push([x[i] * cp, x[i] * sp, -sin_t[i]]);
                e_psi.push([-sp, cp, 0.0]);
            }
        }

        let nt = tri_len(l_fine);
        let mut leg = vec![0.0; n_theta * nt];
        let mut dleg = vec![0.0; n_theta * nt];
        let mut ddleg = vec![0.0; n_theta * nt];
        let c0 = 1.0 / (2.0 * PI).sqrt();
        let cm = 1.0 / PI.sqrt();
        for i in 0..n_theta {
            let p = &mut leg[i * nt..(i + 1) * nt];
            normalized_table(l_fine, x[i], sin_t[i], p);
            let dp = &mut dleg[i * nt..(i + 1) * nt];
            normalized_table_dtheta(l_fine, x[i], sin_t[i], p, dp);
            let ddp = &mut ddleg[i * nt..(i + 1) * nt];
            normalized_table_dtheta2(l_fine, x[i], sin_t[i], p, dp, ddp);
            for l in 0..=l_fine {
                for m in 0..=l {
                    let f = if m == 0 { c0 } else { cm };
                    let k = tri(l, m);
                    p[k] *= f;
                    dp[k] *= f;
                    ddp[k] *= f;
                }
            }
        }

        let mut cos_m = vec![0.0; (l_fine + 1) * n_psi];
        let mut sin_m = vec![0.0; (l_fine + 1) * n_psi];
        for m in 0..=l_fine {
            for (j, &p) in psi.iter().enumerate() {
                let (s, c) = (m as f64 * p).sin_cos();
                cos_m[m * n_psi + j] = c;
                sin_m[m * n_psi + j] = s;
            }
        }

        QuadratureGrid {
            l_max,
            l_fine,
            n_theta,
            n_psi,
            theta,
            cos_t: x,
            sin_t,
            gl_weights,
            psi,
            weights,
            leg,
            dleg,
            ddleg,
            cos_m,
            sin_m,
            points,
            e_theta,
            e_psi,
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    /// Highest degree that transforms without aliasing, `2 L_max - 1`.
    pub fn l_fine(&self) -> usize {
        self.l_fine
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_psi(&self) -> usize {
        self.n_psi
    }

    pub fn n_nodes(&self) -> usize {
        self.n_theta * self.n_psi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_t
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_t
    }

    /// Gauss weights in `cos θ`, one per colatitude row.
    pub fn colatitude_weights(&self) -> &[f64] {
        &self.gl_weights
    }

    /// Node weights, row-major in `(θ, ψ)`; they sum to `4π`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Unit position vectors `x` of the nodes.
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn e_theta(&self) -> &[[f64; 3]] {
        &self.e_theta
    }

    pub fn e_psi(&self) -> &[[f64; 3]] {
        &self.e_psi
    }

    /// `(θ, ψ)` of node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.theta[k / self.n_psi], self.psi[k % self.n_psi])
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    fn check_degree(&self, l: usize) {
        assert!(l <= self.l_fine, "degree {l} exceeds grid capacity {}", self.l_fine);
    }

    /// Orthonormal-basis coefficients up to degree `l` by quadrature.
    pub fn analyze_normalized(&self, values: &[f64], l: usize) -> Vec<f64> {
        self.check_degree(l);
        assert_eq!(values.len(), self.n_nodes());
        let nt = tri_len(self.l_fine);
        let np = self.n_psi;
        let dpsi = 2.0 * PI / np as f64;
        let mut out = vec![0.0; (l + 1) * (l + 1)];
        let mut fc = vec![0.0; l + 1];
        let mut fs = vec![0.0; l + 1];
        for i in 0..self.n_theta {
            let row = &values[i * np..(i + 1) * np];
            for m in 0..=l {
                let cm = &self.cos_m[m * np..(m + 1) * np];
                let sm = &self.sin_m[m * np..(m + 1) * np];
                let (mut a, mut b) = (0.0, 0.0);
                for j in 0..np {
                    a += row[j] * cm[j];
                    b += row[j] * sm[j];
                }
                fc[m] = a * dpsi * self.gl_weights[i];
                fs[m] = b * dpsi * self.gl_weights[i];
            }
            let p = &self.leg[i * nt..(i + 1) * nt];
            for m in 0..=l {
                for ll in m..=l {
                    let pv = p[tri(ll, m)];
                    out[coeff_index(ll, m as i64)] += pv * fc[m];
                    if m > 0 {
                        out[coeff_index(ll, -(m as i64))] += pv * fs[m];
                    }
                }
            }
        }
        out
    }

    /// Nodal values of a field given by orthonormal coefficients of degree `l`.
    pub fn synthesize_normalized(&self, coeffs: &[f64], l: usize) -> Vec<f64> {
        self.check_degree(l);
        let nt = tri_len(self.l_fine);
        let np = self.n_psi;
        let mut out = vec![0.0; self.n_nodes()];
        let mut ac = vec![0.0; l + 1];
        let mut as_ = vec![0.0; l + 1];
        for i in 0..self.n_theta {
            let p = &self.leg[i * nt..(i + 1) * nt];
            for m in 0..=l {
                let (mut a, mut b) = (0.0, 0.0);
                for ll in m..=l {
                    let pv = p[tri(ll, m)];
                    a += coeffs[coeff_index(ll, m as i64)] * pv;
                    if m > 0 {
                        b += coeffs[coeff_index(ll, -(m as i64))] * pv;
                    }
                }
                ac[m] = a;
                as_[m] = b;
            }
            let row = &mut out[i * np..(i + 1) * np];
            for m in 0..=l {
                let cm = &self.cos_m[m * np..(m + 1) * np];
                let sm = &self.sin_m[m * np..(m + 1) * np];
                let (a, b) = (ac[m], as_[m]);
                for j in 0..np {
                    row[j] += a * cm[j] + b * sm[j];
                }
            }
        }
        out
    }

    /// Values, frame gradient and covariant Hessian on `S²` of a band-limited field.
    ///
    /// The Hessian components are
    /// `f_θθ`, `(f_θψ - cot θ f_ψ)/sin θ`, `f_ψψ/sin²θ + cot θ f_θ`.
    pub fn jet_normalized(&self, coeffs: &[f64], l: usize) -> Jet {
        self.check_degree(l);
        let nt = tri_len(self.l_fine);
        let np = self.n_psi;
        let mut jet = Jet::zeros(self.n_nodes());
        // per m: cos/sin parts of f, f_θ, f_θθ
        let mut a = vec![[0.0f64; 6]; l + 1];
        for i in 0..self.n_theta {
            let p = &self.leg[i * nt..(i + 1) * nt];
            let dp = &self.dleg[i * nt..(i + 1) * nt];
            let ddp = &self.ddleg[i * nt..(i + 1) * nt];
            for m in 0..=l {
                let mut acc = [0.0f64; 6];
                for ll in m..=l {
                    let k = tri(ll, m);
                    let c = coeffs[coeff_index(ll, m as i64)];
                    acc[0] += c * p[k];
                    acc[1] += c * dp[k];
                    acc[2] += c * ddp[k];
                    if m > 0 {
                        let s = coeffs[coeff_index(ll, -(m as i64))];
                        acc[3] += s * p[k];
                        acc[4] += s * dp[k];
                        acc[5] += s * ddp[k];
                    }
                }
                a[m] = acc;
            }
            let (x, s) = (self.cos_t[i], self.sin_t[i]);
            let cot = x / s;
            for j in 0..np {
                let (mut f, mut ft, mut ftt, mut fp, mut ftp, mut fpp) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                for (m, acc) in a.iter().enumerate() {
                    let c = self.cos_m[m * np + j];
                    let sn = self.sin_m[m * np + j];
                    let mf = m as f64;
                    f += acc[0] * c + acc[3] * sn;
                    ft += acc[1] * c + acc[4] * sn;
                    ftt += acc[2] * c + acc[5] * sn;
                    fp += mf * (acc[3] * c - acc[0] * sn);
                    ftp += mf * (acc[4] * c - acc[1] * sn);
                    fpp -= mf * mf * (acc[0] * c + acc[3] * sn);
                }
                let k = i * np + j;
                jet.v[k] = f;
                jet.g1[k] = ft;
                jet.g2[k] = fp / s;
                jet.h11[k] = ftt;
                jet.h12[k] = (ftp - cot * fp) / s;
                jet.h22[k] = fpp / (s * s) + cot * ft;
            }
        }
        jet
    }

    /// Jet of an arbitrary nodal field after projection to the fine degree.
    pub fn jet_of_values(&self, values: &[f64]) -> Jet {
        let c = self.analyze_normalized(values, self.l_fine);
        self.jet_normalized(&c, self.l_fine)
    }

    /// Frame components `(a, b)` of a tangent vector at node `k` to Cartesian.
    #[inline]
    pub fn frame_to_cartesian(&self, k: usize, a: f64, b: f64) -> [f64; 3] {
        let (et, ep) = (self.e_theta[k], self.e_psi[k]);
        [a * et[0] + b * ep[0], a * et[1] + b * ep[1], a * et[2] + b * ep[2]]
    }
}

/// All orthonormal harmonics `Y_{l,m}` up to degree `l_max` at a point, packed by
/// [`coeff_index`].
pub fn harmonics_at(l_max: usize, x: [f64; 3]) -> Vec<f64> {
    let z = x[2].clamp(-1.0, 1.0);
    let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
    let s = rho.max(0.0);
    let psi = x[1].atan2(x[0]);
    let mut p = vec![0.0; tri_len(l_max)];
    normalized_table(l_max, z, s, &mut p);
    let c0 = 1.0 / (2.0 * PI).sqrt();
    let cm = 1.0 / PI.sqrt();
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    for l in 0..=l_max {
        out[coeff_index(l, 0)] = c0 * p[tri(l, 0)];
        for m in 1..=l {
            let (sn, c) = (m as f64 * psi).sin_cos();
            out[coeff_index(l, m as i64)] = cm * p[tri(l, m)] * c;
            out[coeff_index(l, -(m as i64))] = cm * p[tri(l, m)] * sn;
        }
    }
    out
}
