use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{coeff_index, harmonic_norm, index_lm, n_coeffs, QuadratureGrid};
use crate::error::{Error, Result};

/// Coefficients of a real field in the unnormalized basis `ρ_{l,m}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    l_max: usize,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(l_max: usize) -> Self {
        SpectralField { l_max, coeffs: vec![0.0; n_coeffs(l_max)] }
    }

    /// Wraps packed coefficients; fails on wrong length or non-finite entries.
    pub fn from_coeffs(l_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != n_coeffs(l_max) {
            return Err(Error::Domain(format!(
                "expected {} coefficients, got {}",
                n_coeffs(l_max),
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        Ok(SpectralField { l_max, coeffs })
    }

    /// Single basis element `ρ_{l,m}` scaled by `value`.
    pub fn basis(l_max: usize, l: usize, m: i64, value: f64) -> Self {
        let mut f = Self::zeros(l_max);
        f.set(l, m, value);
        f
    }

    /// Converts coefficients of the orthonormal basis `ρ/‖ρ‖`.
    pub fn from_normalized(l_max: usize, c: &[f64]) -> Self {
        let mut out = Self::zeros(l_max);
        for k in 0..out.coeffs.len().min(c.len()) {
            let (l, m) = index_lm(k);
            out.coeffs[k] = c[k] / harmonic_norm(l, m);
        }
        out
    }

    /// Coefficients in the orthonormal basis `ρ/‖ρ‖`.
    pub fn to_normalized(&self) -> Vec<f64> {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (l, m) = index_lm(k);
                c * harmonic_norm(l, m)
            })
            .collect()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.l_max {
            return 0.0;
        }
        self.coeffs[coeff_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, value: f64) {
        assert!(l <= self.l_max && m.unsigned_abs() as usize <= l);
        self.coeffs[coeff_index(l, m)] = value;
    }

    /// Same field represented up to another degree (truncating or zero-padding).
    pub fn resized(&self, l_max: usize) -> Self {
        let mut out = Self::zeros(l_max);
        let n = out.coeffs.len().min(self.coeffs.len());
        out.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        out
    }

    pub fn scaled(&self, a: f64) -> Self {
        SpectralField { l_max: self.l_max, coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    /// `self + a·other`, at the larger of the two degrees.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        let mut out = self.resized(self.l_max.max(other.l_max));
        for (k, c) in other.coeffs.iter().enumerate() {
            out.coeffs[k] += a * c;
        }
        out
    }

    /// `L²(S²)` norm.
    pub fn l2_norm(&self) -> f64 {
        self.to_normalized().iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `∫_{S²} f ds = 4π c_{0,0}`.
    pub fn integral(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.coeffs[0]
    }

    /// Point value at a unit vector.
    pub fn eval(&self, x: [f64; 3]) -> f64 {
        let y = super::harmonics_at(self.l_max, x);
        self.to_normalized().iter().zip(&y).map(|(c, y)| c * y).sum()
    }
}

#[derive(Serialize, Deserialize)]
struct SpectralFieldRepr {
    l_max: usize,
    coeffs: Vec<(usize, i64, f64)>,
}

impl Serialize for SpectralField {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let (l, m) = index_lm(k);
                (l, m, v)
            })
            .collect();
        SpectralFieldRepr { l_max: self.l_max, coeffs }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SpectralFieldRepr::deserialize(d)?;
        let mut out = SpectralField::zeros(repr.l_max);
        for (l, m, v) in repr.coeffs {
            if l > repr.l_max || m.unsigned_abs() as usize > l {
                return Err(D::Error::custom(format!("index ({l}, {m}) out of range")));
            }
            if !v.is_finite() {
                return Err(D::Error::custom("non-finite coefficient"));
            }
            out.coeffs[coeff_index(l, m)] = v;
        }
        Ok(out)
    }
}

/// Nodal values on a quadrature grid.
#[derive(Clone, Debug)]
pub struct GridField {
    grid: Arc<QuadratureGrid>,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<QuadratureGrid>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.n_nodes(), "value count must match grid nodes");
        GridField { grid, values }
    }

    /// Samples a function of the unit position vector.
    pub fn from_fn(grid: &Arc<QuadratureGrid>, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = grid.points().iter().map(|&x| f(x)).collect();
        GridField { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// CSV with columns `theta,psi,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("theta,psi,value\n");
        for (k, v) in self.values.iter().enumerate() {
            let (t, p) = self.grid.node(k);
            s.push_str(&format!("{t},{p},{v}\n"));
        }
        s
    }
}
