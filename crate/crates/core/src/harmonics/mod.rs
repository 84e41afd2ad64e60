//! Real spherical harmonics `ρ_{l,m}` (unnormalized, no Condon–Shortley phase),
//! quadrature on the sphere, and grid ↔ spectral transforms.

mod field;
mod grid;
mod legendre;

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{GridField, SpectralField};
pub use grid::{gauss_legendre, harmonics_at, Jet, QuadratureGrid};
pub use legendre::assoc_legendre;

/// Degree and order of a real harmonic, `|m| <= l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HarmonicIndex {
    pub l: usize,
    pub m: i64,
}

impl HarmonicIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(Error::Domain(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(HarmonicIndex { l, m })
    }

    /// Position in a packed coefficient vector.
    pub fn index(&self) -> usize {
        coeff_index(self.l, self.m)
    }
}

/// Packed position of `(l, m)`: `l² + l + m`.
#[inline]
pub fn coeff_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// Inverse of [`coeff_index`].
pub fn index_lm(k: usize) -> (usize, i64) {
    let l = (k as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= k { l + 1 } else { l };
    (l, k as i64 - (l * l + l) as i64)
}

/// Number of coefficients up to degree `l_max`.
#[inline]
pub fn n_coeffs(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// `ρ_{l,m}(θ, ψ)`: `P_l(cos θ)`, `P_{l,m}(cos θ) cos mψ` (m > 0) or
/// `-P_{l,-m}(cos θ) sin mψ` (m < 0), so that `ρ_{1,1}, ρ_{1,-1}, ρ_{1,0}` are
/// `x₁, x₂, x₃`.
pub fn real_harmonic(idx: HarmonicIndex, theta: f64, psi: f64) -> f64 {
    let x = theta.cos().clamp(-1.0, 1.0);
    let ma = idx.m.unsigned_abs() as usize;
    let p = assoc_legendre(idx.l, ma, x).expect("valid index");
    match idx.m.signum() {
        0 => p,
        1 => p * (ma as f64 * psi).cos(),
        _ => -p * (idx.m as f64 * psi).sin(),
    }
}

/// `‖ρ_{l,m}‖` in `L²(S²)`.
pub fn harmonic_norm(l: usize, m: i64) -> f64 {
    let ma = m.unsigned_abs() as usize;
    let two_l1 = (2 * l + 1) as f64;
    if ma == 0 {
        (4.0 * PI / two_l1).sqrt()
    } else {
        (2.0 * PI / two_l1 * legendre::factorial_ratio(l, ma)).sqrt()
    }
}

/// Norms for every packed index up to `l_max`.
pub fn norm_table(l_max: usize) -> Vec<f64> {
    (0..n_coeffs(l_max))
        .map(|k| {
            let (l, m) = index_lm(k);
            harmonic_norm(l, m)
        })
        .collect()
}

/// Shared grid for degree `l_max`.
pub fn build_grid(l_max: usize) -> Arc<QuadratureGrid> {
    Arc::new(QuadratureGrid::new(l_max))
}

/// Projection of a nodal field onto the harmonics of degree `<= L_max` of its grid.
pub fn analyze(f: &GridField) -> SpectralField {
    let grid = f.grid();
    let c = grid.analyze_normalized(f.values(), grid.l_max());
    SpectralField::from_normalized(grid.l_max(), &c)
}

/// Nodal values of a spectral field.
pub fn synthesize(c: &SpectralField, grid: &Arc<QuadratureGrid>) -> Result<GridField> {
    if c.l_max() > grid.l_max() {
        return Err(Error::Resolution { field: c.l_max(), grid: grid.l_max() });
    }
    let values = grid.synthesize_normalized(&c.to_normalized(), c.l_max());
    Ok(GridField::new(grid.clone(), values))
}

/// `c_{l,m} ↦ -l(l+1) c_{l,m}`.
pub fn laplace_beltrami_s2(c: &SpectralField) -> SpectralField {
    let mut out = c.clone();
    for k in 0..out.coeffs().len() {
        let (l, _) = index_lm(k);
        out.coeffs_mut()[k] *= -((l * (l + 1)) as f64);
    }
    out
}
