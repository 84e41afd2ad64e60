#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vesicle_core::harmonics::{harmonics_at, n_coeffs, QuadratureGrid, SpectralField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random field of degree <= `degree` with decaying spectrum, scaled so that
/// its sup over the grid is `amplitude`.
pub fn random_field(rng: &mut ChaCha8Rng, l_max: usize, degree: usize, amplitude: f64, grid: &QuadratureGrid) -> SpectralField {
    let mut c = vec![0.0; n_coeffs(l_max)];
    for l in 0..=degree.min(l_max) {
        for m in -(l as i64)..=(l as i64) {
            let k = (l * l + l) as i64 + m;
            c[k as usize] = rng.random_range(-1.0..1.0) / (1.0 + l as f64).powi(2);
        }
    }
    let vals = grid.synthesize_normalized(&c, l_max);
    let sup = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let c: Vec<f64> = c.iter().map(|v| v * amplitude / sup).collect();
    SpectralField::from_normalized(l_max, &c)
}

/// Evaluates an orthonormal-coefficient expansion at a unit vector.
pub fn eval_normalized(c: &[f64], l: usize, x: [f64; 3]) -> f64 {
    harmonics_at(l, x).iter().zip(c).map(|(y, c)| y * c).sum()
}

/// Random orthogonal matrix (rotation, optionally composed with -I or a reflection).
pub fn random_orthogonal(rng: &mut ChaCha8Rng, improper: bool) -> [[f64; 3]; 3] {
    // unit quaternion
    let mut q = [0.0f64; 4];
    loop {
        for v in q.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let n: f64 = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n < 1.0 {
            q.iter_mut().for_each(|v| *v /= n);
            break;
        }
    }
    let [w, x, y, z] = q;
    let mut r = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    if improper {
        for row in r.iter_mut() {
            row[0] = -row[0];
        }
    }
    r
}

pub fn mat_t_vec(g: &[[f64; 3]; 3], x: [f64; 3]) -> [f64; 3] {
    [
        g[0][0] * x[0] + g[1][0] * x[1] + g[2][0] * x[2],
        g[0][1] * x[0] + g[1][1] * x[1] + g[2][1] * x[2],
        g[0][2] * x[0] + g[1][2] * x[1] + g[2][2] * x[2],
    ]
}

pub fn mat_vec(g: &[[f64; 3]; 3], x: [f64; 3]) -> [f64; 3] {
    [
        g[0][0] * x[0] + g[0][1] * x[1] + g[0][2] * x[2],
        g[1][0] * x[0] + g[1][1] * x[1] + g[1][2] * x[2],
        g[2][0] * x[0] + g[2][1] * x[1] + g[2][2] * x[2],
    ]
}
