//! Associated Legendre functions without the Condon–Shortley phase.

use crate::error::{Error, Result};

/// Unnormalized associated Legendre function `P_{l,m}(x)`, phase-free.
///
/// Uses the upward recurrence in `l` starting from the sectoral value
/// `P_{m,m} = (2m-1)!! (1-x^2)^{m/2}`.
pub fn assoc_legendre(l: usize, m: usize, x: f64) -> Result<f64> {
    if m > l {
        return Err(Error::Domain(format!("order {m} exceeds degree {l}")));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("argument {x} outside [-1, 1]")));
    }
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= (2 * k - 1) as f64 * s;
    }
    if l == m {
        return Ok(pmm);
    }
    let mut prev = pmm;
    let mut cur = x * (2 * m + 1) as f64 * pmm;
    for k in (m + 2)..=l {
        let next = ((2 * k - 1) as f64 * x * cur - (k + m - 1) as f64 * prev) / (k - m) as f64;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Index of `(l, m)` with `0 <= m <= l` in a packed triangular table.
#[inline]
pub(crate) fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
pub(crate) fn tri_len(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 2) / 2
}

/// Fully normalized functions `p_{l,m}` with `∫_{-1}^{1} p^2 dx = 1`, evaluated
/// at `x = cos θ`, `s = sin θ`, for all `l <= l_max`. Packed by [`tri`].
pub(crate) fn normalized_table(l_max: usize, x: f64, s: f64, out: &mut [f64]) {
    debug_assert!(out.len() >= tri_len(l_max));
    let mut pmm = std::f64::consts::FRAC_1_SQRT_2;
    for m in 0..=l_max {
        if m > 0 {
            pmm *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        out[tri(m, m)] = pmm;
        if m == l_max {
            break;
        }
        out[tri(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * pmm;
        for l in (m + 2)..=l_max {
            let a = recurrence_a(l, m);
            let a_prev = recurrence_a(l - 1, m);
            out[tri(l, m)] = a * (x * out[tri(l - 1, m)] - out[tri(l - 2, m)] / a_prev);
        }
    }
}

#[inline]
fn recurrence_a(l: usize, m: usize) -> f64 {
    let (l, m) = (l as f64, m as f64);
    ((4.0 * l * l - 1.0) / (l * l - m * m)).sqrt()
}

/// θ-derivative of the normalized table, given the values from [`normalized_table`].
/// Requires `s > 0`.
pub(crate) fn normalized_table_dtheta(l_max: usize, x: f64, s: f64, p: &[f64], out: &mut [f64]) {
    for m in 0..=l_max {
        for l in m..=l_max {
            let lf = l as f64;
            let mut d = lf * x * p[tri(l, m)];
            if l > m {
                let f = ((2.0 * lf + 1.0) / (2.0 * lf - 1.0) * ((l * l - m * m) as f64)).sqrt();
                d -= f * p[tri(l - 1, m)];
            }
            out[tri(l, m)] = d / s;
        }
    }
}

/// Second θ-derivative from the associated Legendre equation.
pub(crate) fn normalized_table_dtheta2(
    l_max: usize,
    x: f64,
    s: f64,
    p: &[f64],
    dp: &[f64],
    out: &mut [f64],
) {
    let cot = x / s;
    let inv_s2 = 1.0 / (s * s);
    for m in 0..=l_max {
        let m2 = (m * m) as f64 * inv_s2;
        for l in m..=l_max {
            let k = tri(l, m);
            out[k] = -cot * dp[k] - ((l * (l + 1)) as f64 - m2) * p[k];
        }
    }
}

/// `(l+m)!/(l-m)!` as a float.
pub(crate) fn factorial_ratio(l: usize, m: usize) -> f64 {
    ((l - m + 1)..=(l + m)).fold(1.0, |acc, k| acc * k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3_closed(x: f64) -> f64 {
        0.5 * (5.0 * x * x * x - 3.0 * x)
    }

    #[test]
    fn low_degree_values() {
        assert_eq!(assoc_legendre(1, 0, 0.5).unwrap(), 0.5);
        assert_eq!(assoc_legendre(2, 0, 1.0).unwrap(), 1.0);
        assert!((assoc_legendre(3, 3, 0.0).unwrap() - 15.0).abs() < 1e-14);
        assert!((assoc_legendre(3, 0, 0.3).unwrap() - p3_closed(0.3)).abs() < 1e-14);
    }

    #[test]
    fn sectoral_matches_derivative_of_p3() {
        // P_3''' = 15, so P_{3,3} = 15 (1-x^2)^{3/2}.
        for &x in &[-0.7f64, 0.0, 0.2, 0.9] {
            let want = 15.0 * (1.0 - x * x).powf(1.5);
            assert!((assoc_legendre(3, 3, x).unwrap() - want).abs() < 1e-12);
        }
        // P_{3,1} = (1-x^2)^{1/2} (15x^2 - 3)/2
        let x: f64 = 0.4;
        let want = (1.0 - x * x).sqrt() * (15.0 * x * x - 3.0) / 2.0;
        assert!((assoc_legendre(3, 1, x).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn domain_errors() {
        assert!(assoc_legendre(2, 3, 0.0).is_err());
        assert!(assoc_legendre(2, 1, 1.5).is_err());
    }

    #[test]
    fn normalized_matches_unnormalized() {
        let l_max = 12;
        let x: f64 = 0.37;
        let s = (1.0 - x * x).sqrt();
        let mut p = vec![0.0; tri_len(l_max)];
        normalized_table(l_max, x, s, &mut p);
        for l in 0..=l_max {
            for m in 0..=l {
                let c = ((2 * l + 1) as f64 / 2.0 / factorial_ratio(l, m)).sqrt();
                let want = c * assoc_legendre(l, m, x).unwrap();
                assert!((p[tri(l, m)] - want).abs() < 1e-12 * want.abs().max(1.0), "{l} {m}");
            }
        }
    }

    #[test]
    fn derivative_tables_match_finite_differences() {
        let l_max = 10;
        let theta: f64 = 0.83;
        let h = 1e-5;
        let table = |t: f64| {
            let mut p = vec![0.0; tri_len(l_max)];
            normalized_table(l_max, t.cos(), t.sin(), &mut p);
            p
        };
        let p = table(theta);
        let mut dp = vec![0.0; tri_len(l_max)];
        normalized_table_dtheta(l_max, theta.cos(), theta.sin(), &p, &mut dp);
        let mut ddp = vec![0.0; tri_len(l_max)];
        normalized_table_dtheta2(l_max, theta.cos(), theta.sin(), &p, &dp, &mut ddp);
        let (pp, pm) = (table(theta + h), table(theta - h));
        for k in 0..tri_len(l_max) {
            let fd1 = (pp[k] - pm[k]) / (2.0 * h);
            let fd2 = (pp[k] - 2.0 * p[k] + pm[k]) / (h * h);
            assert!((dp[k] - fd1).abs() < 1e-7 * (1.0 + dp[k].abs()));
            assert!((ddp[k] - fd2).abs() < 1e-4 * (1.0 + ddp[k].abs()));
        }
    }
}
