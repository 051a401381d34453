//! Closed forms for the critical binary case (`k = 2`, killing below 4).
//!
//! Left eigenvector (the quasi-stationary law) and right eigenvector of the
//! killed kernel for the eigenvalue `1/2`:
//!
//! ```text
//! g(i) = 2^(i-3) (i-3) / (i-1)!        f(i) = (i-2)/2,       i >= 4
//! G(z) = sum_i g(i) z^i = z/2 (e^(2z)(z-1) + z + 1)
//! ```

use crate::numeric::CompensatedSum;

/// `lim 2^n P_4(T > n)`.
pub fn critical_limit() -> f64 {
    4.0 / (std::f64::consts::E.powi(2) - 1.0)
}

/// Mean of the quasi-stationary law, `G'(1)`.
pub fn qsd_mean() -> f64 {
    (std::f64::consts::E.powi(2) + 3.0) / 2.0
}

/// `g(i)`; zero below 4.
pub fn qsd_exact(i: u32) -> f64 {
    if i < 4 {
        return 0.0;
    }
    // 2^(i-3)/(i-1)! = prod_{j=1}^{i-1} (2/j) / 4, bounded at every step
    let p: f64 = (1..i).map(|j| 2.0 / f64::from(j)).product();
    f64::from(i - 3) * p / 4.0
}

/// `g(4..=n_max)` by the ratio recurrence `g(i+1) = g(i) 2(i-2) / ((i-3) i)`.
pub fn qsd_table(n_max: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max.saturating_sub(3) as usize);
    if n_max < 4 {
        return out;
    }
    out.push(qsd_exact(4));
    for i in 4..n_max {
        let g = out[out.len() - 1];
        let i = f64::from(i);
        out.push(g * 2.0 * (i - 2.0) / ((i - 3.0) * i));
    }
    out
}

/// `f(i)`; zero below 4.
pub fn right_eigen_exact(i: u32) -> f64 {
    if i < 4 {
        0.0
    } else {
        f64::from(i - 2) / 2.0
    }
}

/// Generating function `G(z)` of the quasi-stationary law.
pub fn qsd_generating_function(z: f64) -> f64 {
    z / 2.0 * ((z - 1.0) * (2.0 * z).exp_m1() + 2.0 * z)
}

/// Upper bound on `sum_{i > last} g(i) w(i)` given `g(last)` and a weight ratio
/// bound `w(i+1)/w(i) <= wr` valid past `last`.
fn qsd_tail_bound(last: u32, g_last: f64, wr: f64) -> f64 {
    // g(i+1)/g(i) = 2(i-2)/((i-3)i) is decreasing for i >= 5
    let i = f64::from(last.max(5));
    let rho = 2.0 * (i - 2.0) / ((i - 3.0) * i) * wr;
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    g_last * rho / (1.0 - rho)
}

/// `|2 sum_{y >= max(x-1, 4)} g(y)/(y+1) - g(x)|`, plus a bound on the summation tail.
pub fn left_equation_residual(x: u32) -> f64 {
    let start = x.saturating_sub(1).max(4);
    let last = start + 400;
    let mut acc = CompensatedSum::new();
    let mut g_last = 0.0;
    for y in start..=last {
        let g = qsd_exact(y);
        acc.add(g / f64::from(y + 1));
        g_last = g / f64::from(y + 1);
    }
    let tail = qsd_tail_bound(last, g_last, 1.0);
    (2.0 * acc.value() - qsd_exact(x)).abs() + 2.0 * tail
}

/// `|2/(x+1) sum_{y=4}^{x+1} f(y) - f(x)|`.
pub fn right_equation_residual(x: u32) -> f64 {
    if x < 4 {
        return 0.0;
    }
    let s = crate::numeric::sum((4..=x + 1).map(right_eigen_exact));
    (2.0 / f64::from(x + 1) * s - right_eigen_exact(x)).abs()
}

/// `|sum_{i=4}^{400} g(i) z^i - G(z)|` plus a bound on the series tail.
pub fn generating_function_check(z: f64) -> f64 {
    assert!((0.0..1.0).contains(&z), "z must lie in [0, 1), got {z}");
    if z == 0.0 {
        return 0.0;
    }
    const LAST: u32 = 400;
    let mut acc = CompensatedSum::new();
    let mut term = 0.0;
    for i in 4..=LAST {
        term = qsd_exact(i) * z.powi(i as i32);
        acc.add(term);
    }
    (acc.value() - qsd_generating_function(z)).abs() + qsd_tail_bound(LAST, term, z)
}
