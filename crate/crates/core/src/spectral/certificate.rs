//! Super-harmonic certificates for subcriticality.
//!
//! A positive summable `h` with `h P~ <= lambda h` gives
//! `P_a(T > n) <= (sum h / h(a)) lambda^n`, so `k lambda < 1` makes the good-path
//! count decay exponentially. On `a..=N` we take `h` to be the Perron left
//! vector of the truncated kernel scaled to `h(N) = 1`; beyond `N` we use
//!
//! ```text
//! h(x) = c^(x-N) (N!/x!)^(k-1)
//! ```
//!
//! For `y > N` the inequality then holds uniformly with
//! `lambda >= (k-1)!/c + (k-1)/C(N+k, k-1) + r/(1-r)`, `r = c/(N+2)^(k-1)`, because
//! `P_k(y-1, y) = 1/C(y+k-2, k-1)`, `P_k(y, y) = (k-1)/C(y+k-1, k-1)` and
//! `P_k(x, y) <= 1` otherwise. For `y <= N` the tail enters through
//! `P_k(x, y) <= (k-1)/(x+k-1) <= (k-1)/(N+k)`.

use serde::Serialize;

use super::{build_killed_kernel, dominant_eigen, SpectralError};
use crate::branching::Label;
use crate::numeric::{binomial_f64, factorial_f64, CompensatedSum};

/// Certificate on states `4..=30` with tail ratio 13, for `k = 3`, `a = 4`.
pub const K3_TRUNCATION: Label = 30;
pub const K3_TAIL_RATIO: f64 = 13.0;
pub const K3_LOW_BOUND: f64 = 0.263;
pub const K3_TAIL_MASS_BOUND: f64 = 0.014;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateRecord {
    pub k: u32,
    pub a: Label,
    pub truncation: Label,
    pub tail_ratio: f64,
    /// Dominant eigenvalue of the truncated kernel.
    pub lambda_truncated: f64,
    /// `h` on `a..=truncation`, with `h(truncation) = 1`.
    pub h: Vec<f64>,
    pub h_decreasing: bool,
    /// Upper bound on `sum_{x > N} h(x)`, remainder included.
    pub tail_sum: f64,
    /// `max_{a <= y <= N} (h P~)(y) / h(y)`, tail contribution bounded.
    pub worst_ratio_low: f64,
    /// Uniform bound on `(h P~)(y) / h(y)` for `y > N`.
    pub worst_ratio_high: f64,
    /// `max(worst_ratio_low, worst_ratio_high)`.
    pub certified_lambda: f64,
}

impl CertificateRecord {
    /// `1 - k * certified_lambda`; positive means subcritical.
    pub fn margin(&self) -> f64 {
        1.0 - f64::from(self.k) * self.certified_lambda
    }

    pub fn h_at(&self, x: Label) -> f64 {
        if x < self.a {
            return 0.0;
        }
        if x <= self.truncation {
            return self.h[(x - self.a) as usize];
        }
        let mut v = 1.0;
        for z in self.truncation + 1..=x {
            v *= self.tail_ratio / f64::from(z).powi(self.k as i32 - 1);
        }
        v
    }
}

/// `sum_{i >= 1} c^i (N!/(N+i)!)^(k-1)` with a geometric bound on the remainder.
fn tail_mass(k: u32, n: Label, c: f64) -> f64 {
    let p = k as i32 - 1;
    let mut acc = CompensatedSum::new();
    let mut term = 1.0;
    let mut i = 1;
    loop {
        term *= c / f64::from(n + i).powi(p);
        acc.add(term);
        let rho = c / f64::from(n + i + 1).powi(p);
        if rho < 1.0 && term * rho / (1.0 - rho) < 1e-18 * acc.value() {
            acc.add(term * rho / (1.0 - rho));
            return acc.value();
        }
        i += 1;
        if i > 100_000 {
            return f64::INFINITY;
        }
    }
}

/// Builds and checks the certificate for `(k, a)` at truncation `n` and tail ratio `c`.
pub fn certify_subcritical(k: u32, a: Label, n: Label, c: f64) -> Result<CertificateRecord, SpectralError> {
    if !(c > 0.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "tail ratio {c} must be positive"
        )));
    }
    let ker = build_killed_kernel(k, a, n)?;
    let eig = dominant_eigen(&ker, 1e-13)?;
    let scale = *eig.left.last().expect("non-empty");
    if !(scale > 0.0) || eig.left.iter().any(|&v| !(v > 0.0)) {
        return Err(SpectralError::Degenerate(format!(
            "left vector underflows at truncation {n}; use a smaller truncation"
        )));
    }
    let h: Vec<f64> = eig.left.iter().map(|v| v / scale).collect();
    if h.iter().any(|v| !v.is_finite()) {
        return Err(SpectralError::Degenerate(format!(
            "left vector overflows at truncation {n}"
        )));
    }
    let h_decreasing = h.windows(2).all(|w| w[0] > w[1]);

    let kf = f64::from(k);
    let tail_sum = tail_mass(k, n, c);
    let p_max = ((kf - 1.0) / f64::from(n + k)).min(1.0);

    let mut hp = vec![0.0; h.len()];
    ker.left_mul(&h, &mut hp);
    let worst_ratio_low = hp
        .iter()
        .zip(&h)
        .map(|(s, hy)| (s + tail_sum * p_max) / hy)
        .fold(0.0, f64::max);

    let r = c / f64::from(n + 2).powi(k as i32 - 1);
    let worst_ratio_high = if r < 1.0 {
        factorial_f64(k - 1) / c
            + (kf - 1.0) / binomial_f64(i64::from(n + k), i64::from(k) - 1)
            + r / (1.0 - r)
    } else {
        f64::INFINITY
    };

    Ok(CertificateRecord {
        k,
        a,
        truncation: n,
        tail_ratio: c,
        lambda_truncated: eig.lambda,
        h,
        h_decreasing,
        tail_sum,
        worst_ratio_low,
        worst_ratio_high,
        certified_lambda: worst_ratio_low.max(worst_ratio_high),
    })
}

/// Tries a small grid of truncations and tail ratios; returns the tightest.
pub fn best_certificate(k: u32, a: Label) -> Option<CertificateRecord> {
    let mut best: Option<CertificateRecord> = None;
    for n in [a + 26, a + 36, a + 56] {
        let base = (factorial_f64(k - 1) * f64::from(n + 2).powi(k as i32 - 1)).sqrt();
        for f in [0.35, 0.5, 0.7, 1.0, 1.4, 2.0] {
            let Ok(rec) = certify_subcritical(k, a, n, base * f) else {
                continue;
            };
            if best
                .as_ref()
                .is_none_or(|b| rec.certified_lambda < b.certified_lambda)
            {
                best = Some(rec);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TernaryCertificateCheck {
    pub record: CertificateRecord,
    pub lambda_target: f64,
    pub low_bound: f64,
    pub tail_mass_ok: bool,
    pub low_ok: bool,
    pub high_ok: bool,
    pub target_ok: bool,
}

impl TernaryCertificateCheck {
    pub fn passed(&self) -> bool {
        self.tail_mass_ok && self.low_ok && self.high_ok && self.target_ok && self.record.h_decreasing
    }

    /// Smallest slack among the checked inequalities.
    pub fn worst_margin(&self) -> f64 {
        let r = &self.record;
        (K3_TAIL_MASS_BOUND - r.tail_sum)
            .min(self.low_bound - r.worst_ratio_low)
            .min(self.lambda_target - r.worst_ratio_high)
            .min(1.0 / 3.0 - self.lambda_target)
    }
}

/// The `k = 3`, `a = 4` certificate: `h P~ <= 0.263 h` on `4..=30`,
/// `h P~ <= lambda_target h` beyond, and `sum_{x >= 31} h(x) < 0.014`.
pub fn subcritical_certificate_k3(lambda_target: f64) -> Result<TernaryCertificateCheck, SpectralError> {
    let record = certify_subcritical(3, 4, K3_TRUNCATION, K3_TAIL_RATIO)?;
    if !(lambda_target > record.lambda_truncated && lambda_target <= 1.0 / 3.0) {
        return Err(SpectralError::InvalidParameter(format!(
            "target {lambda_target} must lie in ({}, 1/3]",
            record.lambda_truncated
        )));
    }
    Ok(TernaryCertificateCheck {
        tail_mass_ok: record.tail_sum < K3_TAIL_MASS_BOUND,
        low_ok: record.worst_ratio_low <= K3_LOW_BOUND,
        high_ok: record.worst_ratio_high <= lambda_target,
        target_ok: lambda_target < 1.0 / 3.0,
        low_bound: K3_LOW_BOUND,
        lambda_target,
        record,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ternary_certificate_shape() {
        let c = subcritical_certificate_k3(0.3).unwrap();
        let h = &c.record.h;
        assert_eq!(*h.last().unwrap(), 1.0);
        assert!(c.record.h_decreasing);
        // h(31) = 13 / 31^2
        assert!((c.record.h_at(31) - 13.0 / 961.0).abs() < 1e-15);
        assert!(c.passed(), "{c:?}");
    }

    #[test]
    fn target_outside_range_is_rejected() {
        assert!(subcritical_certificate_k3(0.2).is_err());
        assert!(subcritical_certificate_k3(0.34).is_err());
    }

    #[test]
    fn certificate_fails_for_supercritical_case() {
        let rec = best_certificate(3, 3).unwrap();
        assert!(rec.margin() < 0.0);
    }
}
