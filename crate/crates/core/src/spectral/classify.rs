use serde::Serialize;

use super::certificate::best_certificate;
use super::{build_folded_kernel, build_killed_kernel, dominant_eigen, EigenTriple, SpectralError};
use crate::branching::Label;

/// Largest truncation tried while waiting for `lambda_N` to settle.
pub const MAX_TRUNCATION: Label = 640;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Subcritical,
    Critical,
    Supercritical,
    Indeterminate,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Subcritical => "Subcritical",
            Verdict::Critical => "Critical",
            Verdict::Supercritical => "Supercritical",
            Verdict::Indeterminate => "Indeterminate",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertificateSummary {
    pub checked: bool,
    /// `1 - k * certified_lambda`; `None` when no certificate was attempted.
    pub worst_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<Label>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub k: u32,
    pub a: Label,
    pub verdict: Verdict,
    /// Dominant eigenvalue at the final truncation.
    pub lambda: f64,
    /// Final truncation (highest retained label).
    #[serde(rename = "N")]
    pub n_trunc: Label,
    /// `k * lambda - 1`.
    pub margin: f64,
    pub certificate: CertificateSummary,
    /// Collatz-Wielandt lower bound on `lambda` at the final truncation.
    #[serde(rename = "lambdaLower")]
    pub lambda_lower: f64,
    /// Eigenvalue at the previous truncation (half of `N`).
    #[serde(rename = "lambdaPrevious")]
    pub lambda_previous: f64,
    /// `lambda_N` settled to within `tol` before the truncation cap.
    pub stable: bool,
    /// Eigenvalue of the two-state chain on `{a, a+1}` with `a+1 -> a+2` folded onto `a+1`.
    #[serde(rename = "foldedLambda")]
    pub folded_lambda: f64,
}

/// Classifies threshold `a` for the `k`-ary label process.
///
/// Truncations start at `n_start` and double until `lambda_N` moves by less than
/// `tol`. Supercritical needs the lower bound to clear `1/k`; critical is a
/// measurement (`k lambda_N` within `tol` of 1); subcritical needs a certificate.
pub fn classify(k: u32, a: Label, n_start: Label, tol: f64) -> Result<ClassificationReport, SpectralError> {
    if k < 2 || a < 2 {
        return Err(SpectralError::InvalidParameter(format!(
            "need k >= 2 and a >= 2, got k={k}, a={a}"
        )));
    }
    let mut n = n_start.max(a + 1);
    let mut cur = eigen_at(k, a, n, tol)?;
    let mut prev = cur.clone();
    let mut stable = false;
    while n < MAX_TRUNCATION {
        let next_n = (n * 2).min(MAX_TRUNCATION);
        let next = eigen_at(k, a, next_n, tol)?;
        prev = std::mem::replace(&mut cur, next);
        n = next_n;
        if (cur.lambda - prev.lambda).abs() < tol {
            stable = true;
            break;
        }
    }

    let kf = f64::from(k);
    let folded_lambda = dominant_eigen(&build_folded_kernel(k, a, a + 1)?, 1e-14)?.lambda;
    let mut certificate = CertificateSummary {
        checked: false,
        worst_margin: None,
        certified_lambda: None,
        truncation: None,
        tail_ratio: None,
    };

    let verdict = if kf * cur.lambda_lower > 1.0 + tol {
        Verdict::Supercritical
    } else if (kf * cur.lambda - 1.0).abs() < tol {
        Verdict::Critical
    } else {
        match best_certificate(k, a) {
            Some(rec) => {
                let ok = rec.margin() > tol;
                certificate = CertificateSummary {
                    checked: ok,
                    worst_margin: Some(rec.margin()),
                    certified_lambda: Some(rec.certified_lambda),
                    truncation: Some(rec.truncation),
                    tail_ratio: Some(rec.tail_ratio),
                };
                if ok {
                    Verdict::Subcritical
                } else {
                    Verdict::Indeterminate
                }
            }
            None => Verdict::Indeterminate,
        }
    };

    Ok(ClassificationReport {
        k,
        a,
        verdict,
        lambda: cur.lambda,
        n_trunc: n,
        margin: kf * cur.lambda - 1.0,
        certificate,
        lambda_lower: cur.lambda_lower,
        lambda_previous: prev.lambda,
        stable,
        folded_lambda,
    })
}

fn eigen_at(k: u32, a: Label, n: Label, tol: f64) -> Result<EigenTriple, SpectralError> {
    dominant_eigen(&build_killed_kernel(k, a, n)?, (tol * 0.1).max(1e-14))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_low_parameters() {
        assert!(classify(1, 4, 30, 1e-9).is_err());
        assert!(classify(2, 1, 30, 1e-9).is_err());
    }

    #[test]
    fn verdict_display() {
        assert_eq!(Verdict::Critical.to_string(), "Critical");
    }
}
