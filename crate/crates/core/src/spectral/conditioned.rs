use serde::Serialize;

use super::closed_form::{qsd_exact, qsd_table};
use super::{build_killed_kernel, KilledKernel, SpectralError};
use crate::branching::{kernel_prob_f64, Label};
use crate::numeric::{self, CompensatedSum};

/// Relative survival change tolerated when the truncation is doubled.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Tolerance for `x0 - 2 == 2^n P(T > n) E[X_n - 2 | T > n]`.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Law of `X_n` given survival, with the survival probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedLaw {
    pub n: usize,
    /// Label of `q[0]`.
    pub first_state: Label,
    /// `q[i] = P(X_n = first_state + i | T > n)`.
    pub q: Vec<f64>,
    /// `P(T > n)`.
    pub survival: f64,
    /// `k^n P(T > n)`, the expected number of good paths to depth `n`.
    pub scaled_survival: f64,
}

impl ConditionedLaw {
    pub fn at(&self, x: Label) -> f64 {
        x.checked_sub(self.first_state)
            .and_then(|i| self.q.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        numeric::sum(
            self.q
                .iter()
                .enumerate()
                .map(|(i, p)| p * f64::from(self.first_state + i as Label)),
        )
    }
}

/// Row-vector iteration `q <- q P~ / |q P~|` from a point mass.
#[derive(Debug, Clone)]
pub struct ConditionedChain {
    kernel: KilledKernel,
    q: Vec<f64>,
    scratch: Vec<f64>,
    n: usize,
    survival: f64,
    scaled: f64,
}

impl ConditionedChain {
    pub fn new(kernel: KilledKernel, x0: Label) -> Result<Self, SpectralError> {
        let a = kernel.threshold();
        if x0 < a || x0 > kernel.truncation() {
            return Err(SpectralError::InvalidParameter(format!(
                "start label {x0} outside [{a}, {}]",
                kernel.truncation()
            )));
        }
        let d = kernel.dim();
        let mut q = vec![0.0; d];
        q[(x0 - a) as usize] = 1.0;
        Ok(Self {
            kernel,
            q,
            scratch: vec![0.0; d],
            n: 0,
            survival: 1.0,
            scaled: 1.0,
        })
    }

    pub fn step(&mut self) {
        self.kernel.left_mul(&self.q, &mut self.scratch);
        let mass = numeric::sum(self.scratch.iter().copied());
        for (q, s) in self.q.iter_mut().zip(&self.scratch) {
            *q = s / mass;
        }
        self.survival *= mass;
        self.scaled *= f64::from(self.kernel.k()) * mass;
        self.n += 1;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn law(&self) -> ConditionedLaw {
        ConditionedLaw {
            n: self.n,
            first_state: self.kernel.threshold(),
            q: self.q.clone(),
            survival: self.survival,
            scaled_survival: self.scaled,
        }
    }
}

fn run_chain(k: u32, a: Label, x0: Label, n: usize, n_max: Label) -> Result<ConditionedLaw, SpectralError> {
    let mut chain = ConditionedChain::new(build_killed_kernel(k, a, n_max)?, x0)?;
    for _ in 0..n {
        chain.step();
    }
    Ok(chain.law())
}

/// `q_n` and `P_{x0}(T > n)` on the truncation `a..=n_max`, verified against
/// the truncation `a..=2 n_max`.
pub fn iterate_conditioned(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    n_max: Label,
) -> Result<ConditionedLaw, SpectralError> {
    let law = run_chain(k, a, x0, n, n_max)?;
    // labels grow by at most one per step, so this window is exact
    if n_max as usize >= x0 as usize + n {
        return Ok(law);
    }
    let wide = run_chain(k, a, x0, n, n_max.saturating_mul(2))?;
    let change = ((law.survival - wide.survival) / wide.survival).abs();
    if change.is_nan() || change >= TRUNCATION_TOLERANCE {
        return Err(SpectralError::TruncationSensitive {
            n_max,
            relative_change: change,
        });
    }
    Ok(law)
}

/// Exact `E_{x0}[#G_n] = k^n P_{x0}(T > n)` for the label process.
pub fn expected_good_paths(k: u32, a: Label, x0: Label, n: usize) -> Result<f64, SpectralError> {
    if x0 < a {
        return Ok(0.0);
    }
    let n_max = (x0 as usize + n).max(a as usize + 1);
    let n_max = Label::try_from(n_max)
        .map_err(|_| SpectralError::InvalidParameter(format!("depth {n} too large")))?;
    Ok(run_chain(k, a, x0, n, n_max)?.scaled_survival)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalAsymptotics {
    pub n: usize,
    /// `2^n P_4(T > n)`.
    pub two_pow_survival: f64,
    /// `E_4[X_n | T > n]`.
    pub cond_mean: f64,
    /// Largest `|2 - 2^j P(T>j) E[X_j - 2 | T>j]|` seen for `j <= n`.
    pub worst_identity_defect: f64,
}

/// Critical binary chain from 4, checking the martingale identity at every step.
pub fn survival_asymptotics(n: usize, n_max: Label) -> Result<SurvivalAsymptotics, SpectralError> {
    const X0: Label = 4;
    let mut chain = ConditionedChain::new(build_killed_kernel(2, 4, n_max)?, X0)?;
    let mut worst = 0.0f64;
    let mut check = |chain: &ConditionedChain| -> Result<(f64, f64), SpectralError> {
        let law = chain.law();
        let mean = law.mean();
        let defect = (f64::from(X0 - 2) - law.scaled_survival * (mean - 2.0)).abs();
        worst = worst.max(defect);
        if defect > IDENTITY_TOLERANCE {
            return Err(SpectralError::IdentityViolated { n: chain.n(), defect });
        }
        Ok((law.scaled_survival, mean))
    };
    let mut last = check(&chain)?;
    for _ in 0..n {
        chain.step();
        last = check(&chain)?;
    }
    Ok(SurvivalAsymptotics {
        n,
        two_pow_survival: last.0,
        cond_mean: last.1,
        worst_identity_defect: worst,
    })
}

/// Doubles `n` (and the truncation) until both limits move by less than `tol`.
pub fn critical_limits_converged(tol: f64, n_cap: usize) -> Result<SurvivalAsymptotics, SpectralError> {
    let mut n = 25;
    let mut prev = survival_asymptotics(n, 64)?;
    while n < n_cap {
        n *= 2;
        let n_max = Label::try_from((n + 64).min(600)).expect("small");
        let cur = survival_asymptotics(n, n_max)?;
        if (cur.two_pow_survival - prev.two_pow_survival).abs() < tol
            && (cur.cond_mean - prev.cond_mean).abs() < tol
        {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(SpectralError::NonConvergence {
        iterations: n,
        residual: f64::NAN,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneRatioReport {
    pub n_max: usize,
    pub truncation: Label,
    /// `min over n, x` of `q_n(x)/g(x) - q_n(x+1)/g(x+1)`.
    pub worst_margin: f64,
    /// First `(n, x)` where the ratio increased by more than the tolerance.
    pub violation: Option<(usize, Label)>,
    /// `max_n q_n(4)/g(4)`; bounded by 3 when the ratios decrease.
    pub max_ratio_at_4: f64,
}

impl MonotoneRatioReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none() && self.max_ratio_at_4 <= 3.0 + 1e-12
    }
}

/// Checks that `x -> q_n(x)/g(x)` is nonincreasing for every `n <= n_max`.
pub fn monotone_ratio_check(n_max: usize, truncation: Label) -> Result<MonotoneRatioReport, SpectralError> {
    const TOL: f64 = 1e-12;
    let g = qsd_table(truncation);
    let mut chain = ConditionedChain::new(build_killed_kernel(2, 4, truncation)?, 4)?;
    let mut report = MonotoneRatioReport {
        n_max,
        truncation,
        worst_margin: f64::INFINITY,
        violation: None,
        max_ratio_at_4: 0.0,
    };
    for n in 0..=n_max {
        if n > 0 {
            chain.step();
        }
        let q = chain.q();
        let ratio = |i: usize| if q[i] == 0.0 { 0.0 } else { q[i] / g[i] };
        report.max_ratio_at_4 = report.max_ratio_at_4.max(ratio(0));
        for i in 0..q.len() - 1 {
            let margin = ratio(i) - ratio(i + 1);
            report.worst_margin = report.worst_margin.min(margin);
            if margin < -TOL && report.violation.is_none() {
                report.violation = Some((n, 4 + i as Label));
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingSymmetryReport {
    pub k: u32,
    pub x0: Label,
    /// `[P(T=i, X_T=1), P(T=i, X_T=2), P(T=i, X_T=3)]` for `i = 1..=n_max`.
    pub by_step: Vec<[f64; 3]>,
    pub max_abs_diff: f64,
}

impl HittingSymmetryReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_abs_diff <= tol
    }
}

/// Joint law of `(T, X_T)` for the full chain absorbed in `{1, 2, 3}`.
pub fn hitting_symmetry_check(
    k: u32,
    x0: Label,
    n_max: usize,
) -> Result<HittingSymmetryReport, SpectralError> {
    if x0 < 4 {
        return Err(SpectralError::InvalidParameter(format!(
            "start label {x0} must be >= 4"
        )));
    }
    // no truncation needed: X_n <= x0 + n
    let top = x0 as usize + n_max + 1;
    let mut dist = vec![0.0; top + 1];
    dist[x0 as usize] = 1.0;
    let mut by_step = Vec::with_capacity(n_max);
    let mut worst = 0.0f64;
    for _ in 0..n_max {
        let mut next = vec![CompensatedSum::new(); top + 1];
        let mut hit = [CompensatedSum::new(); 3];
        for (x, &p) in dist.iter().enumerate().skip(4) {
            if p == 0.0 {
                continue;
            }
            let xl = x as Label;
            for y in 1..=(x + 1) {
                let w = p * kernel_prob_f64(k, xl, y as Label);
                if y < 4 {
                    hit[y - 1].add(w);
                } else {
                    next[y].add(w);
                }
            }
        }
        let h = [hit[0].value(), hit[1].value(), hit[2].value()];
        worst = worst
            .max((h[0] - h[1]).abs())
            .max((h[1] - h[2]).abs())
            .max((h[0] - h[2]).abs());
        by_step.push(h);
        dist = next.iter().map(CompensatedSum::value).collect();
    }
    Ok(HittingSymmetryReport {
        k,
        x0,
        by_step,
        max_abs_diff: worst,
    })
}

/// `q_n(x)/g(x)` at `x = 4` along the critical chain, for reporting.
pub fn ratio_at_four(law: &ConditionedLaw) -> f64 {
    law.at(4) / qsd_exact(4)
}
