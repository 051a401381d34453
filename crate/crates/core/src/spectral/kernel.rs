use serde::Serialize;

use super::SpectralError;
use crate::branching::{kernel_prob, kernel_prob_f64, Label, Prob};
use crate::numeric::CompensatedSum;

/// The label kernel restricted to states `a..=n_max`; mass that leaves the
/// window (below `a`, or above the truncation) is lost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KilledKernel {
    k: u32,
    a: Label,
    n_max: Label,
    /// Row-major, `dim x dim`.
    entries: Vec<f64>,
}

impl KilledKernel {
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Lowest surviving label.
    pub fn threshold(&self) -> Label {
        self.a
    }

    /// Highest retained label.
    pub fn truncation(&self) -> Label {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        (self.n_max - self.a + 1) as usize
    }

    pub fn states(&self) -> impl Iterator<Item = Label> {
        self.a..=self.n_max
    }

    fn idx(&self, x: Label) -> usize {
        (x - self.a) as usize
    }

    /// `P~(x, y)`; zero outside the window.
    pub fn entry(&self, x: Label, y: Label) -> f64 {
        if x < self.a || y < self.a || x > self.n_max || y > self.n_max {
            return 0.0;
        }
        self.entries[self.idx(x) * self.dim() + self.idx(y)]
    }

    /// Exact rational entry (ignores any folding).
    pub fn exact_entry(&self, x: Label, y: Label) -> Prob {
        if x < self.a || y < self.a || x > self.n_max || y > self.n_max {
            return Prob::from_integer(0);
        }
        kernel_prob(self.k, x, y)
    }

    pub fn row(&self, x: Label) -> &[f64] {
        let d = self.dim();
        let i = self.idx(x);
        &self.entries[i * d..(i + 1) * d]
    }

    pub fn row_sum(&self, x: Label) -> f64 {
        crate::numeric::sum(self.row(x).iter().copied())
    }

    /// Row vector times kernel: `(v P)(y) = sum_{x >= y-1} v(x) P(x, y)`.
    pub fn left_mul(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(v.len(), d);
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = CompensatedSum::new();
            for (i, vi) in v.iter().enumerate().skip(j.saturating_sub(1)) {
                acc.add(vi * self.entries[i * d + j]);
            }
            *o = acc.value();
        }
    }

    /// Kernel times column vector: `(P v)(x) = sum_{y <= x+1} P(x, y) v(y)`.
    pub fn right_mul(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(v.len(), d);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * d..(i + 1) * d];
            let hi = (i + 2).min(d);
            let mut acc = CompensatedSum::new();
            for j in 0..hi {
                acc.add(row[j] * v[j]);
            }
            *o = acc.value();
        }
    }
}

/// Killed kernel `P~_k` on states `a..=n_max`.
pub fn build_killed_kernel(k: u32, a: Label, n_max: Label) -> Result<KilledKernel, SpectralError> {
    if k < 2 {
        return Err(SpectralError::InvalidParameter(format!(
            "arity k={k} must be >= 2"
        )));
    }
    if a < 1 {
        return Err(SpectralError::InvalidParameter("threshold a must be >= 1".into()));
    }
    if n_max < a + 1 {
        return Err(SpectralError::TruncationTooSmall { a, n_max });
    }
    let d = (n_max - a + 1) as usize;
    let mut entries = vec![0.0; d * d];
    for x in a..=n_max {
        let i = (x - a) as usize;
        for y in a..=(x + 1).min(n_max) {
            entries[i * d + (y - a) as usize] = kernel_prob_f64(k, x, y);
        }
    }
    Ok(KilledKernel { k, a, n_max, entries })
}

/// Like [`build_killed_kernel`] but the top state's upward step is redirected
/// onto itself, so no mass escapes through the truncation.
pub fn build_folded_kernel(k: u32, a: Label, n_max: Label) -> Result<KilledKernel, SpectralError> {
    let mut ker = build_killed_kernel(k, a, n_max)?;
    let d = ker.dim();
    ker.entries[d * d - 1] += kernel_prob_f64(k, n_max, n_max + 1);
    Ok(ker)
}
