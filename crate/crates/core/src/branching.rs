//! The label process on the k-ary tree.
//!
//! A vertex labelled `m` gives its `k` children the labels `1 + m_1, ..., 1 + m_k`
//! where `(m_1, ..., m_k)` is uniform over the `C(m + k - 1, k - 1)` weak
//! compositions of `m`. Along a fixed ray the labels form a Markov chain whose
//! kernel is the marginal of that uniform composition:
//!
//! ```text
//! P_k(x, y) = C(x - y + k - 1, k - 2) / C(x + k - 1, k - 1),   1 <= y <= x + 1
//! ```

use num_rational::Ratio;
use rand::Rng;
use serde::Serialize;

use crate::numeric::{binomial_f64, binomial_i128};

pub type Label = u32;

/// Exact rational probability.
pub type Prob = Ratio<i128>;

/// Default node budget for [`count_good_paths`].
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// One-step law of a child's label given its parent's, for arity `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LabelKernel {
    k: u32,
}

impl LabelKernel {
    pub fn new(k: u32) -> Self {
        assert!(k >= 2, "arity must be at least 2, got {k}");
        Self { k }
    }

    pub fn arity(&self) -> u32 {
        self.k
    }

    pub fn prob(&self, x: Label, y: Label) -> Prob {
        kernel_prob(self.k, x, y)
    }

    pub fn prob_f64(&self, x: Label, y: Label) -> f64 {
        kernel_prob_f64(self.k, x, y)
    }

    /// The full exact row `P_k(x, 1..=x+1)`, indexed by `y - 1`.
    pub fn row(&self, x: Label) -> Vec<Prob> {
        (1..=x + 1).map(|y| self.prob(x, y)).collect()
    }

    /// Smallest `y` with `P(X_1 <= y | X_0 = x) >= u`.
    pub fn inverse_cdf(&self, x: Label, u: f64) -> Label {
        if self.k == 2 {
            let y = 1 + (u * f64::from(x + 1)).floor() as Label;
            return y.min(x + 1);
        }
        let mut acc = 0.0;
        for y in 1..=x {
            acc += self.prob_f64(x, y);
            if u < acc {
                return y;
            }
        }
        x + 1
    }
}

/// Exact `P_k(x, y)`; zero outside `1 <= y <= x + 1`.
pub fn kernel_prob(k: u32, x: Label, y: Label) -> Prob {
    assert!(k >= 2, "arity must be at least 2, got {k}");
    if y < 1 || y > x + 1 {
        return Prob::from_integer(0);
    }
    let (k, x, y) = (i64::from(k), i64::from(x), i64::from(y));
    Prob::new(
        binomial_i128(x - y + k - 1, k - 2),
        binomial_i128(x + k - 1, k - 1),
    )
}

/// Floating-point `P_k(x, y)`, usable for labels far beyond the exact range.
pub fn kernel_prob_f64(k: u32, x: Label, y: Label) -> f64 {
    if y < 1 || y > x + 1 {
        return 0.0;
    }
    let (k, x, y) = (i64::from(k), i64::from(x), i64::from(y));
    match k {
        2 => 1.0 / (x + 1) as f64,
        3 => 2.0 * (x + 2 - y) as f64 / ((x + 1) as f64 * (x + 2) as f64),
        _ => binomial_f64(x - y + k - 1, k - 2) / binomial_f64(x + k - 1, k - 1),
    }
}

/// Draws a uniform weak composition of `m` into `out.len()` parts, in place.
///
/// Floyd's algorithm picks a uniform `(k-1)`-subset of the `m + k - 1` star/bar
/// positions; the gaps between consecutive bars are the parts.
pub fn sample_composition_into<R: Rng + ?Sized>(m: Label, out: &mut [Label], rng: &mut R) {
    let k = out.len();
    assert!(k >= 1);
    if k == 1 {
        out[0] = m;
        return;
    }
    if m == 0 {
        out.fill(0);
        return;
    }
    if k == 2 {
        let m1 = rng.random_range(0..=m);
        out[0] = m1;
        out[1] = m - m1;
        return;
    }
    let bars = k - 1;
    let slots = m as usize + bars;
    // Floyd: for j in slots-bars..slots, draw t in 0..=j and keep t unless taken.
    for (chosen, j) in ((slots - bars)..slots).enumerate() {
        let t = rng.random_range(0..=j) as Label;
        out[chosen] = if out[..chosen].contains(&t) { j as Label } else { t };
    }
    out[..bars].sort_unstable();
    // gaps, written back to front so each bar is read before being overwritten
    let last = slots as Label - 1;
    out[bars] = last - out[bars - 1];
    for i in (1..bars).rev() {
        out[i] = out[i] - out[i - 1] - 1;
    }
    // out[0] is already the number of stars before the first bar
}

/// Labels `(1 + m_1, ..., 1 + m_k)` for the children of a vertex labelled `m`.
pub fn sample_children<R: Rng + ?Sized>(k: u32, m: Label, rng: &mut R) -> Vec<Label> {
    let mut out = vec![0; k as usize];
    sample_composition_into(m, &mut out, rng);
    out.iter_mut().for_each(|c| *c += 1);
    out
}

/// Labels along a fixed ray, with the first entrance into `{1, ..., a-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RayPath {
    pub labels: Vec<Label>,
    /// First `i` with `labels[i] < a`; `None` if the ray survives all `n` steps.
    pub hitting_time: Option<usize>,
}

impl RayPath {
    pub fn survives(&self) -> bool {
        self.hitting_time.is_none()
    }
}

/// Runs the ray chain `X_0 = x0, ..., X_n` via inverse-CDF steps.
pub fn simulate_ray<R: Rng + ?Sized>(k: u32, x0: Label, n: usize, a: Label, rng: &mut R) -> RayPath {
    let kernel = LabelKernel::new(k);
    let mut labels = Vec::with_capacity(n + 1);
    labels.push(x0);
    let mut x = x0;
    for _ in 0..n {
        x = kernel.inverse_cdf(x, rng.random::<f64>());
        labels.push(x);
    }
    let hitting_time = labels.iter().position(|&l| l < a);
    RayPath { labels, hitting_time }
}

/// Result of one pruned-tree enumeration of good paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GoodPathCount {
    pub n: usize,
    pub a: Label,
    pub count: u64,
    pub nodes_expanded: u64,
    /// Budget was hit; `count` is then only a lower bound.
    pub truncated: bool,
}

/// Reusable depth-first enumerator for `#G_n`.
#[derive(Debug, Clone)]
pub struct GoodPathCounter {
    k: u32,
    a: Label,
    budget: u64,
    stack: Vec<(Label, u32)>,
    children: Vec<Label>,
}

impl GoodPathCounter {
    pub fn new(k: u32, a: Label, budget: u64) -> Self {
        assert!(k >= 2 && a >= 1 && budget > 0);
        Self {
            k,
            a,
            budget,
            stack: Vec::new(),
            children: vec![0; k as usize],
        }
    }

    pub fn arity(&self) -> u32 {
        self.k
    }

    pub fn threshold(&self) -> Label {
        self.a
    }

    /// Samples one labelled tree from `x0` and counts depth-`n` vertices whose
    /// whole ancestral line stays `>= a`. Subtrees are cut at the first label
    /// below `a`.
    pub fn count<R: Rng + ?Sized>(&mut self, x0: Label, n: usize, rng: &mut R) -> GoodPathCount {
        let mut res = GoodPathCount {
            n,
            a: self.a,
            count: 0,
            nodes_expanded: 0,
            truncated: false,
        };
        if x0 < self.a {
            return res;
        }
        if n == 0 {
            res.count = 1;
            return res;
        }
        let depth = u32::try_from(n).expect("depth fits in u32");
        self.stack.clear();
        self.stack.push((x0, 0));
        while let Some((label, d)) = self.stack.pop() {
            if res.nodes_expanded >= self.budget {
                res.truncated = true;
                break;
            }
            res.nodes_expanded += 1;
            sample_composition_into(label, &mut self.children, rng);
            let next = d + 1;
            // reverse push so child 0 is expanded first
            for &m in self.children.iter().rev() {
                let child = m + 1;
                if child < self.a {
                    continue;
                }
                if next == depth {
                    res.count += 1;
                } else {
                    self.stack.push((child, next));
                }
            }
        }
        res
    }
}

/// One-shot version of [`GoodPathCounter::count`].
pub fn count_good_paths<R: Rng + ?Sized>(
    k: u32,
    a: Label,
    x0: Label,
    n: usize,
    budget: u64,
    rng: &mut R,
) -> GoodPathCount {
    GoodPathCounter::new(k, a, budget).count(x0, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Prob {
        Prob::new(n, d)
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(kernel_prob(2, 4, 5), r(1, 5));
        assert_eq!(kernel_prob(3, 3, 4), r(1, 10));
        assert_eq!(kernel_prob(4, 3, 1), r(1, 2));
        assert!(kernel_prob(2, 4, 6).is_zero());
        assert!(kernel_prob(3, 4, 0).is_zero());
    }

    #[test]
    fn float_kernel_matches_exact() {
        for k in 2..=7 {
            for x in 0..40 {
                for y in 0..=x + 2 {
                    let exact = kernel_prob(k, x, y);
                    let f = *exact.numer() as f64 / *exact.denom() as f64;
                    assert!((kernel_prob_f64(k, x, y) - f).abs() < 1e-15, "k={k} x={x} y={y}");
                }
            }
        }
    }

    #[test]
    fn inverse_cdf_row_x1() {
        let ker = LabelKernel::new(2);
        assert_eq!(ker.inverse_cdf(1, 0.0), 1);
        assert_eq!(ker.inverse_cdf(1, 0.49), 1);
        assert_eq!(ker.inverse_cdf(1, 0.51), 2);
        assert_eq!(ker.inverse_cdf(1, 0.999_999), 2);
    }

    #[test]
    fn zero_parent_gives_all_ones() {
        let mut rng = seeded(3);
        for k in 2..6 {
            assert_eq!(sample_children(k, 0, &mut rng), vec![1; k as usize]);
        }
    }

    #[test]
    fn good_path_trivial_cases() {
        let mut rng = seeded(1);
        let c = count_good_paths(2, 4, 4, 0, 10, &mut rng);
        assert_eq!(c.count, 1);
        let c = count_good_paths(2, 4, 3, 10, 10, &mut rng);
        assert_eq!(c.count, 0);
        assert_eq!(c.nodes_expanded, 0);
    }

    #[test]
    fn budget_truncation_is_reported() {
        let mut rng = seeded(5);
        // k=3, a=2 always has a surviving ray and grows exponentially
        let c = count_good_paths(3, 2, 5, 30, 1_000, &mut rng);
        assert!(c.truncated);
        assert_eq!(c.nodes_expanded, 1_000);
    }

    #[test]
    fn ray_from_one_steps_to_one_or_two() {
        let mut rng = seeded(11);
        let mut seen = [0u32; 3];
        for _ in 0..2000 {
            let p = simulate_ray(2, 1, 1, 1, &mut rng);
            seen[p.labels[1] as usize] += 1;
        }
        assert_eq!(seen[0], 0);
        assert!(seen[1] > 900 && seen[2] > 900);
    }

    proptest! {
        #[test]
        fn composition_sums_to_parent(k in 1usize..8, m in 0u32..50, seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let mut out = vec![0; k];
            sample_composition_into(m, &mut out, &mut rng);
            prop_assert_eq!(out.iter().sum::<u32>(), m);
        }

        #[test]
        fn ray_labels_step_up_by_at_most_one(k in 2u32..6, x0 in 0u32..30, seed in any::<u64>()) {
            let mut rng = seeded(seed);
            let p = simulate_ray(k, x0, 50, 4, &mut rng);
            for w in p.labels.windows(2) {
                prop_assert!(w[1] >= 1 && w[1] <= w[0] + 1);
            }
            if let Some(t) = p.hitting_time {
                prop_assert!(p.labels[t] < 4);
                prop_assert!(p.labels[..t].iter().all(|&l| l >= 4));
            }
        }
    }
}
