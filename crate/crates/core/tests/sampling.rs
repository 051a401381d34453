use std::collections::BTreeMap;

use lamqsd::rng::{seeded, stream};
use lamqsd::spectral::iterate_conditioned;
use lamqsd::{count_good_paths, sample_children, simulate_ray, LabelKernel};
use proptest::prelude::*;
use rand::Rng;

/// Upper quantile of chi-square via Wilson-Hilferty.
fn chi2_quantile(df: f64, z: f64) -> f64 {
    let c = 2.0 / (9.0 * df);
    df * (1.0 - c + z * c.sqrt()).powi(3)
}

const Z_99: f64 = 2.326_347_874;

fn binomial(n: u64, r: u64) -> u64 {
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn chi2_uniform(k: u32, m: u32, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = seeded(seed);
    let mut counts: BTreeMap<Vec<u32>, u64> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(sample_children(k, m, &mut rng)).or_insert(0) += 1;
    }
    let cells = binomial(u64::from(m + k - 1), u64::from(k - 1));
    assert!(counts.len() as u64 <= cells);
    let e = draws as f64 / cells as f64;
    let seen: f64 = counts.values().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let unseen = (cells - counts.len() as u64) as f64 * e;
    (seen + unseen, (cells - 1) as f64)
}

#[test]
fn binary_split_of_three_is_uniform() {
    let (stat, df) = chi2_uniform(2, 3, 100_000, 11);
    assert_eq!(df, 3.0);
    assert!(stat < 11.345, "chi2 = {stat}");
}

#[test]
fn ternary_split_of_two_is_uniform() {
    let (stat, df) = chi2_uniform(3, 2, 100_000, 12);
    assert_eq!(df, 5.0);
    assert!(stat < 15.086, "chi2 = {stat}");
}

#[test]
fn sampler_is_uniform_on_grid() {
    // 1% family-wise over the 24 nontrivial cells
    let z = 3.34;
    for k in 2..=4u32 {
        for m in 1..=8u32 {
            let (stat, df) = chi2_uniform(k, m, 100_000, u64::from(100 * k + m));
            assert!(stat < chi2_quantile(df, z), "k={k} m={m}: chi2 {stat} on {df} df");
        }
    }
    assert!(chi2_quantile(3.0, Z_99) > 11.2 && chi2_quantile(3.0, Z_99) < 11.5);
}

#[test]
fn zero_label_always_gives_ones() {
    let mut rng = seeded(3);
    for k in 2..=7 {
        for _ in 0..100 {
            assert_eq!(sample_children(k, 0, &mut rng), vec![1; k as usize]);
        }
    }
}

#[test]
fn ray_from_one_is_fair_coin() {
    let mut rng = seeded(5);
    let n = 100_000;
    let twos = (0..n)
        .filter(|_| simulate_ray(2, 1, 1, 1, &mut rng).labels[1] == 2)
        .count();
    let p = twos as f64 / n as f64;
    assert!((p - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
}

#[test]
fn ray_survival_matches_killed_kernel() {
    let exact1 = iterate_conditioned(2, 4, 4, 1, 40).unwrap().survival;
    assert!((exact1 - 0.4).abs() < 1e-15);
    let exact = iterate_conditioned(2, 4, 4, 5, 40).unwrap().survival;
    let n = 1_000_000;
    let mut alive = 0u64;
    for i in 0..n {
        let mut rng = stream(77, i);
        if simulate_ray(2, 4, 5, 4, &mut rng).survives() {
            alive += 1;
        }
    }
    let p = alive as f64 / n as f64;
    let sigma = (exact * (1.0 - exact) / n as f64).sqrt();
    assert!((p - exact).abs() < 3.0 * sigma, "empirical {p} vs exact {exact}");
}

#[test]
fn good_path_mean_matches_oracle_at_small_depth() {
    let exact = lamqsd::spectral::expected_good_paths(2, 4, 4, 6).unwrap();
    let n = 200_000u64;
    let mut sum = 0u64;
    let mut sq = 0u64;
    for i in 0..n {
        let c = count_good_paths(2, 4, 4, 6, 1_000_000, &mut stream(8, i)).count;
        sum += c;
        sq += c * c;
    }
    let mean = sum as f64 / n as f64;
    let var = sq as f64 / n as f64 - mean * mean;
    assert!(
        (mean - exact).abs() < 4.0 * (var / n as f64).sqrt(),
        "{mean} vs {exact}"
    );
}

#[test]
fn monotone_coupling_binary() {
    let ker = LabelKernel::new(2);
    let mut rng = seeded(21);
    for _ in 0..2_000 {
        let x0: u32 = rng.random_range(0..40);
        let x1 = x0 + rng.random_range(0..40);
        let (mut a, mut b) = (x0, x1);
        for _ in 0..60 {
            let u: f64 = rng.random();
            a = ker.inverse_cdf(a, u);
            b = ker.inverse_cdf(b, u);
            assert!(a <= b);
        }
    }
}

#[test]
fn inverse_cdf_reproduces_kernel() {
    for k in 2..=4 {
        let ker = LabelKernel::new(k);
        for x in 0..20 {
            let grid = 20_000;
            let mut counts = vec![0u32; x as usize + 3];
            for i in 0..grid {
                let u = (f64::from(i) + 0.5) / f64::from(grid);
                counts[ker.inverse_cdf(x, u) as usize] += 1;
            }
            for y in 1..=x + 1 {
                let freq = f64::from(counts[y as usize]) / f64::from(grid);
                assert!((freq - ker.prob_f64(x, y)).abs() <= 1.0 / f64::from(grid) + 1e-12);
            }
        }
    }
}

proptest! {
    #[test]
    fn ray_steps_up_by_at_most_one(k in 2u32..6, x0 in 0u32..50, seed in any::<u64>()) {
        let ray = simulate_ray(k, x0, 200, 1, &mut seeded(seed));
        prop_assert_eq!(ray.labels[0], x0);
        for w in ray.labels.windows(2) {
            prop_assert!(w[1] >= 1 && w[1] <= w[0] + 1);
        }
    }

    #[test]
    fn children_sum_and_step_bound(k in 2u32..7, m in 0u32..200, seed in any::<u64>()) {
        let c = sample_children(k, m, &mut seeded(seed));
        prop_assert_eq!(c.len(), k as usize);
        prop_assert_eq!(c.iter().map(|l| l - 1).sum::<u32>(), m);
        prop_assert!(c.iter().all(|&l| l >= 1 && l <= m + 1));
    }

    #[test]
    fn hitting_time_is_first_drop(k in 2u32..5, x0 in 1u32..12, a in 1u32..8, seed in any::<u64>()) {
        let ray = simulate_ray(k, x0, 40, a, &mut seeded(seed));
        let first = ray.labels.iter().position(|&l| l < a);
        prop_assert_eq!(ray.hitting_time, first);
    }

    #[test]
    fn good_path_count_bounded(x0 in 0u32..10, n in 0usize..12, seed in any::<u64>()) {
        let r = count_good_paths(2, 4, x0, n, 1_000_000, &mut seeded(seed));
        prop_assert!(r.count <= 1u64 << n);
        if x0 < 4 { prop_assert_eq!(r.count, 0); }
        prop_assert!(!r.truncated);
    }
}
