//! Invariant and reproduction checks behind `lamqsd verify`.

use std::io::Write;

use lamqsd::numeric::CompensatedSum;
use lamqsd::rng::seeded;
use lamqsd::spectral::{
    build_folded_kernel, build_killed_kernel, classify, closed_form, critical_limits_converged,
    dominant_eigen, expected_good_paths, generating_function_check, hitting_symmetry_check,
    iterate_conditioned, left_equation_residual, monotone_ratio_check, qsd_exact, right_equation_residual,
    subcritical_certificate_k3, survival_asymptotics, Verdict,
};
use lamqsd::{
    cross_validate_geometry, kernel_prob, polygons_disjoint, run_construction, CirclePoint, McConfig, Prob,
};

use crate::output::num;
use crate::{resolve_seed, CliError, CliResult, Suite, VerifyArgs};

/// Published dominant eigenvalues on states `a..=30`.
pub const PUBLISHED_EIGENVALUES: [(u32, u32, f64); 3] = [
    (3, 4, 0.248_376_642_883_065),
    (2, 5, 0.433_040_861_268_365),
    (4, 3, 0.231_280_689_028_977),
];

pub const EIGEN_TOLERANCE: f64 = 1e-9;
pub const TV_BOUND: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(suite: &'static str, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        suite,
        name: name.into(),
        passed,
        detail: detail.into(),
    }
}

fn sci(x: f64) -> String {
    format!("{x:.3e}")
}

pub fn eigen_suite() -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    for (k, a, want) in PUBLISHED_EIGENVALUES {
        let e = dominant_eigen(&build_killed_kernel(k, a, 30)?, 1e-13)?;
        let diff = (e.lambda - want).abs();
        out.push(check(
            "eigen",
            format!("lambda k={k} a={a} N=30"),
            diff < EIGEN_TOLERANCE,
            format!("{} (diff {})", num(e.lambda), sci(diff)),
        ));
    }
    let folded = dominant_eigen(&build_folded_kernel(3, 3, 4)?, 1e-15)?.lambda;
    let exact = (2.0 + 2f64.sqrt()) / 10.0;
    out.push(check(
        "eigen",
        "folded chain k=3 a=3 on {3,4}",
        (folded - exact).abs() < 1e-14 && folded > 0.34,
        format!("{} vs (2+sqrt 2)/10", num(folded)),
    ));
    let crit = dominant_eigen(&build_killed_kernel(2, 4, 300)?, 1e-13)?.lambda;
    out.push(check(
        "eigen",
        "lambda k=2 a=4 N=300 near 1/2",
        (crit - 0.5).abs() < 1e-6,
        num(crit),
    ));
    Ok(out)
}

pub fn qsd_suite() -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    let left = (4..=150).map(left_equation_residual).fold(0.0, f64::max);
    out.push(check(
        "qsd",
        "left eigen-equation, x <= 150",
        left < 1e-12,
        sci(left),
    ));
    let right = (4..=1000).map(right_equation_residual).fold(0.0, f64::max);
    out.push(check(
        "qsd",
        "right eigen-equation, x <= 1000",
        right < 1e-12,
        sci(right),
    ));
    let mass: CompensatedSum = (4..=400).map(qsd_exact).collect();
    let defect = (mass.value() - 1.0).abs();
    out.push(check(
        "qsd",
        "closed-form law sums to 1",
        defect <= 1e-15,
        sci(defect),
    ));
    let gf = (1..=9)
        .map(|i| generating_function_check(f64::from(i) / 10.0))
        .fold(0.0, f64::max);
    out.push(check(
        "qsd",
        "generating function, z = 0.1..0.9",
        gf < 1e-10,
        sci(gf),
    ));

    let lim = critical_limits_converged(1e-9, 400)?;
    let d1 = (lim.two_pow_survival - closed_form::critical_limit()).abs();
    let d2 = (lim.cond_mean - closed_form::qsd_mean()).abs();
    out.push(check(
        "qsd",
        "2^n P_4(T>n) -> 4/(e^2-1)",
        d1 < 1e-6,
        format!(
            "n={} value {} (diff {})",
            lim.n,
            num(lim.two_pow_survival),
            sci(d1)
        ),
    ));
    out.push(check(
        "qsd",
        "E_4[X_n | T>n] -> (e^2+3)/2",
        d2 < 1e-6,
        format!("n={} value {} (diff {})", lim.n, num(lim.cond_mean), sci(d2)),
    ));

    let law = iterate_conditioned(2, 4, 4, 200, 300)?;
    let tv = (4..=300).map(|x| (law.at(x) - qsd_exact(x)).abs()).sum::<f64>() / 2.0;
    out.push(check("qsd", "TV(q_200, g) < 1e-8", tv < 1e-8, sci(tv)));

    let mono = monotone_ratio_check(50, 300)?;
    out.push(check(
        "qsd",
        "q_n/g nonincreasing, n <= 50, N = 300",
        mono.passed(),
        format!(
            "worst margin {}, max q_n(4)/g(4) {}",
            sci(mono.worst_margin),
            num(mono.max_ratio_at_4)
        ),
    ));
    let mut worst = 0.0f64;
    for x0 in 4..=8 {
        worst = worst.max(hitting_symmetry_check(2, x0, 30)?.max_abs_diff);
    }
    out.push(check(
        "qsd",
        "hitting symmetry, i <= 30, x0 in 4..=8",
        worst <= 1e-12,
        sci(worst),
    ));
    Ok(out)
}

fn compositions(m: u32, k: usize, prefix: &mut Vec<u32>, visit: &mut dyn FnMut(&[u32])) {
    if prefix.len() + 1 == k {
        prefix.push(m);
        visit(prefix);
        prefix.pop();
        return;
    }
    for first in 0..=m {
        prefix.push(first);
        compositions(m - first, k, prefix, visit);
        prefix.pop();
    }
}

pub fn martingale_suite() -> CliResult<Vec<Check>> {
    let one = Prob::from_integer(1);
    let mut out = Vec::new();

    let mut rows_ok = true;
    let mut mean_ok = true;
    for k in 2..=6u32 {
        for x in 0..=200u32 {
            let row: Vec<Prob> = (1..=x + 1).map(|y| kernel_prob(k, x, y)).collect();
            rows_ok &= row.iter().copied().sum::<Prob>() == one;
            let mean: Prob = row.iter().zip(1..).map(|(p, y)| *p * Prob::from_integer(y)).sum();
            mean_ok &= mean == one + Prob::new(i128::from(x), i128::from(k));
        }
    }
    out.push(check(
        "martingale",
        "rows sum to 1 (exact), k <= 6, x <= 200",
        rows_ok,
        "",
    ));
    out.push(check(
        "martingale",
        "mean child label 1 + x/k (exact)",
        mean_ok,
        "",
    ));

    let mart_ok = (0..=1000u32).all(|x| {
        let s: Prob = (1..=x + 1)
            .map(|y| kernel_prob(2, x, y) * Prob::from_integer(i128::from(y) - 2))
            .sum();
        s == Prob::new(i128::from(x) - 2, 2)
    });
    out.push(check(
        "martingale",
        "sum_y P_2(x,y)(y-2) = (x-2)/2, x <= 1000",
        mart_ok,
        "",
    ));

    let mut marg_ok = true;
    for k in 2..=5usize {
        for m in 0..=12u32 {
            let mut hist = vec![0i128; m as usize + 1];
            let mut total = 0i128;
            compositions(m, k, &mut Vec::new(), &mut |c| {
                hist[c[0] as usize] += 1;
                total += 1;
            });
            for (m1, &h) in hist.iter().enumerate() {
                marg_ok &= kernel_prob(k as u32, m, m1 as u32 + 1) == Prob::new(h, total);
            }
        }
    }
    out.push(check(
        "martingale",
        "kernel = composition marginal, k <= 5, m <= 12",
        marg_ok,
        "",
    ));

    let mut worst = f64::NEG_INFINITY;
    for x0 in 4..=12u32 {
        for n in (0..=100).step_by(5) {
            let e = expected_good_paths(2, 4, x0, n)?;
            worst = worst.max(e - (f64::from(x0) - 2.0) / 2.0);
        }
    }
    out.push(check(
        "martingale",
        "E_x0[#G_n] <= (x0-2)/2",
        worst <= 1e-12,
        format!("max excess {}", sci(worst)),
    ));
    let s = survival_asymptotics(200, 400)?;
    out.push(check(
        "martingale",
        "x0-2 = 2^n P(T>n) E[X_n-2 | T>n], n <= 200",
        s.worst_identity_defect < 1e-10,
        sci(s.worst_identity_defect),
    ));
    Ok(out)
}

pub fn certificate_suite() -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    let c = subcritical_certificate_k3(0.3)?;
    let r = &c.record;
    out.push(check(
        "certificate",
        "tail mass sum_{x>=31} h(x) < 0.014",
        c.tail_mass_ok,
        num(r.tail_sum),
    ));
    out.push(check(
        "certificate",
        "(hP)(y) <= 0.263 h(y) on [4,30]",
        c.low_ok,
        format!("worst ratio {}", num(r.worst_ratio_low)),
    ));
    out.push(check(
        "certificate",
        "(hP)(y) <= 0.3 h(y) for y >= 31",
        c.high_ok,
        format!("uniform bound {}", num(r.worst_ratio_high)),
    ));
    out.push(check("certificate", "h decreasing on [4,30]", r.h_decreasing, ""));

    let sup = dominant_eigen(&build_killed_kernel(3, 3, 100)?, 1e-13)?;
    out.push(check(
        "certificate",
        "3 lambda_100 > 1 for k=3 a=3",
        3.0 * sup.lambda_lower > 1.0,
        format!("3 lambda >= {}", num(3.0 * sup.lambda_lower)),
    ));
    for (k, a, want) in [
        (3, 3, Verdict::Supercritical),
        (2, 4, Verdict::Critical),
        (2, 5, Verdict::Subcritical),
        (3, 4, Verdict::Subcritical),
        (4, 3, Verdict::Subcritical),
    ] {
        let rep = classify(k, a, 30, 1e-9)?;
        out.push(check(
            "certificate",
            format!("classify k={k} a={a} is {want}"),
            rep.verdict == want,
            format!("{} (k lambda - 1 = {})", rep.verdict, sci(rep.margin)),
        ));
    }
    Ok(out)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Reference disjointness test by segment crossings in the plane.
pub fn cartesian_disjoint(a: &[CirclePoint], b: &[CirclePoint]) -> bool {
    fn edges(p: &[CirclePoint]) -> Vec<((f64, f64), (f64, f64))> {
        let mut s = p.to_vec();
        s.sort_by(|x, y| x.position().total_cmp(&y.position()));
        let v: Vec<_> = s.iter().map(|q| q.xy()).collect();
        if v.len() == 2 {
            return vec![(v[0], v[1])];
        }
        (0..v.len()).map(|i| (v[i], v[(i + 1) % v.len()])).collect()
    }
    let (ea, eb) = (edges(a), edges(b));
    !ea.iter().any(|&(p1, p2)| {
        eb.iter().any(|&(q1, q2)| {
            (cross(q1, q2, p1) > 0.0) != (cross(q1, q2, p2) > 0.0)
                && (cross(p1, p2, q1) > 0.0) != (cross(p1, p2, q2) > 0.0)
        })
    })
}

pub fn geometry_suite(seed: u64, splits: u64, cases: usize, threads: usize) -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    for k in [2usize, 3] {
        let cfg = McConfig::new(seed, 2).with_parallelism(threads);
        let v = cross_validate_geometry(k, 4, splits, &cfg)?;
        for c in &v.cells {
            out.push(check(
                "geometry",
                format!("split law k={k} m={} vs uniform", c.m),
                !c.missing && c.tv < TV_BOUND,
                format!(
                    "TV {} over {} splits{}",
                    num(c.tv),
                    c.splits,
                    if c.missing { " (missing)" } else { "" }
                ),
            ));
        }
    }

    let mut rng = seeded(seed);
    let mut agree = 0usize;
    for i in 0..cases {
        let (j, k) = (2 + i % 3, 2 + (i / 3) % 3);
        let a: Vec<CirclePoint> = (0..j).map(|_| CirclePoint::random(&mut rng)).collect();
        let b: Vec<CirclePoint> = (0..k).map(|_| CirclePoint::random(&mut rng)).collect();
        if let Ok(d) = polygons_disjoint(&a, &b) {
            agree += usize::from(d == cartesian_disjoint(&a, &b));
        }
    }
    out.push(check(
        "geometry",
        "interleaving test vs Cartesian segments",
        agree == cases,
        format!("{agree}/{cases} agree"),
    ));

    let lam = run_construction(2, 10_000, seed).map_err(anyhow::Error::from)?;
    let total: f64 = lam.partition().iter().map(|a| a.length()).sum();
    let labels_ok = lam.fragments().iter().all(|f| {
        f.children.is_empty() || f.children.iter().map(|&c| lam.fragment(c).label - 1).sum::<u32>() == f.label
    });
    out.push(check(
        "geometry",
        "arc lengths sum to 1, sibling sums",
        (total - 1.0).abs() < 1e-12 && labels_ok,
        format!("{} accepted of 10000", lam.accepted()),
    ));
    Ok(out)
}

pub fn write_table(checks: &[Check], out: &mut dyn Write) -> std::io::Result<()> {
    let w = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{:<12} {:<w$}  {status}  {}", c.suite, c.name, c.detail)?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {} failed", checks.len(), failed)
}

pub fn run(args: &VerifyArgs, threads: usize, out: &mut dyn Write) -> CliResult {
    let mut checks = Vec::new();
    let wants = |s: Suite| args.suite == Suite::All || args.suite == s;
    if wants(Suite::Eigen) {
        checks.extend(eigen_suite()?);
    }
    if wants(Suite::Qsd) {
        checks.extend(qsd_suite()?);
    }
    if wants(Suite::Martingale) {
        checks.extend(martingale_suite()?);
    }
    if wants(Suite::Certificate) {
        checks.extend(certificate_suite()?);
    }
    if wants(Suite::Geometry) {
        if args.splits == 0 || args.cases == 0 {
            return Err(CliError::Usage("splits and cases must be positive".into()));
        }
        let seed = resolve_seed(args.seed, out)?;
        checks.extend(geometry_suite(seed, args.splits, args.cases, threads)?);
    }
    write_table(&checks, out).map_err(|e| CliError::Other(e.into()))?;
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join("; ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_enumeration_counts() {
        let mut n = 0;
        compositions(3, 3, &mut Vec::new(), &mut |c| {
            assert_eq!(c.iter().sum::<u32>(), 3);
            n += 1;
        });
        assert_eq!(n, 10);
    }

    #[test]
    fn cartesian_reference_examples() {
        let p = |v: &[f64]| {
            v.iter()
                .map(|&x| CirclePoint::new(x).unwrap())
                .collect::<Vec<_>>()
        };
        assert!(!cartesian_disjoint(&p(&[0.1, 0.4]), &p(&[0.2, 0.6])));
        assert!(cartesian_disjoint(&p(&[0.1, 0.2]), &p(&[0.3, 0.4])));
    }

    #[test]
    fn table_layout() {
        let mut buf = Vec::new();
        write_table(
            &[check("eigen", "x", true, "1"), check("qsd", "longer", false, "")],
            &mut buf,
        )
        .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("eigen        x       PASS  1"));
        assert!(s.ends_with("2 checks, 1 failed\n"));
    }
}
