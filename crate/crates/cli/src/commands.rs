use std::io::Write;

use anyhow::Context;
use lamqsd::spectral::{
    build_killed_kernel, classify as classify_chain, dominant_eigen, expected_good_paths,
    iterate_conditioned, qsd_exact, right_eigen_exact, ConditionedChain, Verdict,
};
use lamqsd::{estimators, run_construction, Estimate, McConfig};
use serde::Serialize;

use crate::output::{self, num, SCHEMA_VERSION};
use crate::svg::{self, ChordStyle, RenderOptions};
use crate::{resolve_seed, ClassifyArgs, CliError, CliResult, LabelsArgs, LamArgs, SpectralArgs};

fn io(e: std::io::Error) -> CliError {
    CliError::Other(e.into())
}

pub fn lam(args: &LamArgs, out: &mut dyn Write) -> CliResult {
    let seed = resolve_seed(args.seed, out)?;
    let lam = run_construction(usize::from(args.k), args.throws, seed).context("construction")?;
    let opts = RenderOptions {
        size: args.size,
        style: if args.hyperbolic {
            ChordStyle::Hyperbolic
        } else {
            ChordStyle::Straight
        },
    };
    output::write_text(&args.svg, &svg::render(&lam, &opts))?;
    output::write_text(&args.tree, &lam.genealogy_text())?;

    let live = lam.live_fragments().count();
    writeln!(out, "k: {}", args.k).map_err(io)?;
    writeln!(out, "throws: {}", lam.throws()).map_err(io)?;
    writeln!(out, "accepted: {}", lam.accepted()).map_err(io)?;
    writeln!(out, "collisions: {}", lam.collisions()).map_err(io)?;
    writeln!(out, "fragments: {} ({live} live)", lam.fragments().len()).map_err(io)?;
    writeln!(out, "max depth: {}", lam.max_depth()).map_err(io)?;
    let hist: Vec<String> = lam
        .label_histogram()
        .iter()
        .map(|(l, c)| format!("{l}:{c}"))
        .collect();
    writeln!(out, "labels: {}", hist.join(" ")).map_err(io)?;
    writeln!(out, "svg: {}", args.svg.display()).map_err(io)?;
    writeln!(out, "genealogy: {}", args.tree.display()).map_err(io)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelRow {
    pub schema_version: u32,
    pub estimator: &'static str,
    pub k: u32,
    pub a: u32,
    pub x0: u32,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
    pub samples: usize,
    pub seed: u64,
    pub truncated_samples: usize,
    pub wall_time: Option<f64>,
    /// Exact value from the killed kernel, when available.
    pub exact: Option<f64>,
}

impl LabelRow {
    fn new(
        name: &'static str,
        args: &LabelsArgs,
        x0: u32,
        e: &Estimate,
        exact: Option<f64>,
        timed: bool,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            estimator: name,
            k: args.k,
            a: args.a,
            x0,
            n: args.n,
            mean: e.mean,
            stderr: e.stderr,
            ci95_low: e.ci95_low,
            ci95_high: e.ci95_high,
            samples: e.samples,
            seed: e.seed,
            truncated_samples: e.truncated_samples,
            wall_time: timed.then_some(e.wall_time),
            exact,
        }
    }
}

/// Largest `x0 + n` for which the exact oracle column is filled.
const EXACT_WINDOW: usize = 6000;

pub fn labels(args: &LabelsArgs, threads: usize, out: &mut dyn Write) -> CliResult {
    let x0 = args.x0.unwrap_or(args.a);
    let cfg_check = McConfig::new(0, args.samples).with_batches(args.batches);
    cfg_check.validate()?;
    if args.budget == 0 {
        return Err(CliError::Usage("budget must be positive".into()));
    }
    let seed = resolve_seed(args.seed, out)?;
    let cfg = McConfig {
        master_seed: seed,
        ..cfg_check
    }
    .with_parallelism(threads);
    let res = estimators::estimate_good_paths_with_budget(args.k, args.a, x0, args.n, &cfg, args.budget)?;
    eprintln!(
        "wall time: {:.3} s on {threads} thread(s)",
        res.mean_count.wall_time
    );

    let exact = if x0 as usize + args.n <= EXACT_WINDOW {
        Some(expected_good_paths(args.k, args.a, x0, args.n)?)
    } else {
        None
    };
    let rows = [
        LabelRow::new(
            "meanGoodPaths",
            args,
            x0,
            &res.mean_count,
            exact,
            args.record_time,
        ),
        LabelRow::new("nonemptyProb", args, x0, &res.nonempty, None, args.record_time),
    ];
    output::write_csv(&args.out, &rows)?;
    if let Some(path) = &args.json {
        #[derive(Serialize)]
        struct Doc<'a> {
            rows: &'a [LabelRow],
        }
        output::write_json(path, &Doc { rows: &rows })?;
    }

    writeln!(
        out,
        "k={} a={} x0={x0} n={} samples={} batches={}",
        args.k, args.a, args.n, args.samples, args.batches
    )
    .map_err(io)?;
    for (label, e) in [("E[#G_n]", &res.mean_count), ("P(G_n nonempty)", &res.nonempty)] {
        writeln!(
            out,
            "{label}: {} ± {} (95% CI [{}, {}])",
            num(e.mean),
            num(e.stderr),
            num(e.ci95_low),
            num(e.ci95_high)
        )
        .map_err(io)?;
    }
    if let Some(v) = exact {
        writeln!(
            out,
            "exact E[#G_n]: {} (|z| = {:.3})",
            num(v),
            res.mean_count.z_score(v)
        )
        .map_err(io)?;
    }
    writeln!(
        out,
        "n * P(G_n nonempty): {}",
        num(args.n as f64 * res.nonempty.mean)
    )
    .map_err(io)?;
    if res.mean_count.flagged() {
        eprintln!(
            "warning: {} sample(s) hit the node budget; the mean is a lower bound",
            res.mean_count.truncated_samples
        );
        writeln!(
            out,
            "flagged: {} truncated sample(s)",
            res.mean_count.truncated_samples
        )
        .map_err(io)?;
    }
    writeln!(out, "csv: {}", args.out.display()).map_err(io)?;
    Ok(())
}

pub fn classify(args: &ClassifyArgs, out: &mut dyn Write) -> CliResult {
    if !(args.tol > 0.0 && args.tol < 1.0) {
        return Err(CliError::Usage(format!(
            "tolerance {} must lie in (0, 1)",
            args.tol
        )));
    }
    let report = classify_chain(args.k, args.a, args.n_max, args.tol)?;
    let json = output::to_json(&report)?;
    out.write_all(json.as_bytes()).map_err(io)?;
    if let Some(path) = &args.out {
        output::write_text(path, &json)?;
    }
    match report.verdict {
        Verdict::Indeterminate => Err(CliError::CheckFailed(format!(
            "no verdict for k={} a={}: k*lambda = {} and no certificate",
            args.k,
            args.a,
            f64::from(args.k) * report.lambda
        ))),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LambdaRow {
    #[serde(rename = "N")]
    n_trunc: u32,
    lambda: f64,
    lambda_lower: f64,
    lambda_upper: f64,
    k_lambda: f64,
    iterations: usize,
}

#[derive(Serialize)]
struct VectorRow {
    x: u32,
    value: f64,
    exact: Option<f64>,
}

#[derive(Serialize)]
struct LawRow {
    n: usize,
    x: u32,
    q: f64,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct SurvivalRow {
    n: usize,
    survival: f64,
    scaled_survival: f64,
    cond_mean: f64,
}

fn truncations(a: u32, n_max: u32) -> Vec<u32> {
    let mut v = vec![a + 1];
    let mut n = 15.max(a + 2);
    while n < n_max {
        v.push(n);
        n *= 2;
    }
    if *v.last().unwrap() != n_max {
        v.push(n_max);
    }
    v
}

pub fn spectral(args: &SpectralArgs, out: &mut dyn Write) -> CliResult {
    let (k, a) = (args.k, args.a);
    if args.n_max <= a {
        return Err(CliError::Usage(format!("N = {} must exceed a = {a}", args.n_max)));
    }
    let x0 = args.x0.unwrap_or(a);
    if x0 < a || x0 > args.n_max {
        return Err(CliError::Usage(format!(
            "x0 = {x0} outside [{a}, {}]",
            args.n_max
        )));
    }
    let critical_binary = k == 2 && a == 4;

    let mut lambdas = Vec::new();
    let mut last = None;
    for n in truncations(a, args.n_max) {
        let e = dominant_eigen(&build_killed_kernel(k, a, n)?, 1e-13)?;
        lambdas.push(LambdaRow {
            n_trunc: n,
            lambda: e.lambda,
            lambda_lower: e.lambda_lower,
            lambda_upper: e.lambda_upper,
            k_lambda: f64::from(k) * e.lambda,
            iterations: e.iterations,
        });
        last = Some(e);
    }
    let e = last.expect("at least one truncation");
    let left: Vec<VectorRow> = e
        .left
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = a + i as u32;
            VectorRow {
                x,
                value: v,
                exact: critical_binary.then(|| qsd_exact(x)),
            }
        })
        .collect();
    let right: Vec<VectorRow> = e
        .right
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = a + i as u32;
            VectorRow {
                x,
                value: v,
                exact: critical_binary.then(|| right_eigen_exact(x) / right_eigen_exact(4)),
            }
        })
        .collect();

    let mut chain = ConditionedChain::new(build_killed_kernel(k, a, args.n_max)?, x0)?;
    let mut laws = Vec::new();
    let mut survival = Vec::new();
    for n in 0..=args.steps {
        if n > 0 {
            chain.step();
        }
        let law = chain.law();
        survival.push(SurvivalRow {
            n,
            survival: law.survival,
            scaled_survival: law.scaled_survival,
            cond_mean: law.mean(),
        });
        for (i, &q) in law.q.iter().enumerate() {
            if q > 0.0 {
                laws.push(LawRow {
                    n,
                    x: a + i as u32,
                    q,
                });
            }
        }
    }

    // a truncation narrower than x0 + steps must not move the survival curve
    if (args.n_max as usize) < x0 as usize + args.steps {
        iterate_conditioned(k, a, x0, args.steps, args.n_max)?;
    }

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    output::write_csv(&dir.join("lambda.csv"), &lambdas)?;
    output::write_csv(&dir.join("g.csv"), &left)?;
    output::write_csv(&dir.join("f.csv"), &right)?;
    output::write_csv(&dir.join("qn.csv"), &laws)?;
    output::write_csv(&dir.join("survival.csv"), &survival)?;

    writeln!(out, "k={k} a={a} N={} x0={x0} steps={}", args.n_max, args.steps).map_err(io)?;
    for r in &lambdas {
        writeln!(
            out,
            "lambda_{} = {} (k*lambda = {})",
            r.n_trunc,
            num(r.lambda),
            num(r.k_lambda)
        )
        .map_err(io)?;
    }
    let s = survival.last().expect("n = 0 row");
    writeln!(
        out,
        "n={}: k^n P(T>n) = {}, E[X_n | T>n] = {}",
        s.n,
        num(s.scaled_survival),
        num(s.cond_mean)
    )
    .map_err(io)?;
    writeln!(out, "tables: {}", dir.display()).map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_ladder() {
        assert_eq!(truncations(4, 300), vec![5, 15, 30, 60, 120, 240, 300]);
        assert_eq!(truncations(3, 4), vec![4]);
        assert_eq!(truncations(4, 15), vec![5, 15]);
    }
}
