//! Dispatch, replicate loops and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{Experiment, ExperimentConfig, Mode};
use super::summary::{summarize_replicates, ternary_histogram, threshold_key, TernaryHistogram};
use crate::balance::{
    cdf_p1_sign, divergence_gap, equally_wrong_partner, limit_log_odds, log_posterior_odds_variance,
    simulate_balance_replicates, variance_model_decomposition, BalanceProblem, GaussianSummary, SignModelConfig,
    VariancePairConfig,
};
use crate::coin::{
    nonextreme_threshold, overconfidence_region, overconfidence_scan, prob_nonextreme_exact, prob_nonextreme_normal,
    simulate_coin_replicates, CoinComparison, NonextremeRegion,
};
use crate::error::{Error, Result};
use crate::phylo::{
    mcmc_tree_posteriors_4taxon, pattern_probs_3taxon, pattern_probs_4taxon, simulate_counts, tree_posteriors_3taxon,
    ClockBranchLengths, McmcConfig, PhyloPrior, RateModel, SitePatternCounts, Topology3, Topology4,
};
use crate::rng::{derive_seed, replicate_rng};
use crate::selection::{
    classify_behavior, estimate_growth_order, BehaviorClass, ComparisonStructure, EQUAL_WRONGNESS_TOLERANCE,
};
use crate::special::logistic;
use crate::stats::ks_distance;

pub const WORKERS_ENV: &str = "PARADOX_WORKERS";
pub const REPLICATES_FILE: &str = "replicates.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const META_FILE: &str = "meta.json";
pub const TERNARY_FILE: &str = "ternary.csv";
pub const FAILED_FILE: &str = "FAILED";

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub rows: usize,
    pub rng_draws: u64,
    pub summary: Value,
}

struct Table {
    header: String,
    rows: Vec<String>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { header: columns.join(","), rows: Vec::new() }
    }

    fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }
}

/// 17 significant digits, which round-trips every f64.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

struct Outcome {
    table: Table,
    results: Value,
    draws: u64,
    ternary: Option<String>,
}

/// Worker count: explicit setting, then `PARADOX_WORKERS`, then all cores.
pub fn resolve_workers(explicit: Option<usize>) -> Result<usize> {
    if let Some(w) = explicit {
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| Error::Config(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    let failed = dir.join(FAILED_FILE);
    if failed.exists() {
        fs::remove_file(failed)?;
    }
    Ok(())
}

/// Runs one experiment and writes its report files into the output directory.
///
/// On failure after the directory exists, a `FAILED` file with the error
/// message is left next to whatever was written.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let workers = resolve_workers(config.workers)?;
    let dir = config.output_dir();
    prepare_dir(&dir)?;
    let result = (|| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        let start = Instant::now();
        let outcome = pool.install(|| execute(config))?;
        let elapsed = start.elapsed().as_secs_f64();
        fs::write(dir.join(REPLICATES_FILE), outcome.table.to_csv())?;
        if let Some(t) = &outcome.ternary {
            fs::write(dir.join(TERNARY_FILE), t)?;
        }
        let summary = json!({
            "experiment": config.experiment.name(),
            "config": config,
            "workers": workers,
            "wall_time_seconds": elapsed,
            "results": outcome.results,
        });
        fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?)?;
        let meta = json!({
            "artifact_version": env!("CARGO_PKG_VERSION"),
            "experiment": config.experiment.name(),
            "total_rng_draws": outcome.draws,
            "rows": outcome.table.rows.len(),
        });
        fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)?)?;
        Ok(RunReport { output_dir: dir.clone(), rows: outcome.table.rows.len(), rng_draws: outcome.draws, summary })
    })();
    if let Err(e) = &result {
        // Best effort: the original error is what the caller needs.
        let _ = fs::write(dir.join(FAILED_FILE), format!("{e}\n"));
    }
    result
}

fn execute(c: &ExperimentConfig) -> Result<Outcome> {
    match c.experiment {
        Experiment::Coin => match c.mode() {
            Mode::Exact => coin_exact(c),
            Mode::Simulate => coin_simulate(c),
        },
        Experiment::CoinScan => coin_scan(c),
        Experiment::BalanceSign => balance_sign(c),
        Experiment::BalanceVar => balance_var(c),
        Experiment::Star3Right => star3(c, false),
        Experiment::Star3WrongIndistinct => star3(c, true),
        Experiment::Star4WrongDistinct | Experiment::Table1 => star4(c, false),
        Experiment::Table2 => star4(c, true),
        Experiment::DecompositionDemo => decomposition(c),
    }
}

/// Master seed for the replicates at one sample size.
fn seed_for(c: &ExperimentConfig, n: u64) -> u64 {
    derive_seed(c.seed, c.experiment.name(), n)
}

fn coin_comparison(c: &ExperimentConfig, p1: f64, p2: f64) -> Result<CoinComparison> {
    CoinComparison::new(c.p_true.unwrap_or(0.5), c.p1.unwrap_or(p1), c.p2.unwrap_or(p2))
}

fn region_json(r: &NonextremeRegion) -> Value {
    match r {
        NonextremeRegion::Symmetric { b } => json!({ "symmetric_half_width_b": b }),
        NonextremeRegion::Linear { lower_intercept, upper_intercept, per_n } => {
            json!({ "lower_intercept": lower_intercept, "upper_intercept": upper_intercept, "per_n": per_n })
        }
    }
}

fn coin_exact(c: &ExperimentConfig) -> Result<Outcome> {
    let cmp = coin_comparison(c, 0.4, 0.6)?;
    let alpha = c.alpha.unwrap_or(0.01);
    let region = nonextreme_threshold(alpha, &cmp)?;
    let per_n = c
        .n_values()
        .par_iter()
        .map(|&n| {
            let exact = prob_nonextreme_exact(n, alpha, &cmp)?;
            let normal = if cmp.is_symmetric() { Some(prob_nonextreme_normal(n, alpha, &cmp)?) } else { None };
            Ok(json!({ "n": n, "prob_nonextreme_exact": exact, "prob_nonextreme_normal": normal }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome {
        table: Table::new(&["seed", "n", "p1", "x"]),
        results: json!({ "alpha": alpha, "region": region_json(&region), "per_n": per_n }),
        draws: 0,
        ternary: None,
    })
}

fn coin_simulate(c: &ExperimentConfig) -> Result<Outcome> {
    let cmp = coin_comparison(c, 0.4, 0.6)?;
    let alpha = c.alpha.unwrap_or(0.01);
    let mut table = Table::new(&["seed", "n", "p1", "x"]);
    let mut per_n = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let reps = simulate_coin_replicates(&cmp, n, c.reps(), seed_for(c, n))?;
        let mut samples = Vec::with_capacity(reps.len());
        let mut inside = 0usize;
        for r in &reps {
            table.rows.push(format!("{},{},{},{}", r.seed, n, num(r.p1), r.x));
            samples.push(vec![r.p1, 1.0 - r.p1]);
            inside += usize::from(r.p1 > alpha && r.p1 < 1.0 - alpha);
            draws += r.draws;
        }
        let p = inside as f64 / reps.len() as f64;
        per_n.push(json!({
            "n": n,
            "stats": summarize_replicates(&samples, &c.thresholds())?,
            "prob_nonextreme_empirical": p,
            "prob_nonextreme_empirical_se": (p * (1.0 - p) / reps.len() as f64).sqrt(),
            "prob_nonextreme_exact": prob_nonextreme_exact(n, alpha, &cmp)?,
        }));
    }
    Ok(Outcome { table, results: json!({ "alpha": alpha, "per_n": per_n }), draws, ternary: None })
}

fn coin_scan(c: &ExperimentConfig) -> Result<Outcome> {
    let cmp = coin_comparison(c, 0.42, 0.6)?;
    let threshold = c.threshold.unwrap_or(0.99);
    let level = c.level.unwrap_or(0.01);
    let records = overconfidence_scan(&cmp, threshold, &c.n_values())?;
    let n_max = c.n_max.unwrap_or(20_000);
    let region = overconfidence_region(&cmp, threshold, level, n_max)?;
    Ok(Outcome {
        table: Table::new(&["seed", "n", "p1"]),
        results: json!({
            "threshold": threshold,
            "records": records,
            "region": { "level": level, "n_max": n_max, "first_last_n": region },
        }),
        draws: 0,
        ternary: None,
    })
}

fn balance_sign(c: &ExperimentConfig) -> Result<Outcome> {
    let mut table = Table::new(&["seed", "n", "p1", "xbar"]);
    let mut per_n = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let cfg = SignModelConfig::new(c.tau.unwrap_or(1.0), c.xi.unwrap_or(1.0), n)?;
        let reps = simulate_balance_replicates(&BalanceProblem::SignModel(cfg), c.reps(), seed_for(c, n))?;
        let mut samples = Vec::with_capacity(reps.len());
        for r in &reps {
            table.rows.push(format!("{},{},{},{}", r.seed, n, num(r.p1), num(r.xbar)));
            samples.push(vec![r.p1, 1.0 - r.p1]);
            draws += r.draws;
        }
        let p1: Vec<f64> = reps.iter().map(|r| r.p1).collect();
        per_n.push(json!({
            "n": n,
            "stats": summarize_replicates(&samples, &c.thresholds())?,
            "ks_distance_to_implied_cdf": ks_distance(&p1, |p| cdf_p1_sign(p, &cfg)),
        }));
    }
    Ok(Outcome { table, results: json!({ "per_n": per_n }), draws, ternary: None })
}

fn balance_var(c: &ExperimentConfig) -> Result<Outcome> {
    let tau1 = c.tau1.unwrap_or(0.3);
    let tau2 = c.tau2.unwrap_or(2.58666);
    let mut table = Table::new(&["seed", "n", "p1", "p2", "xbar", "s2", "log_odds", "limit_log_odds"]);
    let mut per_n = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let cfg = VariancePairConfig::new(tau1, tau2, c.xi.unwrap_or(1.0), n)?;
        let reps = simulate_balance_replicates(&BalanceProblem::VariancePair(cfg), c.reps(), seed_for(c, n))?;
        let mut samples = Vec::with_capacity(reps.len());
        for r in &reps {
            let s = GaussianSummary { n, xbar: r.xbar, s2: r.s2.expect("variance pair records s2") };
            let lo = log_posterior_odds_variance(&s, &cfg);
            // P₂ from the log-odds directly keeps precision when P₁ ≈ 1.
            let p2 = logistic(-lo);
            table.rows.push(format!(
                "{},{},{},{},{},{},{},{}",
                r.seed,
                n,
                num(r.p1),
                num(p2),
                num(r.xbar),
                num(s.s2),
                num(lo),
                num(limit_log_odds(&s, &cfg))
            ));
            samples.push(vec![r.p1, p2]);
            draws += r.draws;
        }
        per_n.push(json!({ "n": n, "stats": summarize_replicates(&samples, &c.thresholds())? }));
    }
    Ok(Outcome { table, results: json!({ "tau1": tau1, "tau2": tau2, "per_n": per_n }), draws, ternary: None })
}

fn decomposition(c: &ExperimentConfig) -> Result<Outcome> {
    let tau1 = c.tau1.unwrap_or(0.25);
    let tau2 = match c.tau2 {
        Some(t) => t,
        None => equally_wrong_partner(tau1)?,
    };
    let xi = c.xi.unwrap_or(1.0);
    let gap = divergence_gap(tau1, tau2, 1e-12)?;
    let structure = ComparisonStructure::new(true, 1, 1, gap, false)?;
    let class = classify_behavior(&structure);

    let mut table = Table::new(&["seed", "n", "p1", "p2", "xbar", "s2", "delta_a", "delta_b", "delta_c", "log_odds"]);
    let mut per_n = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let cfg = VariancePairConfig::new(tau1, tau2, xi, n)?;
        let reps = simulate_balance_replicates(&BalanceProblem::VariancePair(cfg), c.reps(), seed_for(c, n))?;
        let mut deltas = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
        for r in &reps {
            let s = GaussianSummary { n, xbar: r.xbar, s2: r.s2.expect("variance pair records s2") };
            let d = variance_model_decomposition(&s, tau1, xi).difference(&variance_model_decomposition(&s, tau2, xi));
            let lo = log_posterior_odds_variance(&s, &cfg);
            table.rows.push(format!(
                "{},{},{},{},{},{},{},{},{},{}",
                r.seed,
                n,
                num(r.p1),
                num(logistic(-lo)),
                num(r.xbar),
                num(s.s2),
                num(d.a),
                num(d.b),
                num(d.c),
                num(lo)
            ));
            for (k, v) in [d.a, d.b, d.c, lo].into_iter().enumerate() {
                deltas[k].push(v);
            }
            draws += r.draws;
        }
        let sd = |v: &[f64]| crate::stats::variance(v).sqrt();
        per_n.push(json!({
            "n": n,
            "sd_delta_a": sd(&deltas[0]),
            "sd_delta_b": sd(&deltas[1]),
            "sd_delta_c": sd(&deltas[2]),
            "sd_log_odds": sd(&deltas[3]),
        }));
    }
    let growth = {
        let sampler = |n: u64, rng: &mut crate::rng::ReplicateRng| {
            use rand_distr::{ChiSquared, Distribution, StandardNormal};
            let z: f64 = StandardNormal.sample(rng);
            let ns2 = ChiSquared::new((n - 1) as f64).expect("n >= 2").sample(rng);
            let s = GaussianSummary { n, xbar: z / (n as f64).sqrt(), s2: ns2 / n as f64 };
            log_posterior_odds_variance(&s, &VariancePairConfig { tau1, tau2, xi, n })
        };
        match estimate_growth_order(sampler, &c.n_values(), c.reps().max(3), derive_seed(c.seed, "growth", 0)) {
            Ok(g) => json!(g),
            Err(Error::Domain(msg)) => json!({ "skipped": msg }),
            Err(e) => return Err(e),
        }
    };
    Ok(Outcome {
        table,
        results: json!({
            "tau1": tau1,
            "tau2": tau2,
            "divergence_gap": gap,
            "equally_wrong": gap.abs() <= EQUAL_WRONGNESS_TOLERANCE,
            "behavior": behavior_name(class),
            "log_odds_growth": growth,
            "per_n": per_n,
        }),
        draws,
        ternary: None,
    })
}

fn behavior_name(b: BehaviorClass) -> String {
    format!("{b:?}")
}

fn ternary_csv(hists: &[(u64, TernaryHistogram)]) -> String {
    let mut s = String::from("n,i,j,upright,count\n");
    for (n, h) in hists {
        for line in h.to_csv().lines().skip(1) {
            let _ = writeln!(s, "{n},{line}");
        }
    }
    s
}

fn tree_summary(
    c: &ExperimentConfig,
    n: u64,
    posteriors: &[[f64; 3]],
    hists: &mut Vec<(u64, TernaryHistogram)>,
) -> Result<Value> {
    let samples: Vec<Vec<f64>> = posteriors.iter().map(|p| p.to_vec()).collect();
    let bins = c.ternary_bins.unwrap_or(20);
    let hist = ternary_histogram(posteriors, bins)?;
    let central = hist.count(TernaryHistogram::central_cell(bins)) as f64 / posteriors.len() as f64;
    hists.push((n, hist));
    Ok(json!({
        "n": n,
        "stats": summarize_replicates(&samples, &c.thresholds())?,
        "ternary_central_fraction": central,
    }))
}

fn star3(c: &ExperimentConfig, wrong: bool) -> Result<Outcome> {
    let t = c.branch_length.unwrap_or(0.2);
    let rates = if wrong { RateModel::gamma(c.gamma_shape.unwrap_or(1.0))? } else { RateModel::jc() };
    let truth = pattern_probs_3taxon(Topology3::Star, ClockBranchLengths::new(0.0, t)?, &rates)?;
    let prior = PhyloPrior::new(c.prior_mean_t0.unwrap_or(0.1), c.prior_mean_t1.unwrap_or(0.2), c.prior_mean_all.unwrap_or(0.1))?;
    let points = c.points_per_dim.unwrap_or(128);
    let tag = c.experiment.name();
    let mut table = Table::new(&["seed", "n", "p1", "p2", "p3", "c_xxx", "c_xxy", "c_yxx", "c_xyx", "c_xyz"]);
    let mut per_n = Vec::new();
    let mut hists = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let master = seed_for(c, n);
        let reps: Vec<(u64, Vec<u64>, [f64; 3], u64)> = (0..c.reps() as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(master, tag, i);
                let counts = simulate_counts(&truth, n, &mut rng)?;
                let post = tree_posteriors_3taxon(&SitePatternCounts::new(3, counts.clone())?, &prior, points)?;
                Ok((derive_seed(master, tag, i), counts, post.p, rng.draws()))
            })
            .collect::<Result<_>>()?;
        let mut posteriors = Vec::with_capacity(reps.len());
        for (seed, counts, p, d) in &reps {
            let counts: Vec<String> = counts.iter().map(u64::to_string).collect();
            table.rows.push(format!("{seed},{n},{},{},{},{}", num(p[0]), num(p[1]), num(p[2]), counts.join(",")));
            posteriors.push(*p);
            draws += d;
        }
        per_n.push(tree_summary(c, n, &posteriors, &mut hists)?);
    }
    Ok(Outcome { table, results: json!({ "per_n": per_n }), draws, ternary: Some(ternary_csv(&hists)) })
}

fn star4(c: &ExperimentConfig, resolved_truth: bool) -> Result<Outcome> {
    let t = c.branch_length.unwrap_or(0.2);
    let rates = RateModel::gamma(c.gamma_shape.unwrap_or(1.0))?;
    let (topo, internal) = if resolved_truth { (Topology4::T1, c.internal_length.unwrap_or(0.002)) } else { (Topology4::Star, 0.0) };
    let truth = pattern_probs_4taxon(topo, &[internal, t, t, t, t], &rates)?;
    let prior = PhyloPrior::new(c.prior_mean_t0.unwrap_or(0.1), c.prior_mean_t1.unwrap_or(0.2), c.prior_mean_all.unwrap_or(0.1))?;
    let iterations = c.mcmc_iterations.unwrap_or(200_000);
    let chains = c.chains.unwrap_or(2);
    let burn_in = c.burn_in_fraction.unwrap_or(0.25);
    let tag = c.experiment.name();
    let mut table = Table::new(&["seed", "n", "p1", "p2", "p3", "chain_gap", "converged"]);
    let mut per_n = Vec::new();
    let mut hists = Vec::new();
    let mut draws = 0;
    for n in c.n_values() {
        let master = seed_for(c, n);
        let reps: Vec<(u64, [f64; 3], f64, bool, u64)> = (0..c.reps() as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(master, tag, i);
                let counts = SitePatternCounts::new(4, simulate_counts(&truth, n, &mut rng)?)?;
                let mcmc = McmcConfig {
                    iterations,
                    burn_in_fraction: burn_in,
                    seed: derive_seed(master, "mcmc", i),
                    chains,
                };
                let post = mcmc_tree_posteriors_4taxon(&counts, &prior, &mcmc)?;
                let d = rng.draws() + post.diagnostics["rng_draws"] as u64;
                Ok((derive_seed(master, tag, i), post.p, post.diagnostics["chain_gap"], post.converged, d))
            })
            .collect::<Result<_>>()?;
        let mut posteriors = Vec::with_capacity(reps.len());
        let mut converged = 0usize;
        for (seed, p, gap, ok, d) in &reps {
            table.rows.push(format!("{seed},{n},{},{},{},{},{}", num(p[0]), num(p[1]), num(p[2]), num(*gap), u8::from(*ok)));
            posteriors.push(*p);
            converged += usize::from(*ok);
            draws += d;
        }
        let mut entry = tree_summary(c, n, &posteriors, &mut hists)?;
        entry["converged_fraction"] = json!(converged as f64 / reps.len() as f64);
        if resolved_truth {
            let reps_f = posteriors.len() as f64;
            let mut extras = serde_json::Map::new();
            for th in c.thresholds() {
                let key = threshold_key(th);
                let p1_below = posteriors.iter().filter(|p| p[0] < th).count() as f64 / reps_f;
                let p23_above = posteriors.iter().filter(|p| p[1].max(p[2]) > th).count() as f64 / reps_f;
                extras.insert(format!("p1_below[{key}]"), json!(p1_below));
                extras.insert(format!("p23_above[{key}]"), json!(p23_above));
            }
            entry["wrong_tree_support"] = Value::Object(extras);
        }
        per_n.push(entry);
    }
    Ok(Outcome {
        table,
        results: json!({ "mcmc_iterations": iterations, "chains": chains, "per_n": per_n }),
        draws,
        ternary: Some(ternary_csv(&hists)),
    })
}
