//! The avoided-crossing experiment.
//!
//! Each trial draws `M - 1` random clauses, cleans them into an instance `P`,
//! enumerates its solutions, then adds one more random clause to get `P'`.
//! `x1` is the solution of `P'` with the lowest fourth-order correction under
//! `H'`; `x2` is the lowest under `H` among the solutions of `P` that the new
//! clause kills. The splitting `E_12` between them is evaluated on `P`.
//!
//! Trials are seeded individually from `(master_seed, N, trial_index)` and
//! collected in index order, so the output does not depend on scheduling.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dpll::{hamming, solve_all, DEFAULT_SOLUTION_CAP};
use crate::ec3::{self, BitString, Instance};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::perturbation::{self, correction_series, order4_solution, splitting, CorrectionSeries};
use crate::scalar::{NumericMode, Scalar};

pub const WORKERS_ENV: &str = "AQO_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alpha: f64,
    pub n_values: Vec<usize>,
    pub samples_per_n: usize,
    pub master_seed: u64,
    pub solution_cap: usize,
    pub numeric_mode: NumericMode,
    /// Thread count; `None` uses every core. Not part of the digest input.
    pub worker_count: Option<usize>,
    /// Give up on an `N` after this many attempted trials.
    pub max_attempts_per_n: usize,
    /// Also locate the order-4 crossing of `P'` for accepted trials.
    pub crossings: bool,
    pub lambda_max: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            alpha: 0.62,
            n_values: (15..=120).step_by(5).collect(),
            samples_per_n: 500,
            master_seed: 1,
            solution_cap: DEFAULT_SOLUTION_CAP,
            numeric_mode: NumericMode::Float,
            worker_count: None,
            max_attempts_per_n: 1_000_000,
            crossings: false,
            lambda_max: 2.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be positive"));
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|&n| n < 3) {
            return Err(Error::invalid("every N must be at least 3"));
        }
        if self.samples_per_n == 0 || self.solution_cap == 0 || self.max_attempts_per_n == 0 {
            return Err(Error::invalid("sample counts and caps must be positive"));
        }
        if !(self.lambda_max > 0.0) {
            return Err(Error::invalid("lambda_max must be positive"));
        }
        Ok(())
    }

    pub fn n_clauses(&self, n_bits: usize) -> usize {
        (self.alpha * n_bits as f64 + 1e-9).floor() as usize
    }

    /// Canonical JSON of every setting that affects results.
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("worker_count");
        }
        v.to_string()
    }

    /// Overrides `worker_count` from `AQO_WORKERS` when it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(s) = std::env::var(WORKERS_ENV) {
            let n: usize = s
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("{WORKERS_ENV}={s} is not a count")))?;
            self.worker_count = Some(n);
        }
        Ok(())
    }
}

/// SplitMix64 finalizer over the three coordinates of a trial.
pub fn trial_seed(master: u64, n_bits: usize, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ n_bits as u64) ^ trial)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rejection {
    /// `P` has no solution.
    Unsat,
    /// No solution of `P` satisfies the added clause.
    NoSurvivor,
    /// Every solution of `P` satisfies the added clause.
    AllSolutionsSurvive,
    /// A zero energy denominator at order 4 or 6.
    Degenerate,
    /// The solution enumeration hit its cap.
    Cap,
    /// The added clause touches a bit removed by cleaning.
    OffSupport,
}

impl Rejection {
    pub const ALL: [Rejection; 6] = [
        Rejection::Unsat,
        Rejection::NoSurvivor,
        Rejection::AllSolutionsSurvive,
        Rejection::Degenerate,
        Rejection::Cap,
        Rejection::OffSupport,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Unsat => "unsat",
            Rejection::NoSurvivor => "no-survivor",
            Rejection::AllSolutionsSurvive => "all-solutions-survive",
            Rejection::Degenerate => "degenerate",
            Rejection::Cap => "cap",
            Rejection::OffSupport => "off-support",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub n_bits: usize,
    pub trial_index: u64,
    pub instance_seed: u64,
    pub accepted: bool,
    pub rejection: Option<Rejection>,
    /// Bits and clauses of `P` after cleaning.
    pub n_clean: usize,
    pub m_clean: usize,
    pub n_solutions: usize,
    pub n_survivors: usize,
    pub x1: Option<BitString>,
    pub x2: Option<BitString>,
    pub hamming_n: Option<usize>,
    pub e12_4: Option<f64>,
    pub e12_6: Option<f64>,
    pub lambda_star: Option<f64>,
}

impl ExperimentRecord {
    fn rejected(n_bits: usize, trial_index: u64, instance_seed: u64, why: Rejection) -> Self {
        ExperimentRecord {
            n_bits,
            trial_index,
            instance_seed,
            accepted: false,
            rejection: Some(why),
            n_clean: 0,
            m_clean: 0,
            n_solutions: 0,
            n_survivors: 0,
            x1: None,
            x2: None,
            hamming_n: None,
            e12_4: None,
            e12_6: None,
            lambda_star: None,
        }
    }
}

/// Everything an accepted trial produced, for follow-up analysis.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub p: Instance,
    pub p_prime: Instance,
    pub x1: BitString,
    pub x2: BitString,
}

fn degenerate(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateNeighbor { .. } | Error::DegenerateInstance { .. }
    )
}

/// Index of the smallest value; values within `tol` (relative) of the running
/// minimum do not replace it, so ties resolve to the earliest candidate.
fn argmin_first<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        let cur = &values[best];
        let better = match S::MODE {
            NumericMode::Exact => v < cur,
            NumericMode::Float => {
                let (a, b) = (v.to_f64(), cur.to_f64());
                a < b - 1e-12 * a.abs().max(b.abs())
            }
        };
        if better {
            best = k;
        }
    }
    best
}

fn trial_inner<S: Scalar>(
    config: &ExperimentConfig,
    n_bits: usize,
    trial_index: u64,
) -> Result<(ExperimentRecord, Option<TrialArtifacts>)> {
    let seed = trial_seed(config.master_seed, n_bits, trial_index);
    let m = config.n_clauses(n_bits).max(1);
    let drawn = ec3::generate_random(n_bits, m, seed)?;
    let (first, last) = drawn.clauses().split_at(m - 1);
    let raw = Instance::with_metadata(n_bits, first.to_vec(), drawn.metadata().clone())?;
    let cleaned = ec3::clean(&raw);
    let p = cleaned.instance.clone();
    let reject = |why| Ok((ExperimentRecord::rejected(n_bits, trial_index, seed, why), None));

    let sols = solve_all(&p, config.solution_cap)?;
    let mut rec = ExperimentRecord::rejected(n_bits, trial_index, seed, Rejection::Unsat);
    rec.n_clean = p.n_bits();
    rec.m_clean = p.n_clauses();
    rec.n_solutions = sols.len();
    let with = |mut r: ExperimentRecord, why: Rejection| {
        r.rejection = Some(why);
        Ok((r, None))
    };
    if sols.truncated {
        return with(rec, Rejection::Cap);
    }
    if sols.is_empty() {
        return with(rec, Rejection::Unsat);
    }
    let Some(extra) = cleaned.map_clause(&last[0]) else {
        return with(rec, Rejection::OffSupport);
    };
    if p.n_bits() == 0 {
        return reject(Rejection::OffSupport);
    }
    let p_prime = p.with_clause(extra)?;
    let (survivors, killed): (Vec<&BitString>, Vec<&BitString>) =
        sols.bits().partition(|x| extra.is_satisfied(x));
    rec.n_survivors = survivors.len();
    if survivors.is_empty() {
        return with(rec, Rejection::NoSurvivor);
    }
    if killed.is_empty() {
        return with(rec, Rejection::AllSolutionsSurvive);
    }

    let eval = |inst: &Instance, xs: &[&BitString]| -> Result<Vec<S>> {
        xs.iter().map(|x| order4_solution::<S>(inst, x)).collect()
    };
    let picked = (|| -> Result<(BitString, BitString, perturbation::SplittingResult<S>)> {
        let e4p = eval(&p_prime, &survivors)?;
        let x1 = survivors[argmin_first(&e4p)].clone();
        let e4 = eval(&p, &killed)?;
        let x2 = killed[argmin_first(&e4)].clone();
        let split = splitting::<S>(&p, &x1, &x2)?;
        Ok((x1, x2, split))
    })();
    let (x1, x2, split) = match picked {
        Ok(v) => v,
        Err(e) if degenerate(&e) => return with(rec, Rejection::Degenerate),
        Err(e) => return Err(e),
    };
    rec.accepted = true;
    rec.rejection = None;
    rec.hamming_n = Some(split.hamming_n);
    rec.e12_4 = Some(split.e12_4.to_f64());
    rec.e12_6 = Some(split.e12_6.to_f64());
    rec.x1 = Some(x1.clone());
    rec.x2 = Some(x2.clone());
    let art = TrialArtifacts { p, p_prime, x1, x2 };
    if config.crossings {
        rec.lambda_star = match crossing_series(&art) {
            Ok((a, b)) => perturbation::crossing_lambda(&a, &b, config.lambda_max),
            Err(e) if degenerate(&e) => None,
            Err(e) => return Err(e),
        };
    }
    Ok((rec, Some(art)))
}

/// One trial, never failing: internal errors other than rejections surface as
/// `Err` only for invalid configurations.
pub fn run_trial(config: &ExperimentConfig, n_bits: usize, trial_index: u64) -> Result<ExperimentRecord> {
    run_trial_detailed(config, n_bits, trial_index).map(|(r, _)| r)
}

pub fn run_trial_detailed(
    config: &ExperimentConfig,
    n_bits: usize,
    trial_index: u64,
) -> Result<(ExperimentRecord, Option<TrialArtifacts>)> {
    config.validate()?;
    match config.numeric_mode {
        NumericMode::Float => trial_inner::<f64>(config, n_bits, trial_index),
        NumericMode::Exact => trial_inner::<num_rational::BigRational>(config, n_bits, trial_index),
    }
}

/// Order-4 level series of `x1` and `x2` under `H'`.
pub fn crossing_series(art: &TrialArtifacts) -> Result<(CorrectionSeries<f64>, CorrectionSeries<f64>)> {
    let a = correction_series::<f64>(&art.p_prime, &art.x1, 4)?;
    let b = correction_series::<f64>(&art.p_prime, &art.x2, 4)?;
    Ok((a, b))
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * p / 100.0;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub p25: f64,
    pub median: f64,
    pub p75: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p25: percentile(&v, 25.0),
            median: percentile(&v, 50.0),
            p75: percentile(&v, 75.0),
        }
    }

    fn get(&self, key: StatKey) -> f64 {
        match key {
            StatKey::Mean => self.mean,
            StatKey::P25 => self.p25,
            StatKey::Median => self.median,
            StatKey::P75 => self.p75,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StatKey {
    Mean,
    P25,
    Median,
    P75,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerN {
    pub n: usize,
    pub samples: usize,
    pub attempts: usize,
    pub rejects: Vec<(Rejection, usize)>,
    pub sq4: Summary,
    pub sq6: Summary,
}

impl PerN {
    pub fn rejects_of(&self, why: Rejection) -> usize {
        self.rejects
            .iter()
            .find(|(r, _)| *r == why)
            .map_or(0, |&(_, c)| c)
    }

    pub fn reject_rate(&self) -> f64 {
        (self.attempts - self.samples) as f64 / self.attempts.max(1) as f64
    }
}

/// `y ≈ c·N` by least squares through the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginFit {
    pub slope: f64,
    pub stderr: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
}

pub fn fit_origin(xs: &[f64], ys: &[f64]) -> OriginFit {
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let ss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let k = xs.len() as f64;
    let stderr = if k > 1.0 { (ss / (k - 1.0) / sxx).sqrt() } else { f64::NAN };
    OriginFit {
        slope,
        stderr,
        rms_residual: (ss / k).sqrt(),
    }
}

/// Ordinary least squares `y ≈ a + b·N`, reported as a diagnostic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

pub fn fit_linear(xs: &[f64], ys: &[f64]) -> LinearFit {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    LinearFit {
        intercept: my - slope * mx,
        slope,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileLambda {
    pub statistic: String,
    pub c4: f64,
    /// `(N, λ_c(N))` for each simulated size.
    pub lambda_c: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingStats {
    pub per_n: Vec<PerN>,
    pub c4: OriginFit,
    pub c6: OriginFit,
    pub c4_linear: LinearFit,
    pub c6_linear: LinearFit,
    pub lambda_r: Option<f64>,
    pub lambda_c_by_percentile: Vec<PercentileLambda>,
    pub threshold_n16: Option<f64>,
    pub threshold_n1: Option<f64>,
    /// Slope of the rejection rate against `N`.
    pub reject_rate_slope: f64,
}

pub fn aggregate(records: &[ExperimentRecord], n_values: &[usize]) -> SplittingStats {
    let mut per_n = Vec::new();
    for &n in n_values {
        let rs: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n_bits == n).collect();
        let acc: Vec<&ExperimentRecord> = rs.iter().copied().filter(|r| r.accepted).collect();
        if acc.is_empty() {
            continue;
        }
        let sq = |f: fn(&ExperimentRecord) -> Option<f64>| -> Vec<f64> {
            acc.iter().filter_map(|r| f(r)).map(|v| v * v).collect()
        };
        per_n.push(PerN {
            n,
            samples: acc.len(),
            attempts: rs.len(),
            rejects: Rejection::ALL
                .iter()
                .map(|&why| (why, rs.iter().filter(|r| r.rejection == Some(why)).count()))
                .collect(),
            sq4: Summary::of(&sq(|r| r.e12_4)),
            sq6: Summary::of(&sq(|r| r.e12_6)),
        });
    }
    let xs: Vec<f64> = per_n.iter().map(|p| p.n as f64).collect();
    let col = |f: &dyn Fn(&PerN) -> f64| -> Vec<f64> { per_n.iter().map(f).collect() };
    let y4 = col(&|p| p.sq4.mean);
    let y6 = col(&|p| p.sq6.mean);
    let c4 = fit_origin(&xs, &y4);
    let c6 = fit_origin(&xs, &y6);
    let lambda_r = perturbation::lambda_r(c4.slope, c6.slope).ok();
    let thresholds = lambda_r.and_then(|lr| perturbation::threshold_n(c4.slope, lr).ok());
    let lambda_c_by_percentile = [
        ("p25", StatKey::P25),
        ("median", StatKey::Median),
        ("p75", StatKey::P75),
        ("mean", StatKey::Mean),
    ]
    .iter()
    .map(|&(name, key)| {
        let c = fit_origin(&xs, &col(&|p| p.sq4.get(key))).slope;
        PercentileLambda {
            statistic: name.to_string(),
            c4: c,
            lambda_c: per_n
                .iter()
                .filter_map(|p| perturbation::lambda_c(c, p.n as f64).ok().map(|l| (p.n, l)))
                .collect(),
        }
    })
    .collect();
    let rates = col(&|p| p.reject_rate());
    SplittingStats {
        c4_linear: fit_linear(&xs, &y4),
        c6_linear: fit_linear(&xs, &y6),
        per_n,
        c4,
        c6,
        lambda_r,
        lambda_c_by_percentile,
        threshold_n16: thresholds.map(|t| t.gap4),
        threshold_n1: thresholds.map(|t| t.gap1),
        reject_rate_slope: fit_linear(&xs, &rates).slope,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    pub stats: SplittingStats,
    /// Sizes that ran out of attempts before reaching `samples_per_n`.
    pub incomplete: Vec<usize>,
}

fn batch_size(config: &ExperimentConfig) -> usize {
    let threads = config
        .worker_count
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    (threads * 8).max(16)
}

/// Trials for one `N`, attempted in index order until `want` are accepted.
/// Batches run in parallel; anything past the deciding trial is discarded.
pub fn collect_accepted(
    config: &ExperimentConfig,
    n_bits: usize,
    want: usize,
    exec: Exec,
) -> Result<(Vec<(ExperimentRecord, Option<TrialArtifacts>)>, bool)> {
    let mut out = Vec::new();
    let mut accepted = 0;
    let mut next = 0u64;
    let batch = batch_size(config) as u64;
    while accepted < want && (next as usize) < config.max_attempts_per_n {
        let hi = (next + batch).min(config.max_attempts_per_n as u64);
        let idx: Vec<u64> = (next..hi).collect();
        let results = par::map_slice(exec, &idx, |&t| run_trial_detailed(config, n_bits, t));
        for r in results {
            let r = r?;
            if accepted == want {
                break;
            }
            accepted += r.0.accepted as usize;
            out.push(r);
        }
        next = hi;
    }
    Ok((out, accepted == want))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run_experiment_with(config, Exec::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    config.validate()?;
    par::with_workers(config.worker_count, || {
        let mut records = Vec::new();
        let mut incomplete = Vec::new();
        for &n in &config.n_values {
            let (rs, complete) = collect_accepted(config, n, config.samples_per_n, exec)?;
            if !complete {
                incomplete.push(n);
            }
            records.extend(rs.into_iter().map(|(r, _)| r));
        }
        let stats = aggregate(&records, &config.n_values);
        Ok(ExperimentOutput {
            records,
            stats,
            incomplete,
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub trial_index: u64,
    pub hamming_n: usize,
    /// Energy of `x2` under `H'` at `λ = 0`.
    pub gap0: u64,
    pub lambda_star: Option<f64>,
    /// The order-4 series of `x2` under `H'` has a zero denominator.
    pub degenerate: bool,
    pub series1: Option<CorrectionSeries<f64>>,
    pub series2: Option<CorrectionSeries<f64>>,
}

/// Order-4 crossings of `P'` over the first `max_trials` accepted trials.
pub fn crossing_search(config: &ExperimentConfig, n_bits: usize, max_trials: usize) -> Result<Vec<CrossingRecord>> {
    config.validate()?;
    par::with_workers(config.worker_count, || {
        let (rs, _) = collect_accepted(config, n_bits, max_trials, Exec::default())?;
        let mut out = Vec::new();
        for (rec, art) in rs {
            let Some(art) = art else { continue };
            let gap0 = ec3::cost(&art.p_prime, &art.x2)?;
            let hamming_n = hamming(&art.x1, &art.x2)?;
            let cr = match crossing_series(&art) {
                Ok((a, b)) => CrossingRecord {
                    trial_index: rec.trial_index,
                    hamming_n,
                    gap0,
                    lambda_star: perturbation::crossing_lambda(&a, &b, config.lambda_max),
                    degenerate: false,
                    series1: Some(a),
                    series2: Some(b),
                },
                Err(e) if degenerate(&e) => CrossingRecord {
                    trial_index: rec.trial_index,
                    hamming_n,
                    gap0,
                    lambda_star: None,
                    degenerate: true,
                    series1: None,
                    series2: None,
                },
                Err(e) => return Err(e),
            };
            out.push(cr);
        }
        Ok(out)
    })
}

/// Scans accepted trials in index order and stops at the first order-4
/// crossing below `below`. Returns the number of accepted trials examined.
pub fn first_crossing(
    config: &ExperimentConfig,
    n_bits: usize,
    max_accepted: usize,
    below: f64,
) -> Result<(usize, Option<(CrossingRecord, TrialArtifacts)>)> {
    config.validate()?;
    par::with_workers(config.worker_count, || {
        let batch = batch_size(config) as u64;
        let mut seen = 0;
        let mut next = 0u64;
        while seen < max_accepted && (next as usize) < config.max_attempts_per_n {
            let hi = (next + batch).min(config.max_attempts_per_n as u64);
            let idx: Vec<u64> = (next..hi).collect();
            let results = par::map_slice(Exec::default(), &idx, |&t| run_trial_detailed(config, n_bits, t));
            for r in results {
                let (rec, art) = r?;
                let Some(art) = art else { continue };
                if seen == max_accepted {
                    break;
                }
                seen += 1;
                let (a, b) = match crossing_series(&art) {
                    Ok(v) => v,
                    Err(e) if degenerate(&e) => continue,
                    Err(e) => return Err(e),
                };
                let l = perturbation::crossing_lambda(&a, &b, config.lambda_max);
                if l.is_some_and(|l| l < below) {
                    let cr = CrossingRecord {
                        trial_index: rec.trial_index,
                        hamming_n: hamming(&art.x1, &art.x2)?,
                        gap0: ec3::cost(&art.p_prime, &art.x2)?,
                        lambda_star: l,
                        degenerate: false,
                        series1: Some(a),
                        series2: Some(b),
                    };
                    return Ok((seen, Some((cr, art))));
                }
            }
            next = hi;
        }
        Ok((seen, None))
    })
}

/// `(λ, e1, e2, e1 − e2)` on a uniform grid of `points` over `[0, lambda_max]`.
pub fn crossing_curve(
    a: &CorrectionSeries<f64>,
    b: &CorrectionSeries<f64>,
    lambda_max: f64,
    points: usize,
) -> Vec<[f64; 4]> {
    let steps = points.max(2) - 1;
    (0..=steps)
        .map(|k| {
            let l = lambda_max * k as f64 / steps as f64;
            let (e1, e2) = (a.eval(l), b.eval(l));
            [l, e1, e2, e1 - e2]
        })
        .collect()
}

fn header_lines(header: &str) -> String {
    header.lines().map(|l| format!("# {l}\n")).collect()
}

pub fn format_curve(header: &str, curve: &[[f64; 4]]) -> String {
    let mut s = header_lines(header);
    s.push_str("lambda,e1,e2,e1_minus_e2\n");
    for r in curve {
        let _ = writeln!(s, "{},{},{},{}", r[0], r[1], r[2], r[3]);
    }
    s
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

pub fn format_records(header: &str, records: &[ExperimentRecord]) -> String {
    let mut s = header_lines(header);
    s.push_str("n,trial,seed,accepted,reason,n_clean,m_clean,n_solutions,n_survivors,x1,x2,hamming_n,e12_4,e12_6,lambda_star\n");
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.n_bits,
            r.trial_index,
            r.instance_seed,
            r.accepted as u8,
            r.rejection.map_or("", Rejection::as_str),
            r.n_clean,
            r.m_clean,
            r.n_solutions,
            r.n_survivors,
            opt(&r.x1),
            opt(&r.x2),
            opt(&r.hamming_n),
            opt(&r.e12_4),
            opt(&r.e12_6),
            opt(&r.lambda_star),
        );
    }
    s
}

pub fn format_stats(header: &str, stats: &SplittingStats) -> String {
    let mut s = header_lines(header);
    s.push_str(
        "n,samples,rejects_unsat,rejects_survive,rejects_degenerate,\
         mean_sq4,p25_sq4,med_sq4,p75_sq4,mean_sq6,p25_sq6,med_sq6,p75_sq6,\
         attempts,rejects_no_survivor,rejects_cap,rejects_off_support\n",
    );
    for p in &stats.per_n {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.n,
            p.samples,
            p.rejects_of(Rejection::Unsat),
            p.rejects_of(Rejection::AllSolutionsSurvive),
            p.rejects_of(Rejection::Degenerate),
            p.sq4.mean,
            p.sq4.p25,
            p.sq4.median,
            p.sq4.p75,
            p.sq6.mean,
            p.sq6.p25,
            p.sq6.median,
            p.sq6.p75,
            p.attempts,
            p.rejects_of(Rejection::NoSurvivor),
            p.rejects_of(Rejection::Cap),
            p.rejects_of(Rejection::OffSupport),
        );
    }
    s
}

pub fn fit_json(stats: &SplittingStats, meta: serde_json::Value) -> serde_json::Value {
    let by_pct: serde_json::Map<String, serde_json::Value> = stats
        .lambda_c_by_percentile
        .iter()
        .map(|p| {
            (
                p.statistic.clone(),
                serde_json::json!({ "c4": p.c4, "lambda_c": p.lambda_c }),
            )
        })
        .collect();
    serde_json::json!({
        "meta": meta,
        "c4": stats.c4.slope,
        "c4_stderr": stats.c4.stderr,
        "c6": stats.c6.slope,
        "c6_stderr": stats.c6.stderr,
        "lambda_r": stats.lambda_r,
        "lambda_c_by_percentile": by_pct,
        "threshold_n16": stats.threshold_n16,
        "threshold_n1": stats.threshold_n1,
        "c4_rms_residual": stats.c4.rms_residual,
        "c6_rms_residual": stats.c6.rms_residual,
        "c4_with_intercept": stats.c4_linear,
        "c6_with_intercept": stats.c6_linear,
        "reject_rate_slope": stats.reject_rate_slope,
    })
}

/// gnuplot script plotting `stats.csv` against the fitted lines.
pub fn plot_script(stats: &SplittingStats) -> String {
    format!(
        "set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set key left top\n\
         set xlabel 'N'\n\
         c4 = {c4}\n\
         c6 = {c6}\n\
         set terminal pngcairo size 900,600\n\
         set output 'sq4.png'\n\
         set ylabel '(E12^(4))^2'\n\
         plot 'stats.csv' every ::1 using 1:6 with points title 'mean', \\\n\
         \x20    '' every ::1 using 1:8:7:9 with yerrorbars title 'median, 25-75%', \\\n\
         \x20    c4*x with lines title sprintf('%.4f N', c4)\n\
         set output 'sq6.png'\n\
         set ylabel '(E12^(6))^2'\n\
         plot 'stats.csv' every ::1 using 1:10 with points title 'mean', \\\n\
         \x20    '' every ::1 using 1:12:11:13 with yerrorbars title 'median, 25-75%', \\\n\
         \x20    c6*x with lines title sprintf('%.4f N', c6)\n",
        c4 = stats.c4.slope,
        c6 = stats.c6.slope,
    )
}

/// Writes `stats.csv`, `records.csv`, `fit.json` and `plot.gp` into `dir`.
pub fn write_outputs(dir: &Path, header: &str, meta: serde_json::Value, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut fit = fit_json(&out.stats, meta);
    fit["incomplete_n"] = serde_json::json!(out.incomplete);
    let files = [
        ("stats.csv", format_stats(header, &out.stats)),
        ("records.csv", format_records(header, &out.records)),
        ("fit.json", serde_json::to_string_pretty(&fit).expect("json") + "\n"),
        ("plot.gp", plot_script(&out.stats)),
    ];
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            n_values: vec![15, 20, 25],
            samples_per_n: 12,
            master_seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        assert_eq!(trial_seed(1, 15, 0), trial_seed(1, 15, 0));
        assert_ne!(trial_seed(1, 15, 0), trial_seed(1, 15, 1));
        assert_ne!(trial_seed(1, 15, 0), trial_seed(1, 20, 0));
        assert_ne!(trial_seed(1, 15, 0), trial_seed(2, 15, 0));
    }

    #[test]
    fn percentiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 2.5);
        assert_eq!(percentile(&v, 25.0), 1.75);
        assert_eq!(percentile(&v, 100.0), 4.0);
    }

    #[test]
    fn origin_fit_recovers_slope() {
        let xs = [10.0, 20.0, 30.0];
        let f = fit_origin(&xs, &[0.3, 0.6, 0.9]);
        assert!((f.slope - 0.03).abs() < 1e-15 && f.stderr < 1e-15);
        let l = fit_linear(&xs, &[1.3, 1.6, 1.9]);
        assert!((l.intercept - 1.0).abs() < 1e-12 && (l.slope - 0.03).abs() < 1e-12);
    }

    #[test]
    fn argmin_ties_go_first() {
        assert_eq!(argmin_first(&[2.0, 1.0, 1.0 + 1e-15, 3.0]), 1);
        assert_eq!(argmin_first(&[1.0, 1.0]), 0);
    }

    #[test]
    fn accepted_records_are_consistent() {
        let cfg = small_config();
        for t in 0..40 {
            let (r, art) = run_trial_detailed(&cfg, 20, t).unwrap();
            assert_eq!(r.accepted, art.is_some());
            if let Some(a) = art {
                assert!(r.hamming_n.unwrap() >= 1);
                assert!(r.e12_4.unwrap().is_finite() && r.e12_6.unwrap().is_finite());
                assert_eq!(ec3::cost(&a.p, &a.x1).unwrap(), 0);
                assert_eq!(ec3::cost(&a.p, &a.x2).unwrap(), 0);
                assert_eq!(ec3::cost(&a.p_prime, &a.x1).unwrap(), 0);
                assert!(ec3::cost(&a.p_prime, &a.x2).unwrap() > 0);
            } else {
                assert!(r.rejection.is_some());
            }
        }
    }

    #[test]
    fn exact_and_float_pick_the_same_pair() {
        let cfg = small_config();
        let exact = ExperimentConfig {
            numeric_mode: NumericMode::Exact,
            ..cfg.clone()
        };
        for t in 0..15 {
            let a = run_trial(&cfg, 15, t).unwrap();
            let b = run_trial(&exact, 15, t).unwrap();
            assert_eq!(a.accepted, b.accepted);
            assert_eq!(a.x1, b.x1);
            assert_eq!(a.x2, b.x2);
            if let (Some(x), Some(y)) = (a.e12_4, b.e12_4) {
                assert!((x - y).abs() < 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn output_is_independent_of_workers() {
        let mut one = small_config();
        one.worker_count = Some(1);
        let mut four = one.clone();
        four.worker_count = Some(4);
        let a = run_experiment(&one).unwrap();
        let b = run_experiment(&four).unwrap();
        let c = run_experiment_with(&one, Exec::Sequential).unwrap();
        assert_eq!(format_records("h", &a.records), format_records("h", &b.records));
        assert_eq!(format_records("h", &a.records), format_records("h", &c.records));
        assert_eq!(one.canonical_json(), four.canonical_json());
        for p in &a.stats.per_n {
            assert_eq!(p.samples, 12);
            assert!(p.sq4.p25 <= p.sq4.median && p.sq4.median <= p.sq4.p75);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.n_values = vec![2];
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.alpha = 0.0;
        assert!(c.validate().is_err());
        assert_eq!(small_config().n_clauses(100), 62);
    }
}
