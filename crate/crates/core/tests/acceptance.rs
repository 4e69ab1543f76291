//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 7 and 13 run a full desk-scale experiment and a large-N crossing
//! search; they take hours and only run when `AQO_ACCEPTANCE_FULL=1`.
//! Otherwise they print `SKIP`. `AQO_ACCEPTANCE_ONLY=3,10` restricts the run
//! to the listed criteria.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aqo_core::dpll::solve_all;
use aqo_core::ec3::{clean, generate_random, instance_stats, BitString, Instance};
use aqo_core::harness::{self, ExperimentConfig};
use aqo_core::perturbation::{correction_series, flip_amplitudes, threshold_n};
use aqo_core::spectrum::{self, HamiltonianSpec, Param};
use aqo_core::tunneling::{self, AgreeInstance};

type Q = BigRational;

struct Outcome {
    pass: bool,
    detail: String,
}

type Res = Result<Option<Outcome>, String>;

fn outcome(pass: bool, detail: impl Into<String>) -> Res {
    Ok(Some(Outcome {
        pass,
        detail: detail.into(),
    }))
}

fn err(e: aqo_core::Error) -> String {
    e.to_string()
}

fn full_run() -> bool {
    std::env::var("AQO_ACCEPTANCE_FULL").is_ok_and(|v| v == "1")
}

fn pow2(k: usize) -> Q {
    Q::from_integer(BigInt::one() << k)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Cleaned random instances with the requested solution count, with bits in
/// `lo..=hi` after cleaning.
fn cleaned_with(lo: usize, hi: usize, want: impl Fn(usize) -> bool, seed0: u64) -> impl Iterator<Item = (Instance, Vec<BitString>)> {
    (seed0..).filter_map(move |seed| {
        let mut r = rng(seed);
        let n_raw = r.random_range(lo..=hi + 6);
        let m = (0.62 * n_raw as f64) as usize + r.random_range(0..=2);
        let raw = generate_random(n_raw, m.max(1), seed).ok()?;
        let inst = clean(&raw).instance;
        if inst.n_bits() < lo || inst.n_bits() > hi {
            return None;
        }
        let sols = solve_all(&inst, 1 << 20).ok()?;
        if !want(sols.len()) {
            return None;
        }
        Some((inst, sols.bits().cloned().collect()))
    })
}

fn c1_tree_identity() -> Res {
    let mut r = rng(101);
    let mut bad = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=12);
        let t = tunneling::random_tree(n, &mut r);
        let a = tunneling::amplitude_dp::<Q>(&t).map_err(err)?;
        if a.coefficient != pow2(n - 1) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad} of 100 random trees differ from 2^(n-1)"))
}

fn c2_dp_vs_bruteforce() -> Res {
    let mut r = rng(202);
    let mut bad = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=8);
        let extra = r.random_range(0..=n);
        let g = tunneling::random_connected(n, extra, &mut r);
        let dp = tunneling::amplitude_dp::<Q>(&g).map_err(err)?;
        let bf = tunneling::amplitude_bruteforce::<Q>(&g).map_err(err)?;
        if dp.coefficient != bf.coefficient {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad} of 200 connected graphs disagree"))
}

fn c3_upper_bound() -> Res {
    let mut r = rng(303);
    let mut bad = 0;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = r.random_range(2..=14);
        let extra = r.random_range(0..=2 * n);
        let g = tunneling::random_connected(n, extra, &mut r);
        let a = tunneling::amplitude_dp::<Q>(&g).map_err(err)?;
        let bound = pow2(n - 1);
        if a.coefficient > bound {
            bad += 1;
        }
        let ratio = aqo_core::Scalar::to_f64(&(a.coefficient / bound));
        worst = worst.max(ratio);
    }
    outcome(
        bad == 0,
        format!("{bad} violations in 500 graphs, max coefficient/2^(n-1) = {worst:.6}"),
    )
}

fn c4_disconnected_cancel() -> Res {
    let mut checked = 0;
    let mut disconnected = 0;
    let mut nonzero = 0;
    let mut seed = 4000;
    while checked < 50 {
        seed += 1;
        let mut r = rng(seed);
        let n_raw = r.random_range(10..=18);
        let raw = generate_random(n_raw, (0.62 * n_raw as f64) as usize, seed).map_err(err)?;
        let inst = clean(&raw).instance;
        if inst.n_bits() < 4 || inst.n_bits() > 14 {
            continue;
        }
        let sols = solve_all(&inst, 1 << 16).map_err(err)?;
        let x = match sols.bits().next() {
            Some(x) => x.clone(),
            None => BitString::from_index(r.random_range(0..1u64 << inst.n_bits()), inst.n_bits()),
        };
        if correction_series::<Q>(&inst, &x, 6).is_err() {
            continue;
        }
        for q in [4, 6] {
            let amps = flip_amplitudes::<Q>(&inst, &x, q).map_err(err)?;
            let mut total = Q::zero();
            for a in amps.iter().filter(|a| !a.connected) {
                disconnected += 1;
                if !a.value.is_zero() {
                    nonzero += 1;
                }
                total += a.value.clone();
            }
            if !total.is_zero() {
                nonzero += 1;
            }
        }
        checked += 1;
    }
    outcome(
        nonzero == 0,
        format!("{checked} instances, {disconnected} disconnected coefficients, {nonzero} non-zero"),
    )
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn c5_series_residual() -> Res {
    let lambdas: Vec<f64> = (0..10).map(|k| 0.01 * 10f64.powf(k as f64 / 9.0)).collect();
    let mut slopes = Vec::new();
    for (inst, sols) in cleaned_with(8, 14, |k| k == 1, 5000).take(20) {
        let x = &sols[0];
        let series = correction_series::<Q>(&inst, x, 6).map_err(err)?.to_f64();
        let (mut lx, mut ly) = (Vec::new(), Vec::new());
        for &l in &lambdas {
            let shift = spectrum::level_shift(&inst, x, l).map_err(err)?;
            let trunc = series.eval(l) - series.e0 as f64;
            lx.push(l.ln());
            ly.push((shift - trunc).abs().ln());
        }
        slopes.push(slope(&lx, &ly));
    }
    let bad = slopes.iter().filter(|s| !(7.5..=8.5).contains(*s)).count();
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        slopes.len() == 20 && bad == 0,
        format!("{} instances, slopes in [{lo:.3}, {hi:.3}], {bad} outside [7.5, 8.5]", slopes.len()),
    )
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

fn c6_clause_statistics() -> Res {
    let (n, m) = (300, 186);
    let mut b_all = Vec::new();
    let mut present = Vec::new();
    for seed in 0..1000 {
        let inst = generate_random(n, m, 60_000 + seed).map_err(err)?;
        b_all.extend(inst.clause_counts().iter().map(|&b| b as f64));
        present.push(instance_stats(&inst, 1).map_err(err)?.present_bits as f64 / n as f64);
    }
    let (mb, seb) = mean_se(&b_all);
    let (mp, sep) = mean_se(&present);
    let target_p = 1.0 - (-1.86f64).exp();
    let ok_b = (mb - 1.86).abs() <= 3.0 * seb + 1e-12;
    let ok_p = (mp - target_p).abs() <= 3.0 * sep;
    outcome(
        ok_b && ok_p,
        format!(
            "mean B = {mb:.4} (se {seb:.2e}); mean N'/N = {mp:.5} (se {sep:.2e}, target {target_p:.5}, z = {:.2})",
            (mp - target_p) / sep
        ),
    )
}

fn c7_desk_scale() -> Res {
    if !full_run() {
        return Ok(None);
    }
    let mut config = ExperimentConfig::default();
    config.apply_env().map_err(err)?;
    let out = harness::run_experiment(&config).map_err(err)?;
    let s = &out.stats;
    let lr = s.lambda_r.unwrap_or(f64::NAN);
    let ok = (0.02..=0.05).contains(&s.c4.slope)
        && (0.25..=0.65).contains(&s.c6.slope)
        && (0.45..=0.60).contains(&lr)
        && out.incomplete.is_empty();
    outcome(
        ok,
        format!(
            "C4 = {:.4} ± {:.4}, C6 = {:.4} ± {:.4}, λ_r = {lr:.4} (with-intercept diagnostic: slopes {:.4}, {:.4})",
            s.c4.slope, s.c4.stderr, s.c6.slope, s.c6.stderr, s.c4_linear.slope, s.c6_linear.slope
        ),
    )
}

fn c8_threshold() -> Res {
    let t = threshold_n(0.033, 0.52).map_err(err)?;
    let within = |v: f64, target: f64| (v / target - 1.0).abs() <= 0.15;
    outcome(
        within(t.gap4, 8.6e4) && within(t.gap1, 5.4e3),
        format!("N(ΔE=4) = {:.4e}, N(ΔE=1) = {:.4e}", t.gap4, t.gap1),
    )
}

fn c9_typicality() -> Res {
    let t = tunneling::typicality(0.62, 1000).map_err(err)?;
    outcome(
        (0.80..=0.82).contains(&t.lambda_a),
        format!("λ_a = {:.5}", t.lambda_a),
    )
}

fn exact_gap(spec: &HamiltonianSpec) -> Result<f64, String> {
    if spec.n_bits() <= 8 {
        let ev = spectrum::full_spectrum(spec).map_err(err)?;
        Ok(ev[1] - ev[0])
    } else {
        Ok(spectrum::lowest_two(spec).map_err(err)?.gap())
    }
}

fn c10_lower_bound() -> Res {
    let mut points = 0;
    let mut bad = 0;
    let mut instances = 0;
    for (inst, _) in cleaned_with(5, 12, |k| k == 1, 10_000).take(20) {
        instances += 1;
        let spec = HamiltonianSpec::new(&inst, Param::S(1.0)).map_err(err)?;
        for k in 1..=50 {
            let s = k as f64 / 50.0;
            let gap = exact_gap(&spec.with_param(Param::S(s)).map_err(err)?)?;
            let bound = spectrum::lower_bound(&inst, s).map_err(err)?.bound_value;
            points += 1;
            // Equality holds at s = 1 when the lowest non-zero cost is 1.
            if gap < bound - 1e-9 {
                bad += 1;
            }
        }
    }
    outcome(
        instances == 20 && bad == 0,
        format!("{instances} instances, {points} grid points, {bad} below the bound"),
    )
}

fn c11_certified_interval() -> Res {
    let mut cases = 0;
    let mut bad = 0;
    let mut widest = 0.0f64;
    'outer: for (inst, sols) in cleaned_with(5, 10, |k| k >= 1, 20_000) {
        let x = &sols[0];
        let Ok(series) = correction_series::<f64>(&inst, x, 6).or_else(|_| correction_series::<f64>(&inst, x, 4)) else {
            continue;
        };
        for l in [0.02, 0.05, 0.1] {
            let spec = HamiltonianSpec::new(&inst, Param::Lambda(l)).map_err(err)?;
            let Ok(psi) = spectrum::first_order_candidate(&spec, x) else {
                continue 'outer;
            };
            let cert = spectrum::certify(&spec, &psi, series.eval(l)).map_err(err)?;
            let ev = spectrum::full_spectrum(&spec).map_err(err)?;
            if !ev.iter().any(|&e| cert.contains(e)) {
                bad += 1;
            }
            widest = widest.max(cert.residual);
            cases += 1;
            if cases == 50 {
                break 'outer;
            }
        }
    }
    outcome(
        bad == 0,
        format!("{cases} cases, {bad} intervals without an eigenvalue, largest ε = {widest:.3e}"),
    )
}

fn c12_barrier() -> Res {
    let mut r = rng(1212);
    let mut worst = 0.0f64;
    let mut bad = 0;
    let mut tests = 0;
    for k in 0..20 {
        let n = r.random_range(4..=12);
        let extra = r.random_range(0..=2 * n);
        let g: AgreeInstance = tunneling::random_connected(n, extra, &mut r);
        let exact = tunneling::barrier_profile(&g).map_err(err)?;
        let mc = tunneling::barrier_monte_carlo(&g, 20_000, 12_000 + k).map_err(err)?;
        for (&e, &(mean, se)) in exact.mean_e.iter().zip(&mc) {
            tests += 1;
            let z = if se > 0.0 { (mean - e).abs() / se } else if (mean - e).abs() < 1e-9 { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
            if z > 3.0 {
                bad += 1;
            }
        }
    }
    outcome(
        bad == 0,
        format!("20 graphs, {tests} levels, {bad} beyond 3 SE, max |z| = {worst:.2}"),
    )
}

fn c13_crossing() -> Res {
    if !full_run() {
        return Ok(None);
    }
    let mut config = ExperimentConfig {
        n_values: vec![200],
        ..ExperimentConfig::default()
    };
    config.apply_env().map_err(err)?;
    let (seen, found) = harness::first_crossing(&config, 200, 2000, 1.0).map_err(err)?;
    let Some((cr, _)) = found else {
        return outcome(false, format!("no crossing below λ = 1 in {seen} accepted trials"));
    };
    let (Some(l), Some(a), Some(b)) = (cr.lambda_star, cr.series1, cr.series2) else {
        return Err("crossing record without series".into());
    };
    let curve = harness::crossing_curve(&a, &b, 2.0, 401);
    let sign_change = curve.windows(2).any(|w| w[0][3].signum() != w[1][3].signum());
    outcome(
        l < 1.0 && sign_change,
        format!("trial {} (accepted #{seen}): λ* = {l:.4}, n = {}, curve sign change = {sign_change}", cr.trial_index, cr.hamming_n),
    )
}

fn main() {
    // Libtest flags such as `--nocapture` or a name filter are accepted and ignored.
    let criteria: [(&str, fn() -> Res); 13] = [
        ("tree amplitude identity", c1_tree_identity),
        ("dynamic programme matches brute force", c2_dp_vs_bruteforce),
        ("tunnelling upper bound", c3_upper_bound),
        ("disconnected supports cancel", c4_disconnected_cancel),
        ("series residual scales as λ^8", c5_series_residual),
        ("clause-count statistics", c6_clause_statistics),
        ("desk-scale splitting constants", c7_desk_scale),
        ("crossover sizes", c8_threshold),
        ("typical tunnelling rate", c9_typicality),
        ("gap lower bound", c10_lower_bound),
        ("certified eigenvalue interval", c11_certified_interval),
        ("barrier profile", c12_barrier),
        ("large-N avoided crossing", c13_crossing),
    ];
    let only: Option<Vec<usize>> = std::env::var("AQO_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(k + 1))) {
            continue;
        }
        let t = Instant::now();
        let res = f();
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(Some(o)) => {
                let tag = if o.pass { "PASS" } else { "FAIL" };
                if !o.pass {
                    failed += 1;
                }
                println!("criterion {:>2} {tag} {name}: {} [{secs:.1}s]", k + 1, o.detail);
            }
            Ok(None) => {
                println!("criterion {:>2} SKIP {name}: long-running, set AQO_ACCEPTANCE_FULL=1", k + 1);
            }
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: evaluation error: {e} [{secs:.1}s]", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
