use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aqo_core::dpll::{self, DEFAULT_SOLUTION_CAP};
use aqo_core::ec3::{self, BitString, Instance};
use aqo_core::harness::{self, ExperimentConfig};
use aqo_core::perturbation::{self, CorrectionSeries};
use aqo_core::spectrum::{self, HamiltonianSpec, Param};
use aqo_core::tunneling::{self, AgreeInstance};
use aqo_core::{Error, NumericMode, Scalar};
use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(name = "aqo", version, about = "Random EC3 instances, perturbative level splittings and exact spectra")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw a random instance.
    Gen {
        #[arg(short = 'n', long)]
        bits: usize,
        #[arg(short = 'm', long)]
        clauses: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Remove trivially degenerate clauses and absent bits.
    Clean {
        input: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Enumerate all solutions.
    Solve {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SOLUTION_CAP)]
        cap: usize,
    },
    /// Coupling statistics and connected-subgraph census.
    Stats {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        u_max: usize,
    },
    /// Perturbative corrections for one assignment or every solution.
    Perturb {
        input: PathBuf,
        /// Assignment as a bit string; defaults to every solution.
        #[arg(short = 'x', long)]
        assignment: Option<String>,
        #[arg(long, default_value_t = 6)]
        order: usize,
        #[command(flatten)]
        mode: ModeArg,
        /// Also print the self-energy table.
        #[arg(long)]
        table: bool,
    },
    /// Splitting corrections between two solutions.
    Splitting {
        input: PathBuf,
        #[arg(short = 'a', long)]
        a: String,
        #[arg(short = 'b', long)]
        b: String,
        #[command(flatten)]
        mode: ModeArg,
    },
    /// Scan the spectral gap of H(s).
    Gap {
        input: PathBuf,
        /// Number of grid points in (0, 1].
        #[arg(long, default_value_t = 50)]
        points: usize,
        #[arg(long)]
        refine: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Lower bound on the gap at a given s.
    Bound {
        input: PathBuf,
        #[arg(short = 's', long)]
        s: f64,
    },
    /// Certify the first-order state of a solution at coupling λ.
    Certify {
        input: PathBuf,
        #[arg(short = 'l', long)]
        lambda: f64,
        #[arg(short = 'x', long)]
        assignment: Option<String>,
    },
    /// Tunneling amplitudes and Agree-instance utilities.
    Tunnel(TunnelArgs),
    /// Run the splitting experiment over a range of sizes.
    Experiment(ExperimentArgs),
    /// Search for predicted order-4 crossings at one size.
    Crossing(CrossingArgs),
}

#[derive(Args)]
struct ModeArg {
    #[arg(long, default_value = "exact")]
    mode: NumericMode,
}

#[derive(Args)]
struct TunnelArgs {
    /// EC3 instance whose solutions `-a`/`-b` are reduced.
    input: Option<PathBuf>,
    #[arg(short = 'a', long)]
    a: Option<String>,
    #[arg(short = 'b', long)]
    b: Option<String>,
    /// Agree instance file instead of an EC3 pair.
    #[arg(long)]
    agree: Option<PathBuf>,
    /// Write the reduced Agree instance here.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Check the tree identity on this many random trees.
    #[arg(long)]
    tree_check: Option<usize>,
    /// Print typical Agree parameters for this clause ratio.
    #[arg(long)]
    typicality: Option<f64>,
    #[arg(long, default_value_t = 200)]
    n_bits: usize,
    /// Print the mean barrier profile as CSV.
    #[arg(long)]
    barrier: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 0.62)]
    alpha: f64,
    /// Sizes as `start:stop:step` or a comma-separated list.
    #[arg(long = "n", default_value = "15:120:5")]
    n_values: String,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SOLUTION_CAP)]
    cap: usize,
    #[arg(long, default_value = "float")]
    mode: NumericMode,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    max_attempts: usize,
    /// Also locate order-4 crossings for accepted trials.
    #[arg(long)]
    crossings: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct CrossingArgs {
    #[arg(long, default_value_t = 0.62)]
    alpha: f64,
    #[arg(long = "n", default_value_t = 200)]
    n_bits: usize,
    #[arg(long, default_value_t = 2000)]
    max_trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    lambda_max: f64,
    #[arg(long)]
    workers: Option<usize>,
    /// Number of curve samples per crossing file.
    #[arg(long, default_value_t = 400)]
    points: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug)]
struct Fail {
    code: u8,
    message: String,
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => 2,
            _ => 3,
        };
        Fail {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Fail {
    Fail {
        code: 2,
        message: message.into(),
    }
}

type CliResult<T = ()> = std::result::Result<T, Fail>;

fn digest(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// `version=... seed=... config=...` for output headers.
fn meta_line(seed: Option<u64>, config: &str) -> String {
    let seed = seed.map_or_else(|| "-".to_string(), |s| s.to_string());
    format!("aqo version={VERSION} seed={seed} config={}", digest(config))
}

fn read(path: &Path) -> CliResult<Instance> {
    Ok(ec3::read_instance(path)?)
}

fn bits_arg(s: &str, n: usize) -> CliResult<BitString> {
    let b: BitString = s.parse().map_err(|e| usage(format!("bad bit string: {e}")))?;
    if b.len() != n {
        return Err(usage(format!("bit string has {} bits, instance has {n}", b.len())));
    }
    Ok(b)
}

fn write_out(path: Option<&Path>, body: &str) -> CliResult {
    match path {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::io(p.display().to_string(), e).into()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())
                .map_err(|e| Error::io("<stdout>", e).into())
        }
    }
}

fn with_header(inst: &Instance, line: &str) -> Instance {
    let mut inst = inst.clone();
    let pre = &mut inst.metadata_mut().preamble;
    pre.retain(|l| !l.starts_with("aqo "));
    pre.push(line.to_string());
    inst
}

fn print_series<S: Scalar + ToText>(x: &BitString, s: &CorrectionSeries<S>) {
    print!("{x} e0={} e2={} e4={}", s.e0, s.e2.text(), s.e4.text());
    if let Some(e6) = &s.e6 {
        print!(" e6={}", e6.text());
    }
    println!();
}

trait ToText {
    fn text(&self) -> String;
}

impl ToText for f64 {
    fn text(&self) -> String {
        format!("{self:.15e}")
    }
}

impl ToText for BigRational {
    fn text(&self) -> String {
        aqo_core::scalar::format_rational(self)
    }
}

fn perturb_run<S: Scalar + ToText>(inst: &Instance, xs: &[BitString], order: usize, table: bool) -> CliResult {
    for x in xs {
        let s = perturbation::correction_series::<S>(inst, x, order)?;
        print_series(x, &s);
        if table {
            let t = perturbation::self_energy_table::<S>(inst, x)?;
            println!(
                "  sigma2={} sigma2_d1={} sigma2_d2={} sigma4={} sigma4_d1={} sigma6={}",
                t.sigma2.text(),
                t.sigma2_d1.text(),
                t.sigma2_d2.text(),
                t.sigma4.text(),
                t.sigma4_d1.text(),
                t.sigma6.text()
            );
        }
    }
    Ok(())
}

fn splitting_run<S: Scalar + ToText>(inst: &Instance, a: &BitString, b: &BitString) -> CliResult {
    let r = perturbation::splitting::<S>(inst, a, b)?;
    println!("mode={}", r.mode);
    println!("hamming_n={}", r.hamming_n);
    println!("e12_4={}", r.e12_4.text());
    println!("e12_6={}", r.e12_6.text());
    Ok(())
}

fn solutions_or(inst: &Instance, x: Option<&str>) -> CliResult<Vec<BitString>> {
    match x {
        Some(s) => Ok(vec![bits_arg(s, inst.n_bits())?]),
        None => Ok(dpll::solve_all(inst, DEFAULT_SOLUTION_CAP)?.bits().cloned().collect()),
    }
}

fn parse_sizes(spec: &str) -> CliResult<Vec<usize>> {
    let bad = || usage(format!("bad size list `{spec}`"));
    if spec.contains(':') {
        let parts: Vec<usize> = spec
            .split(':')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?;
        let (start, stop, step) = match parts.as_slice() {
            [a, b] => (*a, *b, 1),
            [a, b, c] => (*a, *b, *c),
            _ => return Err(bad()),
        };
        if step == 0 || start > stop {
            return Err(bad());
        }
        Ok((start..=stop).step_by(step).collect())
    } else {
        spec.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect()
    }
}

fn tree_check(count: usize, seed: u64) -> CliResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ok = 0;
    for k in 0..count {
        let n = 2 + k % 11;
        let t = tunneling::random_tree(n, &mut rng);
        let c = tunneling::amplitude_dp::<BigRational>(&t)?.coefficient;
        if c == BigRational::from_integer((1u64 << (n - 1)).into()) {
            ok += 1;
        }
    }
    println!("{ok}/{count} trees match 2^{{n-1}}");
    if ok == count {
        Ok(())
    } else {
        Err(Fail {
            code: 3,
            message: "tree identity violated".into(),
        })
    }
}

fn tunnel(args: TunnelArgs) -> CliResult {
    if let Some(count) = args.tree_check {
        return tree_check(count, args.seed);
    }
    if let Some(alpha) = args.typicality {
        let t = tunneling::typicality(alpha, args.n_bits)?;
        println!("p00={} p01={} p10={} p11={}", t.p00, t.p01, t.p10, t.p11);
        println!("typ_n={} typ_m={} typ_beta={}", t.typ_n, t.typ_m, t.typ_beta);
        println!("lambda_a={}", t.lambda_a);
        return Ok(());
    }
    let agree: AgreeInstance = if let Some(path) = &args.agree {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        tunneling::parse_agree(&text)?
    } else {
        let input = args.input.as_ref().ok_or_else(|| usage("need an instance, --agree, --tree-check or --typicality"))?;
        let inst = read(input)?;
        let (Some(a), Some(b)) = (&args.a, &args.b) else {
            return Err(usage("reduction needs -a and -b"));
        };
        let a = bits_arg(a, inst.n_bits())?;
        let b = bits_arg(b, inst.n_bits())?;
        tunneling::reduce(&inst, &a, &b)?
    };
    if let Some(out) = &args.output {
        write_out(Some(out), &tunneling::format_agree(&agree))?;
    }
    if args.barrier {
        print!("{}", tunneling::barrier_profile(&agree)?.to_csv());
        return Ok(());
    }
    println!("n={} m={} connected={}", agree.n_bits(), agree.m(), agree.is_connected());
    let amp = if agree.is_connected() {
        tunneling::amplitude_dp::<BigRational>(&agree)?
    } else {
        tunneling::amplitude_by_components::<BigRational>(&agree)?
    };
    println!("order={}", amp.order);
    println!("coefficient={}", aqo_core::scalar::format_rational(&amp.coefficient));
    println!("tree_bound={}", 2f64.powi(amp.order as i32 - 1));
    Ok(())
}

fn experiment(args: ExperimentArgs) -> CliResult {
    let mut cfg = ExperimentConfig {
        alpha: args.alpha,
        n_values: parse_sizes(&args.n_values)?,
        samples_per_n: args.samples,
        master_seed: args.seed,
        solution_cap: args.cap,
        numeric_mode: args.mode,
        worker_count: args.workers,
        max_attempts_per_n: args.max_attempts,
        crossings: args.crossings,
        ..Default::default()
    };
    cfg.apply_env()?;
    cfg.validate()?;
    let json = cfg.canonical_json();
    let header = meta_line(Some(cfg.master_seed), &json);
    let out = harness::run_experiment(&cfg)?;
    let meta = serde_json::json!({
        "version": VERSION,
        "seed": cfg.master_seed,
        "config_digest": digest(&json),
        "config": serde_json::from_str::<serde_json::Value>(&json).expect("valid json"),
        "worker_count": cfg.worker_count,
    });
    harness::write_outputs(&args.output, &header, meta, &out)?;
    let s = &out.stats;
    println!("c4={:.5} ± {:.5}", s.c4.slope, s.c4.stderr);
    println!("c6={:.5} ± {:.5}", s.c6.slope, s.c6.stderr);
    if let Some(lr) = s.lambda_r {
        println!("lambda_r={lr:.4}");
    }
    if !out.incomplete.is_empty() {
        eprintln!("warning: attempt limit reached for N = {:?}", out.incomplete);
    }
    Ok(())
}

fn crossing(args: CrossingArgs) -> CliResult {
    let mut cfg = ExperimentConfig {
        alpha: args.alpha,
        n_values: vec![args.n_bits],
        samples_per_n: args.max_trials,
        master_seed: args.seed,
        worker_count: args.workers,
        lambda_max: args.lambda_max,
        ..Default::default()
    };
    cfg.apply_env()?;
    cfg.validate()?;
    let json = cfg.canonical_json();
    let header = meta_line(Some(cfg.master_seed), &json);
    let found = harness::crossing_search(&cfg, args.n_bits, args.max_trials)?;
    let dir = &args.output;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
    let mut summary = format!("# {header}\ntrial,hamming_n,gap0,degenerate,lambda_star\n");
    for c in &found {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            c.trial_index,
            c.hamming_n,
            c.gap0,
            c.degenerate as u8,
            c.lambda_star.map_or_else(String::new, |l| l.to_string())
        ));
        if let (Some(l), Some(a), Some(b)) = (c.lambda_star, &c.series1, &c.series2) {
            let curve = harness::crossing_curve(a, b, args.lambda_max.min(2.0 * l), args.points);
            let body = harness::format_curve(&header, &curve);
            let path = dir.join(format!("curve_{}.csv", c.trial_index));
            std::fs::write(&path, body).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    let path = dir.join("crossings.csv");
    std::fs::write(&path, summary).map_err(|e| Error::io(path.display().to_string(), e))?;
    let hits: Vec<_> = found.iter().filter(|c| c.lambda_star.is_some_and(|l| l < 1.0)).collect();
    println!(
        "{} accepted trials, {} degenerate, {} with a crossing below λ = 1",
        found.len(),
        found.iter().filter(|c| c.degenerate).count(),
        hits.len()
    );
    for c in hits.iter().take(10) {
        println!("trial {} n={} lambda*={:.4}", c.trial_index, c.hamming_n, c.lambda_star.unwrap_or(f64::NAN));
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.cmd {
        Cmd::Gen {
            bits,
            clauses,
            seed,
            output,
        } => {
            let inst = ec3::generate_random(bits, clauses, seed)?;
            let line = meta_line(Some(seed), &format!("gen n={bits} m={clauses}"));
            write_out(output.as_deref(), &ec3::format_instance(&with_header(&inst, &line)))
        }
        Cmd::Clean { input, output } => {
            let inst = read(&input)?;
            let c = ec3::clean(&inst);
            let kept = c.remap.iter().filter(|r| r.is_some()).count();
            eprintln!(
                "kept {kept}/{} bits, {}/{} clauses",
                inst.n_bits(),
                c.instance.n_clauses(),
                inst.n_clauses()
            );
            let line = meta_line(inst.seed(), &format!("clean {}", digest(&ec3::format_instance(&inst))));
            write_out(output.as_deref(), &ec3::format_instance(&with_header(&c.instance, &line)))
        }
        Cmd::Solve { input, cap } => {
            let inst = read(&input)?;
            let sols = dpll::solve_all(&inst, cap)?;
            let mut body = format!(
                "c {}\nc solutions={}{}\n",
                meta_line(inst.seed(), &format!("solve cap={cap}")),
                sols.len(),
                if sols.truncated { " truncated" } else { "" }
            );
            for x in sols.bits() {
                body.push_str(&x.to_string());
                body.push('\n');
            }
            write_out(None, &body)
        }
        Cmd::Stats { input, u_max } => {
            let inst = read(&input)?;
            let s = ec3::instance_stats(&inst, u_max)?;
            println!("n_bits={} n_clauses={} alpha={}", inst.n_bits(), inst.n_clauses(), inst.alpha());
            println!("present_bits={} b_mean={} b_var={}", s.present_bits, s.b_mean, s.b_var);
            for u in 1..=u_max {
                println!("g{u}={}", s.g(u));
            }
            Ok(())
        }
        Cmd::Perturb {
            input,
            assignment,
            order,
            mode,
            table,
        } => {
            let inst = read(&input)?;
            let xs = solutions_or(&inst, assignment.as_deref())?;
            match mode.mode {
                NumericMode::Exact => perturb_run::<BigRational>(&inst, &xs, order, table),
                NumericMode::Float => perturb_run::<f64>(&inst, &xs, order, table),
            }
        }
        Cmd::Splitting { input, a, b, mode } => {
            let inst = read(&input)?;
            let a = bits_arg(&a, inst.n_bits())?;
            let b = bits_arg(&b, inst.n_bits())?;
            match mode.mode {
                NumericMode::Exact => splitting_run::<BigRational>(&inst, &a, &b),
                NumericMode::Float => splitting_run::<f64>(&inst, &a, &b),
            }
        }
        Cmd::Gap {
            input,
            points,
            refine,
            output,
        } => {
            let inst = read(&input)?;
            if points == 0 {
                return Err(usage("need at least one grid point"));
            }
            let grid: Vec<f64> = (1..=points).map(|k| k as f64 / points as f64).collect();
            let scan = spectrum::gap_scan(&inst, &grid, refine)?;
            let mut buf = format!("# {}\n", meta_line(inst.seed(), &format!("gap points={points} refine={refine}"))).into_bytes();
            scan.write_csv(&mut buf)?;
            write_out(output.as_deref(), &String::from_utf8(buf).expect("utf8"))?;
            eprintln!("min_gap={} at s={}", scan.min_gap, scan.argmin_s);
            Ok(())
        }
        Cmd::Bound { input, s } => {
            let inst = read(&input)?;
            let c = spectrum::lower_bound(&inst, s)?;
            print!("# {}\n{}", meta_line(inst.seed(), &format!("bound s={s}")), c.to_kv());
            Ok(())
        }
        Cmd::Certify {
            input,
            lambda,
            assignment,
        } => {
            let inst = read(&input)?;
            let x = match assignment {
                Some(s) => bits_arg(&s, inst.n_bits())?,
                None => dpll::solve_all(&inst, 1)?
                    .solutions
                    .first()
                    .map(|a| a.bits.clone())
                    .ok_or_else(|| Fail::from(Error::Inapplicable("instance has no solution".into())))?,
            };
            let spec = HamiltonianSpec::new(&inst, Param::Lambda(lambda))?;
            let series = perturbation::correction_series::<f64>(&inst, &x, 6).or_else(|e| match e {
                Error::DegenerateNeighbor { .. } => perturbation::correction_series::<f64>(&inst, &x, 4),
                e => Err(e),
            })?;
            let psi = spectrum::first_order_candidate(&spec, &x)?;
            let c = spectrum::certify(&spec, &psi, series.eval(lambda))?;
            print!("# {}\nassignment={x}\n{}", meta_line(inst.seed(), &format!("certify lambda={lambda}")), c.to_kv());
            if inst.n_bits() <= spectrum::DENSE_MAX_BITS {
                let ev = spectrum::full_spectrum(&spec)?;
                println!("contains_eigenvalue={}", ev.iter().any(|&e| c.contains(e)));
            }
            Ok(())
        }
        Cmd::Tunnel(args) => tunnel(args),
        Cmd::Experiment(args) => experiment(args),
        Cmd::Crossing(args) => crossing(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
