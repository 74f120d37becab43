//! `ngmm`: run samplers, build drift certificates and run the verification
//! suites from the command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure,
//! 3 a verification suite found a failure.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ngmm::bounds::{run_suite, SuiteConfig};
use ngmm::diagnostics::{geweke_joint_test, summarize_columns, tiny_model};
use ngmm::drift::{check_conditions, derive_certificate, drift_v, estimate_drift_expectation, random_state, resolve_constants};
use ngmm::io::{read_chain_csv, write_chain_csv};
use ngmm::samplers::{chain_rng, run_chains};
use ngmm::{load_model, Config, Hyperparameters, Kernel, MixedModelData, SamplerKind};
use serde::Serialize;

use manifest::{ChainTiming, FileDigest, RunManifest};

/// Monte Carlo replicates per state in `verify-drift`.
const DRIFT_DRAWS: usize = 10_000;
const GEWEKE_THRESHOLD: f64 = 4.0;

#[derive(Parser)]
#[command(name = "ngmm", version, about = "Normal-gamma linear mixed model sampler and verification tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more chains and write them as CSV with a manifest.
    Run(RunArgs),
    /// Check the ergodicity conditions and build a drift certificate.
    Certify(CertifyArgs),
    /// Check the moment and matrix inequalities on random instances.
    VerifyBounds(BoundsArgs),
    /// Check the drift inequality by Monte Carlo at random states.
    VerifyDrift(DriftArgs),
    /// Joint-distribution correctness test of a sampler.
    Geweke(GewekeArgs),
    /// Means, quantiles, autocorrelations and ESS of a chain file.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Chain file; defaults to `io.output_path` next to the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// hybrid, gibbs or random-scan
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    /// Also store τ at every kept state.
    #[arg(long)]
    store_tau: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    config: PathBuf,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for estimating constants not given in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DriftArgs {
    /// Model to test; the built-in four-observation model if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of random states.
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GewekeArgs {
    /// Model to test; the built-in four-observation model if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// hybrid, gibbs or random-scan
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    r: Option<f64>,
    /// Draws per stream.
    #[arg(long, default_value_t = 50_000)]
    iterations: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Chain CSV written by `run`.
    chain: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Input(String),
    Numerical(String),
    Suite(String),
}

impl From<ngmm::Error> for Failure {
    fn from(e: ngmm::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type CliResult = Result<(), Failure>;

fn io_failure(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(io_failure(path))
}

fn config_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load(path: &Path) -> Result<(Config, MixedModelData, Hyperparameters), Failure> {
    let cfg = Config::from_path(path)?;
    let (model, hyper) = load_model(&cfg.data_paths(&config_dir(path)), &cfg)?;
    Ok((cfg, model, hyper))
}

fn parse_sampler(s: &str) -> Result<SamplerKind, Failure> {
    Ok(s.parse::<SamplerKind>()?)
}

/// `chain.csv` → `chain.3.csv`.
fn indexed_path(path: &Path, k: usize) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{k}"),
    };
    path.with_file_name(name)
}

fn run(args: RunArgs) -> CliResult {
    let start = Instant::now();
    let (mut cfg, model, hyper) = load(&args.config)?;
    let s = &mut cfg.sampler;
    if let Some(v) = args.seed {
        s.seed = v;
    }
    if let Some(v) = args.iterations {
        s.iterations = v;
    }
    if let Some(v) = args.burnin {
        s.burnin = v;
    }
    if let Some(v) = args.thin {
        s.thin = v;
    }
    if let Some(v) = &args.sampler {
        s.kind = parse_sampler(v)?;
    }
    if args.r.is_some() {
        s.r = args.r;
    }
    s.store_tau |= args.store_tau;
    if args.chains == 0 {
        return Err(Failure::Input("--chains must be at least 1".into()));
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| config_dir(&args.config).join(&cfg.io.output_path));
    cfg.io.output_path = out.clone();
    cfg.validate()?;

    let outputs = run_chains(&model, &hyper, &cfg.sampler, args.chains)?;
    let mut written = Vec::new();
    let mut timings = Vec::new();
    for (k, chain) in outputs.iter().enumerate() {
        let path = if args.chains == 1 { out.clone() } else { indexed_path(&out, k) };
        write_chain_csv(&path, chain)?;
        println!(
            "chain {k}: {} states -> {} ({:.3} s, theta/lambda/tau/sweep moves {}/{}/{}/{})",
            chain.states.len(),
            path.display(),
            chain.meta.wall_time_secs,
            chain.meta.branch_counts.theta,
            chain.meta.branch_counts.lambda,
            chain.meta.branch_counts.tau,
            chain.meta.branch_counts.sweep,
        );
        timings.push(ChainTiming {
            output: path.clone(),
            stream: chain.meta.stream,
            wall_time_secs: chain.meta.wall_time_secs,
            stored_states: chain.states.len(),
        });
        written.push(path);
    }

    let paths = cfg.data_paths(&config_dir(&args.config));
    let mut input_paths = vec![args.config.clone(), paths.y, paths.x];
    input_paths.extend(paths.z);
    let digest = |p: &PathBuf| FileDigest::of(p).map_err(io_failure(p));
    let manifest = RunManifest {
        tool: "ngmm".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.sampler.seed,
        config: cfg,
        inputs: input_paths.iter().map(digest).collect::<Result<_, _>>()?,
        outputs: written.iter().map(digest).collect::<Result<_, _>>()?,
        chains: timings,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let manifest_path = out.with_extension("manifest.json");
    manifest.write(&manifest_path).map_err(io_failure(&manifest_path))?;
    println!("manifest -> {}", manifest_path.display());
    Ok(())
}

fn certify(args: CertifyArgs) -> CliResult {
    let (cfg, model, hyper) = load(&args.config)?;
    let conditions = check_conditions(&model, &hyper);
    println!("threshold for a0: {} (a0 = {})", conditions.a0_threshold, hyper.a[0]);
    for (k, c) in [&conditions.cond1, &conditions.cond2, &conditions.cond3].iter().enumerate() {
        println!("condition {}: {} ({})", k + 1, if c.passed { "holds" } else { "FAILS" }, c.detail);
    }
    if !conditions.conditions_hold() {
        if let Some(out) = &args.out {
            write_json(out, &conditions)?;
        }
        return Err(Failure::Input(format!(
            "ergodicity conditions fail; a0 must exceed {}",
            conditions.a0_threshold
        )));
    }
    let given = cfg.certificate.clone();
    let pick = |f: fn(&ngmm::config::CertificateSection) -> Option<f64>| given.as_ref().and_then(f);
    let seed = args.seed.unwrap_or(cfg.sampler.seed);
    let constants = resolve_constants(
        &model,
        &hyper,
        pick(|c| c.c_star),
        pick(|c| c.m1),
        pick(|c| c.m2),
        &mut chain_rng(seed, 0),
    )?;
    let report = derive_certificate(&model, &hyper, constants)?;
    for (name, c) in [("c*", constants.c_star), ("M1", constants.m1), ("M2", constants.m2)] {
        println!("{name} = {} ({:?})", c.value, c.provenance);
    }
    if let Some(co) = &report.coefficients {
        println!("r = {}  (admissible below {})", co.r, report.r_star_upper.unwrap_or(f64::NAN));
        for (name, v) in co.rho.constructed() {
            println!("{name} = {v}");
        }
        println!("rho* = {}", co.rho_star);
        println!("L = {}", co.l);
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn verify_bounds(args: BoundsArgs) -> CliResult {
    let cfg = SuiteConfig {
        instances: args.instances,
        seed: args.seed,
        ..SuiteConfig::default()
    };
    let res = run_suite(&cfg)?;
    print!("{}", res.table());
    if let Some(out) = &args.out {
        write_json(out, &res)?;
    }
    if res.all_passed() {
        Ok(())
    } else {
        Err(Failure::Suite(format!("{} bound checks failed", res.failures().count())))
    }
}

#[derive(Serialize)]
struct DriftRow {
    state: usize,
    v: f64,
    estimate: f64,
    std_error: f64,
    bound: f64,
    passed: bool,
}

fn verify_drift(args: DriftArgs) -> CliResult {
    let (model, hyper, c_star, m1, m2) = match &args.config {
        Some(path) => {
            let (cfg, model, hyper) = load(path)?;
            let c = cfg.certificate.unwrap_or(ngmm::config::CertificateSection {
                c_star: None,
                m1: None,
                m2: None,
            });
            (model, hyper, c.c_star, c.m1, c.m2)
        }
        None => {
            let (model, hyper) = tiny_model();
            (model, hyper, None, None, None)
        }
    };
    let constants = resolve_constants(&model, &hyper, c_star, m1, m2, &mut chain_rng(args.seed, 0))?;
    let co = derive_certificate(&model, &hyper, constants)?
        .coefficients
        .ok_or_else(|| Failure::Numerical("certificate has no coefficients".into()))?;
    println!("rho* = {}, L = {}", co.rho_star, co.l);
    let mut rng = chain_rng(args.seed, 1);
    let mut rows = Vec::with_capacity(args.instances);
    println!("{:>5} {:>14} {:>14} {:>11} {:>14}  status", "state", "v", "E v(X1)", "se", "bound");
    for k in 0..args.instances {
        let state = random_state(&model, &mut rng);
        let v = drift_v(&model, &state, &co)?;
        let (estimate, se) =
            estimate_drift_expectation(&model, &hyper, &state, &co, DRIFT_DRAWS, args.seed.wrapping_add(2 + k as u64))?;
        let bound = co.rho_star * v + co.l + 4.0 * se;
        let passed = estimate <= bound;
        println!(
            "{k:>5} {v:>14.6e} {estimate:>14.6e} {se:>11.3e} {bound:>14.6e}  {}",
            if passed { "ok" } else { "FAIL" }
        );
        rows.push(DriftRow {
            state: k,
            v,
            estimate,
            std_error: se,
            bound,
            passed,
        });
    }
    if let Some(out) = &args.out {
        write_json(out, &rows)?;
    }
    let failed = rows.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Suite(format!("drift inequality fails at {failed} states")))
    }
}

fn geweke(args: GewekeArgs) -> CliResult {
    let (model, hyper, mut kind, mut r, mut seed) = match &args.config {
        Some(path) => {
            let (cfg, model, hyper) = load(path)?;
            (model, hyper, cfg.sampler.kind, cfg.sampler.r, cfg.sampler.seed)
        }
        None => {
            let (model, hyper) = tiny_model();
            (model, hyper, SamplerKind::Hybrid, Some(0.5), 1)
        }
    };
    if let Some(s) = &args.sampler {
        kind = parse_sampler(s)?;
    }
    if args.r.is_some() {
        r = args.r;
    }
    if let Some(s) = args.seed {
        seed = s;
    }
    let kernel = match kind {
        SamplerKind::Hybrid => Kernel::hybrid(r.ok_or_else(|| Failure::Input("--r is required for the hybrid sampler".into()))?)?,
        SamplerKind::GibbsDeterministic => Kernel::gibbs(),
        SamplerKind::GibbsRandomScan => Kernel::random_scan([1.0 / 3.0; 3])?,
    };
    let rep = geweke_joint_test(&model, &hyper, &kernel, args.iterations, seed)?;
    print!("{}", rep.table());
    if let Some(out) = &args.out {
        write_json(out, &rep)?;
    }
    if rep.passed(GEWEKE_THRESHOLD) {
        Ok(())
    } else {
        Err(Failure::Suite(format!(
            "max |z| = {} reaches the threshold {GEWEKE_THRESHOLD}",
            rep.max_abs_z()
        )))
    }
}

fn summarize(args: SummarizeArgs) -> CliResult {
    let table = read_chain_csv(&args.chain)?;
    let stats = summarize_columns(&table.columns, &table.values)?;
    print!("{}", stats.table());
    if let Some(out) = &args.out {
        write_json(out, &stats)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Certify(a) => certify(a),
        Command::VerifyBounds(a) => verify_bounds(a),
        Command::VerifyDrift(a) => verify_drift(a),
        Command::Geweke(a) => geweke(a),
        Command::Summarize(a) => summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Suite(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(3)
        }
    }
}
