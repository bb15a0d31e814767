//! Single-binary driver: every module of the laboratory is a subcommand that
//! emits a JSON report envelope to stdout and persists it under the manifest
//! hash. Exit codes: 0 all asserted invariants hold, 1 at least one failed
//! (the envelope carries the machine-readable list), 2 usage or runtime
//! error.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use manifest::Envelope;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] plasma_spike_core::error::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("refusing to overwrite {0} (same manifest hash, different content)")]
    ArtifactConflict(PathBuf),
    #[error("report envelope violates the shipped schema: {0}")]
    Schema(String),
    #[error("{0}")]
    Usage(String),
}

#[derive(Parser)]
#[command(name = "plasma-spike", version, about = "Spike solutions of the plasma free-boundary model and their asymptotic certificates", propagate_version = true)]
struct Cli {
    /// directory for report artifacts (append-only, named by manifest hash)
    #[arg(long, global = true, default_value = "reports")]
    out: PathBuf,
    /// seed for every randomized subcommand; fixed seed means bit-identical reports
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// cap worker threads (fallback: env PLASMA_SPIKE_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum DomainArg {
    Ball,
    Halfspace,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CheckArg {
    All,
    Dirichlet,
    Symmetry,
    Gradient,
    Rescale,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Interior,
    Boundary,
}

#[derive(Subcommand)]
enum Command {
    /// Radial spike profile: shooting constants, glue gaps, mass
    Profile {
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// also write a CSV of (r, u, u') samples
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Green kernel conformance residuals
    Greens {
        #[arg(long, value_enum, default_value_t = DomainArg::Ball)]
        domain: DomainArg,
        #[arg(long, value_enum, default_value_t = CheckArg::All)]
        check: CheckArg,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Critical configurations of the spike interaction energy
    KrCritical {
        #[arg(long, value_enum, default_value_t = DomainArg::Ball)]
        domain: DomainArg,
        /// number of spike points
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        /// comma-separated weights, e.g. `1,-1` (default: all ones)
        #[arg(long)]
        weights: Option<String>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Force-balance nonexistence certificates over random configurations
    Balance {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// number of spike points
        #[arg(long)]
        k: usize,
        /// number of random configurations to certify
        #[arg(long, default_value_t = 10_000)]
        fuzz: usize,
        #[arg(long = "N", default_value_t = 3)]
        n: usize,
    },
    /// Seeded spike solve of the discretized model on the unit ball
    Solve {
        #[arg(long)]
        mu: f64,
        #[arg(long, default_value_t = 129)]
        res: usize,
        /// spike seed location, comma-separated coordinates
        #[arg(long, default_value = "0,0,0")]
        seed_center: String,
        /// also write the raw field dump here
        #[arg(long)]
        dump: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Asymptotic checks of a solved field dump against the blow-up baselines
    Verify {
        /// field dump produced by `solve --dump`
        #[arg(long)]
        field: PathBuf,
        /// run every check (the default and only mode)
        #[arg(long, default_value_t = true)]
        all: bool,
        /// far-field comparison radius
        #[arg(long, default_value_t = 0.3)]
        radius: f64,
        /// spike detection threshold
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
    /// Validate every stored report against the shipped schema
    Report,
}

fn init_threads(cap: Option<usize>) {
    let cap = cap.or_else(|| {
        std::env::var("PLASMA_SPIKE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(threads) = cap {
        // ignore failure: the global pool can only be built once (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
}

fn schema() -> &'static serde_json::Value {
    static SCHEMA: std::sync::OnceLock<serde_json::Value> = std::sync::OnceLock::new();
    SCHEMA.get_or_init(|| {
        serde_json::from_str(include_str!("../schema/report.schema.json"))
            .expect("shipped schema parses")
    })
}

pub fn validate_envelope(doc: &serde_json::Value) -> Result<(), CliError> {
    let compiled = jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(schema())
        .expect("shipped schema compiles");
    if let Err(errors) = compiled.validate(doc) {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        return Err(CliError::Schema(msgs.join("; ")));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<Envelope, CliError> {
    match &cli.command {
        Command::Profile { n, p, csv } => commands::profile(*n, *p, csv.as_deref()),
        Command::Greens {
            domain,
            check,
            samples,
            n,
            p,
        } => commands::greens(*domain, *check, *samples, *n, *p, cli.seed),
        Command::KrCritical {
            domain,
            k,
            restarts,
            weights,
            tol,
            n,
            p,
        } => commands::kr_critical(*domain, *k, *restarts, weights.as_deref(), *tol, *n, *p, cli.seed),
        Command::Balance { mode, k, fuzz, n } => commands::balance(*mode, *k, *fuzz, *n, cli.seed),
        Command::Solve {
            mu,
            res,
            seed_center,
            dump,
            tol,
            max_iter,
            p,
        } => commands::solve(*mu, *res, seed_center, dump.as_deref(), *tol, *max_iter, *p),
        Command::Verify {
            field,
            all,
            radius,
            sigma,
            p,
        } => commands::verify(field, *all, *radius, *sigma, *p),
        Command::Report => commands::report_scan(&cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    let started = Instant::now();
    let mut envelope = match dispatch(&cli) {
        Ok(envelope) => envelope,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    envelope.manifest.duration_seconds = started.elapsed().as_secs_f64();

    let doc = match serde_json::to_value(&envelope) {
        Ok(doc) => doc,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    };
    if let Err(err) = validate_envelope(&doc) {
        eprintln!("error: {err}");
        return ExitCode::from(2);
    }
    // the meta `report` subcommand inspects the store, it does not extend it
    if envelope.manifest.subcommand != "report" {
        if let Err(err) = manifest::store(&cli.out, &envelope) {
            eprintln!("error: {err}");
            return ExitCode::from(2);
        }
    }
    println!("{}", serde_json::to_string_pretty(&doc).expect("envelope serializes"));
    if envelope.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
