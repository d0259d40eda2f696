use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use gpe_core::cli::verify::{known_module, verify_suite, DEFAULT_SEED};
use gpe_core::cli::{default_tail_mode, load_scenario, resolve_out_dir, run_scenario};
use gpe_core::coeffield::{make_field, Domain1D, FieldSpec, SigmaSignal};
use gpe_core::eigensolve::dirichlet_eigen;
use gpe_core::growthrate::{eigen_report, synthetic_trace_set, GrowthOptions, TailSpec};
use gpe_core::{GpeError, Result};

#[derive(Parser)]
#[command(name = "gpe", version, about = "Generalized principal eigenvalues of 1-D parabolic operators")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a scenario file
    Run {
        scenario: PathBuf,
        /// Output directory (default: $GPE_OUT_DIR/<name>, else gpe-out/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance suite
    Verify {
        /// Only criteria owned by this module
        #[arg(long)]
        only: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Print rows as JSON
        #[arg(long)]
        json: bool,
    },
    /// Dirichlet eigenvalue of the operator frozen at one time
    Eigen {
        scenario: PathBuf,
        #[arg(long)]
        frozen_at: f64,
    },
    /// Six eigenvalues from the synthetic trace `β = −λt + ∫σ`
    SyntheticGrowth {
        /// Signal as inline JSON or a path to a JSON file
        sigma_spec: String,
        #[arg(long)]
        tmax: f64,
        /// Drift `λ`; defaults to the heat eigenvalue of a 199-node mesh
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        dt_record: Option<f64>,
        #[arg(long)]
        tail_fraction: Option<f64>,
    },
}

fn sigma_from(spec: &str) -> Result<SigmaSignal> {
    let text = if Path::new(spec).is_file() {
        std::fs::read_to_string(spec)?
    } else {
        spec.to_string()
    };
    serde_json::from_str(&text).map_err(|e| GpeError::Scenario {
        path: "sigma".into(),
        message: e.to_string(),
    })
}

fn run(scenario: &Path, out: Option<PathBuf>) -> Result<ExitCode> {
    let cfg = match load_scenario(scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let dir = resolve_out_dir(out, &cfg.name);
    let report = run_scenario(&cfg, Some(&dir))?;
    for e in &report.experiments {
        println!("{:<24} {:?}{}", e.name, e.status, e.error.as_ref().map(|m| format!(": {m}")).unwrap_or_default());
    }
    let failed: Vec<_> = report.invariants.iter().filter(|r| !r.passed).collect();
    for r in &failed {
        println!("invariant failed: {}/{} ({})", r.experiment, r.name, r.detail);
    }
    println!("{} invariants, {} failed; report in {}", report.invariants.len(), failed.len(), dir.display());
    Ok(if report.hard_failure() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn verify(only: Option<String>, seed: u64, as_json: bool) -> Result<ExitCode> {
    if let Some(m) = only.as_deref() {
        if !known_module(m) {
            eprintln!("error: no criteria belong to module {m:?}");
            return Ok(ExitCode::from(2));
        }
    }
    let rows = verify_suite(seed, only.as_deref());
    if as_json {
        println!("{}", serde_json::to_string_pretty(&rows)?);
    } else {
        for r in &rows {
            println!(
                "criterion {:>2} [{}] {}: {} ({:.1}s) {}",
                r.criterion,
                r.module,
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.seconds,
                r.detail
            );
        }
    }
    Ok(if rows.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn eigen(scenario: &Path, t: f64) -> Result<ExitCode> {
    let cfg = match load_scenario(scenario) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let e = dirichlet_eigen(&cfg.field()?, t, &cfg.mesh()?)?;
    let out = json!({
        "scenario": cfg.name,
        "frozen_at": t,
        "value": e.value,
        "residual": e.residual,
        "iterations": e.iterations,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn synthetic(spec: &str, tmax: f64, lambda: Option<f64>, dt_record: Option<f64>, tail_fraction: Option<f64>) -> Result<ExitCode> {
    let sigma = match sigma_from(spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(ExitCode::from(2));
        }
    };
    let domain = Domain1D::new(0.0, 1.0)?;
    let field = make_field(&FieldSpec::separable(1.0, 0.0, sigma), domain)?;
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let heat = make_field(&FieldSpec::constant(1.0, 0.0, 0.0), domain)?;
            dirichlet_eigen(&heat, 0.0, &gpe_core::discretize::build_mesh(domain, 199)?)?.value
        }
    };
    let dt_record = dt_record.unwrap_or((tmax / 1e6).max(1e-3));
    let set = synthetic_trace_set(&field, lambda, tmax, tmax, dt_record)?;
    let opts = GrowthOptions {
        tail: TailSpec {
            fraction: tail_fraction.unwrap_or(0.5),
            mode: default_tail_mode(field.kind()),
        },
        c_sup: Some(field.bounds().c_max),
        ..GrowthOptions::default()
    };
    let rep = eigen_report(&set, &opts)?;
    println!("{}", serde_json::to_string_pretty(&json!({ "lambda": lambda, "report": rep }))?);
    Ok(if rep.all_checks_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out = match cli.command {
        Command::Run { scenario, out } => run(&scenario, out),
        Command::Verify { only, seed, json } => verify(only, seed, json),
        Command::Eigen { scenario, frozen_at } => eigen(&scenario, frozen_at),
        Command::SyntheticGrowth {
            sigma_spec,
            tmax,
            lambda,
            dt_record,
            tail_fraction,
        } => synthetic(&sigma_spec, tmax, lambda, dt_record, tail_fraction),
    };
    out.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
