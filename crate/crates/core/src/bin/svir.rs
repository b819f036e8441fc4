use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use svir_core::algebra::{AlgebraConfig, Epsilon};
use svir_core::job::{run_job, JobError, JobFile, TaskKind};
use svir_core::verify::verify_report;

/// Exact computations in the super Virasoro algebras.
#[derive(Parser)]
#[command(name = "svir", version)]
struct Cli {
    /// Index grid of the odd generators.
    #[arg(long, global = true, default_value = "0", value_parser = ["0", "1/2"])]
    eps: String,
    /// Include the central element C (default).
    #[arg(long, global = true, overrides_with = "no_center")]
    center: bool,
    /// Work in the centerless quotient.
    #[arg(long = "no-center", global = true, overrides_with = "center")]
    no_center: bool,
    /// Degree radius for windows, sweeps and probe sets.
    #[arg(long, global = true, default_value_t = 4)]
    radius: i64,
    /// Run a job file instead of a subcommand.
    #[arg(long, global = true)]
    job: Option<PathBuf>,
    /// Re-check the report's certificate after running.
    #[arg(long, global = true)]
    verify: bool,
    /// Print the machine-readable report.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct ParamArgs {
    /// Use eps = -1 (index flip).
    #[arg(long)]
    flip: bool,
    #[arg(long, default_value = "1")]
    a: String,
    /// Odd-part factor; defaults to 1, or i with --flip.
    #[arg(long)]
    s: Option<String>,
    /// Square root of a, required on the half grid unless a is 1.
    #[arg(long)]
    h: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run job files.
    Run { files: Vec<PathBuf> },
    /// Re-check a saved JSON report.
    Verify { report: PathBuf },
    /// [X, Y]
    Bracket { x: String, y: String },
    /// Super-skew symmetry and graded Jacobi identity on the window.
    Jacobi,
    /// Inner-derivation witness for a map.
    DerWitness {
        /// Use ad(U) on the window.
        #[arg(long)]
        ad: Option<String>,
        /// Table entry `X => Y` (repeatable).
        #[arg(long = "entry")]
        entries: Vec<String>,
        #[arg(long)]
        ansatz_radius: Option<i64>,
    },
    /// Is V = [y, X] for some y in the ansatz?
    DerLocal {
        x: String,
        v: String,
        #[arg(long)]
        ansatz_radius: Option<i64>,
    },
    /// Intersection of ad-probe images inside the target window.
    DerIntersect {
        #[arg(long = "probe")]
        probes: Vec<String>,
        #[arg(long)]
        base: Option<String>,
        #[arg(long)]
        direction: Option<String>,
        /// Sample values for the probe family (comma separated).
        #[arg(long = "x", value_delimiter = ',')]
        x_values: Vec<String>,
        /// Additional samples for the stability check.
        #[arg(long = "extra-x", value_delimiter = ',')]
        extra_x: Vec<String>,
    },
    /// Peel an inner derivation off a map.
    DerPipeline {
        #[arg(long)]
        ad: Option<String>,
        #[arg(long = "entry")]
        entries: Vec<String>,
    },
    /// Apply a family member.
    AutApply {
        x: String,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Family members sending X to IMAGE.
    AutFit { x: String, image: String },
    /// Bracket preservation of a family member or of the grading involution.
    AutCheck {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        involution: bool,
    },
    /// Decide a local automorphism given on the full probe set.
    AutLocal {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        involution: bool,
        /// Override `X => Y` (repeatable).
        #[arg(long = "override")]
        overrides: Vec<String>,
    },
    /// Recover a 2-local automorphism from oracle queries.
    #[command(name = "aut-2local")]
    AutTwoLocal {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        involution: bool,
        #[arg(long = "override")]
        overrides: Vec<String>,
    },
}

fn split_entry(text: &str) -> Result<Value, JobError> {
    match text.split_once("=>") {
        Some((x, y)) => Ok(json!([x.trim(), y.trim()])),
        None => Err(JobError::Usage(format!("expected `X => Y`, got `{text}`"))),
    }
}

fn entries(list: &[String]) -> Result<Vec<Value>, JobError> {
    list.iter().map(|e| split_entry(e)).collect()
}

fn params_json(p: &ParamArgs, half: bool) -> Value {
    let s = p.s.clone().unwrap_or_else(|| if p.flip { "i".into() } else { "1".into() });
    let h = p.h.clone().or_else(|| (half && p.a.trim() == "1").then(|| "1".to_string()));
    json!({ "eps": if p.flip { "-1" } else { "+1" }, "a": p.a, "s": s, "h": h })
}

fn map_spec(ad: &Option<String>, list: &[String], radius: i64) -> Result<Value, JobError> {
    match (ad, list.is_empty()) {
        (Some(u), true) => Ok(json!({ "kind": "ad", "u": u, "radius": radius })),
        (None, false) => Ok(json!({ "kind": "entries", "entries": entries(list)? })),
        _ => Err(JobError::Usage("give either --ad U or at least one --entry".into())),
    }
}

fn phi(params: &ParamArgs, involution: bool, overrides: &[String], half: bool) -> Result<Value, JobError> {
    let mut v = json!({ "overrides": entries(overrides)? });
    if involution {
        v["involution"] = json!(true);
    } else {
        v["params"] = params_json(params, half);
    }
    Ok(v)
}

fn build_job(cli: &Cli, command: &Command) -> Result<JobFile, JobError> {
    let epsilon = if cli.eps == "1/2" { Epsilon::Half } else { Epsilon::Zero };
    let config = AlgebraConfig::new(epsilon, !cli.no_center);
    let half = epsilon == Epsilon::Half;
    let r = cli.radius;
    let (task, operands) = match command {
        Command::Run { .. } | Command::Verify { .. } => unreachable!("handled before"),
        Command::Bracket { x, y } => (TaskKind::Bracket, json!({ "x": x, "y": y })),
        Command::Jacobi => (TaskKind::Jacobi, json!({ "radius": r })),
        Command::DerWitness { ad, entries, ansatz_radius } => (
            TaskKind::DerWitness,
            json!({ "map": map_spec(ad, entries, r)?, "ansatz_radius": ansatz_radius.unwrap_or(r) }),
        ),
        Command::DerLocal { x, v, ansatz_radius } => {
            (TaskKind::DerLocal, json!({ "x": x, "v": v, "ansatz_radius": ansatz_radius.unwrap_or(r) }))
        }
        Command::DerIntersect { probes, base, direction, x_values, extra_x } => {
            let mut ops = json!({ "probes": probes, "target_radius": r, "extra_x_values": extra_x });
            if let (Some(b), Some(d)) = (base, direction) {
                ops["family"] = json!({ "base": b, "direction": d, "x_values": x_values });
            } else if base.is_some() || direction.is_some() || !x_values.is_empty() {
                return Err(JobError::Usage("a probe family needs --base, --direction and --x".into()));
            }
            (TaskKind::DerIntersect, ops)
        }
        Command::DerPipeline { ad, entries } => (TaskKind::DerPipeline, json!({ "map": map_spec(ad, entries, r)? })),
        Command::AutApply { x, params } => (TaskKind::AutApply, json!({ "params": params_json(params, half), "x": x })),
        Command::AutFit { x, image } => (TaskKind::AutFit, json!({ "x": x, "image": image })),
        Command::AutCheck { params, involution } => {
            let map = if *involution {
                json!({ "kind": "involution", "radius": 2 * r })
            } else {
                json!({ "kind": "aut", "params": params_json(params, half), "radius": 2 * r })
            };
            (TaskKind::AutCheck, json!({ "map": map, "check_radius": r }))
        }
        Command::AutLocal { params, involution, overrides } => {
            (TaskKind::AutLocal, json!({ "phi": phi(params, *involution, overrides, half)?, "radius": r }))
        }
        Command::AutTwoLocal { params, involution, overrides } => {
            (TaskKind::AutTwoLocal, json!({ "phi": phi(params, *involution, overrides, half)?, "radius": r }))
        }
    };
    Ok(JobFile { config, task, operands })
}

fn read_job(path: &PathBuf) -> Result<JobFile, JobError> {
    let text = fs::read_to_string(path).map_err(|e| JobError::Usage(format!("{}: {e}", path.display())))?;
    JobFile::parse(&text)
}

/// Runs one job and prints its report; returns the exit status.
fn execute(cli: &Cli, job: &JobFile) -> u8 {
    let report = match run_job(job) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return 2;
        }
    };
    if cli.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.text);
    }
    if cli.verify {
        let reparsed: Value = serde_json::from_str(&report.to_json()).expect("report is valid json");
        match verify_report(&reparsed) {
            Ok(n) => eprintln!("verified: {n} checks"),
            Err(e) => {
                eprintln!("{e}");
                return 1;
            }
        }
    }
    report.exit_code() as u8
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let jobs: Result<Vec<JobFile>, JobError> = match (&cli.job, &cli.command) {
        (_, Some(Command::Verify { report })) => {
            let status = match fs::read_to_string(report)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str::<Value>(&t).map_err(|e| e.to_string()))
            {
                Err(e) => {
                    eprintln!("usage: {}: {e}", report.display());
                    2
                }
                Ok(doc) => match verify_report(&doc) {
                    Ok(n) => {
                        println!("verified: {n} checks");
                        0
                    }
                    Err(e) => {
                        eprintln!("{e}");
                        1
                    }
                },
            };
            return ExitCode::from(status);
        }
        (Some(path), None) => read_job(path).map(|j| vec![j]),
        (None, Some(Command::Run { files })) if !files.is_empty() => files.iter().map(read_job).collect(),
        (Some(path), Some(Command::Run { files })) => {
            std::iter::once(path).chain(files).map(read_job).collect()
        }
        (Some(_), Some(_)) => Err(JobError::Usage("--job cannot be combined with a task subcommand".into())),
        (None, Some(Command::Run { .. })) | (None, None) => {
            Err(JobError::Usage("give a subcommand or --job FILE (see --help)".into()))
        }
        (None, Some(cmd)) => build_job(&cli, cmd).map(|j| vec![j]),
    };
    let jobs = match jobs {
        Ok(j) => j,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let status = jobs.iter().map(|j| execute(&cli, j)).max().unwrap_or(0);
    ExitCode::from(status)
}
