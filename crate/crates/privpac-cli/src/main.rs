use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use privpac::domain::ConceptClass;
use privpac::harness::{
    build_case, parse_class, results_csv, run_pac_experiment_with, run_reduce_experiment,
    run_san_experiment, summarize, summary_json, Config, PacConfig, ReduceConfig, SanConfig,
    Summary, TrialResult,
};
use privpac::sanitizers::{
    max_class_error, san_points, san_thresholds, CountingAnswers, SanitizerParams,
};
use privpac::text::{parse_dataset, Dataset};
use privpac::{Error, Randomness};

const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_THRESHOLD: u8 = 4;

#[derive(Parser)]
#[command(
    name = "privpac",
    version,
    about = "Private PAC learning and sanitization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a private learner over many trials.
    Learn(Run),
    /// Sanitize an input database, or run a sanitizer over many synthetic databases.
    Sanitize(Sanitize),
    /// Learn points through the label-class sanitizer reduction.
    Reduce(Run),
    /// Empirically audit a mechanism on a neighbor pair.
    Audit(Audit),
    /// Time a learning experiment with and without the thread pool.
    Bench(Run),
}

#[derive(Args, Clone)]
struct Common {
    /// Master seed; every result is a function of the configuration and this seed.
    #[arg(long)]
    seed: u64,
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` settings, applied after the file and the named flags.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Write per-trial recursion traces as JSON lines to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Include wall-clock time in the CSV.
    #[arg(long)]
    timing: bool,
    /// Exit with status 4 when the success rate falls below this value.
    #[arg(long)]
    min_success: Option<f64>,
}

#[derive(Args, Clone)]
struct Knobs {
    #[arg(long)]
    class: Option<String>,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    /// Number of rectangle axes.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    /// Recursion budget of the threshold learner.
    #[arg(long = "budget")]
    budget: Option<u32>,
    #[arg(long)]
    distribution: Option<String>,
    /// Multiplier on sample-size constants.
    #[arg(long)]
    gamma_c: Option<f64>,
}

impl Knobs {
    fn apply(&self, c: &mut Config) {
        let pairs: [(&str, Option<String>); 13] = [
            ("class", self.class.clone()),
            ("d", self.d.map(|v| v.to_string())),
            ("k", self.k.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("eps", self.eps.map(|v| v.to_string())),
            ("delta", self.delta.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("trials", self.trials.map(|v| v.to_string())),
            ("N", self.budget.map(|v| v.to_string())),
            ("distribution", self.distribution.clone()),
            ("gamma_c", self.gamma_c.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                c.set(k, v);
            }
        }
    }
}

#[derive(Args)]
struct Run {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct Sanitize {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    knobs: Knobs,
    /// Database file to sanitize once instead of running synthetic trials.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct Audit {
    /// One of laplace, laplace_misdeclared, a_dist, choose, san_points, learn_point, label_private.
    #[arg(long)]
    mech: String,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    d: Option<u32>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Exit with status 4 when a violation is flagged.
    #[arg(long)]
    fail_on_violation: bool,
}

enum Failure {
    Usage(String),
    Resource(String),
    Threshold(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Resource(_) => Failure::Resource(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Resource(format!("{}: {e}", path.display()))
}

fn load_config(common: &Common, knobs: &Knobs) -> Result<Config, Failure> {
    let mut c = match &common.config {
        Some(p) => Config::parse(&fs::read_to_string(p).map_err(|e| io_failure(p, e))?)?,
        None => Config::default(),
    };
    knobs.apply(&mut c);
    Ok(c.with_overrides(common.set.iter().map(String::as_str))?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_failure(&path, e))
}

fn write_traces(path: &Path, results: &[TrialResult]) -> Result<(), Failure> {
    let mut f = fs::File::create(path).map_err(|e| io_failure(path, e))?;
    for r in results {
        if let Some(t) = &r.trace {
            let line = serde_json::json!({ "trial": r.trial, "trace": t });
            writeln!(f, "{line}").map_err(|e| io_failure(path, e))?;
        }
    }
    Ok(())
}

fn finish(common: &Common, results: &[TrialResult]) -> Result<Summary, Failure> {
    let summary = summarize(results);
    write_file(
        &common.output_dir,
        "results.csv",
        &results_csv(results, common.timing),
    )?;
    write_file(&common.output_dir, "summary.json", &summary_json(&summary))?;
    if let Some(p) = &common.trace {
        write_traces(p, results)?;
    }
    println!("{}", summary_json(&summary));
    if let Some(min) = common.min_success {
        if summary.success_rate < min {
            return Err(Failure::Threshold(format!(
                "success rate {} is below {min}",
                summary.success_rate
            )));
        }
    }
    Ok(summary)
}

fn learn(run: &Run) -> Result<(), Failure> {
    let cfg = PacConfig::from_config(&load_config(&run.common, &run.knobs)?, run.common.seed)?;
    let results = run_pac_experiment_with(&cfg, true)?;
    finish(&run.common, &results).map(drop)
}

fn reduce(run: &Run) -> Result<(), Failure> {
    let cfg = ReduceConfig::from_config(&load_config(&run.common, &run.knobs)?, run.common.seed)?;
    finish(&run.common, &run_reduce_experiment(&cfg)?).map(drop)
}

fn bench(run: &Run) -> Result<(), Failure> {
    let cfg = PacConfig::from_config(&load_config(&run.common, &run.knobs)?, run.common.seed)?;
    let time = |parallel| -> Result<(f64, Vec<TrialResult>), Failure> {
        let start = Instant::now();
        let r = run_pac_experiment_with(&cfg, parallel)?;
        Ok((start.elapsed().as_secs_f64(), r))
    };
    let (seq_secs, seq) = time(false)?;
    let (par_secs, par) = time(true)?;
    let report = serde_json::json!({
        "trials": cfg.trials,
        "sequential_secs": seq_secs,
        "parallel_secs": par_secs,
        "speedup": seq_secs / par_secs.max(1e-12),
        "identical": results_csv(&seq, false) == results_csv(&par, false),
        "parallel_feature": privpac::parallel::is_parallel(),
    });
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    write_file(&run.common.output_dir, "bench.json", &report.to_string())
}

fn sanitize(s: &Sanitize) -> Result<(), Failure> {
    let config = load_config(&s.common, &s.knobs)?;
    let Some(input) = &s.input else {
        let cfg = SanConfig::from_config(&config, s.common.seed)?;
        return finish(&s.common, &run_san_experiment(&cfg)?).map(drop);
    };
    let db = match parse_dataset(&fs::read_to_string(input).map_err(|e| io_failure(input, e))?)? {
        Dataset::Unlabeled(db) => db,
        Dataset::Labeled(sample) => sample.lifted()?,
    };
    let mut params = SanitizerParams::new(
        config.require("alpha")?,
        config.require("beta")?,
        config.require("eps")?,
        config.get_or("delta", 1e-6)?,
    )?
    .with_scale(config.get_or("gamma_c", 1.0)?);
    if !config.get_or("validate", true)? {
        params = params.unvalidated();
    }
    let bits = db.bits();
    let class = parse_class(config.get_str("class").unwrap_or("thresh"), bits, 1, 1)?;
    let mut rng = Randomness::from_seed(s.common.seed);
    let (csv, error) = match class {
        ConceptClass::Point { .. } => {
            let est = san_points(&db, &params, &mut rng)?;
            let mut csv = String::from("point,estimate\n");
            for (x, v) in est.point_masses() {
                csv.push_str(&format!("{x},{v}\n"));
            }
            (csv, max_class_error(&class, &db, &est, u64::MAX)?)
        }
        ConceptClass::Threshold { .. } => {
            let (out, _) = san_thresholds(&db, &params, &mut rng)?;
            let mut csv = String::from("point,weight\n");
            for (x, w) in out.weights() {
                csv.push_str(&format!("{x},{w}\n"));
            }
            (csv, max_class_error(&class, &db, &out, u64::MAX)?)
        }
        _ => {
            return Err(Failure::Usage(
                "sanitize supports the point and thresh classes".into(),
            ))
        }
    };
    write_file(&s.common.output_dir, "sanitized.csv", &csv)?;
    let report = serde_json::json!({
        "entries": db.len(),
        "bits": bits,
        "max_query_error": error,
        "alpha_close": error <= params.alpha,
    });
    write_file(&s.common.output_dir, "report.json", &report.to_string())?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(())
}

fn audit(a: &Audit) -> Result<(), Failure> {
    let case = build_case(&a.mech, a.d, a.m)?;
    let report = case.audit(a.trials, &mut Randomness::from_seed(a.seed))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&a.output_dir, "audit.json", &json)?;
    println!("{json}");
    if a.fail_on_violation && report.violation {
        return Err(Failure::Threshold(format!(
            "violation flagged for {}",
            report.mechanism
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Learn(r) => learn(r),
        Command::Sanitize(s) => sanitize(s),
        Command::Reduce(r) => reduce(r),
        Command::Audit(a) => audit(a),
        Command::Bench(r) => bench(r),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Resource(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RESOURCE)
        }
        Err(Failure::Threshold(m)) => {
            eprintln!("threshold not met: {m}");
            ExitCode::from(EXIT_THRESHOLD)
        }
    }
}
