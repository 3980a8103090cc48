use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dndf::check::run_checks;
use dndf::cohort_io::write_cohort;
use dndf::config::{DataSource, ExperimentConfig, ModelKind};
use dndf::error::{Result, RunError};
use dndf::report::{render_text, results_from_json};
use dndf::runner::{run_all, MANIFEST_FILE};
use dndf_core::dataset::{generate_synthetic, SyntheticCohortSpec};
use dndf_core::preprocess::Stage;

#[derive(Parser)]
#[command(name = "dndf", version, about = "Neural decision forests and baselines for staged mortality prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort as comma-separated values.
    Generate {
        /// TOML file with the cohort spec; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the staged experiment.
    Run {
        /// TOML experiment config; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// s1..s4 or all.
        #[arg(long, default_value = "all")]
        stage: String,
        /// A model name (gnb, knn, logreg, cart, rf, svm, adaboost, dndt, dndf) or all.
        #[arg(long, default_value = "all")]
        model: String,
        #[arg(long)]
        seed: Option<u64>,
        /// A cohort file to use instead of the configured data source.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the text report of a results file.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numeric self-checks.
    Check {
        #[arg(long, default_value_t = 100)]
        trials: u64,
    },
}

fn parse_stages(s: &str) -> Result<Vec<Stage>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Stage::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse::<Stage>().map_err(RunError::from)).collect()
}

fn parse_models(s: &str) -> Result<Vec<ModelKind>> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ModelKind::ALL.to_vec());
    }
    s.split(',').map(|p| p.trim().parse::<ModelKind>()).collect()
}

fn generate(spec: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> Result<()> {
    let mut spec: SyntheticCohortSpec = match spec {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|source| RunError::Io { path: p.clone(), source })?;
            toml::from_str(&text).map_err(|e| RunError::Config(format!("{}: {e}", p.display())))?
        }
        None => SyntheticCohortSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let cohort = generate_synthetic(&spec)?;
    write_cohort(&cohort, &out)?;
    eprintln!("wrote {} rows to {}", cohort.len(), out.display());
    Ok(())
}

fn run(
    config: Option<PathBuf>,
    stage: &str,
    model: &str,
    seed: Option<u64>,
    data: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(&p)?,
        None => ExperimentConfig::default(),
    };
    cfg.stages = parse_stages(stage)?;
    cfg.models = parse_models(model)?;
    if let Some(s) = seed {
        cfg.seed = s;
        if let DataSource::Synthetic(spec) = &mut cfg.data {
            spec.seed = s;
        }
    }
    if let Some(d) = data {
        cfg.data = DataSource::Path(d);
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let output = run_all(&cfg)?;
    print!("{}", render_text(&output.results));
    for t in &output.timings {
        eprintln!("{} {:<9} {:>8.2}s", t.stage, t.model.as_str(), t.seconds);
    }
    eprintln!("manifest: {}", cfg.out_dir.join(MANIFEST_FILE).display());
    Ok(())
}

fn report(results: PathBuf, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(&results).map_err(|source| RunError::Io { path: results.clone(), source })?;
    let rendered = render_text(&results_from_json(&text)?);
    match out {
        Some(p) => std::fs::write(&p, rendered).map_err(|source| RunError::Io { path: p, source }),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn check(trials: u64) -> Result<()> {
    let outcomes = run_checks(trials);
    for o in &outcomes {
        println!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::Check(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate { spec, out, seed } => generate(spec, out, seed),
        Command::Run { config, stage, model, seed, data, out } => run(config, &stage, &model, seed, data, out),
        Command::Report { results, out } => report(results, out),
        Command::Check { trials } => check(trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
