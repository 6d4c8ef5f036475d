//! `llt` - linear law-based feature space transformation pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use llt_cli::config::{
    parse_classifier_list, parse_config_file, parse_input_arg, PartialConfig, RunConfig,
};
use llt_cli::pipeline::{execute, execute_eval};
use llt_cli::ErrorReport;

#[derive(Parser)]
#[command(
    name = "llt",
    about = "Linear law-based feature space transformation for intraday price-movement classification",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full experiment: ingest, window, transform, tune, report.
    Run(CommonOpts),
    /// Generate synthetic recurrence-driven data and run on it.
    Synth(CommonOpts),
    /// Stop after the feature space transform and emit the CSV.
    Transform(CommonOpts),
    /// Classify a pre-transformed CSV.
    Eval(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// Input candle CSV, repeatable; "SYMBOL=path" or a bare path.
    /// For `eval` this is the transformed CSV.
    #[arg(long = "input", value_name = "SYMBOL=PATH")]
    input: Vec<String>,

    /// Plain key = value config file (flags override it).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Synthetic data spec (JSON), used instead of --input.
    #[arg(long, value_name = "FILE")]
    synth: Option<PathBuf>,

    /// Embedding order l.
    #[arg(long, value_name = "N")]
    dim: Option<usize>,

    /// Embedding row lag.
    #[arg(long, value_name = "N")]
    lag: Option<usize>,

    /// Column selection rule: var or mean.
    #[arg(long, value_name = "RULE")]
    select: Option<String>,

    /// Fraction of instances in the test set.
    #[arg(long = "test-ratio", value_name = "F")]
    test_ratio: Option<f64>,

    /// Cross-validation folds.
    #[arg(long, value_name = "N")]
    folds: Option<usize>,

    /// Random-search budget per classifier.
    #[arg(long, value_name = "N")]
    budget: Option<usize>,

    /// Comma-separated list: knn,tree,svm,ensemble.
    #[arg(long, value_name = "LIST")]
    classifiers: Option<String>,

    /// Root seed; every randomized stage derives its own stream.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,

    /// Output directory for artifacts.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn resolve_config(opts: &CommonOpts) -> llt::Result<RunConfig> {
    let mut resolved = RunConfig::default();
    if let Some(path) = &opts.config {
        resolved = parse_config_file(path)?.apply(resolved);
    }
    let flags = PartialConfig {
        inputs: opts.input.iter().map(|s| parse_input_arg(s)).collect(),
        synth: opts.synth.clone(),
        dim: opts.dim,
        lag: opts.lag,
        select: opts.select.as_deref().map(str::parse).transpose()?,
        test_ratio: opts.test_ratio,
        folds: opts.folds,
        budget: opts.budget,
        classifiers: opts
            .classifiers
            .as_deref()
            .map(parse_classifier_list)
            .transpose()?,
        seed: opts.seed,
        out_dir: opts.out.clone(),
    };
    Ok(flags.apply(resolved))
}

fn dispatch(command: &Command) -> llt::Result<()> {
    match command {
        Command::Run(opts) | Command::Synth(opts) => {
            let cfg = resolve_config(opts)?;
            if matches!(command, Command::Synth(_)) && cfg.synth.is_none() {
                return Err(llt::Error::Domain(
                    "synth mode needs --synth spec.json".into(),
                ));
            }
            let outcomes = execute(&cfg, false)?;
            for o in &outcomes {
                eprintln!(
                    "{}: {} balanced instances ({} train / {} test), bar coverage {:.4}",
                    o.symbol, o.balanced_instances, o.train_instances, o.test_instances, o.coverage
                );
            }
            let summary = std::fs::read_to_string(cfg.out_dir.join("summary.txt"))?;
            println!("{summary}");
            println!("artifacts written to {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Transform(opts) => {
            let cfg = resolve_config(opts)?;
            let outcomes = execute(&cfg, true)?;
            for o in &outcomes {
                println!(
                    "{}: transformed {} test instances (bank from {} train) -> {}",
                    o.symbol,
                    o.test_instances,
                    o.train_instances,
                    cfg.out_dir
                        .join(&o.symbol)
                        .join("transformed.csv")
                        .display()
                );
            }
            Ok(())
        }
        Command::Eval(opts) => {
            let cfg = resolve_config(opts)?;
            let (symbol, path) = match cfg.inputs.as_slice() {
                [one] => one.clone(),
                _ => {
                    return Err(llt::Error::Domain(
                        "eval needs exactly one --input transformed.csv".into(),
                    ))
                }
            };
            execute_eval(&cfg, &path, &symbol)?;
            let summary = std::fs::read_to_string(cfg.out_dir.join("summary.txt"))?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = ErrorReport::from_error(&e);
            eprintln!("{}", report.to_json());
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
