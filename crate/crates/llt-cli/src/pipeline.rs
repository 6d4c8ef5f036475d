//! End-to-end orchestration: ingest -> window -> balance -> split ->
//! law bank -> transform -> tune/cross-validate -> report.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use llt::classifiers::{tune, ClassifierKind, Condition, Dataset, EvalReport, SummaryEntry};
use llt::market_data::{audit_continuity, parse_candle_csv};
use llt::rng::derive_seed;
use llt::synth::{generate_synthetic, SynthSpec};
use llt::transform::{
    build_law_bank, transform_set, write_law_bank, write_transformed_csv, EmbeddingConfig,
};
use llt::windowing::{
    balance_classes, make_instances, select_instances, split_train_test, write_instances,
    InstanceWindow, SamplingConfig,
};
use llt::{Error, Result};

use crate::config::RunConfig;
use crate::manifest::Manifest;

/// Per-symbol result of a run.
pub struct SymbolOutcome {
    pub symbol: String,
    pub balanced_instances: usize,
    pub train_instances: usize,
    pub test_instances: usize,
    /// Bar coverage of the input series (1.0 when synthetic or gapless).
    pub coverage: f64,
    pub entries: Vec<SummaryEntry>,
}

/// Run the experiment (or stop after the transform when
/// `transform_only`). Writes all artifacts under `cfg.out_dir` and
/// returns the summary entries per symbol.
pub fn execute(cfg: &RunConfig, transform_only: bool) -> Result<Vec<SymbolOutcome>> {
    cfg.validate()?;
    let mut manifest = Manifest::new(cfg.clone());
    std::fs::create_dir_all(&cfg.out_dir)?;

    let sources = resolve_sources(cfg)?;
    let mut outcomes = Vec::new();
    for (symbol, source) in sources {
        let (instances, coverage) = match &source {
            Source::Csv(path) => {
                manifest.record_input(path)?;
                let file = File::open(path)?;
                let (series, _stats) = parse_candle_csv(file, &symbol)?;
                let audit = audit_continuity(&series);
                (
                    make_instances(&series, &sampling_config(cfg, &symbol))?,
                    audit.coverage_fraction,
                )
            }
            Source::Synth(path) => {
                manifest.record_input(path)?;
                let text = std::fs::read_to_string(path)?;
                let spec: SynthSpec = serde_json::from_str(&text)
                    .map_err(|e| Error::Format(format!("bad synth spec: {e}")))?;
                (generate_synthetic(&spec)?, 1.0)
            }
        };
        if instances.is_empty() {
            return Err(Error::EmptyInput(format!(
                "{symbol}: no complete labeled windows in input"
            )));
        }
        let outcome = run_symbol(
            cfg,
            &symbol,
            instances,
            coverage,
            transform_only,
            &mut manifest,
        )?;
        outcomes.push(outcome);
    }

    if !transform_only {
        let symbols: Vec<String> = outcomes.iter().map(|o| o.symbol.clone()).collect();
        let entries: Vec<SummaryEntry> = outcomes
            .iter()
            .flat_map(|o| o.entries.iter().cloned())
            .collect();
        let table = llt::classifiers::render_summary_table(&symbols, &entries);
        let summary_path = cfg.out_dir.join("summary.txt");
        std::fs::write(&summary_path, table)?;
        manifest.record_artifact(&summary_path)?;
    }
    manifest.write(&cfg.out_dir.join("manifest.json"))?;
    Ok(outcomes)
}

/// Classify a pre-transformed CSV written by the `transform` stage.
pub fn execute_eval(cfg: &RunConfig, csv_path: &Path, symbol: &str) -> Result<SymbolOutcome> {
    cfg.validate()?;
    let mut manifest = Manifest::new(cfg.clone());
    std::fs::create_dir_all(&cfg.out_dir)?;
    manifest.record_input(csv_path)?;

    let file = File::open(csv_path)?;
    let transformed = llt::transform::read_transformed_csv(file)?;
    let dataset = Dataset::from_transformed(&transformed);
    let symbol_dir = cfg.out_dir.join(symbol);
    std::fs::create_dir_all(&symbol_dir)?;
    let symbol_seed = derive_seed(cfg.seed, &format!("symbol/{symbol}"));

    let groups = count_groups(&dataset);
    let mut entries = Vec::new();
    for kind in &cfg.classifiers {
        let report_path = symbol_dir.join(format!("report_llt_{}.json", kind.name()));
        let entry = evaluate(
            cfg,
            &dataset,
            Condition::Llt,
            *kind,
            symbol,
            symbol_seed,
            &report_path,
        )?;
        manifest.record_artifact(&report_path)?;
        entries.push(entry);
    }
    let symbols = vec![symbol.to_string()];
    let table = llt::classifiers::render_summary_table(&symbols, &entries);
    let summary_path = cfg.out_dir.join("summary.txt");
    std::fs::write(&summary_path, table)?;
    manifest.record_artifact(&summary_path)?;
    manifest.write(&cfg.out_dir.join("manifest.json"))?;
    Ok(SymbolOutcome {
        symbol: symbol.to_string(),
        balanced_instances: groups,
        train_instances: 0,
        test_instances: groups,
        coverage: 1.0,
        entries,
    })
}

enum Source {
    Csv(PathBuf),
    Synth(PathBuf),
}

fn resolve_sources(cfg: &RunConfig) -> Result<Vec<(String, Source)>> {
    if let Some(spec) = &cfg.synth {
        if !cfg.inputs.is_empty() {
            return Err(Error::Domain(
                "give either --input files or --synth, not both".into(),
            ));
        }
        return Ok(vec![("SYNTH".to_string(), Source::Synth(spec.clone()))]);
    }
    if cfg.inputs.is_empty() {
        return Err(Error::Domain(
            "no inputs: pass --input SYMBOL=path or --synth spec.json".into(),
        ));
    }
    Ok(cfg
        .inputs
        .iter()
        .map(|(symbol, path)| (symbol.clone(), Source::Csv(path.clone())))
        .collect())
}

fn sampling_config(cfg: &RunConfig, symbol: &str) -> SamplingConfig {
    SamplingConfig {
        test_ratio: cfg.test_ratio,
        seed: derive_seed(cfg.seed, &format!("symbol/{symbol}")),
        ..SamplingConfig::default()
    }
}

fn run_symbol(
    cfg: &RunConfig,
    symbol: &str,
    instances: Vec<InstanceWindow>,
    coverage: f64,
    transform_only: bool,
    manifest: &mut Manifest,
) -> Result<SymbolOutcome> {
    let symbol_dir = cfg.out_dir.join(symbol);
    std::fs::create_dir_all(&symbol_dir)?;
    let sampling = sampling_config(cfg, symbol);
    let symbol_seed = sampling.seed;

    let balanced = balance_classes(instances, symbol_seed)?;
    let split = split_train_test(&balanced, &sampling)?;
    let train = select_instances(&balanced, &split.train_ids);
    let test = select_instances(&balanced, &split.test_ids);

    let cache_path = symbol_dir.join("instances.lltw");
    write_instances(BufWriter::new(File::create(&cache_path)?), &balanced)?;
    manifest.record_artifact(&cache_path)?;

    let embedding = EmbeddingConfig {
        dim: cfg.dim,
        lag: cfg.lag,
    };
    let bank = build_law_bank(&train, &embedding)?;
    let bank_path = symbol_dir.join("lawbank.lltb");
    write_law_bank(BufWriter::new(File::create(&bank_path)?), &bank)?;
    manifest.record_artifact(&bank_path)?;

    let transformed = transform_set(&test, &bank, cfg.select)?;
    let csv_path = symbol_dir.join("transformed.csv");
    write_transformed_csv(BufWriter::new(File::create(&csv_path)?), &transformed)?;
    manifest.record_artifact(&csv_path)?;

    let mut entries = Vec::new();
    if !transform_only {
        let llt_ds = Dataset::from_transformed(&transformed);
        let raw_ds = Dataset::raw_flattened(&test);
        for (condition, ds) in [(Condition::Raw, &raw_ds), (Condition::Llt, &llt_ds)] {
            for kind in &cfg.classifiers {
                let report_path =
                    symbol_dir.join(format!("report_{}_{}.json", condition.name(), kind.name()));
                let entry = evaluate(cfg, ds, condition, *kind, symbol, symbol_seed, &report_path)?;
                manifest.record_artifact(&report_path)?;
                entries.push(entry);
            }
        }
    }
    Ok(SymbolOutcome {
        symbol: symbol.to_string(),
        balanced_instances: balanced.len(),
        train_instances: train.len(),
        test_instances: test.len(),
        coverage,
        entries,
    })
}

fn evaluate(
    cfg: &RunConfig,
    dataset: &Dataset,
    condition: Condition,
    kind: ClassifierKind,
    symbol: &str,
    symbol_seed: u64,
    report_path: &Path,
) -> Result<SummaryEntry> {
    let tune_seed = derive_seed(
        symbol_seed,
        &format!("tune/{}/{}", condition.name(), kind.name()),
    );
    let started = Instant::now();
    let outcome = tune(dataset, kind, cfg.budget, cfg.folds, tune_seed)?;
    let wall_ms = started.elapsed().as_millis() as u64;
    let report = EvalReport::new(&outcome.spec, &outcome.outcome, cfg.seed, wall_ms);
    std::fs::write(report_path, report.to_json())?;
    Ok(SummaryEntry {
        condition,
        classifier: kind.name().to_string(),
        symbol: symbol.to_string(),
        accuracy: outcome.outcome.instance_accuracy,
    })
}

fn count_groups(ds: &Dataset) -> usize {
    let mut groups: Vec<u64> = ds.rows.iter().map(|r| r.group).collect();
    groups.sort_unstable();
    groups.dedup();
    groups.len()
}
