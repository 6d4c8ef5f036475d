//! Run configuration: built-in defaults, config file, CLI flags.
//!
//! Precedence is flags > config file > defaults. The config file is
//! plain `key = value` lines; `#` starts a comment and `input` may be
//! repeated.

use std::path::{Path, PathBuf};

use llt::classifiers::ClassifierKind;
use llt::transform::SelectRule;
use llt::{Error, Result};

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    /// (symbol, csv path) pairs.
    pub inputs: Vec<(String, PathBuf)>,
    /// Synthetic-data spec file, used instead of `inputs` when set.
    pub synth: Option<PathBuf>,
    pub dim: usize,
    pub lag: usize,
    pub select: SelectRule,
    pub test_ratio: f64,
    pub folds: usize,
    pub budget: usize,
    pub classifiers: Vec<ClassifierKind>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            synth: None,
            dim: 10,
            lag: 11,
            select: SelectRule::Var,
            test_ratio: 0.25,
            folds: 10,
            budget: 60,
            classifiers: ClassifierKind::ALL.to_vec(),
            seed: 12345,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        llt::transform::EmbeddingConfig {
            dim: self.dim,
            lag: self.lag,
        }
        .validate()?;
        if !(self.test_ratio > 0.0 && self.test_ratio < 1.0) {
            return Err(Error::Domain(format!(
                "test_ratio {} outside (0, 1)",
                self.test_ratio
            )));
        }
        if self.folds < 2 {
            return Err(Error::Domain("folds must be at least 2".into()));
        }
        if self.budget < 1 {
            return Err(Error::Domain("budget must be at least 1".into()));
        }
        if self.classifiers.is_empty() {
            return Err(Error::Domain("no classifiers selected".into()));
        }
        Ok(())
    }
}

/// Settings parsed from one source, all optional.
#[derive(Debug, Clone, Default)]
pub struct PartialConfig {
    pub inputs: Vec<(String, PathBuf)>,
    pub synth: Option<PathBuf>,
    pub dim: Option<usize>,
    pub lag: Option<usize>,
    pub select: Option<SelectRule>,
    pub test_ratio: Option<f64>,
    pub folds: Option<usize>,
    pub budget: Option<usize>,
    pub classifiers: Option<Vec<ClassifierKind>>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
}

impl PartialConfig {
    /// Overlay `self` (higher precedence) onto `base`.
    pub fn apply(self, mut base: RunConfig) -> RunConfig {
        if !self.inputs.is_empty() {
            base.inputs = self.inputs;
        }
        if self.synth.is_some() {
            base.synth = self.synth;
        }
        if let Some(v) = self.dim {
            base.dim = v;
        }
        if let Some(v) = self.lag {
            base.lag = v;
        }
        if let Some(v) = self.select {
            base.select = v;
        }
        if let Some(v) = self.test_ratio {
            base.test_ratio = v;
        }
        if let Some(v) = self.folds {
            base.folds = v;
        }
        if let Some(v) = self.budget {
            base.budget = v;
        }
        if let Some(v) = self.classifiers {
            base.classifiers = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        if let Some(v) = self.out_dir {
            base.out_dir = v;
        }
        base
    }
}

/// Parse `SYMBOL=path` (a bare path takes its stem as the symbol).
pub fn parse_input_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((symbol, path)) if !symbol.is_empty() => (symbol.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(arg);
            let symbol = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_uppercase())
                .unwrap_or_else(|| "DATA".to_string());
            (symbol, path)
        }
    }
}

/// Parse a comma-separated classifier list.
pub fn parse_classifier_list(arg: &str) -> Result<Vec<ClassifierKind>> {
    let mut kinds = Vec::new();
    for part in arg.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let kind: ClassifierKind = part.parse()?;
        if !kinds.contains(&kind) {
            kinds.push(kind);
        }
    }
    if kinds.is_empty() {
        return Err(Error::Domain(format!("no classifiers in {arg:?}")));
    }
    Ok(kinds)
}

/// Parse a plain `key = value` config file.
pub fn parse_config_file(path: &Path) -> Result<PartialConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut out = PartialConfig::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: lineno as u64 + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        let key = key.trim().to_lowercase();
        let value = value.trim();
        let bad = |what: &str| Error::Parse {
            line: lineno as u64 + 1,
            message: format!("bad {what}: {value:?}"),
        };
        match key.as_str() {
            "input" => out.inputs.push(parse_input_arg(value)),
            "synth" => out.synth = Some(PathBuf::from(value)),
            "dim" => out.dim = Some(value.parse().map_err(|_| bad("dim"))?),
            "lag" => out.lag = Some(value.parse().map_err(|_| bad("lag"))?),
            "select" => out.select = Some(value.parse()?),
            "test_ratio" => out.test_ratio = Some(value.parse().map_err(|_| bad("test_ratio"))?),
            "folds" => out.folds = Some(value.parse().map_err(|_| bad("folds"))?),
            "budget" => out.budget = Some(value.parse().map_err(|_| bad("budget"))?),
            "classifiers" => out.classifiers = Some(parse_classifier_list(value)?),
            "seed" => out.seed = Some(value.parse().map_err(|_| bad("seed"))?),
            "out" => out.out_dir = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Parse {
                    line: lineno as u64 + 1,
                    message: format!("unknown config key {other:?}"),
                })
            }
        }
    }
    Ok(out)
}
