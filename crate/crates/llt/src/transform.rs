//! Linear-law extraction and the feature space transform.
//!
//! For every training instance and every initial feature, the observed
//! series is delay-embedded into a matrix `A`, summarized as the Gram
//! matrix `S = A^T A`, and the eigenvector of the smallest eigenvalue of
//! `S` is kept as that series' linear law (the direction that `S` maps
//! closest to zero). Laws are grouped per feature and class into a bank.
//! A test instance is transformed by forming its own `S` per feature,
//! multiplying into the bank, and keeping, per (feature, class), the
//! product column with the smallest variance (or absolute mean): when
//! the test series obeys a training law, that column collapses towards
//! the null vector.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{eigen_sym, gram, mat_mul, Matrix, MAX_ORDER};
use crate::windowing::InstanceWindow;

/// Number of classes; the task is binary throughout.
pub const CLASS_COUNT: usize = 2;

/// Magic bytes of the law bank format.
pub const LAW_BANK_MAGIC: &[u8; 5] = b"LLTB1";

/// Embedding order and row lag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingConfig {
    /// Embedding order `l`: the number of columns of the embedded matrix.
    pub dim: usize,
    /// Offset between successive embedding rows. Strides wider than `dim`
    /// are capped so rows never skip samples.
    pub lag: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig { dim: 10, lag: 11 }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 || self.dim > MAX_ORDER {
            return Err(Error::Domain(format!(
                "embedding order {} outside 2..={MAX_ORDER}",
                self.dim
            )));
        }
        if self.lag < 1 {
            return Err(Error::Domain("lag must be at least 1".into()));
        }
        Ok(())
    }

    /// Check that a series of length `k` admits at least two embedding rows.
    pub fn validate_for(&self, k: usize) -> Result<()> {
        self.validate()?;
        if k < self.dim + self.lag {
            return Err(Error::Domain(format!(
                "series length {k} too short for order {} with lag {} (need at least {})",
                self.dim,
                self.lag,
                self.dim + self.lag
            )));
        }
        Ok(())
    }

    /// Number of embedding rows for a series of length `k`.
    pub fn row_count(&self, k: usize) -> usize {
        (k - self.dim) / self.lag + 1
    }

    /// Offset between consecutive row starts.
    pub fn row_stride(&self) -> usize {
        self.lag.min(self.dim)
    }
}

/// One extracted law: a unit-norm, sign-normalized coefficient vector and
/// the smallest eigenvalue it leaves behind.
#[derive(Debug, Clone, PartialEq)]
pub struct Law {
    pub v: Vec<f64>,
    /// Smallest eigenvalue of `S`, clamped to be non-negative.
    pub residual: f64,
}

/// A law tagged with the training instance it came from. Feature and
/// class are implied by its position in the bank.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLaw {
    pub source_instance: u64,
    pub law: Law,
}

/// All training laws, grouped per feature and class.
#[derive(Debug, Clone, PartialEq)]
pub struct LawBank {
    dim: usize,
    lag: usize,
    /// Series length the laws were extracted from.
    k: usize,
    /// Number of initial features.
    m: usize,
    /// `laws[feature][class]`, columns in ascending source-instance order.
    laws: Vec<[Vec<LinearLaw>; 2]>,
}

impl LawBank {
    pub fn config(&self) -> EmbeddingConfig {
        EmbeddingConfig {
            dim: self.dim,
            lag: self.lag,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    pub fn series_len(&self) -> usize {
        self.k
    }

    pub fn feature_count(&self) -> usize {
        self.m
    }

    /// Laws per class (identical across features).
    pub fn class_counts(&self) -> [usize; 2] {
        [self.laws[0][0].len(), self.laws[0][1].len()]
    }

    pub fn laws(&self, feature: usize, class: usize) -> &[LinearLaw] {
        &self.laws[feature][class]
    }

    /// The `l x count` matrix `V^j_c` with laws as columns.
    pub fn law_matrix(&self, feature: usize, class: usize) -> Matrix {
        let group = &self.laws[feature][class];
        let mut v = Matrix::zeros(self.dim, group.len());
        for (col, law) in group.iter().enumerate() {
            for (row, &x) in law.law.v.iter().enumerate() {
                v.set(row, col, x);
            }
        }
        v
    }
}

/// Column selection rule applied to the product `S * V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectRule {
    /// Smallest unbiased sample variance of the column entries.
    Var,
    /// Smallest absolute arithmetic mean of the column entries.
    Mean,
}

impl std::str::FromStr for SelectRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "var" => Ok(SelectRule::Var),
            "mean" => Ok(SelectRule::Mean),
            other => Err(Error::Domain(format!(
                "unknown select rule {other:?} (expected var or mean)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SelectRule::Var => write!(f, "var"),
            SelectRule::Mean => write!(f, "mean"),
        }
    }
}

/// One row of the transformed dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedRow {
    /// Group key: all `l` rows of one test instance share it.
    pub instance_id: u64,
    /// Position of this row inside its instance block, `0..l`.
    pub row_index: usize,
    pub features: Vec<f64>,
    pub label: u8,
}

/// Transformed test set: `l` rows per instance, `m * 2` feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedDataset {
    pub feature_count: usize,
    pub rows: Vec<TransformedRow>,
}

/// Delay-embed a series into a `row_count x dim` matrix.
///
/// Row `i` (0-based) starts at sample `i * min(dim, lag)`; the row count
/// is `floor((k - dim) / lag) + 1`. With the default order 10 and lag 11
/// a 720-sample series embeds into 65 rows and row 1 starts at the 11th
/// sample.
pub fn embed(x: &[f64], cfg: &EmbeddingConfig) -> Result<Matrix> {
    cfg.validate_for(x.len())?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("non-finite sample in series".into()));
    }
    let rows = cfg.row_count(x.len());
    let stride = cfg.row_stride();
    let mut a = Matrix::zeros(rows, cfg.dim);
    for i in 0..rows {
        let start = i * stride;
        for j in 0..cfg.dim {
            a.set(i, j, x[start + j]);
        }
    }
    Ok(a)
}

/// Gram matrix of the delay-embedded series.
pub fn gram_of(x: &[f64], cfg: &EmbeddingConfig) -> Result<crate::linalg::SymMatrix> {
    gram(&embed(x, cfg)?)
}

/// Extract the linear law of one series: the eigenvector of the smallest
/// eigenvalue of `S = A^T A`.
pub fn extract_law(x: &[f64], cfg: &EmbeddingConfig) -> Result<Law> {
    let s = gram_of(x, cfg)?;
    let eig = eigen_sym(&s);
    Ok(Law {
        v: eig.min_eigenvector(),
        residual: eig.eigenvalues[0].max(0.0),
    })
}

/// Extract one law per (training instance, feature) and group them by
/// feature and class. Column order is ascending instance id.
pub fn build_law_bank(train: &[&InstanceWindow], cfg: &EmbeddingConfig) -> Result<LawBank> {
    let Some(first) = train.first() else {
        return Err(Error::Domain("empty training set".into()));
    };
    let k = first.x.rows();
    let m = first.x.cols();
    cfg.validate_for(k)?;
    if !train.iter().any(|i| i.label == 0) || !train.iter().any(|i| i.label == 1) {
        return Err(Error::Domain(
            "both classes must be present in the training set".into(),
        ));
    }
    let mut ordered: Vec<&InstanceWindow> = train.to_vec();
    ordered.sort_by_key(|i| i.instance_id);

    let per_instance: Vec<Result<Vec<Law>>> = ordered
        .par_iter()
        .map(|inst| {
            if inst.x.rows() != k || inst.x.cols() != m {
                return Err(Error::Domain(format!(
                    "instance {} has shape {}x{}, expected {k}x{m}",
                    inst.instance_id,
                    inst.x.rows(),
                    inst.x.cols()
                )));
            }
            (0..m).map(|j| extract_law(&inst.x.col(j), cfg)).collect()
        })
        .collect();

    let mut laws: Vec<[Vec<LinearLaw>; 2]> = (0..m).map(|_| [Vec::new(), Vec::new()]).collect();
    for (inst, feature_laws) in ordered.iter().zip(per_instance) {
        let feature_laws = feature_laws?;
        for (j, law) in feature_laws.into_iter().enumerate() {
            laws[j][inst.label as usize].push(LinearLaw {
                source_instance: inst.instance_id,
                law,
            });
        }
    }
    Ok(LawBank {
        dim: cfg.dim,
        lag: cfg.lag,
        k,
        m,
        laws,
    })
}

/// Transform one test instance into an `l x (m * 2)` matrix.
///
/// Output columns are ordered (feature 0, class 0), (feature 0, class 1),
/// (feature 1, class 0), ... Ties in the selection statistic keep the
/// lowest source column index.
pub fn transform_instance(
    test: &InstanceWindow,
    bank: &LawBank,
    select: SelectRule,
) -> Result<Matrix> {
    if test.x.rows() != bank.k || test.x.cols() != bank.m {
        return Err(Error::Domain(format!(
            "test instance shape {}x{} does not match bank ({}x{})",
            test.x.rows(),
            test.x.cols(),
            bank.k,
            bank.m
        )));
    }
    let cfg = bank.config();
    let l = bank.dim;
    let mut out = Matrix::zeros(l, bank.m * CLASS_COUNT);
    for j in 0..bank.m {
        let s = gram_of(&test.x.col(j), &cfg)?;
        for c in 0..CLASS_COUNT {
            let v = bank.law_matrix(j, c);
            if v.cols() == 0 {
                return Err(Error::Domain(format!(
                    "law bank has no class-{c} laws for feature {j}"
                )));
            }
            let product = mat_mul(&s, &v)?;
            let mut best_col = 0usize;
            let mut best_stat = f64::INFINITY;
            for col in 0..product.cols() {
                let stat = column_stat(&product, col, select);
                if stat < best_stat {
                    best_stat = stat;
                    best_col = col;
                }
            }
            for row in 0..l {
                out.set(row, j * CLASS_COUNT + c, product.get(row, best_col));
            }
        }
    }
    Ok(out)
}

/// Transform a list of test instances into the row-per-(instance,
/// embedding-row) dataset: `|test| * l` rows of `m * 2` features plus
/// the instance's label.
pub fn transform_set(
    test: &[&InstanceWindow],
    bank: &LawBank,
    select: SelectRule,
) -> Result<TransformedDataset> {
    let blocks: Vec<Result<(u64, u8, Matrix)>> = test
        .par_iter()
        .map(|inst| {
            transform_instance(inst, bank, select).map(|m| (inst.instance_id, inst.label, m))
        })
        .collect();
    let mut rows = Vec::with_capacity(test.len() * bank.dim);
    for block in blocks {
        let (instance_id, label, matrix) = block?;
        for row_index in 0..matrix.rows() {
            rows.push(TransformedRow {
                instance_id,
                row_index,
                features: matrix.row(row_index).to_vec(),
                label,
            });
        }
    }
    Ok(TransformedDataset {
        feature_count: bank.m * CLASS_COUNT,
        rows,
    })
}

fn column_stat(m: &Matrix, col: usize, select: SelectRule) -> f64 {
    let n = m.rows();
    let mut sum = 0.0;
    for r in 0..n {
        sum += m.get(r, col);
    }
    let mean = sum / n as f64;
    match select {
        SelectRule::Mean => mean.abs(),
        SelectRule::Var => {
            let mut acc = 0.0;
            for r in 0..n {
                let d = m.get(r, col) - mean;
                acc += d * d;
            }
            acc / (n as f64 - 1.0)
        }
    }
}

/// Write the transformed dataset as CSV with header
/// `instance_id,row_index,f0..f{mc-1},label`.
pub fn write_transformed_csv<W: Write>(mut w: W, ds: &TransformedDataset) -> Result<()> {
    let mut header = String::from("instance_id,row_index");
    for j in 0..ds.feature_count {
        header.push_str(&format!(",f{j}"));
    }
    header.push_str(",label\n");
    w.write_all(header.as_bytes())?;
    for row in &ds.rows {
        let mut line = format!("{},{}", row.instance_id, row.row_index);
        for x in &row.features {
            line.push_str(&format!(",{x}"));
        }
        line.push_str(&format!(",{}\n", row.label));
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Read a transformed dataset written by [`write_transformed_csv`].
pub fn read_transformed_csv<R: Read>(r: R) -> Result<TransformedDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("bad transformed CSV header: {e}")))?
        .clone();
    if headers.len() < 4
        || headers.get(0) != Some("instance_id")
        || headers.get(1) != Some("row_index")
        || headers.get(headers.len() - 1) != Some("label")
    {
        return Err(Error::Format(
            "transformed CSV must start with instance_id,row_index and end with label".into(),
        ));
    }
    let feature_count = headers.len() - 3;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format(format!("bad transformed CSV row: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} in transformed CSV"),
        };
        let instance_id: u64 = rec
            .get(0)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("instance_id"))?;
        let row_index: usize = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("row_index"))?;
        let mut features = Vec::with_capacity(feature_count);
        for j in 0..feature_count {
            features.push(
                rec.get(2 + j)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| parse_err("feature"))?,
            );
        }
        let label: u8 = rec
            .get(2 + feature_count)
            .and_then(|s| s.parse().ok())
            .filter(|l| *l <= 1)
            .ok_or_else(|| parse_err("label"))?;
        rows.push(TransformedRow {
            instance_id,
            row_index,
            features,
            label,
        });
    }
    Ok(TransformedDataset {
        feature_count,
        rows,
    })
}

/// Write a law bank in the `LLTB1` layout.
///
/// Header: magic `LLTB1`, then `l`, `lag`, `m`, `c`, the per-class law
/// counts, and `k`, all little-endian `u32`. Then one index entry per
/// law in canonical order (feature-major, class, column): `feature: u32`,
/// `class: u32`, `source_instance: u64`. Then the law data in the same
/// order: `l` coefficients followed by the residual, as little-endian
/// `f64`.
pub fn write_law_bank<W: Write>(mut w: W, bank: &LawBank) -> Result<()> {
    w.write_all(LAW_BANK_MAGIC)?;
    for value in [
        bank.dim as u32,
        bank.lag as u32,
        bank.m as u32,
        CLASS_COUNT as u32,
        bank.class_counts()[0] as u32,
        bank.class_counts()[1] as u32,
        bank.k as u32,
    ] {
        w.write_all(&value.to_le_bytes())?;
    }
    for feature in 0..bank.m {
        for class in 0..CLASS_COUNT {
            for law in bank.laws(feature, class) {
                w.write_all(&(feature as u32).to_le_bytes())?;
                w.write_all(&(class as u32).to_le_bytes())?;
                w.write_all(&law.source_instance.to_le_bytes())?;
            }
        }
    }
    for feature in 0..bank.m {
        for class in 0..CLASS_COUNT {
            for law in bank.laws(feature, class) {
                for x in &law.law.v {
                    w.write_all(&x.to_le_bytes())?;
                }
                w.write_all(&law.law.residual.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

/// Read a law bank written by [`write_law_bank`].
pub fn read_law_bank<R: Read>(mut r: R) -> Result<LawBank> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic)?;
    if &magic != LAW_BANK_MAGIC {
        return Err(Error::Format("bad law bank magic".into()));
    }
    let mut header = [0u32; 7];
    for value in header.iter_mut() {
        let mut buf = [0u8; 4];
        r.read_exact(&mut buf)?;
        *value = u32::from_le_bytes(buf);
    }
    let [dim, lag, m, c, count0, count1, k] = header.map(|v| v as usize);
    if c != CLASS_COUNT {
        return Err(Error::Format(format!(
            "law bank has {c} classes, expected 2"
        )));
    }
    let total = m * (count0 + count1);
    let mut index = Vec::with_capacity(total);
    for _ in 0..total {
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let feature = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let class = u32::from_le_bytes(buf4) as usize;
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let source = u64::from_le_bytes(buf8);
        if feature >= m || class >= CLASS_COUNT {
            return Err(Error::Format(format!(
                "law index entry out of range: feature {feature}, class {class}"
            )));
        }
        index.push((feature, class, source));
    }
    let mut laws: Vec<[Vec<LinearLaw>; 2]> = (0..m).map(|_| [Vec::new(), Vec::new()]).collect();
    let mut buf8 = [0u8; 8];
    for (feature, class, source) in index {
        let mut v = vec![0.0f64; dim];
        for x in v.iter_mut() {
            r.read_exact(&mut buf8)?;
            *x = f64::from_le_bytes(buf8);
        }
        r.read_exact(&mut buf8)?;
        let residual = f64::from_le_bytes(buf8);
        laws[feature][class].push(LinearLaw {
            source_instance: source,
            law: Law { v, residual },
        });
    }
    let bank = LawBank {
        dim,
        lag,
        k,
        m,
        laws,
    };
    let counts = bank.class_counts();
    if counts != [count0, count1] {
        return Err(Error::Format(format!(
            "law bank index disagrees with header counts: {counts:?} vs [{count0}, {count1}]"
        )));
    }
    Ok(bank)
}
