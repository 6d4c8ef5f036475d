//! Evaluation reports: the JSON schema and the summary table.

use super::{ClassifierSpec, CvOutcome};

/// Which feature space a report was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    /// Flattened observed windows, one row per instance.
    Raw,
    /// Law-transformed rows, `l` per instance.
    Llt,
}

impl Condition {
    pub fn name(&self) -> &'static str {
        match self {
            Condition::Raw => "raw",
            Condition::Llt => "llt",
        }
    }
}

/// One classifier's cross-validation report.
///
/// Serializes with a fixed key order:
/// `{classifier, params, fold_accuracies, row_accuracy,
/// instance_accuracy, confusion, seed, wall_ms}`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub params: ClassifierSpec,
    pub fold_accuracies: Vec<f64>,
    pub row_accuracy: f64,
    pub instance_accuracy: f64,
    /// Instance-level `[[tn, fp], [fn, tp]]`.
    pub confusion: [[u64; 2]; 2],
    pub seed: u64,
    pub wall_ms: u64,
}

impl EvalReport {
    pub fn new(spec: &ClassifierSpec, outcome: &CvOutcome, seed: u64, wall_ms: u64) -> EvalReport {
        EvalReport {
            classifier: spec.kind().name().to_string(),
            params: *spec,
            fold_accuracies: outcome.fold_accuracies.clone(),
            row_accuracy: outcome.row_accuracy,
            instance_accuracy: outcome.instance_accuracy,
            confusion: outcome.confusion,
            seed,
            wall_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// One cell of the summary table.
#[derive(Debug, Clone)]
pub struct SummaryEntry {
    pub condition: Condition,
    pub classifier: String,
    pub symbol: String,
    /// Instance-level accuracy in [0, 1].
    pub accuracy: f64,
}

/// Render the classifier-by-dataset accuracy table, one block per
/// feature space.
pub fn render_summary_table(symbols: &[String], entries: &[SummaryEntry]) -> String {
    let classifiers = ["ensemble", "knn", "tree", "svm_linear"];
    let name_width = classifiers
        .iter()
        .map(|c| c.len())
        .max()
        .unwrap_or(0)
        .max(10);
    let col_width = symbols.iter().map(|s| s.len()).max().unwrap_or(0).max(6) + 2;

    let mut out = String::from("Classification accuracy (%), instance level\n");
    for (condition, title) in [
        (Condition::Raw, "Original feature space"),
        (Condition::Llt, "Feature space transformed by linear laws"),
    ] {
        out.push('\n');
        out.push_str(title);
        out.push('\n');
        out.push_str(&format!("{:name_width$}", ""));
        for symbol in symbols {
            out.push_str(&format!("{symbol:>col_width$}"));
        }
        out.push('\n');
        for classifier in classifiers {
            out.push_str(&format!("{classifier:<name_width$}"));
            for symbol in symbols {
                let cell = entries
                    .iter()
                    .find(|e| {
                        e.condition == condition
                            && e.classifier == classifier
                            && &e.symbol == symbol
                    })
                    .map(|e| format!("{:.1}", 100.0 * e.accuracy))
                    .unwrap_or_else(|| "-".to_string());
                out.push_str(&format!("{cell:>col_width$}"));
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{ClassifierKind, KnnParams, Weighting};

    #[test]
    fn report_json_key_order_is_stable() {
        let spec = ClassifierSpec::Knn(KnnParams {
            k: 3,
            weighting: Weighting::Uniform,
        });
        let outcome = CvOutcome {
            fold_accuracies: vec![1.0, 0.5],
            row_accuracy: 0.75,
            instance_accuracy: 0.8,
            confusion: [[4, 1], [1, 4]],
            evaluated_instances: 10,
        };
        let report = EvalReport::new(&spec, &outcome, 12345, 7);
        let json = serde_json::to_string(&report).unwrap();
        let keys: Vec<&str> = json
            .split('"')
            .skip(1)
            .step_by(2)
            .take_while(|k| *k != "uniform")
            .collect();
        assert_eq!(keys[..2].to_vec(), vec!["classifier", "knn"],);
        assert!(json.starts_with(
            r#"{"classifier":"knn","params":{"k":3,"weighting":"uniform"},"fold_accuracies":"#
        ));
        assert!(json.contains(r#""confusion":[[4,1],[1,4]]"#));
        assert!(json.ends_with(r#""seed":12345,"wall_ms":7}"#));
    }

    #[test]
    fn summary_table_has_all_cells() {
        let symbols = vec!["BTC".to_string(), "ETH".to_string()];
        let mut entries = Vec::new();
        for condition in [Condition::Raw, Condition::Llt] {
            for classifier in ["ensemble", "knn", "tree", "svm_linear"] {
                for symbol in &symbols {
                    entries.push(SummaryEntry {
                        condition,
                        classifier: classifier.to_string(),
                        symbol: symbol.clone(),
                        accuracy: 0.5,
                    });
                }
            }
        }
        let table = render_summary_table(&symbols, &entries);
        assert!(table.contains("Original feature space"));
        assert!(table.contains("Feature space transformed by linear laws"));
        assert!(table.contains("svm_linear"));
        assert!(table.contains("BTC"));
        assert!(table.contains("50.0"));
        assert_eq!(
            ClassifierKind::ALL.len(),
            4,
            "table rows must cover every classifier"
        );
    }
}
