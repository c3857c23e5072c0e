//! Evaluation reports, side-by-side comparison, and JSON / markdown / CSV rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::builders::NormalizationKind;
use crate::error::{Error, Result};
use crate::metrics::SweepStep;
use crate::model::LearnerId;

/// One representation's row of results plus the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub label: String,
    pub learner_count: usize,
    pub dimensionality: usize,
    pub distinctiveness_mean: f64,
    pub distinctiveness_sd: f64,
    pub per_learner_d: BTreeMap<LearnerId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub silhouette: Option<f64>,
    pub k_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    pub pair_count: usize,
    pub tau_unique: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs_per_learner: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_sweep: Option<Vec<SweepStep>>,
}

impl EvaluationReport {
    /// Checks the value ranges every complete report satisfies.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if let Some(s) = self.silhouette {
            if !(-1.0..=1.0).contains(&s) {
                return bad(format!("silhouette {s} outside [-1, 1]"));
            }
        }
        if let Some(a) = self.auc {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("auc {a} outside [0, 1]"));
            }
        }
        if self.tau_unique.is_nan()
            || self.tau_unique < 0.0
            || self.distinctiveness_sd.is_nan()
            || self.distinctiveness_sd < 0.0
        {
            return bad("tau and distinctiveness sd must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Distinctiveness,
    Silhouette,
    Auc,
    TauUnique,
}

impl Metric {
    fn heading(self) -> &'static str {
        match self {
            Metric::Distinctiveness => "D (mean)",
            Metric::Silhouette => "S",
            Metric::Auc => "A",
            Metric::TauUnique => "τ_{k>1}",
        }
    }

    fn decimals(self) -> usize {
        match self {
            Metric::TauUnique => 4,
            _ => 3,
        }
    }
}

/// Which side of a comparison holds the larger value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Higher {
    A,
    B,
    Equal,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    /// `b - a`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub higher: Higher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub label_a: String,
    pub label_b: String,
    pub learner_count: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, metric: Metric) -> &ComparisonRow {
        self.rows
            .iter()
            .find(|r| r.metric == metric)
            .expect("every metric has a row")
    }

    /// True when `b` is strictly higher on every metric.
    pub fn b_higher_on_all(&self) -> bool {
        self.rows.iter().all(|r| r.higher == Higher::B)
    }
}

fn compare_values(metric: Metric, a: Option<f64>, b: Option<f64>) -> ComparisonRow {
    let (delta, higher) = match (a, b) {
        (Some(a), Some(b)) => {
            let higher = if b > a {
                Higher::B
            } else if a > b {
                Higher::A
            } else {
                Higher::Equal
            };
            (Some(b - a), higher)
        }
        _ => (None, Higher::Unknown),
    };
    ComparisonRow {
        metric,
        a,
        b,
        delta,
        higher,
    }
}

/// Side-by-side table of two reports over the same cohort.
pub fn compare(a: &EvaluationReport, b: &EvaluationReport) -> Result<ComparisonTable> {
    if !a.per_learner_d.keys().eq(b.per_learner_d.keys()) {
        return Err(Error::CohortMismatch);
    }
    Ok(ComparisonTable {
        label_a: a.label.clone(),
        label_b: b.label.clone(),
        learner_count: a.per_learner_d.len(),
        rows: vec![
            compare_values(
                Metric::Distinctiveness,
                Some(a.distinctiveness_mean),
                Some(b.distinctiveness_mean),
            ),
            compare_values(Metric::Silhouette, a.silhouette, b.silhouette),
            compare_values(Metric::Auc, a.auc, b.auc),
            compare_values(Metric::TauUnique, Some(a.tau_unique), Some(b.tau_unique)),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Markdown,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidConfig(format!("unknown format '{other}'"))),
        }
    }
}

/// Anything the CLI writes as a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Document {
    Batch {
        reports: Vec<EvaluationReport>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        comparison: Option<ComparisonTable>,
    },
    Comparison(ComparisonTable),
    Report(EvaluationReport),
}

impl Document {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn reports(&self) -> Vec<&EvaluationReport> {
        match self {
            Document::Batch { reports, .. } => reports.iter().collect(),
            Document::Report(r) => vec![r],
            Document::Comparison(_) => Vec::new(),
        }
    }
}

const MISSING: &str = "—";

fn fixed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:.decimals$}"))
}

fn signed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| MISSING.to_string(), |v| format!("{v:+.decimals$}"))
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render(doc: &Document, format: Format) -> String {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
            s.push('\n');
            s
        }
        Format::Markdown => render_markdown(doc),
        Format::Csv => render_csv(doc),
    }
}

fn markdown_reports(out: &mut String, reports: &[&EvaluationReport]) {
    out.push_str("| Representation | D (mean±SD) | S | A | τ_{k>1} |\n");
    out.push_str("|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            out,
            "| {} | {:.3} ± {:.3} | {} | {} | {} |",
            r.label,
            r.distinctiveness_mean,
            r.distinctiveness_sd,
            fixed(r.silhouette, 3),
            fixed(r.auc, 3),
            fixed(Some(r.tau_unique), 4),
        );
    }
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "- {}: N = {}, d = {}, k = {}, pairs = {}, seed = {}",
            r.label, r.learner_count, r.dimensionality, r.k_used, r.pair_count, r.seed
        );
        if let Some(sweep) = &r.tau_sweep {
            if let Some(last) = sweep.last() {
                let _ = writeln!(
                    out,
                    "  - τ sweep reached no unique learners at τ = {:.4} after {} steps",
                    last.tau,
                    sweep.len()
                );
            }
        }
    }
}

fn markdown_comparison(out: &mut String, table: &ComparisonTable) {
    let _ = writeln!(
        out,
        "| Metric | {} | {} | Δ (b − a) | Higher |",
        table.label_a, table.label_b
    );
    out.push_str("|---|---|---|---|---|\n");
    for row in &table.rows {
        let d = row.metric.decimals();
        let higher = match row.higher {
            Higher::A => table.label_a.as_str(),
            Higher::B => table.label_b.as_str(),
            Higher::Equal => "equal",
            Higher::Unknown => MISSING,
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            row.metric.heading(),
            fixed(row.a, d),
            fixed(row.b, d),
            signed(row.delta, d),
            higher
        );
    }
}

fn render_markdown(doc: &Document) -> String {
    let mut out = String::new();
    match doc {
        Document::Report(r) => markdown_reports(&mut out, &[r]),
        Document::Batch {
            reports,
            comparison,
        } => {
            markdown_reports(&mut out, &reports.iter().collect::<Vec<_>>());
            if let Some(table) = comparison {
                out.push('\n');
                markdown_comparison(&mut out, table);
            }
        }
        Document::Comparison(table) => markdown_comparison(&mut out, table),
    }
    out
}

fn render_csv(doc: &Document) -> String {
    let mut out = String::new();
    match doc {
        Document::Comparison(table) => {
            out.push_str("metric,a,b,delta,higher\n");
            for row in &table.rows {
                let higher = match row.higher {
                    Higher::A => "a",
                    Higher::B => "b",
                    Higher::Equal => "equal",
                    Higher::Unknown => "",
                };
                let metric = serde_json::to_value(row.metric).expect("metric serializes");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    metric.as_str().unwrap_or_default(),
                    csv_cell(row.a),
                    csv_cell(row.b),
                    csv_cell(row.delta),
                    higher
                );
            }
        }
        _ => {
            out.push_str(
                "label,learner_count,dimensionality,d_mean,d_sd,silhouette,k,auc,pair_count,tau_unique,seed\n",
            );
            for r in doc.reports() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.label,
                    r.learner_count,
                    r.dimensionality,
                    r.distinctiveness_mean,
                    r.distinctiveness_sd,
                    csv_cell(r.silhouette),
                    r.k_used,
                    csv_cell(r.auc),
                    r.pair_count,
                    r.tau_unique,
                    r.seed
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(label: &str, d: (f64, f64), s: f64, a: f64, tau: f64) -> EvaluationReport {
        let per_learner_d = ["x", "y", "z"]
            .iter()
            .map(|id| (LearnerId::new(*id).unwrap(), d.0))
            .collect();
        EvaluationReport {
            label: label.into(),
            learner_count: 3,
            dimensionality: 45,
            distinctiveness_mean: d.0,
            distinctiveness_sd: d.1,
            per_learner_d,
            silhouette: Some(s),
            k_used: 4,
            auc: Some(a),
            pair_count: 100,
            tau_unique: tau,
            seed: 7,
            normalization: None,
            pairs_per_learner: None,
            n_init: None,
            max_iter: None,
            tau_sweep: None,
        }
    }

    fn table_rows() -> (EvaluationReport, EvaluationReport) {
        (
            report("Interaction-level", (0.812, 0.041), 0.118, 0.604, 0.0725),
            report("Learner-level", (1.25, 0.087), 0.4125, 0.9, 0.3125),
        )
    }

    #[test]
    fn markdown_row_format() {
        let (_, learner) = table_rows();
        let md = render(&Document::Report(learner), Format::Markdown);
        assert!(md.contains("| Learner-level | 1.250 ± 0.087 | 0.412 | 0.900 | 0.3125 |"));
    }

    #[test]
    fn missing_values() {
        let (mut r, _) = table_rows();
        r.auc = None;
        r.silhouette = None;
        let json = render(&Document::Report(r.clone()), Format::Json);
        assert!(!json.contains("\"auc\""));
        assert!(!json.contains("\"silhouette\""));
        let md = render(&Document::Report(r), Format::Markdown);
        assert!(md.contains("| Interaction-level | 0.812 ± 0.041 | — | — | 0.0725 |"));
    }

    #[test]
    fn json_round_trip_is_byte_identical() {
        let (a, mut b) = table_rows();
        b.tau_sweep = Some(vec![SweepStep {
            tau: 0.1 + 0.2,
            unique_learners: 3,
        }]);
        b.normalization = Some(NormalizationKind::MinMaxPerDimension);
        let comparison = compare(&a, &b).unwrap();
        for doc in [
            Document::Report(a.clone()),
            Document::Batch {
                reports: vec![a.clone(), b.clone()],
                comparison: Some(comparison.clone()),
            },
            Document::Comparison(comparison),
        ] {
            let first = render(&doc, Format::Json);
            let parsed = Document::from_json(&first).unwrap();
            assert_eq!(parsed, doc);
            assert_eq!(render(&parsed, Format::Json), first);
        }
    }

    #[test]
    fn learner_level_row_wins_everywhere() {
        let (interaction, learner) = table_rows();
        let table = compare(&interaction, &learner).unwrap();
        assert!(table.b_higher_on_all());
        let md = render(&Document::Comparison(table.clone()), Format::Markdown);
        assert!(md.contains("| τ_{k>1} | 0.0725 | 0.3125 | +0.2400 | Learner-level |"));
        let csv = render(&Document::Comparison(table), Format::Csv);
        assert!(csv.lines().skip(1).all(|l| l.ends_with(",b")));
    }

    #[test]
    fn self_comparison_is_flat() {
        let (a, _) = table_rows();
        let table = compare(&a, &a).unwrap();
        assert!(table
            .rows
            .iter()
            .all(|r| r.delta == Some(0.0) && r.higher == Higher::Equal));
    }

    #[test]
    fn cohort_mismatch() {
        let (a, mut b) = table_rows();
        b.per_learner_d.insert(LearnerId::new("w").unwrap(), 1.0);
        assert!(matches!(compare(&a, &b), Err(Error::CohortMismatch)));
    }

    #[test]
    fn csv_report() {
        let (a, _) = table_rows();
        let csv = render(&Document::Report(a), Format::Csv);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "Interaction-level,3,45,0.812,0.041,0.118,4,0.604,100,0.0725,7"
        );
    }

    #[test]
    fn range_checks() {
        let (mut a, _) = table_rows();
        assert!(a.check().is_ok());
        a.auc = Some(1.5);
        assert!(a.check().is_err());
    }
}
