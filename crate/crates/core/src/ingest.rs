//! Interaction-log (JSONL) and vector-set (CSV) readers, plus cohort filtering.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Read, Write};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    EmbeddingSource, FeatureBlock, InteractionRecord, LearnerId, RepresentationSet, SignatureSchema,
};

#[derive(Deserialize)]
struct RawLine {
    learner_id: Option<String>,
    timestamp: Option<String>,
    embedding: Option<Vec<f64>>,
    signals: Option<BTreeMap<String, f64>>,
    recommendation_embedding: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct OutLine<'a> {
    learner_id: &'a str,
    timestamp: String,
    embedding: &'a [f64],
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    signals: &'a BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    recommendation_embedding: Option<&'a [f64]>,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn missing(field: &str, line: usize) -> Error {
    Error::MissingField {
        field: field.to_string(),
        line,
    }
}

fn check_vector(v: &[f64], field: &str, line: usize) -> Result<()> {
    if v.is_empty() {
        return Err(parse_error(
            line,
            format!("'{field}' must be a non-empty array"),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(parse_error(
            line,
            format!("'{field}' contains a non-finite value"),
        ));
    }
    Ok(())
}

/// Reads one JSON object per line. Blank lines are skipped and unknown fields ignored.
pub fn parse_interactions<R: BufRead>(source: R) -> Result<Vec<InteractionRecord>> {
    let mut records = Vec::new();
    let mut embedding_dim: Option<usize> = None;
    let mut rec_dim: Option<usize> = None;

    for (idx, line) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_error(line_no, e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let raw: RawLine =
            serde_json::from_str(trimmed).map_err(|e| parse_error(line_no, e.to_string()))?;

        let learner = raw
            .learner_id
            .ok_or_else(|| missing("learner_id", line_no))?;
        let learner =
            LearnerId::new(learner).map_err(|_| parse_error(line_no, "empty learner_id"))?;
        let timestamp = raw.timestamp.ok_or_else(|| missing("timestamp", line_no))?;
        let timestamp = DateTime::parse_from_rfc3339(&timestamp)
            .map_err(|e| parse_error(line_no, format!("bad timestamp '{timestamp}': {e}")))?
            .with_timezone(&Utc);
        let embedding = raw.embedding.ok_or_else(|| missing("embedding", line_no))?;
        check_vector(&embedding, "embedding", line_no)?;
        let expected = *embedding_dim.get_or_insert(embedding.len());
        if embedding.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: embedding.len(),
                context: Some(format!("embedding at line {line_no}")),
            });
        }
        if let Some(rec) = &raw.recommendation_embedding {
            check_vector(rec, "recommendation_embedding", line_no)?;
            let expected = *rec_dim.get_or_insert(rec.len());
            if rec.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    found: rec.len(),
                    context: Some(format!("recommendation_embedding at line {line_no}")),
                });
            }
        }
        let signals = raw.signals.unwrap_or_default();
        if let Some((name, _)) = signals.iter().find(|(_, v)| !v.is_finite()) {
            return Err(parse_error(
                line_no,
                format!("signal '{name}' is not finite"),
            ));
        }

        records.push(InteractionRecord {
            learner,
            timestamp,
            embedding,
            signals,
            recommendation_embedding: raw.recommendation_embedding,
        });
    }
    Ok(records)
}

/// Writes records in the format [`parse_interactions`] reads.
pub fn write_interactions<W: Write>(records: &[InteractionRecord], mut out: W) -> Result<()> {
    for record in records {
        let line = OutLine {
            learner_id: record.learner.as_str(),
            timestamp: record
                .timestamp
                .to_rfc3339_opts(SecondsFormat::AutoSi, true),
            embedding: &record.embedding,
            signals: &record.signals,
            recommendation_embedding: record.recommendation_embedding.as_deref(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `learner_id,f0,...,f{d-1}` CSV into a representation set.
pub fn load_representation_set<R: Read>(
    source: R,
    label: impl Into<String>,
) -> Result<RepresentationSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("learner_id") || header.len() < 2 {
        return Err(parse_error(
            1,
            "header must be learner_id followed by at least one feature column",
        ));
    }
    let dim = header.len() - 1;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (r, row) in reader.records().enumerate() {
        let line = r + 2;
        let row = row?;
        if row.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: row.len().saturating_sub(1),
                context: Some(format!("line {line}")),
            });
        }
        let id = LearnerId::new(&row[0]).map_err(|_| parse_error(line, "empty learner_id"))?;
        for (c, cell) in row.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_error(line, format!("'{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue { row: r, column: c });
            }
            values.push(v);
        }
        ids.push(id);
    }
    RepresentationSet::from_flat(ids, values, dim, label)
}

/// Writes a set in the CSV layout [`load_representation_set`] reads.
pub fn write_representation_set<W: Write>(set: &RepresentationSet, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let mut header = vec!["learner_id".to_string()];
    header.extend((0..set.dim()).map(|c| format!("f{c}")));
    writer.write_record(&header)?;
    for (id, row) in set.ids().iter().zip(set.rows()) {
        let mut cells = vec![id.to_string()];
        cells.extend(row.iter().map(f64::to_string));
        writer.write_record(&cells)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum ExclusionReason {
    TooFewInteractions { count: usize, min: usize },
    MissingField { block: String, field: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exclusion {
    pub learner: LearnerId,
    #[serde(flatten)]
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSummary {
    pub learner_count: usize,
    pub interaction_count: usize,
    pub per_learner_counts: BTreeMap<LearnerId, usize>,
    pub embedding_dim: usize,
    pub excluded_learners: Vec<Exclusion>,
}

/// Drops learners with fewer than `min_interactions` records. Record order is kept.
pub fn filter_cohort(
    records: Vec<InteractionRecord>,
    min_interactions: usize,
) -> Result<(Vec<InteractionRecord>, CohortSummary)> {
    filter_with(records, min_interactions, None)
}

/// Like [`filter_cohort`], and also drops learners whose records lack a field the
/// schema reads.
pub fn filter_complete(
    records: Vec<InteractionRecord>,
    min_interactions: usize,
    schema: &SignatureSchema,
) -> Result<(Vec<InteractionRecord>, CohortSummary)> {
    filter_with(records, min_interactions, Some(schema))
}

/// First schema requirement the record fails, as `(block, field)`.
pub(crate) fn missing_schema_field(
    record: &InteractionRecord,
    schema: &SignatureSchema,
) -> Option<(String, String)> {
    schema.blocks().iter().find_map(|block| match block {
        FeatureBlock::SignalStats { signal } if !record.signals.contains_key(signal) => {
            Some((block.name(), signal.clone()))
        }
        FeatureBlock::EmbeddingProjection {
            source: EmbeddingSource::Recommendation,
            ..
        } if record.recommendation_embedding.is_none() => Some((
            block.name(),
            EmbeddingSource::Recommendation.field_name().to_string(),
        )),
        _ => None,
    })
}

fn filter_with(
    records: Vec<InteractionRecord>,
    min_interactions: usize,
    schema: Option<&SignatureSchema>,
) -> Result<(Vec<InteractionRecord>, CohortSummary)> {
    if min_interactions == 0 {
        return Err(Error::InvalidConfig("min_interactions must be >= 1".into()));
    }
    let mut order: Vec<LearnerId> = Vec::new();
    let mut counts: HashMap<&LearnerId, usize> = HashMap::new();
    let mut missing_fields: HashMap<&LearnerId, (String, String)> = HashMap::new();
    for record in &records {
        let count = counts.entry(&record.learner).or_insert_with(|| {
            order.push(record.learner.clone());
            0
        });
        *count += 1;
        if let Some(schema) = schema {
            if !missing_fields.contains_key(&record.learner) {
                if let Some(miss) = missing_schema_field(record, schema) {
                    missing_fields.insert(&record.learner, miss);
                }
            }
        }
    }

    let mut excluded = Vec::new();
    let mut keep: HashMap<LearnerId, usize> = HashMap::new();
    for id in &order {
        let count = counts[id];
        if count < min_interactions {
            excluded.push(Exclusion {
                learner: id.clone(),
                reason: ExclusionReason::TooFewInteractions {
                    count,
                    min: min_interactions,
                },
            });
        } else if let Some((block, field)) = missing_fields.get(id) {
            excluded.push(Exclusion {
                learner: id.clone(),
                reason: ExclusionReason::MissingField {
                    block: block.clone(),
                    field: field.clone(),
                },
            });
        } else {
            keep.insert(id.clone(), count);
        }
    }
    drop(counts);
    drop(missing_fields);

    if keep.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let kept: Vec<InteractionRecord> = records
        .into_iter()
        .filter(|r| keep.contains_key(&r.learner))
        .collect();
    let summary = CohortSummary {
        learner_count: keep.len(),
        interaction_count: kept.len(),
        embedding_dim: kept[0].embedding.len(),
        per_learner_counts: keep.into_iter().collect(),
        excluded_learners: excluded,
    };
    Ok((kept, summary))
}
