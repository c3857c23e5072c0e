//! Learner-level signatures built from a schema of feature blocks.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use crate::builders::projection::ProjectionMatrix;
use crate::error::{Error, Result};
use crate::ingest::missing_schema_field;
use crate::model::{EmbeddingSource, FeatureBlock, InteractionRecord, LearnerId, SignatureSchema};

const SECONDS_PER_HOUR: f64 = 3600.0;
const SECONDS_PER_DAY: f64 = 86_400.0;

/// Four categories totalling 45 dimensions: need-score summary, temporal
/// pattern, recommendation embedding and question embedding.
pub fn default_signature_schema(embedding_dim: usize, rec_embedding_dim: usize) -> SignatureSchema {
    assert!(
        embedding_dim >= 1 && rec_embedding_dim >= 1,
        "embedding dimensionalities must be positive"
    );
    SignatureSchema::new(
        vec![
            FeatureBlock::SignalStats {
                signal: "need".to_string(),
            },
            FeatureBlock::TemporalStats,
            FeatureBlock::EmbeddingProjection {
                source: EmbeddingSource::Recommendation,
                target_dim: 16,
                seed: 1,
            },
            FeatureBlock::EmbeddingProjection {
                source: EmbeddingSource::Question,
                target_dim: 19,
                seed: 2,
            },
        ],
        45,
    )
    .expect("default schema widths sum to 45")
}

/// Builds signatures for one schema, caching projection matrices across calls.
pub struct SignatureBuilder<'s> {
    schema: &'s SignatureSchema,
    projections: HashMap<(u64, usize, usize), ProjectionMatrix>,
}

impl<'s> SignatureBuilder<'s> {
    pub fn new(schema: &'s SignatureSchema) -> Self {
        SignatureBuilder {
            schema,
            projections: HashMap::new(),
        }
    }

    pub fn schema(&self) -> &SignatureSchema {
        self.schema
    }

    /// Signature of a history already in timestamp order.
    pub fn build_sorted(&mut self, history: &[&InteractionRecord]) -> Result<Vec<f64>> {
        if history.is_empty() {
            return Err(Error::NoRecordsForLearner(String::new()));
        }
        for record in history {
            if let Some((block, field)) = missing_schema_field(record, self.schema) {
                return Err(Error::SchemaFieldMissing { block, field });
            }
        }
        let mut out = Vec::with_capacity(self.schema.dimensionality());
        for block in self.schema.blocks() {
            match block {
                FeatureBlock::SignalStats { signal } => {
                    let values: Vec<f64> = history.iter().map(|r| r.signals[signal]).collect();
                    out.extend(summary_stats(&values));
                }
                FeatureBlock::TemporalStats => out.extend(temporal_stats(history)),
                FeatureBlock::EmbeddingProjection {
                    source,
                    target_dim,
                    seed,
                } => {
                    let mean = mean_of(history.iter().map(|r| source_vector(r, *source)))?;
                    let key = (*seed, mean.len(), *target_dim);
                    let matrix = match self.projections.entry(key) {
                        Entry::Occupied(e) => e.into_mut(),
                        Entry::Vacant(e) => {
                            e.insert(ProjectionMatrix::new(mean.len(), *target_dim, *seed)?)
                        }
                    };
                    out.extend(matrix.apply(&mean)?);
                }
            }
        }
        debug_assert_eq!(out.len(), self.schema.dimensionality());
        Ok(out)
    }

    /// Full-history signature of an arbitrary-order history.
    pub fn build(&mut self, history: &[&InteractionRecord]) -> Result<Vec<f64>> {
        self.build_sorted(&sort_by_time(history))
    }

    /// One signature per interaction, each from the history up to and including it.
    pub fn prefixes(&mut self, history: &[&InteractionRecord]) -> Result<Vec<Vec<f64>>> {
        let sorted = sort_by_time(history);
        (1..=sorted.len())
            .map(|t| self.build_sorted(&sorted[..t]))
            .collect()
    }
}

fn source_vector(record: &InteractionRecord, source: EmbeddingSource) -> &[f64] {
    match source {
        EmbeddingSource::Question => &record.embedding,
        EmbeddingSource::Recommendation => record
            .recommendation_embedding
            .as_deref()
            .expect("presence checked before building"),
    }
}

/// Stable sort on timestamp; ties keep input order.
pub(crate) fn sort_by_time<'a>(history: &[&'a InteractionRecord]) -> Vec<&'a InteractionRecord> {
    let mut sorted = history.to_vec();
    sorted.sort_by_key(|r| r.timestamp);
    sorted
}

/// Component-wise mean; all vectors must share a length.
pub(crate) fn mean_of<'a>(vectors: impl Iterator<Item = &'a [f64]>) -> Result<Vec<f64>> {
    let mut sum: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for v in vectors {
        if count == 0 {
            sum = v.to_vec();
        } else {
            if v.len() != sum.len() {
                return Err(Error::dims(sum.len(), v.len()));
            }
            sum.iter_mut().zip(v).for_each(|(s, x)| *s += x);
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyVector);
    }
    let n = count as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(sum)
}

/// `(mean, population sd, min, max, last)`.
fn summary_stats(values: &[f64]) -> [f64; 5] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    [mean, var.sqrt(), min, max, values[values.len() - 1]]
}

/// `(count, span days, mean gap hours, sd gap hours, fraction in first half of span)`.
fn temporal_stats(sorted: &[&InteractionRecord]) -> [f64; 5] {
    let t0 = sorted[0].timestamp;
    let offsets: Vec<f64> = sorted
        .iter()
        .map(|r| {
            let d = r.timestamp - t0;
            d.num_seconds() as f64 + f64::from(d.subsec_nanos()) * 1e-9
        })
        .collect();
    let span = offsets[offsets.len() - 1];
    let count = sorted.len() as f64;
    let (gap_mean, gap_sd) = if sorted.len() < 2 {
        (0.0, 0.0)
    } else {
        let gaps: Vec<f64> = offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) / SECONDS_PER_HOUR)
            .collect();
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    let half = span / 2.0;
    let early = offsets.iter().filter(|&&o| o <= half).count() as f64;
    [
        count,
        span / SECONDS_PER_DAY,
        gap_mean,
        gap_sd,
        early / count,
    ]
}

/// Records of one learner, in input order.
pub(crate) fn learner_history<'a>(
    records: &'a [InteractionRecord],
    learner: &LearnerId,
) -> Result<Vec<&'a InteractionRecord>> {
    let history: Vec<_> = records.iter().filter(|r| &r.learner == learner).collect();
    if history.is_empty() {
        return Err(Error::NoRecordsForLearner(learner.to_string()));
    }
    Ok(history)
}

/// Mean question embedding of one learner.
pub fn build_interaction_mean(
    records: &[InteractionRecord],
    learner: &LearnerId,
) -> Result<Vec<f64>> {
    let history = learner_history(records, learner)?;
    mean_of(history.iter().map(|r| r.embedding.as_slice()))
}

pub fn build_learner_signature(
    records: &[InteractionRecord],
    learner: &LearnerId,
    schema: &SignatureSchema,
) -> Result<Vec<f64>> {
    let history = learner_history(records, learner)?;
    SignatureBuilder::new(schema).build(&history)
}

pub fn prefix_instantiations(
    records: &[InteractionRecord],
    learner: &LearnerId,
    schema: &SignatureSchema,
) -> Result<Vec<Vec<f64>>> {
    let history = learner_history(records, learner)?;
    SignatureBuilder::new(schema).prefixes(&history)
}
