//! Domain types shared by every stage of the evaluation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque learner identifier. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LearnerId(String);

impl LearnerId {
    pub fn new(value: impl Into<String>) -> Result<Self> {
        let value = value.into();
        if value.is_empty() {
            return Err(Error::EmptyId);
        }
        Ok(LearnerId(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for LearnerId {
    type Error = Error;

    fn try_from(value: String) -> Result<Self> {
        LearnerId::new(value)
    }
}

impl From<LearnerId> for String {
    fn from(id: LearnerId) -> String {
        id.0
    }
}

impl fmt::Display for LearnerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One learner event from an interaction log.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionRecord {
    pub learner: LearnerId,
    pub timestamp: DateTime<Utc>,
    /// Question embedding.
    pub embedding: Vec<f64>,
    /// Named numeric signals, e.g. an instructional-need score.
    pub signals: BTreeMap<String, f64>,
    pub recommendation_embedding: Option<Vec<f64>>,
}

/// Aligned learner ids and an `N x d` matrix of finite values.
///
/// Construction validates every invariant, so a value of this type can be fed to
/// any metric without further checks.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSet {
    ids: Vec<LearnerId>,
    values: Vec<f64>,
    dim: usize,
    label: String,
}

impl RepresentationSet {
    /// Builds a set from one row per learner.
    pub fn new(ids: Vec<LearnerId>, rows: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        if ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: ids.len(),
                found: rows.len(),
                context: Some("row count vs id count".into()),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(dim * rows.len());
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                    context: Some(format!("row {r}")),
                });
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(ids, values, dim, label)
    }

    /// Builds a set from a row-major buffer of `ids.len() * dim` values.
    pub fn from_flat(
        ids: Vec<LearnerId>,
        values: Vec<f64>,
        dim: usize,
        label: impl Into<String>,
    ) -> Result<Self> {
        let set = RepresentationSet {
            ids,
            values,
            dim,
            label: label.into(),
        };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        let n = self.ids.len();
        if n < 2 {
            return Err(Error::CohortTooSmall { n });
        }
        if self.dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
                context: Some("dimensionality must be positive".into()),
            });
        }
        if self.values.len() != n * self.dim {
            return Err(Error::DimensionMismatch {
                expected: n * self.dim,
                found: self.values.len(),
                context: Some("matrix size".into()),
            });
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / self.dim,
                column: pos % self.dim,
            });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &self.ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.to_string()));
            }
        }
        Ok(())
    }

    /// Re-checks every invariant and hands the set back unchanged.
    pub fn validate(self) -> Result<Self> {
        self.check()?;
        Ok(self)
    }

    pub fn ids(&self) -> &[LearnerId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major view of the whole matrix.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Replaces the matrix, keeping ids and label.
    pub(crate) fn map_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.ids.clone(), values, self.dim, self.label.clone())
    }
}

/// Free-function form of [`RepresentationSet::validate`].
pub fn validate_representation_set(set: RepresentationSet) -> Result<RepresentationSet> {
    set.validate()
}

/// Embedding source a projection block reads from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingSource {
    Question,
    Recommendation,
}

impl EmbeddingSource {
    pub fn field_name(self) -> &'static str {
        match self {
            EmbeddingSource::Question => "embedding",
            EmbeddingSource::Recommendation => "recommendation_embedding",
        }
    }
}

/// Width of the signal and temporal summary blocks.
pub const STATS_BLOCK_WIDTH: usize = 5;

/// One block of a learner signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureBlock {
    /// `(mean, sd, min, max, last)` of one named signal.
    SignalStats { signal: String },
    /// `(count, span days, mean gap hours, sd gap hours, first-half fraction)`.
    TemporalStats,
    /// Seeded random projection of the mean embedding.
    EmbeddingProjection {
        source: EmbeddingSource,
        target_dim: usize,
        seed: u64,
    },
}

impl FeatureBlock {
    pub fn width(&self) -> usize {
        match self {
            FeatureBlock::SignalStats { .. } | FeatureBlock::TemporalStats => STATS_BLOCK_WIDTH,
            FeatureBlock::EmbeddingProjection { target_dim, .. } => *target_dim,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FeatureBlock::SignalStats { signal } => format!("signal_stats({signal})"),
            FeatureBlock::TemporalStats => "temporal_stats".to_string(),
            FeatureBlock::EmbeddingProjection {
                source,
                target_dim,
                seed,
            } => format!(
                "embedding_projection({}, {target_dim}, seed={seed})",
                source.field_name()
            ),
        }
    }
}

/// Declarative recipe turning an interaction history into a learner-level vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SchemaDoc", into = "SchemaDoc")]
pub struct SignatureSchema {
    blocks: Vec<FeatureBlock>,
    dimensionality: usize,
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    dimensionality: usize,
    blocks: Vec<FeatureBlock>,
}

impl TryFrom<SchemaDoc> for SignatureSchema {
    type Error = Error;

    fn try_from(doc: SchemaDoc) -> Result<Self> {
        SignatureSchema::new(doc.blocks, doc.dimensionality)
    }
}

impl From<SignatureSchema> for SchemaDoc {
    fn from(schema: SignatureSchema) -> SchemaDoc {
        SchemaDoc {
            dimensionality: schema.dimensionality,
            blocks: schema.blocks,
        }
    }
}

impl SignatureSchema {
    pub fn new(blocks: Vec<FeatureBlock>, dimensionality: usize) -> Result<Self> {
        for block in &blocks {
            if let FeatureBlock::EmbeddingProjection { target_dim: 0, .. } = block {
                return Err(Error::InvalidConfig(format!(
                    "{} has zero target dimensionality",
                    block.name()
                )));
            }
        }
        let actual: usize = blocks.iter().map(FeatureBlock::width).sum();
        if actual != dimensionality || actual == 0 {
            return Err(Error::SchemaDimension {
                declared: dimensionality,
                actual,
            });
        }
        Ok(SignatureSchema {
            blocks,
            dimensionality,
        })
    }

    /// Schema with the declared width set to the sum of block widths.
    pub fn from_blocks(blocks: Vec<FeatureBlock>) -> Result<Self> {
        let width = blocks.iter().map(FeatureBlock::width).sum();
        Self::new(blocks, width)
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn dimensionality(&self) -> usize {
        self.dimensionality
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }
}
