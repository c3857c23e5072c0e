//! End-to-end evaluation of one or both representations over a cohort.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::builders::signature::mean_of;
use crate::builders::{
    default_signature_schema, MinMaxScaler, NormalizationKind, SignatureBuilder,
};
use crate::clustering::{self, Partition, DEFAULT_MAX_ITER, DEFAULT_N_INIT};
use crate::error::{Error, Result};
use crate::ingest::{filter_cohort, filter_complete, CohortSummary};
use crate::metrics::{self, DistanceMatrix};
use crate::model::{InteractionRecord, LearnerId, RepresentationSet, SignatureSchema};
use crate::report::{compare, ComparisonTable, Document, EvaluationReport};
use crate::verification::{
    build_pairs, InstanceSet, LabeledPairSet, PairSamplingConfig, PairsPerLearner,
};

pub const INTERACTION_LABEL: &str = "interaction-level";
pub const LEARNER_LABEL: &str = "learner-level";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationKind {
    Interaction,
    Learner,
    #[default]
    Both,
}

impl std::str::FromStr for RepresentationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "interaction" => Ok(RepresentationKind::Interaction),
            "learner" => Ok(RepresentationKind::Learner),
            "both" => Ok(RepresentationKind::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown representation '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub representation: RepresentationKind,
    /// Signature schema; the default 45-wide schema when absent.
    pub schema: Option<SignatureSchema>,
    /// Overrides the per-representation default (none for interaction, min-max for learner).
    pub normalization: Option<NormalizationKind>,
    /// Overrides the cohort-size rule for k.
    pub k: Option<usize>,
    pub seed: u64,
    pub pairs: PairsPerLearner,
    pub min_interactions: usize,
    pub tau_sweep: Option<f64>,
    pub n_init: usize,
    pub max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            representation: RepresentationKind::Both,
            schema: None,
            normalization: None,
            k: None,
            seed: 0,
            pairs: PairsPerLearner::All,
            min_interactions: 2,
            tau_sweep: None,
            n_init: DEFAULT_N_INIT,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Everything one representation's evaluation produced.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvaluationReport,
    pub distances: DistanceMatrix,
    pub partition: Partition,
    /// Scored verification pairs and the instances they index.
    pub pairs: Option<(LabeledPairSet, InstanceSet)>,
}

/// Representation set plus per-learner instances, ready to evaluate.
#[derive(Debug, Clone)]
pub struct PreparedInputs {
    pub set: RepresentationSet,
    pub instances: InstanceSet,
    pub normalization: NormalizationKind,
}

/// Records grouped by learner in first-appearance order, input order kept within a learner.
pub fn group_by_learner(
    records: &[InteractionRecord],
) -> Vec<(LearnerId, Vec<&InteractionRecord>)> {
    let mut index: HashMap<&LearnerId, usize> = HashMap::new();
    let mut groups: Vec<(LearnerId, Vec<&InteractionRecord>)> = Vec::new();
    for record in records {
        let slot = *index.entry(&record.learner).or_insert_with(|| {
            groups.push((record.learner.clone(), Vec::new()));
            groups.len() - 1
        });
        groups[slot].1.push(record);
    }
    groups
}

/// The default schema sized for this cohort's embeddings.
pub fn cohort_schema(records: &[InteractionRecord]) -> Result<SignatureSchema> {
    let first = records.first().ok_or(Error::EmptyCohort)?;
    let rec_dim = records
        .iter()
        .find_map(|r| r.recommendation_embedding.as_ref().map(Vec::len))
        .unwrap_or(first.embedding.len());
    Ok(default_signature_schema(first.embedding.len(), rec_dim))
}

/// Fits min-max on the set and maps the instances through the same transform.
fn scale_inputs(
    set: RepresentationSet,
    instances: InstanceSet,
    kind: NormalizationKind,
) -> Result<PreparedInputs> {
    let (set, instances) = match kind {
        NormalizationKind::None => (set, instances),
        NormalizationKind::MinMaxPerDimension => {
            let scaler = MinMaxScaler::fit(set.rows());
            let values = set.rows().flat_map(|r| scaler.transform(r)).collect();
            let scaled = set.map_values(values)?;
            (scaled, instances.map(|v| scaler.transform(v))?)
        }
    };
    Ok(PreparedInputs {
        set,
        instances,
        normalization: kind,
    })
}

/// Mean question embedding per learner; instances are the individual question embeddings.
pub fn interaction_inputs(
    records: &[InteractionRecord],
    normalization: NormalizationKind,
) -> Result<PreparedInputs> {
    let groups = group_by_learner(records);
    let mut ids = Vec::with_capacity(groups.len());
    let mut rows = Vec::with_capacity(groups.len());
    let mut entries = Vec::with_capacity(groups.len());
    for (id, history) in groups {
        rows.push(mean_of(history.iter().map(|r| r.embedding.as_slice()))?);
        entries.push((
            id.clone(),
            history.iter().map(|r| r.embedding.clone()).collect(),
        ));
        ids.push(id);
    }
    let set = RepresentationSet::new(ids, rows, INTERACTION_LABEL)?;
    scale_inputs(set, InstanceSet::new(entries)?, normalization)
}

/// Full-history signature per learner; instances are the prefix signatures.
pub fn learner_inputs(
    records: &[InteractionRecord],
    schema: &SignatureSchema,
    normalization: NormalizationKind,
) -> Result<PreparedInputs> {
    let groups = group_by_learner(records);
    let mut builder = SignatureBuilder::new(schema);
    let mut ids = Vec::with_capacity(groups.len());
    let mut rows = Vec::with_capacity(groups.len());
    let mut entries = Vec::with_capacity(groups.len());
    for (id, history) in groups {
        let mut prefixes = builder.prefixes(&history)?;
        rows.push(prefixes.last().cloned().expect("history is non-empty"));
        prefixes.shrink_to_fit();
        entries.push((id.clone(), prefixes));
        ids.push(id);
    }
    let set = RepresentationSet::new(ids, rows, LEARNER_LABEL)?;
    scale_inputs(set, InstanceSet::new(entries)?, normalization)
}

/// All four metrics over one representation set.
pub fn evaluate(
    set: &RepresentationSet,
    instances: Option<&InstanceSet>,
    config: &RunConfig,
) -> Result<Evaluation> {
    set.clone().validate()?;
    let distances = metrics::pairwise_distance_matrix(set)?;
    let d = metrics::distinctiveness_from(&distances)?;
    let tau_unique = metrics::uniqueness_threshold(&distances)?;
    let tau_sweep = config
        .tau_sweep
        .map(|step| metrics::tau_sweep(&distances, step))
        .transpose()?;

    let k = match config.k {
        Some(k) => k,
        None => clustering::choose_k(set.len())?,
    };
    let partition = clustering::kmeans(set, k, config.seed, config.max_iter, config.n_init)?;
    let silhouette = clustering::silhouette(set, &partition)?;

    let pairs = match instances {
        Some(instances) => {
            if instances.learners() != set.ids() {
                return Err(Error::CohortMismatch);
            }
            let mut pairs = build_pairs(
                instances,
                PairSamplingConfig {
                    pairs_per_learner: config.pairs,
                    seed: config.seed,
                },
            )?;
            pairs.score(instances)?;
            Some((pairs, instances.clone()))
        }
        None => None,
    };
    let auc = pairs.as_ref().map(|(p, _)| p.auc()).transpose()?;

    let report = EvaluationReport {
        label: set.label().to_string(),
        learner_count: set.len(),
        dimensionality: set.dim(),
        distinctiveness_mean: d.mean,
        distinctiveness_sd: d.sd,
        per_learner_d: d.by_id(set.ids()),
        silhouette: Some(silhouette),
        k_used: k,
        auc,
        pair_count: pairs.as_ref().map_or(0, |(p, _)| p.pairs.len()),
        tau_unique,
        seed: config.seed,
        normalization: None,
        pairs_per_learner: instances.map(|_| config.pairs.to_string()),
        n_init: Some(config.n_init),
        max_iter: Some(config.max_iter),
        tau_sweep,
    };
    Ok(Evaluation {
        report,
        distances,
        partition,
        pairs,
    })
}

fn evaluate_prepared(inputs: &PreparedInputs, config: &RunConfig) -> Result<Evaluation> {
    let mut eval = evaluate(&inputs.set, Some(&inputs.instances), config)?;
    eval.report.normalization = Some(inputs.normalization);
    Ok(eval)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: CohortSummary,
    pub evaluations: Vec<Evaluation>,
    /// Interaction-level as `a`, learner-level as `b`, when both ran.
    pub comparison: Option<ComparisonTable>,
}

impl RunOutput {
    pub fn document(&self) -> Document {
        match (&self.evaluations[..], &self.comparison) {
            ([single], None) => Document::Report(single.report.clone()),
            (evals, comparison) => Document::Batch {
                reports: evals.iter().map(|e| e.report.clone()).collect(),
                comparison: comparison.clone(),
            },
        }
    }
}

/// Filters the cohort, builds the requested representations and evaluates them.
///
/// The learner-level schema also filters the cohort in `Both` mode, so the two
/// evaluations always cover the same learners.
pub fn run(records: Vec<InteractionRecord>, config: &RunConfig) -> Result<RunOutput> {
    let needs_schema = config.representation != RepresentationKind::Interaction;
    let schema = match (&config.schema, needs_schema) {
        (Some(s), true) => Some(s.clone()),
        (None, true) => Some(cohort_schema(&records)?),
        (_, false) => None,
    };
    let (records, summary) = match &schema {
        Some(schema) => filter_complete(records, config.min_interactions, schema)?,
        None => filter_cohort(records, config.min_interactions)?,
    };
    if summary.learner_count < 2 {
        return Err(Error::CohortTooSmall {
            n: summary.learner_count,
        });
    }

    let interaction = || {
        let kind = config.normalization.unwrap_or(NormalizationKind::None);
        evaluate_prepared(&interaction_inputs(&records, kind)?, config)
    };
    let learner = |schema: &SignatureSchema| {
        let kind = config
            .normalization
            .unwrap_or(NormalizationKind::MinMaxPerDimension);
        evaluate_prepared(&learner_inputs(&records, schema, kind)?, config)
    };

    let evaluations = match (config.representation, &schema) {
        (RepresentationKind::Interaction, _) => vec![interaction()?],
        (RepresentationKind::Learner, Some(schema)) => vec![learner(schema)?],
        (RepresentationKind::Both, Some(schema)) => {
            let (a, b) = std::thread::scope(|scope| {
                let handle = scope.spawn(|| learner(schema));
                let a = interaction();
                (a, handle.join().expect("learner-level evaluation panicked"))
            });
            vec![a?, b?]
        }
        (_, None) => unreachable!("schema is resolved for learner-level runs"),
    };
    let comparison = match &evaluations[..] {
        [a, b] => Some(compare(&a.report, &b.report)?),
        _ => None,
    };
    Ok(RunOutput {
        summary,
        evaluations,
        comparison,
    })
}
