//! Same-learner vs cross-learner verification: pair sampling, cosine scoring, ROC-AUC.

use std::collections::HashSet;
use std::io::Write;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LearnerId;
use crate::seeding;

const POSITIVE_STREAM: u64 = 0x0050_4F53;
const NEGATIVE_STREAM: u64 = 0x004E_4547;
const TRIM_STREAM: u64 = 0x5452_494D;

/// Several vectors per learner, all of one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSet {
    learners: Vec<LearnerId>,
    instances: Vec<Vec<Vec<f64>>>,
    dim: usize,
}

impl InstanceSet {
    pub fn new(entries: Vec<(LearnerId, Vec<Vec<f64>>)>) -> Result<Self> {
        let dim = entries
            .iter()
            .flat_map(|(_, v)| v.first())
            .map(Vec::len)
            .next()
            .unwrap_or(0);
        let mut seen = HashSet::new();
        for (row, (id, vectors)) in entries.iter().enumerate() {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id.to_string()));
            }
            for v in vectors {
                if v.len() != dim {
                    return Err(Error::dims(dim, v.len()));
                }
                if let Some(column) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteValue { row, column });
                }
            }
        }
        let (learners, instances) = entries.into_iter().unzip();
        Ok(InstanceSet {
            learners,
            instances,
            dim,
        })
    }

    pub fn learners(&self) -> &[LearnerId] {
        &self.learners
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn instances_of(&self, learner: usize) -> &[Vec<f64>] {
        &self.instances[learner]
    }

    pub fn total_instances(&self) -> usize {
        self.instances.iter().map(Vec::len).sum()
    }

    pub fn vector(&self, r: InstanceRef) -> &[f64] {
        &self.instances[r.learner][r.index]
    }

    /// Applies `f` to every vector, keeping the learner layout.
    pub fn map(&self, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Result<Self> {
        InstanceSet::new(
            self.learners
                .iter()
                .cloned()
                .zip(
                    self.instances
                        .iter()
                        .map(|vs| vs.iter().map(|v| f(v)).collect()),
                )
                .collect(),
        )
    }
}

/// Position of one instance inside an [`InstanceSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceRef {
    pub learner: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledPair {
    pub a: InstanceRef,
    pub b: InstanceRef,
    pub same_learner: bool,
}

/// Matched same-learner and cross-learner pairs, optionally scored.
///
/// Pairs reference vectors in the [`InstanceSet`] they were drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairSet {
    pub pairs: Vec<LabeledPair>,
    pub scores: Option<Vec<f64>>,
}

impl LabeledPairSet {
    pub fn positives(&self) -> usize {
        self.pairs.iter().filter(|p| p.same_learner).count()
    }

    pub fn negatives(&self) -> usize {
        self.pairs.len() - self.positives()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.pairs.iter().map(|p| p.same_learner).collect()
    }

    /// Cosine similarity for every pair.
    pub fn score(&mut self, instances: &InstanceSet) -> Result<&[f64]> {
        let scores = self
            .pairs
            .iter()
            .map(|p| cosine_similarity(instances.vector(p.a), instances.vector(p.b)))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.scores.insert(scores))
    }

    pub fn auc(&self) -> Result<f64> {
        let scores = self
            .scores
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("pairs have not been scored".into()))?;
        roc_auc(scores, &self.labels())
    }

    pub fn write_csv<W: Write>(&self, instances: &InstanceSet, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["learner_a", "learner_b", "score", "label"])?;
        for (i, p) in self.pairs.iter().enumerate() {
            let score = self
                .scores
                .as_ref()
                .map(|s| s[i].to_string())
                .unwrap_or_default();
            writer.write_record([
                instances.learners[p.a.learner].as_str(),
                instances.learners[p.b.learner].as_str(),
                &score,
                if p.same_learner { "same" } else { "cross" },
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PairsPerLearner {
    #[default]
    All,
    Count(usize),
}

impl std::str::FromStr for PairsPerLearner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(PairsPerLearner::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(PairsPerLearner::Count(n)),
            _ => Err(Error::InvalidConfig(format!(
                "pairs per learner must be 'all' or a positive integer, got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for PairsPerLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PairsPerLearner::All => f.write_str("all"),
            PairsPerLearner::Count(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct PairSamplingConfig {
    pub pairs_per_learner: PairsPerLearner,
    pub seed: u64,
}

/// Maps `0..n*(n-1)/2` onto `(i, j)` with `i < j`, row by row.
fn unrank_pair(mut r: usize, n: usize) -> (usize, usize) {
    let mut i = 0;
    loop {
        let row = n - 1 - i;
        if r < row {
            return (i, i + 1 + r);
        }
        r -= row;
        i += 1;
    }
}

fn sample_sorted<R: Rng>(rng: &mut R, total: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, total, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// Draws same-learner pairs and an equal number of distinct cross-learner pairs.
///
/// When cross-learner pairs are scarcer than same-learner pairs, the positives
/// are subsampled so both classes keep the same size.
pub fn build_pairs(instances: &InstanceSet, config: PairSamplingConfig) -> Result<LabeledPairSet> {
    let sizes: Vec<usize> = instances.instances.iter().map(Vec::len).collect();
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::NoNegativePairs);
    }
    if sizes.iter().all(|&s| s < 2) {
        return Err(Error::NoPositivePairs);
    }

    let mut positives = Vec::new();
    for (learner, &n) in sizes.iter().enumerate() {
        let available = n * n.saturating_sub(1) / 2;
        if available == 0 {
            continue;
        }
        let index_pairs: Vec<(usize, usize)> = match config.pairs_per_learner {
            PairsPerLearner::Count(m) if m < available => {
                let mut rng = seeding::stream(&[POSITIVE_STREAM, config.seed, learner as u64]);
                sample_sorted(&mut rng, available, m)
                    .into_iter()
                    .map(|r| unrank_pair(r, n))
                    .collect()
            }
            _ => (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect(),
        };
        positives.extend(index_pairs.into_iter().map(|(i, j)| LabeledPair {
            a: InstanceRef { learner, index: i },
            b: InstanceRef { learner, index: j },
            same_learner: true,
        }));
    }

    let total: usize = sizes.iter().sum();
    let same_total: usize = sizes.iter().map(|s| s * s).sum();
    let cross_total = (total * total - same_total) / 2;
    if positives.len() > cross_total {
        let mut rng = seeding::stream(&[TRIM_STREAM, config.seed]);
        let keep = sample_sorted(&mut rng, positives.len(), cross_total);
        positives = keep.into_iter().map(|i| positives[i]).collect();
    }
    let wanted = positives.len();

    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    offsets.push(0usize);
    for s in &sizes {
        offsets.push(offsets.last().unwrap() + s);
    }
    let locate = |g: usize| -> InstanceRef {
        let learner = offsets.partition_point(|&o| o <= g) - 1;
        InstanceRef {
            learner,
            index: g - offsets[learner],
        }
    };

    let mut rng = seeding::stream(&[NEGATIVE_STREAM, config.seed]);
    let mut negatives = Vec::with_capacity(wanted);
    if wanted * 2 > cross_total {
        let mut all = Vec::with_capacity(cross_total);
        for g in 0..total {
            let a = locate(g);
            for h in offsets[a.learner + 1]..total {
                all.push((a, locate(h)));
            }
        }
        for i in sample_sorted(&mut rng, all.len(), wanted) {
            let (a, b) = all[i];
            negatives.push(LabeledPair {
                a,
                b,
                same_learner: false,
            });
        }
    } else {
        let mut seen = HashSet::with_capacity(wanted);
        while negatives.len() < wanted {
            let g = rng.random_range(0..total);
            let h = rng.random_range(0..total);
            let (a, b) = (locate(g.min(h)), locate(g.max(h)));
            if a.learner == b.learner || !seen.insert((a, b)) {
                continue;
            }
            negatives.push(LabeledPair {
                a,
                b,
                same_learner: false,
            });
        }
    }

    positives.extend(negatives);
    Ok(LabeledPairSet {
        pairs: positives,
        scores: None,
    })
}

/// `a.b / (|a| |b|)`, or 0 when either vector is all zeros.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Twice the Mann-Whitney U of the positives, and twice `n_pos * n_neg`.
///
/// Kept in integers so ties (worth one half) stay exact.
pub fn mann_whitney_counts(scores: &[f64], labels: &[bool]) -> Result<(u128, u128)> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if let Some(row) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteValue { row, column: 0 });
    }
    let n_pos = labels.iter().filter(|&&l| l).count() as u128;
    let n_neg = labels.len() as u128 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut twice_u: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u128, 0u128);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += pos * (2 * neg_below + neg);
        neg_below += neg;
        i = j;
    }
    Ok((twice_u, 2 * n_pos * n_neg))
}

/// Converts `numerator / denominator` so that complementary fractions are exact
/// complements in floating point: `f(n, d) == 1 - f(d - n, d)` and their sum is 1.
///
/// The half at or above 0.5 is rounded first; the other half is `1 - high`,
/// which is exact because `high >= 0.5`.
pub fn exact_fraction(numerator: u128, denominator: u128) -> f64 {
    let smaller = numerator.min(denominator - numerator);
    let high = 1.0 - smaller as f64 / denominator as f64;
    if 2 * numerator >= denominator {
        high
    } else {
        1.0 - high
    }
}

/// ROC-AUC as the Mann-Whitney probability that a positive outscores a negative.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (twice_u, twice_pairs) = mann_whitney_counts(scores, labels)?;
    Ok(exact_fraction(twice_u, twice_pairs))
}
