//! Normalized L2 distances, distinctiveness and the uniqueness threshold.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{LearnerId, RepresentationSet};

/// Symmetric `N x N` matrix of `||s_i - s_j|| / sqrt(d)` with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<LearnerId>,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn ids(&self) -> &[LearnerId] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.ids.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Distance from `i` to its nearest other learner.
    pub fn nearest_neighbor_distance(&self, i: usize) -> f64 {
        self.row(i)
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &d)| d)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["learner_id".to_string()];
        header.extend(self.ids.iter().map(ToString::to_string));
        writer.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut row = vec![id.to_string()];
            row.extend(self.row(i).iter().map(f64::to_string));
            writer.write_record(&row)?;
        }
        writer.flush()?;
        Ok(())
    }
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn pairwise_distance_matrix(set: &RepresentationSet) -> Result<DistanceMatrix> {
    let n = set.len();
    if n < 2 {
        return Err(Error::CohortTooSmall { n });
    }
    let scale = (set.dim() as f64).sqrt();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_euclidean(set.row(i), set.row(j)).sqrt() / scale;
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix {
        ids: set.ids().to_vec(),
        values,
    })
}

/// Per-learner distinctiveness with its cohort mean and population sd.
#[derive(Debug, Clone, PartialEq)]
pub struct Distinctiveness {
    /// `D(i)` aligned with the set's ids.
    pub per_learner: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl Distinctiveness {
    pub fn by_id(&self, ids: &[LearnerId]) -> BTreeMap<LearnerId, f64> {
        ids.iter()
            .cloned()
            .zip(self.per_learner.iter().copied())
            .collect()
    }
}

/// `D(i) = (1/(N-1)) * sum_{j != i} d(i, j)` over an existing matrix.
pub fn distinctiveness_from(dm: &DistanceMatrix) -> Result<Distinctiveness> {
    let n = dm.len();
    if n < 2 {
        return Err(Error::CohortTooSmall { n });
    }
    let per_learner: Vec<f64> = (0..n)
        .map(|i| {
            let total: f64 = dm
                .row(i)
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, d)| d)
                .sum();
            total / (n - 1) as f64
        })
        .collect();
    let mean = per_learner.iter().sum::<f64>() / n as f64;
    let var = per_learner.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64;
    Ok(Distinctiveness {
        per_learner,
        mean,
        sd: var.sqrt(),
    })
}

pub fn distinctiveness(set: &RepresentationSet) -> Result<Distinctiveness> {
    distinctiveness_from(&pairwise_distance_matrix(set)?)
}

/// Number of other learners within `tau` of each learner, aligned with the matrix ids.
pub fn neighbor_counts(dm: &DistanceMatrix, tau: f64) -> Result<Vec<usize>> {
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::NegativeThreshold(tau));
    }
    Ok((0..dm.len())
        .map(|i| {
            dm.row(i)
                .iter()
                .enumerate()
                .filter(|&(j, &d)| j != i && d <= tau)
                .count()
        })
        .collect())
}

/// Smallest `tau` at which every learner has a neighbor: the largest nearest-neighbor distance.
pub fn uniqueness_threshold(dm: &DistanceMatrix) -> Result<f64> {
    let n = dm.len();
    if n < 2 {
        return Err(Error::CohortTooSmall { n });
    }
    Ok((0..n)
        .map(|i| dm.nearest_neighbor_distance(i))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SweepStep {
    pub tau: f64,
    /// Learners with no neighbor within `tau`.
    pub unique_learners: usize,
}

/// Grid sweep `tau = 0, step, 2*step, ...` until no learner is left without a neighbor.
pub fn tau_sweep(dm: &DistanceMatrix, step: f64) -> Result<Vec<SweepStep>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "tau sweep step must be positive, got {step}"
        )));
    }
    let nn: Vec<f64> = (0..dm.len())
        .map(|i| dm.nearest_neighbor_distance(i))
        .collect();
    let mut steps = Vec::new();
    for k in 0u64.. {
        let tau = k as f64 * step;
        let unique_learners = nn.iter().filter(|&&d| d > tau).count();
        steps.push(SweepStep {
            tau,
            unique_learners,
        });
        if unique_learners == 0 {
            break;
        }
    }
    Ok(steps)
}
