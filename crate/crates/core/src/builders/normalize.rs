//! Per-dimension min-max scaling across learners.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::RepresentationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationKind {
    #[default]
    None,
    #[serde(alias = "minmax")]
    MinMaxPerDimension,
}

/// What a zero-range column becomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroRangePolicy {
    #[default]
    MapToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub kind: NormalizationKind,
    pub zero_range_policy: ZeroRangePolicy,
}

impl NormalizationSpec {
    pub const NONE: NormalizationSpec = NormalizationSpec {
        kind: NormalizationKind::None,
        zero_range_policy: ZeroRangePolicy::MapToZero,
    };
    pub const MIN_MAX: NormalizationSpec = NormalizationSpec {
        kind: NormalizationKind::MinMaxPerDimension,
        zero_range_policy: ZeroRangePolicy::MapToZero,
    };
}

/// Column minima and ranges fitted on one matrix, reusable on others.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    mins: Vec<f64>,
    ranges: Vec<f64>,
}

impl MinMaxScaler {
    /// Fits on rows of equal length. Panics on an empty iterator.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        let mut rows = rows.into_iter();
        let first = rows.next().expect("at least one row");
        let mut mins = first.to_vec();
        let mut maxs = first.to_vec();
        for row in rows {
            for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row) {
                *lo = lo.min(v);
                *hi = hi.max(v);
            }
        }
        let ranges = maxs.iter().zip(&mins).map(|(hi, lo)| hi - lo).collect();
        MinMaxScaler { mins, ranges }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mins.iter().zip(&self.ranges))
            .map(|(&v, (&lo, &range))| if range > 0.0 { (v - lo) / range } else { 0.0 })
            .collect()
    }
}

pub fn apply_normalization(
    set: &RepresentationSet,
    spec: NormalizationSpec,
) -> Result<RepresentationSet> {
    match spec.kind {
        NormalizationKind::None => Ok(set.clone()),
        NormalizationKind::MinMaxPerDimension => {
            let scaler = MinMaxScaler::fit(set.rows());
            let values = set.rows().flat_map(|r| scaler.transform(r)).collect();
            set.map_values(values)
        }
    }
}
