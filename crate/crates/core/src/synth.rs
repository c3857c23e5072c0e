//! Seeded synthetic cohorts with a controllable amount of shared topic content.
//!
//! Each learner has a latent style vector. Question embeddings mix that style
//! with one topic vector shared by the whole cohort, plus per-question noise.
//! A `need` signal follows the style through a fixed logistic readout, and the
//! recommendation embedding interpolates between two fixed anchors by need.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InteractionRecord, LearnerId};
use crate::seeding;

const SYNTH_STREAM: u64 = 0x5359_4E54;
const SHARED: u64 = u64::MAX;
const WINDOW_DAYS: i64 = 90;
pub const NEED_SIGNAL: &str = "need";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub learners: usize,
    /// Inclusive `[min, max]` interaction count per learner.
    pub interactions_per_learner: (usize, usize),
    pub embedding_dim: usize,
    /// Spread of learner style vectors.
    pub style_scale: f64,
    /// Spread of per-question noise.
    pub noise_scale: f64,
    /// Weight of the shared topic vector in every question, in `[0, 1]`.
    pub topic_overlap: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let (lo, hi) = self.interactions_per_learner;
        if self.learners < 2 {
            return bad("learners must be >= 2");
        }
        if lo < 1 || lo > hi {
            return bad("interactions_per_learner must be 1 <= min <= max");
        }
        if self.embedding_dim < 2 {
            return bad("embedding_dim must be >= 2");
        }
        if !(self.style_scale >= 0.0 && self.style_scale.is_finite())
            || !(self.noise_scale >= 0.0 && self.noise_scale.is_finite())
        {
            return bad("scales must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.topic_overlap) {
            return bad("topic_overlap must lie in [0, 1]");
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect::<Vec<f64>>()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn window_start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 8, 0, 0, 0).unwrap()
}

/// Generates the cohort's records, ordered by timestamp (ties by learner index).
pub fn generate_cohort(config: &SynthConfig) -> Result<Vec<InteractionRecord>> {
    config.validate()?;
    let dim = config.embedding_dim;
    let base = if config.style_scale > 0.0 {
        config.style_scale
    } else {
        1.0
    };

    let mut shared = seeding::stream(&[SYNTH_STREAM, config.seed, SHARED]);
    let topic = gaussian(&mut shared, dim, base);
    let direction = gaussian(&mut shared, dim, 1.0);
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    // style . readout has unit variance
    let readout: Vec<f64> = direction.iter().map(|x| x / (norm * base)).collect();
    let anchor_high = gaussian(&mut shared, dim, base);
    let anchor_low = gaussian(&mut shared, dim, base);
    let logit_noise = config.noise_scale / base;

    let width = config.learners.to_string().len().max(3);
    let window_ms = WINDOW_DAYS * 86_400_000;
    let mut records = Vec::new();
    for learner in 0..config.learners {
        let mut rng = seeding::stream(&[SYNTH_STREAM, config.seed, learner as u64]);
        let id = LearnerId::new(format!("learner-{learner:0width$}"))?;
        let style = gaussian(&mut rng, dim, config.style_scale);
        let (lo, hi) = config.interactions_per_learner;
        let count = rng.random_range(lo..=hi);

        let gaps: Vec<f64> = (0..=count).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = gaps.iter().sum();
        let mut elapsed = 0.0;
        let latent: f64 = style.iter().zip(&readout).map(|(s, w)| s * w).sum();

        for gap in gaps.iter().take(count) {
            elapsed += gap;
            let offset_ms = (elapsed / total * window_ms as f64).floor() as i64;
            let embedding: Vec<f64> = style
                .iter()
                .zip(&topic)
                .map(|(s, t)| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    (1.0 - config.topic_overlap) * s
                        + config.topic_overlap * t
                        + config.noise_scale * noise
                })
                .collect();
            let eps: f64 = StandardNormal.sample(&mut rng);
            let need = sigmoid(latent + logit_noise * eps);
            let recommendation: Vec<f64> = anchor_high
                .iter()
                .zip(&anchor_low)
                .map(|(h, l)| {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    need * h + (1.0 - need) * l + config.noise_scale * noise
                })
                .collect();
            records.push(InteractionRecord {
                learner: id.clone(),
                timestamp: window_start() + Duration::milliseconds(offset_ms),
                embedding,
                signals: BTreeMap::from([(NEED_SIGNAL.to_string(), need)]),
                recommendation_embedding: Some(recommendation),
            });
        }
    }
    records.sort_by_key(|r| r.timestamp);
    Ok(records)
}
