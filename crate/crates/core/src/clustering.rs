//! k-means (Lloyd iterations, k-means++ seeding) and the silhouette coefficient.

use std::io::Write;

use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::squared_euclidean;
use crate::model::{LearnerId, RepresentationSet};
use crate::seeding;

const KMEANS_STREAM: u64 = 0x4B4D_4541_4E53;

pub const DEFAULT_N_INIT: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;

/// `clamp(round(sqrt(n / 2)), 2, 10)`.
pub fn choose_k(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::CohortTooSmall { n });
    }
    let k = (n as f64 / 2.0).sqrt().round() as usize;
    Ok(k.clamp(2, 10))
}

/// Cluster assignment of every learner of a set.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub ids: Vec<LearnerId>,
    /// Cluster index per learner, aligned with `ids`.
    pub labels: Vec<usize>,
    pub k: usize,
    pub inertia: f64,
    pub seed: u64,
    pub iterations_run: usize,
}

impl Partition {
    pub fn label_of(&self, id: &LearnerId) -> Option<usize> {
        self.ids
            .iter()
            .position(|x| x == id)
            .map(|i| self.labels[i])
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["learner_id", "cluster"])?;
        for (id, label) in self.ids.iter().zip(&self.labels) {
            writer.write_record([id.to_string(), label.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Outcome of one seeded Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after each iteration's assignment and centroid update.
    pub inertia_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl LloydRun {
    pub fn inertia(&self) -> f64 {
        *self.inertia_trace.last().unwrap_or(&0.0)
    }
}

fn kmeans_plus_plus<R: Rng>(points: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut closest: Vec<f64> = points
        .iter()
        .map(|p| squared_euclidean(p, points[first]))
        .collect();
    while centroids.len() < k {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in closest.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                acc += w;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            chosen.iter().position(|c| !c).expect("k <= n")
        };
        chosen[pick] = true;
        centroids.push(points[pick].to_vec());
        for (c, p) in closest.iter_mut().zip(points) {
            *c = c.min(squared_euclidean(p, points[pick]));
        }
    }
    centroids
}

fn nearest(point: &[f64], centroids: &[Vec<f64>], current: Option<usize>) -> usize {
    let mut best = current.unwrap_or(0);
    let mut best_d = squared_euclidean(point, &centroids[best]);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean(point, centroid);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

fn centroid_of(
    points: &[&[f64]],
    labels: &[usize],
    cluster: usize,
    dim: usize,
) -> Option<Vec<f64>> {
    let mut sum = vec![0.0; dim];
    let mut count = 0usize;
    for (p, _) in points.iter().zip(labels).filter(|(_, &l)| l == cluster) {
        sum.iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
        count += 1;
    }
    if count == 0 {
        return None;
    }
    sum.iter_mut().for_each(|s| *s /= count as f64);
    Some(sum)
}

fn inertia_of(points: &[&[f64]], labels: &[usize], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_euclidean(p, &centroids[l]))
        .sum()
}

/// A single k-means++ seeded Lloyd run over `points` (all of one length).
pub fn lloyd<R: Rng>(
    points: &[&[f64]],
    k: usize,
    max_iter: usize,
    rng: &mut R,
) -> Result<LloydRun> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::KExceedsN { k, n });
    }
    let dim = points[0].len();
    let mut centroids = kmeans_plus_plus(points, k, rng);
    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (p, label) in points.iter().zip(labels.iter_mut()) {
            let best = nearest(p, &centroids, *label);
            if *label != Some(best) {
                *label = Some(best);
                changed = true;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        iterations += 1;
        let mut flat: Vec<usize> = labels.iter().map(|l| l.expect("assigned")).collect();
        for (c, centroid) in centroids.iter_mut().enumerate() {
            if let Some(mean) = centroid_of(points, &flat, c, dim) {
                *centroid = mean;
            }
        }
        repair_empty_clusters(points, &mut flat, &mut centroids, dim);
        trace.push(inertia_of(points, &flat, &centroids));
        for (l, f) in labels.iter_mut().zip(&flat) {
            *l = Some(*f);
        }
    }

    Ok(LloydRun {
        labels: labels.into_iter().map(|l| l.expect("assigned")).collect(),
        centroids,
        inertia_trace: trace,
        iterations_run: iterations,
        converged,
    })
}

/// Gives each empty cluster the point farthest from its own centroid, taken
/// from a cluster that keeps at least one member.
fn repair_empty_clusters(
    points: &[&[f64]],
    labels: &mut [usize],
    centroids: &mut [Vec<f64>],
    dim: usize,
) {
    let k = centroids.len();
    loop {
        let mut sizes = vec![0usize; k];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut donor: Option<(usize, f64)> = None;
        for (i, (p, &l)) in points.iter().zip(labels.iter()).enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let d = squared_euclidean(p, &centroids[l]);
            if donor.is_none_or(|(_, best)| d > best) {
                donor = Some((i, d));
            }
        }
        let (i, _) = donor.expect("k <= n leaves a cluster with two members");
        let old = labels[i];
        labels[i] = empty;
        centroids[empty] = points[i].to_vec();
        if let Some(mean) = centroid_of(points, labels, old, dim) {
            centroids[old] = mean;
        }
    }
}

/// Best of `n_init` seeded Lloyd runs by inertia; ties go to the earlier restart.
///
/// Rows are visited in id order, so the result does not depend on row order.
pub fn kmeans(
    set: &RepresentationSet,
    k: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> Result<Partition> {
    let n = set.len();
    if k > n {
        return Err(Error::KExceedsN { k, n });
    }
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if max_iter == 0 || n_init == 0 {
        return Err(Error::InvalidConfig(
            "max_iter and n_init must be >= 1".into(),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| set.ids()[a].cmp(&set.ids()[b]));
    let points: Vec<&[f64]> = order.iter().map(|&i| set.row(i)).collect();

    let mut best: Option<LloydRun> = None;
    for restart in 0..n_init {
        let mut rng = seeding::stream(&[KMEANS_STREAM, seed, restart as u64]);
        let run = lloyd(&points, k, max_iter, &mut rng)?;
        if best.as_ref().is_none_or(|b| run.inertia() < b.inertia()) {
            best = Some(run);
        }
    }
    let best = best.expect("n_init >= 1");
    let mut labels = vec![0; n];
    for (sorted_pos, &row) in order.iter().enumerate() {
        labels[row] = best.labels[sorted_pos];
    }
    Ok(Partition {
        ids: set.ids().to_vec(),
        labels,
        k,
        inertia: best.inertia(),
        seed,
        iterations_run: best.iterations_run,
    })
}

/// Per-point silhouette values under Euclidean distance.
///
/// Singletons score 0, as does any point with `a = b = 0`.
pub fn silhouette_samples(set: &RepresentationSet, partition: &Partition) -> Result<Vec<f64>> {
    let n = set.len();
    if partition.labels.len() != n {
        return Err(Error::dims(n, partition.labels.len()));
    }
    let k = partition.labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in &partition.labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::DegeneratePartition);
    }

    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_euclidean(set.row(i), set.row(j)).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut out = Vec::with_capacity(n);
    let mut sums = vec![0.0; k];
    for i in 0..n {
        let own = partition.labels[i];
        if sizes[own] < 2 {
            out.push(0.0);
            continue;
        }
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            if j != i {
                sums[partition.labels[j]] += dist[i * n + j];
            }
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && sizes[c] > 0)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        out.push(if denom > 0.0 { (b - a) / denom } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette over all points.
pub fn silhouette(set: &RepresentationSet, partition: &Partition) -> Result<f64> {
    let samples = silhouette_samples(set, partition)?;
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(xs: &[f64]) -> RepresentationSet {
        let ids = (0..xs.len())
            .map(|i| LearnerId::new(format!("p{i:02}")).unwrap())
            .collect();
        RepresentationSet::new(ids, xs.iter().map(|x| vec![*x]).collect(), "t").unwrap()
    }

    fn partition(set: &RepresentationSet, labels: Vec<usize>) -> Partition {
        Partition {
            ids: set.ids().to_vec(),
            k: labels.iter().max().unwrap() + 1,
            labels,
            inertia: 0.0,
            seed: 0,
            iterations_run: 0,
        }
    }

    #[test]
    fn k_heuristic() {
        assert_eq!(choose_k(39).unwrap(), 4);
        assert_eq!(choose_k(2).unwrap(), 2);
        assert_eq!(choose_k(10_000).unwrap(), 10);
        assert!(matches!(choose_k(1), Err(Error::CohortTooSmall { n: 1 })));
    }

    #[test]
    fn separated_pairs() {
        let ids = (0..4)
            .map(|i| LearnerId::new(format!("x{i}")).unwrap())
            .collect();
        let rows = vec![
            vec![0.0, 0.0],
            vec![50.0, 50.0],
            vec![0.0, 0.0],
            vec![50.0, 50.0],
        ];
        let set = RepresentationSet::new(ids, rows, "t").unwrap();
        let p = kmeans(&set, 2, 3, 300, 10).unwrap();
        assert_eq!(p.inertia, 0.0);
        assert_eq!(p.labels[0], p.labels[2]);
        assert_eq!(p.labels[1], p.labels[3]);
        assert_ne!(p.labels[0], p.labels[1]);
    }

    #[test]
    fn k_equals_n() {
        let set = line(&[0.0, 1.0, 5.0, 9.0, 9.5]);
        let p = kmeans(&set, 5, 1, 300, 3).unwrap();
        assert_eq!(p.inertia, 0.0);
        let mut sizes = p.cluster_sizes();
        sizes.sort();
        assert_eq!(sizes, vec![1; 5]);
    }

    #[test]
    fn k_too_large() {
        let set = line(&[0.0, 1.0]);
        assert!(matches!(
            kmeans(&set, 3, 0, 10, 1),
            Err(Error::KExceedsN { k: 3, n: 2 })
        ));
    }

    #[test]
    fn one_dimensional_matches_enumeration() {
        let xs = [0.0, 1.0, 10.0, 11.0];
        // exhaustive search over all 2-partitions
        let mut best = (f64::INFINITY, 0u32);
        for mask in 1u32..(1 << xs.len()) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<f64> = (0..xs.len())
                    .filter(|&i| ((mask >> i) & 1 == 1) == side)
                    .map(|i| xs[i])
                    .collect();
                let m = members.iter().sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|x| (x - m).powi(2)).sum::<f64>();
            }
            if cost < best.0 {
                best = (cost, mask);
            }
        }
        assert_eq!(best.0, 1.0);

        let p = kmeans(&line(&xs), 2, 11, 300, 10).unwrap();
        assert_eq!(p.inertia, best.0);
        assert_eq!(p.labels[0], p.labels[1]);
        assert_eq!(p.labels[2], p.labels[3]);
        assert_ne!(p.labels[0], p.labels[2]);
    }

    #[test]
    fn identical_points_still_fill_every_cluster() {
        let set = line(&[2.0; 6]);
        let p = kmeans(&set, 3, 5, 50, 2).unwrap();
        assert!(p.cluster_sizes().iter().all(|&s| s > 0));
        assert_eq!(silhouette(&set, &p).unwrap(), 0.0);
    }

    #[test]
    fn empty_cluster_is_repaired() {
        // centroids placed so cluster 2 attracts nothing
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let mut labels = vec![0, 0, 0, 1];
        let mut centroids = vec![vec![1.0], vec![10.0], vec![100.0]];
        repair_empty_clusters(&refs, &mut labels, &mut centroids, 1);
        // points 0 and 2 tie at distance 1 from their centroid; the first wins
        assert_eq!(labels, vec![2, 0, 0, 1]);
        assert_eq!(centroids, vec![vec![1.5], vec![10.0], vec![0.0]]);
    }

    #[test]
    fn lloyd_reports_trace() {
        let pts: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64])
            .collect();
        let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
        let run = lloyd(&refs, 4, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(run.inertia_trace.len(), run.iterations_run);
        assert!(run.inertia_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(run.converged);
    }

    #[test]
    fn silhouette_fixture() {
        let set = line(&[0.0, 1.0, 10.0, 11.0]);
        let p = partition(&set, vec![0, 0, 1, 1]);
        // a, b per point: 0 -> (1, 10.5), 1 -> (1, 9.5), 10 -> (1, 9.5), 11 -> (1, 10.5)
        let expected = (9.5 / 10.5 + 8.5 / 9.5 + 8.5 / 9.5 + 9.5 / 10.5) / 4.0;
        let s = silhouette(&set, &p).unwrap();
        assert!((s - expected).abs() < 1e-12);
        assert!((s - 0.8997).abs() < 1e-4);
    }

    #[test]
    fn singletons_score_zero() {
        let set = line(&[0.0, 3.0, 7.0]);
        let p = partition(&set, vec![0, 1, 2]);
        assert_eq!(silhouette(&set, &p).unwrap(), 0.0);
    }

    #[test]
    fn coincident_clusters_score_zero() {
        let set = line(&[4.0, 4.0, 4.0, 4.0]);
        let p = partition(&set, vec![0, 0, 1, 1]);
        assert_eq!(silhouette(&set, &p).unwrap(), 0.0);
    }

    #[test]
    fn single_cluster_is_degenerate() {
        let set = line(&[0.0, 1.0, 2.0]);
        let p = partition(&set, vec![0, 0, 0]);
        assert!(matches!(
            silhouette(&set, &p),
            Err(Error::DegeneratePartition)
        ));
    }

    #[test]
    fn partition_csv() {
        let set = line(&[0.0, 1.0]);
        let mut buf = Vec::new();
        partition(&set, vec![1, 0]).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "learner_id,cluster\np00,1\np01,0\n"
        );
    }
}
