//! Acceptance suite A1–A10.
//!
//! Runs as a plain binary so every criterion prints one PASS/FAIL line in the
//! normal `cargo test` output. Exits non-zero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use repdiff::builders::{apply_normalization, NormalizationSpec};
use repdiff::clustering::{kmeans, lloyd, silhouette, silhouette_samples, Partition};
use repdiff::ingest::write_interactions;
use repdiff::metrics::{
    distinctiveness, neighbor_counts, pairwise_distance_matrix, uniqueness_threshold,
};
use repdiff::pipeline::{run, RunConfig};
use repdiff::synth::{generate_cohort, SynthConfig};
use repdiff::verification::{mann_whitney_counts, roc_auc};
use repdiff::{LearnerId, RepresentationSet};

type Outcome = Result<String, String>;
type Check = fn() -> Outcome;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(n: usize) -> Vec<LearnerId> {
    (0..n)
        .map(|i| LearnerId::new(format!("l{i:03}")).unwrap())
        .collect()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect())
        .collect()
}

fn random_set(
    rng: &mut ChaCha8Rng,
    max_n: usize,
    max_d: usize,
) -> (Vec<Vec<f64>>, RepresentationSet) {
    let n = rng.random_range(2..=max_n);
    let d = rng.random_range(1..=max_d);
    let rows = random_rows(rng, n, d);
    let set = RepresentationSet::new(ids(n), rows.clone(), "random").unwrap();
    (rows, set)
}

fn oracle_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for k in 0..a.len() {
        total += (a[k] - b[k]) * (a[k] - b[k]);
    }
    total.sqrt() / (a.len() as f64).sqrt()
}

fn oracle_distinctiveness(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    (0..n)
        .map(|i| {
            let mut sum = 0.0;
            for j in 0..n {
                if i != j {
                    sum += oracle_distance(&rows[i], &rows[j]);
                }
            }
            sum / (n - 1) as f64
        })
        .collect()
}

fn oracle_tau(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut nearest = f64::INFINITY;
        for j in 0..n {
            if i != j {
                nearest = nearest.min(oracle_distance(&rows[i], &rows[j]));
            }
        }
        worst = worst.max(nearest);
    }
    worst
}

/// Wins count 2, ties count 1, over `2 * n_pos * n_neg`.
fn oracle_auc_counts(scores: &[f64], labels: &[bool]) -> (u128, u128) {
    let mut num = 0u128;
    let mut pairs = 0u128;
    for (i, &p) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &q) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1;
            num += if p > q {
                2
            } else if p == q {
                1
            } else {
                0
            };
        }
    }
    (num, 2 * pairs)
}

fn oracle_silhouette(rows: &[Vec<f64>], labels: &[usize]) -> Vec<f64> {
    let euclid = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let clusters: Vec<usize> = {
        let mut c = labels.to_vec();
        c.sort_unstable();
        c.dedup();
        c
    };
    (0..rows.len())
        .map(|i| {
            let own = labels.iter().filter(|&&l| l == labels[i]).count();
            if own == 1 {
                return 0.0;
            }
            let mean_to = |c: usize| {
                let members: Vec<usize> = (0..rows.len())
                    .filter(|&j| j != i && labels[j] == c)
                    .collect();
                members
                    .iter()
                    .map(|&j| euclid(&rows[i], &rows[j]))
                    .sum::<f64>()
                    / members.len() as f64
            };
            let a = mean_to(labels[i]);
            let b = clusters
                .iter()
                .filter(|&&c| c != labels[i])
                .map(|&c| mean_to(c))
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect()
}

fn a1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (rows, set) = random_set(&mut rng, 20, 8);
        let got = distinctiveness(&set).map_err(|e| e.to_string())?;
        for (g, o) in got.per_learner.iter().zip(oracle_distinctiveness(&rows)) {
            worst = worst.max((g - o).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 cohorts, max |D - oracle| = {worst:e}, {elapsed:?}"
    ))
}

fn a2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (rows, set) = random_set(&mut rng, 20, 8);
        let base_dm = pairwise_distance_matrix(&set).unwrap();
        let base_d = distinctiveness(&set).unwrap();
        for k in [2usize, 3, 5] {
            let tiled: Vec<Vec<f64>> = rows.iter().map(|r| r.repeat(k)).collect();
            let tiled = RepresentationSet::new(set.ids().to_vec(), tiled, "tiled").unwrap();
            let dm = pairwise_distance_matrix(&tiled).unwrap();
            for i in 0..set.len() {
                for j in 0..set.len() {
                    worst = worst.max((dm.get(i, j) - base_dm.get(i, j)).abs());
                }
            }
            let d = distinctiveness(&tiled).unwrap();
            for (a, b) in d.per_learner.iter().zip(&base_d.per_learner) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("tiling k in {{2,3,5}}, max deviation {worst:e}"))
}

fn a3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..200 {
        let (rows, set) = random_set(&mut rng, 20, 8);
        let dm = pairwise_distance_matrix(&set).unwrap();
        let tau = uniqueness_threshold(&dm).unwrap();
        let oracle = oracle_tau(&rows);
        ensure(tau == oracle, || {
            format!("trial {trial}: tau {tau} != oracle {oracle}")
        })?;
        let at = neighbor_counts(&dm, tau).unwrap();
        ensure(at.iter().all(|&c| c >= 1), || {
            format!("trial {trial}: a count is 0 at tau")
        })?;
        if tau > 0.0 {
            let below = neighbor_counts(&dm, tau * (1.0 - 1e-9)).unwrap();
            ensure(below.contains(&0), || {
                format!("trial {trial}: no unique learner just below tau")
            })?;
        }
    }
    Ok("200 cohorts, tau equals oracle exactly".into())
}

fn a4() -> Outcome {
    // Denominators 2 * n_pos * n_neg are powers of two, so num / den is exact.
    let fixtures: Vec<(Vec<f64>, Vec<bool>)> = vec![
        (vec![0.9, 0.4, 0.5, 0.1], vec![true, true, false, false]),
        (vec![0.2, 0.2, 0.2, 0.2], vec![true, true, false, false]),
        (vec![0.9, 0.8, 0.1, 0.2], vec![true, true, false, false]),
        (vec![0.1, 0.8, 0.9, 0.2], vec![true, false, false, true]),
        (
            vec![0.5, 0.3, 0.3, 0.7, 0.1, 0.3, 0.6, 0.3],
            vec![true, true, true, true, false, false, false, false],
        ),
        (
            vec![3.0, 1.0, 2.0, 2.0, 0.0, 5.0, 2.0, 1.0],
            vec![true, false, true, false, true, false, true, false],
        ),
        (vec![1.0, 0.0], vec![true, false]),
    ];
    for (i, (scores, labels)) in fixtures.iter().enumerate() {
        let (num, den) = oracle_auc_counts(scores, labels);
        let expected = num as f64 / den as f64;
        let got = roc_auc(scores, labels).map_err(|e| e.to_string())?;
        ensure(got == expected, || {
            format!("fixture {i}: {got} != {expected}")
        })?;
    }
    let example = roc_auc(&fixtures[0].0, &fixtures[0].1).unwrap();
    ensure(example == 0.75, || format!("0.75 example gave {example}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..200 {
        let n = rng.random_range(2..40);
        let scores: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0..6) as f64 / 4.0)
            .collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let counts = mann_whitney_counts(&scores, &labels).unwrap();
        let oracle = oracle_auc_counts(&scores, &labels);
        ensure(counts == oracle, || {
            format!("trial {trial}: counts {counts:?} != {oracle:?}")
        })?;
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        let b = roc_auc(&scores, &flipped).unwrap();
        ensure(b == 1.0 - a && a == 1.0 - b && a + b == 1.0, || {
            format!("trial {trial}: flip {b} is not the complement of {a}")
        })?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let scores: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
    let mut labels: Vec<bool> = (0..2000).map(|i| i < 1000).collect();
    labels.shuffle(&mut rng);
    let shuffled = roc_auc(&scores, &labels).unwrap();
    ensure((0.45..=0.55).contains(&shuffled), || {
        format!("shuffled AUC {shuffled}")
    })?;
    Ok(format!(
        "{} exact fixtures, 200 flip identities, shuffled AUC = {shuffled:.4}",
        fixtures.len()
    ))
}

fn partition_of(set: &RepresentationSet, labels: Vec<usize>, k: usize) -> Partition {
    Partition {
        ids: set.ids().to_vec(),
        labels,
        k,
        inertia: 0.0,
        seed: 0,
        iterations_run: 0,
    }
}

fn a5() -> Outcome {
    let set = RepresentationSet::new(
        ids(4),
        vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]],
        "line",
    )
    .unwrap();
    let fixture = silhouette(&set, &partition_of(&set, vec![0, 0, 1, 1], 2)).unwrap();
    let hand = (9.5 / 10.5 + 8.5 / 9.5 + 8.5 / 9.5 + 9.5 / 10.5) / 4.0;
    ensure((fixture - hand).abs() < 1e-12, || {
        format!("{fixture} != hand value {hand}")
    })?;
    ensure((fixture - 0.8997).abs() < 1e-4, || {
        format!("{fixture} not within 1e-4 of 0.8997")
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut checked = 0;
    while checked < 200 {
        let (rows, set) = random_set(&mut rng, 15, 6);
        let k = rng.random_range(2..=set.len().min(5));
        let labels: Vec<usize> = (0..set.len()).map(|_| rng.random_range(0..k)).collect();
        let mut distinct = labels.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 2 {
            continue;
        }
        checked += 1;
        let p = partition_of(&set, labels.clone(), k);
        let s = silhouette(&set, &p).unwrap();
        ensure((-1.0..=1.0).contains(&s), || {
            format!("silhouette {s} out of range")
        })?;
        let samples = silhouette_samples(&set, &p).unwrap();
        for (g, o) in samples.iter().zip(oracle_silhouette(&rows, &labels)) {
            worst = worst.max((g - o).abs());
        }
    }
    ensure(worst <= 1e-9, || format!("per-point deviation {worst:e}"))?;
    Ok(format!(
        "fixture = {fixture:.6}, 200 random partitions, max deviation {worst:e}"
    ))
}

fn blobs(seed: u64) -> (RepresentationSet, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut planted = Vec::new();
    for i in 0..40 {
        let centre = if i % 2 == 0 { 0.0 } else { 10.0 };
        let z: Vec<f64> = (0..2)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                centre + n
            })
            .collect();
        rows.push(z);
        planted.push(i % 2 == 1);
    }
    (
        RepresentationSet::new(ids(40), rows, "blobs").unwrap(),
        planted,
    )
}

fn a6() -> Outcome {
    let mut recovered = 0;
    for seed in 0..100 {
        let (set, planted) = blobs(seed);
        let p = kmeans(&set, 2, seed, 300, 10).map_err(|e| e.to_string())?;
        let same = p.labels.iter().zip(&planted).all(|(&l, &t)| (l == 1) == t);
        let flipped = p.labels.iter().zip(&planted).all(|(&l, &t)| (l == 0) == t);
        if same || flipped {
            recovered += 1;
        }
        let points: Vec<&[f64]> = set.rows().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = lloyd(&points, 2, 300, &mut rng).map_err(|e| e.to_string())?;
        ensure(run.inertia_trace.windows(2).all(|w| w[1] <= w[0]), || {
            format!("seed {seed}: inertia increased: {:?}", run.inertia_trace)
        })?;
        let again = kmeans(&set, 2, seed, 300, 10).unwrap();
        ensure(again == p, || format!("seed {seed}: rerun differs"))?;
    }
    ensure(recovered >= 99, || format!("recovered {recovered}/100"))?;
    Ok(format!("planted split recovered in {recovered}/100 seeds"))
}

fn a7_config(seed: u64) -> SynthConfig {
    SynthConfig {
        learners: 40,
        interactions_per_learner: (20, 60),
        embedding_dim: 32,
        style_scale: 0.1,
        noise_scale: 0.1,
        topic_overlap: 0.7,
        seed,
    }
}

fn a7() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut per_metric = [0usize; 4];
    for seed in 0..100 {
        let records = generate_cohort(&a7_config(seed)).map_err(|e| e.to_string())?;
        let config = RunConfig {
            seed,
            ..RunConfig::default()
        };
        let out = run(records, &config).map_err(|e| e.to_string())?;
        let table = out.comparison.expect("both representations ran");
        for (slot, row) in per_metric.iter_mut().zip(&table.rows) {
            if row.higher == repdiff::report::Higher::B {
                *slot += 1;
            }
        }
        if table.b_higher_on_all() {
            wins += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(wins >= 95, || {
        format!("learner-level won all four in {wins}/100, per metric {per_metric:?}")
    })?;
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "learner-level ahead on all four in {wins}/100 trials (D, S, A, tau: {per_metric:?}), {elapsed:?}"
    ))
}

fn write_cohort(path: &Path, config: &SynthConfig) {
    let records = generate_cohort(config).unwrap();
    let file = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    write_interactions(&records, file).unwrap();
}

fn eval_cli(input: &Path, out: &Path, extra: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_repdiff"))
        .arg("eval")
        .arg("--input")
        .arg(input)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("eval exited with {status}"))
}

fn a8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("cohort.jsonl");
    write_cohort(
        &input,
        &SynthConfig {
            learners: 20,
            interactions_per_learner: (5, 15),
            ..a7_config(8)
        },
    );
    let (first, second) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for out in [&first, &second] {
        eval_cli(&input, out, &["--representation", "both", "--seed", "17"])?;
    }
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    ensure(a == b, || "reports differ".into())?;
    Ok(format!(
        "two eval runs gave identical {}-byte reports",
        a.len()
    ))
}

fn a9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("large.jsonl");
    write_cohort(
        &input,
        &SynthConfig {
            learners: 200,
            interactions_per_learner: (50, 50),
            embedding_dim: 384,
            style_scale: 0.1,
            noise_scale: 0.1,
            topic_overlap: 0.7,
            seed: 9,
        },
    );
    let out = dir.path().join("report.json");
    let start = Instant::now();
    eval_cli(&input, &out, &["--representation", "both", "--seed", "9"])?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 learners x 10,000 interactions at d = 384 in {elapsed:?}"
    ))
}

fn a10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for trial in 0..200 {
        let n = rng.random_range(2..30);
        let d = rng.random_range(1..10);
        let mut rows = random_rows(&mut rng, n, d);
        let constant = rng.random_range(0..d);
        let value = rng.random_range(-3.0..3.0);
        for row in &mut rows {
            row[constant] = value;
        }
        let set = RepresentationSet::new(ids(n), rows, "raw").unwrap();
        let once = apply_normalization(&set, NormalizationSpec::MIN_MAX).unwrap();
        ensure(
            once.values().iter().all(|v| (0.0..=1.0).contains(v)),
            || format!("trial {trial}: value outside [0, 1]"),
        )?;
        ensure(once.rows().all(|r| r[constant] == 0.0), || {
            format!("trial {trial}: zero-range column not mapped to 0")
        })?;
        let twice = apply_normalization(&once, NormalizationSpec::MIN_MAX).unwrap();
        ensure(twice.values() == once.values(), || {
            format!("trial {trial}: not idempotent")
        })?;
    }
    Ok("200 matrices in [0, 1], zero-range columns 0, idempotent".into())
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("A1", a1),
        ("A2", a2),
        ("A3", a3),
        ("A4", a4),
        ("A5", a5),
        ("A6", a6),
        ("A7", a7),
        ("A8", a8),
        ("A9", a9),
        ("A10", a10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("{name:<4} PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{name:<4} FAIL  {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
