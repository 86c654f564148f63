//! Latent target domains: pseudo-labels from a source model, a k-means
//! partitioner standing in for external domain discovery, and ingestion of
//! assignment files written by such tools.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledSample;
use crate::error::{Error, Result};
use crate::model::SourceModel;

const MAX_ROUNDS: usize = 100;

/// Relabels every sample with the source model's prediction.
pub fn predict_labels(src: &SourceModel, pool: &[LabeledSample]) -> Result<Vec<LabeledSample>> {
    pool.iter()
        .map(|s| {
            let raw_n = src.n - usize::from(src.bias_appended);
            if s.features.len() != raw_n {
                return Err(Error::dim("pool sample features", raw_n, s.features.len()));
            }
            let prepared = src.prepare(s.clone());
            let label = src.predict(&prepared.features)?;
            Ok(LabeledSample { label, ..s.clone() })
        })
        .collect()
}

/// Clusters the pool into `domains` groups; returns labels in `1..=domains`.
///
/// Lloyd iterations from a farthest-point start: the first center is a
/// seeded random sample, each further center the sample farthest from the
/// centers chosen so far. Ties go to the lowest index.
pub fn partition_domains(pool: &[LabeledSample], domains: usize, seed: u64) -> Result<Vec<usize>> {
    if domains == 0 {
        return Err(Error::Config("domain count must be at least 1".into()));
    }
    if domains > pool.len() {
        return Err(Error::Config(format!(
            "cannot split {} samples into {domains} domains",
            pool.len()
        )));
    }
    let n = pool[0].features.len();
    if let Some(bad) = pool.iter().find(|s| s.features.len() != n) {
        return Err(Error::dim("pool sample features", n, bad.features.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![pool[rng.random_range(0..pool.len())].features.clone()];
    let mut nearest: Vec<f64> = pool.iter().map(|s| sq_dist(&s.features, &centers[0])).collect();
    while centers.len() < domains {
        let far = argmax(&nearest);
        centers.push(pool[far].features.clone());
        let c = centers.last().unwrap_or(&centers[0]).clone();
        for (d, s) in nearest.iter_mut().zip(pool) {
            *d = d.min(sq_dist(&s.features, &c));
        }
    }

    let mut assignment = vec![usize::MAX; pool.len()];
    for _ in 0..MAX_ROUNDS {
        let mut changed = false;
        for (a, s) in assignment.iter_mut().zip(pool) {
            let best = closest(&s.features, &centers);
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; n]; domains];
        let mut counts = vec![0usize; domains];
        for (a, s) in assignment.iter().zip(pool) {
            counts[*a] += 1;
            for (acc, v) in sums[*a].iter_mut().zip(&s.features) {
                *acc += v;
            }
        }
        for ((center, sum), count) in centers.iter_mut().zip(sums).zip(counts) {
            // An emptied cluster keeps its previous center.
            if count > 0 {
                *center = sum.into_iter().map(|v| v / count as f64).collect();
            }
        }
    }
    Ok(assignment.into_iter().map(|a| a + 1).collect())
}

/// Reads one integer domain id per line (blank lines and `#` comments are
/// skipped) and renumbers ids to `1..=D` in order of first appearance.
pub fn ingest_assignments(path: impl AsRef<Path>, pool_len: usize) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_assignments(&text, &path.display().to_string(), pool_len)
}

pub fn parse_assignments(text: &str, origin: &str, pool_len: usize) -> Result<Vec<usize>> {
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let id: i64 = line.parse().map_err(|_| Error::Parse {
            path: origin.to_string(),
            line: i + 1,
            message: format!("domain id `{line}` is not an integer"),
        })?;
        raw.push(id);
    }
    if raw.len() != pool_len {
        return Err(Error::Config(format!(
            "{origin} has {} assignments for {pool_len} samples",
            raw.len()
        )));
    }
    Ok(renumber(&raw))
}

/// Maps arbitrary ids to `1..=D` by first appearance.
pub fn renumber<T: Eq + std::hash::Hash + Copy>(ids: &[T]) -> Vec<usize> {
    let mut seen: HashMap<T, usize> = HashMap::new();
    ids.iter()
        .map(|id| {
            let next = seen.len() + 1;
            *seen.entry(*id).or_insert(next)
        })
        .collect()
}

/// Name of a discovered domain.
pub fn latent_name(id: usize) -> String {
    format!("L{id}")
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

fn closest(x: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(seed: u64, per: usize, centers: &[[f64; 2]]) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        centers
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                (0..per)
                    .map(|_| {
                        let f = c.iter().map(|m| m + noise.sample(&mut rng)).collect();
                        LabeledSample::new(format!("B{}", i + 1), 1, f)
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn one_domain_takes_everything() {
        let pool = blobs(0, 10, &[[0.0, 0.0], [5.0, 5.0]]);
        assert!(partition_domains(&pool, 1, 3).unwrap().iter().all(|a| *a == 1));
    }

    #[test]
    fn recovers_separated_blobs() {
        let pool = blobs(1, 50, &[[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]]);
        let a = partition_domains(&pool, 3, 7).unwrap();
        assert!(a.iter().all(|x| (1..=3).contains(x)));
        // Majority cluster of each blob, then agreement up to relabeling.
        let mut agree = 0;
        for blob in 0..3 {
            let part = &a[blob * 50..(blob + 1) * 50];
            let top = (1..=3).map(|c| part.iter().filter(|x| **x == c).count()).max().unwrap();
            agree += top;
        }
        assert!(agree as f64 / 150.0 > 0.95);
        assert_eq!(a, partition_domains(&pool, 3, 7).unwrap());
    }

    #[test]
    fn too_many_domains() {
        let pool = blobs(2, 1, &[[0.0, 0.0]]);
        assert!(matches!(partition_domains(&pool, 2, 0), Err(Error::Config(_))));
        assert!(partition_domains(&pool, 0, 0).is_err());
    }

    #[test]
    fn assignment_files() {
        assert_eq!(
            parse_assignments("7\n3\n\n7\n# note\n9\n", "f", 4).unwrap(),
            vec![1, 2, 1, 3]
        );
        assert!(matches!(parse_assignments("1\n2\n", "f", 3), Err(Error::Config(_))));
        assert!(matches!(
            parse_assignments("1\nx\n", "f", 2),
            Err(Error::Parse { line: 2, .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, "2\n2\n1\n").unwrap();
        assert_eq!(ingest_assignments(&p, 3).unwrap(), vec![1, 1, 2]);
    }

    #[test]
    fn pseudo_labels_follow_the_source_model() {
        // Category 2 wins whenever the first raw feature is positive.
        let src = SourceModel::new(vec![0.0, 0.0, 1.0, 0.0], 2, 2, true, None).unwrap();
        let pool = vec![
            LabeledSample::new("u", 1, vec![2.0]),
            LabeledSample::new("u", 1, vec![-2.0]),
            LabeledSample::new("u", 2, vec![0.5]),
        ];
        let labeled = predict_labels(&src, &pool).unwrap();
        assert_eq!(labeled.iter().map(|s| s.label).collect::<Vec<_>>(), vec![2, 1, 2]);
        assert_eq!(labeled[1].features, vec![-2.0]);
        assert!(predict_labels(&src, &[]).unwrap().is_empty());
        assert!(predict_labels(&src, &[LabeledSample::new("u", 1, vec![1.0, 2.0])]).is_err());
    }
}
