//! Oracles shared by the integration suites. None of these call into the
//! implementation paths they check.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wpt_energy::dataset::{Dataset, Provenance, TrainingPoint};
use wpt_energy::outlier::{DbscanLabeling, Label};

/// O(n^2) DBSCAN: clusters are connected components of the core-point graph
/// (union-find over all pairs). A border point joins the adjacent component
/// with the smallest lowest-index core point.
pub fn brute_force_dbscan(points: &[[f64; 2]], eps: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| {
        let dx = points[i][0] - points[j][0];
        let dy = points[i][1] - points[j][1];
        (dx * dx + dy * dy).sqrt() <= eps
    };
    let core: Vec<bool> = (0..n)
        .map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts)
        .collect();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in 0..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    // with min-root union the root of each component is its lowest core index
    (0..n)
        .map(|i| {
            if core[i] {
                Some(find(&mut parent, i))
            } else {
                (0..n)
                    .filter(|&j| core[j] && near(i, j))
                    .map(|j| find(&mut parent, j))
                    .min()
            }
        })
        .collect()
}

/// True when the labelings agree up to a bijective renaming of cluster ids
/// and mark exactly the same points as noise.
pub fn same_up_to_renaming(prod: &DbscanLabeling, oracle: &[Option<usize>]) -> bool {
    if prod.labels.len() != oracle.len() {
        return false;
    }
    let mut fwd = HashMap::new();
    let mut back = HashMap::new();
    prod.labels.iter().zip(oracle).all(|(p, o)| match (p, o) {
        (Label::Noise, None) => true,
        (Label::Cluster(c), Some(r)) => *fwd.entry(*c).or_insert(*r) == *r && *back.entry(*r).or_insert(*c) == *c,
        _ => false,
    })
}

/// Clustered blobs plus uniform background noise.
pub fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.random_range(2..6);
    let centers: Vec<[f64; 2]> = (0..k)
        .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    (0..n)
        .map(|_| {
            if rng.random_bool(0.2) {
                [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)]
            } else {
                let c = centers[rng.random_range(0..k)];
                [c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)]
            }
        })
        .collect()
}

pub fn dataset(rows: &[(f64, f64, f64)]) -> Dataset {
    Dataset::new(
        rows.iter()
            .map(|&(d, t, y)| TrainingPoint {
                distance_cm: d,
                duration_min: t,
                received_ah: y,
            })
            .collect(),
        rows.iter()
            .map(|_| Provenance {
                session_id: "test".into(),
                negative_increase: false,
            })
            .collect(),
    )
}

/// Bytes of every file in `dir`, keyed by file name, excluding manifests.
pub fn snapshot(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

/// A random network with hidden widths in 1..=8, random biases, and a batch
/// of `batch` points whose hidden pre-activations all sit at least `margin`
/// away from the ReLU kink.
pub fn random_network_and_batch(
    seed: u64,
    batch: usize,
    margin: f64,
) -> (wpt_energy::mlp::MlpModel, Vec<TrainingPoint>) {
    use wpt_energy::mlp::{InputScaler, MlpArchitecture, MlpModel};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let widths = [rng.random_range(1..=8), rng.random_range(1..=8), rng.random_range(1..=8)];
    let mut model = MlpModel::init(MlpArchitecture::new(widths).unwrap(), &mut rng);
    for b in model.biases.iter_mut().flatten() {
        *b = rng.random_range(-0.5..0.5);
    }
    model.scaler = InputScaler {
        mean: [1.5, 15.0],
        std: [0.4, 8.0],
    };
    let mut points = Vec::with_capacity(batch);
    while points.len() < batch {
        let p = TrainingPoint {
            distance_cm: rng.random_range(0.8..2.2),
            duration_min: rng.random_range(0.0..31.0),
            received_ah: rng.random_range(-0.5..0.5),
        };
        let pre = model.pre_activations(p.features());
        let hidden = &pre[..pre.len() - 1];
        if hidden.iter().flatten().all(|z| z.abs() > margin) {
            points.push(p);
        }
    }
    (model, points)
}
