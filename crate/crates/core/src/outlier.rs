//! Session-level anomaly removal.
//!
//! Each session is summarized as (coil distance, end-to-end consumer
//! increase), the summaries are z-scored per dimension, and DBSCAN labels
//! the low-density ones as noise. Noise sessions are dropped wholesale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Session};

#[derive(Debug, Error)]
pub enum OutlierError {
    #[error("standardization needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid DBSCAN parameters: eps={eps}, min_pts={min_pts}")]
    InvalidParams { eps: f64, min_pts: usize },
    #[error("every session was rejected as noise")]
    AllSessionsRejected,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub distance_cm: f64,
    pub total_increase_mah: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbscanParams {
    /// Neighborhood radius in standardized units.
    pub eps: f64,
    /// Neighborhood size (self included) that makes a point core.
    pub min_pts: usize,
}

impl Default for DbscanParams {
    fn default() -> Self {
        DbscanParams { eps: 0.9, min_pts: 3 }
    }
}

impl DbscanParams {
    pub fn validate(&self) -> Result<(), OutlierError> {
        if !(self.eps > 0.0) || self.min_pts == 0 {
            return Err(OutlierError::InvalidParams {
                eps: self.eps,
                min_pts: self.min_pts,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Cluster(usize),
    Noise,
}

impl Label {
    pub fn is_noise(self) -> bool {
        self == Label::Noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbscanLabeling {
    pub labels: Vec<Label>,
}

impl DbscanLabeling {
    pub fn n_clusters(&self) -> usize {
        self.labels
            .iter()
            .filter_map(|l| match l {
                Label::Cluster(c) => Some(c + 1),
                Label::Noise => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn noise_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i].is_noise()).collect()
    }
}

pub fn summarize_sessions(sessions: &[Session]) -> Result<Vec<SessionSummary>, OutlierError> {
    sessions
        .iter()
        .map(|s| {
            Ok(SessionSummary {
                session_id: s.session_id.clone(),
                distance_cm: s.coil_distance_cm,
                total_increase_mah: s.total_increase_mah()?,
            })
        })
        .collect()
}

/// Per-dimension z-score with population standard deviation. A dimension
/// with zero variance maps to zeros.
pub fn standardize(points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>, OutlierError> {
    if points.len() < 2 {
        return Err(OutlierError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for dim in 0..2 {
        let mean = points.iter().map(|p| p[dim]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for (o, p) in out.iter_mut().zip(points) {
            o[dim] = if sd > 0.0 { (p[dim] - mean) / sd } else { 0.0 };
        }
    }
    Ok(out)
}

fn dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Classic DBSCAN with Euclidean distance. Points are visited in index
/// order and clusters are expanded breadth-first, so the labeling is a
/// deterministic function of the input order.
pub fn dbscan(points: &[[f64; 2]], params: DbscanParams) -> Result<DbscanLabeling, OutlierError> {
    params.validate()?;
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist(&points[i], &points[j]) <= params.eps).collect())
        .collect();
    let is_core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= params.min_pts).collect();

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut next_cluster = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if labels[start].is_some() || !is_core[start] {
            continue;
        }
        let c = Label::Cluster(next_cluster);
        next_cluster += 1;
        labels[start] = Some(c);
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q].is_some() {
                    continue;
                }
                labels[q] = Some(c);
                if is_core[q] {
                    queue.push_back(q);
                }
            }
        }
    }
    Ok(DbscanLabeling {
        labels: labels.into_iter().map(|l| l.unwrap_or(Label::Noise)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub params: DbscanParams,
    pub kept: Vec<String>,
    pub rejected: Vec<String>,
    pub kept_points: usize,
}

#[derive(Debug, Clone)]
pub struct CleanedData {
    pub kept_sessions: Vec<Session>,
    pub rejected_session_ids: Vec<String>,
    pub dataset: Dataset,
}

impl CleanedData {
    pub fn report(&self, params: DbscanParams) -> CleaningReport {
        CleaningReport {
            params,
            kept: self.kept_sessions.iter().map(|s| s.session_id.clone()).collect(),
            rejected: self.rejected_session_ids.clone(),
            kept_points: self.dataset.len(),
        }
    }
}

/// Summarize, standardize, cluster; sessions labelled noise are rejected and
/// the rest become the cleaned training set.
pub fn clean_dataset(sessions: &[Session], params: DbscanParams) -> Result<CleanedData, OutlierError> {
    params.validate()?;
    let summaries = summarize_sessions(sessions)?;
    let raw: Vec<[f64; 2]> = summaries
        .iter()
        .map(|s| [s.distance_cm, s.total_increase_mah])
        .collect();
    let labeling = dbscan(&standardize(&raw)?, params)?;

    let mut kept_sessions = Vec::new();
    let mut rejected_session_ids = Vec::new();
    for (s, label) in sessions.iter().zip(&labeling.labels) {
        if label.is_noise() {
            rejected_session_ids.push(s.session_id.clone());
        } else {
            kept_sessions.push(s.clone());
        }
    }
    if kept_sessions.is_empty() {
        return Err(OutlierError::AllSessionsRejected);
    }
    log::info!(
        "dbscan: {} clusters, {} of {} sessions rejected",
        labeling.n_clusters(),
        rejected_session_ids.len(),
        sessions.len()
    );
    let dataset = Dataset::from_sessions(&kept_sessions)?;
    Ok(CleanedData {
        kept_sessions,
        rejected_session_ids,
        dataset,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{anomalous_sessions, generate, GeneratorConfig};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(eps: f64, min_pts: usize) -> DbscanParams {
        DbscanParams { eps, min_pts }
    }

    #[test]
    fn coincident_points_one_cluster() {
        let pts = vec![[0.3, -1.2]; 8];
        let l = dbscan(&pts, params(0.1, 4)).unwrap();
        assert!(l.labels.iter().all(|&x| x == Label::Cluster(0)));
    }

    #[test]
    fn far_point_is_noise() {
        let mut pts: Vec<[f64; 2]> = (0..3)
            .flat_map(|i| (0..3).map(move |j| [i as f64 * 0.5, j as f64 * 0.5]))
            .collect();
        pts.push([100.0, 100.0]);
        let l = dbscan(&pts, params(2.0, 3)).unwrap();
        // oracle: the grid points all see each other (9 neighbors), the far point only itself
        assert_eq!(l.labels[9], Label::Noise);
        assert!(l.labels[..9].iter().all(|&x| x == Label::Cluster(0)));
    }

    #[test]
    fn empty_and_invalid() {
        assert!(dbscan(&[], params(1.0, 1)).unwrap().labels.is_empty());
        assert!(matches!(dbscan(&[], params(0.0, 1)), Err(OutlierError::InvalidParams { .. })));
        assert!(matches!(dbscan(&[], params(1.0, 0)), Err(OutlierError::InvalidParams { .. })));
        assert!(dbscan(&[], params(f64::NAN, 2)).is_err());
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // two dense groups and one point within eps of both
        let pts = vec![
            [0.0, 0.0], [0.0, 0.1], [0.0, -0.1],
            [2.0, 0.0], [2.0, 0.1], [2.0, -0.1],
            [1.0, 0.0],
        ];
        let l = dbscan(&pts, params(1.0, 4)).unwrap();
        assert_eq!(l.labels[6], Label::Cluster(0));
        assert_eq!(l.labels[3], Label::Cluster(1));
        assert_eq!(l.n_clusters(), 2);
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[[0.0, 0.0], [2.0, 0.0]]).unwrap(), vec![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(standardize(&[[3.0, 4.0]; 4]).unwrap(), vec![[0.0, 0.0]; 4]);
        assert!(matches!(standardize(&[[1.0, 1.0]]), Err(OutlierError::TooFewPoints(1))));
    }

    #[test]
    fn summaries() {
        let cfg = GeneratorConfig { noise_sigma_mah: 0.0, anomaly_session_count: 0, decay_beta: 0.0, duration_min: 15, ..Default::default() };
        let sessions = generate(&cfg).unwrap();
        let s = summarize_sessions(&sessions).unwrap();
        assert_eq!(s.len(), 15);
        assert!(s.iter().all(|x| x.total_increase_mah == 150.0));

        let flat = GeneratorConfig { base_rate_mah_per_min: 0.0, ..cfg };
        let s = summarize_sessions(&generate(&flat).unwrap()).unwrap();
        assert!(s.iter().all(|x| x.total_increase_mah == 0.0));
    }

    #[test]
    fn default_cleaning_rejects_spiked_sessions() {
        for seed in 0..10 {
            let cfg = GeneratorConfig { seed, ..Default::default() };
            let sessions = generate(&cfg).unwrap();
            let cleaned = clean_dataset(&sessions, DbscanParams::default()).unwrap();
            let expected: Vec<String> = anomalous_sessions(&cfg)
                .into_iter()
                .map(|i| sessions[i].session_id.clone())
                .collect();
            assert_eq!(cleaned.rejected_session_ids, expected, "seed {seed}");
            assert_eq!(cleaned.kept_sessions.len(), 9);
            assert_eq!(cleaned.dataset.len(), 270);
        }
    }

    #[test]
    fn clean_without_anomalies_keeps_everything() {
        let cfg = GeneratorConfig { anomaly_session_count: 0, ..Default::default() };
        let sessions = generate(&cfg).unwrap();
        let cleaned = clean_dataset(&sessions, params(1e9, 3)).unwrap();
        assert!(cleaned.rejected_session_ids.is_empty());
        let cleaned = clean_dataset(&sessions, DbscanParams::default()).unwrap();
        assert!(cleaned.rejected_session_ids.is_empty());
        assert_eq!(cleaned.dataset.len(), 450);
    }

    #[test]
    fn two_identical_sessions_kept() {
        let cfg = GeneratorConfig {
            distances_cm: vec![1.0],
            sessions_per_distance: 2,
            noise_sigma_mah: 0.0,
            anomaly_session_count: 0,
            ..Default::default()
        };
        let sessions = generate(&cfg).unwrap();
        let cleaned = clean_dataset(&sessions, params(0.5, 2)).unwrap();
        assert_eq!(cleaned.kept_sessions.len(), 2);
        let report = cleaned.report(params(0.5, 2));
        assert_eq!(report.kept, vec!["S000", "S001"]);
        assert_eq!(report.kept_points, 60);
    }

    #[test]
    fn all_rejected_is_an_error() {
        let sessions = generate(&GeneratorConfig::default()).unwrap();
        assert!(matches!(
            clean_dataset(&sessions, params(1e-6, 2)),
            Err(OutlierError::AllSessionsRejected)
        ));
        assert!(matches!(
            clean_dataset(&sessions[..1], DbscanParams::default()),
            Err(OutlierError::TooFewPoints(1))
        ));
    }

    fn random_points(seed: u64, n: usize) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers: Vec<[f64; 2]> =
            (0..4).map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect();
        (0..n)
            .map(|_| {
                if rng.random_bool(0.2) {
                    [rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0)]
                } else {
                    let c = centers[rng.random_range(0..4)];
                    [c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)]
                }
            })
            .collect()
    }

    proptest! {
        #[test]
        fn noise_partition_permutation_invariant(seed in 0u64..1000, shift in 1usize..50) {
            let pts = random_points(seed, 60);
            let p = params(0.6, 3);
            let base = dbscan(&pts, p).unwrap();
            let mut perm: Vec<usize> = (0..pts.len()).collect();
            perm.rotate_left(shift % pts.len());
            perm.reverse();
            let permuted: Vec<[f64; 2]> = perm.iter().map(|&i| pts[i]).collect();
            let other = dbscan(&permuted, p).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(base.labels[i].is_noise(), other.labels[k].is_noise());
            }
        }

        #[test]
        fn larger_eps_never_adds_noise(seed in 0u64..1000, eps in 0.1f64..1.5, grow in 0.0f64..1.0) {
            let pts = random_points(seed, 50);
            let small = dbscan(&pts, params(eps, 4)).unwrap();
            let large = dbscan(&pts, params(eps + grow, 4)).unwrap();
            for (a, b) in small.labels.iter().zip(&large.labels) {
                prop_assert!(a.is_noise() || !b.is_noise());
            }
        }

        #[test]
        fn standardized_moments(pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 2..50)) {
            let pts: Vec<[f64; 2]> = pts.into_iter().map(|(a, b)| [a, b]).collect();
            let z = standardize(&pts).unwrap();
            let n = z.len() as f64;
            for dim in 0..2 {
                let spread = pts.iter().map(|p| p[dim]).fold(f64::NEG_INFINITY, f64::max)
                    - pts.iter().map(|p| p[dim]).fold(f64::INFINITY, f64::min);
                let mean = z.iter().map(|p| p[dim]).sum::<f64>() / n;
                let var = z.iter().map(|p| (p[dim] - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                if spread > 1e-6 {
                    prop_assert!((var - 1.0).abs() < 1e-9);
                } else if spread == 0.0 {
                    prop_assert_eq!(var, 0.0);
                }
            }
        }
    }
}
