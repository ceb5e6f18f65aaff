//! Second-order gradient-boosted regression trees for squared error, with
//! exact greedy split search and grid-search model selection.
//!
//! Each round fits a tree to the gradients `g = pred - y` and hessians
//! `h = 1`. A node with gradient sum `G` and hessian sum `H` scores a split
//! into `L`/`R` as
//!
//! ```text
//! gain = 1/2 * [G_L^2/(H_L+lambda) + G_R^2/(H_R+lambda) - G^2/(H+lambda)] - gamma
//! ```
//!
//! and a leaf takes weight `-G/(H+lambda)`. Predictions are
//! `base_score + eta * sum(leaf weights)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{running_mean, Dataset, TrainingPoint};
use crate::eval::{self, EvalError, FoldSplit, ModelRecipe};

pub const MODEL_VERSION: u32 = 1;
pub const FEATURE_NAMES: [&str; 2] = ["distance_cm", "duration_min"];

#[derive(Debug, Error)]
pub enum GbrtError {
    #[error("cannot fit on {0} points, need at least 2")]
    EmptyDataset(usize),
    #[error("label at index {0} is not finite")]
    NonFiniteLabel(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Eval(#[from] Box<EvalError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbrtParams {
    pub n_rounds: usize,
    pub eta: f64,
    pub max_depth: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
}

impl Default for GbrtParams {
    fn default() -> Self {
        GbrtParams {
            n_rounds: 100,
            eta: 0.3,
            max_depth: 3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
        }
    }
}

impl GbrtParams {
    pub fn validate(&self) -> Result<(), GbrtError> {
        let bad = |m: String| Err(GbrtError::InvalidParams(m));
        if self.n_rounds == 0 {
            return bad("n_rounds must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        Ok(())
    }

    /// The tuple used to break grid-search ties, in key order
    /// `(max_depth, eta, n_rounds, lambda, gamma, min_child_weight)`.
    fn sort_key(&self) -> (usize, f64, usize, f64, f64, f64) {
        (
            self.max_depth,
            self.eta,
            self.n_rounds,
            self.lambda,
            self.gamma,
            self.min_child_weight,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        weight: f64,
    },
    Split {
        /// 0 = distance, 1 = duration.
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub root: Node,
}

impl RegressionTree {
    /// Leaf weight reached by `x`; values below the threshold go left.
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbrtModel {
    pub version: u32,
    pub feature_names: Vec<String>,
    pub params: GbrtParams,
    pub base_score: f64,
    pub trees: Vec<RegressionTree>,
}

impl GbrtModel {
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        self.predict_rounds(x, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: [f64; 2], rounds: usize) -> f64 {
        let sum: f64 = self.trees[..rounds].iter().map(|t| t.predict(x)).sum();
        self.base_score + self.params.eta * sum
    }
}

/// Prediction for one `(distance_cm, duration_min)` input, in Ah.
pub fn predict_gbrt(model: &GbrtModel, distance_cm: f64, duration_min: f64) -> f64 {
    model.predict([distance_cm, duration_min])
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Split gain from the raw gradient/hessian sums of the two children.
pub fn split_gain(g_left: f64, h_left: f64, g_right: f64, h_right: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score(g_left, h_left, lambda) + score(g_right, h_right, lambda)
        - score(g_left + g_right, h_left + h_right, lambda))
        - gamma
}

struct Builder<'a> {
    x: &'a [[f64; 2]],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbrtParams,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], g_total: f64, h_total: f64) -> Option<Candidate> {
        let p = self.params;
        let mut best: Option<Candidate> = None;
        for feature in 0..2 {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let (mut g_left, mut h_left) = (0.0, 0.0);
            for w in 0..order.len() - 1 {
                let i = order[w];
                g_left += self.grad[i];
                h_left += self.hess[i];
                let lo = self.x[i][feature];
                let hi = self.x[order[w + 1]][feature];
                if lo == hi {
                    continue;
                }
                let (g_right, h_right) = (g_total - g_left, h_total - h_left);
                if h_left < p.min_child_weight || h_right < p.min_child_weight {
                    continue;
                }
                let gain = split_gain(g_left, h_left, g_right, h_right, p.lambda, p.gamma);
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(Candidate {
                        feature,
                        threshold: lo + (hi - lo) / 2.0,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&self, idx: &[usize], depth: usize) -> Node {
        let g: f64 = idx.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = idx.iter().map(|&i| self.hess[i]).sum();
        let leaf = Node::Leaf {
            weight: leaf_weight(g, h, self.params.lambda),
        };
        if depth >= self.params.max_depth || idx.len() < 2 {
            return leaf;
        }
        let Some(c) = self.best_split(idx, g, h) else {
            return leaf;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][c.feature] < c.threshold);
        Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            gain: c.gain,
            left: Box::new(self.grow(&left, depth + 1)),
            right: Box::new(self.grow(&right, depth + 1)),
        }
    }
}

fn check_data(points: &[TrainingPoint]) -> Result<(), GbrtError> {
    if points.len() < 2 {
        return Err(GbrtError::EmptyDataset(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.received_ah.is_finite()) {
        return Err(GbrtError::NonFiniteLabel(i));
    }
    Ok(())
}

/// Fits the ensemble. Also returns the training MSE before the first round
/// and after each round (`n_rounds + 1` values).
pub fn fit_gbrt_with_history(
    data: &Dataset,
    params: &GbrtParams,
) -> Result<(GbrtModel, Vec<f64>), GbrtError> {
    params.validate()?;
    check_data(&data.points)?;
    let x: Vec<[f64; 2]> = data.points.iter().map(TrainingPoint::features).collect();
    let y: Vec<f64> = data.points.iter().map(|p| p.received_ah).collect();
    let n = y.len();
    let base_score = running_mean(y.iter().copied());
    let mut pred = vec![base_score; n];
    let hess = vec![1.0; n];
    let all: Vec<usize> = (0..n).collect();
    let mse = |pred: &[f64]| pred.iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n as f64;

    let mut history = vec![mse(&pred)];
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let grad: Vec<f64> = pred.iter().zip(&y).map(|(p, t)| p - t).collect();
        let builder = Builder {
            x: &x,
            grad: &grad,
            hess: &hess,
            params,
        };
        let tree = RegressionTree {
            root: builder.grow(&all, 0),
        };
        for (p, xi) in pred.iter_mut().zip(&x) {
            *p += params.eta * tree.predict(*xi);
        }
        history.push(mse(&pred));
        trees.push(tree);
    }
    let model = GbrtModel {
        version: MODEL_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        params: *params,
        base_score,
        trees,
    };
    Ok((model, history))
}

pub fn fit_gbrt(data: &Dataset, params: &GbrtParams) -> Result<GbrtModel, GbrtError> {
    fit_gbrt_with_history(data, params).map(|(m, _)| m)
}

/// Candidate values per hyperparameter. A key absent from a JSON grid takes
/// the single default value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbrtGrid {
    pub max_depth: Vec<usize>,
    pub eta: Vec<f64>,
    pub n_rounds: Vec<usize>,
    pub lambda: Vec<f64>,
    pub gamma: Vec<f64>,
    pub min_child_weight: Vec<f64>,
}

impl Default for GbrtGrid {
    /// Single-point grid at `GbrtParams::default()`.
    fn default() -> Self {
        let p = GbrtParams::default();
        GbrtGrid {
            max_depth: vec![p.max_depth],
            eta: vec![p.eta],
            n_rounds: vec![p.n_rounds],
            lambda: vec![p.lambda],
            gamma: vec![p.gamma],
            min_child_weight: vec![p.min_child_weight],
        }
    }
}

impl GbrtGrid {
    /// The stock search grid: 3 depths x 2 rates x 2 round counts x 2 lambdas.
    pub fn standard() -> Self {
        GbrtGrid {
            max_depth: vec![2, 3, 4],
            eta: vec![0.1, 0.3],
            n_rounds: vec![50, 100],
            lambda: vec![0.0, 1.0],
            gamma: vec![0.0],
            ..Default::default()
        }
    }

    /// Cartesian product in key order, last key varying fastest.
    pub fn combinations(&self) -> Vec<GbrtParams> {
        let mut out = Vec::new();
        for &max_depth in &self.max_depth {
            for &eta in &self.eta {
                for &n_rounds in &self.n_rounds {
                    for &lambda in &self.lambda {
                        for &gamma in &self.gamma {
                            for &min_child_weight in &self.min_child_weight {
                                out.push(GbrtParams {
                                    n_rounds,
                                    eta,
                                    max_depth,
                                    lambda,
                                    gamma,
                                    min_child_weight,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub params: GbrtParams,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: GbrtParams,
    pub results: Vec<GridResult>,
}

/// Evaluates every grid combination with k-fold CV over one shared split and
/// picks the lowest mean RMSE. Ties go to the lexicographically smallest
/// parameter tuple.
pub fn grid_search(data: &Dataset, grid: &GbrtGrid, k: usize, seed: u64) -> Result<GridSearchOutcome, GbrtError> {
    let combos = grid.combinations();
    if combos.is_empty() {
        return Err(GbrtError::EmptyGrid);
    }
    for p in &combos {
        p.validate()?;
    }
    let split = eval::kfold_split(data.len(), k, seed).map_err(Box::new)?;
    grid_search_with_split(data, &combos, &split)
}

pub fn grid_search_with_split(
    data: &Dataset,
    combos: &[GbrtParams],
    split: &FoldSplit,
) -> Result<GridSearchOutcome, GbrtError> {
    if combos.is_empty() {
        return Err(GbrtError::EmptyGrid);
    }
    let results = combos
        .par_iter()
        .map(|p| {
            let fold_rmse = eval::cross_validate(data, &ModelRecipe::Gbrt(*p), split).map_err(Box::new)?;
            let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
            Ok(GridResult {
                params: *p,
                fold_rmse,
                mean_rmse,
            })
        })
        .collect::<Result<Vec<_>, GbrtError>>()?;
    let best = results
        .iter()
        .min_by(|a, b| {
            a.mean_rmse
                .total_cmp(&b.mean_rmse)
                .then_with(|| a.params.sort_key().partial_cmp(&b.params.sort_key()).unwrap_or(std::cmp::Ordering::Equal))
        })
        .expect("non-empty")
        .params;
    Ok(GridSearchOutcome { best, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dataset(rows: &[(f64, f64, f64)]) -> Dataset {
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
                    session_id: "t".into(),
                    negative_increase: false,
                })
                .collect(),
        )
    }

    fn four_points() -> Dataset {
        dataset(&[(1.0, 1.0, 0.0), (1.0, 2.0, 0.0), (1.0, 3.0, 1.0), (1.0, 4.0, 1.0)])
    }

    fn stump() -> GbrtParams {
        GbrtParams {
            n_rounds: 1,
            eta: 1.0,
            max_depth: 1,
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        }
    }

    fn random_dataset(seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<_> = (0..n)
            .map(|_| {
                let d = [1.0, 1.5, 2.0][rng.random_range(0..3)];
                let t = f64::from(rng.random_range(1..=30));
                let y = 0.01 * t * (-0.8 * (d - 1.0f64)).exp() + rng.random_range(-0.003..0.003);
                (d, t, y)
            })
            .collect();
        dataset(&rows)
    }

    #[test]
    fn four_point_stump() {
        // Oracle by hand: residuals (-.5,-.5,.5,.5) around mean .5.
        // Candidate thresholds 1.5, 2.5, 3.5 on duration have gains
        // 1/6, 1/2, 1/6 (lambda = 0), so 2.5 wins.
        let (model, history) = fit_gbrt_with_history(&four_points(), &stump()).unwrap();
        assert_eq!(model.base_score, 0.5);
        let Node::Split { feature, threshold, gain, left, right } = &model.trees[0].root else {
            panic!("expected a split");
        };
        assert_eq!((*feature, *threshold), (1, 2.5));
        assert!((gain - 0.5).abs() < 1e-12);
        assert_eq!(**left, Node::Leaf { weight: -0.5 });
        assert_eq!(**right, Node::Leaf { weight: 0.5 });
        assert_eq!(*history.last().unwrap(), 0.0);

        assert_eq!(predict_gbrt(&model, 1.0, 1.0), 0.0);
        assert_eq!(predict_gbrt(&model, 1.0, 4.0), 1.0);
        assert_eq!(predict_gbrt(&model, 1.0, 2.5), 1.0);
        assert_eq!(predict_gbrt(&model, 1.0, 2.4999), 0.0);
    }

    #[test]
    fn constant_labels_fixed_point() {
        let ds = dataset(&[(1.0, 1.0, 0.25), (1.5, 2.0, 0.25), (2.0, 3.0, 0.25)]);
        let model = fit_gbrt(&ds, &GbrtParams::default()).unwrap();
        assert_eq!(model.trees.len(), 100);
        for t in &model.trees {
            assert_eq!(t.root, Node::Leaf { weight: 0.0 });
        }
        for x in [[0.0, 0.0], [1.0, 30.0], [9.0, -3.0]] {
            assert_eq!(model.predict(x), 0.25);
        }
    }

    #[test]
    fn huge_lambda_shrinks_to_base() {
        let ds = random_dataset(1, 60);
        let p = GbrtParams { n_rounds: 1, lambda: 1e12, ..Default::default() };
        let model = fit_gbrt(&ds, &p).unwrap();
        for pt in &ds.points {
            assert!((model.predict(pt.features()) - model.base_score).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_ensemble_predicts_base() {
        let mut model = fit_gbrt(&four_points(), &stump()).unwrap();
        model.trees.clear();
        assert_eq!(model.predict([3.0, 7.0]), 0.5);
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_gbrt(&dataset(&[(1.0, 1.0, 0.0)]), &stump()), Err(GbrtError::EmptyDataset(1))));
        let ds = dataset(&[(1.0, 1.0, 0.0), (1.0, 2.0, f64::NAN)]);
        assert!(matches!(fit_gbrt(&ds, &stump()), Err(GbrtError::NonFiniteLabel(1))));
        for bad in [
            GbrtParams { eta: 0.0, ..stump() },
            GbrtParams { eta: 1.5, ..stump() },
            GbrtParams { n_rounds: 0, ..stump() },
            GbrtParams { max_depth: 0, ..stump() },
            GbrtParams { lambda: -1.0, ..stump() },
        ] {
            assert!(matches!(fit_gbrt(&four_points(), &bad), Err(GbrtError::InvalidParams(_))));
        }
    }

    #[test]
    fn depth_and_min_child_weight_respected() {
        let ds = random_dataset(3, 120);
        let p = GbrtParams { max_depth: 2, min_child_weight: 10.0, n_rounds: 20, ..Default::default() };
        let model = fit_gbrt(&ds, &p).unwrap();
        assert!(model.trees.iter().all(|t| t.depth() <= 2));
        // every leaf holds at least 10 training points (hessian 1 each)
        for t in &model.trees {
            fn leaves(n: &Node, pts: Vec<[f64; 2]>, out: &mut Vec<usize>) {
                match n {
                    Node::Leaf { .. } => out.push(pts.len()),
                    Node::Split { feature, threshold, left, right, .. } => {
                        let (l, r) = pts.into_iter().partition(|x| x[*feature] < *threshold);
                        leaves(left, l, out);
                        leaves(right, r, out);
                    }
                }
            }
            let mut sizes = Vec::new();
            leaves(&t.root, ds.points.iter().map(|p| p.features()).collect(), &mut sizes);
            assert!(sizes.iter().all(|&s| s >= 10), "{sizes:?}");
        }
    }

    #[test]
    fn leaf_weights_minimize_round_objective() {
        // objective for a leaf: sum(g*w + h*w^2/2) + lambda*w^2/2
        let ds = random_dataset(5, 80);
        let p = GbrtParams { n_rounds: 5, ..Default::default() };
        let model = fit_gbrt(&ds, &p).unwrap();
        for r in 0..p.n_rounds {
            let grad: Vec<f64> = ds
                .points
                .iter()
                .map(|pt| model.predict_rounds(pt.features(), r) - pt.received_ah)
                .collect();
            let tree = &model.trees[r];
            let mut by_leaf: std::collections::BTreeMap<u64, (f64, Vec<f64>)> = Default::default();
            for (pt, g) in ds.points.iter().zip(&grad) {
                let w = tree.predict(pt.features());
                by_leaf.entry(w.to_bits()).or_insert((w, vec![])).1.push(*g);
            }
            for (w, gs) in by_leaf.values() {
                let obj = |w: f64| gs.iter().map(|g| g * w + 0.5 * w * w).sum::<f64>() + 0.5 * p.lambda * w * w;
                assert!(obj(w + 1e-3) >= obj(*w));
                assert!(obj(w - 1e-3) >= obj(*w));
            }
        }
    }

    #[test]
    fn json_round_trip_and_determinism() {
        let ds = random_dataset(9, 50);
        let a = fit_gbrt(&ds, &GbrtParams::default()).unwrap();
        let b = fit_gbrt(&ds, &GbrtParams::default()).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        let back: GbrtModel = serde_json::from_str(&ja).unwrap();
        assert_eq!(back, a);
        assert!(ja.contains("\"version\":1"));
    }

    #[test]
    fn grid_enumeration() {
        assert_eq!(GbrtGrid::default().combinations(), vec![GbrtParams::default()]);
        assert_eq!(GbrtGrid::standard().combinations().len(), 24);
        let grid: GbrtGrid = serde_json::from_str(r#"{"eta":[1.0],"n_rounds":[1,50]}"#).unwrap();
        let c = grid.combinations();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].max_depth, GbrtParams::default().max_depth);
        assert!(serde_json::from_str::<GbrtGrid>(r#"{"depth":[1]}"#).is_err());
    }

    #[test]
    fn grid_search_singleton_and_counts() {
        let ds = random_dataset(11, 60);
        let out = grid_search(&ds, &GbrtGrid::default(), 3, 0).unwrap();
        assert_eq!(out.best, GbrtParams::default());
        assert_eq!(out.results.len(), 1);

        let grid = GbrtGrid { max_depth: vec![1, 2], eta: vec![0.1, 0.3], n_rounds: vec![10], ..Default::default() };
        let out = grid_search(&ds, &grid, 3, 0).unwrap();
        assert_eq!(out.results.len(), 4);
        assert!(out.results.iter().all(|r| r.fold_rmse.len() == 3));

        let empty = GbrtGrid { eta: vec![], ..Default::default() };
        assert!(matches!(grid_search(&ds, &empty, 3, 0), Err(GbrtError::EmptyGrid)));
    }

    #[test]
    fn grid_search_ties_pick_smallest_tuple() {
        // constant labels: every combination scores exactly 0
        let ds = dataset(&(0..12).map(|i| (1.0, f64::from(i), 0.2)).collect::<Vec<_>>());
        let grid = GbrtGrid { max_depth: vec![4, 2], eta: vec![0.3, 0.1], n_rounds: vec![5], ..Default::default() };
        let out = grid_search(&ds, &grid, 3, 1).unwrap();
        assert_eq!((out.best.max_depth, out.best.eta), (2, 0.1));
    }

    #[test]
    fn more_rounds_win_on_noiseless_nonlinear_data() {
        let rows: Vec<_> = [1.0, 1.5, 2.0]
            .iter()
            .flat_map(|&d| (1..=30).map(move |t| (d, f64::from(t), 0.01 * f64::from(t) * (-0.8 * (d - 1.0f64)).exp())))
            .collect();
        let ds = dataset(&rows);
        let grid = GbrtGrid { eta: vec![1.0], n_rounds: vec![1, 50], ..Default::default() };
        let out = grid_search(&ds, &grid, 10, 0).unwrap();
        assert_eq!(out.best.n_rounds, 50);
        assert!(out.results[1].mean_rmse < out.results[0].mean_rmse);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn training_loss_never_increases(seed in 0u64..10_000, eta in 0.05f64..=1.0, depth in 1usize..5, lambda in 0.0f64..3.0) {
            let ds = random_dataset(seed, 40);
            let p = GbrtParams { n_rounds: 30, eta, max_depth: depth, lambda, gamma: 0.0, min_child_weight: 1.0 };
            let (_, history) = fit_gbrt_with_history(&ds, &p).unwrap();
            for w in history.windows(2) {
                prop_assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
            }
        }
    }
}
