//! RMSE, seeded k-fold cross-validation, box-plot statistics and the
//! two-model comparison report.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{running_mean, Dataset, TrainingPoint};
use crate::gbrt::{self, GbrtError, GbrtParams};
use crate::mlp::{self, MlpArchitecture, MlpError, TrainConfig};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction vector is empty")]
    EmptyVector,
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("prediction and truth lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("k = {k} exceeds the {n} available points")]
    KTooLarge { n: usize, k: usize },
    #[error("k = {0} is below 2")]
    KTooSmall(usize),
    #[error("cannot summarize an empty list")]
    Empty,
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: TrainError,
    },
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Gbrt(#[from] GbrtError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error("training set is empty")]
    Empty,
}

/// Predicted and true values, in Ah.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionVector {
    pub predicted: Vec<f64>,
    pub truth: Vec<f64>,
}

impl PredictionVector {
    pub fn new(predicted: Vec<f64>, truth: Vec<f64>) -> Result<Self, EvalError> {
        if predicted.len() != truth.len() {
            return Err(EvalError::LengthMismatch(predicted.len(), truth.len()));
        }
        if predicted.is_empty() {
            return Err(EvalError::EmptyVector);
        }
        if let Some(i) = predicted
            .iter()
            .zip(&truth)
            .position(|(p, t)| !(p.is_finite() && t.is_finite()))
        {
            return Err(EvalError::NonFinite(i));
        }
        Ok(PredictionVector { predicted, truth })
    }
}

/// `sqrt(sum((yhat - y)^2) / n)`.
pub fn rmse(v: &PredictionVector) -> f64 {
    let n = v.predicted.len() as f64;
    let sse: f64 = v
        .predicted
        .iter()
        .zip(&v.truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    (sse / n).sqrt()
}

/// Validates and scores in one step.
pub fn rmse_of(predicted: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    Ok(rmse(&PredictionVector::new(predicted.to_vec(), truth.to_vec())?))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub seed: u64,
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// Indices outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Shuffles `0..n` with ChaCha8 seeded by `seed`, then cuts contiguous
/// chunks; the first `n % k` folds hold one extra index.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldSplit, EvalError> {
    if k < 2 {
        return Err(EvalError::KTooSmall(k));
    }
    if k > n {
        return Err(EvalError::KTooLarge { n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(FoldSplit { seed, folds })
}

/// What to train on each fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelRecipe {
    /// Predicts the mean training label.
    MeanLabel,
    Gbrt(GbrtParams),
    Mlp {
        architecture: MlpArchitecture,
        config: TrainConfig,
    },
}

impl ModelRecipe {
    pub fn name(&self) -> &'static str {
        match self {
            ModelRecipe::MeanLabel => "mean",
            ModelRecipe::Gbrt(_) => "gbrt",
            ModelRecipe::Mlp { .. } => "mlp",
        }
    }
}

/// A trained model of any family.
#[derive(Debug, Clone)]
pub enum Fitted {
    Constant(f64),
    Gbrt(gbrt::GbrtModel),
    Mlp(mlp::MlpModel),
}

impl Fitted {
    pub fn predict(&self, x: [f64; 2]) -> f64 {
        match self {
            Fitted::Constant(c) => *c,
            Fitted::Gbrt(m) => m.predict(x),
            Fitted::Mlp(m) => m.predict(x),
        }
    }
}

pub fn fit_recipe(recipe: &ModelRecipe, data: &Dataset) -> Result<Fitted, TrainError> {
    match recipe {
        ModelRecipe::MeanLabel => {
            if data.is_empty() {
                return Err(TrainError::Empty);
            }
            let mean = running_mean(data.points.iter().map(|p| p.received_ah));
            Ok(Fitted::Constant(mean))
        }
        ModelRecipe::Gbrt(p) => Ok(Fitted::Gbrt(gbrt::fit_gbrt(data, p)?)),
        ModelRecipe::Mlp {
            architecture,
            config,
        } => Ok(Fitted::Mlp(mlp::train(data, architecture, config)?.model)),
    }
}

/// RMSE of `recipe` on every fold of `split`, in fold order. Folds train in
/// parallel; each fold's result depends only on its own indices.
pub fn cross_validate(data: &Dataset, recipe: &ModelRecipe, split: &FoldSplit) -> Result<Vec<f64>, EvalError> {
    (0..split.k())
        .into_par_iter()
        .map(|f| {
            let train = data.subset(&split.train_indices(f));
            let model = fit_recipe(recipe, &train).map_err(|source| EvalError::Fold { fold: f, source })?;
            let test: Vec<&TrainingPoint> = split.folds[f].iter().map(|&i| &data.points[i]).collect();
            let predicted: Vec<f64> = test.iter().map(|p| model.predict(p.features())).collect();
            let truth: Vec<f64> = test.iter().map(|p| p.received_ah).collect();
            rmse_of(&predicted, &truth)
        })
        .collect()
}

/// Builds the split from `(k, seed)` and cross-validates.
pub fn cross_validate_seeded(data: &Dataset, recipe: &ModelRecipe, k: usize, seed: u64) -> Result<Vec<f64>, EvalError> {
    let split = kfold_split(data.len(), k, seed)?;
    cross_validate(data, recipe, &split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile at position `(n - 1) * p` of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Quartiles plus Tukey whiskers: each whisker reaches the furthest datum
/// within 1.5 IQR of the box, and anything beyond is an outlier.
pub fn boxplot_stats(values: &[f64]) -> Result<BoxplotStats, EvalError> {
    if values.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&sorted, 0.25), quantile(&sorted, 0.5), quantile(&sorted, 0.75));
    let iqr = q3 - q1;
    let (lo_fence, hi_fence) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let whisker_low = sorted.iter().copied().find(|&v| v >= lo_fence).unwrap_or(q1).min(q1);
    let whisker_high = sorted.iter().rev().copied().find(|&v| v <= hi_fence).unwrap_or(q3).max(q3);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();
    Ok(BoxplotStats {
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        whisker_low,
        whisker_high,
        outliers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEval {
    pub model: String,
    pub recipe: ModelRecipe,
    /// The folds this model was scored on.
    pub folds: Vec<Vec<usize>>,
    pub fold_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub boxplot: BoxplotStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub k: usize,
    pub seed: u64,
    pub n_points: usize,
    pub models: Vec<ModelEval>,
    /// Model with the lowest median fold RMSE, or `"tie"`.
    pub winner_by_median: String,
}

/// Scores every recipe on one shared split.
pub fn compare(data: &Dataset, recipes: &[ModelRecipe], k: usize, seed: u64) -> Result<EvalReport, EvalError> {
    let split = kfold_split(data.len(), k, seed)?;
    let mut models = Vec::with_capacity(recipes.len());
    for recipe in recipes {
        log::info!("cross-validating {} over {k} folds", recipe.name());
        let fold_rmse = cross_validate(data, recipe, &split)?;
        let mean_rmse = fold_rmse.iter().sum::<f64>() / fold_rmse.len() as f64;
        models.push(ModelEval {
            model: recipe.name().to_string(),
            recipe: recipe.clone(),
            folds: split.folds.clone(),
            boxplot: boxplot_stats(&fold_rmse)?,
            fold_rmse,
            mean_rmse,
        });
    }
    let winner_by_median = winner(&models);
    Ok(EvalReport {
        version: REPORT_VERSION,
        k,
        seed,
        n_points: data.len(),
        models,
        winner_by_median,
    })
}

fn winner(models: &[ModelEval]) -> String {
    let Some(best) = models
        .iter()
        .map(|m| m.boxplot.median)
        .min_by(f64::total_cmp)
    else {
        return "tie".into();
    };
    let at_best: Vec<&ModelEval> = models.iter().filter(|m| m.boxplot.median == best).collect();
    match at_best.as_slice() {
        [only] => only.model.clone(),
        _ => "tie".into(),
    }
}

/// Box-plot geometry as `model,stat,value` rows; outliers repeat the
/// `outlier` stat once per value.
pub fn write_boxplot_csv(report: &EvalReport, out: impl Write, fmt: impl Fn(f64) -> String) -> std::io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let io = |e: csv::Error| std::io::Error::other(e);
    w.write_record(["model", "stat", "value"]).map_err(io)?;
    for m in &report.models {
        let b = &m.boxplot;
        let stats = [
            ("min", b.min),
            ("q1", b.q1),
            ("median", b.median),
            ("q3", b.q3),
            ("max", b.max),
            ("whisker_low", b.whisker_low),
            ("whisker_high", b.whisker_high),
        ];
        for (name, v) in stats.into_iter().chain(b.outliers.iter().map(|&v| ("outlier", v))) {
            w.write_record([m.model.as_str(), name, &fmt(v)]).map_err(io)?;
        }
    }
    w.flush()
}
