//! Lightweight surrogate models and the landscapes they emulate.
//!
//! Built-in kinds are least-squares linear regression, a CART regression
//! tree, a bagged random forest and Hamming-distance k-nearest neighbors.
//! Predictions of any other model can be ingested from a prediction file
//! (the dataset format with the performance column renamed `predicted`) and
//! wrapped as an `external` model.
//!
//! Configurations are encoded for the regression learners as follows:
//! binary options as 0/1, numeric options as their level value min-max scaled
//! to `[0, 1]`, enumerated options one-hot. kNN works on the raw value
//! indices with Hamming distance; ties are broken by training-row order.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataspace::{
    self, hamming_unchecked, Configuration, ConfigurationSpace, DataError, Direction, OptionKind,
    PerformanceDataset,
};
use crate::landscape::{LandscapeView, ViewSource};
use crate::rng;
use crate::tree::{RegressionTree, TreeParams};

/// Version tag written into serialized model files.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("configuration {0} has no prediction in the external model")]
    NotCovered(Configuration),
    #[error("configuration {0} predicted twice")]
    DuplicatePrediction(Configuration),
    #[error("prediction for {0} is not finite")]
    NonFinite(Configuration),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("unknown model kind '{0}'")]
    UnknownKind(String),
    #[error(transparent)]
    View(#[from] crate::landscape::FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearRegression,
    Cart,
    RandomForest,
    Knn,
    External,
}

impl ModelKind {
    pub const BUILT_IN: [ModelKind; 4] = [
        ModelKind::LinearRegression,
        ModelKind::Cart,
        ModelKind::RandomForest,
        ModelKind::Knn,
    ];

    /// Short identifier used in reports.
    pub fn short(self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "lr",
            ModelKind::Cart => "cart",
            ModelKind::RandomForest => "rf",
            ModelKind::Knn => "knn",
            ModelKind::External => "external",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" | "linear" | "linear-regression" => Ok(ModelKind::LinearRegression),
            "cart" | "dt" | "tree" => Ok(ModelKind::Cart),
            "rf" | "forest" | "random-forest" => Ok(ModelKind::RandomForest),
            "knn" | "k-nn" => Ok(ModelKind::Knn),
            "external" => Ok(ModelKind::External),
            other => Err(ModelError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub trees: usize,
    /// Features per split for forests; `None` means ceil(p / 3).
    pub max_features: Option<usize>,
    pub k: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 2,
            trees: 100,
            max_features: None,
            k: 3,
        }
    }
}

/// An unfitted model: kind plus settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub params: ModelParams,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            params: ModelParams::default(),
        }
    }

    pub fn with_params(mut self, params: ModelParams) -> Self {
        self.params = params;
        self
    }

    fn validate(&self) -> Result<(), ModelError> {
        let p = &self.params;
        match self.kind {
            ModelKind::Knn if p.k == 0 => Err(ModelError::InvalidParams("k must be positive".into())),
            ModelKind::RandomForest if p.trees == 0 => {
                Err(ModelError::InvalidParams("a forest needs at least one tree".into()))
            }
            ModelKind::Cart | ModelKind::RandomForest if p.min_leaf == 0 => {
                Err(ModelError::InvalidParams("min_leaf must be positive".into()))
            }
            ModelKind::RandomForest if p.max_features == Some(0) => {
                Err(ModelError::InvalidParams("max_features must be positive".into()))
            }
            ModelKind::External => Err(ModelError::InvalidParams(
                "external models are built from prediction files, not trained".into(),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Column {
    Binary,
    Numeric { levels: Vec<f64> },
    OneHot { width: usize },
}

/// Maps configurations onto regression features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    columns: Vec<Column>,
}

impl Encoder {
    pub fn new(space: &ConfigurationSpace) -> Self {
        let columns = space
            .options()
            .iter()
            .map(|o| match o.kind {
                OptionKind::Binary => Column::Binary,
                OptionKind::Numeric => Column::Numeric {
                    levels: o.values().iter().filter_map(|v| v.as_f64()).collect(),
                },
                OptionKind::Enumerated => Column::OneHot { width: o.len() },
            })
            .collect();
        Self { columns }
    }

    pub fn options(&self) -> usize {
        self.columns.len()
    }

    pub fn width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                Column::OneHot { width } => *width,
                _ => 1,
            })
            .sum()
    }

    pub fn encode(&self, c: &Configuration) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (col, &v) in self.columns.iter().zip(c.values()) {
            match col {
                Column::Binary => out.push(v as f64),
                Column::Numeric { levels } => {
                    let lo = levels[0];
                    let hi = levels[levels.len() - 1];
                    out.push(if hi > lo { (levels[v] - lo) / (hi - lo) } else { 0.0 });
                }
                Column::OneHot { width } => {
                    out.extend((0..*width).map(|k| if k == v { 1.0 } else { 0.0 }));
                }
            }
        }
        out
    }

    fn check(&self, c: &Configuration) -> Result<(), DataError> {
        if c.len() != self.columns.len() {
            return Err(DataError::SpaceMismatch {
                expected: self.columns.len(),
                got: c.len(),
            });
        }
        for (i, (col, &v)) in self.columns.iter().zip(c.values()).enumerate() {
            let n = match col {
                Column::Binary => 2,
                Column::Numeric { levels } => levels.len(),
                Column::OneHot { width } => *width,
            };
            if v >= n {
                return Err(DataError::IndexOutOfRange {
                    option: format!("#{i}"),
                    index: v,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum FittedState {
    Linear { intercept: f64, coefficients: Vec<f64> },
    Tree { tree: RegressionTree },
    Forest { trees: Vec<RegressionTree> },
    Knn { points: Vec<Configuration>, targets: Vec<f64>, k: usize },
    External { table: Vec<(Configuration, f64)> },
}

/// A fitted surrogate model. Prediction is deterministic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    format_version: u32,
    label: String,
    spec: ModelSpec,
    encoder: Encoder,
    state: FittedState,
    train_fingerprint: String,
    #[serde(skip)]
    lookup: Option<HashMap<Configuration, f64>>,
}

/// Hex SHA-256 over the (configuration, performance) rows.
pub fn fingerprint(rows: &[(Configuration, f64)]) -> String {
    let mut h = Sha256::new();
    for (c, y) in rows {
        for v in c.values() {
            h.update((*v as u64).to_le_bytes());
        }
        h.update(y.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Fits `spec` on `train`; `seed` drives forest bootstraps and feature sampling.
pub fn train(spec: ModelSpec, train: &PerformanceDataset, seed: u64) -> Result<SurrogateModel, ModelError> {
    spec.validate()?;
    if train.is_empty() {
        return Err(ModelError::EmptyTraining);
    }
    let encoder = Encoder::new(train.space());
    let x: Vec<Vec<f64>> = train.configurations().map(|c| encoder.encode(c)).collect();
    let y: Vec<f64> = train.rows().iter().map(|(_, y)| *y).collect();
    let all: Vec<usize> = (0..y.len()).collect();
    let tree_params = TreeParams {
        max_depth: spec.params.max_depth,
        min_leaf: spec.params.min_leaf,
        max_features: None,
    };
    let state = match spec.kind {
        ModelKind::LinearRegression => fit_linear(&x, &y),
        ModelKind::Cart => FittedState::Tree {
            tree: RegressionTree::fit(&x, &y, &all, tree_params, None),
        },
        ModelKind::RandomForest => {
            let p = encoder.width();
            let m = spec.params.max_features.unwrap_or(p.div_ceil(3)).clamp(1, p.max(1));
            let params = TreeParams {
                max_features: Some(m),
                ..tree_params
            };
            let n = y.len();
            let trees = (0..spec.params.trees)
                .map(|t| {
                    let mut r = rng::stream(seed, t as u64);
                    let boot: Vec<usize> = (0..n).map(|_| r.gen_range(0..n)).collect();
                    RegressionTree::fit(&x, &y, &boot, params, Some(&mut r))
                })
                .collect();
            FittedState::Forest { trees }
        }
        ModelKind::Knn => FittedState::Knn {
            points: train.configurations().cloned().collect(),
            targets: y.clone(),
            k: spec.params.k,
        },
        ModelKind::External => unreachable!("rejected by validate"),
    };
    Ok(SurrogateModel {
        format_version: MODEL_FORMAT_VERSION,
        label: spec.kind.short().to_string(),
        spec,
        encoder,
        state,
        train_fingerprint: fingerprint(train.rows()),
        lookup: None,
    })
}

fn fit_linear(x: &[Vec<f64>], y: &[f64]) -> FittedState {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[i][j - 1] });
    let target = DVector::from_column_slice(y);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * 1e-10 * (n.max(p + 1) as f64);
    if svd.rank(eps) < p + 1 {
        log::warn!("linear regression design is rank deficient; using the pseudo-inverse solution");
    }
    let beta = svd
        .solve(&target, eps)
        .unwrap_or_else(|_| DVector::zeros(p + 1));
    FittedState::Linear {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
    }
}

/// Predictions of one model over a set of configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    pairs: Vec<(Configuration, f64)>,
}

impl PredictionSet {
    pub fn new(model: impl Into<String>, pairs: Vec<(Configuration, f64)>) -> Result<Self, ModelError> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for (c, y) in &pairs {
            if !seen.insert(c) {
                return Err(ModelError::DuplicatePrediction(c.clone()));
            }
            if !y.is_finite() {
                return Err(ModelError::NonFinite(c.clone()));
            }
        }
        Ok(Self {
            model: model.into(),
            pairs,
        })
    }

    pub fn pairs(&self) -> &[(Configuration, f64)] {
        &self.pairs
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|(_, y)| *y).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl SurrogateModel {
    /// Wraps ingested predictions as a lookup-table model.
    pub fn external(predictions: &PredictionSet, space: &ConfigurationSpace) -> Result<Self, ModelError> {
        for (c, _) in predictions.pairs() {
            space.validate(c)?;
        }
        let mut model = Self {
            format_version: MODEL_FORMAT_VERSION,
            label: predictions.model.clone(),
            spec: ModelSpec {
                kind: ModelKind::External,
                params: ModelParams::default(),
            },
            encoder: Encoder::new(space),
            state: FittedState::External {
                table: predictions.pairs().to_vec(),
            },
            train_fingerprint: fingerprint(predictions.pairs()),
            lookup: None,
        };
        model.build_lookup();
        Ok(model)
    }

    fn build_lookup(&mut self) {
        if let FittedState::External { table } = &self.state {
            self.lookup = Some(table.iter().cloned().collect());
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.spec.kind
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn train_fingerprint(&self) -> &str {
        &self.train_fingerprint
    }

    /// Intercept of a linear model.
    pub fn intercept(&self) -> Option<f64> {
        match &self.state {
            FittedState::Linear { intercept, .. } => Some(*intercept),
            _ => None,
        }
    }

    /// Per-tree predictions of a forest at `c`.
    pub fn tree_predictions(&self, c: &Configuration) -> Option<Vec<f64>> {
        match &self.state {
            FittedState::Forest { trees } => {
                let row = self.encoder.encode(c);
                Some(trees.iter().map(|t| t.predict(&row)).collect())
            }
            _ => None,
        }
    }

    pub fn has_uncertainty(&self) -> bool {
        matches!(self.state, FittedState::Forest { .. })
    }

    /// Prediction at one configuration (unchecked against the space).
    pub fn predict_one(&self, c: &Configuration) -> Result<f64, ModelError> {
        let y = match &self.state {
            FittedState::Linear {
                intercept,
                coefficients,
            } => {
                let row = self.encoder.encode(c);
                intercept + coefficients.iter().zip(&row).map(|(b, x)| b * x).sum::<f64>()
            }
            FittedState::Tree { tree } => tree.predict(&self.encoder.encode(c)),
            FittedState::Forest { trees } => {
                let row = self.encoder.encode(c);
                trees.iter().map(|t| t.predict(&row)).sum::<f64>() / trees.len() as f64
            }
            FittedState::Knn { points, targets, k } => knn_predict(points, targets, *k, c),
            FittedState::External { table } => match &self.lookup {
                Some(map) => *map.get(c).ok_or_else(|| ModelError::NotCovered(c.clone()))?,
                None => table
                    .iter()
                    .find(|(p, _)| p == c)
                    .map(|(_, y)| *y)
                    .ok_or_else(|| ModelError::NotCovered(c.clone()))?,
            },
        };
        if !y.is_finite() {
            return Err(ModelError::NonFinite(c.clone()));
        }
        Ok(y)
    }
}

fn knn_predict(points: &[Configuration], targets: &[f64], k: usize, c: &Configuration) -> f64 {
    let mut dist: Vec<(usize, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (hamming_unchecked(p.values(), c.values()), i))
        .collect();
    let k = k.min(dist.len());
    if k < dist.len() {
        dist.select_nth_unstable(k - 1);
        dist.truncate(k);
    }
    dist.iter().map(|&(_, i)| targets[i]).sum::<f64>() / k as f64
}

/// One prediction per configuration.
pub fn predict(model: &SurrogateModel, configs: &[Configuration]) -> Result<PredictionSet, ModelError> {
    let pairs = configs
        .iter()
        .map(|c| {
            model.encoder.check(c)?;
            Ok((c.clone(), model.predict_one(c)?))
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    PredictionSet::new(model.label.clone(), pairs)
}

/// Landscape emulated by `model` over `test_points`, oriented by `direction`.
pub fn emulated_view(
    model: &SurrogateModel,
    test_points: &[Configuration],
    direction: Direction,
) -> Result<LandscapeView, ModelError> {
    if test_points.is_empty() {
        return Err(crate::landscape::FeatureError::EmptyView.into());
    }
    let preds = predict(model, test_points)?;
    let fitness = preds.pairs.iter().map(|(_, y)| direction.orient(*y)).collect();
    Ok(LandscapeView::new(
        test_points.to_vec(),
        fitness,
        ViewSource::Model(model.label.clone()),
        1,
    )?)
}

/// Column holding predictions in a prediction file.
pub const PREDICTED_COLUMN: &str = "predicted";

/// Reads a prediction file (dataset layout, value column `predicted`).
pub fn load_external_predictions(
    path: &Path,
    space: &ConfigurationSpace,
    model: &str,
) -> Result<PredictionSet, ModelError> {
    let table = dataspace::read_table(path)?;
    let names: Vec<&str> = space.options().iter().map(|o| o.name.as_str()).collect();
    let (option_cols, value_col) = dataspace::map_columns(path, &table.header, &names, PREDICTED_COLUMN)?;
    let mut pairs = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        let c = dataspace::parse_configuration(path, space, &option_cols, *line, cells)?;
        let y = dataspace::parse_number(path, *line, PREDICTED_COLUMN, &cells[value_col])?;
        pairs.push((c, y));
    }
    PredictionSet::new(model, pairs)
}

pub fn write_predictions(
    predictions: &PredictionSet,
    space: &ConfigurationSpace,
    path: &Path,
) -> Result<(), ModelError> {
    dataspace::write_rows(
        path,
        space,
        PREDICTED_COLUMN,
        predictions.pairs.iter().map(|(c, y)| (c, *y)),
    )?;
    Ok(())
}

pub fn save_model(model: &SurrogateModel, path: &Path) -> Result<(), ModelError> {
    let io = |e: std::io::Error| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let text = serde_json::to_string_pretty(model).map_err(|e| ModelError::Format(e.to_string()))?;
    let mut f = File::create(path).map_err(io)?;
    f.write_all(text.as_bytes()).map_err(io)
}

pub fn load_model(path: &Path) -> Result<SurrogateModel, ModelError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut model: SurrogateModel =
        serde_json::from_str(&text).map_err(|e| ModelError::Format(e.to_string()))?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(ModelError::Format(format!(
            "unsupported model format version {}",
            model.format_version
        )));
    }
    model.build_lookup();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{OptionSchema, Provenance};
    use crate::landscape::{feature_profile, WalkParams};
    use crate::metrics::mape;

    fn dataset(n: usize, f: impl Fn(&Configuration) -> f64) -> PerformanceDataset {
        let space = ConfigurationSpace::binary(n, Direction::Minimize);
        let rows = space.enumerate().into_iter().map(|c| {
            let y = f(&c);
            (c, y)
        }).collect();
        PerformanceDataset::new(space, rows, Provenance::Synthetic).unwrap()
    }

    fn linear(c: &Configuration) -> f64 {
        let w = [3.0, -1.5, 0.25, 2.0];
        5.0 + c.values().iter().zip(w).map(|(&v, w)| v as f64 * w).sum::<f64>()
    }

    #[test]
    fn linear_regression_recovers_noiseless_target() {
        let d = dataset(4, linear);
        let m = train(ModelSpec::new(ModelKind::LinearRegression), &d, 0).unwrap();
        for (c, y) in d.rows() {
            assert!((m.predict_one(c).unwrap() - y).abs() < 1e-8);
        }
        assert!((m.intercept().unwrap() - 5.0).abs() < 1e-8);
        let zero = Configuration::new(vec![0; 4]);
        assert!((m.predict_one(&zero).unwrap() - m.intercept().unwrap()).abs() < 1e-12);
    }

    #[test]
    fn linear_regression_tolerates_collinear_columns() {
        let space = ConfigurationSpace::binary(3, Direction::Minimize);
        // option 2 always equals option 1
        let rows: Vec<_> = [[0, 0, 0], [0, 1, 1], [1, 0, 0], [1, 1, 1]]
            .iter()
            .map(|v| (Configuration::new(v.to_vec()), 1.0 + v[0] as f64 + 2.0 * v[1] as f64))
            .collect();
        let d = PerformanceDataset::new(space, rows, Provenance::Synthetic).unwrap();
        let m = train(ModelSpec::new(ModelKind::LinearRegression), &d, 0).unwrap();
        for (c, y) in d.rows() {
            assert!((m.predict_one(c).unwrap() - y).abs() < 1e-8);
        }
    }

    #[test]
    fn unlimited_cart_memorizes() {
        let space = ConfigurationSpace::binary(3, Direction::Minimize);
        let rows: Vec<_> = [[0, 0, 1], [1, 0, 0], [1, 1, 0], [0, 1, 1]]
            .iter()
            .zip([4.0, 9.0, 1.5, 6.0])
            .map(|(v, y)| (Configuration::new(v.to_vec()), y))
            .collect();
        let d = PerformanceDataset::new(space, rows, Provenance::Synthetic).unwrap();
        let spec = ModelSpec::new(ModelKind::Cart).with_params(ModelParams {
            min_leaf: 1,
            ..Default::default()
        });
        let m = train(spec, &d, 0).unwrap();
        let configs: Vec<_> = d.configurations().cloned().collect();
        let preds = predict(&m, &configs).unwrap();
        let actual: Vec<f64> = d.rows().iter().map(|(_, y)| *y).collect();
        assert_eq!(preds.values(), actual);
        assert_eq!(mape(&actual, &preds.values()).unwrap(), 0.0);
    }

    #[test]
    fn forest_is_deterministic_and_averages_trees() {
        let d = dataset(5, |c| 1.0 + c.values().iter().sum::<usize>() as f64);
        let spec = ModelSpec::new(ModelKind::RandomForest).with_params(ModelParams {
            trees: 20,
            ..Default::default()
        });
        let a = train(spec, &d, 9).unwrap();
        let b = train(spec, &d, 9).unwrap();
        let configs: Vec<_> = d.configurations().cloned().collect();
        assert_eq!(predict(&a, &configs).unwrap(), predict(&b, &configs).unwrap());
        for c in &configs {
            let trees = a.tree_predictions(c).unwrap();
            let mean = trees.iter().sum::<f64>() / trees.len() as f64;
            assert!((a.predict_one(c).unwrap() - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn knn_nearest_self_and_tie_rule() {
        let d = dataset(3, |c| 1.0 + c.values()[0] as f64 * 10.0 + c.values()[2] as f64);
        let spec = ModelSpec::new(ModelKind::Knn).with_params(ModelParams {
            k: 1,
            ..Default::default()
        });
        let m = train(spec, &d, 0).unwrap();
        for (c, y) in d.rows() {
            assert_eq!(m.predict_one(c).unwrap(), *y);
        }
        // k = 3 at (0,0,0) on the full cube: distance 0 then three points at distance 1,
        // of which the first two in training order are (0,0,1) and (0,1,0).
        let m3 = train(ModelSpec::new(ModelKind::Knn), &d, 0).unwrap();
        let c = Configuration::new(vec![0, 0, 0]);
        let expected = (1.0 + 2.0 + 1.0) / 3.0;
        assert!((m3.predict_one(&c).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn encoder_layout() {
        let space = ConfigurationSpace::new(
            vec![
                OptionSchema::binary("a"),
                OptionSchema::numeric("b", vec![2.0, 4.0, 10.0]).unwrap(),
                OptionSchema::enumerated("c", vec!["x".into(), "y".into(), "z".into()]).unwrap(),
            ],
            Direction::Minimize,
        )
        .unwrap();
        let e = Encoder::new(&space);
        assert_eq!(e.width(), 5);
        assert_eq!(e.encode(&Configuration::new(vec![1, 1, 2])), vec![1.0, 0.25, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn perfect_model_reproduces_exact_profile() {
        let d = dataset(5, |c| {
            let v = c.values();
            1.0 + (v[0] * 3 + v[1] * 2 + v[2] * v[3] + v[4]) as f64
        });
        let table = PredictionSet::new("oracle", d.rows().to_vec()).unwrap();
        let model = SurrogateModel::external(&table, d.space()).unwrap();
        let points: Vec<_> = d.configurations().cloned().collect();
        let view = emulated_view(&model, &points, Direction::Minimize).unwrap();
        let exact = LandscapeView::from_dataset(&d, ViewSource::Exact).unwrap();
        assert_eq!(view.len(), points.len());
        let a = feature_profile(&view, WalkParams::default(), 3).unwrap();
        let b = feature_profile(&exact, WalkParams::default(), 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn constant_model_gives_plateau() {
        let d = dataset(4, |_| 2.0);
        let m = train(ModelSpec::new(ModelKind::Cart), &d, 0).unwrap();
        let points: Vec<_> = d.configurations().cloned().collect();
        let v = emulated_view(&m, &points, Direction::Minimize).unwrap();
        let p = feature_profile(&v, WalkParams::default(), 0).unwrap();
        assert_eq!(p.plo.value(), Some(1.0));
        assert!(p.fdc.value().is_none());
        assert!(p.nbc.value().is_none());
    }

    #[test]
    fn external_model_rejects_uncovered_configurations() {
        let d = dataset(2, |_| 1.0);
        let set = PredictionSet::new("ext", d.rows()[..2].to_vec()).unwrap();
        let m = SurrogateModel::external(&set, d.space()).unwrap();
        let missing = d.rows()[3].0.clone();
        assert!(matches!(predict(&m, &[missing]), Err(ModelError::NotCovered(_))));
    }

    #[test]
    fn model_file_round_trip() {
        let d = dataset(4, linear);
        let m = train(ModelSpec::new(ModelKind::Cart), &d, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, m);
    }
}
