//! Option influence on model-emulated landscapes.
//!
//! Each option is removed in turn ([`ablate_option`]), every model is
//! retrained on the ablated data and the chosen landscape feature of its
//! emulated view is recorded. The resulting model × option matrix, plus a
//! column for the unablated data, is standardized per model and its columns
//! are split into two clusters. Options whose column lands away from the
//! unablated column are reported as influential; `invert` flips that reading.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataspace::{split_train_test, Configuration, DataError, OptionCategory, PerformanceDataset, TrainSize};
use crate::landscape::{feature_profile, mean_profile, Feature, FeatureError, FeatureProfile, WalkParams};
use crate::rng::{self, Rng};
use crate::surrogate::{emulated_view, train, ModelError, ModelSpec};

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("unknown option '{0}'")]
    UnknownOption(String),
    #[error("cannot remove '{0}': it is the last option")]
    LastOption(String),
    #[error("need at least {needed} {what}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("matrix incomplete: {feature} undefined for model '{model}' in column '{column}': {reason}")]
    Incomplete {
        feature: Feature,
        model: String,
        column: String,
        reason: String,
    },
    #[error("non-finite input vector")]
    NonFinite,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Landscape(#[from] FeatureError),
}

/// Name of the column holding features of the unablated data.
pub const ALL_COLUMN: &str = "all";

/// Removes `option`; rows that collide keep the most frequent performance
/// value of their group (the smallest one among equally frequent values).
pub fn ablate_option(dataset: &PerformanceDataset, option: &str) -> Result<PerformanceDataset, InfluenceError> {
    let space = dataset.space();
    let k = space
        .option_index(option)
        .ok_or_else(|| InfluenceError::UnknownOption(option.to_string()))?;
    if space.len() < 2 {
        return Err(InfluenceError::LastOption(option.to_string()));
    }
    let reduced = space.without(k)?;
    let mut groups: Vec<(Configuration, Vec<f64>)> = Vec::new();
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    for (c, y) in dataset.rows() {
        let key = c.without(k);
        match index.get(&key) {
            Some(&g) => groups[g].1.push(*y),
            None => {
                index.insert(key.clone(), groups.len());
                groups.push((key, vec![*y]));
            }
        }
    }
    let rows = groups.into_iter().map(|(c, ys)| (c, mode_smallest(ys))).collect();
    Ok(PerformanceDataset::new(reduced, rows, dataset.provenance)?
        .with_performance_column(dataset.performance_column.clone()))
}

fn mode_smallest(mut ys: Vec<f64>) -> f64 {
    ys.sort_by(f64::total_cmp);
    let (mut best, mut best_count) = (ys[0], 0);
    let mut i = 0;
    while i < ys.len() {
        let mut j = i;
        while j < ys.len() && ys[j] == ys[i] {
            j += 1;
        }
        if j - i > best_count {
            best = ys[i];
            best_count = j - i;
        }
        i = j;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature: Feature,
    pub models: Vec<String>,
    pub options: Vec<String>,
    pub categories: Vec<Option<OptionCategory>>,
    /// `cells[n][k]`: feature of model `n` after removing option `k`.
    pub cells: Vec<Vec<f64>>,
    /// Feature of model `n` on the unablated data.
    pub all: Vec<f64>,
}

/// Settings shared by every cell of a matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixParams {
    pub split: TrainSize,
    pub walk: WalkParams,
    pub seed: u64,
    /// Independent split/train/walk runs averaged into each cell.
    pub repeats: usize,
}

impl MatrixParams {
    pub const DEFAULT_REPEATS: usize = 30;
}

/// Mean profile over `params.repeats` runs. Repeat `r` uses the same seeds in
/// every cell, so all cells of a matrix share their splits.
fn cell_profile(
    dataset: &PerformanceDataset,
    model: ModelSpec,
    params: &MatrixParams,
) -> Result<FeatureProfile, InfluenceError> {
    let runs = (0..params.repeats.max(1) as u64)
        .map(|r| {
            let seed = rng::derive_seed(params.seed, r);
            let (train_set, test) = split_train_test(dataset, params.split, seed)?;
            let fitted = train(model, &train_set, rng::derive_seed(seed, 1))?;
            let points: Vec<Configuration> = test.configurations().cloned().collect();
            let view = emulated_view(&fitted, &points, dataset.space().direction)?;
            Ok(feature_profile(&view, params.walk, rng::derive_seed(seed, 2))?)
        })
        .collect::<Result<Vec<_>, InfluenceError>>()?;
    Ok(mean_profile(&runs).expect("at least one run"))
}

/// Matrices for several features from one round of ablations and trainings.
pub fn build_matrices(
    dataset: &PerformanceDataset,
    models: &[ModelSpec],
    features: &[Feature],
    params: MatrixParams,
) -> Result<BTreeMap<Feature, FeatureMatrix>, InfluenceError> {
    if models.len() < 2 {
        return Err(InfluenceError::TooFew {
            what: "models",
            needed: 2,
            got: models.len(),
        });
    }
    let space = dataset.space();
    let options: Vec<String> = space.options().iter().map(|o| o.name.clone()).collect();
    let mut labels: Vec<String> = Vec::new();
    for m in models {
        let base = m.kind.short().to_string();
        let count = labels.iter().filter(|l| l.split('#').next() == Some(base.as_str())).count();
        labels.push(if count == 0 { base } else { format!("{base}#{}", count + 1) });
    }
    let mut datasets = vec![dataset.clone()];
    for o in &options {
        datasets.push(ablate_option(dataset, o)?);
    }
    let jobs: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|n| (0..datasets.len()).map(move |c| (n, c)))
        .collect();
    let profiles = jobs
        .par_iter()
        .map(|&(n, c)| cell_profile(&datasets[c], models[n], &params))
        .collect::<Result<Vec<_>, _>>()?;
    let column = |c: usize| if c == 0 { ALL_COLUMN.to_string() } else { options[c - 1].clone() };
    let mut out = BTreeMap::new();
    for &feature in features {
        let mut cells = vec![vec![0.0; options.len()]; models.len()];
        let mut all = vec![0.0; models.len()];
        for (&(n, c), p) in jobs.iter().zip(&profiles) {
            let v = match p.get(feature) {
                crate::landscape::FeatureValue::Present(v) if v.is_finite() => *v,
                other => {
                    return Err(InfluenceError::Incomplete {
                        feature,
                        model: labels[n].clone(),
                        column: column(c),
                        reason: match other {
                            crate::landscape::FeatureValue::Absent(r) => r.clone(),
                            _ => "value is not finite".into(),
                        },
                    })
                }
            };
            if c == 0 {
                all[n] = v;
            } else {
                cells[n][c - 1] = v;
            }
        }
        out.insert(
            feature,
            FeatureMatrix {
                feature,
                models: labels.clone(),
                options: options.clone(),
                categories: space.options().iter().map(|o| o.category).collect(),
                cells,
                all,
            },
        );
    }
    Ok(out)
}

pub fn build_matrix(
    dataset: &PerformanceDataset,
    models: &[ModelSpec],
    feature: Feature,
    params: MatrixParams,
) -> Result<FeatureMatrix, InfluenceError> {
    Ok(build_matrices(dataset, models, &[feature], params)?
        .remove(&feature)
        .expect("requested feature"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster label per vector; the first vector is always in cluster 0.
    pub assignment: Vec<u8>,
    /// Within-cluster sum of squares.
    pub inertia: f64,
    /// All vectors identical: a single cluster.
    pub degenerate: bool,
}

/// Number of k-means++ restarts.
pub const KMEANS_RESTARTS: usize = 10;

/// Up to this many vectors the best restart is checked against every 2-partition.
pub const KMEANS_EXHAUSTIVE_LIMIT: usize = 16;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn inertia(vectors: &[Vec<f64>], assignment: &[u8]) -> f64 {
    let dim = vectors[0].len();
    let mut total = 0.0;
    for label in 0..2u8 {
        let members: Vec<&Vec<f64>> = vectors
            .iter()
            .zip(assignment)
            .filter(|(_, a)| **a == label)
            .map(|(v, _)| v)
            .collect();
        if members.is_empty() {
            continue;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|d| members.iter().map(|v| v[d]).sum::<f64>() / members.len() as f64)
            .collect();
        total += members.iter().map(|v| sq_dist(v, &centroid)).sum::<f64>();
    }
    total
}

fn canonical(mut assignment: Vec<u8>) -> Vec<u8> {
    if assignment.first() == Some(&1) {
        for a in &mut assignment {
            *a = 1 - *a;
        }
    }
    assignment
}

fn lloyd(vectors: &[Vec<f64>], rng: &mut Rng) -> Vec<u8> {
    use rand::Rng as _;
    let n = vectors.len();
    let first = rng.gen_range(0..n);
    let d2: Vec<f64> = vectors.iter().map(|v| sq_dist(v, &vectors[first])).collect();
    let total: f64 = d2.iter().sum();
    let mut target = rng.gen::<f64>() * total;
    let mut second = n - 1;
    for (i, d) in d2.iter().enumerate() {
        if *d > 0.0 && target < *d {
            second = i;
            break;
        }
        target -= d;
    }
    if d2[second] == 0.0 {
        second = d2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    }
    let mut centers = [vectors[first].clone(), vectors[second].clone()];
    let mut assignment = vec![0u8; n];
    for _ in 0..100 {
        let next: Vec<u8> = vectors
            .iter()
            .map(|v| u8::from(sq_dist(v, &centers[1]) < sq_dist(v, &centers[0])))
            .collect();
        let changed = next != assignment;
        assignment = next;
        for (label, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = vectors
                .iter()
                .zip(&assignment)
                .filter(|(_, a)| **a as usize == label)
                .map(|(v, _)| v)
                .collect();
            if members.is_empty() {
                continue;
            }
            for (d, c) in center.iter_mut().enumerate() {
                *c = members.iter().map(|v| v[d]).sum::<f64>() / members.len() as f64;
            }
        }
        if !changed {
            break;
        }
    }
    if assignment.iter().all(|a| *a == assignment[0]) {
        let far = d2.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
        assignment[far] = 1 - assignment[0];
    }
    assignment
}

/// Two-means clustering with k-means++ seeding and [`KMEANS_RESTARTS`]
/// restarts; small inputs are also checked exhaustively so the result is the
/// optimal partition there.
pub fn kmeans2(vectors: &[Vec<f64>], seed: u64) -> Result<Clustering, InfluenceError> {
    if vectors.len() < 2 {
        return Err(InfluenceError::TooFew {
            what: "vectors",
            needed: 2,
            got: vectors.len(),
        });
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(InfluenceError::NonFinite);
    }
    if vectors.iter().all(|v| v == &vectors[0]) {
        return Ok(Clustering {
            assignment: vec![0; vectors.len()],
            inertia: 0.0,
            degenerate: true,
        });
    }
    let mut best: Option<(Vec<u8>, f64)> = None;
    for r in 0..KMEANS_RESTARTS {
        let a = canonical(lloyd(vectors, &mut rng::stream(seed, r as u64)));
        let w = inertia(vectors, &a);
        if best.as_ref().is_none_or(|(_, b)| w < *b) {
            best = Some((a, w));
        }
    }
    let (mut assignment, mut w) = best.expect("at least one restart");
    let n = vectors.len();
    if n <= KMEANS_EXHAUSTIVE_LIMIT {
        for mask in 1u32..(1 << (n - 1)) {
            let a: Vec<u8> = (0..n).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as u8 }).collect();
            let wa = inertia(vectors, &a);
            if wa < w - 1e-12 * w.abs().max(1.0) {
                assignment = a;
                w = wa;
            }
        }
    }
    Ok(Clustering {
        assignment,
        inertia: w,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceResult {
    pub feature: Feature,
    pub influential: Vec<String>,
    pub categories: Vec<Option<OptionCategory>>,
    /// Cluster label per column, options first and the unablated column last.
    pub assignment: Vec<u8>,
    pub degenerate: bool,
    pub inverted: bool,
}

/// Per-model z-scores across the columns (options then all); constant rows become zeros.
pub fn standardized_columns(matrix: &FeatureMatrix) -> Vec<Vec<f64>> {
    let cols = matrix.options.len() + 1;
    let rows: Vec<Vec<f64>> = matrix
        .cells
        .iter()
        .zip(&matrix.all)
        .map(|(row, all)| {
            let mut r = row.clone();
            r.push(*all);
            let mean = r.iter().sum::<f64>() / cols as f64;
            let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / cols as f64).sqrt();
            let scale = mean.abs().max(1.0);
            if sd <= 1e-12 * scale {
                vec![0.0; cols]
            } else {
                r.iter().map(|v| (v - mean) / sd).collect()
            }
        })
        .collect();
    (0..cols).map(|c| rows.iter().map(|r| r[c]).collect()).collect()
}

/// Options whose standardized column clusters apart from the unablated one
/// (or with it, when `invert` is set).
pub fn influential_options(matrix: &FeatureMatrix, seed: u64, invert: bool) -> Result<InfluenceResult, InfluenceError> {
    let columns = standardized_columns(matrix);
    let clustering = kmeans2(&columns, seed)?;
    let all_label = *clustering.assignment.last().expect("all column");
    let influential = if clustering.degenerate {
        Vec::new()
    } else {
        matrix
            .options
            .iter()
            .zip(&clustering.assignment)
            .filter(|(_, a)| (**a != all_label) != invert)
            .map(|(o, _)| o.clone())
            .collect()
    };
    let categories = influential
        .iter()
        .map(|o| {
            let k = matrix.options.iter().position(|x| x == o).expect("listed");
            matrix.categories[k]
        })
        .collect();
    Ok(InfluenceResult {
        feature: matrix.feature,
        influential,
        categories,
        assignment: clustering.assignment,
        degenerate: clustering.degenerate,
        inverted: invert,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataspace::{ConfigurationSpace, Direction, Provenance};
    use crate::surrogate::ModelKind;
    use proptest::prelude::*;

    fn cube(n: usize, f: impl Fn(&[usize]) -> f64) -> PerformanceDataset {
        let space = ConfigurationSpace::binary(n, Direction::Minimize);
        let rows = space.enumerate().into_iter().map(|c| {
            let y = f(c.values());
            (c, y)
        });
        PerformanceDataset::new(space, rows.collect(), Provenance::Synthetic).unwrap()
    }

    #[test]
    fn constant_option_only_drops_a_column() {
        let space = ConfigurationSpace::binary(3, Direction::Minimize);
        let rows: Vec<_> = space
            .enumerate()
            .into_iter()
            .filter(|c| c.values()[2] == 0)
            .map(|c| {
                let y = 1.0 + c.values()[0] as f64;
                (c, y)
            })
            .collect();
        let d = PerformanceDataset::new(space, rows, Provenance::Synthetic).unwrap();
        let a = ablate_option(&d, "o2").unwrap();
        assert_eq!(a.len(), d.len());
        assert_eq!(a.space().len(), 2);
    }

    #[test]
    fn collisions_keep_the_mode() {
        let space = ConfigurationSpace::binary(2, Direction::Minimize);
        let rows = vec![
            (Configuration::new(vec![0, 0]), 5.0),
            (Configuration::new(vec![0, 1]), 7.0),
            (Configuration::new(vec![1, 0]), 3.0),
            (Configuration::new(vec![1, 1]), 2.0),
        ];
        let d = PerformanceDataset::new(space, rows, Provenance::Synthetic).unwrap();
        let a = ablate_option(&d, "o1").unwrap();
        assert_eq!(a.len(), 2);
        // both groups tie on frequency, so the smallest value is kept
        assert_eq!(a.performance(&Configuration::new(vec![0])), Some(5.0));
        assert_eq!(a.performance(&Configuration::new(vec![1])), Some(2.0));
        assert_eq!(mode_smallest(vec![7.0, 5.0, 5.0]), 5.0);
        assert!(matches!(ablate_option(&d, "zz"), Err(InfluenceError::UnknownOption(_))));
        let one = ablate_option(&a, "o0");
        assert!(matches!(one, Err(InfluenceError::LastOption(_))));
    }

    #[test]
    fn enumerated_cube_halves() {
        let d = cube(4, |v| v.iter().sum::<usize>() as f64 + 1.0);
        let a = ablate_option(&d, "o3").unwrap();
        assert_eq!(a.len(), 8);
    }

    #[test]
    fn kmeans_examples() {
        let c = kmeans2(&[vec![0.0], vec![0.1], vec![10.0]], 0).unwrap();
        assert_eq!(c.assignment, vec![0, 0, 1]);
        let blobs: Vec<Vec<f64>> = (0..10)
            .map(|i| if i < 5 { vec![i as f64 * 0.01, 0.0] } else { vec![50.0 + i as f64 * 0.01, 50.0] })
            .collect();
        let c = kmeans2(&blobs, 3).unwrap();
        assert_eq!(c.assignment, [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let same = kmeans2(&[vec![1.0], vec![1.0]], 0).unwrap();
        assert!(same.degenerate);
    }

    fn exhaustive(vectors: &[Vec<f64>]) -> f64 {
        let n = vectors.len();
        (1u32..(1 << (n - 1)))
            .map(|mask| {
                let a: Vec<u8> = (0..n).map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as u8 }).collect();
                inertia(vectors, &a)
            })
            .fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn kmeans_is_optimal_on_small_inputs(
            pts in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 2..10),
            seed in 0u64..100,
        ) {
            prop_assume!(pts.iter().any(|p| p != &pts[0]));
            let c = kmeans2(&pts, seed).unwrap();
            prop_assert!((c.inertia - exhaustive(&pts)).abs() < 1e-9);
        }
    }

    fn matrix(cells: Vec<Vec<f64>>, all: Vec<f64>) -> FeatureMatrix {
        let k = cells[0].len();
        FeatureMatrix {
            feature: Feature::Plo,
            models: (0..cells.len()).map(|i| format!("m{i}")).collect(),
            options: (0..k).map(|i| format!("o{i}")).collect(),
            categories: vec![None; k],
            cells,
            all,
        }
    }

    #[test]
    fn influence_examples() {
        let flat = matrix(vec![vec![0.3; 4], vec![0.5; 4]], vec![0.3, 0.5]);
        let r = influential_options(&flat, 0, false).unwrap();
        assert!(r.influential.is_empty());
        assert!(r.degenerate);

        let planted = matrix(
            vec![vec![0.3, 0.31, 0.9, 0.29], vec![0.5, 0.52, 0.1, 0.5]],
            vec![0.3, 0.51],
        );
        let r = influential_options(&planted, 0, false).unwrap();
        assert_eq!(r.influential, vec!["o2".to_string()]);
        let inv = influential_options(&planted, 0, true).unwrap();
        assert_eq!(inv.influential, vec!["o0".to_string(), "o1".into(), "o3".into()]);

        let mut permuted = planted.clone();
        for row in &mut permuted.cells {
            row.swap(0, 2);
        }
        permuted.options.swap(0, 2);
        assert_eq!(influential_options(&permuted, 0, false).unwrap().influential, vec!["o2".to_string()]);
    }

    #[test]
    fn matrix_all_column_matches_unablated_profile() {
        let d = cube(6, |v| 1.0 + 4.0 * v[0] as f64 + v[1] as f64 + 0.5 * (v[2] * v[3]) as f64);
        let params = MatrixParams {
            split: TrainSize::Fraction(0.5),
            walk: WalkParams::default(),
            seed: 5,
            repeats: 2,
        };
        let models = [ModelSpec::new(ModelKind::Cart), ModelSpec::new(ModelKind::LinearRegression)];
        let m = build_matrix(&d, &models, Feature::Ske, params).unwrap();
        assert_eq!(m.cells.len(), 2);
        assert_eq!(m.cells[0].len(), 6);
        let direct = cell_profile(&d, models[0], &params).unwrap();
        assert_eq!(m.all[0], direct.ske.value().unwrap());
        assert_eq!(m, build_matrix(&d, &models, Feature::Ske, params).unwrap());
        assert!(matches!(
            build_matrix(&d, &models[..1], Feature::Ske, params),
            Err(InfluenceError::TooFew { .. })
        ));
    }
}
