//! Learning to rank model-tuner pairs.
//!
//! Each (system, model, tuner) becomes a record with three feature groups:
//! signed landscape deviations `F_l = (g_model − g_system, l_model − l_system)`,
//! accuracy `F_a = (MAPE, μRD)` and the one-hot tuner characteristics `F_t`.
//! A LambdaMART ensemble (LambdaRank gradients fitted by regression trees)
//! scores records; systems act as queries. One model is trained per tuner
//! pattern.
//!
//! Ranks `y` follow the convention 1 = best. NDCG gains are linear in
//! `max_rank − y`; AP treats the true top half (`y ≤ n/2`) as relevant.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dominance::{signed_deviation, DominanceError};
use crate::landscape::{FeatureProfile, GlobalFeature, LocalFeature};
use crate::metrics::{mean, wilcoxon_rank_sum, AccuracyReport};
use crate::rng;
use crate::tree::{RegressionTree, TreeParams};

/// Version tag written into serialized ranker files.
pub const RANK_MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("training needs at least two systems, got {0}")]
    TooFewQueries(usize),
    #[error("system '{0}' has fewer than two records")]
    QueryTooSmall(String),
    #[error("evaluation needs at least three systems, got {0}")]
    TooFewSystems(usize),
    #[error("record {0} has no rank label")]
    MissingLabel(usize),
    #[error("records mix sequential and batch tuners")]
    MixedPatterns,
    #[error("record layout {got} does not match the model layout {expected}")]
    LayoutMismatch { expected: String, got: String },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("no relevant item in the ranking")]
    NoRelevant,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{system}: missing {what} for model '{model}' and tuner '{tuner}'")]
    MissingInput {
        system: String,
        model: String,
        tuner: String,
        what: String,
    },
    #[error(transparent)]
    Feature(#[from] DominanceError),
    #[error("invalid tuner encoding: {0}")]
    Encoding(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid file: {0}")]
    Format(String),
}

macro_rules! vocabulary {
    ($(#[$doc:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|v| *v == self).expect("listed")
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = RankError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                Self::ALL
                    .iter()
                    .copied()
                    .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
                    .ok_or_else(|| RankError::Encoding(format!("unknown {} '{s}'", stringify!($name))))
            }
        }
    };
}

vocabulary!(
    /// Tuner design pattern.
    Pattern { Sequential => "sequential", Batch => "batch" }
);
vocabulary!(Reduction { Lasso => "lasso", Gini => "gini", MultiSensitivity => "multi-sensitivity", None => "none" });
vocabulary!(Acquisition { Ei => "ei", Ucb => "ucb", Hedge => "hedge", MaxMean => "max-mean" });
vocabulary!(SeqHeuristic {
    Greedy => "greedy",
    GradientDescent => "gradient-descent",
    LocalSearch => "local-search",
    SelectiveExploration => "selective-exploration",
});
vocabulary!(Domain {
    Database => "database",
    Hyperparameter => "hyperparameter",
    DesignModels => "design-models",
    General => "general",
});
vocabulary!(BatchHeuristic {
    Evolutionary => "evolutionary",
    LocalSearch => "local-search",
    Sampling => "sampling",
    Random => "random",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "pattern", rename_all = "lowercase")]
pub enum TunerCharacteristics {
    Sequential {
        reduction: Reduction,
        acquisition: Acquisition,
        heuristic: SeqHeuristic,
    },
    Batch {
        domain: Domain,
        incremental: bool,
        heuristic: BatchHeuristic,
    },
}

impl TunerCharacteristics {
    pub fn pattern(&self) -> Pattern {
        match self {
            TunerCharacteristics::Sequential { .. } => Pattern::Sequential,
            TunerCharacteristics::Batch { .. } => Pattern::Batch,
        }
    }

    /// Encoded segments as bit strings, e.g. `["0100", "1000", "0001"]`.
    pub fn segments(&self) -> [String; 3] {
        let bits = |v: Vec<f64>| v.iter().map(|b| if *b == 1.0 { '1' } else { '0' }).collect::<String>();
        let e = encode_tuner(self);
        match self.pattern() {
            Pattern::Sequential => [bits(e[0..4].to_vec()), bits(e[4..8].to_vec()), bits(e[8..12].to_vec())],
            Pattern::Batch => [bits(e[0..4].to_vec()), bits(e[4..5].to_vec()), bits(e[5..9].to_vec())],
        }
    }

    pub fn from_segments(pattern: Pattern, segments: &[&str]) -> Result<Self, RankError> {
        let mut v = Vec::new();
        for s in segments {
            for ch in s.trim().chars() {
                v.push(match ch {
                    '0' => 0.0,
                    '1' => 1.0,
                    _ => return Err(RankError::Encoding(format!("'{s}' is not a bit string"))),
                });
            }
        }
        decode_tuner(pattern, &v)
    }
}

fn one_hot(len: usize, at: usize) -> impl Iterator<Item = f64> {
    (0..len).map(move |i| if i == at { 1.0 } else { 0.0 })
}

/// Width of the tuner encoding for a pattern.
pub fn tuner_width(pattern: Pattern) -> usize {
    match pattern {
        Pattern::Sequential => 12,
        Pattern::Batch => 9,
    }
}

pub fn encode_tuner(tc: &TunerCharacteristics) -> Vec<f64> {
    match *tc {
        TunerCharacteristics::Sequential {
            reduction,
            acquisition,
            heuristic,
        } => one_hot(4, reduction.index())
            .chain(one_hot(4, acquisition.index()))
            .chain(one_hot(4, heuristic.index()))
            .collect(),
        TunerCharacteristics::Batch {
            domain,
            incremental,
            heuristic,
        } => one_hot(4, domain.index())
            .chain(std::iter::once(if incremental { 1.0 } else { 0.0 }))
            .chain(one_hot(4, heuristic.index()))
            .collect(),
    }
}

fn hot_index(segment: &[f64]) -> Result<usize, RankError> {
    let ones: Vec<usize> = segment
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == 1.0)
        .map(|(i, _)| i)
        .collect();
    if ones.len() != 1 || segment.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(RankError::Encoding(format!("segment {segment:?} is not one-hot")));
    }
    Ok(ones[0])
}

pub fn decode_tuner(pattern: Pattern, v: &[f64]) -> Result<TunerCharacteristics, RankError> {
    if v.len() != tuner_width(pattern) {
        return Err(RankError::Encoding(format!(
            "expected {} bits for a {pattern} tuner, got {}",
            tuner_width(pattern),
            v.len()
        )));
    }
    Ok(match pattern {
        Pattern::Sequential => TunerCharacteristics::Sequential {
            reduction: Reduction::ALL[hot_index(&v[0..4])?],
            acquisition: Acquisition::ALL[hot_index(&v[4..8])?],
            heuristic: SeqHeuristic::ALL[hot_index(&v[8..12])?],
        },
        Pattern::Batch => TunerCharacteristics::Batch {
            domain: Domain::ALL[hot_index(&v[0..4])?],
            incremental: match v[4] {
                x if x == 1.0 => true,
                x if x == 0.0 => false,
                x => return Err(RankError::Encoding(format!("incremental bit {x}"))),
            },
            heuristic: BatchHeuristic::ALL[hot_index(&v[5..9])?],
        },
    })
}

/// Default (global, local) features per pattern.
pub fn default_features(pattern: Pattern) -> (GlobalFeature, LocalFeature) {
    match pattern {
        Pattern::Sequential => (GlobalFeature::Kur, LocalFeature::Mie),
        Pattern::Batch => (GlobalFeature::Ske, LocalFeature::Plo),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub system: String,
    pub model: String,
    pub tuner: String,
    pub global_feature: GlobalFeature,
    pub local_feature: LocalFeature,
    /// Signed (global, local) deviations of the model landscape from the system's.
    pub f_l: [f64; 2],
    /// (MAPE, μRD).
    pub f_a: [f64; 2],
    pub f_t: TunerCharacteristics,
    /// Ground-truth rank, 1 = best.
    pub y: Option<f64>,
}

impl RankingRecord {
    pub fn pattern(&self) -> Pattern {
        self.f_t.pattern()
    }

    pub fn features(&self) -> Vec<f64> {
        let mut v = vec![self.f_l[0], self.f_l[1], self.f_a[0], self.f_a[1]];
        v.extend(encode_tuner(&self.f_t));
        v
    }

    fn layout_key(&self) -> String {
        layout(self.pattern(), self.global_feature, self.local_feature).join(",")
    }
}

/// Column names of the feature vector.
pub fn layout(pattern: Pattern, g: GlobalFeature, l: LocalFeature) -> Vec<String> {
    let mut cols = vec![
        format!("{g} Δ"),
        format!("{l} Δ"),
        "MAPE".to_string(),
        "μRD".to_string(),
    ];
    let seg = |name: &str, vocab: &[&str]| vocab.iter().map(|v| format!("{name}={v}")).collect::<Vec<_>>();
    match pattern {
        Pattern::Sequential => {
            cols.extend(seg("reduction", &Reduction::ALL.iter().map(|v| v.name()).collect::<Vec<_>>()));
            cols.extend(seg("acquisition", &Acquisition::ALL.iter().map(|v| v.name()).collect::<Vec<_>>()));
            cols.extend(seg("heuristic", &SeqHeuristic::ALL.iter().map(|v| v.name()).collect::<Vec<_>>()));
        }
        Pattern::Batch => {
            cols.extend(seg("domain", &Domain::ALL.iter().map(|v| v.name()).collect::<Vec<_>>()));
            cols.push("incremental".to_string());
            cols.extend(seg("heuristic", &BatchHeuristic::ALL.iter().map(|v| v.name()).collect::<Vec<_>>()));
        }
    }
    cols
}

/// Everything measured on one system that records are assembled from.
#[derive(Debug, Clone)]
pub struct SystemRuns {
    pub system: String,
    pub system_profile: FeatureProfile,
    /// Per model: landscape profile of its emulated view and its accuracy.
    pub models: BTreeMap<String, (FeatureProfile, AccuracyReport)>,
    pub tuners: BTreeMap<String, TunerCharacteristics>,
    /// Rank (1 = best) of each (model, tuner) pair.
    pub ranks: BTreeMap<(String, String), f64>,
}

/// One record per (model, tuner of `pattern`) pair; features default per pattern.
pub fn assemble_records(
    runs: &SystemRuns,
    pattern: Pattern,
    features: Option<(GlobalFeature, LocalFeature)>,
) -> Result<Vec<RankingRecord>, RankError> {
    let (g, l) = features.unwrap_or_else(|| default_features(pattern));
    let mut out = Vec::new();
    for (model, (profile, acc)) in &runs.models {
        for (tuner, tc) in runs.tuners.iter().filter(|(_, tc)| tc.pattern() == pattern) {
            let missing = |what: &str| RankError::MissingInput {
                system: runs.system.clone(),
                model: model.clone(),
                tuner: tuner.clone(),
                what: what.to_string(),
            };
            let y = *runs
                .ranks
                .get(&(model.clone(), tuner.clone()))
                .ok_or_else(|| missing("tuning rank"))?;
            let dg = signed_deviation(&runs.system_profile, profile, g.into())
                .map_err(|e| missing(&e.to_string()))?;
            let dl = signed_deviation(&runs.system_profile, profile, l.into())
                .map_err(|e| missing(&e.to_string()))?;
            if !acc.mape.is_finite() || !acc.murd.is_finite() {
                return Err(missing("finite accuracy"));
            }
            out.push(RankingRecord {
                system: runs.system.clone(),
                model: model.clone(),
                tuner: tuner.clone(),
                global_feature: g,
                local_feature: l,
                f_l: [dg, dl],
                f_a: [acc.mape, acc.murd],
                f_t: *tc,
                y: Some(y),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// Fraction of records each tree is fitted on.
    pub subsample: f64,
}

impl Default for RankParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_leaf: 5,
            subsample: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankModel {
    format_version: u32,
    pub pattern: Pattern,
    pub params: RankParams,
    pub seed: u64,
    pub layout: Vec<String>,
    /// (tree, weight) pairs; the score is the weighted sum of tree outputs.
    pub ensemble: Vec<(RegressionTree, f64)>,
    /// Mean |λ| on the training queries before each round.
    pub loss_history: Vec<f64>,
}

impl RankModel {
    pub fn score(&self, features: &[f64]) -> f64 {
        self.ensemble.iter().map(|(t, w)| w * t.predict(features)).sum()
    }
}

fn relevance(y: &[f64]) -> Vec<f64> {
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    y.iter().map(|v| max - v).collect()
}

/// Gain at 0-based position `pos`, discounted by log2(pos + 2).
fn discounted(gain: f64, pos: usize) -> f64 {
    gain / ((pos + 2) as f64).log2()
}

fn ideal_dcg(rel: &[f64], k: usize) -> f64 {
    let mut sorted = rel.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.iter().take(k).enumerate().map(|(i, r)| discounted(*r, i)).sum()
}

/// Record indices ordered by descending score; ties keep input order.
pub fn order_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// NDCG@k of `order` (item indices, best first) against true ranks `y`.
/// An all-tied ranking scores 1.
pub fn ndcg_at_k(order: &[usize], y: &[f64], k: usize) -> Result<f64, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    if order.len() != y.len() {
        return Err(RankError::LengthMismatch(order.len(), y.len()));
    }
    let k = k.min(y.len());
    let rel = relevance(y);
    let idcg = ideal_dcg(&rel, k);
    if idcg == 0.0 {
        return Ok(1.0);
    }
    let dcg: f64 = order.iter().take(k).enumerate().map(|(i, &j)| discounted(rel[j], i)).sum();
    Ok(dcg / idcg)
}

/// Items in the true top half of a query: fewer than `n / 2` items have a
/// strictly better (smaller) rank label. Labels need not be `1..=n`.
pub fn top_half(y: &[f64]) -> Vec<bool> {
    let half = y.len() as f64 / 2.0;
    y.iter()
        .map(|v| (y.iter().filter(|w| *w < v).count() as f64) < half)
        .collect()
}

/// Average precision over the relevant items retrieved in the top `k`;
/// 0 when none is retrieved.
pub fn ap_at_k(order: &[usize], relevant: &[bool], k: usize) -> Result<f64, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    if order.len() != relevant.len() {
        return Err(RankError::LengthMismatch(order.len(), relevant.len()));
    }
    if !relevant.iter().any(|r| *r) {
        return Err(RankError::NoRelevant);
    }
    let mut hits = 0;
    let mut sum = 0.0;
    for (i, &j) in order.iter().take(k).enumerate() {
        if relevant[j] {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(if hits == 0 { 0.0 } else { sum / hits as f64 })
}

/// Expected NDCG@k of a uniformly random order.
pub fn random_ndcg(y: &[f64], k: usize) -> Result<f64, RankError> {
    if k == 0 {
        return Err(RankError::InvalidK);
    }
    let k = k.min(y.len());
    let rel = relevance(y);
    let idcg = ideal_dcg(&rel, k);
    if idcg == 0.0 {
        return Ok(1.0);
    }
    let expected = mean(&rel) * (0..k).map(|i| discounted(1.0, i)).sum::<f64>();
    Ok(expected / idcg)
}

/// Monte-Carlo mean AP@k of random orders.
pub fn random_ap(relevant: &[bool], k: usize, permutations: usize, seed: u64) -> Result<f64, RankError> {
    let mut rng = rng::seeded(seed);
    let mut order: Vec<usize> = (0..relevant.len()).collect();
    let mut total = 0.0;
    for _ in 0..permutations.max(1) {
        order.shuffle(&mut rng);
        total += ap_at_k(&order, relevant, k)?;
    }
    Ok(total / permutations.max(1) as f64)
}

fn check_training(records: &[RankingRecord]) -> Result<(Pattern, BTreeMap<&str, Vec<usize>>), RankError> {
    let first = records.first().ok_or(RankError::TooFewQueries(0))?;
    let key = first.layout_key();
    let mut queries: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        if r.pattern() != first.pattern() {
            return Err(RankError::MixedPatterns);
        }
        if r.layout_key() != key {
            return Err(RankError::LayoutMismatch {
                expected: key,
                got: r.layout_key(),
            });
        }
        if r.y.is_none() {
            return Err(RankError::MissingLabel(i));
        }
        queries.entry(r.system.as_str()).or_default().push(i);
    }
    if queries.len() < 2 {
        return Err(RankError::TooFewQueries(queries.len()));
    }
    if let Some((q, _)) = queries.iter().find(|(_, v)| v.len() < 2) {
        return Err(RankError::QueryTooSmall(q.to_string()));
    }
    Ok((first.pattern(), queries))
}

/// Trains a LambdaMART ensemble; systems are queries.
pub fn train(records: &[RankingRecord], params: RankParams, seed: u64) -> Result<RankModel, RankError> {
    let (pattern, queries) = check_training(records)?;
    let x: Vec<Vec<f64>> = records.iter().map(RankingRecord::features).collect();
    let n = records.len();
    let query_data: Vec<(Vec<usize>, Vec<f64>, f64)> = queries
        .values()
        .map(|idx| {
            let y: Vec<f64> = idx.iter().map(|&i| records[i].y.expect("checked")).collect();
            let rel = relevance(&y);
            let idcg = ideal_dcg(&rel, rel.len());
            (idx.clone(), rel, idcg)
        })
        .collect();
    let tree_params = TreeParams {
        max_depth: Some(params.max_depth),
        min_leaf: params.min_leaf.max(1),
        max_features: None,
    };
    let mut scores = vec![0.0; n];
    let mut ensemble = Vec::with_capacity(params.rounds);
    let mut loss_history = Vec::with_capacity(params.rounds);
    let mut rng = rng::stream(seed, 0);
    let take = ((params.subsample.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(1, n);
    for _ in 0..params.rounds {
        let mut lambda = vec![0.0; n];
        let mut weight = vec![0.0; n];
        for (idx, rel, idcg) in &query_data {
            if *idcg == 0.0 {
                continue;
            }
            let local: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let mut pos = vec![0; idx.len()];
            for (p, &j) in order_by_scores(&local).iter().enumerate() {
                pos[j] = p;
            }
            for a in 0..idx.len() {
                for b in 0..idx.len() {
                    if rel[a] <= rel[b] {
                        continue;
                    }
                    let delta = ((rel[a] - rel[b]) * (discounted(1.0, pos[a]) - discounted(1.0, pos[b]))).abs() / idcg;
                    let rho = 1.0 / (1.0 + (local[a] - local[b]).exp());
                    lambda[idx[a]] += delta * rho;
                    lambda[idx[b]] -= delta * rho;
                    let w = delta * rho * (1.0 - rho);
                    weight[idx[a]] += w;
                    weight[idx[b]] += w;
                }
            }
        }
        loss_history.push(lambda.iter().map(|l| l.abs()).sum::<f64>() / n as f64);
        let mut rows = sample(&mut rng, n, take).into_vec();
        rows.sort_unstable();
        let mut tree = RegressionTree::fit(&x, &lambda, &rows, tree_params, None);
        let mut sums: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
        for &i in &rows {
            let e = sums.entry(tree.leaf_of(&x[i])).or_default();
            e.0 += lambda[i];
            e.1 += weight[i];
        }
        for (leaf, (l, w)) in sums {
            tree.set_leaf(leaf, if w > 1e-12 { l / w } else { 0.0 });
        }
        for (i, s) in scores.iter_mut().enumerate() {
            *s += params.learning_rate * tree.predict(&x[i]);
        }
        ensemble.push((tree, params.learning_rate));
    }
    let first = &records[0];
    Ok(RankModel {
        format_version: RANK_MODEL_FORMAT_VERSION,
        pattern,
        params,
        seed,
        layout: layout(pattern, first.global_feature, first.local_feature),
        ensemble,
        loss_history,
    })
}

/// Scores (higher = predicted more useful) for records of the model's layout.
pub fn predict(model: &RankModel, records: &[RankingRecord]) -> Result<Vec<f64>, RankError> {
    let expected = model.layout.join(",");
    records
        .iter()
        .map(|r| {
            if r.layout_key() != expected {
                return Err(RankError::LayoutMismatch {
                    expected: expected.clone(),
                    got: r.layout_key(),
                });
            }
            Ok(model.score(&r.features()))
        })
        .collect()
}

/// Cut-offs reported by the evaluation; `None` is the full list.
pub const EVAL_CUTOFFS: [Option<usize>; 4] = [Some(1), Some(10), Some(20), None];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankMetric {
    #[serde(rename = "NDCG")]
    Ndcg,
    #[serde(rename = "AP")]
    Ap,
}

impl fmt::Display for RankMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankMetric::Ndcg => "NDCG",
            RankMetric::Ap => "AP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: RankMetric,
    /// Cut-off label: "1", "10", "20" or "all".
    pub k: String,
    pub model_mean: f64,
    pub random_mean: f64,
    pub improvement_pct: f64,
    pub p_value: Option<f64>,
    /// "†" for p < 0.001, "★" for p < 0.05.
    pub marker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub system: String,
    pub records: usize,
    pub rows: Vec<MetricRow>,
    /// Per-repeat NDCG@1 of the trained ranker.
    pub ndcg1_runs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LooReport {
    pub pattern: Pattern,
    pub repeats: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    pub average: Vec<MetricRow>,
}

/// Number of permutations in Monte-Carlo random baselines.
pub const RANDOM_PERMUTATIONS: usize = 1000;

pub fn significance_marker(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p < 0.001 => "†",
        Some(p) if p < 0.05 => "★",
        _ => "",
    }
}

fn improvement(model: f64, random: f64) -> f64 {
    if random == 0.0 {
        0.0
    } else {
        100.0 * (model - random) / random
    }
}

fn cutoff_label(k: Option<usize>) -> String {
    k.map_or_else(|| "all".to_string(), |k| k.to_string())
}

/// Leave-one-system-out evaluation: each system is held out in turn, a ranker
/// is trained on the others `repeats` times with distinct seeds, and its
/// NDCG/AP on the held-out system are compared to random ranking.
pub fn loo_evaluate(
    records: &[RankingRecord],
    params: RankParams,
    repeats: usize,
    seed: u64,
) -> Result<LooReport, RankError> {
    let (pattern, _) = check_training(records)?;
    let systems: BTreeSet<&str> = records.iter().map(|r| r.system.as_str()).collect();
    if systems.len() < 3 {
        return Err(RankError::TooFewSystems(systems.len()));
    }
    let repeats = repeats.max(1);
    let systems: Vec<&str> = systems.into_iter().collect();
    let folds = systems
        .par_iter()
        .enumerate()
        .map(|(f, &held)| -> Result<FoldReport, RankError> {
            let train_set: Vec<RankingRecord> = records.iter().filter(|r| r.system != held).cloned().collect();
            let test: Vec<RankingRecord> = records.iter().filter(|r| r.system == held).cloned().collect();
            assert!(train_set.iter().all(|r| r.system != held));
            let y: Vec<f64> = test.iter().map(|r| r.y.expect("checked")).collect();
            let relevant = top_half(&y);
            let fold_seed = rng::derive_seed(seed, f as u64);
            let runs: Vec<Vec<usize>> = (0..repeats)
                .into_par_iter()
                .map(|r| {
                    let model = train(&train_set, params, rng::derive_seed(fold_seed, r as u64))?;
                    Ok(order_by_scores(&predict(&model, &test)?))
                })
                .collect::<Result<_, RankError>>()?;
            let mut perm_rng = rng::stream(fold_seed, u64::MAX);
            let random_orders: Vec<Vec<usize>> = (0..repeats)
                .map(|_| {
                    let mut o: Vec<usize> = (0..test.len()).collect();
                    o.shuffle(&mut perm_rng);
                    o
                })
                .collect();
            let mut rows = Vec::new();
            let mut ndcg1_runs = Vec::new();
            for metric in [RankMetric::Ndcg, RankMetric::Ap] {
                for cutoff in EVAL_CUTOFFS {
                    let k = cutoff.unwrap_or(test.len());
                    let eval = |o: &Vec<usize>| match metric {
                        RankMetric::Ndcg => ndcg_at_k(o, &y, k),
                        RankMetric::Ap => ap_at_k(o, &relevant, k),
                    };
                    let model_vals = runs.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
                    let random_vals = random_orders.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
                    if metric == RankMetric::Ndcg && cutoff == Some(1) {
                        ndcg1_runs = model_vals.clone();
                    }
                    let random_mean = match metric {
                        RankMetric::Ndcg => random_ndcg(&y, k)?,
                        RankMetric::Ap => random_ap(&relevant, k, RANDOM_PERMUTATIONS, fold_seed)?,
                    };
                    let model_mean = mean(&model_vals);
                    let p = wilcoxon_rank_sum(&model_vals, &random_vals).ok().map(|t| t.p_value);
                    rows.push(MetricRow {
                        metric,
                        k: cutoff_label(cutoff),
                        model_mean,
                        random_mean,
                        improvement_pct: improvement(model_mean, random_mean),
                        p_value: p,
                        marker: significance_marker(p).to_string(),
                    });
                }
            }
            Ok(FoldReport {
                system: held.to_string(),
                records: test.len(),
                rows,
                ndcg1_runs,
            })
        })
        .collect::<Result<Vec<_>, RankError>>()?;
    let average = folds[0]
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let model_mean = mean(&folds.iter().map(|f| f.rows[i].model_mean).collect::<Vec<_>>());
            let random_mean = mean(&folds.iter().map(|f| f.rows[i].random_mean).collect::<Vec<_>>());
            MetricRow {
                metric: row.metric,
                k: row.k.clone(),
                model_mean,
                random_mean,
                improvement_pct: improvement(model_mean, random_mean),
                p_value: None,
                marker: String::new(),
            }
        })
        .collect();
    Ok(LooReport {
        pattern,
        repeats,
        seed,
        folds,
        average,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    system: String,
    model: String,
    tuner: String,
    pattern: Pattern,
    global_feature: GlobalFeature,
    global_delta: f64,
    local_feature: LocalFeature,
    local_delta: f64,
    mape: f64,
    murd: f64,
    ft_seg1: String,
    ft_seg2: String,
    ft_seg3: String,
    y: Option<f64>,
}

fn io_error(path: &Path, e: impl fmt::Display) -> RankError {
    RankError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes records as CSV, one row per (system, model, tuner).
pub fn write_records(records: &[RankingRecord], path: &Path) -> Result<(), RankError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    for r in records {
        let [s1, s2, s3] = r.f_t.segments();
        w.serialize(RecordRow {
            system: r.system.clone(),
            model: r.model.clone(),
            tuner: r.tuner.clone(),
            pattern: r.pattern(),
            global_feature: r.global_feature,
            global_delta: r.f_l[0],
            local_feature: r.local_feature,
            local_delta: r.f_l[1],
            mape: r.f_a[0],
            murd: r.f_a[1],
            ft_seg1: s1,
            ft_seg2: s2,
            ft_seg3: s3,
            y: r.y,
        })
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RankingRecord>, RankError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<RecordRow>().enumerate() {
        let row = row.map_err(|e| RankError::Format(format!("{}: record {}: {e}", path.display(), i + 1)))?;
        let f_t = TunerCharacteristics::from_segments(row.pattern, &[&row.ft_seg1, &row.ft_seg2, &row.ft_seg3])?;
        let values = [row.global_delta, row.local_delta, row.mape, row.murd];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RankError::Format(format!("{}: record {}: non-finite feature", path.display(), i + 1)));
        }
        out.push(RankingRecord {
            system: row.system,
            model: row.model,
            tuner: row.tuner,
            global_feature: row.global_feature,
            local_feature: row.local_feature,
            f_l: [row.global_delta, row.local_delta],
            f_a: [row.mape, row.murd],
            f_t,
            y: row.y,
        });
    }
    Ok(out)
}

pub fn save_rank_model(model: &RankModel, path: &Path) -> Result<(), RankError> {
    let text = serde_json::to_string_pretty(model).map_err(|e| RankError::Format(e.to_string()))?;
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| io_error(path, e))
}

pub fn load_rank_model(path: &Path) -> Result<RankModel, RankError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_error(path, e))?;
    let model: RankModel = serde_json::from_str(&text).map_err(|e| RankError::Format(e.to_string()))?;
    if model.format_version != RANK_MODEL_FORMAT_VERSION {
        return Err(RankError::Format(format!(
            "unsupported ranker format version {}",
            model.format_version
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{FeatureValue, WalkParams};
    use proptest::prelude::*;
    use rand::Rng as _;

    fn boca() -> TunerCharacteristics {
        TunerCharacteristics::Sequential {
            reduction: Reduction::Gini,
            acquisition: Acquisition::Ei,
            heuristic: SeqHeuristic::SelectiveExploration,
        }
    }

    fn ga() -> TunerCharacteristics {
        TunerCharacteristics::Batch {
            domain: Domain::General,
            incremental: true,
            heuristic: BatchHeuristic::Evolutionary,
        }
    }

    #[test]
    fn tuner_encoding_examples() {
        assert_eq!(boca().segments(), ["0100".to_string(), "1000".into(), "0001".into()]);
        assert_eq!(ga().segments(), ["0001".to_string(), "1".into(), "1000".into()]);
        for tc in [boca(), ga()] {
            assert_eq!(decode_tuner(tc.pattern(), &encode_tuner(&tc)).unwrap(), tc);
        }
        assert!(TunerCharacteristics::from_segments(Pattern::Batch, &["0011", "1", "1000"]).is_err());
        assert!("bogus".parse::<Acquisition>().is_err());
    }

    #[test]
    fn every_characteristic_round_trips() {
        for &r in Reduction::ALL {
            for &a in Acquisition::ALL {
                for &h in SeqHeuristic::ALL {
                    let tc = TunerCharacteristics::Sequential {
                        reduction: r,
                        acquisition: a,
                        heuristic: h,
                    };
                    let e = encode_tuner(&tc);
                    assert_eq!(e[0..4].iter().sum::<f64>(), 1.0);
                    assert_eq!(e[4..8].iter().sum::<f64>(), 1.0);
                    assert_eq!(e[8..12].iter().sum::<f64>(), 1.0);
                    assert_eq!(decode_tuner(Pattern::Sequential, &e).unwrap(), tc);
                }
            }
        }
    }

    fn profile(kur: f64, mie: f64) -> FeatureProfile {
        let v = FeatureValue::Present;
        FeatureProfile {
            fdc: v(0.0),
            fbd: v(0.0),
            ske: v(0.0),
            kur: v(kur),
            plo: v(0.0),
            cl: v(1.0),
            mie: v(mie),
            nbc: v(0.0),
            coverage: 1.0,
            walk: WalkParams::default(),
            seed: 0,
        }
    }

    #[test]
    fn assembled_record_matches_table_row() {
        let mut models = BTreeMap::new();
        models.insert(
            "SVR".to_string(),
            (
                profile(2.0 + 0.1510, 0.5 - 0.0494),
                AccuracyReport {
                    mape: 64.0293,
                    murd: 135.5281,
                    n_test: 10,
                },
            ),
        );
        let mut tuners = BTreeMap::new();
        tuners.insert("BOCA".to_string(), boca());
        tuners.insert("GA".to_string(), ga());
        let mut ranks = BTreeMap::new();
        ranks.insert(("SVR".to_string(), "BOCA".to_string()), 1.0);
        ranks.insert(("SVR".to_string(), "GA".to_string()), 2.0);
        let runs = SystemRuns {
            system: "Apache".into(),
            system_profile: profile(2.0, 0.5),
            models,
            tuners,
            ranks,
        };
        let recs = assemble_records(&runs, Pattern::Sequential, None).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert!((r.f_l[0] - 0.1510).abs() < 1e-12);
        assert!((r.f_l[1] + 0.0494).abs() < 1e-12);
        assert_eq!(r.f_a, [64.0293, 135.5281]);
        assert_eq!(r.y, Some(1.0));
        assert_eq!((r.global_feature, r.local_feature), (GlobalFeature::Kur, LocalFeature::Mie));

        let mut broken = runs.clone();
        broken.ranks.clear();
        assert!(matches!(
            assemble_records(&broken, Pattern::Sequential, None),
            Err(RankError::MissingInput { .. })
        ));
    }

    #[test]
    fn metric_worked_examples() {
        let v = ndcg_at_k(&[1, 0], &[1.0, 2.0], 2).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-15);
        assert!((v - 0.6309).abs() < 1e-4);
        let ap = ap_at_k(&[0, 1, 2, 3], &[false, true, true, false], 4).unwrap();
        assert!((ap - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(ap_at_k(&[1, 0], &[true, false], 1).unwrap(), 0.0);
        assert_eq!(ap_at_k(&[0, 1], &[true, false], 1).unwrap(), 1.0);
        assert!(matches!(ap_at_k(&[0], &[false], 1), Err(RankError::NoRelevant)));
        assert!(matches!(ndcg_at_k(&[0], &[1.0], 0), Err(RankError::InvalidK)));
    }

    #[test]
    fn random_baselines() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let exhaustive: f64 = {
            let mut total = 0.0;
            let mut count = 0;
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let o = [a, b, c, d];
                            if BTreeSet::from(o).len() == 4 {
                                total += ndcg_at_k(&o, &y, 2).unwrap();
                                count += 1;
                            }
                        }
                    }
                }
            }
            total / count as f64
        };
        assert!((random_ndcg(&y, 2).unwrap() - exhaustive).abs() < 1e-12);
        let ap = random_ap(&top_half(&y), 4, 2000, 1).unwrap();
        assert!(ap > 0.3 && ap < 0.9);
    }

    #[test]
    fn top_half_is_relative_to_the_query() {
        assert_eq!(top_half(&[1.0, 2.0, 3.0, 4.0]), [true, true, false, false]);
        assert_eq!(top_half(&[9.0, 17.0, 4.0, 30.0]), [true, false, true, false]);
        assert_eq!(top_half(&[5.0, 5.0, 5.0]), [true, true, true]);
        assert_eq!(top_half(&[1.0, 2.5, 2.5, 4.0]), [true, true, true, false]);
    }

    fn synthetic(systems: usize, per: usize, noise: f64, seed: u64) -> Vec<RankingRecord> {
        let mut r = rng::seeded(seed);
        let mut out = Vec::new();
        for s in 0..systems {
            let xs: Vec<f64> = (0..per).map(|_| r.gen_range(0.0..1.0)).collect();
            let noisy: Vec<f64> = xs.iter().map(|x| x + noise * r.gen_range(-1.0..1.0)).collect();
            let ranks = crate::metrics::average_ranks(&noisy);
            for (i, x) in xs.iter().enumerate() {
                out.push(RankingRecord {
                    system: format!("s{s}"),
                    model: format!("m{i}"),
                    tuner: "t".into(),
                    global_feature: GlobalFeature::Kur,
                    local_feature: LocalFeature::Mie,
                    f_l: [*x, r.gen_range(0.0..1.0)],
                    f_a: [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)],
                    f_t: boca(),
                    y: Some(ranks[i]),
                });
            }
        }
        out
    }

    #[test]
    fn monotone_planted_feature_is_learned() {
        let recs = synthetic(6, 20, 0.0, 3);
        let (train_set, test): (Vec<_>, Vec<_>) = recs.into_iter().partition(|r| r.system != "s5");
        let m = train(&train_set, RankParams::default(), 0).unwrap();
        let y: Vec<f64> = test.iter().map(|r| r.y.unwrap()).collect();
        let order = order_by_scores(&predict(&m, &test).unwrap());
        assert_eq!(ndcg_at_k(&order, &y, 1).unwrap(), 1.0);
        let first = m.loss_history[0];
        let last = *m.loss_history.last().unwrap();
        assert!(last <= first + 1e-9);
    }

    #[test]
    fn zero_rounds_is_a_constant_scorer() {
        let recs = synthetic(3, 5, 0.0, 1);
        let m = train(
            &recs,
            RankParams {
                rounds: 0,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        let scores = predict(&m, &recs).unwrap();
        assert!(scores.iter().all(|s| *s == 0.0));
        assert_eq!(order_by_scores(&scores), (0..recs.len()).collect::<Vec<_>>());
    }

    #[test]
    fn training_is_deterministic_and_score_is_tree_sum() {
        let recs = synthetic(4, 8, 0.1, 2);
        let a = train(&recs, RankParams::default(), 5).unwrap();
        let b = train(&recs, RankParams::default(), 5).unwrap();
        assert_eq!(a, b);
        let s = predict(&a, &recs[..3]).unwrap();
        for (r, score) in recs[..3].iter().zip(s) {
            let f = r.features();
            let manual: f64 = a.ensemble.iter().map(|(t, w)| w * t.predict(&f)).sum();
            assert_eq!(manual, score);
        }
        let mut c = a.clone();
        c.ensemble.push((RegressionTree::constant(3.0), 0.0));
        assert_eq!(predict(&c, &recs).unwrap(), predict(&a, &recs).unwrap());
    }

    #[test]
    fn training_rejects_bad_inputs() {
        let recs = synthetic(1, 5, 0.0, 1);
        assert!(matches!(train(&recs, RankParams::default(), 0), Err(RankError::TooFewQueries(1))));
        let mut mixed = synthetic(2, 5, 0.0, 1);
        mixed[0].f_t = ga();
        assert!(matches!(train(&mixed, RankParams::default(), 0), Err(RankError::MixedPatterns)));
        let two = synthetic(2, 4, 0.0, 1);
        assert!(matches!(loo_evaluate(&two, RankParams::default(), 2, 0), Err(RankError::TooFewSystems(2))));
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let recs = synthetic(2, 5, 0.0, 1);
        let m = train(&recs, RankParams::default(), 0).unwrap();
        let mut other = recs[0].clone();
        other.local_feature = LocalFeature::Plo;
        assert!(matches!(predict(&m, &[other]), Err(RankError::LayoutMismatch { .. })));
    }

    #[test]
    fn loo_report_shape() {
        let recs = synthetic(4, 12, 0.05, 9);
        let rep = loo_evaluate(&recs, RankParams { rounds: 20, ..Default::default() }, 3, 1).unwrap();
        assert_eq!(rep.folds.len(), 4);
        assert_eq!(rep.average.len(), 8);
        for f in &rep.folds {
            assert_eq!(f.rows.len(), 8);
            assert_eq!(f.ndcg1_runs.len(), 3);
        }
    }

    #[test]
    fn record_file_round_trip() {
        let mut recs = synthetic(2, 3, 0.0, 4);
        recs[1].y = None;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records(&recs, &path).unwrap();
        assert_eq!(read_records(&path).unwrap(), recs);
        let m = train(&synthetic(2, 5, 0.0, 1), RankParams { rounds: 3, ..Default::default() }, 0).unwrap();
        let mp = dir.path().join("ranker.json");
        save_rank_model(&m, &mp).unwrap();
        assert_eq!(load_rank_model(&mp).unwrap(), m);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn metrics_depend_only_on_order(scores in proptest::collection::vec(-5.0f64..5.0, 2..10), k in 1usize..10) {
            let y: Vec<f64> = crate::metrics::average_ranks(&scores.iter().map(|s| -s).collect::<Vec<_>>());
            let transformed: Vec<f64> = scores.iter().map(|s| (s * 0.5).exp() + 3.0).collect();
            let a = order_by_scores(&scores);
            let b = order_by_scores(&transformed);
            prop_assert_eq!(ndcg_at_k(&a, &y, k).unwrap(), ndcg_at_k(&b, &y, k).unwrap());
            prop_assert!((ndcg_at_k(&a, &y, k).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ndcg_ignores_items_below_k(n in 3usize..7, k in 1usize..3) {
            let y: Vec<f64> = (1..=n).map(|v| v as f64).collect();
            let perms = permutations(n);
            let base = &perms[perms.len() / 2];
            let mut tail = base.clone();
            tail[k..].reverse();
            prop_assert_eq!(ndcg_at_k(base, &y, k).unwrap(), ndcg_at_k(&tail, &y, k).unwrap());
        }
    }
}
