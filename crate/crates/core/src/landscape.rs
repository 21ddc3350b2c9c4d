//! Landscape views and the eight landscape features.
//!
//! A [`LandscapeView`] is a finite set of evaluated configurations whose
//! fitness is oriented to minimization, plus a Hamming neighborhood rule that
//! only ever references points inside the view. Features come in two groups:
//!
//! | feature | group  | meaning                                             |
//! |---------|--------|-----------------------------------------------------|
//! | FDC     | global | correlation of fitness with distance to the optimum |
//! | FBD     | global | distance from the best sampled point to the optimum |
//! | Ske     | global | skewness of the fitness distribution                |
//! | Kur     | global | (non-excess) kurtosis of the fitness distribution   |
//! | PLO     | local  | proportion of local optima                          |
//! | CL      | local  | correlation length of random-walk fitness series    |
//! | MIE     | local  | maximum information entropy of walk dynamics        |
//! | NBC     | local  | nearest-better over nearest-neighbor distance ratio |
//!
//! Undefined features are reported as typed absences, never as zeros.
//!
//! Note on NBC orientation: larger values are read both as "larger local
//! optima clusters" and as "better points are found locally". Dominance
//! treats NBC as smaller-is-easier.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataspace::{adjacency, hamming_unchecked, Configuration, PerformanceDataset};
use crate::rng;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FeatureError {
    #[error("landscape view is empty")]
    EmptyView,
    #[error("configuration {0} appears twice in the view")]
    DuplicatePoint(Configuration),
    #[error("non-finite fitness for configuration {0}")]
    NonFinite(Configuration),
    #[error("configuration {0} is not part of the view")]
    NotInView(Configuration),
    #[error("landscape too sparse: no point has a neighbor within the view")]
    Sparse,
    #[error("{feature} undefined: {reason}")]
    Undefined { feature: Feature, reason: String },
    #[error("no landscape feature could be computed")]
    AllUndefined,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

fn undefined(feature: Feature, reason: impl Into<String>) -> FeatureError {
    FeatureError::Undefined {
        feature,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Feature {
    Fdc,
    Fbd,
    Ske,
    Kur,
    Plo,
    Cl,
    Mie,
    Nbc,
}

impl Feature {
    pub const ALL: [Feature; 8] = [
        Feature::Fdc,
        Feature::Fbd,
        Feature::Ske,
        Feature::Kur,
        Feature::Plo,
        Feature::Cl,
        Feature::Mie,
        Feature::Nbc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Fdc => "FDC",
            Feature::Fbd => "FBD",
            Feature::Ske => "Ske",
            Feature::Kur => "Kur",
            Feature::Plo => "PLO",
            Feature::Cl => "CL",
            Feature::Mie => "MIE",
            Feature::Nbc => "NBC",
        }
    }

    pub fn is_global(self) -> bool {
        matches!(self, Feature::Fdc | Feature::Fbd | Feature::Ske | Feature::Kur)
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown landscape feature '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GlobalFeature {
    Fdc,
    Fbd,
    Ske,
    Kur,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LocalFeature {
    Plo,
    Cl,
    Mie,
    Nbc,
}

impl GlobalFeature {
    pub const ALL: [GlobalFeature; 4] = [
        GlobalFeature::Fdc,
        GlobalFeature::Fbd,
        GlobalFeature::Ske,
        GlobalFeature::Kur,
    ];
}

impl LocalFeature {
    pub const ALL: [LocalFeature; 4] = [
        LocalFeature::Plo,
        LocalFeature::Cl,
        LocalFeature::Mie,
        LocalFeature::Nbc,
    ];
}

impl From<GlobalFeature> for Feature {
    fn from(g: GlobalFeature) -> Self {
        match g {
            GlobalFeature::Fdc => Feature::Fdc,
            GlobalFeature::Fbd => Feature::Fbd,
            GlobalFeature::Ske => Feature::Ske,
            GlobalFeature::Kur => Feature::Kur,
        }
    }
}

impl From<LocalFeature> for Feature {
    fn from(l: LocalFeature) -> Self {
        match l {
            LocalFeature::Plo => Feature::Plo,
            LocalFeature::Cl => Feature::Cl,
            LocalFeature::Mie => Feature::Mie,
            LocalFeature::Nbc => Feature::Nbc,
        }
    }
}

impl TryFrom<Feature> for GlobalFeature {
    type Error = String;

    fn try_from(f: Feature) -> Result<Self, Self::Error> {
        match f {
            Feature::Fdc => Ok(GlobalFeature::Fdc),
            Feature::Fbd => Ok(GlobalFeature::Fbd),
            Feature::Ske => Ok(GlobalFeature::Ske),
            Feature::Kur => Ok(GlobalFeature::Kur),
            other => Err(format!("{other} is not a global feature")),
        }
    }
}

impl TryFrom<Feature> for LocalFeature {
    type Error = String;

    fn try_from(f: Feature) -> Result<Self, Self::Error> {
        match f {
            Feature::Plo => Ok(LocalFeature::Plo),
            Feature::Cl => Ok(LocalFeature::Cl),
            Feature::Mie => Ok(LocalFeature::Mie),
            Feature::Nbc => Ok(LocalFeature::Nbc),
            other => Err(format!("{other} is not a local feature")),
        }
    }
}

impl fmt::Display for GlobalFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Feature::from(*self).fmt(f)
    }
}

impl fmt::Display for LocalFeature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        Feature::from(*self).fmt(f)
    }
}

impl FromStr for GlobalFeature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Feature>()?.try_into()
    }
}

impl FromStr for LocalFeature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<Feature>()?.try_into()
    }
}

/// Orients a local feature so that smaller means easier local-optima structure.
/// Only CL (larger is smoother) is negated.
pub fn orient_local(feature: LocalFeature, value: f64) -> f64 {
    match feature {
        LocalFeature::Cl => -value,
        LocalFeature::Plo | LocalFeature::Mie | LocalFeature::Nbc => value,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewSource {
    Exact,
    Model(String),
}

/// Evaluated point set with an in-view Hamming neighborhood.
#[derive(Debug, Clone)]
pub struct LandscapeView {
    points: Vec<Configuration>,
    fitness: Vec<f64>,
    pub source: ViewSource,
    radius: usize,
    adjacency: Vec<Vec<usize>>,
}

impl LandscapeView {
    /// `fitness` must already be oriented to minimization.
    pub fn new(
        points: Vec<Configuration>,
        fitness: Vec<f64>,
        source: ViewSource,
        radius: usize,
    ) -> Result<Self, FeatureError> {
        if points.is_empty() {
            return Err(FeatureError::EmptyView);
        }
        if radius == 0 {
            return Err(FeatureError::InvalidParameter("neighborhood radius must be positive".into()));
        }
        assert_eq!(points.len(), fitness.len(), "one fitness value per point");
        let mut seen = HashSet::with_capacity(points.len());
        for (p, f) in points.iter().zip(&fitness) {
            if !seen.insert(p) {
                return Err(FeatureError::DuplicatePoint(p.clone()));
            }
            if !f.is_finite() {
                return Err(FeatureError::NonFinite(p.clone()));
            }
        }
        let adjacency = adjacency(&points, radius);
        Ok(Self {
            points,
            fitness,
            source,
            radius,
            adjacency,
        })
    }

    /// View over every row of `dataset`, radius 1.
    pub fn from_dataset(dataset: &PerformanceDataset, source: ViewSource) -> Result<Self, FeatureError> {
        Self::new(
            dataset.configurations().cloned().collect(),
            dataset.oriented(),
            source,
            1,
        )
    }

    pub fn with_radius(self, radius: usize) -> Result<Self, FeatureError> {
        Self::new(self.points, self.fitness, self.source, radius)
    }

    pub fn points(&self) -> &[Configuration] {
        &self.points
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn fitness_of(&self, c: &Configuration) -> Option<f64> {
        self.points.iter().position(|p| p == c).map(|i| self.fitness[i])
    }

    /// Fraction of points with at least one in-view neighbor.
    pub fn coverage(&self) -> f64 {
        let covered = self.adjacency.iter().filter(|a| !a.is_empty()).count();
        covered as f64 / self.points.len() as f64
    }

    fn covered(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.adjacency[i].is_empty()).collect()
    }

    /// Indices of the global minimizers.
    pub fn global_optima(&self) -> Vec<usize> {
        let best = self.fitness.iter().copied().fold(f64::INFINITY, f64::min);
        (0..self.len()).filter(|&i| self.fitness[i] == best).collect()
    }

    fn index_of(&self, c: &Configuration) -> Result<usize, FeatureError> {
        self.points
            .iter()
            .position(|p| p == c)
            .ok_or_else(|| FeatureError::NotInView(c.clone()))
    }
}

/// View over the rows of `dataset` selected by `subset`.
pub fn build_view(
    dataset: &PerformanceDataset,
    subset: &[Configuration],
    source: ViewSource,
) -> Result<LandscapeView, FeatureError> {
    if subset.is_empty() {
        return Err(FeatureError::EmptyView);
    }
    let direction = dataset.space().direction;
    let fitness = subset
        .iter()
        .map(|c| {
            dataset
                .performance(c)
                .map(|y| direction.orient(y))
                .ok_or_else(|| FeatureError::NotInView(c.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    LandscapeView::new(subset.to_vec(), fitness, source, 1)
}

/// Local optima (indices into the view): covered points no worse than every neighbor.
pub fn local_optima(view: &LandscapeView) -> Result<Vec<usize>, FeatureError> {
    let covered = view.covered();
    if covered.is_empty() {
        return Err(FeatureError::Sparse);
    }
    Ok(covered
        .into_iter()
        .filter(|&i| {
            view.adjacency[i]
                .iter()
                .all(|&j| view.fitness[i] <= view.fitness[j])
        })
        .collect())
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let r = sxy / (sxx * syy).sqrt();
    r.is_finite().then(|| r.clamp(-1.0, 1.0))
}

fn is_constant(v: &[f64]) -> bool {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo == 0.0
}

/// Fitness distance correlation against the nearest global optimum.
pub fn fdc(view: &LandscapeView) -> Result<f64, FeatureError> {
    if view.len() < 2 {
        return Err(undefined(Feature::Fdc, "needs at least two points"));
    }
    if is_constant(&view.fitness) {
        return Err(undefined(Feature::Fdc, "fitness has zero variance"));
    }
    let optima = view.global_optima();
    let dist: Vec<f64> = view
        .points
        .iter()
        .map(|p| {
            optima
                .iter()
                .map(|&o| hamming_unchecked(p.values(), view.points[o].values()))
                .min()
                .unwrap_or(0) as f64
        })
        .collect();
    if is_constant(&dist) {
        return Err(undefined(Feature::Fdc, "distance to optimum has zero variance"));
    }
    pearson(&view.fitness, &dist).ok_or_else(|| undefined(Feature::Fdc, "correlation not finite"))
}

/// Fitness best distance: Hamming distance between the best points of
/// `sample` (indices into the view) and the global optima of the whole view.
pub fn fbd(view: &LandscapeView, sample: &[usize]) -> Result<f64, FeatureError> {
    if sample.is_empty() {
        return Err(undefined(Feature::Fbd, "empty sample"));
    }
    let optima = view.global_optima();
    let best = sample
        .iter()
        .map(|&i| view.fitness[i])
        .fold(f64::INFINITY, f64::min);
    let mut d = usize::MAX;
    for &x in sample.iter().filter(|&&i| view.fitness[i] == best) {
        for &o in &optima {
            d = d.min(hamming_unchecked(view.points[x].values(), view.points[o].values()));
        }
    }
    Ok(d as f64)
}

/// [`fbd`] with the sample given as configurations.
pub fn fbd_of(view: &LandscapeView, sample: &[Configuration]) -> Result<f64, FeatureError> {
    let idx = sample
        .iter()
        .map(|c| view.index_of(c))
        .collect::<Result<Vec<_>, _>>()?;
    fbd(view, &idx)
}

struct Moments {
    m2: f64,
    m3: f64,
    m4: f64,
}

fn central_moments(feature: Feature, y: &[f64]) -> Result<Moments, FeatureError> {
    if y.len() < 2 {
        return Err(undefined(feature, "needs at least two points"));
    }
    if is_constant(y) {
        return Err(undefined(feature, "fitness has zero variance"));
    }
    let n = y.len() as f64;
    let mu = y.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in y {
        let d = v - mu;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    Ok(Moments {
        m2: m2 / n,
        m3: m3 / n,
        m4: m4 / n,
    })
}

/// Population skewness of the fitness distribution.
pub fn skewness(view: &LandscapeView) -> Result<f64, FeatureError> {
    skewness_of(&view.fitness)
}

pub fn skewness_of(y: &[f64]) -> Result<f64, FeatureError> {
    let m = central_moments(Feature::Ske, y)?;
    Ok(m.m3 / m.m2.powf(1.5))
}

/// Population (non-excess) kurtosis of the fitness distribution.
pub fn kurtosis(view: &LandscapeView) -> Result<f64, FeatureError> {
    kurtosis_of(&view.fitness)
}

pub fn kurtosis_of(y: &[f64]) -> Result<f64, FeatureError> {
    let m = central_moments(Feature::Kur, y)?;
    Ok(m.m4 / (m.m2 * m.m2))
}

/// Proportion of local optima among points with at least one neighbor.
pub fn plo(view: &LandscapeView) -> Result<f64, FeatureError> {
    let optima = local_optima(view)?;
    Ok(optima.len() as f64 / view.covered().len() as f64)
}

/// Nearest-better clustering ratio.
pub fn nbc(view: &LandscapeView) -> Result<f64, FeatureError> {
    let n = view.len();
    if n < 2 {
        return Err(undefined(Feature::Nbc, "needs at least two points"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| view.fitness[a].total_cmp(&view.fitness[b]));
    let mut total = 0.0;
    let mut count = 0usize;
    // `first_tied` marks where the block of points sharing the current fitness begins.
    let mut first_tied = 0;
    for pos in 0..n {
        let x = order[pos];
        if pos > 0 && view.fitness[order[pos - 1]] < view.fitness[x] {
            first_tied = pos;
        }
        if first_tied == 0 {
            continue;
        }
        let px = view.points[x].values();
        let mut d_nb = usize::MAX;
        for &b in &order[..first_tied] {
            d_nb = d_nb.min(hamming_unchecked(px, view.points[b].values()));
            if d_nb == 1 {
                break;
            }
        }
        let d_nn = if view.radius == 1 && !view.adjacency[x].is_empty() {
            1
        } else {
            let mut d = usize::MAX;
            for (j, p) in view.points.iter().enumerate() {
                if j != x {
                    d = d.min(hamming_unchecked(px, p.values()));
                    if d == 1 {
                        break;
                    }
                }
            }
            d
        };
        total += d_nb as f64 / d_nn as f64;
        count += 1;
    }
    if count == 0 {
        return Err(undefined(Feature::Nbc, "no point has a strictly better point"));
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkParams {
    pub length: usize,
    pub walks: usize,
}

impl WalkParams {
    pub const DEFAULT_LENGTH: usize = 50;
    pub const DEFAULT_WALKS: usize = 30;
}

impl Default for WalkParams {
    fn default() -> Self {
        Self {
            length: Self::DEFAULT_LENGTH,
            walks: Self::DEFAULT_WALKS,
        }
    }
}

/// One random walk: visited view indices and their fitness values.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSequence {
    pub indices: Vec<usize>,
    pub fitness_values: Vec<f64>,
}

impl WalkSequence {
    pub fn len(&self) -> usize {
        self.fitness_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fitness_values.is_empty()
    }
}

/// Random walks over the in-view neighbor graph.
///
/// Each step moves to a uniformly chosen neighbor other than the previous
/// point; at a dead end the walk restarts from a fresh uniform covered point
/// and the sequence continues. Walk `w` draws from its own seeded stream.
pub fn random_walks(
    view: &LandscapeView,
    params: WalkParams,
    seed: u64,
) -> Result<Vec<WalkSequence>, FeatureError> {
    if params.length < 2 {
        return Err(FeatureError::InvalidParameter("walk length must be at least 2".into()));
    }
    if params.walks == 0 {
        return Err(FeatureError::InvalidParameter("at least one walk is required".into()));
    }
    let covered = view.covered();
    if covered.is_empty() {
        return Err(FeatureError::Sparse);
    }
    let walks = (0..params.walks)
        .map(|w| {
            let mut rng = rng::stream(seed, w as u64);
            let mut indices = Vec::with_capacity(params.length);
            let mut current = covered[rng.gen_range(0..covered.len())];
            let mut previous: Option<usize> = None;
            indices.push(current);
            while indices.len() < params.length {
                let options: Vec<usize> = view.adjacency[current]
                    .iter()
                    .copied()
                    .filter(|&j| Some(j) != previous)
                    .collect();
                if options.is_empty() {
                    previous = None;
                    current = covered[rng.gen_range(0..covered.len())];
                } else {
                    previous = Some(current);
                    current = options[rng.gen_range(0..options.len())];
                }
                indices.push(current);
            }
            let fitness_values = indices.iter().map(|&i| view.fitness[i]).collect();
            WalkSequence {
                indices,
                fitness_values,
            }
        })
        .collect();
    Ok(walks)
}

/// Lag-1 autocorrelation of a sequence; `None` when it has fewer than two
/// values or zero variance.
pub fn lag1_autocorrelation(y: &[f64]) -> Option<f64> {
    if y.len() < 2 || is_constant(y) {
        return None;
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let den: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let num: f64 = y.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
    Some(num / den)
}

/// Correlation length `-1 / ln|r1|` of one sequence.
pub fn correlation_length_of(y: &[f64]) -> Option<f64> {
    let r1 = lag1_autocorrelation(y)?.abs();
    if r1 >= 1.0 {
        return Some(f64::INFINITY);
    }
    Some(-1.0 / r1.ln())
}

/// Mean correlation length over the sequences with a defined autocorrelation.
pub fn correlation_length_of_walks(walks: &[WalkSequence]) -> Result<f64, FeatureError> {
    let values: Vec<f64> = walks
        .iter()
        .filter_map(|w| correlation_length_of(&w.fitness_values))
        .collect();
    if values.is_empty() {
        return Err(undefined(Feature::Cl, "every walk is degenerate"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

pub fn correlation_length(view: &LandscapeView, params: WalkParams, seed: u64) -> Result<f64, FeatureError> {
    correlation_length_of_walks(&random_walks(view, params, seed)?)
}

fn symbol(delta: f64, eps: f64) -> usize {
    if delta < -eps {
        0
    } else if delta > eps {
        2
    } else {
        1
    }
}

/// Entropy `H(eps)` over consecutive pairs of distinct difference symbols,
/// pooled across sequences; `None` when no symbol pair exists.
pub fn information_entropy<S: AsRef<[f64]>>(sequences: &[S], eps: f64) -> Option<f64> {
    let mut counts = [[0usize; 3]; 3];
    let mut total = 0usize;
    for seq in sequences {
        let symbols: Vec<usize> = seq
            .as_ref()
            .windows(2)
            .map(|w| symbol(w[1] - w[0], eps))
            .collect();
        for pair in symbols.windows(2) {
            counts[pair[0]][pair[1]] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return None;
    }
    let ln6 = 6f64.ln();
    let mut h = 0.0;
    for (p, row) in counts.iter().enumerate() {
        for (q, &c) in row.iter().enumerate() {
            if p != q && c > 0 {
                let prob = c as f64 / total as f64;
                h -= prob * prob.ln() / ln6;
            }
        }
    }
    Some(h.max(0.0))
}

/// Candidate thresholds: zero plus the deciles of the absolute differences.
pub fn entropy_thresholds<S: AsRef<[f64]>>(sequences: &[S]) -> Vec<f64> {
    let mut diffs: Vec<f64> = sequences
        .iter()
        .flat_map(|s| s.as_ref().windows(2).map(|w| (w[1] - w[0]).abs()).collect::<Vec<_>>())
        .collect();
    let mut eps = vec![0.0];
    if diffs.is_empty() {
        return eps;
    }
    diffs.sort_by(f64::total_cmp);
    let m = diffs.len();
    for k in 1..10 {
        let pos = (k as f64 / 10.0) * (m - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let frac = pos - lo as f64;
        eps.push(diffs[lo] + (diffs[hi] - diffs[lo]) * frac);
    }
    eps
}

/// Maximum information entropy over the threshold candidates.
pub fn mie_of_sequences<S: AsRef<[f64]>>(sequences: &[S]) -> Result<f64, FeatureError> {
    entropy_thresholds(sequences)
        .into_iter()
        .filter_map(|eps| information_entropy(sequences, eps))
        .reduce(f64::max)
        .ok_or_else(|| undefined(Feature::Mie, "walks too short to form symbol pairs"))
}

pub fn mie(view: &LandscapeView, params: WalkParams, seed: u64) -> Result<f64, FeatureError> {
    let walks = random_walks(view, params, seed)?;
    let seqs: Vec<&[f64]> = walks.iter().map(|w| w.fitness_values.as_slice()).collect();
    mie_of_sequences(&seqs)
}

/// A feature value, or the reason it could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureValue {
    Present(f64),
    Absent(String),
}

impl FeatureValue {
    pub fn value(&self) -> Option<f64> {
        match self {
            FeatureValue::Present(v) => Some(*v),
            FeatureValue::Absent(_) => None,
        }
    }

    fn from_result(r: Result<f64, FeatureError>) -> Self {
        match r {
            Ok(v) => FeatureValue::Present(v),
            Err(e) => FeatureValue::Absent(e.to_string()),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FeatureValueRepr {
    Number(f64),
    Special(String),
    Absent { absent: String },
}

impl Serialize for FeatureValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FeatureValue::Present(v) if v.is_finite() => FeatureValueRepr::Number(*v),
            FeatureValue::Present(v) if *v > 0.0 => FeatureValueRepr::Special("inf".into()),
            FeatureValue::Present(_) => FeatureValueRepr::Special("-inf".into()),
            FeatureValue::Absent(reason) => FeatureValueRepr::Absent {
                absent: reason.clone(),
            },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureValue {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match FeatureValueRepr::deserialize(d)? {
            FeatureValueRepr::Number(v) => Ok(FeatureValue::Present(v)),
            FeatureValueRepr::Special(s) => match s.as_str() {
                "inf" => Ok(FeatureValue::Present(f64::INFINITY)),
                "-inf" => Ok(FeatureValue::Present(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("invalid feature value '{other}'"))),
            },
            FeatureValueRepr::Absent { absent } => Ok(FeatureValue::Absent(absent)),
        }
    }
}

/// All eight features of one view, with the walk settings used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureProfile {
    pub fdc: FeatureValue,
    pub fbd: FeatureValue,
    pub ske: FeatureValue,
    pub kur: FeatureValue,
    pub plo: FeatureValue,
    pub cl: FeatureValue,
    pub mie: FeatureValue,
    pub nbc: FeatureValue,
    pub coverage: f64,
    pub walk: WalkParams,
    pub seed: u64,
}

impl FeatureProfile {
    pub fn get(&self, feature: Feature) -> &FeatureValue {
        match feature {
            Feature::Fdc => &self.fdc,
            Feature::Fbd => &self.fbd,
            Feature::Ske => &self.ske,
            Feature::Kur => &self.kur,
            Feature::Plo => &self.plo,
            Feature::Cl => &self.cl,
            Feature::Mie => &self.mie,
            Feature::Nbc => &self.nbc,
        }
    }

    pub fn value(&self, feature: Feature) -> Option<f64> {
        self.get(feature).value()
    }
}

/// Computes all eight features, sharing one set of walks between FBD (whose
/// sample is the set of walk-visited points), CL and MIE.
pub fn feature_profile(view: &LandscapeView, params: WalkParams, seed: u64) -> Result<FeatureProfile, FeatureError> {
    let coverage = view.coverage();
    if coverage == 0.0 {
        return Err(FeatureError::Sparse);
    }
    let walks = random_walks(view, params, seed)?;
    let visited: Vec<usize> = {
        let mut seen = HashSet::new();
        walks
            .iter()
            .flat_map(|w| w.indices.iter().copied())
            .filter(|i| seen.insert(*i))
            .collect()
    };
    let seqs: Vec<&[f64]> = walks.iter().map(|w| w.fitness_values.as_slice()).collect();
    let profile = FeatureProfile {
        fdc: FeatureValue::from_result(fdc(view)),
        fbd: FeatureValue::from_result(fbd(view, &visited)),
        ske: FeatureValue::from_result(skewness(view)),
        kur: FeatureValue::from_result(kurtosis(view)),
        plo: FeatureValue::from_result(plo(view)),
        cl: FeatureValue::from_result(correlation_length_of_walks(&walks)),
        mie: FeatureValue::from_result(mie_of_sequences(&seqs)),
        nbc: FeatureValue::from_result(nbc(view)),
        coverage,
        walk: params,
        seed,
    };
    if Feature::ALL.iter().all(|f| profile.value(*f).is_none()) {
        return Err(FeatureError::AllUndefined);
    }
    Ok(profile)
}

/// Average of several profiles; a feature is absent if it is absent in every input.
pub fn mean_profile(profiles: &[FeatureProfile]) -> Option<FeatureProfile> {
    let first = profiles.first()?;
    let avg = |f: Feature| {
        let vals: Vec<f64> = profiles.iter().filter_map(|p| p.value(f)).collect();
        if vals.is_empty() {
            first.get(f).clone()
        } else {
            FeatureValue::Present(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    Some(FeatureProfile {
        fdc: avg(Feature::Fdc),
        fbd: avg(Feature::Fbd),
        ske: avg(Feature::Ske),
        kur: avg(Feature::Kur),
        plo: avg(Feature::Plo),
        cl: avg(Feature::Cl),
        mie: avg(Feature::Mie),
        nbc: avg(Feature::Nbc),
        coverage: profiles.iter().map(|p| p.coverage).sum::<f64>() / profiles.len() as f64,
        walk: first.walk,
        seed: first.seed,
    })
}

/// Map from configuration to view index, for callers doing many lookups.
pub fn index_map(view: &LandscapeView) -> HashMap<&Configuration, usize> {
    view.points.iter().enumerate().map(|(i, p)| (p, i)).collect()
}
