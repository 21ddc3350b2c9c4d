//! Minimal model-based tuners over measured datasets.
//!
//! Measuring a configuration is a lookup into the dataset, so tuners only
//! ever propose dataset points. Sequential tuners refit their surrogate after
//! every measurement; batch tuners search a fixed, pre-trained surrogate and
//! measure only their final candidates.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::dataspace::{hamming_unchecked, Configuration, ConfigurationSpace, Direction, PerformanceDataset, Provenance};
use crate::metrics::average_ranks;
use crate::ranker::{Acquisition, BatchHeuristic, Domain, Pattern, Reduction, SeqHeuristic, TunerCharacteristics};
use crate::rng::{self, Rng};
use crate::surrogate::{self, ModelError, ModelSpec, SurrogateModel};

/// Default number of hot-start measurements for sequential tuners.
pub const HOTSTART_DEFAULT: usize = 20;

/// Default number of measured candidates at the end of a batch search.
pub const FINAL_MEASURE_DEFAULT: usize = 10;

/// Per-system tuning budgets.
pub const BUDGET_PRESETS: [(&str, usize); 18] = [
    ("Apache", 271),
    ("7z", 382),
    ("DConvert", 335),
    ("DeepArch", 207),
    ("ExaStencils", 416),
    ("Hadoop", 297),
    ("MariaDB", 226),
    ("MongoDB", 278),
    ("PostgreSQL", 298),
    ("Redis", 298),
    ("Spark", 326),
    ("Storm", 263),
    ("HSMGP", 218),
    ("XGBoost", 278),
    ("HIPAcc", 371),
    ("SQLite", 206),
    ("JavaGC", 289),
    ("Polly", 285),
];

/// Budget preset by system name (case-insensitive).
pub fn budget_preset(system: &str) -> Option<usize> {
    BUDGET_PRESETS
        .iter()
        .find(|(name, _)| name.eq_ignore_ascii_case(system))
        .map(|(_, b)| *b)
}

#[derive(Debug, Error)]
pub enum TuneError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("tuner '{tuner}' is a {actual} tuner, not {expected}")]
    WrongPattern {
        tuner: String,
        expected: Pattern,
        actual: Pattern,
    },
    #[error("budget {budget} exceeds the {available} configurations available")]
    BudgetExceedsData { budget: usize, available: usize },
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error("invalid synthetic system parameters: {0}")]
    InvalidSynth(String),
    #[error("no tuning results to rank")]
    EmptyResults,
    #[error("unknown {what} '{value}'")]
    Unknown { what: &'static str, value: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Random,
    LocalSearch,
    Genetic,
    BoEi,
    BoMaxMean,
    FlashLike,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::BoEi,
        Algorithm::BoMaxMean,
        Algorithm::FlashLike,
        Algorithm::Random,
        Algorithm::LocalSearch,
        Algorithm::Genetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::LocalSearch => "local-search",
            Algorithm::Genetic => "genetic",
            Algorithm::BoEi => "bo-ei",
            Algorithm::BoMaxMean => "bo-maxmean",
            Algorithm::FlashLike => "flash-like",
        }
    }

    pub fn pattern(self) -> Pattern {
        match self {
            Algorithm::BoEi | Algorithm::BoMaxMean | Algorithm::FlashLike => Pattern::Sequential,
            _ => Pattern::Batch,
        }
    }

    /// Characteristics used when a tuner spec gives none.
    pub fn default_characteristics(self) -> TunerCharacteristics {
        let seq = |acquisition, heuristic| TunerCharacteristics::Sequential {
            reduction: Reduction::None,
            acquisition,
            heuristic,
        };
        let batch = |incremental, heuristic| TunerCharacteristics::Batch {
            domain: Domain::General,
            incremental,
            heuristic,
        };
        match self {
            Algorithm::BoEi => seq(Acquisition::Ei, SeqHeuristic::Greedy),
            Algorithm::BoMaxMean => seq(Acquisition::MaxMean, SeqHeuristic::Greedy),
            Algorithm::FlashLike => seq(Acquisition::MaxMean, SeqHeuristic::LocalSearch),
            Algorithm::Random => batch(false, BatchHeuristic::Random),
            Algorithm::LocalSearch => batch(false, BatchHeuristic::LocalSearch),
            Algorithm::Genetic => batch(true, BatchHeuristic::Evolutionary),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = TuneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TuneError::Unknown {
                what: "tuner algorithm",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunerParams {
    pub population: usize,
    pub crossover_rate: f64,
    /// Per-option mutation probability; `None` means 1 / options.
    pub mutation_rate: Option<f64>,
    pub tournament: usize,
    /// Candidates scored per step by the flash-like tuner.
    pub candidate_pool: usize,
}

impl Default for TunerParams {
    fn default() -> Self {
        Self {
            population: 20,
            crossover_rate: 0.9,
            mutation_rate: None,
            tournament: 2,
            candidate_pool: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunerSpec {
    pub id: String,
    pub pattern: Pattern,
    pub characteristics: TunerCharacteristics,
    pub algorithm: Algorithm,
    pub params: TunerParams,
}

impl TunerSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            id: algorithm.name().to_string(),
            pattern: algorithm.pattern(),
            characteristics: algorithm.default_characteristics(),
            algorithm,
            params: TunerParams::default(),
        }
    }

    fn expect(&self, pattern: Pattern) -> Result<(), TuneError> {
        let actual = self.algorithm.pattern();
        if actual != pattern || self.pattern != pattern || self.characteristics.pattern() != pattern {
            return Err(TuneError::WrongPattern {
                tuner: self.id.clone(),
                expected: pattern,
                actual,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub tuner: String,
    pub model: String,
    /// Best measured performance, oriented so that smaller is better.
    pub best_measured: f64,
    pub best_configuration: Configuration,
    /// (step, best-so-far) after each measurement.
    pub trajectory: Vec<(usize, f64)>,
    pub budget_used: usize,
    pub measurements: usize,
    pub model_evaluations: usize,
    /// Set when every surrogate score seen during the search was identical.
    pub low_signal: bool,
    pub seed: u64,
}

struct Measurements<'a> {
    oriented: &'a [f64],
    order: Vec<usize>,
    seen: HashSet<usize>,
    trajectory: Vec<(usize, f64)>,
    best: Option<usize>,
}

impl<'a> Measurements<'a> {
    fn new(oriented: &'a [f64]) -> Self {
        Self {
            oriented,
            order: Vec::new(),
            seen: HashSet::new(),
            trajectory: Vec::new(),
            best: None,
        }
    }

    fn measure(&mut self, i: usize) {
        if !self.seen.insert(i) {
            return;
        }
        self.order.push(i);
        if self.best.is_none_or(|b| self.oriented[i] < self.oriented[b]) {
            self.best = Some(i);
        }
        let best = self.oriented[self.best.unwrap_or(i)];
        self.trajectory.push((self.order.len(), best));
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Expected improvement below `best` of a normal with mean `mu` and std `sigma`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 {
        return (best - mu).max(0.0);
    }
    let z = (best - mu) / sigma;
    (best - mu) * normal_cdf(z) + sigma * normal_pdf(z)
}

/// Index of the highest score, ties broken uniformly at random.
fn argmax_random(scores: &[(usize, f64)], rng: &mut Rng) -> usize {
    let top = scores.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = scores.iter().filter(|s| s.1 == top).map(|s| s.0).collect();
    *ties.choose(rng).expect("non-empty candidate set")
}

/// Sequential model-based tuning: hot-start, then refit and measure the
/// acquisition winner until `budget` measurements (hot-start included) are spent.
pub fn run_sequential(
    tuner: &TunerSpec,
    model: ModelSpec,
    dataset: &PerformanceDataset,
    budget: usize,
    hotstart: usize,
    seed: u64,
) -> Result<TuningResult, TuneError> {
    tuner.expect(Pattern::Sequential)?;
    let n = dataset.len();
    if budget > n {
        return Err(TuneError::BudgetExceedsData { budget, available: n });
    }
    if hotstart == 0 || hotstart > budget {
        return Err(TuneError::InvalidBudget(format!(
            "hot-start {hotstart} must be between 1 and the budget {budget}"
        )));
    }
    let direction = dataset.space().direction;
    let oriented = dataset.oriented();
    let mut rng = rng::stream(seed, 0);
    let mut m = Measurements::new(&oriented);
    for i in sample(&mut rng, n, hotstart).into_vec() {
        m.measure(i);
    }
    let use_ei = tuner.algorithm == Algorithm::BoEi;
    let mut warned = false;
    let mut evaluations = 0;
    let mut all_equal = true;
    let mut step = 0u64;
    while m.order.len() < budget {
        step += 1;
        let train = dataset.subset(&m.order);
        let fitted = surrogate::train(model, &train, rng::derive_seed(seed, step))?;
        let unmeasured: Vec<usize> = (0..n).filter(|i| !m.seen.contains(i)).collect();
        let candidates = if tuner.algorithm == Algorithm::FlashLike && unmeasured.len() > tuner.params.candidate_pool {
            let mut pool: Vec<usize> = sample(&mut rng, unmeasured.len(), tuner.params.candidate_pool)
                .into_iter()
                .map(|k| unmeasured[k])
                .collect();
            pool.sort_unstable();
            pool
        } else {
            unmeasured
        };
        let best = oriented[m.best.expect("hot-start measured")];
        let ei = use_ei && fitted.has_uncertainty();
        if use_ei && !ei && !warned {
            log::warn!(
                "{} model has no uncertainty estimate; expected improvement falls back to the predicted mean",
                fitted.label()
            );
            warned = true;
        }
        let mut scores = Vec::with_capacity(candidates.len());
        for &i in &candidates {
            let c = &dataset.rows()[i].0;
            let score = if ei {
                let t: Vec<f64> = fitted
                    .tree_predictions(c)
                    .expect("forest")
                    .into_iter()
                    .map(|y| direction.orient(y))
                    .collect();
                let mu = t.iter().sum::<f64>() / t.len() as f64;
                let var = t.iter().map(|y| (y - mu).powi(2)).sum::<f64>() / t.len() as f64;
                expected_improvement(mu, var.sqrt(), best)
            } else {
                -direction.orient(fitted.predict_one(c)?)
            };
            scores.push((i, score));
        }
        evaluations += scores.len();
        all_equal &= scores.windows(2).all(|w| w[0].1 == w[1].1);
        let pick = argmax_random(&scores, &mut rng);
        m.measure(pick);
    }
    let best = m.best.expect("at least one measurement");
    Ok(TuningResult {
        tuner: tuner.id.clone(),
        model: model.kind.short().to_string(),
        best_measured: oriented[best],
        best_configuration: dataset.rows()[best].0.clone(),
        trajectory: m.trajectory,
        budget_used: m.order.len(),
        measurements: m.order.len(),
        model_evaluations: evaluations,
        low_signal: budget > hotstart && all_equal,
        seed,
    })
}

struct Evaluator<'a> {
    model: &'a SurrogateModel,
    dataset: &'a PerformanceDataset,
    direction: Direction,
    cache: HashMap<usize, f64>,
    order: Vec<usize>,
    budget: usize,
}

impl Evaluator<'_> {
    fn exhausted(&self) -> bool {
        self.order.len() >= self.budget
    }

    /// Oriented prediction at dataset row `i`; new points consume budget.
    fn score(&mut self, i: usize) -> Result<Option<f64>, TuneError> {
        if let Some(v) = self.cache.get(&i) {
            return Ok(Some(*v));
        }
        if self.exhausted() {
            return Ok(None);
        }
        let v = self.direction.orient(self.model.predict_one(&self.dataset.rows()[i].0)?);
        self.cache.insert(i, v);
        self.order.push(i);
        Ok(Some(v))
    }
}

/// Batch tuning over a fixed model. `budget` counts distinct model evaluations
/// and is capped at the dataset size; the best `final_measure` candidates by
/// prediction are then measured.
pub fn run_batch(
    tuner: &TunerSpec,
    model: &SurrogateModel,
    dataset: &PerformanceDataset,
    budget: usize,
    final_measure: usize,
    seed: u64,
) -> Result<TuningResult, TuneError> {
    tuner.expect(Pattern::Batch)?;
    if budget == 0 || final_measure == 0 {
        return Err(TuneError::InvalidBudget(
            "batch budget and final measurements must be positive".into(),
        ));
    }
    let n = dataset.len();
    let mut ev = Evaluator {
        model,
        dataset,
        direction: dataset.space().direction,
        cache: HashMap::new(),
        order: Vec::new(),
        budget: budget.min(n),
    };
    let mut rng = rng::stream(seed, 0);
    match tuner.algorithm {
        Algorithm::Random => {
            for i in sample(&mut rng, n, ev.budget).into_vec() {
                ev.score(i)?;
            }
        }
        Algorithm::LocalSearch => local_search(&mut ev, &mut rng)?,
        Algorithm::Genetic => genetic(&mut ev, &tuner.params, &mut rng)?,
        _ => unreachable!("checked by pattern"),
    }

    let mut ranked: Vec<(usize, f64)> = ev.order.iter().map(|&i| (i, ev.cache[&i])).collect();
    let low_signal = ranked.windows(2).all(|w| w[0].1 == w[1].1);
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let oriented = dataset.oriented();
    let mut m = Measurements::new(&oriented);
    for &(i, _) in ranked.iter().take(final_measure) {
        m.measure(i);
    }
    let best = m.best.expect("at least one evaluation");
    Ok(TuningResult {
        tuner: tuner.id.clone(),
        model: model.label().to_string(),
        best_measured: oriented[best],
        best_configuration: dataset.rows()[best].0.clone(),
        trajectory: m.trajectory,
        budget_used: ev.order.len(),
        measurements: m.order.len(),
        model_evaluations: ev.order.len(),
        low_signal,
        seed,
    })
}

/// Best-improvement hill climbing over Hamming-1 neighbors, restarting from a
/// random unevaluated point at local optima.
fn local_search(ev: &mut Evaluator<'_>, rng: &mut Rng) -> Result<(), TuneError> {
    let n = ev.dataset.len();
    let points: Vec<Configuration> = ev.dataset.configurations().cloned().collect();
    let adj = crate::dataspace::adjacency(&points, 1);
    let mut restart_order: Vec<usize> = (0..n).collect();
    restart_order.shuffle(rng);
    let mut next_restart = 0;
    while !ev.exhausted() {
        let Some(&start) = restart_order[next_restart..].iter().find(|i| !ev.cache.contains_key(i)) else {
            break;
        };
        next_restart = restart_order.iter().position(|&i| i == start).unwrap_or(0) + 1;
        let mut current = start;
        let Some(mut value) = ev.score(current)? else { break };
        loop {
            let mut best: Option<(usize, f64)> = None;
            for &j in &adj[current] {
                let Some(v) = ev.score(j)? else { break };
                if best.is_none_or(|(_, b)| v < b) {
                    best = Some((j, v));
                }
            }
            match best {
                Some((j, v)) if v < value => {
                    current = j;
                    value = v;
                }
                _ => break,
            }
            if ev.exhausted() {
                break;
            }
        }
    }
    Ok(())
}

fn nearest_point(points: &[Configuration], child: &[usize]) -> usize {
    let mut best = (usize::MAX, 0);
    for (i, p) in points.iter().enumerate() {
        let d = hamming_unchecked(p.values(), child);
        if d < best.0 {
            best = (d, i);
            if d == 0 {
                break;
            }
        }
    }
    best.1
}

/// Generational GA with tournament selection, uniform crossover, per-option
/// mutation and elitist survival; children off the dataset snap to the
/// nearest dataset point.
fn genetic(ev: &mut Evaluator<'_>, params: &TunerParams, rng: &mut Rng) -> Result<(), TuneError> {
    let n = ev.dataset.len();
    let space = ev.dataset.space();
    let points: Vec<Configuration> = ev.dataset.configurations().cloned().collect();
    let index: HashMap<&Configuration, usize> = points.iter().enumerate().map(|(i, p)| (p, i)).collect();
    let pop_size = params.population.clamp(2, n);
    let mutation = params.mutation_rate.unwrap_or(1.0 / space.len().max(1) as f64);
    let mut population: Vec<(usize, f64)> = Vec::new();
    for i in sample(rng, n, pop_size.min(ev.budget)).into_vec() {
        if let Some(v) = ev.score(i)? {
            population.push((i, v));
        }
    }
    let mut stale = 0;
    while !ev.exhausted() && stale < 50 && !population.is_empty() {
        let before = ev.order.len();
        let mut children = Vec::with_capacity(pop_size);
        for _ in 0..pop_size {
            let a = tournament(&population, params.tournament, rng);
            let b = tournament(&population, params.tournament, rng);
            let pa = points[a].values();
            let pb = points[b].values();
            let mut child: Vec<usize> = if rng.gen_bool(params.crossover_rate.clamp(0.0, 1.0)) {
                pa.iter().zip(pb).map(|(x, y)| if rng.gen_bool(0.5) { *x } else { *y }).collect()
            } else {
                pa.to_vec()
            };
            for (k, v) in child.iter_mut().enumerate() {
                let levels = space.options()[k].len();
                if levels > 1 && rng.gen_bool(mutation.clamp(0.0, 1.0)) {
                    let r = rng.gen_range(0..levels - 1);
                    *v = if r >= *v { r + 1 } else { r };
                }
            }
            let c = Configuration::new(child);
            let i = match index.get(&c) {
                Some(&i) => i,
                None => nearest_point(&points, c.values()),
            };
            match ev.score(i)? {
                Some(v) => children.push((i, v)),
                None => break,
            }
        }
        let mut merged = population;
        merged.extend(children);
        merged.sort_by(|x, y| x.1.total_cmp(&y.1));
        let mut seen = HashSet::new();
        merged.retain(|(i, _)| seen.insert(*i));
        merged.truncate(pop_size);
        population = merged;
        stale = if ev.order.len() == before { stale + 1 } else { 0 };
    }
    Ok(())
}

fn tournament(population: &[(usize, f64)], size: usize, rng: &mut Rng) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for _ in 0..size.max(1) {
        let cand = population[rng.gen_range(0..population.len())];
        if best.is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    best.expect("non-empty population").0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Unimodal,
    Rugged,
    Deceptive,
}

impl SynthKind {
    pub const ALL: [SynthKind; 3] = [SynthKind::Unimodal, SynthKind::Rugged, SynthKind::Deceptive];
}

impl fmt::Display for SynthKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthKind::Unimodal => "unimodal",
            SynthKind::Rugged => "rugged",
            SynthKind::Deceptive => "deceptive",
        })
    }
}

impl FromStr for SynthKind {
    type Err = TuneError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SynthKind::ALL
            .into_iter()
            .find(|k| k.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| TuneError::Unknown {
                what: "synthetic system kind",
                value: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    /// Half-width of the uniform noise added to every value.
    pub noise: f64,
    /// Epistasis of rugged systems: each option interacts with the next `k`.
    pub k: usize,
    /// Radius of the deceptive basin around the optimum.
    pub basin: usize,
    /// Constant added so that all performance values are positive.
    pub offset: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            noise: 0.0,
            k: 2,
            basin: 2,
            offset: 10.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticSystem {
    pub kind: SynthKind,
    pub dataset: PerformanceDataset,
    /// Planted (unimodal, deceptive) or located (rugged) best configuration.
    pub optimum: Configuration,
}

/// Largest number of binary options a synthetic system may have.
pub const SYNTH_MAX_OPTIONS: usize = 16;

/// Fully enumerated binary system with known structure; minimized.
pub fn synth_system(kind: SynthKind, n_options: usize, seed: u64, params: SynthParams) -> Result<SyntheticSystem, TuneError> {
    if n_options == 0 || n_options > SYNTH_MAX_OPTIONS {
        return Err(TuneError::InvalidSynth(format!(
            "options must be between 1 and {SYNTH_MAX_OPTIONS}, got {n_options}"
        )));
    }
    if !(params.noise >= 0.0 && params.noise.is_finite()) || !params.offset.is_finite() {
        return Err(TuneError::InvalidSynth("noise must be non-negative and finite".into()));
    }
    if kind == SynthKind::Rugged && params.k >= n_options {
        return Err(TuneError::InvalidSynth(format!("k = {} must be below the option count", params.k)));
    }
    let space = ConfigurationSpace::binary(n_options, Direction::Minimize);
    let points = space.enumerate();
    let mut r = rng::stream(seed, 0);
    let planted = Configuration::new((0..n_options).map(|_| r.gen_range(0..2)).collect());
    let base: Vec<f64> = match kind {
        SynthKind::Unimodal => points
            .iter()
            .map(|p| hamming_unchecked(p.values(), planted.values()) as f64)
            .collect(),
        SynthKind::Deceptive => {
            let b = params.basin;
            points
                .iter()
                .map(|p| {
                    let d = hamming_unchecked(p.values(), planted.values());
                    match d {
                        0 => 0.0,
                        d if d <= b => 1.0 + (b - d) as f64,
                        d => 1.0 + (d - b) as f64,
                    }
                })
                .collect()
        }
        SynthKind::Rugged => {
            let k = params.k;
            let tables: Vec<Vec<f64>> = (0..n_options)
                .map(|_| (0..1usize << (k + 1)).map(|_| r.gen::<f64>()).collect())
                .collect();
            points
                .iter()
                .map(|p| {
                    let v = p.values();
                    let total: f64 = (0..n_options)
                        .map(|i| {
                            let key = (0..=k).fold(0usize, |acc, j| (acc << 1) | v[(i + j) % n_options]);
                            tables[i][key]
                        })
                        .sum();
                    total
                })
                .collect()
        }
    };
    let mut noise_rng = rng::stream(seed, 1);
    let rows: Vec<(Configuration, f64)> = points
        .into_iter()
        .zip(base)
        .map(|(p, y)| {
            let e = if params.noise > 0.0 {
                noise_rng.gen_range(-params.noise..=params.noise)
            } else {
                0.0
            };
            (p, params.offset + y + e)
        })
        .collect();
    let optimum = match kind {
        SynthKind::Rugged => {
            let best = rows
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty space");
            best.0.clone()
        }
        _ => planted,
    };
    let dataset = PerformanceDataset::new(space, rows, Provenance::Synthetic)
        .map_err(|e| TuneError::InvalidSynth(e.to_string()))?;
    Ok(SyntheticSystem { kind, dataset, optimum })
}

/// Average ranks (1 = best) of (model, tuner) pairs by mean best_measured.
pub fn rank_pairs(
    results: &BTreeMap<(String, String), Vec<TuningResult>>,
) -> Result<BTreeMap<(String, String), f64>, TuneError> {
    if results.is_empty() || results.values().any(Vec::is_empty) {
        return Err(TuneError::EmptyResults);
    }
    let means: Vec<f64> = results
        .values()
        .map(|rs| rs.iter().map(|r| r.best_measured).sum::<f64>() / rs.len() as f64)
        .collect();
    let ranks = average_ranks(&means);
    Ok(results.keys().cloned().zip(ranks).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{feature_profile, LandscapeView, ViewSource, WalkParams};
    use crate::surrogate::{ModelKind, PredictionSet};

    fn perfect(d: &PerformanceDataset) -> SurrogateModel {
        SurrogateModel::external(&PredictionSet::new("oracle", d.rows().to_vec()).unwrap(), d.space()).unwrap()
    }

    fn is_monotone(r: &TuningResult) -> bool {
        r.trajectory.windows(2).all(|w| w[1].1 <= w[0].1)
    }

    #[test]
    fn budget_table() {
        assert_eq!(BUDGET_PRESETS.len(), 18);
        assert_eq!(budget_preset("apache"), Some(271));
        assert_eq!(budget_preset("Polly"), Some(285));
        assert_eq!(budget_preset("nope"), None);
        assert_eq!(HOTSTART_DEFAULT, 20);
    }

    #[test]
    fn budget_equal_to_hotstart_measures_only_the_sample() {
        let s = synth_system(SynthKind::Unimodal, 6, 1, SynthParams::default()).unwrap();
        let t = TunerSpec::new(Algorithm::BoMaxMean);
        let r = run_sequential(&t, ModelSpec::new(ModelKind::Cart), &s.dataset, 20, 20, 3).unwrap();
        assert_eq!(r.measurements, 20);
        assert_eq!(r.model_evaluations, 0);
        assert_eq!(r.trajectory.len(), 20);
        assert!(is_monotone(&r));
    }

    #[test]
    fn sequential_accounting_and_determinism() {
        let s = synth_system(SynthKind::Rugged, 6, 4, SynthParams::default()).unwrap();
        for alg in [Algorithm::BoEi, Algorithm::BoMaxMean, Algorithm::FlashLike] {
            let t = TunerSpec::new(alg);
            let a = run_sequential(&t, ModelSpec::new(ModelKind::RandomForest), &s.dataset, 30, 10, 8).unwrap();
            let b = run_sequential(&t, ModelSpec::new(ModelKind::RandomForest), &s.dataset, 30, 10, 8).unwrap();
            assert_eq!(a, b);
            assert_eq!(a.measurements, 30);
            assert_eq!(a.budget_used, 30);
            assert!(is_monotone(&a));
        }
    }

    #[test]
    fn sequential_rejects_oversized_budget_and_batch_tuners() {
        let s = synth_system(SynthKind::Unimodal, 3, 0, SynthParams::default()).unwrap();
        let spec = ModelSpec::new(ModelKind::Cart);
        assert!(matches!(
            run_sequential(&TunerSpec::new(Algorithm::BoEi), spec, &s.dataset, 9, 2, 0),
            Err(TuneError::BudgetExceedsData { .. })
        ));
        assert!(matches!(
            run_sequential(&TunerSpec::new(Algorithm::Random), spec, &s.dataset, 4, 2, 0),
            Err(TuneError::WrongPattern { .. })
        ));
    }

    #[test]
    fn exhaustive_random_search_with_perfect_model_finds_optimum() {
        let s = synth_system(SynthKind::Deceptive, 6, 2, SynthParams::default()).unwrap();
        let m = perfect(&s.dataset);
        let r = run_batch(&TunerSpec::new(Algorithm::Random), &m, &s.dataset, 64, 1, 5).unwrap();
        assert_eq!(r.best_configuration, s.optimum);
        assert_eq!(r.model_evaluations, 64);
        assert_eq!(r.measurements, 1);
    }

    #[test]
    fn batch_accounting_is_exact() {
        let s = synth_system(SynthKind::Rugged, 7, 3, SynthParams::default()).unwrap();
        let m = perfect(&s.dataset);
        for alg in [Algorithm::Random, Algorithm::LocalSearch, Algorithm::Genetic] {
            let r = run_batch(&TunerSpec::new(alg), &m, &s.dataset, 40, 10, 1).unwrap();
            assert_eq!(r.model_evaluations, 40, "{alg}");
            assert_eq!(r.measurements, 10, "{alg}");
            assert!(is_monotone(&r));
        }
    }

    #[test]
    fn genetic_is_deterministic() {
        let s = synth_system(SynthKind::Rugged, 8, 9, SynthParams::default()).unwrap();
        let m = perfect(&s.dataset);
        let t = TunerSpec::new(Algorithm::Genetic);
        assert_eq!(
            run_batch(&t, &m, &s.dataset, 80, 10, 4).unwrap(),
            run_batch(&t, &m, &s.dataset, 80, 10, 4).unwrap()
        );
    }

    #[test]
    fn constant_model_is_flagged_low_signal() {
        let s = synth_system(SynthKind::Unimodal, 5, 0, SynthParams::default()).unwrap();
        let flat: Vec<_> = s.dataset.rows().iter().map(|(c, _)| (c.clone(), 1.0)).collect();
        let m = SurrogateModel::external(&PredictionSet::new("flat", flat).unwrap(), s.dataset.space()).unwrap();
        let r = run_batch(&TunerSpec::new(Algorithm::LocalSearch), &m, &s.dataset, 10, 3, 0).unwrap();
        assert!(r.low_signal);
    }

    #[test]
    fn synthetic_systems() {
        let u = synth_system(SynthKind::Unimodal, 6, 11, SynthParams::default()).unwrap();
        let view = LandscapeView::from_dataset(&u.dataset, ViewSource::Exact).unwrap();
        let p = feature_profile(&view, WalkParams::default(), 0).unwrap();
        assert!((p.fdc.value().unwrap() - 1.0).abs() < 1e-12);
        let again = synth_system(SynthKind::Unimodal, 6, 11, SynthParams::default()).unwrap();
        assert_eq!(u.dataset.rows(), again.dataset.rows());

        let d = synth_system(SynthKind::Deceptive, 8, 1, SynthParams::default()).unwrap();
        let best = d.dataset.rows().iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(best.0, d.optimum);

        assert!(synth_system(SynthKind::Rugged, 4, 0, SynthParams { k: 4, ..Default::default() }).is_err());
        assert!(synth_system(SynthKind::Unimodal, 17, 0, SynthParams::default()).is_err());
    }

    #[test]
    fn rank_pairs_examples() {
        let result = |v: f64| TuningResult {
            tuner: "t".into(),
            model: "m".into(),
            best_measured: v,
            best_configuration: Configuration::new(vec![0]),
            trajectory: vec![(1, v)],
            budget_used: 1,
            measurements: 1,
            model_evaluations: 0,
            low_signal: false,
            seed: 0,
        };
        let mut r = BTreeMap::new();
        r.insert(("a".to_string(), "t".to_string()), vec![result(2.0)]);
        r.insert(("b".to_string(), "t".to_string()), vec![result(1.0), result(1.0)]);
        r.insert(("c".to_string(), "t".to_string()), vec![result(3.0)]);
        let ranks = rank_pairs(&r).unwrap();
        assert_eq!(ranks.values().copied().collect::<Vec<_>>(), vec![2.0, 1.0, 3.0]);
        r.insert(("d".to_string(), "t".to_string()), vec![result(3.0)]);
        let ranks = rank_pairs(&r).unwrap();
        assert_eq!(ranks[&("c".to_string(), "t".to_string())], 3.5);
        assert!(matches!(rank_pairs(&BTreeMap::new()), Err(TuneError::EmptyResults)));
    }
}
