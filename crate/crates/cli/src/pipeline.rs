//! Repeated split/train/profile runs and tuning jobs shared by the commands.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;
use tunescape::dataspace::{split_train_test, Configuration, PerformanceDataset};
use tunescape::landscape::{build_view, feature_profile, mean_profile, FeatureProfile, ViewSource};
use tunescape::metrics::{accuracy, AccuracyReport};
use tunescape::ranker::Pattern;
use tunescape::rng::derive_seed;
use tunescape::surrogate::{self, emulated_view, predict, ModelSpec, SurrogateModel};
use tunescape::tuneharness::{run_batch, run_sequential, TunerSpec, TuningResult};

use crate::args::{Budget, Study};
use crate::error::{CliError, CliResult};

/// Stream offsets under a repeat seed.
const TRAIN_STREAM: u64 = 1;
const WALK_STREAM: u64 = 2;
const TUNE_STREAM: u64 = 3;

pub fn repeat_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, r as u64)
}

pub struct ModelRun {
    pub label: String,
    pub fitted: SurrogateModel,
    /// `None` when no feature is defined on the emulated landscape.
    pub profile: Option<FeatureProfile>,
    pub accuracy: AccuracyReport,
}

pub struct RepeatRun {
    pub seed: u64,
    pub system: FeatureProfile,
    pub models: Vec<ModelRun>,
}

fn run_once(dataset: &PerformanceDataset, study: &Study, seed: u64) -> CliResult<RepeatRun> {
    let (train, test) = split_train_test(dataset, study.train_size, seed)?;
    let points: Vec<Configuration> = test.configurations().cloned().collect();
    let actual: Vec<f64> = test.rows().iter().map(|(_, y)| *y).collect();
    let walk_seed = derive_seed(seed, WALK_STREAM);
    let system = feature_profile(&build_view(dataset, &points, ViewSource::Exact)?, study.walk, walk_seed)?;
    let models = study
        .specs()
        .into_iter()
        .map(|spec| {
            let label = spec.kind.short().to_string();
            let fitted = surrogate::train(spec, &train, derive_seed(seed, TRAIN_STREAM))?;
            let predicted = predict(&fitted, &points)?.values();
            let view = emulated_view(&fitted, &points, dataset.space().direction)?;
            let profile = match feature_profile(&view, study.walk, walk_seed) {
                Ok(p) => Some(p),
                Err(e) => {
                    warn!("{label}: {e}");
                    None
                }
            };
            Ok(ModelRun {
                label,
                fitted,
                profile,
                accuracy: accuracy(&actual, &predicted)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(RepeatRun { seed, system, models })
}

/// `study.repeats` independent runs; repeat `r` is seeded by `repeat_seed(seed, r)`.
pub fn run_repeats(dataset: &PerformanceDataset, study: &Study, seed: u64) -> CliResult<Vec<RepeatRun>> {
    (0..study.repeats)
        .into_par_iter()
        .map(|r| run_once(dataset, study, repeat_seed(seed, r)))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub profile: Option<FeatureProfile>,
    pub mape: f64,
    pub murd: f64,
    pub n_test: usize,
    /// Repeats whose emulated landscape had a defined profile.
    pub profiled_repeats: usize,
}

pub fn system_mean(runs: &[RepeatRun]) -> FeatureProfile {
    let profiles: Vec<FeatureProfile> = runs.iter().map(|r| r.system.clone()).collect();
    mean_profile(&profiles).expect("at least one repeat")
}

/// Mean profile and accuracy per model label.
pub fn model_means(runs: &[RepeatRun]) -> BTreeMap<String, ModelSummary> {
    let mut out = BTreeMap::new();
    for (i, m) in runs[0].models.iter().enumerate() {
        let profiles: Vec<FeatureProfile> = runs.iter().filter_map(|r| r.models[i].profile.clone()).collect();
        let n = runs.len() as f64;
        out.insert(
            m.label.clone(),
            ModelSummary {
                profile: mean_profile(&profiles),
                mape: runs.iter().map(|r| r.models[i].accuracy.mape).sum::<f64>() / n,
                murd: runs.iter().map(|r| r.models[i].accuracy.murd).sum::<f64>() / n,
                n_test: m.accuracy.n_test,
                profiled_repeats: profiles.len(),
            },
        );
    }
    out
}

/// Every (model, tuner) pair run once per repeat. Sequential tuners fit
/// their own models on the measured data; batch tuners search the model
/// trained in the same repeat.
pub fn tune_pairs(
    dataset: &PerformanceDataset,
    runs: &[RepeatRun],
    specs: &[ModelSpec],
    tuners: &[TunerSpec],
    budget: &Budget,
) -> CliResult<BTreeMap<(String, String), Vec<TuningResult>>> {
    let mut jobs = Vec::new();
    for (m, spec) in specs.iter().enumerate() {
        for t in tuners {
            for r in 0..runs.len() {
                jobs.push((m, spec, t, r));
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(m, spec, t, r)| {
            let run = &runs[r];
            let seed = derive_seed(run.seed, TUNE_STREAM);
            let result = match t.pattern {
                Pattern::Sequential => run_sequential(t, *spec, dataset, budget.budget, budget.hotstart, seed)?,
                Pattern::Batch => run_batch(t, &run.models[m].fitted, dataset, budget.budget, budget.final_measure, seed)?,
            };
            Ok(((run.models[m].label.clone(), t.id.clone()), result))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out: BTreeMap<(String, String), Vec<TuningResult>> = BTreeMap::new();
    for (key, result) in results {
        out.entry(key).or_default().push(result);
    }
    Ok(out)
}

/// One tuning run under the seeds `tune_pairs` would use for repeat seed `seed`.
pub fn tune_one(
    dataset: &PerformanceDataset,
    spec: ModelSpec,
    tuner: &TunerSpec,
    study: &Study,
    budget: &Budget,
    seed: u64,
) -> CliResult<TuningResult> {
    let tune_seed = derive_seed(seed, TUNE_STREAM);
    Ok(match tuner.pattern {
        Pattern::Sequential => run_sequential(tuner, spec, dataset, budget.budget, budget.hotstart, tune_seed)?,
        Pattern::Batch => {
            let (train, _) = split_train_test(dataset, study.train_size, seed)?;
            let fitted = surrogate::train(spec, &train, derive_seed(seed, TRAIN_STREAM))?;
            run_batch(tuner, &fitted, dataset, budget.budget, budget.final_measure, tune_seed)?
        }
    })
}

pub fn mean_best(results: &BTreeMap<(String, String), Vec<TuningResult>>) -> BTreeMap<(String, String), f64> {
    results
        .iter()
        .map(|(k, rs)| (k.clone(), rs.iter().map(|r| r.best_measured).sum::<f64>() / rs.len() as f64))
        .collect()
}
