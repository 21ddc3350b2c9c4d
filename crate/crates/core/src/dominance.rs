//! Landscape dominance between surrogate models.
//!
//! A model is summarized against the real system by two objectives: the
//! absolute deviation `Δg` of one global feature and the oriented value `l`
//! of one local feature of the model-emulated landscape (smaller is easier,
//! CL is negated). Model A dominates B when it is no worse on both and
//! strictly better on one.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{orient_local, Feature, FeatureProfile, GlobalFeature, LocalFeature};
use crate::metrics::{mean, wilcoxon_rank_sum, wilcoxon_signed_rank};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DominanceError {
    #[error("{feature} is undefined for {who}")]
    UndefinedObjective { feature: Feature, who: String },
    #[error("objective pairs use different feature choices")]
    MismatchedObjectives,
    #[error("no tuning result for model '{model}' with tuner '{tuner}'")]
    MissingResult { model: String, tuner: String },
    #[error("fidelity report needs at least one system profile and one model profile")]
    NoRepeats,
}

/// The (global, local) feature choice of an objective pair.
pub type Objective = (GlobalFeature, LocalFeature);

/// All 16 global × local combinations.
pub fn all_objectives() -> Vec<Objective> {
    GlobalFeature::ALL
        .iter()
        .flat_map(|&g| LocalFeature::ALL.iter().map(move |&l| (g, l)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePair {
    pub global_feature: GlobalFeature,
    pub local_feature: LocalFeature,
    pub delta_g: f64,
    pub l: f64,
}

impl ObjectivePair {
    pub fn objective(&self) -> Objective {
        (self.global_feature, self.local_feature)
    }
}

fn require(profile: &FeatureProfile, feature: Feature, who: &str) -> Result<f64, DominanceError> {
    profile
        .value(feature)
        .ok_or_else(|| DominanceError::UndefinedObjective {
            feature,
            who: who.to_string(),
        })
}

pub fn objective_pair(
    system: &FeatureProfile,
    model: &FeatureProfile,
    g: GlobalFeature,
    l: LocalFeature,
) -> Result<ObjectivePair, DominanceError> {
    let gs = require(system, g.into(), "the system")?;
    let gm = require(model, g.into(), "the model")?;
    let lm = require(model, l.into(), "the model")?;
    Ok(ObjectivePair {
        global_feature: g,
        local_feature: l,
        delta_g: (gs - gm).abs(),
        l: orient_local(l, lm),
    })
}

/// Signed deviation `v_model − v_system` of any feature, as consumed by the ranker.
pub fn signed_deviation(
    system: &FeatureProfile,
    model: &FeatureProfile,
    feature: Feature,
) -> Result<f64, DominanceError> {
    Ok(require(model, feature, "the model")? - require(system, feature, "the system")?)
}

pub fn dominates(a: &ObjectivePair, b: &ObjectivePair) -> Result<bool, DominanceError> {
    if a.objective() != b.objective() {
        return Err(DominanceError::MismatchedObjectives);
    }
    Ok((a.delta_g <= b.delta_g && a.l < b.l) || (a.delta_g < b.delta_g && a.l <= b.l))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DominancePair {
    pub dominating: String,
    pub dominated: String,
    pub tuner: String,
    pub objective: Objective,
}

/// Every ordered (A, B) with A ≻ B, for each tuner and objective choice.
/// Models whose objective is undefined under a choice take no part in it.
pub fn dg_dd_pairs(
    profiles: &BTreeMap<String, FeatureProfile>,
    system: &FeatureProfile,
    tuners: &[String],
    objectives: &[Objective],
) -> Vec<DominancePair> {
    let per_objective: Vec<Vec<(String, String, Objective)>> = objectives
        .par_iter()
        .map(|&(g, l)| {
            let objs: Vec<(&String, ObjectivePair)> = profiles
                .iter()
                .filter_map(|(m, p)| objective_pair(system, p, g, l).ok().map(|o| (m, o)))
                .collect();
            let mut out = Vec::new();
            for (a, oa) in &objs {
                for (b, ob) in &objs {
                    if a != b && dominates(oa, ob).unwrap_or(false) {
                        out.push(((*a).clone(), (*b).clone(), (g, l)));
                    }
                }
            }
            out
        })
        .collect();
    tuners
        .iter()
        .flat_map(|t| {
            per_objective.iter().flatten().map(move |(a, b, o)| DominancePair {
                dominating: a.clone(),
                dominated: b.clone(),
                tuner: t.clone(),
                objective: *o,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaP {
    /// Mean of `p_DG − p_DD`; `None` when there are no pairs.
    pub delta_p: Option<f64>,
    pub dg_win_pct: f64,
    pub dg_lose_pct: f64,
    /// Pairs whose performances tie exactly.
    pub tie_pct: f64,
    /// Signed-rank p-value; `None` when there are no pairs or every difference is zero.
    pub p_value: Option<f64>,
    pub small_sample: bool,
    pub n: usize,
}

/// Compares tuned performance (oriented minimize) of dominating and dominated models.
pub fn delta_p(
    pairs: &[DominancePair],
    tuning_results: &BTreeMap<(String, String), f64>,
) -> Result<DeltaP, DominanceError> {
    let lookup = |model: &String, tuner: &String| {
        tuning_results
            .get(&(model.clone(), tuner.clone()))
            .copied()
            .ok_or_else(|| DominanceError::MissingResult {
                model: model.clone(),
                tuner: tuner.clone(),
            })
    };
    let diffs = pairs
        .iter()
        .map(|p| Ok(lookup(&p.dominating, &p.tuner)? - lookup(&p.dominated, &p.tuner)?))
        .collect::<Result<Vec<f64>, DominanceError>>()?;
    let n = diffs.len();
    if n == 0 {
        return Ok(DeltaP {
            delta_p: None,
            dg_win_pct: 0.0,
            dg_lose_pct: 0.0,
            tie_pct: 0.0,
            p_value: None,
            small_sample: true,
            n,
        });
    }
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let test = wilcoxon_signed_rank(&diffs).ok();
    Ok(DeltaP {
        delta_p: Some(mean(&diffs)),
        dg_win_pct: pct(diffs.iter().filter(|d| **d < 0.0).count()),
        dg_lose_pct: pct(diffs.iter().filter(|d| **d > 0.0).count()),
        tie_pct: pct(diffs.iter().filter(|d| **d == 0.0).count()),
        p_value: test.as_ref().map(|t| t.p_value),
        small_sample: test.is_none_or(|t| t.small_sample),
        n,
    })
}

/// Deviation of one model on one feature across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    pub model: String,
    pub feature: Feature,
    /// Mean of `v_model − v_system` over the repeats where both are defined.
    pub signed_delta: Option<f64>,
    /// Rank-sum p-value of model values against system values.
    pub p_value: Option<f64>,
}

/// One feature's aggregate over all models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub feature: Feature,
    #[serde(rename = "+Δ")]
    pub plus_delta: Option<f64>,
    #[serde(rename = "−Δ")]
    pub minus_delta: Option<f64>,
    #[serde(rename = "SS%")]
    pub ss_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub rows: Vec<FidelityRow>,
    pub records: Vec<FidelityRecord>,
}

/// Signed deviations of every model from the system, per feature.
///
/// Repeat `r` of a model is paired with repeat `r` of the system (cycling when
/// the system has fewer repeats). `+Δ` averages deviations `≥ 0`, `−Δ` those
/// `≤ 0`; `None` marks a column with no applicable case. `SS%` is the share of
/// models whose values differ from the system's with rank-sum `p < 0.05`.
pub fn fidelity_report(
    system: &[FeatureProfile],
    models: &BTreeMap<String, Vec<FeatureProfile>>,
) -> Result<FidelityReport, DominanceError> {
    if system.is_empty() || models.is_empty() || models.values().any(Vec::is_empty) {
        return Err(DominanceError::NoRepeats);
    }
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for feature in Feature::ALL {
        let sys_vals: Vec<f64> = system.iter().filter_map(|p| finite(p, feature)).collect();
        let mut devs = Vec::new();
        let mut significant = 0;
        for (name, profiles) in models {
            let mine: Vec<f64> = profiles
                .iter()
                .enumerate()
                .filter_map(|(r, p)| Some(finite(p, feature)? - finite(&system[r % system.len()], feature)?))
                .collect();
            let model_vals: Vec<f64> = profiles.iter().filter_map(|p| finite(p, feature)).collect();
            let p_value = if sys_vals.is_empty() || model_vals.is_empty() {
                None
            } else {
                wilcoxon_rank_sum(&model_vals, &sys_vals).ok().map(|t| t.p_value)
            };
            if p_value.is_some_and(|p| p < 0.05) {
                significant += 1;
            }
            records.push(FidelityRecord {
                model: name.clone(),
                feature,
                signed_delta: (!mine.is_empty()).then(|| mean(&mine)),
                p_value,
            });
            devs.extend(mine);
        }
        let side = |keep: fn(f64) -> bool| {
            let v: Vec<f64> = devs.iter().copied().filter(|d| keep(*d)).collect();
            (!v.is_empty()).then(|| mean(&v))
        };
        rows.push(FidelityRow {
            feature,
            plus_delta: side(|d| d >= 0.0),
            minus_delta: side(|d| d <= 0.0),
            ss_pct: 100.0 * significant as f64 / models.len() as f64,
        });
    }
    Ok(FidelityReport { rows, records })
}

fn finite(p: &FeatureProfile, f: Feature) -> Option<f64> {
    p.value(f).filter(|v| v.is_finite())
}
