use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tunescape::dataspace::{load_dataset, write_dataset, write_metadata, PerformanceDataset};
use tunescape::dominance::{all_objectives, delta_p, dg_dd_pairs, fidelity_report, Objective};
use tunescape::influence::{build_matrices, influential_options, MatrixParams};
use tunescape::landscape::{feature_profile, Feature, FeatureProfile, GlobalFeature, LandscapeView, LocalFeature, ViewSource};
use tunescape::metrics::AccuracyReport;
use tunescape::ranker::{
    assemble_records, load_rank_model, loo_evaluate, predict, read_records, save_rank_model, train, write_records,
    Pattern, RankingRecord, SystemRuns,
};
use tunescape::report::{fmt_value, input, InputFile, Manifest, Table};
use tunescape::rng::derive_seed;
use tunescape::surrogate::ModelSpec;
use tunescape::tuneharness::{rank_pairs, synth_system, Algorithm, TunerSpec, TuningResult};

use crate::args::{
    rank_params, synth_params, Budget, Config, DataArgs, DominateArgs, FeaturesArgs, InfluenceArgs, RankEvalArgs,
    RankPredictArgs, RankTrainArgs, RecordsArgs, Study, StudyCommand, SynthArgs, TuneArgs, DEFAULT_REPEATS,
};
use crate::error::{CliError, CliResult};
use crate::pipeline::{mean_best, model_means, repeat_seed, run_repeats, system_mean, tune_one, tune_pairs};

/// Seed stream of the exact full-data profile.
const EXACT_STREAM: u64 = u64::MAX;
/// Seed stream of the influence clustering.
const CLUSTER_STREAM: u64 = u64::MAX - 1;

/// What a command hands back for rendering.
pub struct Outcome {
    pub command: &'static str,
    pub manifest: Manifest,
    pub result: Value,
    pub table: String,
    /// Set when the analysis completed but carries no usable signal.
    pub degenerate: Option<String>,
}

fn file_input(role: &str, path: &Path) -> CliResult<InputFile> {
    input(role, path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load(data: &DataArgs) -> CliResult<(PerformanceDataset, Vec<InputFile>)> {
    let ds = load_dataset(&data.data, &data.meta)?;
    Ok((ds, vec![file_input("data", &data.data)?, file_input("meta", &data.meta)?]))
}

fn to_value<T: Serialize>(v: &T) -> CliResult<Value> {
    Ok(serde_json::to_value(v)?)
}

fn profile_cells(p: Option<&FeatureProfile>) -> Vec<String> {
    Feature::ALL.iter().map(|f| fmt_value(p.and_then(|p| p.value(*f)))).collect()
}

/// Features as rows, one column per profile.
fn profile_table(columns: &[(String, Option<&FeatureProfile>)]) -> String {
    let mut t = Table::new(std::iter::once("feature".to_string()).chain(columns.iter().map(|(n, _)| n.clone())));
    let cells: Vec<Vec<String>> = columns.iter().map(|(_, p)| profile_cells(*p)).collect();
    for (i, f) in Feature::ALL.iter().enumerate() {
        t.row(std::iter::once(f.name().to_string()).chain(cells.iter().map(|c| c[i].clone())));
    }
    t.render()
}

fn tuner_specs(cfg: &Config, flag: Vec<Algorithm>, pattern: Option<Pattern>) -> CliResult<Vec<TunerSpec>> {
    let mut algs = cfg.list(flag, "tuners")?;
    if algs.is_empty() {
        algs = Algorithm::ALL.to_vec();
    }
    algs.dedup();
    let specs: Vec<TunerSpec> = algs
        .into_iter()
        .filter(|a| pattern.is_none_or(|p| a.pattern() == p))
        .map(TunerSpec::new)
        .collect();
    if specs.is_empty() {
        return Err(CliError::input("no tuner matches the requested pattern"));
    }
    Ok(specs)
}

struct StudySetup {
    cfg: Config,
    seed: u64,
    study: Study,
    dataset: PerformanceDataset,
    inputs: Vec<InputFile>,
    system: String,
}

fn setup(c: &StudyCommand, default_repeats: usize) -> CliResult<StudySetup> {
    let cfg = Config::load(c.common.config.as_deref())?;
    let seed = cfg.seed(&c.common)?;
    let study = Study::resolve(&c.study, &cfg, default_repeats)?;
    let (dataset, inputs) = load(&c.data)?;
    Ok(StudySetup {
        cfg,
        seed,
        study,
        dataset,
        inputs,
        system: c.data.system_name(),
    })
}

pub fn features(a: &FeaturesArgs) -> CliResult<Outcome> {
    let s = setup(&a.inner, DEFAULT_REPEATS)?;
    let view = LandscapeView::from_dataset(&s.dataset, ViewSource::Exact)?;
    let exact = feature_profile(&view, s.study.walk, derive_seed(s.seed, EXACT_STREAM))?;
    let params = json!({ "system": s.system, "exact_only": a.exact, "study": s.study });
    let manifest = Manifest {
        inputs: s.inputs,
        seed: Some(s.seed),
        params,
    };
    if a.exact {
        return Ok(Outcome {
            command: "features",
            table: profile_table(&[("exact".into(), Some(&exact))]),
            result: json!({ "system": s.system, "exact": exact }),
            manifest,
            degenerate: None,
        });
    }
    let runs = run_repeats(&s.dataset, &s.study, s.seed)?;
    let measured = system_mean(&runs);
    let models = model_means(&runs);
    let mut columns = vec![("exact".to_string(), Some(&exact)), ("measured".to_string(), Some(&measured))];
    columns.extend(models.iter().map(|(m, sum)| (m.clone(), sum.profile.as_ref())));
    let mut table = profile_table(&columns);
    let mut acc = Table::new(["model", "MAPE", "μRD", "profiled repeats"]);
    for (m, sum) in &models {
        acc.row([
            m.clone(),
            fmt_value(Some(sum.mape)),
            fmt_value(Some(sum.murd)),
            format!("{}/{}", sum.profiled_repeats, runs.len()),
        ]);
    }
    table.push('\n');
    table.push_str(&acc.render());
    let repeats: Vec<Value> = runs
        .iter()
        .map(|r| {
            let models: BTreeMap<&str, Value> = r
                .models
                .iter()
                .map(|m| (m.label.as_str(), json!({ "profile": m.profile, "accuracy": m.accuracy })))
                .collect();
            json!({ "seed": r.seed, "measured": r.system, "models": models })
        })
        .collect();
    Ok(Outcome {
        command: "features",
        manifest,
        result: json!({
            "system": s.system,
            "exact": exact,
            "measured": measured,
            "models": models,
            "repeats": repeats,
        }),
        table,
        degenerate: None,
    })
}

fn objectives(g: Option<GlobalFeature>, l: Option<LocalFeature>) -> Vec<Objective> {
    all_objectives()
        .into_iter()
        .filter(|(og, ol)| g.is_none_or(|g| g == *og) && l.is_none_or(|l| l == *ol))
        .collect()
}

#[derive(Serialize)]
struct PairTuning {
    model: String,
    tuner: String,
    mean_best: f64,
    bests: Vec<f64>,
}

fn tuning_summary(results: &BTreeMap<(String, String), Vec<TuningResult>>) -> Vec<PairTuning> {
    results
        .iter()
        .map(|((m, t), rs)| {
            let bests: Vec<f64> = rs.iter().map(|r| r.best_measured).collect();
            PairTuning {
                model: m.clone(),
                tuner: t.clone(),
                mean_best: bests.iter().sum::<f64>() / bests.len() as f64,
                bests,
            }
        })
        .collect()
}

pub fn dominate(a: &DominateArgs) -> CliResult<Outcome> {
    let s = setup(&a.inner, DEFAULT_REPEATS)?;
    let budget = Budget::resolve(&a.budget, &s.cfg)?;
    let g = s.cfg.opt(a.global_feature, "global-feature")?;
    let l = s.cfg.opt(a.local_feature, "local-feature")?;
    let pattern = s.cfg.opt(a.pattern, "pattern")?;
    let tuners = tuner_specs(&s.cfg, a.tuners.clone(), pattern)?;
    let objs = objectives(g, l);

    let runs = run_repeats(&s.dataset, &s.study, s.seed)?;
    let system = system_mean(&runs);
    let profiles: BTreeMap<String, FeatureProfile> = model_means(&runs)
        .into_iter()
        .filter_map(|(m, sum)| sum.profile.map(|p| (m, p)))
        .collect();
    let results = tune_pairs(&s.dataset, &runs, &s.study.specs(), &tuners, &budget)?;
    let best = mean_best(&results);
    let tuner_ids: Vec<String> = tuners.iter().map(|t| t.id.clone()).collect();
    let pairs = dg_dd_pairs(&profiles, &system, &tuner_ids, &objs);
    let dp = delta_p(&pairs, &best)?;

    let mut t = Table::new(["DG", "DD", "tuner", "objective", "p(DG)", "p(DD)"]);
    let rows: Vec<Value> = pairs
        .iter()
        .map(|p| {
            let pg = best[&(p.dominating.clone(), p.tuner.clone())];
            let pd = best[&(p.dominated.clone(), p.tuner.clone())];
            t.row([
                p.dominating.clone(),
                p.dominated.clone(),
                p.tuner.clone(),
                format!("{}/{}", p.objective.0, p.objective.1),
                fmt_value(Some(pg)),
                fmt_value(Some(pd)),
            ]);
            json!({
                "dominating": p.dominating,
                "dominated": p.dominated,
                "tuner": p.tuner,
                "global_feature": p.objective.0,
                "local_feature": p.objective.1,
                "p_dg": pg,
                "p_dd": pd,
            })
        })
        .collect();
    let mut table = t.render();
    table.push_str(&format!(
        "\npairs {}  Δp {}  DG win {:.1}%  lose {:.1}%  tie {:.1}%  p {}{}\n",
        dp.n,
        fmt_value(dp.delta_p),
        dp.dg_win_pct,
        dp.dg_lose_pct,
        dp.tie_pct,
        fmt_value(dp.p_value),
        if dp.small_sample { "  (small sample)" } else { "" },
    ));
    Ok(Outcome {
        command: "dominate",
        manifest: Manifest {
            inputs: s.inputs,
            seed: Some(s.seed),
            params: json!({
                "system": s.system,
                "study": s.study,
                "budget": budget,
                "tuners": tuner_ids,
                "objectives": objs,
            }),
        },
        result: json!({
            "system": s.system,
            "measured": system,
            "models": profiles,
            "tuning": tuning_summary(&results),
            "pairs": rows,
            "delta_p": dp,
        }),
        table,
        degenerate: None,
    })
}

pub fn fidelity(c: &StudyCommand) -> CliResult<Outcome> {
    let s = setup(c, DEFAULT_REPEATS)?;
    let runs = run_repeats(&s.dataset, &s.study, s.seed)?;
    let system: Vec<FeatureProfile> = runs.iter().map(|r| r.system.clone()).collect();
    let mut models: BTreeMap<String, Vec<FeatureProfile>> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (i, m) in runs[0].models.iter().enumerate() {
        match runs.iter().map(|r| r.models[i].profile.clone()).collect::<Option<Vec<_>>>() {
            Some(ps) => {
                models.insert(m.label.clone(), ps);
            }
            None => skipped.push(m.label.clone()),
        }
    }
    let report = fidelity_report(&system, &models)?;
    let mut t = Table::new(["feature", "+Δ", "−Δ", "SS%"]);
    for r in &report.rows {
        t.row([
            r.feature.name().to_string(),
            fmt_value(r.plus_delta),
            fmt_value(r.minus_delta),
            format!("{:.1}", r.ss_pct),
        ]);
    }
    Ok(Outcome {
        command: "fidelity",
        manifest: Manifest {
            inputs: s.inputs,
            seed: Some(s.seed),
            params: json!({ "system": s.system, "study": s.study }),
        },
        result: json!({ "system": s.system, "report": report, "skipped_models": skipped }),
        table: t.render(),
        degenerate: None,
    })
}

pub fn influence(a: &InfluenceArgs) -> CliResult<Outcome> {
    let s = setup(&a.inner, MatrixParams::DEFAULT_REPEATS)?;
    let mut features = s.cfg.list(a.feature.clone(), "feature")?;
    if features.is_empty() {
        features = Feature::ALL.to_vec();
    }
    let invert = a.invert || s.cfg.opt(None::<bool>, "invert")?.unwrap_or(false);
    let params = MatrixParams {
        split: s.study.train_size,
        walk: s.study.walk,
        seed: s.seed,
        repeats: s.study.repeats,
    };
    let matrices = build_matrices(&s.dataset, &s.study.specs(), &features, params)?;
    let mut t = Table::new(["feature", "influential options", "note"]);
    let mut out = Vec::new();
    let mut degenerate = 0;
    for (f, m) in &matrices {
        let r = influential_options(m, derive_seed(s.seed, CLUSTER_STREAM), invert)?;
        if r.degenerate {
            degenerate += 1;
        }
        t.row([
            f.name().to_string(),
            if r.influential.is_empty() { "-".to_string() } else { r.influential.join(", ") },
            if r.degenerate { "degenerate".to_string() } else { String::new() },
        ]);
        out.push(json!({ "feature": f, "matrix": m, "influence": r }));
    }
    Ok(Outcome {
        command: "influence",
        manifest: Manifest {
            inputs: s.inputs,
            seed: Some(s.seed),
            params: json!({ "system": s.system, "study": s.study, "features": features, "invert": invert }),
        },
        result: json!({ "system": s.system, "features": out }),
        table: t.render(),
        degenerate: (degenerate == matrices.len()).then(|| "every feature matrix clustered degenerately".to_string()),
    })
}

pub fn tune(a: &TuneArgs) -> CliResult<Outcome> {
    let s = setup(&a.inner, DEFAULT_REPEATS)?;
    let budget = Budget::resolve(&a.budget, &s.cfg)?;
    let tuner = TunerSpec::new(a.tuner);
    let spec = ModelSpec::new(a.model);
    let results = (0..s.study.repeats)
        .into_par_iter()
        .map(|r| tune_one(&s.dataset, spec, &tuner, &s.study, &budget, repeat_seed(s.seed, r)))
        .collect::<CliResult<Vec<TuningResult>>>()?;
    let mut t = Table::new(["repeat", "best", "measurements", "model evaluations", "low signal"]);
    for (i, r) in results.iter().enumerate() {
        t.row([
            i.to_string(),
            fmt_value(Some(r.best_measured)),
            r.measurements.to_string(),
            r.model_evaluations.to_string(),
            r.low_signal.to_string(),
        ]);
    }
    let mean = results.iter().map(|r| r.best_measured).sum::<f64>() / results.len() as f64;
    let mut table = t.render();
    table.push_str(&format!("\nmean best {}\n", fmt_value(Some(mean))));
    let low_signal = results.iter().all(|r| r.low_signal);
    Ok(Outcome {
        command: "tune",
        manifest: Manifest {
            inputs: s.inputs,
            seed: Some(s.seed),
            params: json!({
                "system": s.system,
                "tuner": tuner,
                "model": spec,
                "budget": budget,
                "repeats": s.study.repeats,
                "train_size": s.study.train_size,
            }),
        },
        result: json!({ "system": s.system, "mean_best": mean, "runs": results }),
        table,
        degenerate: low_signal.then(|| "every surrogate score was identical in every run".to_string()),
    })
}

pub fn records(a: &RecordsArgs) -> CliResult<Outcome> {
    let s = setup(&a.inner, DEFAULT_REPEATS)?;
    let budget = Budget::resolve(&a.budget, &s.cfg)?;
    let pattern = a.pattern;
    let features = match (s.cfg.opt(a.global_feature, "global-feature")?, s.cfg.opt(a.local_feature, "local-feature")?) {
        (Some(g), Some(l)) => Some((g, l)),
        (None, None) => None,
        _ => return Err(CliError::input("give both a global and a local feature, or neither")),
    };
    let tuners = tuner_specs(&s.cfg, a.tuners.clone(), None)?;
    if !tuners.iter().any(|t| t.pattern == pattern) {
        return Err(CliError::input(format!("no {pattern} tuner selected")));
    }
    let runs = run_repeats(&s.dataset, &s.study, s.seed)?;
    let results = tune_pairs(&s.dataset, &runs, &s.study.specs(), &tuners, &budget)?;
    let ranks = rank_pairs(&results)?;
    let models: BTreeMap<String, (FeatureProfile, AccuracyReport)> = model_means(&runs)
        .into_iter()
        .filter_map(|(m, sum)| {
            let acc = AccuracyReport {
                mape: sum.mape,
                murd: sum.murd,
                n_test: sum.n_test,
            };
            sum.profile.map(|p| (m, (p, acc)))
        })
        .collect();
    let system_runs = SystemRuns {
        system: s.system.clone(),
        system_profile: system_mean(&runs),
        models,
        tuners: tuners.iter().map(|t| (t.id.clone(), t.characteristics)).collect(),
        ranks: ranks.clone(),
    };
    let recs = assemble_records(&system_runs, pattern, features)?;
    if let Some(path) = &a.save {
        write_records(&recs, path)?;
    }
    let mut t = Table::new(["model", "tuner", "y", "global Δ", "local Δ", "MAPE", "μRD"]);
    for r in &recs {
        t.row([
            r.model.clone(),
            r.tuner.clone(),
            fmt_value(r.y),
            fmt_value(Some(r.f_l[0])),
            fmt_value(Some(r.f_l[1])),
            fmt_value(Some(r.f_a[0])),
            fmt_value(Some(r.f_a[1])),
        ]);
    }
    let rank_rows: Vec<Value> = ranks
        .iter()
        .map(|((m, tn), y)| json!({ "model": m, "tuner": tn, "rank": y }))
        .collect();
    Ok(Outcome {
        command: "records",
        manifest: Manifest {
            inputs: s.inputs,
            seed: Some(s.seed),
            params: json!({
                "system": s.system,
                "pattern": pattern,
                "features": features,
                "study": s.study,
                "budget": budget,
                "tuners": tuners.iter().map(|t| t.id.clone()).collect::<Vec<_>>(),
                "save": a.save,
            }),
        },
        result: json!({
            "system": s.system,
            "ranks": rank_rows,
            "tuning": tuning_summary(&results),
            "records": recs,
        }),
        table: t.render(),
        degenerate: None,
    })
}

fn load_records(path: &Path, pattern: Option<Pattern>) -> CliResult<(Vec<RankingRecord>, InputFile)> {
    let mut recs = read_records(path)?;
    if let Some(p) = pattern {
        recs.retain(|r| r.pattern() == p);
    }
    if recs.is_empty() {
        return Err(CliError::input(format!("{}: no records to use", path.display())));
    }
    Ok((recs, file_input("records", path)?))
}

fn systems_of(recs: &[RankingRecord]) -> Vec<String> {
    let mut v: Vec<String> = recs.iter().map(|r| r.system.clone()).collect();
    v.sort();
    v.dedup();
    v
}

pub fn rank_train(a: &RankTrainArgs) -> CliResult<Outcome> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let seed = cfg.seed(&a.common)?;
    let params = rank_params(&a.rank, &cfg)?;
    let pattern = cfg.opt(a.pattern, "pattern")?;
    let (recs, records_input) = load_records(&a.records, pattern)?;
    let model = train(&recs, params, seed)?;
    if let Some(path) = &a.save {
        save_rank_model(&model, path)?;
    }
    let mut t = Table::new(["round", "mean |λ|"]);
    for (i, l) in model.loss_history.iter().enumerate() {
        t.row([(i + 1).to_string(), fmt_value(Some(*l))]);
    }
    Ok(Outcome {
        command: "rank-train",
        manifest: Manifest {
            inputs: vec![records_input],
            seed: Some(seed),
            params: json!({ "pattern": pattern, "params": params, "save": a.save }),
        },
        result: json!({
            "pattern": model.pattern,
            "records": recs.len(),
            "systems": systems_of(&recs),
            "layout": model.layout,
            "trees": model.ensemble.len(),
            "loss_history": model.loss_history,
        }),
        table: t.render(),
        degenerate: None,
    })
}

#[derive(Serialize)]
struct Ranked {
    position: usize,
    model: String,
    tuner: String,
    score: f64,
    y: Option<f64>,
}

pub fn rank_predict(a: &RankPredictArgs) -> CliResult<Outcome> {
    Config::load(a.common.config.as_deref())?;
    let model = load_rank_model(&a.model)?;
    let (recs, records_input) = load_records(&a.records, Some(model.pattern))?;
    let model_input = file_input("ranker", &a.model)?;
    let scores = predict(&model, &recs)?;
    let mut by_system: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in recs.iter().enumerate() {
        by_system.entry(&r.system).or_default().push(i);
    }
    let mut t = Table::new(["system", "position", "model", "tuner", "score"]);
    let mut csv_rows = Vec::new();
    let mut systems = Vec::new();
    for (system, mut idx) in by_system {
        idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
        let ordering: Vec<Ranked> = idx
            .iter()
            .enumerate()
            .map(|(pos, &i)| Ranked {
                position: pos + 1,
                model: recs[i].model.clone(),
                tuner: recs[i].tuner.clone(),
                score: scores[i],
                y: recs[i].y,
            })
            .collect();
        for o in &ordering {
            t.row([
                system.to_string(),
                o.position.to_string(),
                o.model.clone(),
                o.tuner.clone(),
                fmt_value(Some(o.score)),
            ]);
            csv_rows.push((system.to_string(), o.position, o.model.clone(), o.tuner.clone(), o.score));
        }
        systems.push(json!({ "system": system, "ordering": ordering }));
    }
    if let Some(path) = &a.save {
        write_ordering(path, &csv_rows)?;
    }
    Ok(Outcome {
        command: "rank-predict",
        manifest: Manifest {
            inputs: vec![records_input, model_input],
            seed: None,
            params: json!({ "pattern": model.pattern, "save": a.save }),
        },
        result: json!({ "pattern": model.pattern, "systems": systems }),
        table: t.render(),
        degenerate: None,
    })
}

fn write_ordering(path: &Path, rows: &[(String, usize, String, String, f64)]) -> CliResult<()> {
    let err = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["system", "position", "model", "tuner", "score"]).map_err(err)?;
    for (s, pos, m, t, score) in rows {
        w.write_record([s.clone(), pos.to_string(), m.clone(), t.clone(), score.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn rank_eval(a: &RankEvalArgs) -> CliResult<Outcome> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let seed = cfg.seed(&a.common)?;
    let params = rank_params(&a.rank, &cfg)?;
    let pattern = cfg.opt(a.pattern, "pattern")?;
    let repeats = cfg.get(a.repeats, "repeats", DEFAULT_REPEATS)?;
    if repeats == 0 {
        return Err(CliError::input("repeats must be at least 1"));
    }
    let (recs, records_input) = load_records(&a.records, pattern)?;
    let report = loo_evaluate(&recs, params, repeats, seed)?;
    let mut t = Table::new(["system", "metric", "k", "model", "random", "improvement %", "p", ""]);
    let folds = report.folds.iter().map(|f| (f.system.as_str(), &f.rows));
    for (system, rows) in folds.chain(std::iter::once(("average", &report.average))) {
        for r in rows {
            t.row([
                system.to_string(),
                r.metric.to_string(),
                r.k.clone(),
                fmt_value(Some(r.model_mean)),
                fmt_value(Some(r.random_mean)),
                format!("{:.1}", r.improvement_pct),
                fmt_value(r.p_value),
                r.marker.clone(),
            ]);
        }
    }
    Ok(Outcome {
        command: "rank-eval",
        manifest: Manifest {
            inputs: vec![records_input],
            seed: Some(seed),
            params: json!({ "pattern": pattern, "params": params, "repeats": repeats }),
        },
        result: to_value(&report)?,
        table: t.render(),
        degenerate: None,
    })
}

pub fn synth(a: &SynthArgs) -> CliResult<Outcome> {
    let cfg = Config::load(a.common.config.as_deref())?;
    let seed = cfg.seed(&a.common)?;
    let params = synth_params(a, &cfg)?;
    let sys = synth_system(a.kind, a.options, seed, params)?;
    if let Some(path) = &a.data_out {
        write_dataset(&sys.dataset, path)?;
        let meta = a.meta_out.clone().unwrap_or_else(|| path.with_extension("meta.json"));
        write_metadata(&sys.dataset, &meta)?;
    }
    let best = sys.dataset.performance(&sys.optimum);
    let mut t = Table::new(["kind", "options", "rows", "optimum", "optimum value"]);
    t.row([
        sys.kind.to_string(),
        a.options.to_string(),
        sys.dataset.len().to_string(),
        sys.optimum.to_string(),
        fmt_value(best),
    ]);
    Ok(Outcome {
        command: "synth",
        manifest: Manifest {
            inputs: Vec::new(),
            seed: Some(seed),
            params: json!({
                "kind": a.kind,
                "options": a.options,
                "params": params,
                "data_out": a.data_out,
                "meta_out": a.meta_out,
            }),
        },
        result: json!({
            "kind": sys.kind,
            "optimum": sys.optimum,
            "optimum_value": best,
            "rows": sys.dataset.rows(),
        }),
        table: t.render(),
        degenerate: None,
    })
}
