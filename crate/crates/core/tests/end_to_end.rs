use std::collections::BTreeMap;

use tunescape::dataspace::{load_dataset, split_train_test, write_dataset, write_metadata, Configuration, TrainSize};
use tunescape::dominance::{delta_p, dg_dd_pairs, fidelity_report};
use tunescape::landscape::{
    build_view, feature_profile, Feature, FeatureProfile, GlobalFeature, LocalFeature, ViewSource, WalkParams,
};
use tunescape::metrics::accuracy;
use tunescape::ranker::{
    assemble_records, load_rank_model, predict, read_records, save_rank_model, train, write_records, Pattern,
    RankParams, SystemRuns,
};
use tunescape::rng::derive_seed;
use tunescape::surrogate::{self, emulated_view, ModelKind, ModelSpec};
use tunescape::tuneharness::{rank_pairs, run_sequential, synth_system, Algorithm, SynthKind, SynthParams, TunerSpec};

struct Measured {
    system: FeatureProfile,
    models: BTreeMap<String, (FeatureProfile, tunescape::metrics::AccuracyReport)>,
    ranks: BTreeMap<(String, String), f64>,
    tuners: Vec<TunerSpec>,
}

fn measure(kind: SynthKind, seed: u64) -> Measured {
    let params = SynthParams {
        noise: 0.3,
        ..SynthParams::default()
    };
    let ds = synth_system(kind, 7, seed, params).unwrap().dataset;
    let (train_set, test) = split_train_test(&ds, TrainSize::Binary5n, seed).unwrap();
    let points: Vec<Configuration> = test.configurations().cloned().collect();
    let actual: Vec<f64> = test.rows().iter().map(|r| r.1).collect();
    let walk = WalkParams::default();
    let system = feature_profile(&build_view(&ds, &points, ViewSource::Exact).unwrap(), walk, seed).unwrap();
    let specs: Vec<ModelSpec> = ModelKind::BUILT_IN.iter().map(|k| ModelSpec::new(*k)).collect();
    let mut models = BTreeMap::new();
    for spec in &specs {
        let fitted = surrogate::train(*spec, &train_set, derive_seed(seed, 1)).unwrap();
        let view = emulated_view(&fitted, &points, ds.space().direction).unwrap();
        let predicted = surrogate::predict(&fitted, &points).unwrap().values();
        models.insert(
            spec.kind.short().to_string(),
            (feature_profile(&view, walk, seed).unwrap(), accuracy(&actual, &predicted).unwrap()),
        );
    }
    let tuners: Vec<TunerSpec> = [Algorithm::BoEi, Algorithm::BoMaxMean, Algorithm::FlashLike]
        .into_iter()
        .map(TunerSpec::new)
        .collect();
    let mut results = BTreeMap::new();
    for spec in &specs {
        for t in &tuners {
            let runs = (0..2)
                .map(|r| run_sequential(t, *spec, &ds, 24, 20, derive_seed(seed, 10 + r)).unwrap())
                .collect();
            results.insert((spec.kind.short().to_string(), t.id.clone()), runs);
        }
    }
    Measured {
        system,
        models,
        ranks: rank_pairs(&results).unwrap(),
        tuners,
    }
}

#[test]
fn dataset_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synth_system(SynthKind::Deceptive, 5, 3, SynthParams::default()).unwrap().dataset;
    let data = dir.path().join("d.csv");
    let meta = dir.path().join("d.meta.json");
    write_dataset(&ds, &data).unwrap();
    write_metadata(&ds, &meta).unwrap();
    let back = load_dataset(&data, &meta).unwrap();
    assert_eq!(back.rows(), ds.rows());
    assert_eq!(back.space().len(), 5);
}

#[test]
fn measurements_to_ranker() {
    let dir = tempfile::tempdir().unwrap();
    let mut records = Vec::new();
    let kinds = [SynthKind::Unimodal, SynthKind::Rugged, SynthKind::Deceptive];
    for (i, kind) in kinds.iter().enumerate() {
        let m = measure(*kind, 40 + i as u64);
        let runs = SystemRuns {
            system: format!("s{i}"),
            system_profile: m.system.clone(),
            models: m.models.clone(),
            tuners: m.tuners.iter().map(|t| (t.id.clone(), t.characteristics)).collect(),
            ranks: m.ranks.clone(),
        };
        let recs = assemble_records(&runs, Pattern::Sequential, Some((GlobalFeature::Fdc, LocalFeature::Plo))).unwrap();
        assert_eq!(recs.len(), 12);

        // dominance over the same measurements
        let profiles: BTreeMap<String, FeatureProfile> = m.models.iter().map(|(k, v)| (k.clone(), v.0.clone())).collect();
        let ids: Vec<String> = m.tuners.iter().map(|t| t.id.clone()).collect();
        let pairs = dg_dd_pairs(&profiles, &m.system, &ids, &[(GlobalFeature::Fdc, LocalFeature::Plo)]);
        let dp = delta_p(&pairs, &m.ranks).unwrap();
        assert_eq!(dp.n, pairs.len());

        let per_model: BTreeMap<String, Vec<FeatureProfile>> =
            m.models.iter().map(|(k, v)| (k.clone(), vec![v.0.clone()])).collect();
        let fid = fidelity_report(&[m.system.clone()], &per_model).unwrap();
        assert_eq!(fid.rows.len(), Feature::ALL.len());
        records.extend(recs);
    }

    let path = dir.path().join("records.csv");
    write_records(&records, &path).unwrap();
    let back = read_records(&path).unwrap();
    assert_eq!(back, records);

    let params = RankParams {
        rounds: 10,
        ..RankParams::default()
    };
    let model = train(&back, params, 5).unwrap();
    let model_path = dir.path().join("ranker.json");
    save_rank_model(&model, &model_path).unwrap();
    let loaded = load_rank_model(&model_path).unwrap();
    assert_eq!(predict(&loaded, &back).unwrap(), predict(&model, &back).unwrap());
}
