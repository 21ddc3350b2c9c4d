//! Command-line flags and their resolution against a config file.
//!
//! Every tunable value is looked up in order: the flag, then the key of the
//! same name in the `--config` JSON object, then the built-in default.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};
use tunescape::dataspace::TrainSize;
use tunescape::landscape::{Feature, GlobalFeature, LocalFeature, WalkParams};
use tunescape::ranker::{Pattern, RankParams};
use tunescape::surrogate::{ModelKind, ModelSpec};
use tunescape::tuneharness::{
    Algorithm, SynthKind, SynthParams, BUDGET_PRESETS, FINAL_MEASURE_DEFAULT, HOTSTART_DEFAULT,
};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPEATS: usize = 30;
pub const DEFAULT_BUDGET: usize = 50;
pub const THREADS_ENV: &str = "TUNESCAPE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "tunescape", version, about = "Landscape analysis of surrogate models for configuration tuning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Landscape features of the measured data and of each model's emulated landscape.
    Features(FeaturesArgs),
    /// Dominating/dominated model pairs and their tuned-performance gap.
    Dominate(DominateArgs),
    /// Per-feature deviation of model landscapes from the measured one.
    Fidelity(StudyCommand),
    /// Options whose removal changes the landscape like no other.
    Influence(InfluenceArgs),
    /// Runs one tuner with one model over repeated seeds.
    Tune(TuneArgs),
    /// Measures a system end to end and writes ranking records.
    Records(RecordsArgs),
    /// Trains the model-tuner ranker.
    RankTrain(RankTrainArgs),
    /// Scores and orders records with a trained ranker.
    RankPredict(RankPredictArgs),
    /// Leave-one-system-out evaluation of the ranker.
    RankEval(RankEvalArgs),
    /// Generates a fully enumerated synthetic system.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Machine,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Report destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// JSON object of default flag values, keyed by long flag name.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub meta: PathBuf,
    /// System name; defaults to the data file stem.
    #[arg(long)]
    pub system: Option<String>,
}

impl DataArgs {
    pub fn system_name(&self) -> String {
        self.system.clone().unwrap_or_else(|| {
            self.data
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "system".to_string())
        })
    }
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Models to train (lr, cart, rf, knn); all built-in models by default.
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<ModelKind>,
    /// Training partition: a count, a fraction such as 0.5, or binary-5n.
    #[arg(long)]
    pub train_size: Option<TrainSize>,
    #[arg(long)]
    pub walk_length: Option<usize>,
    #[arg(long)]
    pub walks: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyCommand {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub study: StudyArgs,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub inner: StudyCommand,
    /// Only profile the measured data, without training models.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, conflicts_with = "budget_preset")]
    pub budget: Option<usize>,
    /// Named per-system budget, e.g. Apache or SQLite.
    #[arg(long)]
    pub budget_preset: Option<String>,
    #[arg(long)]
    pub hotstart: Option<usize>,
    #[arg(long)]
    pub final_measure: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DominateArgs {
    #[command(flatten)]
    pub inner: StudyCommand,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub global_feature: Option<GlobalFeature>,
    #[arg(long)]
    pub local_feature: Option<LocalFeature>,
    /// Tuners to run; all six by default.
    #[arg(long, value_delimiter = ',')]
    pub tuners: Vec<Algorithm>,
    /// Restrict the tuners to one pattern.
    #[arg(long)]
    pub pattern: Option<Pattern>,
}

#[derive(Debug, Args)]
pub struct InfluenceArgs {
    #[command(flatten)]
    pub inner: StudyCommand,
    /// Features to analyse; all eight by default.
    #[arg(long, value_delimiter = ',')]
    pub feature: Vec<Feature>,
    /// Report the cluster containing the unablated column instead.
    #[arg(long)]
    pub invert: bool,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub inner: StudyCommand,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub tuner: Algorithm,
    #[arg(long)]
    pub model: ModelKind,
}

#[derive(Debug, Args)]
pub struct RecordsArgs {
    #[command(flatten)]
    pub inner: StudyCommand,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[arg(long)]
    pub pattern: Pattern,
    #[arg(long, requires = "local_feature")]
    pub global_feature: Option<GlobalFeature>,
    #[arg(long, requires = "global_feature")]
    pub local_feature: Option<LocalFeature>,
    #[arg(long, value_delimiter = ',')]
    pub tuners: Vec<Algorithm>,
    /// Write the records as CSV.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankFlags {
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub min_leaf: Option<usize>,
    #[arg(long)]
    pub subsample: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RankTrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub records: PathBuf,
    /// Keep only records of this pattern.
    #[arg(long)]
    pub pattern: Option<Pattern>,
    #[command(flatten)]
    pub rank: RankFlags,
    /// Write the trained model as JSON.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankPredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Write the orderings as CSV.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankEvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub pattern: Option<Pattern>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[command(flatten)]
    pub rank: RankFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub kind: SynthKind,
    #[arg(long)]
    pub options: usize,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Epistasis of rugged systems.
    #[arg(long)]
    pub k: Option<usize>,
    /// Basin radius of deceptive systems.
    #[arg(long)]
    pub basin: Option<usize>,
    #[arg(long)]
    pub offset: Option<f64>,
    #[arg(long)]
    pub data_out: Option<PathBuf>,
    #[arg(long, requires = "data_out")]
    pub meta_out: Option<PathBuf>,
}

/// Values from the `--config` file.
#[derive(Debug, Default)]
pub struct Config(Map<String, Value>);

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text) {
            Ok(Value::Object(map)) => Ok(Self(map)),
            Ok(_) => Err(CliError::input(format!("{}: expected a JSON object", path.display()))),
            Err(e) => Err(CliError::input(format!("{}: {e}", path.display()))),
        }
    }

    fn raw(&self, key: &str) -> Option<String> {
        self.0.get(key).map(|v| match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        })
    }

    /// Flag value, else the config entry parsed like the flag would be.
    pub fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::input(format!("config key '{key}': {e}")))
            })
            .transpose()
    }

    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// List flag, else a config array or comma-separated string.
    pub fn list<T: FromStr>(&self, flag: Vec<T>, key: &str) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        if !flag.is_empty() {
            return Ok(flag);
        }
        let items: Vec<String> = match self.0.get(key) {
            None => return Ok(Vec::new()),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()))
                .collect(),
            Some(Value::String(s)) => s.split(',').map(str::to_string).collect(),
            Some(other) => vec![other.to_string()],
        };
        items
            .iter()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::input(format!("config key '{key}': {e}")))
            })
            .collect()
    }

    pub fn seed(&self, common: &Common) -> CliResult<u64> {
        self.get(common.seed, "seed", DEFAULT_SEED)
    }
}

/// Resolved settings of the split/train/profile protocol.
#[derive(Debug, Clone, Serialize)]
pub struct Study {
    pub repeats: usize,
    pub models: Vec<ModelKind>,
    pub train_size: TrainSize,
    pub walk: WalkParams,
}

impl Study {
    pub fn resolve(args: &StudyArgs, cfg: &Config, default_repeats: usize) -> CliResult<Self> {
        let repeats = cfg.get(args.repeats, "repeats", default_repeats)?;
        if repeats == 0 {
            return Err(CliError::input("repeats must be at least 1"));
        }
        let mut models = cfg.list(args.models.clone(), "models")?;
        if models.is_empty() {
            models = ModelKind::BUILT_IN.to_vec();
        }
        if models.contains(&ModelKind::External) {
            return Err(CliError::input("external models cannot be trained"));
        }
        let mut seen = Vec::new();
        models.retain(|m| {
            let new = !seen.contains(m);
            seen.push(*m);
            new
        });
        let walk = WalkParams {
            length: cfg.get(args.walk_length, "walk-length", WalkParams::DEFAULT_LENGTH)?,
            walks: cfg.get(args.walks, "walks", WalkParams::DEFAULT_WALKS)?,
        };
        Ok(Self {
            repeats,
            models,
            train_size: cfg.get(args.train_size, "train-size", TrainSize::Binary5n)?,
            walk,
        })
    }

    pub fn specs(&self) -> Vec<ModelSpec> {
        self.models.iter().map(|k| ModelSpec::new(*k)).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Budget {
    pub budget: usize,
    pub preset: Option<&'static str>,
    pub hotstart: usize,
    pub final_measure: usize,
}

impl Budget {
    pub fn resolve(args: &BudgetArgs, cfg: &Config) -> CliResult<Self> {
        let preset = |name: &str| {
            BUDGET_PRESETS
                .iter()
                .find(|(n, _)| n.eq_ignore_ascii_case(name.trim()))
                .map(|(n, b)| (*b, Some(*n)))
                .ok_or_else(|| CliError::input(format!("unknown budget preset '{name}'")))
        };
        let (budget, preset) = match (args.budget, &args.budget_preset) {
            (Some(b), _) => (b, None),
            (None, Some(name)) => preset(name)?,
            (None, None) => match (cfg.opt::<usize>(None, "budget")?, cfg.opt::<String>(None, "budget-preset")?) {
                (Some(b), _) => (b, None),
                (None, Some(name)) => preset(&name)?,
                (None, None) => (DEFAULT_BUDGET, None),
            },
        };
        Ok(Self {
            budget,
            preset,
            hotstart: cfg.get(args.hotstart, "hotstart", HOTSTART_DEFAULT)?,
            final_measure: cfg.get(args.final_measure, "final-measure", FINAL_MEASURE_DEFAULT)?,
        })
    }
}

pub fn rank_params(flags: &RankFlags, cfg: &Config) -> CliResult<RankParams> {
    let d = RankParams::default();
    Ok(RankParams {
        rounds: cfg.get(flags.rounds, "rounds", d.rounds)?,
        max_depth: cfg.get(flags.max_depth, "max-depth", d.max_depth)?,
        learning_rate: cfg.get(flags.learning_rate, "learning-rate", d.learning_rate)?,
        min_leaf: cfg.get(flags.min_leaf, "min-leaf", d.min_leaf)?,
        subsample: cfg.get(flags.subsample, "subsample", d.subsample)?,
    })
}

pub fn synth_params(args: &SynthArgs, cfg: &Config) -> CliResult<SynthParams> {
    let d = SynthParams::default();
    Ok(SynthParams {
        noise: cfg.get(args.noise, "noise", d.noise)?,
        k: cfg.get(args.k, "k", d.k)?,
        basin: cfg.get(args.basin, "basin", d.basin)?,
        offset: cfg.get(args.offset, "offset", d.offset)?,
    })
}

/// Thread count from the environment, if set.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::input(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_config_beats_default() {
        let cfg = Config(serde_json::from_str(r#"{"repeats": 7, "models": ["lr", "rf"], "train-size": "0.5"}"#).unwrap());
        assert_eq!(cfg.get(Some(3usize), "repeats", 30).unwrap(), 3);
        assert_eq!(cfg.get(None::<usize>, "repeats", 30).unwrap(), 7);
        assert_eq!(cfg.get(None::<usize>, "walks", 30).unwrap(), 30);
        let models: Vec<ModelKind> = cfg.list(Vec::new(), "models").unwrap();
        assert_eq!(models, vec![ModelKind::LinearRegression, ModelKind::RandomForest]);
        assert_eq!(
            cfg.get(None, "train-size", TrainSize::Binary5n).unwrap(),
            TrainSize::Fraction(0.5)
        );
    }

    #[test]
    fn bad_config_value_is_an_input_error() {
        let cfg = Config(serde_json::from_str(r#"{"repeats": "many"}"#).unwrap());
        let err = cfg.get(None::<usize>, "repeats", 30).unwrap_err();
        assert_eq!(err.status, crate::error::Status::Input);
    }

    #[test]
    fn budget_preset_lookup() {
        let args = BudgetArgs {
            budget: None,
            budget_preset: Some("sqlite".into()),
            hotstart: None,
            final_measure: None,
        };
        let b = Budget::resolve(&args, &Config::default()).unwrap();
        assert_eq!((b.budget, b.preset), (206, Some("SQLite")));
        assert_eq!(b.hotstart, 20);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
