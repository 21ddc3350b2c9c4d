//! Configuration spaces, measured datasets and their file formats.
//!
//! A dataset is a pair of files:
//!
//! * a comma-separated data file whose header names every option plus one
//!   performance column, with one row per measured configuration;
//! * a JSON metadata document declaring each option's kind and admissible
//!   values, the performance column name and the objective direction.
//!
//! ```json
//! {
//!   "options": [
//!     { "name": "compression", "kind": "binary", "category": "storage" },
//!     { "name": "threads", "kind": "numeric", "values": [1, 2, 4, 8] },
//!     { "name": "engine", "kind": "enumerated", "values": ["innodb", "myisam"] }
//!   ],
//!   "performance_column": "latency",
//!   "direction": "minimize"
//! }
//! ```
//!
//! Binary options take the cells `0`/`1` (or `false`/`true`). Numeric options
//! may omit `values`, in which case the sorted distinct levels observed in the
//! data file are used. Unknown fields are rejected.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid metadata: {0}")]
    Metadata(String),
    #[error("{path}: file is empty")]
    Empty { path: String },
    #[error("{path}: unknown column '{column}' at header position {position}")]
    UnknownColumn {
        path: String,
        column: String,
        position: usize,
    },
    #[error("{path}: missing column '{column}'")]
    MissingColumn { path: String, column: String },
    #[error("{path}: row {row}, column '{column}': value '{value}' outside declared domain")]
    OutOfDomain {
        path: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}, column '{column}': non-numeric performance '{value}'")]
    NonNumeric {
        path: String,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: row {row}: {message}")]
    Malformed {
        path: String,
        row: usize,
        message: String,
    },
    #[error("configuration has {got} values but the space has {expected} options")]
    SpaceMismatch { expected: usize, got: usize },
    #[error("configuration value index {index} out of range for option '{option}'")]
    IndexOutOfRange { option: String, index: usize },
    #[error("configuration {0} is not in the dataset")]
    NotInDataset(Configuration),
    #[error("non-finite performance value at dataset row {0}")]
    NonFinite(usize),
    #[error("invalid train size: {0}")]
    TrainSize(String),
    #[error("unknown option '{0}'")]
    UnknownOption(String),
}

/// Whether the performance metric is minimized or maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    /// Converts a raw value to a minimized fitness (additive inversion for maximizing metrics).
    pub fn orient(self, value: f64) -> f64 {
        match self {
            Direction::Minimize => value,
            Direction::Maximize => -value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Binary,
    Numeric,
    Enumerated,
}

/// Optional label used to aggregate influence results by option category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptionCategory {
    CoreFunctional,
    Utility,
    Cpu,
    Storage,
    Memory,
    Queue,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OptionValue {
    Number(f64),
    Label(String),
}

impl OptionValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            OptionValue::Number(v) => Some(*v),
            OptionValue::Label(_) => None,
        }
    }
}

impl fmt::Display for OptionValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptionValue::Number(v) => write!(f, "{v}"),
            OptionValue::Label(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionSchema {
    pub name: String,
    pub kind: OptionKind,
    values: Vec<OptionValue>,
    pub category: Option<OptionCategory>,
}

impl OptionSchema {
    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: OptionKind::Binary,
            values: vec![OptionValue::Number(0.0), OptionValue::Number(1.0)],
            category: None,
        }
    }

    pub fn numeric(name: impl Into<String>, levels: Vec<f64>) -> Result<Self, DataError> {
        let name = name.into();
        if levels.is_empty() {
            return Err(DataError::Metadata(format!("option '{name}' has no values")));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(DataError::Metadata(format!("option '{name}' has a non-finite level")));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DataError::Metadata(format!(
                "numeric option '{name}' levels must be strictly ascending"
            )));
        }
        Ok(Self {
            name,
            kind: OptionKind::Numeric,
            values: levels.into_iter().map(OptionValue::Number).collect(),
            category: None,
        })
    }

    pub fn enumerated(name: impl Into<String>, labels: Vec<String>) -> Result<Self, DataError> {
        let name = name.into();
        if labels.is_empty() {
            return Err(DataError::Metadata(format!("option '{name}' has no values")));
        }
        let unique: HashSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(DataError::Metadata(format!("option '{name}' has duplicate values")));
        }
        Ok(Self {
            name,
            kind: OptionKind::Enumerated,
            values: labels.into_iter().map(OptionValue::Label).collect(),
            category: None,
        })
    }

    pub fn with_category(mut self, category: OptionCategory) -> Self {
        self.category = Some(category);
        self
    }

    pub fn values(&self) -> &[OptionValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Resolves a raw cell to a value index.
    pub fn parse_cell(&self, cell: &str) -> Option<usize> {
        let cell = cell.trim();
        match self.kind {
            OptionKind::Binary => match cell {
                "0" | "false" | "False" | "FALSE" => Some(0),
                "1" | "true" | "True" | "TRUE" => Some(1),
                _ => cell.parse::<f64>().ok().and_then(|v| {
                    if v == 0.0 {
                        Some(0)
                    } else if v == 1.0 {
                        Some(1)
                    } else {
                        None
                    }
                }),
            },
            OptionKind::Numeric => {
                let v: f64 = cell.parse().ok()?;
                self.values.iter().position(|level| match level {
                    OptionValue::Number(l) => (l - v).abs() <= 1e-9 * l.abs().max(1.0),
                    OptionValue::Label(_) => false,
                })
            }
            OptionKind::Enumerated => self.values.iter().position(|level| match level {
                OptionValue::Label(l) => l == cell,
                OptionValue::Number(_) => false,
            }),
        }
    }
}

/// Ordered option schemas plus the objective direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationSpace {
    options: Vec<OptionSchema>,
    pub direction: Direction,
}

impl ConfigurationSpace {
    pub fn new(options: Vec<OptionSchema>, direction: Direction) -> Result<Self, DataError> {
        if options.is_empty() {
            return Err(DataError::Metadata("a space needs at least one option".into()));
        }
        let mut seen = HashSet::new();
        for o in &options {
            if !seen.insert(o.name.as_str()) {
                return Err(DataError::Metadata(format!("duplicate option name '{}'", o.name)));
            }
            if o.values.is_empty() {
                return Err(DataError::Metadata(format!("option '{}' has no values", o.name)));
            }
        }
        Ok(Self { options, direction })
    }

    /// `n` binary options named `o0`, `o1`, ...
    pub fn binary(n: usize, direction: Direction) -> Self {
        Self::new((0..n).map(|i| OptionSchema::binary(format!("o{i}"))).collect(), direction)
            .expect("binary space with n >= 1")
    }

    pub fn options(&self) -> &[OptionSchema] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn option_index(&self, name: &str) -> Option<usize> {
        self.options.iter().position(|o| o.name == name)
    }

    pub fn count_kind(&self, kind: OptionKind) -> usize {
        self.options.iter().filter(|o| o.kind == kind).count()
    }

    /// Number of distinct configurations, saturating at `usize::MAX`.
    pub fn cardinality(&self) -> usize {
        self.options
            .iter()
            .fold(1usize, |acc, o| acc.saturating_mul(o.len()))
    }

    pub fn validate(&self, c: &Configuration) -> Result<(), DataError> {
        if c.len() != self.len() {
            return Err(DataError::SpaceMismatch {
                expected: self.len(),
                got: c.len(),
            });
        }
        for (o, &v) in self.options.iter().zip(c.values()) {
            if v >= o.len() {
                return Err(DataError::IndexOutOfRange {
                    option: o.name.clone(),
                    index: v,
                });
            }
        }
        Ok(())
    }

    /// Enumerates every configuration in lexicographic order (last option fastest).
    pub fn enumerate(&self) -> Vec<Configuration> {
        let mut out = vec![Configuration::new(Vec::new())];
        for o in &self.options {
            let mut next = Vec::with_capacity(out.len() * o.len());
            for c in &out {
                for v in 0..o.len() {
                    let mut values = c.0.clone();
                    values.push(v);
                    next.push(Configuration(values));
                }
            }
            out = next;
        }
        out
    }

    /// Space without the option at `index`.
    pub fn without(&self, index: usize) -> Result<Self, DataError> {
        let mut options = self.options.clone();
        options.remove(index);
        Self::new(options, self.direction)
    }
}

/// A point in a configuration space: one value index per option.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn new(values: Vec<usize>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn without(&self, index: usize) -> Self {
        let mut v = self.0.clone();
        v.remove(index);
        Self(v)
    }
}

impl From<Vec<usize>> for Configuration {
    fn from(v: Vec<usize>) -> Self {
        Self(v)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// Number of option positions whose value indices differ.
pub fn hamming(a: &Configuration, b: &Configuration) -> Result<usize, DataError> {
    if a.len() != b.len() {
        return Err(DataError::SpaceMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(hamming_unchecked(a.values(), b.values()))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[usize], b: &[usize]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Predicted,
    Synthetic,
}

/// Measured (configuration, performance) pairs over a space.
#[derive(Debug, Clone)]
pub struct PerformanceDataset {
    space: ConfigurationSpace,
    rows: Vec<(Configuration, f64)>,
    index: HashMap<Configuration, usize>,
    pub provenance: Provenance,
    pub performance_column: String,
    duplicates_collapsed: usize,
}

impl PerformanceDataset {
    /// Builds a dataset, collapsing duplicate configurations to the median of
    /// their performances. Row order follows first occurrence.
    pub fn new(
        space: ConfigurationSpace,
        rows: Vec<(Configuration, f64)>,
        provenance: Provenance,
    ) -> Result<Self, DataError> {
        let mut groups: Vec<(Configuration, Vec<f64>)> = Vec::with_capacity(rows.len());
        let mut index: HashMap<Configuration, usize> = HashMap::with_capacity(rows.len());
        for (i, (c, y)) in rows.into_iter().enumerate() {
            space.validate(&c)?;
            if !y.is_finite() {
                return Err(DataError::NonFinite(i));
            }
            match index.get(&c) {
                Some(&g) => groups[g].1.push(y),
                None => {
                    index.insert(c.clone(), groups.len());
                    groups.push((c, vec![y]));
                }
            }
        }
        let mut duplicates = 0;
        let rows = groups
            .into_iter()
            .map(|(c, ys)| {
                if ys.len() > 1 {
                    duplicates += ys.len() - 1;
                    log::warn!(
                        "configuration {c} appears {} times; keeping the median performance",
                        ys.len()
                    );
                }
                let y = median(ys);
                (c, y)
            })
            .collect();
        Ok(Self {
            space,
            rows,
            index,
            provenance,
            performance_column: "performance".into(),
            duplicates_collapsed: duplicates,
        })
    }

    pub fn with_performance_column(mut self, name: impl Into<String>) -> Self {
        self.performance_column = name.into();
        self
    }

    pub fn space(&self) -> &ConfigurationSpace {
        &self.space
    }

    pub fn rows(&self) -> &[(Configuration, f64)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of input rows dropped while collapsing duplicates.
    pub fn duplicates_collapsed(&self) -> usize {
        self.duplicates_collapsed
    }

    pub fn position(&self, c: &Configuration) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn contains(&self, c: &Configuration) -> bool {
        self.index.contains_key(c)
    }

    /// Raw (unoriented) performance of `c`.
    pub fn performance(&self, c: &Configuration) -> Option<f64> {
        self.position(c).map(|i| self.rows[i].1)
    }

    pub fn configurations(&self) -> impl Iterator<Item = &Configuration> {
        self.rows.iter().map(|(c, _)| c)
    }

    /// Performances oriented to minimization.
    pub fn oriented(&self) -> Vec<f64> {
        self.rows.iter().map(|(_, y)| self.space.direction.orient(*y)).collect()
    }

    /// A dataset holding the rows at `indices` (in that order).
    pub fn subset(&self, indices: &[usize]) -> Self {
        let rows: Vec<_> = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let index = rows
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (c.clone(), i))
            .collect();
        Self {
            space: self.space.clone(),
            rows,
            index,
            provenance: self.provenance,
            performance_column: self.performance_column.clone(),
            duplicates_collapsed: 0,
        }
    }
}

fn median(mut ys: Vec<f64>) -> f64 {
    ys.sort_by(f64::total_cmp);
    let n = ys.len();
    if n % 2 == 1 {
        ys[n / 2]
    } else {
        (ys[n / 2 - 1] + ys[n / 2]) / 2.0
    }
}

/// Dataset configurations at Hamming distance in `[1, radius]` from `c`.
pub fn neighbors(
    dataset: &PerformanceDataset,
    c: &Configuration,
    radius: usize,
) -> Result<Vec<Configuration>, DataError> {
    if !dataset.contains(c) {
        return Err(DataError::NotInDataset(c.clone()));
    }
    Ok(dataset
        .configurations()
        .filter(|other| {
            let d = hamming_unchecked(c.values(), other.values());
            d >= 1 && d <= radius
        })
        .cloned()
        .collect())
}

/// Neighbor lists (indices into `points`) for the Hamming ball of `radius`.
///
/// Radius 1 is resolved by hashing single-position variants, larger radii by
/// pairwise comparison. Lists are sorted ascending.
pub fn adjacency(points: &[Configuration], radius: usize) -> Vec<Vec<usize>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    if radius == 1 {
        let dims = points[0].len();
        let mut levels = vec![0usize; dims];
        for p in points {
            for (l, &v) in levels.iter_mut().zip(p.values()) {
                *l = (*l).max(v + 1);
            }
        }
        let lookup: HashMap<&[usize], usize> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (p.values(), i))
            .collect();
        let variants: usize = levels.iter().map(|l| l.saturating_sub(1)).sum();
        if variants < n {
            return points
                .iter()
                .map(|p| {
                    let mut buf = p.values().to_vec();
                    let mut out = Vec::new();
                    for d in 0..dims {
                        let orig = buf[d];
                        for v in 0..levels[d] {
                            if v == orig {
                                continue;
                            }
                            buf[d] = v;
                            if let Some(&j) = lookup.get(buf.as_slice()) {
                                out.push(j);
                            }
                        }
                        buf[d] = orig;
                    }
                    out.sort_unstable();
                    out
                })
                .collect();
        }
    }
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = hamming_unchecked(points[i].values(), points[j].values());
            if d >= 1 && d <= radius {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// How many rows go into the training partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainSize {
    Count(usize),
    /// Five times the number of options.
    Binary5n,
    /// Fraction of the rows, rounded to the nearest count.
    Fraction(f64),
}

impl TrainSize {
    pub fn resolve(self, dataset: &PerformanceDataset) -> Result<usize, DataError> {
        let n = match self {
            TrainSize::Count(n) => n,
            TrainSize::Binary5n => 5 * dataset.space().len(),
            TrainSize::Fraction(f) => {
                if !(f > 0.0 && f < 1.0) {
                    return Err(DataError::TrainSize(format!("fraction {f} not in (0, 1)")));
                }
                ((dataset.len() as f64) * f).round() as usize
            }
        };
        if n == 0 {
            return Err(DataError::TrainSize("training partition would be empty".into()));
        }
        if n >= dataset.len() {
            return Err(DataError::TrainSize(format!(
                "train size {n} must be smaller than the {} rows",
                dataset.len()
            )));
        }
        Ok(n)
    }
}

impl FromStr for TrainSize {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("binary-5n") {
            return Ok(TrainSize::Binary5n);
        }
        if s.contains('.') {
            let f: f64 = s
                .parse()
                .map_err(|_| DataError::TrainSize(format!("cannot parse '{s}'")))?;
            return Ok(TrainSize::Fraction(f));
        }
        s.parse()
            .map(TrainSize::Count)
            .map_err(|_| DataError::TrainSize(format!("cannot parse '{s}'")))
    }
}

/// Uniformly random disjoint partition, deterministic for `seed`.
pub fn split_train_test(
    dataset: &PerformanceDataset,
    train_size: TrainSize,
    seed: u64,
) -> Result<(PerformanceDataset, PerformanceDataset), DataError> {
    let n_train = train_size.resolve(dataset)?;
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    idx.shuffle(&mut rng::seeded(seed));
    let (train, test) = idx.split_at(n_train);
    Ok((dataset.subset(train), dataset.subset(test)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaOption {
    name: String,
    kind: OptionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<OptionValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    category: Option<OptionCategory>,
}

/// On-disk metadata document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    options: Vec<MetaOption>,
    pub performance_column: String,
    pub direction: Direction,
}

impl Metadata {
    pub fn parse(text: &str) -> Result<Self, DataError> {
        serde_json::from_str(text).map_err(|e| DataError::Metadata(e.to_string()))
    }

    pub fn from_space(space: &ConfigurationSpace, performance_column: &str) -> Self {
        let options = space
            .options()
            .iter()
            .map(|o| MetaOption {
                name: o.name.clone(),
                kind: o.kind,
                values: match o.kind {
                    OptionKind::Binary => None,
                    _ => Some(o.values.clone()),
                },
                category: o.category,
            })
            .collect();
        Self {
            options,
            performance_column: performance_column.to_string(),
            direction: space.direction,
        }
    }

    pub fn option_names(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.name.as_str())
    }

    /// Resolves the space; `observed` supplies raw cells per option for
    /// numeric options that omit their levels.
    fn to_space(&self, observed: &HashMap<String, Vec<String>>) -> Result<ConfigurationSpace, DataError> {
        let mut options = Vec::with_capacity(self.options.len());
        for m in &self.options {
            let schema = match m.kind {
                OptionKind::Binary => {
                    if let Some(values) = &m.values {
                        let ok = values.len() == 2
                            && values[0].as_f64() == Some(0.0)
                            && values[1].as_f64() == Some(1.0);
                        if !ok {
                            return Err(DataError::Metadata(format!(
                                "binary option '{}' must have values [0, 1]",
                                m.name
                            )));
                        }
                    }
                    OptionSchema::binary(m.name.clone())
                }
                OptionKind::Numeric => {
                    let levels = match &m.values {
                        Some(values) => values
                            .iter()
                            .map(|v| {
                                v.as_f64().ok_or_else(|| {
                                    DataError::Metadata(format!(
                                        "numeric option '{}' has non-numeric value '{v}'",
                                        m.name
                                    ))
                                })
                            })
                            .collect::<Result<Vec<_>, _>>()?,
                        None => {
                            let mut levels: Vec<f64> = Vec::new();
                            for cell in observed.get(&m.name).into_iter().flatten() {
                                if let Ok(v) = cell.trim().parse::<f64>() {
                                    if v.is_finite() {
                                        levels.push(v);
                                    }
                                }
                            }
                            levels.sort_by(f64::total_cmp);
                            levels.dedup();
                            levels
                        }
                    };
                    OptionSchema::numeric(m.name.clone(), levels)?
                }
                OptionKind::Enumerated => {
                    let labels = m
                        .values
                        .as_ref()
                        .ok_or_else(|| {
                            DataError::Metadata(format!(
                                "enumerated option '{}' must declare its values",
                                m.name
                            ))
                        })?
                        .iter()
                        .map(|v| v.to_string())
                        .collect();
                    OptionSchema::enumerated(m.name.clone(), labels)?
                }
            };
            options.push(match m.category {
                Some(c) => schema.with_category(c),
                None => schema,
            });
        }
        ConfigurationSpace::new(options, self.direction)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_metadata(path: &Path) -> Result<Metadata, DataError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| io_err(path, e))?;
    Metadata::parse(&text)
}

/// Parsed header + raw cells of a delimited file.
pub(crate) struct RawTable {
    pub header: Vec<String>,
    /// (1-based file line, cells)
    pub rows: Vec<(usize, Vec<String>)>,
}

pub(crate) fn read_table(path: &Path) -> Result<RawTable, DataError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Malformed {
            path: name.clone(),
            row: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(DataError::Empty { path: name });
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| DataError::Malformed {
            path: name.clone(),
            row: line,
            message: e.to_string(),
        })?;
        if record.len() != header.len() {
            return Err(DataError::Malformed {
                path: name.clone(),
                row: line,
                message: format!("expected {} cells, found {}", header.len(), record.len()),
            });
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(DataError::Empty { path: name });
    }
    Ok(RawTable { header, rows })
}

/// Maps option names (plus `extra`) to header positions, rejecting unknown and missing columns.
pub(crate) fn map_columns(
    path: &Path,
    header: &[String],
    option_names: &[&str],
    extra: &str,
) -> Result<(Vec<usize>, usize), DataError> {
    let name = path.display().to_string();
    for (pos, h) in header.iter().enumerate() {
        if h != extra && !option_names.contains(&h.as_str()) {
            return Err(DataError::UnknownColumn {
                path: name,
                column: h.clone(),
                position: pos + 1,
            });
        }
    }
    let find = |col: &str| {
        header
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| DataError::MissingColumn {
                path: name.clone(),
                column: col.to_string(),
            })
    };
    let option_cols = option_names
        .iter()
        .map(|o| find(o))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((option_cols, find(extra)?))
}

/// Parses a row's option cells into a configuration.
pub(crate) fn parse_configuration(
    path: &Path,
    space: &ConfigurationSpace,
    option_cols: &[usize],
    line: usize,
    cells: &[String],
) -> Result<Configuration, DataError> {
    let mut values = Vec::with_capacity(space.len());
    for (o, &col) in space.options().iter().zip(option_cols) {
        let cell = &cells[col];
        let v = o.parse_cell(cell).ok_or_else(|| DataError::OutOfDomain {
            path: path.display().to_string(),
            row: line,
            column: o.name.clone(),
            value: cell.clone(),
        })?;
        values.push(v);
    }
    Ok(Configuration(values))
}

pub(crate) fn parse_number(path: &Path, line: usize, column: &str, cell: &str) -> Result<f64, DataError> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(DataError::NonNumeric {
            path: path.display().to_string(),
            row: line,
            column: column.to_string(),
            value: cell.to_string(),
        }),
    }
}

/// Loads a dataset from a data file and its metadata document.
pub fn load_dataset(data_path: &Path, meta_path: &Path) -> Result<PerformanceDataset, DataError> {
    let meta = read_metadata(meta_path)?;
    load_dataset_with(data_path, &meta)
}

pub fn load_dataset_with(data_path: &Path, meta: &Metadata) -> Result<PerformanceDataset, DataError> {
    let table = read_table(data_path)?;
    let names: Vec<&str> = meta.option_names().collect();
    let (option_cols, perf_col) = map_columns(data_path, &table.header, &names, &meta.performance_column)?;
    let observed: HashMap<String, Vec<String>> = names
        .iter()
        .zip(&option_cols)
        .map(|(n, &c)| {
            (
                n.to_string(),
                table.rows.iter().map(|(_, cells)| cells[c].clone()).collect(),
            )
        })
        .collect();
    let space = meta.to_space(&observed)?;
    let mut rows = Vec::with_capacity(table.rows.len());
    for (line, cells) in &table.rows {
        let c = parse_configuration(data_path, &space, &option_cols, *line, cells)?;
        let y = parse_number(data_path, *line, &meta.performance_column, &cells[perf_col])?;
        rows.push((c, y));
    }
    Ok(PerformanceDataset::new(space, rows, Provenance::Measured)?
        .with_performance_column(meta.performance_column.clone()))
}

pub(crate) fn write_rows<'a>(
    path: &Path,
    space: &ConfigurationSpace,
    value_column: &str,
    rows: impl Iterator<Item = (&'a Configuration, f64)>,
) -> Result<(), DataError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let wrap = |e: csv::Error| io_err(path, std::io::Error::other(e));
    let mut header: Vec<String> = space.options().iter().map(|o| o.name.clone()).collect();
    header.push(value_column.to_string());
    w.write_record(&header).map_err(wrap)?;
    for (c, y) in rows {
        let mut record: Vec<String> = space
            .options()
            .iter()
            .zip(c.values())
            .map(|(o, &v)| o.values()[v].to_string())
            .collect();
        record.push(format!("{y}"));
        w.write_record(&record).map_err(wrap)?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes the data file of `dataset`; values are written in their declared form.
pub fn write_dataset(dataset: &PerformanceDataset, path: &Path) -> Result<(), DataError> {
    write_rows(
        path,
        dataset.space(),
        &dataset.performance_column,
        dataset.rows().iter().map(|(c, y)| (c, *y)),
    )
}

pub fn write_metadata(dataset: &PerformanceDataset, path: &Path) -> Result<(), DataError> {
    let meta = Metadata::from_space(dataset.space(), &dataset.performance_column);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| DataError::Metadata(e.to_string()))?;
    let mut f = File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| io_err(path, e))
}
