//! Monolingual and cross-lingual experiment grids, greedy forward feature
//! selection, and the MWE annotation consistency analysis.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotate::{load_sidecar_file, Tagset};
use crate::data::{load_dataset, ColumnMap, Dataset, Genre, Label, Language, Split};
use crate::error::{Error, Result};
use crate::features::{target_token_count, ExtractOptions, Family, FeatureSet};
use crate::model::{ClassWeighting, LinearModel, Scaling, TrainConfig};
use crate::pipeline::{evaluate_cached, evaluate_on, train_cached, train_on, CachedDataset, Resources};
use crate::resources::load_bundle;

/// A language, plus a genre for English.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Group {
    pub language: Language,
    pub genre: Genre,
}

impl Group {
    pub const fn new(language: Language, genre: Genre) -> Self {
        Group { language, genre }
    }

    /// The five groups with train/dev/test splits.
    pub const MONOLINGUAL: [Group; 5] = [
        Group::new(Language::En, Genre::News),
        Group::new(Language::En, Genre::WikiNews),
        Group::new(Language::En, Genre::Wikipedia),
        Group::new(Language::Es, Genre::None),
        Group::new(Language::De, Genre::None),
    ];

    pub const ALL: [Group; 6] = [
        Group::new(Language::En, Genre::News),
        Group::new(Language::En, Genre::WikiNews),
        Group::new(Language::En, Genre::Wikipedia),
        Group::new(Language::Es, Genre::None),
        Group::new(Language::De, Genre::None),
        Group::new(Language::Fr, Genre::None),
    ];

    pub fn label(&self) -> String {
        match self.genre {
            Genre::None => self.language.code().to_string(),
            g => format!("{}-{}", self.language.code(), g.name()),
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lang, genre) = s.split_once('-').unwrap_or((s, "none"));
        let group = Group::new(lang.parse()?, genre.parse()?);
        if (group.language == Language::En) == (group.genre == Genre::None) {
            return Err(Error::Config(format!("unknown dataset group {s:?}")));
        }
        Ok(group)
    }
}

/// Where the shared-task files live below a data root:
/// `english/News_Train.tsv`, `spanish/Spanish_Dev.tsv`,
/// `german/German_Test.tsv`, `french/French_Test.tsv`, and so on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusLayout {
    pub root: PathBuf,
}

impl CorpusLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        CorpusLayout { root: root.into() }
    }

    pub fn path(&self, group: Group, split: Split) -> PathBuf {
        let split = match split {
            Split::Train => "Train",
            Split::Dev => "Dev",
            Split::Test => "Test",
        };
        let (dir, stem) = match group.language {
            Language::En => ("english", group.genre.name()),
            Language::Es => ("spanish", "Spanish"),
            Language::De => ("german", "German"),
            Language::Fr => ("french", "French"),
        };
        self.root.join(dir).join(format!("{stem}_{split}.tsv"))
    }
}

/// Every dataset file found under a layout.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub datasets: BTreeMap<(Group, Split), Dataset>,
}

impl Corpus {
    /// Load whichever of the expected files exist. Parse errors are fatal.
    pub fn load(layout: &CorpusLayout, columns: &ColumnMap) -> Result<Self> {
        let keys: Vec<(Group, Split)> = Group::ALL
            .iter()
            .flat_map(|&g| Split::ALL.iter().map(move |&s| (g, s)))
            .filter(|&(g, s)| layout.path(g, s).is_file())
            .collect();
        let loaded: Vec<((Group, Split), Dataset)> = keys
            .par_iter()
            .map(|&(g, s)| load_dataset(&layout.path(g, s), columns, g.language, g.genre, s).map(|d| ((g, s), d)))
            .collect::<Result<_>>()?;
        Ok(Corpus {
            datasets: loaded.into_iter().collect(),
        })
    }

    pub fn insert(&mut self, group: Group, split: Split, dataset: Dataset) {
        self.datasets.insert((group, split), dataset);
    }

    pub fn get(&self, group: Group, split: Split) -> Option<&Dataset> {
        self.datasets.get(&(group, split))
    }

    pub fn require(&self, group: Group, split: Split) -> Result<&Dataset> {
        self.get(group, split)
            .ok_or_else(|| Error::MissingResource(format!("{group} {split} dataset")))
    }

    /// Train splits for a language; English concatenates its genres.
    pub fn train_sets(&self, language: Language) -> Vec<&Dataset> {
        Group::MONOLINGUAL
            .iter()
            .filter(|g| g.language == language)
            .filter_map(|&g| self.get(g, Split::Train))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }
}

/// Settings shared by every experiment, read from `key = value` lines.
///
/// ```text
/// data_root = data/camb_cwi
/// manifest.EN = resources/en.manifest
/// sidecar.EN = annotations/en.sidecar
/// tagset = annotations/tags.txt
/// feature_set = monolingual25
/// l2 = 1.0
/// max_iterations = 1000
/// tolerance = 1e-6
/// class_weighting = none
/// scaling = max_abs
/// binary_is_stop = false
/// strict_resources = false
/// min_mwe_tokens = 2
/// consistency_splits = train,dev,test
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_root: PathBuf,
    pub manifests: BTreeMap<Language, PathBuf>,
    pub sidecars: BTreeMap<Language, PathBuf>,
    pub tagset: Option<PathBuf>,
    pub feature_set: FeatureSet,
    pub train: TrainConfig,
    pub extract: ExtractOptions,
    pub min_mwe_tokens: usize,
    pub consistency_splits: Vec<Split>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_root: PathBuf::from("."),
            manifests: BTreeMap::new(),
            sidecars: BTreeMap::new(),
            tagset: None,
            feature_set: FeatureSet::monolingual(),
            train: TrainConfig::default(),
            extract: ExtractOptions::default(),
            min_mwe_tokens: 2,
            consistency_splits: Split::ALL.to_vec(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: {v:?} is not a valid number")))
}

pub fn parse_splits(v: &str) -> Result<Vec<Split>> {
    let splits: Vec<Split> = v
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if splits.is_empty() {
        return Err(Error::Config("empty split list".into()));
    }
    Ok(splits)
}

pub fn parse_class_weighting(v: &str) -> Result<ClassWeighting> {
    match v {
        "none" => Ok(ClassWeighting::None),
        "inverse_frequency" | "balanced" => Ok(ClassWeighting::InverseFrequency),
        _ => Err(Error::Config(format!("unknown class weighting {v:?}"))),
    }
}

pub fn parse_scaling(v: &str) -> Result<Scaling> {
    match v {
        "none" => Ok(Scaling::None),
        "max_abs" => Ok(Scaling::MaxAbs),
        _ => Err(Error::Config(format!("unknown scaling {v:?}"))),
    }
}

impl ExperimentConfig {
    /// Relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let path = |v: &str| base.join(v);
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(lang) = key.strip_prefix("manifest.") {
                c.manifests.insert(lang.parse()?, path(value));
                continue;
            }
            if let Some(lang) = key.strip_prefix("sidecar.") {
                c.sidecars.insert(lang.parse()?, path(value));
                continue;
            }
            match key {
                "data_root" => c.data_root = path(value),
                "tagset" => c.tagset = Some(path(value)),
                "feature_set" => c.feature_set = FeatureSet::parse(value)?,
                "l2" | "l2_strength" => c.train.l2_strength = parse_num(key, value)?,
                "max_iterations" => c.train.max_iterations = parse_num(key, value)?,
                "tolerance" => c.train.tolerance = parse_num(key, value)?,
                "class_weighting" => c.train.class_weighting = parse_class_weighting(value)?,
                "scaling" => c.train.scaling = parse_scaling(value)?,
                "binary_is_stop" => c.extract.binary_is_stop = parse_bool(key, value)?,
                "strict_resources" => c.extract.strict_resources = parse_bool(key, value)?,
                "rare_trigram_threshold" => c.extract.rare_trigram_threshold = parse_num(key, value)?,
                "min_mwe_tokens" => c.min_mwe_tokens = parse_num(key, value)?,
                "consistency_splits" => c.consistency_splits = parse_splits(value)?,
                _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
            }
        }
        c.train.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Every setting spelled out, suitable for `parse` with any base.
    pub fn to_text(&self) -> String {
        let abs = |p: &Path| std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string();
        let mut s = String::new();
        let _ = writeln!(s, "data_root = {}", abs(&self.data_root));
        for (lang, p) in &self.manifests {
            let _ = writeln!(s, "manifest.{lang} = {}", abs(p));
        }
        for (lang, p) in &self.sidecars {
            let _ = writeln!(s, "sidecar.{lang} = {}", abs(p));
        }
        if let Some(t) = &self.tagset {
            let _ = writeln!(s, "tagset = {}", abs(t));
        }
        let _ = writeln!(s, "feature_set = {}", self.feature_set.spec());
        let t = &self.train;
        let _ = writeln!(s, "l2 = {:?}", t.l2_strength);
        let _ = writeln!(s, "max_iterations = {}", t.max_iterations);
        let _ = writeln!(s, "tolerance = {:?}", t.tolerance);
        let cw = match t.class_weighting {
            ClassWeighting::None => "none",
            ClassWeighting::InverseFrequency => "inverse_frequency",
        };
        let _ = writeln!(s, "class_weighting = {cw}");
        let sc = match t.scaling {
            Scaling::None => "none",
            Scaling::MaxAbs => "max_abs",
        };
        let _ = writeln!(s, "scaling = {sc}");
        let _ = writeln!(s, "binary_is_stop = {}", self.extract.binary_is_stop);
        let _ = writeln!(s, "strict_resources = {}", self.extract.strict_resources);
        let _ = writeln!(s, "rare_trigram_threshold = {}", self.extract.rare_trigram_threshold);
        let _ = writeln!(s, "min_mwe_tokens = {}", self.min_mwe_tokens);
        let splits: Vec<&str> = self.consistency_splits.iter().map(|s| s.name()).collect();
        let _ = writeln!(s, "consistency_splits = {}", splits.join(","));
        s
    }

    pub fn layout(&self) -> CorpusLayout {
        CorpusLayout::new(&self.data_root)
    }

    /// Bundles and sidecars for every configured language, plus any
    /// sidecar warnings.
    pub fn load_resources(&self) -> Result<(Resources, Vec<String>)> {
        let tagset = self.tagset.as_deref().map(Tagset::load).transpose()?;
        let mut resources = Resources {
            options: self.extract.clone(),
            ..Default::default()
        };
        let mut warnings = Vec::new();
        for (&lang, manifest) in &self.manifests {
            let bundle = load_bundle(manifest)?;
            if bundle.language != lang {
                return Err(Error::LanguageMismatch {
                    instance: lang.to_string(),
                    bundle: bundle.language.to_string(),
                });
            }
            let sidecar = match self.sidecars.get(&lang) {
                Some(p) => {
                    let table = load_sidecar_file(p, tagset.as_ref())?;
                    warnings.extend(table.warnings.iter().map(|w| format!("{lang}: {w}")));
                    Some(table)
                }
                None => None,
            };
            resources.insert(bundle, sidecar);
        }
        Ok((resources, warnings))
    }
}

/// One dataset group's scores in the monolingual grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoRow {
    pub dataset: String,
    pub dev: Option<f64>,
    pub test: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degraded: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonoTable {
    pub feature_set: String,
    pub rows: Vec<MonoRow>,
    pub mean_dev: Option<f64>,
    pub mean_test: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let vals: Vec<f64> = values.into_iter().collect::<Option<_>>()?;
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

/// Train on each group's train split; score its dev and test splits.
pub fn run_monolingual(
    corpus: &Corpus,
    resources: &Resources,
    set: &FeatureSet,
    config: &TrainConfig,
) -> Result<MonoTable> {
    let groups: Vec<Group> = Group::MONOLINGUAL
        .into_iter()
        .filter(|&g| corpus.get(g, Split::Train).is_some())
        .collect();
    if groups.is_empty() {
        return Err(Error::MissingResource("no training split found".into()));
    }
    let rows = groups
        .par_iter()
        .map(|&g| {
            let train = corpus.require(g, Split::Train)?;
            let model = train_on(&[train], resources, set, config)?;
            let score = |split| -> Result<Option<f64>> {
                corpus
                    .get(g, split)
                    .map(|d| evaluate_on(&model, d, resources).map(|r| r.macro_f1))
                    .transpose()
            };
            Ok(MonoRow {
                dataset: g.label(),
                dev: score(Split::Dev)?,
                test: score(Split::Test)?,
                degraded: resources.degraded(g.language, set)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonoTable {
        feature_set: set.name.clone(),
        mean_dev: mean(rows.iter().map(|r| r.dev)),
        mean_test: mean(rows.iter().map(|r| r.test)),
        rows,
    })
}

impl MonoTable {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("dataset\tdev\ttest\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}", r.dataset, pct(r.dev), pct(r.test));
        }
        let _ = writeln!(s, "Mean\t{}\t{}", pct(self.mean_dev), pct(self.mean_test));
        s
    }

    pub fn row(&self, dataset: &str) -> Option<&MonoRow> {
        self.rows.iter().find(|r| r.dataset == dataset)
    }
}

impl fmt::Display for MonoTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Macro-F1 ({})", self.feature_set)?;
        writeln!(f, "{:<14} {:>7} {:>7}", "dataset", "dev", "test")?;
        for r in &self.rows {
            writeln!(f, "{:<14} {:>7} {:>7}", r.dataset, pct(r.dev), pct(r.test))?;
        }
        write!(f, "{:<14} {:>7} {:>7}", "Mean", pct(self.mean_dev), pct(self.mean_test))
    }
}

/// Non-empty subsets of the trainable languages without `excluded`,
/// smallest first.
pub fn train_subsets(excluded: Language) -> Vec<Vec<Language>> {
    let pool: Vec<Language> = Language::TRAINABLE.into_iter().filter(|&l| l != excluded).collect();
    let mut subsets: Vec<Vec<Language>> = (1u32..1 << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &l)| l)
                .collect()
        })
        .collect();
    subsets.sort_by_key(|s: &Vec<Language>| (s.len(), s.iter().map(|l| *l as u8).collect::<Vec<_>>()));
    subsets
}

fn codes(langs: &[Language]) -> String {
    langs.iter().map(|l| l.code()).collect::<Vec<_>>().join("+")
}

/// Cached vectors for the cross-lingual grid and the ablation.
#[derive(Debug, Clone)]
pub struct CrossData {
    pub train: BTreeMap<Language, Vec<CachedDataset>>,
    pub dev: BTreeMap<Group, CachedDataset>,
    pub test: BTreeMap<Group, CachedDataset>,
}

impl CrossData {
    pub fn build(corpus: &Corpus, resources: &Resources, superset: &FeatureSet) -> Result<Self> {
        let cache = |d: &Dataset| CachedDataset::build(d, resources, superset);
        let mut train = BTreeMap::new();
        for lang in Language::TRAINABLE {
            let sets: Vec<CachedDataset> = corpus.train_sets(lang).into_iter().map(cache).collect::<Result<_>>()?;
            if !sets.is_empty() {
                train.insert(lang, sets);
            }
        }
        let mut dev = BTreeMap::new();
        let mut test = BTreeMap::new();
        for g in Group::ALL {
            if let Some(d) = corpus.get(g, Split::Dev) {
                dev.insert(g, cache(d)?);
            }
            if let Some(d) = corpus.get(g, Split::Test) {
                test.insert(g, cache(d)?);
            }
        }
        Ok(CrossData { train, dev, test })
    }

    pub fn has_training(&self, langs: &[Language]) -> bool {
        langs.iter().all(|l| self.train.contains_key(l))
    }

    pub fn train(&self, langs: &[Language], set: &FeatureSet, config: &TrainConfig) -> Result<LinearModel> {
        let parts: Vec<&CachedDataset> = langs
            .iter()
            .map(|l| {
                self.train
                    .get(l)
                    .ok_or_else(|| Error::MissingResource(format!("{l} training data")))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        train_cached(&parts, set, config)
    }

    /// (train languages, evaluation group) pairs the grid covers.
    pub fn cells(&self) -> Vec<(Vec<Language>, Group)> {
        let mut cells = Vec::new();
        for g in Group::ALL {
            if !self.dev.contains_key(&g) && !self.test.contains_key(&g) {
                continue;
            }
            for subset in train_subsets(g.language) {
                if self.has_training(&subset) {
                    cells.push((subset, g));
                }
            }
        }
        cells
    }

    fn trained(
        &self,
        cells: &[(Vec<Language>, Group)],
        set: &FeatureSet,
        config: &TrainConfig,
    ) -> Result<BTreeMap<Vec<Language>, LinearModel>> {
        let mut subsets: Vec<Vec<Language>> = cells.iter().map(|(s, _)| s.clone()).collect();
        subsets.sort();
        subsets.dedup();
        subsets
            .into_par_iter()
            .map(|s| self.train(&s, set, config).map(|m| (s, m)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub train: Vec<Language>,
    pub eval: String,
    pub dev: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTable {
    pub feature_set: String,
    pub rows: Vec<CrossRow>,
}

/// Train on every language subset that excludes the evaluation language.
pub fn run_crosslingual(data: &CrossData, set: &FeatureSet, config: &TrainConfig) -> Result<CrossTable> {
    let cells = data.cells();
    if cells.is_empty() {
        return Err(Error::MissingResource("no cross-lingual train/evaluation pair found".into()));
    }
    let models = data.trained(&cells, set, config)?;
    let rows = cells
        .par_iter()
        .map(|(subset, g)| {
            if subset.contains(&g.language) {
                return Err(Error::Config(format!("{g} would be evaluated on its own training language")));
            }
            let model = &models[subset];
            let score = |d: Option<&CachedDataset>| d.map(|d| evaluate_cached(model, d).map(|r| r.macro_f1)).transpose();
            Ok(CrossRow {
                train: subset.clone(),
                eval: g.label(),
                dev: score(data.dev.get(g))?,
                test: score(data.test.get(g))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossTable {
        feature_set: set.name.clone(),
        rows,
    })
}

impl CrossTable {
    pub fn cell(&self, train: &[Language], eval: &str) -> Option<&CrossRow> {
        self.rows.iter().find(|r| r.train == train && r.eval == eval)
    }

    /// Best test score for an evaluation group.
    pub fn best_test(&self, eval: &str) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.eval == eval)
            .filter_map(|r| r.test)
            .max_by(f64::total_cmp)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("train\teval\tdev\ttest\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", codes(&r.train), r.eval, pct(r.dev), pct(r.test));
        }
        s
    }
}

impl fmt::Display for CrossTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Cross-lingual Macro-F1 ({})", self.feature_set)?;
        write!(f, "{:<10} {:<14} {:>7} {:>7}", "train", "eval", "dev", "test")?;
        for r in &self.rows {
            write!(f, "\n{:<10} {:<14} {:>7} {:>7}", codes(&r.train), r.eval, pct(r.dev), pct(r.test))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientColumn {
    pub train: Language,
    pub bias: f64,
    pub weights: BTreeMap<String, f64>,
}

/// Weights of single-language models, one column per training language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientTable {
    pub feature_set: String,
    pub columns: Vec<CoefficientColumn>,
}

pub fn coefficient_table(
    data: &CrossData,
    languages: &[Language],
    set: &FeatureSet,
    config: &TrainConfig,
) -> Result<CoefficientTable> {
    let columns = languages
        .par_iter()
        .map(|&lang| {
            let model = data.train(&[lang], set, config)?;
            Ok(CoefficientColumn {
                train: lang,
                bias: model.bias,
                weights: model.coefficients().into_iter().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientTable {
        feature_set: set.name.clone(),
        columns,
    })
}

impl CoefficientTable {
    pub fn weight(&self, train: Language, feature: &str) -> Option<f64> {
        self.columns
            .iter()
            .find(|c| c.train == train)
            .map(|c| c.weights.get(feature).copied().unwrap_or(0.0))
    }

    fn names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self
            .columns
            .iter()
            .flat_map(|c| c.weights.keys().map(String::as_str))
            .collect();
        names.sort_unstable();
        names.dedup();
        names
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("feature");
        for c in &self.columns {
            let _ = write!(s, "\t{}", c.train);
        }
        s.push('\n');
        for name in self.names() {
            s.push_str(name);
            for c in &self.columns {
                let _ = write!(s, "\t{:.3}", c.weights.get(name).copied().unwrap_or(0.0));
            }
            s.push('\n');
        }
        s.push_str("(bias)");
        for c in &self.columns {
            let _ = write!(s, "\t{:.3}", c.bias);
        }
        s.push('\n');
        s
    }
}

impl fmt::Display for CoefficientTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<20}", "feature")?;
        for c in &self.columns {
            write!(f, " {:>9}", c.train.code())?;
        }
        for name in self.names() {
            write!(f, "\n{name:<20}")?;
            for c in &self.columns {
                write!(f, " {:>9.3}", c.weights.get(name).copied().unwrap_or(0.0))?;
            }
        }
        write!(f, "\n{:<20}", "(bias)")?;
        for c in &self.columns {
            write!(f, " {:>9.3}", c.bias)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDelta {
    pub family: String,
    pub score: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationIteration {
    pub features: Vec<String>,
    pub base_score: f64,
    pub candidates: Vec<CandidateDelta>,
    pub accepted: Vec<String>,
    pub rejected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub iterations: Vec<AblationIteration>,
    pub final_features: Vec<String>,
    pub final_score: f64,
}

/// Forward selection. Each round adds every remaining candidate alone to
/// the current set and accepts, as one batch, all whose score strictly
/// beats the current one. Stops when a round accepts nothing.
pub fn greedy_ablation<F>(seed: &FeatureSet, candidates: &[Family], score: F) -> Result<AblationReport>
where
    F: Fn(&FeatureSet) -> Result<f64> + Sync,
{
    let mut current = seed.clone();
    let mut remaining: Vec<Family> = candidates.iter().copied().filter(|f| !current.contains(*f)).collect();
    let mut base = score(&current)?;
    let mut iterations = Vec::new();
    while !remaining.is_empty() {
        let scored = remaining
            .par_iter()
            .map(|&f| score(&current.with(f)).map(|s| (f, s)))
            .collect::<Result<Vec<_>>>()?;
        let candidates: Vec<CandidateDelta> = scored
            .iter()
            .map(|&(f, s)| CandidateDelta {
                family: f.name().to_string(),
                score: s,
                delta: s - base,
            })
            .collect();
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        for (&(f, _), c) in scored.iter().zip(&candidates) {
            if c.delta > 0.0 {
                accepted.push(f);
            } else {
                rejected.push(f);
            }
        }
        iterations.push(AblationIteration {
            features: current.families.iter().map(|f| f.name().to_string()).collect(),
            base_score: base,
            candidates,
            accepted: accepted.iter().map(|f| f.name().to_string()).collect(),
            rejected: rejected.iter().map(|f| f.name().to_string()).collect(),
        });
        if accepted.is_empty() {
            break;
        }
        for f in &accepted {
            current = current.with(*f);
        }
        current.name = "ablation".into();
        remaining = rejected;
        base = score(&current)?;
    }
    Ok(AblationReport {
        iterations,
        final_features: current.families.iter().map(|f| f.name().to_string()).collect(),
        final_score: base,
    })
}

/// Mean dev Macro-F1 over every cross-lingual train/dev pair.
pub fn crosslingual_dev_score(data: &CrossData, set: &FeatureSet, config: &TrainConfig) -> Result<f64> {
    let cells: Vec<(Vec<Language>, Group)> = data
        .cells()
        .into_iter()
        .filter(|(_, g)| data.dev.contains_key(g))
        .collect();
    if cells.is_empty() {
        return Err(Error::MissingResource("no cross-lingual dev pair found".into()));
    }
    let models = data.trained(&cells, set, config)?;
    let scores = cells
        .iter()
        .map(|(s, g)| evaluate_cached(&models[s], &data.dev[g]).map(|r| r.macro_f1))
        .collect::<Result<Vec<f64>>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

impl AblationReport {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("iteration\tfamily\tscore\tdelta\taccepted\n");
        for (i, it) in self.iterations.iter().enumerate() {
            for c in &it.candidates {
                let _ = writeln!(
                    s,
                    "{}\t{}\t{:.6}\t{:+.6}\t{}",
                    i + 1,
                    c.family,
                    c.score,
                    c.delta,
                    it.accepted.contains(&c.family)
                );
            }
        }
        s
    }
}

impl fmt::Display for AblationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, it) in self.iterations.iter().enumerate() {
            writeln!(f, "iteration {} (score {:.2}): {}", i + 1, 100.0 * it.base_score, it.features.join(", "))?;
            writeln!(f, "  increasing: {}", it.accepted.join(", "))?;
            writeln!(f, "  decreasing: {}", it.rejected.join(", "))?;
        }
        write!(
            f,
            "final (score {:.2}): {}",
            100.0 * self.final_score,
            self.final_features.join(", ")
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConsistencyCounts {
    pub mwe_complex: usize,
    pub mwe_noncomplex: usize,
    pub at_least_one_irregular: usize,
    pub all_irregular: usize,
}

impl ConsistencyCounts {
    pub fn mwes(&self) -> usize {
        self.mwe_complex + self.mwe_noncomplex
    }

    fn add(&mut self, other: &ConsistencyCounts) {
        self.mwe_complex += other.mwe_complex;
        self.mwe_noncomplex += other.mwe_noncomplex;
        self.at_least_one_irregular += other.at_least_one_irregular;
        self.all_irregular += other.all_irregular;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub language: Language,
    #[serde(flatten)]
    pub counts: ConsistencyCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub min_tokens: usize,
    pub rows: Vec<ConsistencyRow>,
    pub total: ConsistencyCounts,
    /// At-least-one-irregular MWEs over all MWEs.
    pub ratio_at_least_one: f64,
    pub ratio_all: f64,
}

/// Counts of MWEs whose sub-word labels disagree with their own.
///
/// A target is an MWE when it spans at least `min_tokens` tokens. Its
/// sub-words are the other targets of the same sentence and file lying
/// strictly inside it.
pub fn analyze_consistency(datasets: &[&Dataset], min_tokens: usize) -> ConsistencyReport {
    let mut per_language: BTreeMap<Language, ConsistencyCounts> = BTreeMap::new();
    for d in datasets {
        let counts = per_language.entry(d.language).or_default();
        for (i, inst) in d.instances.iter().enumerate() {
            if target_token_count(inst) < min_tokens {
                continue;
            }
            match inst.label {
                Label::Complex => counts.mwe_complex += 1,
                Label::NonComplex => counts.mwe_noncomplex += 1,
            }
            let subwords = d.subwords_of(i);
            let differing = subwords.iter().filter(|s| s.label != inst.label).count();
            if differing > 0 {
                counts.at_least_one_irregular += 1;
            }
            if !subwords.is_empty() && differing == subwords.len() {
                counts.all_irregular += 1;
            }
        }
    }
    let mut total = ConsistencyCounts::default();
    let rows: Vec<ConsistencyRow> = per_language
        .into_iter()
        .map(|(language, counts)| {
            total.add(&counts);
            ConsistencyRow { language, counts }
        })
        .collect();
    let ratio = |x: usize| if total.mwes() == 0 { 0.0 } else { x as f64 / total.mwes() as f64 };
    ConsistencyReport {
        min_tokens,
        ratio_at_least_one: ratio(total.at_least_one_irregular),
        ratio_all: ratio(total.all_irregular),
        rows,
        total,
    }
}

/// The splits of every group in `corpus` named in `splits`.
pub fn select_datasets<'a>(corpus: &'a Corpus, splits: &[Split]) -> Vec<&'a Dataset> {
    corpus
        .datasets
        .iter()
        .filter(|((_, s), _)| splits.contains(s))
        .map(|(_, d)| d)
        .collect()
}

impl ConsistencyReport {
    pub fn row(&self, language: Language) -> Option<&ConsistencyCounts> {
        self.rows.iter().find(|r| r.language == language).map(|r| &r.counts)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("language\tC\tNC\tat_least_one_irregular\tall_irregular\n");
        let line = |s: &mut String, name: &str, c: &ConsistencyCounts| {
            let _ = writeln!(
                s,
                "{name}\t{}\t{}\t{}\t{}",
                c.mwe_complex, c.mwe_noncomplex, c.at_least_one_irregular, c.all_irregular
            );
        };
        for r in &self.rows {
            line(&mut s, r.language.code(), &r.counts);
        }
        line(&mut s, "Total", &self.total);
        s
    }
}

impl fmt::Display for ConsistencyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "MWEs of at least {} tokens", self.min_tokens)?;
        writeln!(f, "{:<8} {:>7} {:>7} {:>12} {:>12}", "", "C", "NC", ">=1 irreg", "all irreg")?;
        let line = |f: &mut fmt::Formatter<'_>, name: &str, c: &ConsistencyCounts| {
            writeln!(
                f,
                "{name:<8} {:>7} {:>7} {:>12} {:>12}",
                c.mwe_complex, c.mwe_noncomplex, c.at_least_one_irregular, c.all_irregular
            )
        };
        for r in &self.rows {
            line(f, r.language.code(), &r.counts)?;
        }
        line(f, "Total", &self.total)?;
        write!(
            f,
            ">=1 irregular: {:.1}%  all irregular: {:.1}%",
            100.0 * self.ratio_at_least_one,
            100.0 * self.ratio_all
        )
    }
}
