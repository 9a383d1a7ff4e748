//! Glue between datasets, per-language resources, features and the model.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::annotate::{annotate, SidecarTable};
use crate::data::{Dataset, Label, Language};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::features::{ExtractOptions, FeatureExtractor, FeatureSet, FeatureVector};
use crate::model::{train, LinearModel, Normalizers, TrainConfig};
use crate::resources::ResourceBundle;

/// Lookup assets and optional token annotations for one language.
#[derive(Debug, Clone)]
pub struct LanguageResources {
    pub bundle: ResourceBundle,
    pub sidecar: Option<SidecarTable>,
}

#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub languages: BTreeMap<Language, LanguageResources>,
    pub options: ExtractOptions,
}

impl Resources {
    pub fn insert(&mut self, bundle: ResourceBundle, sidecar: Option<SidecarTable>) {
        self.languages.insert(bundle.language, LanguageResources { bundle, sidecar });
    }

    pub fn get(&self, language: Language) -> Result<&LanguageResources> {
        self.languages
            .get(&language)
            .ok_or_else(|| Error::MissingResource(format!("resource manifest for {language}")))
    }

    /// Human-readable names of what a run over `language` lacks.
    pub fn degraded(&self, language: Language, set: &FeatureSet) -> Result<Vec<String>> {
        let res = self.get(language)?;
        let extractor = FeatureExtractor::with_options(&res.bundle, self.options.clone());
        Ok(extractor
            .degraded_families(set, res.sidecar.is_some())
            .into_iter()
            .map(|f| format!("{language}:{}", f.name()))
            .collect())
    }
}

/// Feature vectors for every instance, in dataset order.
pub fn extract_dataset(
    dataset: &Dataset,
    resources: &Resources,
    set: &FeatureSet,
    normalizers: &Normalizers,
) -> Result<Vec<FeatureVector>> {
    let res = resources.get(dataset.language)?;
    let extractor = FeatureExtractor::with_options(&res.bundle, resources.options.clone());
    dataset
        .instances
        .par_iter()
        .map(|inst| {
            let sentence = annotate(&inst.sentence, res.sidecar.as_ref());
            extractor.extract(inst, &sentence, set, normalizers)
        })
        .collect()
}

pub fn labels(dataset: &Dataset) -> Vec<Label> {
    dataset.instances.iter().map(|i| i.label).collect()
}

/// Train on the concatenation of `datasets`.
pub fn train_on(
    datasets: &[&Dataset],
    resources: &Resources,
    set: &FeatureSet,
    config: &TrainConfig,
) -> Result<LinearModel> {
    let normalizers = Normalizers::fit(datasets.iter().flat_map(|d| &d.instances));
    let mut vectors = Vec::new();
    let mut gold = Vec::new();
    for d in datasets {
        vectors.extend(extract_dataset(d, resources, set, &normalizers)?);
        gold.extend(labels(d));
    }
    let mut model = train(&vectors, &gold, config)?;
    model.normalizers = normalizers;
    model.feature_set = Some(set.clone());
    Ok(model)
}

/// Score a trained model on `dataset`. The model's own feature set is used.
pub fn evaluate_on(model: &LinearModel, dataset: &Dataset, resources: &Resources) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let set = model
        .feature_set
        .clone()
        .unwrap_or_else(|| FeatureSet::new("model", crate::features::Family::ALL));
    let vectors = extract_dataset(dataset, resources, &set, &model.normalizers)?;
    let pred: Vec<Label> = vectors.iter().map(|v| model.predict(v)).collect();
    let mut report = evaluate(&labels(dataset), &pred)?;
    report.degraded = resources.degraded(dataset.language, &set)?;
    Ok(report)
}

/// Vectors for one dataset, extracted once for a superset of families with
/// identity normalizers and projected onto smaller sets on demand.
#[derive(Debug, Clone)]
pub struct CachedDataset {
    pub language: Language,
    pub vectors: Vec<FeatureVector>,
    pub labels: Vec<Label>,
    target_tokens: Vec<f64>,
}

impl CachedDataset {
    pub fn build(dataset: &Dataset, resources: &Resources, superset: &FeatureSet) -> Result<Self> {
        let vectors = extract_dataset(dataset, resources, superset, &Normalizers::identity())?;
        let target_tokens = dataset
            .instances
            .iter()
            .map(|i| crate::features::target_token_count(i) as f64)
            .collect();
        Ok(CachedDataset {
            language: dataset.language,
            vectors,
            labels: labels(dataset),
            target_tokens,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

pub fn train_cached(datasets: &[&CachedDataset], set: &FeatureSet, config: &TrainConfig) -> Result<LinearModel> {
    let (sum, n) = datasets
        .iter()
        .flat_map(|d| &d.target_tokens)
        .fold((0.0, 0usize), |(s, n), t| (s + t, n + 1));
    let normalizers = if n == 0 || sum == 0.0 {
        Normalizers::identity()
    } else {
        Normalizers {
            mean_target_tokens: sum / n as f64,
        }
    };
    let vectors: Vec<FeatureVector> = datasets
        .iter()
        .flat_map(|d| d.vectors.iter().map(|v| v.project(set, &normalizers)))
        .collect();
    let gold: Vec<Label> = datasets.iter().flat_map(|d| d.labels.iter().copied()).collect();
    let mut model = train(&vectors, &gold, config)?;
    model.normalizers = normalizers;
    model.feature_set = Some(set.clone());
    Ok(model)
}

pub fn evaluate_cached(model: &LinearModel, dataset: &CachedDataset) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let set = model.feature_set.clone().unwrap_or_else(FeatureSet::monolingual);
    let pred: Vec<Label> = dataset
        .vectors
        .iter()
        .map(|v| model.predict(&v.project(&set, &model.normalizers)))
        .collect();
    evaluate(&dataset.labels, &pred)
}
