//! The `cwi` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or resource error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::annotate::{annotate, load_sidecar_file, Tagset};
use crate::data::{load_dataset, ColumnMap, Dataset, Genre, Language, Split};
use crate::error::Error;
use crate::experiments::{
    analyze_consistency, coefficient_table, crosslingual_dev_score, greedy_ablation, parse_class_weighting,
    parse_scaling, parse_splits, run_crosslingual, run_monolingual, select_datasets, Corpus, CorpusLayout,
    CrossData, ExperimentConfig,
};
use crate::features::{ExtractOptions, Family, FeatureExtractor, FeatureSet};
use crate::model::{LinearModel, Normalizers, TrainConfig};
use crate::pipeline::{evaluate_on, extract_dataset, train_on, Resources};
use crate::resources::load_bundle;

/// Environment variable naming the directory of default resource
/// manifests (`en.manifest`, `es.manifest`, ...).
pub const RESOURCES_ENV: &str = "CWI_RESOURCES";

#[derive(Debug, Parser)]
#[command(name = "cwi", version, about = "Complex word identification toolkit")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model on one or more dataset files of one language.
    Train(TrainArgs),
    /// Write a label and probability for every instance of a file.
    Predict(PredictArgs),
    /// Score a trained model on a labelled file.
    Evaluate(EvaluateArgs),
    /// Run an experiment grid.
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Greedy forward feature selection on cross-lingual dev scores.
    Ablate(ExperimentArgs),
    /// Count MWEs whose sub-word labels disagree with their own.
    AnalyzeConsistency(ConsistencyArgs),
    /// Print the feature vector of every instance.
    DumpFeatures(DumpArgs),
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Train and test within each dataset group.
    Mono(MonoArgs),
    /// Train on language subsets, test on unseen languages.
    Crosslingual(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Tsv,
    Json,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Language of the dataset files.
    #[arg(long)]
    language: Language,
    /// English genre recorded on loaded instances.
    #[arg(long, default_value = "none")]
    genre: Genre,
    /// Resource manifest (default: $CWI_RESOURCES/<lang>.manifest).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Token annotation sidecar.
    #[arg(long)]
    sidecar: Option<PathBuf>,
    /// Allowed tags for sidecar validation.
    #[arg(long)]
    tagset: Option<PathBuf>,
    /// Zero-based column of the binary label.
    #[arg(long)]
    label_column: Option<usize>,
    /// Minimum number of columns per row.
    #[arg(long)]
    num_columns: Option<usize>,
    /// Files start with a header line.
    #[arg(long)]
    header: bool,
    /// Report is_stop as 0/1 instead of a fraction.
    #[arg(long)]
    binary_is_stop: bool,
    /// Fail when a requested feature's optional resource is missing.
    #[arg(long)]
    strict_resources: bool,
}

#[derive(Debug, Args)]
struct TrainOptions {
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// none | inverse_frequency
    #[arg(long)]
    class_weighting: Option<String>,
    /// none | max_abs
    #[arg(long)]
    scaling: Option<String>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training files; repeat for several.
    #[arg(long = "train", required = true)]
    train: Vec<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    /// baseline, monolingual25, crosslingual5, or a comma-separated list.
    #[arg(long, default_value = "monolingual25")]
    features: String,
    #[command(flatten)]
    options: TrainOptions,
    #[arg(long, short)]
    output: PathBuf,
    /// Overwrite existing output files.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    /// Default: standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Directory for result tables and the resolved configuration.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    force: bool,
    #[command(flatten)]
    options: TrainOptions,
}

#[derive(Debug, Args)]
struct MonoArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Feature sets to run; repeat for several (default: baseline and the
    /// configured set).
    #[arg(long)]
    features: Vec<String>,
}

#[derive(Debug, Args)]
struct ConsistencyArgs {
    /// Experiment configuration file; supplies data_root and defaults.
    #[arg(long, required_unless_present = "data_root")]
    config: Option<PathBuf>,
    /// Corpus root directory.
    #[arg(long)]
    data_root: Option<PathBuf>,
    /// Minimum target length in tokens for an MWE.
    #[arg(long)]
    min_tokens: Option<usize>,
    /// Comma-separated splits to include.
    #[arg(long)]
    splits: Option<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "monolingual25")]
    features: String,
    /// Only these instance ids; repeat for several.
    #[arg(long = "id")]
    ids: Vec<String>,
    /// Mean target length used by len_tokens_norm (default: 1).
    #[arg(long)]
    mean_target_tokens: Option<f64>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(Error::io("<output>", e))
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

struct Io<'a> {
    out: &'a mut (dyn Write + Send),
    err: &'a mut (dyn Write + Send),
}

impl Io<'_> {
    fn warn(&mut self, msg: &str) {
        let _ = writeln!(self.err, "warning: {msg}");
    }
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{rendered}")
            } else {
                write!(err, "{rendered}")
            };
            return code;
        }
    };
    let mut io = Io { out, err };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .expect("thread pool");
    match pool.install(|| dispatch(cli.command, &mut io)) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(io.err, "error: {msg}");
            1
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(io.err, "error: {e}");
            2
        }
    }
}

fn dispatch(command: Command, io: &mut Io) -> CliResult {
    match command {
        Command::Train(a) => cmd_train(a, io),
        Command::Predict(a) => cmd_predict(a, io),
        Command::Evaluate(a) => cmd_evaluate(a, io),
        Command::Experiment(ExperimentCommand::Mono(a)) => cmd_mono(a, io),
        Command::Experiment(ExperimentCommand::Crosslingual(a)) => cmd_crosslingual(a, io),
        Command::Ablate(a) => cmd_ablate(a, io),
        Command::AnalyzeConsistency(a) => cmd_consistency(a, io),
        Command::DumpFeatures(a) => cmd_dump(a, io),
    }
}

fn feature_set(spec: &str) -> CliResult<FeatureSet> {
    FeatureSet::parse(spec).map_err(|e| Failure::Usage(e.to_string()))
}

fn apply_train_options(config: &mut TrainConfig, o: &TrainOptions) -> CliResult {
    if let Some(v) = o.l2 {
        config.l2_strength = v;
    }
    if let Some(v) = o.max_iterations {
        config.max_iterations = v;
    }
    if let Some(v) = o.tolerance {
        config.tolerance = v;
    }
    if let Some(v) = &o.class_weighting {
        config.class_weighting = parse_class_weighting(v).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(v) = &o.scaling {
        config.scaling = parse_scaling(v).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn check_output(path: &Path, force: bool) -> CliResult {
    if path.exists() && !force {
        return Err(Failure::Usage(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn write_output(path: &Path, contents: &str, force: bool) -> CliResult {
    check_output(path, force)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

impl DataArgs {
    fn columns(&self) -> ColumnMap {
        let mut c = ColumnMap::default();
        if let Some(l) = self.label_column {
            c.label = l;
        }
        c.columns = self.num_columns.unwrap_or(c.columns.max(c.label + 1));
        c.has_header = self.header;
        c
    }

    fn manifest(&self) -> CliResult<PathBuf> {
        if let Some(p) = &self.manifest {
            return Ok(p.clone());
        }
        match std::env::var_os(RESOURCES_ENV) {
            Some(dir) => Ok(PathBuf::from(dir).join(format!("{}.manifest", self.language.code().to_lowercase()))),
            None => Err(Failure::Usage(format!(
                "no resource manifest: pass --manifest or set {RESOURCES_ENV}"
            ))),
        }
    }

    fn resources(&self, io: &mut Io) -> CliResult<Resources> {
        let bundle = load_bundle(&self.manifest()?)?;
        if bundle.language != self.language {
            return Err(Error::LanguageMismatch {
                instance: self.language.to_string(),
                bundle: bundle.language.to_string(),
            }
            .into());
        }
        let tagset = self.tagset.as_deref().map(Tagset::load).transpose()?;
        let sidecar = self.sidecar.as_deref().map(|p| load_sidecar_file(p, tagset.as_ref())).transpose()?;
        if let Some(table) = &sidecar {
            for w in &table.warnings {
                io.warn(w);
            }
        }
        let mut resources = Resources {
            options: ExtractOptions {
                binary_is_stop: self.binary_is_stop,
                strict_resources: self.strict_resources,
                ..Default::default()
            },
            ..Default::default()
        };
        resources.insert(bundle, sidecar);
        Ok(resources)
    }

    fn load(&self, path: &Path, split: Split) -> CliResult<Dataset> {
        Ok(load_dataset(path, &self.columns(), self.language, self.genre, split)?)
    }
}

fn warn_degraded(io: &mut Io, resources: &Resources, language: Language, set: &FeatureSet) -> CliResult {
    let degraded = resources.degraded(language, set)?;
    if !degraded.is_empty() {
        io.warn(&format!(
            "degraded mode, features computed without their resources: {}",
            degraded.join(", ")
        ));
    }
    Ok(())
}

fn cmd_train(a: TrainArgs, io: &mut Io) -> CliResult {
    let set = feature_set(&a.features)?;
    let mut config = TrainConfig::default();
    apply_train_options(&mut config, &a.options)?;
    check_output(&a.output, a.force)?;
    let resources = a.data.resources(io)?;
    warn_degraded(io, &resources, a.data.language, &set)?;
    let datasets = a
        .train
        .iter()
        .map(|p| a.data.load(p, Split::Train))
        .collect::<CliResult<Vec<_>>>()?;
    let refs: Vec<&Dataset> = datasets.iter().collect();
    let model = train_on(&refs, &resources, &set, &config)?;
    write_output(&a.output, &model.to_text(), a.force)?;
    writeln!(
        io.out,
        "trained on {} instances: {} features, {} iterations, converged {}, loss {:.6}",
        datasets.iter().map(Dataset::len).sum::<usize>(),
        model.index.dimension(),
        model.stats.iterations,
        model.stats.converged,
        model.stats.final_loss
    )?;
    Ok(())
}

fn model_set(model: &LinearModel) -> FeatureSet {
    model
        .feature_set
        .clone()
        .unwrap_or_else(|| FeatureSet::new("model", Family::ALL))
}

fn cmd_predict(a: PredictArgs, io: &mut Io) -> CliResult {
    if let Some(o) = &a.output {
        check_output(o, a.force)?;
    }
    let model = LinearModel::load(&a.model)?;
    let resources = a.data.resources(io)?;
    let set = model_set(&model);
    warn_degraded(io, &resources, a.data.language, &set)?;
    let dataset = a.data.load(&a.input, Split::Test)?;
    let vectors = extract_dataset(&dataset, &resources, &set, &model.normalizers)?;
    let mut s = String::from("id\ttarget\tlabel\tprobability\n");
    for (inst, v) in dataset.instances.iter().zip(&vectors) {
        let p = model.predict_proba(v);
        s.push_str(&format!(
            "{}\t{}\t{}\t{:.6}\n",
            inst.id,
            inst.target,
            u8::from(model.predict(v).is_complex()),
            p
        ));
    }
    match &a.output {
        Some(o) => write_output(o, &s, a.force),
        None => Ok(io.out.write_all(s.as_bytes())?),
    }
}

fn cmd_evaluate(a: EvaluateArgs, io: &mut Io) -> CliResult {
    let model = LinearModel::load(&a.model)?;
    let resources = a.data.resources(io)?;
    warn_degraded(io, &resources, a.data.language, &model_set(&model))?;
    let dataset = a.data.load(&a.input, Split::Test)?;
    let report = evaluate_on(&model, &dataset, &resources)?;
    match a.format {
        Format::Json => writeln!(io.out, "{}", report.to_json())?,
        _ => writeln!(io.out, "{report}")?,
    }
    Ok(())
}

struct Loaded {
    config: ExperimentConfig,
    corpus: Corpus,
    resources: Resources,
}

fn load_experiment(a: &ExperimentArgs, io: &mut Io) -> CliResult<Loaded> {
    let mut config = ExperimentConfig::load(&a.config)?;
    apply_train_options(&mut config.train, &a.options)?;
    let (resources, warnings) = config.load_resources()?;
    for w in warnings {
        io.warn(&w);
    }
    let corpus = Corpus::load(&config.layout(), &ColumnMap::default())?;
    if corpus.is_empty() {
        return Err(Error::MissingResource(format!("no dataset files under {}", config.data_root.display())).into());
    }
    Ok(Loaded {
        config,
        corpus,
        resources,
    })
}

fn warn_all_degraded(io: &mut Io, loaded: &Loaded, set: &FeatureSet) -> CliResult {
    for &lang in loaded.resources.languages.keys() {
        warn_degraded(io, &loaded.resources, lang, set)?;
    }
    Ok(())
}

/// Write `<stem>.tsv`, `<stem>.json` and the resolved config.
fn save_results(
    dir: Option<&Path>,
    force: bool,
    config: &ExperimentConfig,
    tables: &[(String, String, String)],
) -> CliResult {
    let Some(dir) = dir else { return Ok(()) };
    for (stem, _, _) in tables {
        check_output(&dir.join(format!("{stem}.tsv")), force)?;
    }
    for (stem, tsv, json) in tables {
        write_output(&dir.join(format!("{stem}.tsv")), tsv, force)?;
        write_output(&dir.join(format!("{stem}.json")), json, force)?;
    }
    write_output(&dir.join("config.resolved"), &config.to_text(), true)
}

fn cmd_mono(a: MonoArgs, io: &mut Io) -> CliResult {
    let loaded = load_experiment(&a.common, io)?;
    let sets: Vec<FeatureSet> = if a.features.is_empty() {
        vec![FeatureSet::baseline(), loaded.config.feature_set.clone()]
    } else {
        a.features.iter().map(|s| feature_set(s)).collect::<CliResult<_>>()?
    };
    let mut outputs = Vec::new();
    for set in &sets {
        warn_all_degraded(io, &loaded, set)?;
        let table = run_monolingual(&loaded.corpus, &loaded.resources, set, &loaded.config.train)?;
        writeln!(io.out, "{table}\n")?;
        outputs.push((format!("mono_{}", set.name), table.to_tsv(), to_json(&table)));
    }
    save_results(a.common.output_dir.as_deref(), a.common.force, &loaded.config, &outputs)
}

fn cmd_crosslingual(a: ExperimentArgs, io: &mut Io) -> CliResult {
    let loaded = load_experiment(&a, io)?;
    let set = FeatureSet::crosslingual();
    warn_all_degraded(io, &loaded, &set)?;
    let data = CrossData::build(&loaded.corpus, &loaded.resources, &set)?;
    let table = run_crosslingual(&data, &set, &loaded.config.train)?;
    writeln!(io.out, "{table}\n")?;
    let langs: Vec<Language> = [Language::En, Language::De, Language::Es]
        .into_iter()
        .filter(|l| data.has_training(&[*l]))
        .collect();
    let coefs = coefficient_table(&data, &langs, &set, &loaded.config.train)?;
    writeln!(io.out, "{coefs}")?;
    save_results(
        a.output_dir.as_deref(),
        a.force,
        &loaded.config,
        &[
            ("crosslingual".into(), table.to_tsv(), to_json(&table)),
            ("coefficients".into(), coefs.to_tsv(), to_json(&coefs)),
        ],
    )
}

fn cmd_ablate(a: ExperimentArgs, io: &mut Io) -> CliResult {
    let loaded = load_experiment(&a, io)?;
    let all = FeatureSet::monolingual();
    warn_all_degraded(io, &loaded, &all)?;
    let data = CrossData::build(&loaded.corpus, &loaded.resources, &all)?;
    let seed = FeatureSet::new("seed", [Family::LenTokens]);
    let candidates: Vec<Family> = Family::ALL.into_iter().filter(|f| *f != Family::LenTokens).collect();
    let train = loaded.config.train.clone();
    let report = greedy_ablation(&seed, &candidates, |set| crosslingual_dev_score(&data, set, &train))?;
    writeln!(io.out, "{report}")?;
    save_results(
        a.output_dir.as_deref(),
        a.force,
        &loaded.config,
        &[("ablation".into(), report.to_tsv(), to_json(&report))],
    )
}

fn cmd_consistency(a: ConsistencyArgs, io: &mut Io) -> CliResult {
    let mut config = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(root) = &a.data_root {
        config.data_root = root.clone();
    }
    if let Some(n) = a.min_tokens {
        if n == 0 {
            return Err(Failure::Usage("--min-tokens must be at least 1".into()));
        }
        config.min_mwe_tokens = n;
    }
    if let Some(s) = &a.splits {
        config.consistency_splits = parse_splits(s).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let corpus = Corpus::load(&CorpusLayout::new(&config.data_root), &ColumnMap::default())?;
    if corpus.is_empty() {
        return Err(Error::MissingResource(format!("no dataset files under {}", config.data_root.display())).into());
    }
    let datasets = select_datasets(&corpus, &config.consistency_splits);
    let report = analyze_consistency(&datasets, config.min_mwe_tokens);
    match a.format {
        Format::Text => writeln!(io.out, "{report}")?,
        Format::Tsv => write!(io.out, "{}", report.to_tsv())?,
        Format::Json => write!(io.out, "{}", to_json(&report))?,
    }
    save_results(
        a.output_dir.as_deref(),
        a.force,
        &config,
        &[("consistency".into(), report.to_tsv(), to_json(&report))],
    )
}

#[derive(Serialize)]
struct Dumped<'a> {
    id: &'a str,
    target: &'a str,
    features: &'a crate::features::FeatureVector,
}

fn cmd_dump(a: DumpArgs, io: &mut Io) -> CliResult {
    let set = feature_set(&a.features)?;
    let normalizers = match a.mean_target_tokens {
        Some(m) if m > 0.0 && m.is_finite() => Normalizers { mean_target_tokens: m },
        Some(_) => return Err(Failure::Usage("--mean-target-tokens must be positive".into())),
        None => Normalizers::identity(),
    };
    let resources = a.data.resources(io)?;
    warn_degraded(io, &resources, a.data.language, &set)?;
    let dataset = a.data.load(&a.input, Split::Test)?;
    let res = resources.get(a.data.language)?;
    let extractor = FeatureExtractor::with_options(&res.bundle, resources.options.clone());
    let mut rows = Vec::new();
    for inst in &dataset.instances {
        if !a.ids.is_empty() && !a.ids.contains(&inst.id) {
            continue;
        }
        let sentence = annotate(&inst.sentence, res.sidecar.as_ref());
        rows.push((inst, extractor.extract(inst, &sentence, &set, &normalizers)?));
    }
    match a.format {
        Format::Json => {
            let dumped: Vec<Dumped> = rows
                .iter()
                .map(|(i, v)| Dumped {
                    id: &i.id,
                    target: &i.target,
                    features: v,
                })
                .collect();
            write!(io.out, "{}", to_json(&dumped))?;
        }
        _ => {
            writeln!(io.out, "id\ttarget\tfeature\tvalue")?;
            for (inst, v) in &rows {
                for (name, value) in v.iter() {
                    writeln!(io.out, "{}\t{}\t{name}\t{value}", inst.id, inst.target)?;
                }
            }
        }
    }
    Ok(())
}
