//! The `genregraph` command line: `synth`, `extract`, `train`, `evaluate`
//! and `recommend`.
//!
//! Exit codes: 0 on success, 1 on internal failures (including writing
//! outputs and training divergence), 2 when the inputs are invalid.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, MfccConfig};
use crate::dataset::{extract_features, song_seed, DatasetError, DatasetManifest, ManifestEntry};
use crate::graph::Attachment;
use crate::nn::{load_weights, save_weights, EmbeddingModel, Variant};
use crate::recommend::{
    build_catalog, embed_unseen, evaluate_model, recommend, ExperimentConfig, ExperimentReport, PreparedData,
    RecommendationList,
};
use crate::store::FeatureStore;
use crate::synth::{generate, SyntheticSpec};
use crate::train::{train_model, InferenceContext, TrainConfig};
use crate::{Error, Genre, TOP_K};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    fn input(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("{context}: {e}"))
    }

    fn output(context: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Internal(format!("{context}: {e}"))
    }
}

/// Classifies a library error raised while processing validated inputs.
fn classify(context: &str, e: impl Into<Error>) -> CliError {
    let e = e.into();
    let internal = match &e {
        Error::Io(_) | Error::Train(crate::train::TrainError::Diverged { .. }) => true,
        Error::Recommend(crate::recommend::RecommendError::Train(crate::train::TrainError::Diverged { .. })) => true,
        Error::Dataset(d) => !d.is_validation(),
        _ => false,
    };
    if internal {
        CliError::output(context, e)
    } else {
        CliError::input(context, e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// JSON configuration file. Every field is optional; `--seed` overrides
/// `seed`, which in turn replaces the seeds inside `train` and `synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub mfcc: MfccConfig,
    pub train: TrainConfig,
    pub synth: SyntheticSpec,
    pub attachment: Attachment,
    pub queries_per_genre: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            mfcc: MfccConfig::default(),
            train: TrainConfig::default(),
            synth: SyntheticSpec::default(),
            attachment: Attachment::Oracle,
            queries_per_genre: 10,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::input(path.display(), e))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("config {}", path.display()), e))
    }

    /// Loads the file (if any) and applies the seed override.
    pub fn resolve(path: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.train.seed = cfg.seed;
        cfg.synth.seed = cfg.seed;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "genregraph", version, about = "Graph-refined MFCC music genre recommendation")]
pub struct Cli {
    /// JSON config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labelled WAV corpus and its manifest.
    Synth(SynthArgs),
    /// Extract one MFCC vector per manifest entry into a feature store.
    Extract(ExtractArgs),
    /// Train models on the training split of a feature store.
    Train(TrainArgs),
    /// Score trained models on held-out songs.
    Evaluate(EvaluateArgs),
    /// Print the top-10 recommendations for one song.
    Recommend(RecommendArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long)]
    pub genres: Option<usize>,
    #[arg(long)]
    pub songs_per_genre: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long, value_name = "PATH")]
    pub manifest: PathBuf,
    /// Output directory; the store is written to `features.grmf`.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Plain,
    Gcn,
    Sage,
    All,
}

impl VariantArg {
    fn variants(self) -> Vec<Variant> {
        match self {
            VariantArg::Plain => vec![Variant::Plain],
            VariantArg::Gcn => vec![Variant::Gcn],
            VariantArg::Sage => vec![Variant::Sage],
            VariantArg::All => Variant::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::All)]
    pub variant: VariantArg,
    /// Output directory for `<variant>.grmw`, loss CSVs and run records.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AttachmentArg {
    Oracle,
    FeatureKnn,
}

#[derive(Debug, Args)]
pub struct AttachmentOpts {
    /// How songs outside the training graph are connected.
    #[arg(long, value_enum)]
    pub attachment: Option<AttachmentArg>,
    /// Neighbor count for feature-knn attachment.
    #[arg(long, default_value_t = 10)]
    pub knn_k: usize,
}

impl AttachmentOpts {
    fn resolve(&self, cfg: &Config) -> Attachment {
        match self.attachment {
            None => cfg.attachment,
            Some(AttachmentArg::Oracle) => Attachment::Oracle,
            Some(AttachmentArg::FeatureKnn) => Attachment::FeatureKnn { k: self.knn_k },
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    /// One or more weight files, one per variant.
    #[arg(long, value_name = "PATH", num_args = 1.., required = true)]
    pub weights: Vec<PathBuf>,
    #[command(flatten)]
    pub attach: AttachmentOpts,
    #[arg(long)]
    pub queries_per_genre: Option<usize>,
    /// Output directory for `report.json` and `report.txt`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecommendArgs {
    #[arg(long, value_name = "PATH")]
    pub store: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub weights: PathBuf,
    /// Song id from the store.
    #[arg(long, conflicts_with = "audio", required_unless_present = "audio")]
    pub song: Option<String>,
    /// WAV file to use as the query.
    #[arg(long, value_name = "PATH")]
    pub audio: Option<PathBuf>,
    /// Genre of `--audio`, needed for oracle attachment.
    #[arg(long)]
    pub genre: Option<Genre>,
    #[command(flatten)]
    pub attach: AttachmentOpts,
    /// Also write the list as `recommendations.json` here.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

/// Settings saved next to each weight file so evaluation reproduces the
/// training split and sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub train: TrainConfig,
    pub genres: Vec<Genre>,
    pub songs: usize,
}

fn run_record_path(weights: &Path) -> PathBuf {
    weights.with_extension("run.json")
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::output(dir.display(), e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::output(path.display(), e))
}

fn load_store(path: &Path) -> CliResult<FeatureStore> {
    let store = FeatureStore::load(path).map_err(|e| CliError::input(path.display(), e))?;
    if store.is_empty() {
        return Err(CliError::Validation(format!("{}: feature store is empty", path.display())));
    }
    Ok(store)
}

fn genre_set(store: &FeatureStore) -> Vec<Genre> {
    store.labels().into_iter().collect::<BTreeSet<_>>().into_iter().collect()
}

pub fn cmd_synth(cfg: &Config, args: &SynthArgs) -> CliResult<DatasetManifest> {
    let mut spec = cfg.synth.clone();
    if let Some(g) = args.genres {
        spec.genres = g;
    }
    if let Some(n) = args.songs_per_genre {
        spec.songs_per_genre = n;
    }
    spec.validate().map_err(|e| CliError::input("synth", e))?;
    ensure_dir(&args.out)?;
    generate(&spec, &args.out).map_err(|e| classify("synth", e))
}

pub fn cmd_extract(cfg: &Config, args: &ExtractArgs) -> CliResult<PathBuf> {
    let manifest = DatasetManifest::load(&args.manifest).map_err(|e| match e {
        DatasetError::Io(io) => CliError::input(args.manifest.display(), io),
        other => CliError::input(args.manifest.display(), other),
    })?;
    let store = extract_features(&manifest, &cfg.mfcc, cfg.seed).map_err(|e| classify("extract", e))?;
    ensure_dir(&args.out)?;
    let path = args.out.join("features.grmf");
    store.save(&path).map_err(|e| CliError::output(path.display(), e))?;
    Ok(path)
}

/// Trains each requested variant; returns the weight file paths.
pub fn cmd_train(cfg: &Config, args: &TrainArgs) -> CliResult<Vec<PathBuf>> {
    let store = load_store(&args.store)?;
    cfg.train.validate().map_err(|e| CliError::input("config", e))?;
    let data = PreparedData::new(&store, cfg.seed).map_err(|e| classify("train", e))?;
    ensure_dir(&args.out)?;
    let mut written = Vec::new();
    for variant in args.variant.variants() {
        let tcfg = cfg.train.clone().with_variant(variant);
        let ctx = InferenceContext::from_config(&tcfg, cfg.attachment);
        let trained = train_model(&data.graph, &data.train_features, &tcfg, Some(&data.held_out(ctx)))
            .map_err(|e| classify(&format!("train {variant}"), e))?;
        let weights = args.out.join(format!("{variant}.grmw"));
        save_weights(&trained.model, &weights).map_err(|e| CliError::output(weights.display(), e))?;
        write_file(&args.out.join(format!("{variant}_loss.csv")), trained.classifier_curve.to_csv())?;
        if let Some(curve) = &trained.embed_curve {
            write_file(&args.out.join(format!("{variant}_embed_loss.csv")), curve.to_csv())?;
        }
        let record = RunRecord {
            train: tcfg,
            genres: genre_set(&store),
            songs: store.len(),
        };
        write_file(&run_record_path(&weights), serde_json::to_string_pretty(&record).expect("serializable"))?;
        written.push(weights);
    }
    Ok(written)
}

/// Loads a weight file and the training settings recorded next to it,
/// checking both against the store.
fn load_model(cfg: &Config, store: &FeatureStore, path: &Path) -> CliResult<(EmbeddingModel, TrainConfig)> {
    let model = load_weights(path).map_err(|e| CliError::input(path.display(), e))?;
    let record_path = run_record_path(path);
    let train = if record_path.is_file() {
        let text = std::fs::read_to_string(&record_path).map_err(|e| CliError::input(record_path.display(), e))?;
        let record: RunRecord =
            serde_json::from_str(&text).map_err(|e| CliError::input(record_path.display(), e))?;
        if record.genres != genre_set(store) || record.songs != store.len() {
            return Err(CliError::Validation(format!(
                "{} was trained on {} songs of genres {:?}; the store has {} songs of genres {:?}",
                path.display(),
                record.songs,
                record.genres,
                store.len(),
                genre_set(store)
            )));
        }
        record.train
    } else {
        cfg.train.clone()
    };
    if train.variant != model.variant {
        return Err(CliError::Validation(format!(
            "{}: weights hold a {} model but its run record says {}",
            path.display(),
            model.variant,
            train.variant
        )));
    }
    Ok((model, train))
}

pub fn cmd_evaluate(cfg: &Config, args: &EvaluateArgs) -> CliResult<ExperimentReport> {
    let store = load_store(&args.store)?;
    let attachment = args.attach.resolve(cfg);
    let queries_per_genre = args.queries_per_genre.unwrap_or(cfg.queries_per_genre);
    if queries_per_genre == 0 {
        return Err(CliError::Validation("queries_per_genre must be at least 1".into()));
    }
    if let Attachment::FeatureKnn { k: 0 } = attachment {
        return Err(CliError::Validation("knn_k must be at least 1".into()));
    }
    let mut reports = Vec::new();
    let mut seen = BTreeSet::new();
    let mut seed = None;
    for path in &args.weights {
        let (model, train) = load_model(cfg, &store, path)?;
        if !seen.insert(model.variant) {
            return Err(CliError::Validation(format!("more than one {} model given", model.variant)));
        }
        if *seed.get_or_insert(train.seed) != train.seed {
            return Err(CliError::Validation("weight files come from runs with different seeds".into()));
        }
        let data = PreparedData::new(&store, train.seed).map_err(|e| classify("evaluate", e))?;
        let ecfg = ExperimentConfig {
            train,
            attachment,
            queries_per_genre,
        };
        reports.push(evaluate_model(&model, &data, &ecfg).map_err(|e| classify("evaluate", e))?);
    }
    reports.sort_by_key(|r| r.variant);
    let report = ExperimentReport {
        seed: seed.unwrap_or(cfg.seed),
        reports,
    };
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_file(&out.join("report.json"), report.to_json())?;
        write_file(&out.join("report.txt"), report.to_text())?;
    }
    Ok(report)
}

pub fn cmd_recommend(cfg: &Config, args: &RecommendArgs) -> CliResult<RecommendationList> {
    let store = load_store(&args.store)?;
    let (model, train) = load_model(cfg, &store, &args.weights)?;
    let attachment = args.attach.resolve(cfg);
    let ctx = InferenceContext::from_config(&train, attachment);
    let data = PreparedData::new(&store, train.seed).map_err(|e| classify("recommend", e))?;
    let catalog = build_catalog(&model, &data, &train).map_err(|e| classify("recommend", e))?;

    let (query_id, query) = if let Some(id) = &args.song {
        if let Some(emb) = catalog.get(id) {
            (id.clone(), emb.to_vec())
        } else {
            let pos = data
                .held_out_ids
                .iter()
                .position(|h| h == id)
                .ok_or_else(|| CliError::Validation(format!("unknown song id '{id}'")))?;
            let emb = embed_unseen(
                &model,
                &data,
                id,
                data.held_out_features.row(pos),
                Some(data.held_out_labels[pos]),
                &ctx,
            )
            .map_err(|e| classify("recommend", e))?;
            (id.clone(), emb)
        }
    } else {
        let path = args.audio.as_ref().expect("clap requires --song or --audio");
        let id = ManifestEntry {
            path: path.to_string_lossy().into_owned(),
            genre: Genre::Pop,
            split: None,
        }
        .song_id();
        if attachment == Attachment::Oracle && args.genre.is_none() && model.variant != Variant::Plain {
            return Err(CliError::Validation(
                "oracle attachment of an audio file needs --genre (or use --attachment feature-knn)".into(),
            ));
        }
        let clip = read_wav(path).map_err(|e| CliError::input(path.display(), e))?;
        let mfcc = crate::audio::extract_song_features(&clip, &cfg.mfcc, song_seed(train.seed, &id))
            .map_err(|e| CliError::input(path.display(), e))?;
        let emb = embed_unseen(&model, &data, &id, mfcc.values(), args.genre, &ctx)
            .map_err(|e| classify("recommend", e))?;
        (id, emb)
    };
    let list = recommend(&query_id, &query, &catalog, TOP_K).map_err(|e| classify("recommend", e))?;
    if let Some(out) = &args.out {
        ensure_dir(out)?;
        write_file(
            &out.join("recommendations.json"),
            serde_json::to_string_pretty(&list).expect("serializable"),
        )?;
    }
    Ok(list)
}

/// Rows of `rank  song_id  genre  distance`.
pub fn format_recommendations(list: &RecommendationList, store: &FeatureStore) -> String {
    let genre_of: std::collections::HashMap<&str, Genre> =
        store.records().iter().map(|r| (r.song_id.as_str(), r.genre)).collect();
    let mut out = format!("{:<5} {:<32} {:<14} {}\n", "rank", "song_id", "genre", "distance");
    for (i, item) in list.items.iter().enumerate() {
        let genre = genre_of.get(item.song_id.as_str()).map_or("?", |g| g.name());
        out.push_str(&format!("{:<5} {:<32} {:<14} {:.6}\n", i + 1, item.song_id, genre, item.distance));
    }
    out
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = Config::resolve(cli.config.as_deref(), cli.seed)?;
    match &cli.command {
        Command::Synth(a) => {
            let m = cmd_synth(&cfg, a)?;
            println!("wrote {} songs and {}", m.len(), a.out.join("manifest.csv").display());
        }
        Command::Extract(a) => {
            let path = cmd_extract(&cfg, a)?;
            println!("wrote {}", path.display());
        }
        Command::Train(a) => {
            for p in cmd_train(&cfg, a)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Evaluate(a) => {
            let report = cmd_evaluate(&cfg, a)?;
            print!("{}", report.to_text());
        }
        Command::Recommend(a) => {
            let list = cmd_recommend(&cfg, a)?;
            let store = load_store(&a.store)?;
            print!("{}", format_recommendations(&list, &store));
        }
    }
    Ok(())
}
