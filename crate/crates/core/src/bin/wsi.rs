use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use wsi_core::clustering::{
    AffinityConfig, AgglomerativeConfig, ClusteringConfig, Linkage, Metric, Preference,
};
use wsi_core::embeddings::{norm_frequency_report, write_norm_report};
use wsi_core::evaluation::confusion_matrices;
use wsi_core::mt::load_translations;
use wsi_core::pipeline::cluster_vectors;
use wsi_core::search::{
    export_k_linkage_sweep, export_power_heatmap, write_heatmap_csv, write_sweep_csv,
};
use wsi_core::text::tokenize;
use wsi_core::vectorizer::{vectorize_all, write_vectors};
use wsi_core::{
    build_chi2, build_idf, evaluate, grid_search, label_by_translation, load_embeddings,
    parse_dataset, write_predictions, Chi2Table, Dataset, EmbeddingFormat, EmbeddingModel, Error,
    FrequencyTable, IdfTable, SearchSpace, Stemmer, WeightingConfig,
};

#[derive(Parser)]
#[command(
    name = "wsi",
    version,
    about = "Word sense induction with weighted embedding averages"
)]
struct Cli {
    /// Random seed (only the norm report samples randomly)
    #[arg(
        long,
        global = true,
        default_value_t = 0,
        help_heading = "Global options"
    )]
    seed: u64,

    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(
        long,
        global = true,
        default_value_t = 0,
        help_heading = "Global options"
    )]
    jobs: usize,

    /// Log progress to standard error
    #[arg(short, long, global = true, help_heading = "Global options")]
    verbose: bool,

    /// Only log errors
    #[arg(
        short,
        long,
        global = true,
        conflicts_with = "verbose",
        help_heading = "Global options"
    )]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an idf table from a background corpus, one document per line
    BuildIdf {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute chi-square weights of (target, context word) pairs
    BuildChi2 {
        /// Tab-separated contexts with gold_sense_id
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster the contexts of every target word and write predictions
    Cluster(ClusterArgs),
    /// Score predicted senses against gold senses with ARI
    Evaluate {
        /// Dataset with gold_sense_id filled
        #[arg(long)]
        gold: PathBuf,
        /// Dataset with predict_sense_id filled
        #[arg(long)]
        pred: PathBuf,
        /// Also write one confusion matrix CSV per word into this directory
        #[arg(long)]
        confusion_dir: Option<PathBuf>,
    },
    /// Search weighting powers and clustering hyperparameters
    GridSearch(GridSearchArgs),
    /// Sample words and report their frequency and vector norm
    NormReport {
        #[command(flatten)]
        embeddings: EmbeddingArgs,
        /// TSV of word<TAB>count
        #[arg(long)]
        freqs: PathBuf,
        #[arg(long, default_value_t = 1000)]
        sample_size: usize,
        /// Defaults to standard output
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label contexts by the majority translation of the target word
    MtLabel {
        /// TSV of context_id<TAB>translation[,translation...]
        #[arg(long)]
        translations: PathBuf,
        #[arg(long, value_enum, default_value_t = StemmerArg::Porter)]
        stemmer: StemmerArg,
        /// Dataset to fill; without it labels are printed as id<TAB>label
        #[arg(long, requires = "out")]
        dataset: Option<PathBuf>,
        #[arg(long, requires = "dataset")]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EmbeddingArgs {
    /// word2vec model in text or binary format
    #[arg(long)]
    embeddings: PathBuf,
    /// Defaults to binary for .bin files and text otherwise
    #[arg(long, value_parser = parse_format)]
    format: Option<EmbeddingFormat>,
}

#[derive(Args)]
struct WeightSources {
    #[command(flatten)]
    embeddings: EmbeddingArgs,
    /// Tab-separated contexts; gold senses feed the chi2 table and scoring
    #[arg(long)]
    dataset: PathBuf,
    /// idf table from build-idf; computed from the dataset contexts if absent
    #[arg(long)]
    idf: Option<PathBuf>,
    /// chi2 table from build-chi2; computed from the dataset if absent
    #[arg(long)]
    chi2: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Agglomerative,
    AffinityPropagation,
}

#[derive(Clone, Copy, ValueEnum)]
enum StemmerArg {
    Porter,
    Identity,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    sources: WeightSources,
    #[arg(long, value_enum, default_value_t = Algo::Agglomerative)]
    algo: Algo,
    /// Number of clusters (agglomerative)
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "ward", value_parser = parse_linkage)]
    linkage: Linkage,
    #[arg(long, default_value = "euclidean", value_parser = parse_metric)]
    metric: Metric,
    /// Message damping in [0.5, 1) (affinity propagation)
    #[arg(long, default_value_t = 0.5)]
    damping: f64,
    /// Number or "auto" for the median similarity (affinity propagation)
    #[arg(long, default_value = "auto", value_parser = parse_preference, allow_negative_numbers = true)]
    preference: Preference,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Iterations with an unchanged exemplar set that count as converged
    #[arg(long, default_value_t = 15)]
    window: usize,
    /// Exponent of the tf-idf weight, in [0, 2.5]
    #[arg(long, default_value_t = 1.5)]
    p_tfidf: f64,
    /// Exponent of the chi2 weight, in [0, 2.5]
    #[arg(long, default_value_t = 0.5)]
    p_chi2: f64,
    /// Output dataset with predict_sense_id filled
    #[arg(long)]
    out: PathBuf,
    /// Also write the context vectors as id<TAB>values
    #[arg(long)]
    vectors_out: Option<PathBuf>,
}

#[derive(Args)]
struct GridSearchArgs {
    #[command(flatten)]
    sources: WeightSources,
    /// TOML search space; the full default grid if absent
    #[arg(long)]
    space: Option<PathBuf>,
    /// Ranked configurations as TSV; standard output if absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Best ARI per (p_tfidf, p_chi2) as CSV
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Report the heatmap for agglomerative k=2 ward euclidean instead of the best config per cell
    #[arg(long, requires = "heatmap")]
    heatmap_default_config: bool,
    /// Best agglomerative ARI per (k, linkage) as CSV
    #[arg(long)]
    sweep: Option<PathBuf>,
    /// Write predictions of the best configuration
    #[arg(long)]
    best_out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<EmbeddingFormat, Error> {
    s.parse()
}

fn parse_linkage(s: &str) -> Result<Linkage, Error> {
    s.parse()
}

fn parse_metric(s: &str) -> Result<Metric, Error> {
    s.parse()
}

fn parse_preference(s: &str) -> Result<Preference, Error> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = if cli.quiet {
        log::LevelFilter::Error
    } else if cli.verbose {
        log::LevelFilter::Info
    } else {
        log::LevelFilter::Warn
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .format_target(false)
        .target(env_logger::Target::Stderr)
        .init();

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli.command, cli.seed)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}

fn run(command: Command, seed: u64) -> wsi_core::Result<()> {
    match command {
        Command::BuildIdf { corpus, out } => {
            let file = File::open(&corpus).map_err(|e| io_err(&corpus, e))?;
            let mut docs = Vec::new();
            for line in BufReader::new(file).lines() {
                docs.push(tokenize(&line.map_err(|e| io_err(&corpus, e))?));
            }
            let idf = build_idf(docs)?;
            info!(
                "{} documents, {} distinct words",
                idf.n_docs(),
                idf.vocabulary_len()
            );
            idf.save(&out)
        }
        Command::BuildChi2 { dataset, out } => {
            let dataset = load_dataset(&dataset)?;
            let chi2 = build_chi2(&dataset);
            info!("{} (target, word) pairs", chi2.len());
            chi2.save(&out)
        }
        Command::Cluster(args) => cluster(args),
        Command::Evaluate {
            gold,
            pred,
            confusion_dir,
        } => {
            let gold = load_dataset(&gold)?;
            let pred = load_dataset(&pred)?;
            let labels = pred.predicted_labeling();
            let report = evaluate(&gold, &labels)?;
            report
                .write_tsv(io::stdout().lock())
                .map_err(|e| io_err(Path::new("<stdout>"), e))?;
            if let Some(dir) = confusion_dir {
                fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                for (word, matrix) in confusion_matrices(&gold, &labels)? {
                    let path = dir.join(format!("{word}.csv"));
                    write_with(&path, |w| matrix.write_csv(w))?;
                }
            }
            Ok(())
        }
        Command::GridSearch(args) => search(args),
        Command::NormReport {
            embeddings,
            freqs,
            sample_size,
            out,
        } => {
            if sample_size == 0 {
                return Err(Error::Config("--sample-size must be positive".into()));
            }
            let model = load_model(&embeddings)?;
            let freqs = FrequencyTable::load(&freqs)?;
            let rows = norm_frequency_report(&model, &freqs, sample_size, seed)?;
            match out {
                Some(path) => write_with(&path, |w| write_norm_report(&rows, w)),
                None => write_norm_report(&rows, io::stdout().lock())
                    .map_err(|e| io_err(Path::new("<stdout>"), e)),
            }
        }
        Command::MtLabel {
            translations,
            stemmer,
            dataset,
            out,
        } => {
            let stemmer = match stemmer {
                StemmerArg::Porter => Stemmer::Porter,
                StemmerArg::Identity => Stemmer::Identity,
            };
            let labels = label_by_translation(&load_translations(&translations)?, stemmer)?;
            match (dataset, out) {
                (Some(dataset), Some(out)) => {
                    write_predictions(&load_dataset(&dataset)?, &labels, &out)
                }
                _ => {
                    let mut w = BufWriter::new(io::stdout().lock());
                    for (id, label) in &labels {
                        writeln!(w, "{id}\t{label}")
                            .map_err(|e| io_err(Path::new("<stdout>"), e))?;
                    }
                    w.flush().map_err(|e| io_err(Path::new("<stdout>"), e))
                }
            }
        }
    }
}

fn cluster(args: ClusterArgs) -> wsi_core::Result<()> {
    let clustering = match args.algo {
        Algo::Agglomerative => ClusteringConfig::Agglomerative(AgglomerativeConfig {
            n_clusters: args.k,
            linkage: args.linkage,
            metric: args.metric,
        }),
        Algo::AffinityPropagation => ClusteringConfig::AffinityPropagation(AffinityConfig {
            damping: args.damping,
            preference: args.preference,
            max_iter: args.max_iter,
            convergence_window: args.window,
        }),
    };
    clustering.validate()?;
    let weighting = WeightingConfig::new(args.p_tfidf, args.p_chi2)?;
    let (dataset, model, idf, chi2) = load_sources(&args.sources)?;

    let vectors = vectorize_all(&dataset, &model, &idf, &chi2, &weighting);
    if let Some(path) = &args.vectors_out {
        write_with(path, |w| write_vectors(&vectors, w))?;
    }
    let labels = cluster_vectors(&dataset, &vectors, &clustering)?;
    write_predictions(&dataset, &labels, &args.out)
}

fn search(args: GridSearchArgs) -> wsi_core::Result<()> {
    let space = match &args.space {
        Some(path) => SearchSpace::load(path)?,
        None => SearchSpace::default(),
    };
    space.validate()?;
    let (dataset, model, idf, chi2) = load_sources(&args.sources)?;
    info!("searching {} configurations", space.size());
    let result = grid_search(&dataset, &model, &idf, &chi2, &space)?;

    match &args.out {
        Some(path) => write_with(path, |w| result.write_tsv(w))?,
        None => result
            .write_tsv(io::stdout().lock())
            .map_err(|e| io_err(Path::new("<stdout>"), e))?,
    }
    if let Some(path) = &args.heatmap {
        let fixed = ClusteringConfig::Agglomerative(AgglomerativeConfig::default());
        let rows = export_power_heatmap(&result, args.heatmap_default_config.then_some(&fixed));
        if rows.is_empty() {
            warn!("default clustering configuration is not part of the search space; heatmap is empty");
        }
        write_with(path, |w| write_heatmap_csv(&rows, w))?;
    }
    if let Some(path) = &args.sweep {
        write_with(path, |w| {
            write_sweep_csv(&export_k_linkage_sweep(&result), w)
        })?;
    }
    if let Some(path) = &args.best_out {
        let best = result.best();
        info!("best: {} (ARI {:.4})", best.key(), best.train_ari);
        let vectors = vectorize_all(&dataset, &model, &idf, &chi2, &best.weighting);
        let labels = cluster_vectors(&dataset, &vectors, &best.clustering)?;
        write_predictions(&dataset, &labels, path)?;
    }
    Ok(())
}

fn load_dataset(path: &Path) -> wsi_core::Result<Dataset> {
    let dataset = parse_dataset(path)?;
    for w in dataset.warnings() {
        warn!("{}: {w}", path.display());
    }
    Ok(dataset)
}

fn load_model(args: &EmbeddingArgs) -> wsi_core::Result<EmbeddingModel> {
    let format = args
        .format
        .unwrap_or_else(|| EmbeddingFormat::from_extension(&args.embeddings));
    let model = load_embeddings(&args.embeddings, format)?;
    if let Some(meta) = model.meta() {
        if meta.duplicates > 0 {
            warn!(
                "{}: {} duplicate words, last occurrence kept",
                args.embeddings.display(),
                meta.duplicates
            );
        }
    }
    info!("{} words of dimension {}", model.len(), model.dim());
    Ok(model)
}

fn load_sources(
    sources: &WeightSources,
) -> wsi_core::Result<(Dataset, EmbeddingModel, IdfTable, Chi2Table)> {
    let dataset = load_dataset(&sources.dataset)?;
    let model = load_model(&sources.embeddings)?;
    let idf = match &sources.idf {
        Some(path) => IdfTable::load(path)?,
        None => {
            warn!("no --idf table given; using the dataset contexts as the idf corpus");
            build_idf(dataset.instances().iter().map(|i| i.tokens.iter()))?
        }
    };
    let chi2 = match &sources.chi2 {
        Some(path) => Chi2Table::load(path)?,
        None => build_chi2(&dataset),
    };
    if chi2.is_degenerate() {
        warn!("chi2 weights are degenerate (fewer than two target words)");
    }
    Ok((dataset, model, idf, chi2))
}

fn write_with<F>(path: &Path, body: F) -> wsi_core::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> io::Result<()>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w)
        .and_then(|()| w.flush())
        .map_err(|e| io_err(path, e))
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
