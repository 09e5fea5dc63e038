use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topicforge::eval::CoherenceVariant;
use topicforge::pipeline::{run_pipeline, CategoryFilter, PipelineConfig};
use topicforge::report::{comparison_rows, comparison_text, load_bundle, write_tables};
use topicforge::{Error, ModelKind};

#[derive(Parser)]
#[command(name = "topicforge", version, about = "Topic models for aviation accident narratives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write every report file.
    Run(Box<RunArgs>),
    /// Re-render the comparison and sweep tables from a saved bundle.
    Report {
        #[arg(long)]
        bundle: PathBuf,
        /// Output directory; defaults to the bundle directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_category(s: &str) -> Result<CategoryFilter, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_variant(s: &str) -> Result<CoherenceVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Each flag overrides the config key of the same name.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    operator_column: Option<String>,
    #[arg(long)]
    narrative_column: Option<String>,
    #[arg(long)]
    date_column: Option<String>,
    #[arg(long, value_parser = parse_category)]
    category: Option<CategoryFilter>,
    #[arg(long, value_delimiter = ',')]
    military_keywords: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    private_keywords: Option<Vec<String>>,
    #[arg(long)]
    builtin_stopwords: Option<bool>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    lemma_exceptions: Option<PathBuf>,
    #[arg(long)]
    lemma_words: Option<PathBuf>,
    #[arg(long)]
    min_tokens: Option<usize>,
    #[arg(long)]
    min_df: Option<usize>,
    #[arg(long)]
    max_df: Option<f64>,
    #[arg(long)]
    split_ratio: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
    #[arg(long, value_delimiter = ',')]
    ks: Option<Vec<usize>>,
    #[arg(long)]
    lda_alpha: Option<f64>,
    #[arg(long)]
    lda_beta: Option<f64>,
    #[arg(long)]
    lda_iterations: Option<usize>,
    #[arg(long)]
    lda_burn_in: Option<usize>,
    #[arg(long)]
    lda_thin: Option<usize>,
    #[arg(long)]
    plsa_max_iterations: Option<usize>,
    #[arg(long)]
    plsa_tol: Option<f64>,
    #[arg(long)]
    plsa_early_stop_fraction: Option<f64>,
    #[arg(long)]
    nmf_max_iterations: Option<usize>,
    #[arg(long)]
    nmf_tol: Option<f64>,
    #[arg(long, value_parser = parse_variant)]
    coherence: Option<CoherenceVariant>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    wordcloud_n: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    reproducible: Option<bool>,
}

macro_rules! apply {
    ($args:ident, $cfg:ident, $($field:ident),*) => {
        $(if let Some(v) = $args.$field { $cfg.$field = v; })*
    };
}

impl RunArgs {
    fn into_config(self: Box<Self>) -> topicforge::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_toml_file(path)?,
            None => PipelineConfig::default(),
        };
        let args = *self;
        apply!(
            args, cfg, input, operator_column, narrative_column, date_column, category,
            military_keywords, private_keywords, builtin_stopwords, min_tokens, min_df, max_df,
            split_ratio, seed, models, ks, lda_beta, lda_iterations, lda_burn_in, lda_thin,
            plsa_max_iterations, plsa_tol, plsa_early_stop_fraction, nmf_max_iterations, nmf_tol,
            coherence, top_n, epsilon, wordcloud_n, out, reproducible
        );
        if args.stopwords.is_some() {
            cfg.stopwords = args.stopwords;
        }
        if args.lemma_exceptions.is_some() {
            cfg.lemma_exceptions = args.lemma_exceptions;
        }
        if args.lemma_words.is_some() {
            cfg.lemma_words = args.lemma_words;
        }
        if args.lda_alpha.is_some() {
            cfg.lda_alpha = args.lda_alpha;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> topicforge::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.into_config()?;
            let out = run_pipeline(&cfg)?;
            print!("{}", comparison_text(&comparison_rows(&out.bundle)));
            eprintln!("wrote {}", cfg.out.display());
            Ok(())
        }
        Command::Report { bundle, out } => {
            let b = load_bundle(&bundle)?;
            write_tables(&b, out.as_deref().unwrap_or(&bundle))?;
            print!("{}", comparison_text(&comparison_rows(&b)));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
