//! End-to-end run: ingest, filter, preprocess, build the matrix, sweep every
//! model over K and assemble the report bundle.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dtm::{build_matrix, build_vocabulary, split_train_test, CooccurrenceStats};
use crate::error::{Error, Result};
use crate::eval::{sweep_topic_count, CoherenceVariant, EvalOptions, ModelConfig, SweepResult};
use crate::ingest::{parse_records_with, CategoryRules, ColumnMap, OperatorCategory};
use crate::lda::LdaConfig;
use crate::model::{top_n_words, ModelKind, TopicModel};
use crate::nmf::NmfConfig;
use crate::plsa::PlsaConfig;
use crate::report::{write_outputs, ModelReport, ReportBundle, RunManifest, StageTimings};
use crate::textprep::{preprocess_corpus, Exclusion, ExclusionReason, LemmaLexicon, StopwordList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CategoryFilter {
    All,
    Military,
    Commercial,
    Private,
    Unknown,
}

impl CategoryFilter {
    pub fn accepts(self, c: OperatorCategory) -> bool {
        match self {
            CategoryFilter::All => true,
            CategoryFilter::Military => c == OperatorCategory::Military,
            CategoryFilter::Commercial => c == OperatorCategory::Commercial,
            CategoryFilter::Private => c == OperatorCategory::Private,
            CategoryFilter::Unknown => c == OperatorCategory::Unknown,
        }
    }
}

impl std::str::FromStr for CategoryFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all" => Ok(CategoryFilter::All),
            "military" => Ok(CategoryFilter::Military),
            "commercial" => Ok(CategoryFilter::Commercial),
            "private" => Ok(CategoryFilter::Private),
            "unknown" => Ok(CategoryFilter::Unknown),
            other => Err(Error::Config(format!("unknown category `{other}`"))),
        }
    }
}

/// Every setting of a run. Keys in the config file use the same kebab-case
/// names as the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub operator_column: String,
    pub narrative_column: String,
    pub date_column: String,
    pub category: CategoryFilter,
    pub military_keywords: Vec<String>,
    pub private_keywords: Vec<String>,
    /// Use the shipped general and aviation stopword lists.
    pub builtin_stopwords: bool,
    /// Extra stopword file, one word per line.
    pub stopwords: Option<PathBuf>,
    pub lemma_exceptions: Option<PathBuf>,
    pub lemma_words: Option<PathBuf>,
    pub min_tokens: usize,
    pub min_df: usize,
    pub max_df: f64,
    pub split_ratio: f64,
    pub seed: u64,
    pub models: Vec<ModelKind>,
    pub ks: Vec<usize>,
    /// Defaults to `50 / K` when unset.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub lda_iterations: usize,
    pub lda_burn_in: usize,
    pub lda_thin: usize,
    pub plsa_max_iterations: usize,
    pub plsa_tol: f64,
    pub plsa_early_stop_fraction: f64,
    pub nmf_max_iterations: usize,
    pub nmf_tol: f64,
    /// Coherence variant used to pick K.
    pub coherence: CoherenceVariant,
    pub top_n: usize,
    pub epsilon: f64,
    pub wordcloud_n: usize,
    pub out: PathBuf,
    /// Leave wall-clock timings out of every output.
    pub reproducible: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lda = LdaConfig::new(1);
        let plsa = PlsaConfig::new(1);
        let nmf = NmfConfig::new(1);
        let rules = CategoryRules::default();
        let cols = ColumnMap::default();
        PipelineConfig {
            input: PathBuf::from("Airplane_Crashes_and_Fatalities_Since_1908.csv"),
            operator_column: cols.operator,
            narrative_column: cols.narrative,
            date_column: cols.date,
            category: CategoryFilter::All,
            military_keywords: rules.military_keywords().to_vec(),
            private_keywords: rules.private_keywords().to_vec(),
            builtin_stopwords: true,
            stopwords: None,
            lemma_exceptions: None,
            lemma_words: None,
            min_tokens: 3,
            min_df: 2,
            max_df: 0.5,
            split_ratio: 0.8,
            seed: 42,
            models: ModelKind::REPORT_ORDER.to_vec(),
            ks: vec![5, 10, 15, 20],
            lda_alpha: None,
            lda_beta: lda.beta,
            lda_iterations: lda.iterations,
            lda_burn_in: lda.burn_in,
            lda_thin: lda.thin,
            plsa_max_iterations: plsa.max_iterations,
            plsa_tol: plsa.tol,
            plsa_early_stop_fraction: plsa.early_stop_fraction,
            nmf_max_iterations: nmf.max_iterations,
            nmf_tol: nmf.tol,
            coherence: CoherenceVariant::Npmi,
            top_n: crate::eval::DEFAULT_TOP_N,
            epsilon: crate::eval::DEFAULT_EPSILON,
            wordcloud_n: 50,
            out: PathBuf::from("topicforge-out"),
            reproducible: true,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl PipelineConfig {
    /// Parses TOML; relative paths are taken relative to `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        resolve(base_dir, &mut cfg.input);
        resolve(base_dir, &mut cfg.out);
        for p in [&mut cfg.stopwords, &mut cfg.lemma_exceptions, &mut cfg.lemma_words]
            .into_iter()
            .flatten()
        {
            resolve(base_dir, p);
        }
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::InputNotFound(path.to_path_buf())
            } else {
                Error::io(path, e)
            }
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    pub fn column_map(&self) -> ColumnMap {
        ColumnMap {
            operator: self.operator_column.clone(),
            narrative: self.narrative_column.clone(),
            date: self.date_column.clone(),
        }
    }

    /// Model kinds to run, deduplicated, in comparison-table order.
    pub fn model_kinds(&self) -> Vec<ModelKind> {
        ModelKind::REPORT_ORDER
            .into_iter()
            .filter(|k| self.models.contains(k))
            .collect()
    }

    pub fn model_config(&self, kind: ModelKind, k: usize) -> ModelConfig {
        match kind {
            ModelKind::Lda => ModelConfig::Lda(LdaConfig {
                k,
                alpha: self.lda_alpha.unwrap_or(50.0 / k as f64),
                beta: self.lda_beta,
                iterations: self.lda_iterations,
                burn_in: self.lda_burn_in,
                thin: self.lda_thin,
                seed: self.seed,
            }),
            ModelKind::Plsa => ModelConfig::Plsa(PlsaConfig {
                k,
                max_iterations: self.plsa_max_iterations,
                tol: self.plsa_tol,
                seed: self.seed,
                early_stop_fraction: self.plsa_early_stop_fraction,
            }),
            ModelKind::Nmf => ModelConfig::Nmf(NmfConfig {
                max_iterations: self.nmf_max_iterations,
                tol: self.nmf_tol,
                seed: self.seed,
                ..NmfConfig::new(k)
            }),
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            top_n: self.top_n,
            selection: self.coherence,
            epsilon: self.epsilon,
        }
    }

    /// SHA-256 of the canonical JSON form of the config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.input.is_file() {
            return Err(Error::InputNotFound(self.input.clone()));
        }
        for p in [&self.stopwords, &self.lemma_exceptions, &self.lemma_words].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::InputNotFound(p.clone()));
            }
        }
        if self.models.is_empty() {
            return bad("models must not be empty".into());
        }
        if self.ks.is_empty() {
            return bad("ks must not be empty".into());
        }
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        if ks.len() != self.ks.len() {
            return bad("ks must not repeat a value".into());
        }
        if self.min_tokens < 1 || self.min_df < 1 || self.top_n < 1 || self.wordcloud_n < 1 {
            return bad("min-tokens, min-df, top-n and wordcloud-n must be at least 1".into());
        }
        if !(self.max_df > 0.0 && self.max_df <= 1.0) {
            return bad(format!("max-df must lie in (0, 1], got {}", self.max_df));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio <= 1.0) {
            return bad(format!("split-ratio must lie in (0, 1], got {}", self.split_ratio));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return bad("epsilon must be non-negative".into());
        }
        CategoryRules::new(&self.military_keywords, &self.private_keywords)?;
        for kind in self.model_kinds() {
            for &k in &self.ks {
                let check = match self.model_config(kind, k) {
                    ModelConfig::Lda(c) => c.validate(),
                    ModelConfig::Plsa(c) => c.validate(),
                    ModelConfig::Nmf(c) => c.validate(),
                };
                check.map_err(|e| Error::Config(format!("{kind} with K={k}: {e}")))?;
            }
        }
        Ok(())
    }
}

/// Bundle plus the selected model of each kind, aligned with `bundle.reports`.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub bundle: ReportBundle,
    pub models: Vec<TopicModel>,
}

fn report_for(kind: ModelKind, sweep: &SweepResult, top_n: usize) -> Result<ModelReport> {
    let best = sweep.best();
    let topics = (0..best.model.num_topics())
        .map(|z| top_n_words(&best.model, z, top_n))
        .collect::<Result<Vec<_>>>()?;
    let mut warnings = best.model.meta.warnings.clone();
    warnings.extend(best.umass.warnings.iter().cloned());
    let umass_pairs = &best.umass.per_topic_pair_mean;
    Ok(ModelReport {
        model: kind,
        selected_k: sweep.selected_k,
        coherence_umass: best.umass.mean,
        coherence_umass_pair_mean: umass_pairs.iter().sum::<f64>() / umass_pairs.len() as f64,
        coherence_npmi: best.npmi.mean,
        per_topic_umass: best.umass.per_topic.clone(),
        per_topic_npmi: best.npmi.per_topic.clone(),
        perplexity: best.perplexity.value,
        heldout_docs: best.perplexity.heldout_docs,
        heldout_tokens: best.perplexity.heldout_tokens,
        topics,
        warnings,
    })
}

/// Runs every stage and returns the results without touching the output
/// directory.
pub fn execute_pipeline(cfg: &PipelineConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let t0 = Instant::now();
    let rules = CategoryRules::new(&cfg.military_keywords, &cfg.private_keywords)?;
    let file = fs::File::open(&cfg.input).map_err(|e| Error::io(&cfg.input, e))?;
    let records = parse_records_with(std::io::BufReader::new(file), &cfg.column_map(), &rules)?;
    let records_read = records.len();
    let records: Vec<_> = records.into_iter().filter(|r| cfg.category.accepts(r.category)).collect();
    if records.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no records in category {:?}",
            cfg.category
        )));
    }
    let t_ingest = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut stoplist = if cfg.builtin_stopwords {
        StopwordList::builtin()
    } else {
        StopwordList::empty()
    };
    if let Some(p) = &cfg.stopwords {
        stoplist.extend_from_file(p)?;
    }
    let lexicon = if cfg.lemma_exceptions.is_some() || cfg.lemma_words.is_some() {
        LemmaLexicon::from_files(cfg.lemma_exceptions.as_deref(), cfg.lemma_words.as_deref())?
    } else {
        LemmaLexicon::builtin()
    };
    let corpus = preprocess_corpus(&records, &stoplist, &lexicon, cfg.min_tokens)?;
    if corpus.docs.is_empty() {
        return Err(Error::EmptyCorpus("no documents left after preprocessing".into()));
    }
    let t_pre = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let vocab = Arc::new(build_vocabulary(&corpus.docs, cfg.min_df, cfg.max_df)?);
    let (matrix, vocab_empty) = build_matrix(&corpus.docs, &vocab);
    let mut excluded = corpus.excluded;
    excluded.extend(vocab_empty.into_iter().map(|record_id| Exclusion {
        record_id,
        reason: ExclusionReason::VocabEmpty,
    }));
    excluded.sort_by_key(|e| e.record_id);
    if matrix.is_empty() {
        return Err(Error::EmptyCorpus("no document has an in-vocabulary token".into()));
    }
    let stats = CooccurrenceStats::from_matrix(&matrix);
    let split = split_train_test(&matrix, cfg.split_ratio, cfg.seed)?;
    if split.test.is_empty() {
        return Err(Error::NoTestDocuments);
    }
    let t_matrix = t2.elapsed().as_secs_f64();

    let t3 = Instant::now();
    let opts = cfg.eval_options();
    let kinds = cfg.model_kinds();
    let sweeps: Vec<SweepResult> = kinds
        .par_iter()
        .map(|&kind| {
            log::info!("sweeping {kind} over K = {:?}", cfg.ks);
            sweep_topic_count(&split, &stats, &vocab, &cfg.ks, |k| cfg.model_config(kind, k), &opts)
        })
        .collect::<Result<_>>()?;
    let t_models = t3.elapsed().as_secs_f64();

    let mut reports = Vec::new();
    let mut models = Vec::new();
    let mut sweep_rows = Vec::new();
    for (&kind, sweep) in kinds.iter().zip(&sweeps) {
        reports.push(report_for(kind, sweep, cfg.top_n)?);
        models.push(sweep.best().model.clone());
        sweep_rows.extend(sweep.rows().into_iter().map(|mut r| {
            if cfg.reproducible {
                r.fit_seconds = None;
            }
            r
        }));
    }

    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: serde_json::to_value(cfg).expect("config serializes"),
        seed: cfg.seed,
        records_read,
        records_in_category: records.len(),
        documents: matrix.n_docs(),
        train_documents: split.train.n_docs(),
        test_documents: split.test.n_docs(),
        vocabulary_size: vocab.len(),
        excluded_records: excluded.len(),
        timings: (!cfg.reproducible).then_some(StageTimings {
            ingest_seconds: t_ingest,
            preprocess_seconds: t_pre,
            matrix_seconds: t_matrix,
            models_seconds: t_models,
        }),
    };
    Ok(RunOutput {
        bundle: ReportBundle {
            manifest,
            reports,
            sweep: sweep_rows,
            excluded,
        },
        models,
    })
}

/// [`execute_pipeline`] followed by writing every output file to `cfg.out`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutput> {
    let out = execute_pipeline(cfg)?;
    write_outputs(&out.bundle, &out.models, cfg.wordcloud_n, &cfg.out)?;
    Ok(out)
}
