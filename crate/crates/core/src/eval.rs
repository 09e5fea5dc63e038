//! Held-out perplexity, document co-occurrence coherence and the topic-count
//! sweep.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dtm::{CooccurrenceStats, CorpusSplit, DocTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::lda::{fit_lda, lda_fold_in_stream, LdaConfig};
use crate::model::{predictive_word_dist, rank_indices, ModelKind, TopicModel};
use crate::nmf::{fit_nmf_model, NmfConfig, NmfFoldIn};
use crate::plsa::{fit_plsa, plsa_fold_in, PlsaConfig};

pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_TOP_N: usize = 10;

/// Guards the NPMI denominator when a pair occurs in every document.
const NPMI_DENOMINATOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityResult {
    pub value: f64,
    pub heldout_docs: usize,
    pub heldout_tokens: u64,
    pub smoothing_epsilon: f64,
    pub log_likelihood: f64,
}

/// `exp(-Σ_d log p(D_d) / Σ_d N_d)` with
/// `log p(D_d) = Σ_w n(d,w) ln(p(w|d) + epsilon)`.
///
/// `fold_in(i, doc)` returns the topic mixture of held-out document `i`.
pub fn perplexity<F>(model: &TopicModel, heldout: &DocTermMatrix, fold_in: F, epsilon: f64) -> Result<PerplexityResult>
where
    F: Fn(usize, &[(usize, u32)]) -> Result<Vec<f64>> + Sync,
{
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(Error::invalid("epsilon must be non-negative"));
    }
    if heldout.is_empty() || heldout.total_mass() == 0 {
        return Err(Error::NoTestDocuments);
    }
    if heldout.n_terms() != model.vocab().len() {
        return Err(Error::invalid("held-out matrix width does not match the model vocabulary"));
    }
    let per_doc: Vec<f64> = (0..heldout.n_docs())
        .into_par_iter()
        .map(|i| {
            let row = heldout.row(i);
            let theta = fold_in(i, row)?;
            let p = predictive_word_dist(model, &theta);
            let mut ll = 0.0;
            for &(w, c) in row {
                let pw = p[w] + epsilon;
                if pw <= 0.0 {
                    return Err(Error::ZeroProbability {
                        doc_id: heldout.doc_ids()[i],
                        word: model.vocab().term(w).to_string(),
                    });
                }
                ll += c as f64 * pw.ln();
            }
            Ok(ll)
        })
        .collect::<Result<_>>()?;
    let log_likelihood: f64 = per_doc.iter().sum();
    let tokens = heldout.total_mass();
    Ok(PerplexityResult {
        value: (-log_likelihood / tokens as f64).exp(),
        heldout_docs: heldout.n_docs(),
        heldout_tokens: tokens,
        smoothing_epsilon: epsilon,
        log_likelihood,
    })
}

/// Fit settings for one of the three model kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Lda(LdaConfig),
    Plsa(PlsaConfig),
    Nmf(NmfConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Lda(_) => ModelKind::Lda,
            ModelConfig::Plsa(_) => ModelKind::Plsa,
            ModelConfig::Nmf(_) => ModelKind::Nmf,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            ModelConfig::Lda(c) => c.k,
            ModelConfig::Plsa(c) => c.k,
            ModelConfig::Nmf(c) => c.k,
        }
    }

    pub fn fit(&self, matrix: &DocTermMatrix, vocab: Arc<Vocabulary>) -> Result<TopicModel> {
        match self {
            ModelConfig::Lda(c) => fit_lda(matrix, vocab, c),
            ModelConfig::Plsa(c) => fit_plsa(matrix, vocab, c),
            ModelConfig::Nmf(c) => fit_nmf_model(matrix, vocab, c),
        }
    }

    /// Held-out perplexity using the fold-in that matches this model kind.
    /// LDA fold-in draws from a per-document RNG stream so the result does
    /// not depend on scheduling.
    pub fn heldout_perplexity(&self, model: &TopicModel, heldout: &DocTermMatrix, epsilon: f64) -> Result<PerplexityResult> {
        if model.kind() != self.kind() {
            return Err(Error::invalid(format!(
                "{} config used with a {} model",
                self.kind(),
                model.kind()
            )));
        }
        match self {
            ModelConfig::Lda(c) => perplexity(model, heldout, |i, doc| lda_fold_in_stream(model, doc, c, i as u64), epsilon),
            ModelConfig::Plsa(c) => perplexity(model, heldout, |_, doc| plsa_fold_in(model, doc, c), epsilon),
            ModelConfig::Nmf(c) => {
                let f = NmfFoldIn::new(model, c)?;
                perplexity(model, heldout, |_, doc| Ok(f.infer(doc)), epsilon)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceVariant {
    Umass,
    Npmi,
}

impl CoherenceVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CoherenceVariant::Umass => "umass",
            CoherenceVariant::Npmi => "npmi",
        }
    }
}

impl fmt::Display for CoherenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CoherenceVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "umass" => Ok(CoherenceVariant::Umass),
            "npmi" => Ok(CoherenceVariant::Npmi),
            other => Err(Error::invalid(format!("unknown coherence variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub per_topic: Vec<f64>,
    /// Per-topic score divided by the number of scored pairs. For NPMI this
    /// equals `per_topic`.
    pub per_topic_pair_mean: Vec<f64>,
    pub mean: f64,
    pub variant: CoherenceVariant,
    pub top_n: usize,
    pub warnings: Vec<String>,
}

/// UMass: `Σ_{i>j} ln((D(w_i,w_j) + 1) / D(w_j))` over the rank-ordered
/// words. `D(w_j)` is floored at 1 for words absent from the statistics.
fn umass(ids: &[usize], stats: &CooccurrenceStats) -> f64 {
    let mut score = 0.0;
    for i in 1..ids.len() {
        for j in 0..i {
            let pair = stats.pair(ids[i], ids[j]).unwrap_or(0) as f64;
            let single = stats.single(ids[j]).max(1) as f64;
            score += ((pair + 1.0) / single).ln();
        }
    }
    score
}

fn npmi_pair(pair: usize, a: usize, b: usize, docs: usize) -> f64 {
    if pair == 0 || docs == 0 {
        return -1.0;
    }
    let n = docs as f64;
    let pij = pair as f64 / n;
    let pi = a as f64 / n;
    let pj = b as f64 / n;
    let value = (pij / (pi * pj)).ln() / (-pij.ln()).max(NPMI_DENOMINATOR_FLOOR);
    value.clamp(-1.0, 1.0)
}

/// Mean NPMI over the `i > j` pairs.
fn npmi(ids: &[usize], stats: &CooccurrenceStats) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 1..ids.len() {
        for j in 0..i {
            let pair = stats.pair(ids[i], ids[j]).unwrap_or(0);
            total += npmi_pair(pair, stats.single(ids[i]), stats.single(ids[j]), stats.doc_count());
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Coherence of one rank-ordered list of term ids.
pub fn topic_coherence(ids: &[usize], stats: &CooccurrenceStats, variant: CoherenceVariant) -> f64 {
    match variant {
        CoherenceVariant::Umass => umass(ids, stats),
        CoherenceVariant::Npmi => npmi(ids, stats),
    }
}

pub fn coherence(
    model: &TopicModel,
    stats: &CooccurrenceStats,
    top_n: usize,
    variant: CoherenceVariant,
) -> Result<CoherenceResult> {
    if top_n == 0 {
        return Err(Error::invalid("top_n must be at least 1"));
    }
    if stats.n_terms() != model.vocab().len() {
        return Err(Error::invalid("co-occurrence statistics do not cover the model vocabulary"));
    }
    let mut warnings = Vec::new();
    if top_n == 1 {
        warnings.push("top_n = 1 leaves no word pairs; coherence is 0 by convention".to_string());
    }
    let n = top_n.min(model.vocab().len());
    let pairs = n * n.saturating_sub(1) / 2;
    let per_topic: Vec<f64> = model
        .topic_word()
        .rows()
        .into_iter()
        .map(|row| {
            let ids = rank_indices(row.as_slice().expect("standard layout"), n);
            topic_coherence(&ids, stats, variant)
        })
        .collect();
    let per_topic_pair_mean = match variant {
        CoherenceVariant::Npmi => per_topic.clone(),
        CoherenceVariant::Umass if pairs == 0 => per_topic.clone(),
        CoherenceVariant::Umass => per_topic.iter().map(|s| s / pairs as f64).collect(),
    };
    let mean = per_topic.iter().sum::<f64>() / per_topic.len() as f64;
    Ok(CoherenceResult {
        per_topic,
        per_topic_pair_mean,
        mean,
        variant,
        top_n,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub k: usize,
    pub coherence_umass: f64,
    pub coherence_npmi: f64,
    pub perplexity: f64,
    /// Wall-clock fit time; left empty in reproducible runs.
    pub fit_seconds: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub row: SweepRow,
    pub model: TopicModel,
    pub umass: CoherenceResult,
    pub npmi: CoherenceResult,
    pub perplexity: PerplexityResult,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub selected_k: usize,
    pub selected: usize,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.points.iter().map(|p| p.row.clone()).collect()
    }

    pub fn best(&self) -> &SweepPoint {
        &self.points[self.selected]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub top_n: usize,
    pub selection: CoherenceVariant,
    pub epsilon: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            top_n: DEFAULT_TOP_N,
            selection: CoherenceVariant::Npmi,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

/// Index of the largest score; ties and NaN resolve toward the smaller K.
pub fn select_k(ks: &[usize], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..ks.len() {
        let (s, b) = (scores[i], scores[best]);
        let better = match (s.is_nan(), b.is_nan()) {
            (true, _) => false,
            (false, true) => true,
            _ => s > b || (s == b && ks[i] < ks[best]),
        };
        if better {
            best = i;
        }
    }
    best
}

/// Fits one model per K on the training split and scores it: coherence on
/// `stats`, perplexity on the test split. Points run in parallel and come back
/// in the order of `ks`.
pub fn sweep_topic_count<F>(
    split: &CorpusSplit,
    stats: &CooccurrenceStats,
    vocab: &Arc<Vocabulary>,
    ks: &[usize],
    config_for_k: F,
    opts: &EvalOptions,
) -> Result<SweepResult>
where
    F: Fn(usize) -> ModelConfig + Sync,
{
    if ks.is_empty() {
        return Err(Error::invalid("Ks must not be empty"));
    }
    if ks.contains(&0) {
        return Err(Error::invalid("every K must be at least 1"));
    }
    let mut seen = std::collections::BTreeSet::new();
    if let Some(dup) = ks.iter().find(|&&k| !seen.insert(k)) {
        return Err(Error::invalid(format!("K={dup} listed twice")));
    }
    if split.test.is_empty() {
        return Err(Error::NoTestDocuments);
    }
    let points: Vec<SweepPoint> = ks
        .par_iter()
        .map(|&k| {
            let cfg = config_for_k(k);
            let annotate = |e: Error| Error::ModelFit {
                model: cfg.kind().display_name().to_string(),
                k,
                source: Box::new(e),
            };
            let start = Instant::now();
            let model = cfg.fit(&split.train, Arc::clone(vocab)).map_err(annotate)?;
            let fit_seconds = start.elapsed().as_secs_f64();
            let umass = coherence(&model, stats, opts.top_n, CoherenceVariant::Umass)?;
            let npmi = coherence(&model, stats, opts.top_n, CoherenceVariant::Npmi)?;
            let perplexity = cfg.heldout_perplexity(&model, &split.test, opts.epsilon)?;
            Ok(SweepPoint {
                row: SweepRow {
                    model: cfg.kind(),
                    k,
                    coherence_umass: umass.mean,
                    coherence_npmi: npmi.mean,
                    perplexity: perplexity.value,
                    fit_seconds: Some(fit_seconds),
                },
                model,
                umass,
                npmi,
                perplexity,
            })
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = points
        .iter()
        .map(|p| match opts.selection {
            CoherenceVariant::Umass => p.row.coherence_umass,
            CoherenceVariant::Npmi => p.row.coherence_npmi,
        })
        .collect();
    let selected = select_k(ks, &scores);
    Ok(SweepResult {
        selected_k: ks[selected],
        selected,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::vocab;
    use crate::model::FitMeta;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn fixed_model(topic_word: Vec<Vec<f64>>, terms: &[&str]) -> TopicModel {
        let k = topic_word.len();
        let v = terms.len();
        let tw = Array2::from_shape_vec((k, v), topic_word.concat()).unwrap();
        let dt = Array2::from_elem((1, k), 1.0 / k as f64);
        TopicModel::new(ModelKind::Plsa, tw, dt, vocab(terms), FitMeta::default()).unwrap()
    }

    fn mixture_of_one(_: usize, _: &[(usize, u32)]) -> Result<Vec<f64>> {
        Ok(vec![1.0])
    }

    #[test]
    fn uniform_model_gives_vocabulary_size() {
        let terms = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let m = fixed_model(vec![vec![0.125; 8]], &terms);
        let heldout = DocTermMatrix::from_dense(&[vec![1, 0, 3, 0, 0, 2, 0, 1], vec![0, 5, 0, 0, 1, 0, 0, 0]]).unwrap();
        let r = perplexity(&m, &heldout, mixture_of_one, DEFAULT_EPSILON).unwrap();
        assert!((r.value - 8.0).abs() < 1e-9);
        assert_eq!(r.heldout_docs, 2);
        assert_eq!(r.heldout_tokens, 13);
    }

    #[test]
    fn hand_computed_case() {
        let m = fixed_model(vec![vec![2.0 / 3.0, 1.0 / 3.0]], &["a", "b"]);
        let heldout = DocTermMatrix::from_dense(&[vec![2, 1]]).unwrap();
        let r = perplexity(&m, &heldout, mixture_of_one, DEFAULT_EPSILON).unwrap();
        let oracle = (-(2.0 * (2.0f64 / 3.0).ln() + (1.0f64 / 3.0).ln()) / 3.0).exp();
        assert!((r.value - 1.88988).abs() < 1e-4);
        assert!((r.value - oracle).abs() < 1e-9);
    }

    #[test]
    fn zero_probability_and_empty_heldout() {
        let m = fixed_model(vec![vec![1.0, 0.0]], &["a", "b"]);
        let heldout = DocTermMatrix::from_dense(&[vec![1, 1]]).unwrap();
        match perplexity(&m, &heldout, mixture_of_one, 0.0) {
            Err(Error::ZeroProbability { word, .. }) => assert_eq!(word, "b"),
            other => panic!("{other:?}"),
        }
        assert!(perplexity(&m, &heldout, mixture_of_one, DEFAULT_EPSILON).unwrap().value.is_finite());
        let empty = DocTermMatrix::from_rows(2, vec![], vec![]).unwrap();
        assert!(matches!(perplexity(&m, &empty, mixture_of_one, 1e-12), Err(Error::NoTestDocuments)));
    }

    #[test]
    fn umass_hand_example() {
        // docs {(a b), (a c)}: D(a) = 2, D(a,b) = 1
        let stats = CooccurrenceStats::from_matrix(&DocTermMatrix::from_dense(&[vec![1, 1, 0], vec![1, 0, 1]]).unwrap());
        let m = fixed_model(vec![vec![0.6, 0.3, 0.1]], &["a", "b", "c"]);
        let r = coherence(&m, &stats, 2, CoherenceVariant::Umass).unwrap();
        assert_eq!(r.per_topic, vec![0.0]);
    }

    #[test]
    fn top_one_is_zero_with_warning() {
        let stats = CooccurrenceStats::from_matrix(&DocTermMatrix::from_dense(&[vec![1, 1], vec![1, 0]]).unwrap());
        let m = fixed_model(vec![vec![0.6, 0.4], vec![0.2, 0.8]], &["a", "b"]);
        for variant in [CoherenceVariant::Umass, CoherenceVariant::Npmi] {
            let r = coherence(&m, &stats, 1, variant).unwrap();
            assert_eq!(r.per_topic, vec![0.0, 0.0]);
            assert_eq!(r.warnings.len(), 1);
        }
        assert!(coherence(&m, &stats, 0, CoherenceVariant::Npmi).is_err());
    }

    #[test]
    fn npmi_boundaries() {
        assert_eq!(npmi_pair(3, 3, 3, 3), 0.0);
        assert_eq!(npmi_pair(0, 2, 2, 4), -1.0);
        // perfectly associated, half of the docs
        assert!((npmi_pair(2, 2, 2, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn selection_prefers_smaller_k_on_ties() {
        assert_eq!(select_k(&[2], &[0.1]), 0);
        assert_eq!(select_k(&[5, 2, 3], &[0.3, 0.3, 0.1]), 1);
        assert_eq!(select_k(&[2, 5], &[f64::NAN, -1.0]), 1);
    }

    /// Independent oracle: scans the documents as term sets for every count.
    fn brute_force(docs: &[Vec<u32>], ids: &[usize], variant: CoherenceVariant) -> f64 {
        let has = |d: &Vec<u32>, t: usize| d[t] > 0;
        let df = |t: usize| docs.iter().filter(|d| has(d, t)).count();
        let co = |a: usize, b: usize| docs.iter().filter(|d| has(d, a) && has(d, b)).count();
        let n = docs.len() as f64;
        let mut acc = 0.0;
        let mut pairs = 0;
        for i in 1..ids.len() {
            for j in 0..i {
                let (wi, wj) = (ids[i], ids[j]);
                pairs += 1;
                match variant {
                    CoherenceVariant::Umass => acc += ((co(wi, wj) as f64 + 1.0) / (df(wj).max(1) as f64)).ln(),
                    CoherenceVariant::Npmi => {
                        let c = co(wi, wj);
                        acc += if c == 0 {
                            -1.0
                        } else {
                            let pij = c as f64 / n;
                            let pmi = (pij / ((df(wi) as f64 / n) * (df(wj) as f64 / n))).ln();
                            (pmi / (-pij.ln()).max(1e-12)).clamp(-1.0, 1.0)
                        }
                    }
                }
            }
        }
        match variant {
            CoherenceVariant::Umass => acc,
            CoherenceVariant::Npmi if pairs == 0 => 0.0,
            CoherenceVariant::Npmi => acc / pairs as f64,
        }
    }

    fn small_corpus() -> impl Strategy<Value = (Vec<Vec<u32>>, Vec<f64>)> {
        (1usize..=5, 2usize..=6).prop_flat_map(|(d, v)| {
            (
                proptest::collection::vec(proptest::collection::vec(0u32..3, v), d),
                proptest::collection::vec(0.01f64..1.0, v),
            )
        })
    }

    proptest! {
        #[test]
        fn coherence_matches_brute_force((docs, weights) in small_corpus(), top_n in 1usize..7) {
            let v = weights.len();
            let matrix = DocTermMatrix::from_rows(
                v,
                docs.iter().map(|r| r.iter().enumerate().filter(|(_, &c)| c > 0).map(|(t, &c)| (t, c)).collect()).collect(),
                (0..docs.len()).collect(),
            ).unwrap();
            let stats = CooccurrenceStats::from_matrix(&matrix);
            let terms: Vec<String> = (0..v).map(|i| format!("t{i}")).collect();
            let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
            let total: f64 = weights.iter().sum();
            let m = fixed_model(vec![weights.iter().map(|w| w / total).collect()], &refs);
            let ids = rank_indices(&m.topic_word().row(0).to_vec(), top_n.min(v));
            for variant in [CoherenceVariant::Umass, CoherenceVariant::Npmi] {
                let r = coherence(&m, &stats, top_n, variant).unwrap();
                prop_assert_eq!(r.per_topic[0], brute_force(&docs, &ids, variant));
            }
        }

        #[test]
        fn coherence_ignores_weight_scale((docs, weights) in small_corpus(), scale in 0.1f64..10.0) {
            let v = weights.len();
            let matrix = DocTermMatrix::from_dense(&docs).unwrap();
            let stats = CooccurrenceStats::from_matrix(&matrix);
            let ids_a = rank_indices(&weights, 4.min(v));
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let ids_b = rank_indices(&scaled, 4.min(v));
            for variant in [CoherenceVariant::Umass, CoherenceVariant::Npmi] {
                prop_assert_eq!(topic_coherence(&ids_a, &stats, variant), topic_coherence(&ids_b, &stats, variant));
            }
        }

        #[test]
        fn empirical_distribution_minimizes_perplexity(
            rows in proptest::collection::vec(proptest::collection::vec(0u32..4, 3), 1..4),
            raw in proptest::collection::vec(0.05f64..1.0, 3),
        ) {
            prop_assume!(rows.iter().all(|r| r.iter().any(|&c| c > 0)));
            let heldout = DocTermMatrix::from_dense(&rows).unwrap();
            let s: f64 = raw.iter().sum();
            let m = fixed_model(vec![raw.iter().map(|x| x / s).collect()], &["a", "b", "c"]);
            let model_ppl = perplexity(&m, &heldout, mixture_of_one, 0.0).unwrap().value;
            // brute-force: each doc scored by its own empirical distribution
            let mut ll = 0.0;
            let mut n = 0.0;
            for r in &rows {
                let len: u32 = r.iter().sum();
                for &c in r {
                    if c > 0 {
                        ll += c as f64 * (c as f64 / len as f64).ln();
                    }
                }
                n += len as f64;
            }
            let empirical = (-ll / n).exp();
            prop_assert!(empirical <= model_ppl * (1.0 + 1e-12));
        }
    }

    #[test]
    fn sweep_on_small_corpus() {
        let dense: Vec<Vec<u32>> = (0..12)
            .map(|d| if d % 2 == 0 { vec![3, 2, 1, 0, 0, 0] } else { vec![0, 0, 1, 2, 3, 1] })
            .collect();
        let matrix = DocTermMatrix::from_dense(&dense).unwrap();
        let split = crate::dtm::split_train_test(&matrix, 0.75, 1).unwrap();
        let stats = CooccurrenceStats::from_matrix(&matrix);
        let v = vocab(&["a", "b", "c", "d", "e", "f"]);
        let mk = |k| ModelConfig::Plsa(PlsaConfig::new(k));
        let r = sweep_topic_count(&split, &stats, &v, &[2], mk, &EvalOptions::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.selected_k, 2);
        let r = sweep_topic_count(&split, &stats, &v, &[3, 1, 2], mk, &EvalOptions::default()).unwrap();
        assert_eq!(r.points.iter().map(|p| p.row.k).collect::<Vec<_>>(), vec![3, 1, 2]);
        assert!(r.points.iter().all(|p| p.row.perplexity.is_finite()));
        assert!(sweep_topic_count(&split, &stats, &v, &[], mk, &EvalOptions::default()).is_err());
        assert!(sweep_topic_count(&split, &stats, &v, &[2, 2], mk, &EvalOptions::default()).is_err());
    }

    #[test]
    fn sweep_annotates_fit_errors() {
        let matrix = DocTermMatrix::from_dense(&[vec![1, 1], vec![1, 0], vec![0, 1]]).unwrap();
        let split = crate::dtm::split_train_test(&matrix, 0.5, 0).unwrap();
        let stats = CooccurrenceStats::from_matrix(&matrix);
        let v = vocab(&["a", "b"]);
        let bad = |k| ModelConfig::Lda(LdaConfig { burn_in: 10, iterations: 5, ..LdaConfig::new(k) });
        match sweep_topic_count(&split, &stats, &v, &[2], bad, &EvalOptions::default()) {
            Err(e @ Error::ModelFit { .. }) => {
                assert_eq!(e.exit_code(), 4);
                let Error::ModelFit { model, k, .. } = e else { unreachable!() };
                assert_eq!(model, "LDA");
                assert_eq!(k, 2);
            }
            other => panic!("{other:?}"),
        }
    }
}
