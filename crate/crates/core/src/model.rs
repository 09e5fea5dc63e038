//! The topic model representation shared by all three fitters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dtm::Vocabulary;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lda,
    Plsa,
    Nmf,
}

impl ModelKind {
    /// Row order of the comparison table.
    pub const REPORT_ORDER: [ModelKind; 3] = [ModelKind::Plsa, ModelKind::Nmf, ModelKind::Lda];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Lda => "lda",
            ModelKind::Plsa => "plsa",
            ModelKind::Nmf => "nmf",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Lda => "LDA",
            ModelKind::Plsa => "PLSA",
            ModelKind::Nmf => "NMF",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lda" => Ok(ModelKind::Lda),
            "plsa" => Ok(ModelKind::Plsa),
            "nmf" => Ok(ModelKind::Nmf),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub iterations: usize,
    pub objective: f64,
    pub seed: u64,
    /// Per-iteration objective: log-likelihood for PLSA, squared Frobenius
    /// error for NMF, empty for LDA.
    #[serde(default)]
    pub trace: Vec<f64>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// `K` topic-word distributions and one topic mixture per training document.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    kind: ModelKind,
    topic_word: Array2<f64>,
    doc_topic: Array2<f64>,
    vocab: Arc<Vocabulary>,
    pub meta: FitMeta,
}

const ROW_TOL: f64 = 1e-9;

fn check_rows(m: &Array2<f64>, what: &'static str) -> Result<()> {
    for (i, row) in m.rows().into_iter().enumerate() {
        if row.iter().any(|&x| x.is_nan() || x < 0.0 || !x.is_finite()) {
            return Err(Error::Format {
                what,
                message: format!("row {i} has a negative or non-finite entry"),
            });
        }
        let s: f64 = row.sum();
        if (s - 1.0).abs() > ROW_TOL {
            return Err(Error::Format {
                what,
                message: format!("row {i} sums to {s}"),
            });
        }
    }
    Ok(())
}

impl TopicModel {
    /// Validates shapes and row normalization.
    pub fn new(
        kind: ModelKind,
        topic_word: Array2<f64>,
        doc_topic: Array2<f64>,
        vocab: Arc<Vocabulary>,
        meta: FitMeta,
    ) -> Result<Self> {
        let k = topic_word.nrows();
        if k == 0 {
            return Err(Error::invalid("a topic model needs at least one topic"));
        }
        if topic_word.ncols() != vocab.len() {
            return Err(Error::invalid(format!(
                "topic_word has {} columns for a vocabulary of {}",
                topic_word.ncols(),
                vocab.len()
            )));
        }
        if doc_topic.ncols() != k {
            return Err(Error::invalid(format!(
                "doc_topic has {} columns for {k} topics",
                doc_topic.ncols()
            )));
        }
        check_rows(&topic_word, "topic_word")?;
        check_rows(&doc_topic, "doc_topic")?;
        Ok(TopicModel {
            kind,
            topic_word,
            doc_topic,
            vocab,
            meta,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_topics(&self) -> usize {
        self.topic_word.nrows()
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    pub fn topic_word(&self) -> &Array2<f64> {
        &self.topic_word
    }

    pub fn doc_topic(&self) -> &Array2<f64> {
        &self.doc_topic
    }

    /// `Σ_d Σ_w n(d,w) ln p(w|d)` using the stored mixtures; `matrix` must be
    /// the training matrix the model was fitted on.
    pub fn log_likelihood(&self, matrix: &crate::dtm::DocTermMatrix) -> f64 {
        let k = self.num_topics();
        matrix
            .rows()
            .iter()
            .enumerate()
            .map(|(d, row)| {
                row.iter()
                    .map(|&(w, c)| {
                        let p: f64 = (0..k).map(|z| self.doc_topic[[d, z]] * self.topic_word[[z, w]]).sum();
                        c as f64 * p.ln()
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SerializedModel::from(self)).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: SerializedModel = serde_json::from_str(text).map_err(|e| Error::Format {
            what: "model file",
            message: e.to_string(),
        })?;
        s.try_into()
    }
}

/// On-disk form: dense rows, vocabulary inline.
#[derive(Serialize, Deserialize)]
struct SerializedModel {
    kind: ModelKind,
    k: usize,
    seed: u64,
    vocabulary: Vocabulary,
    topic_word: Vec<Vec<f64>>,
    doc_topic: Vec<Vec<f64>>,
    fit_meta: FitMeta,
}

impl From<&TopicModel> for SerializedModel {
    fn from(m: &TopicModel) -> Self {
        let rows = |a: &Array2<f64>| a.rows().into_iter().map(|r| r.to_vec()).collect();
        SerializedModel {
            kind: m.kind,
            k: m.num_topics(),
            seed: m.meta.seed,
            vocabulary: (*m.vocab).clone(),
            topic_word: rows(&m.topic_word),
            doc_topic: rows(&m.doc_topic),
            fit_meta: m.meta.clone(),
        }
    }
}

fn dense(rows: Vec<Vec<f64>>, ncols: usize, what: &'static str) -> Result<Array2<f64>> {
    let nrows = rows.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Format {
            what,
            message: format!("expected {ncols} columns in every row"),
        });
    }
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect()).map_err(|e| {
        Error::Format {
            what,
            message: e.to_string(),
        }
    })
}

impl TryFrom<SerializedModel> for TopicModel {
    type Error = Error;

    fn try_from(s: SerializedModel) -> Result<Self> {
        if s.topic_word.len() != s.k {
            return Err(Error::Format {
                what: "model file",
                message: format!("k = {} but {} topic rows", s.k, s.topic_word.len()),
            });
        }
        let v = s.vocabulary.len();
        let topic_word = dense(s.topic_word, v, "topic_word")?;
        let doc_topic = dense(s.doc_topic, s.k, "doc_topic")?;
        let mut meta = s.fit_meta;
        meta.seed = s.seed;
        TopicModel::new(s.kind, topic_word, doc_topic, Arc::new(s.vocabulary), meta)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTerm {
    pub term_id: usize,
    pub term: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicTermRanking {
    pub topic_id: usize,
    pub ranked_terms: Vec<RankedTerm>,
}

/// Term ids of a weight vector by non-increasing weight, ties by ascending id.
pub(crate) fn rank_indices(weights: &[f64], n: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..weights.len()).collect();
    ids.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    ids.truncate(n);
    ids
}

pub fn top_n_words(model: &TopicModel, topic_id: usize, n: usize) -> Result<TopicTermRanking> {
    if topic_id >= model.num_topics() {
        return Err(Error::invalid(format!(
            "topic {topic_id} out of range (model has {})",
            model.num_topics()
        )));
    }
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let row = model.topic_word.row(topic_id);
    let weights = row.as_slice().expect("standard layout").to_vec();
    let ranked_terms = rank_indices(&weights, n)
        .into_iter()
        .map(|id| RankedTerm {
            term_id: id,
            term: model.vocab.term(id).to_string(),
            weight: weights[id],
        })
        .collect();
    Ok(TopicTermRanking {
        topic_id,
        ranked_terms,
    })
}

/// `p(w|d) = Σ_z p(z|d) p(w|z)`.
pub fn predictive_word_dist(model: &TopicModel, doc_topic_row: &[f64]) -> Vec<f64> {
    assert_eq!(doc_topic_row.len(), model.num_topics(), "mixture length must equal K");
    let mut out = vec![0.0; model.vocab.len()];
    for (z, &pz) in doc_topic_row.iter().enumerate() {
        if pz == 0.0 {
            continue;
        }
        for (o, &pw) in out.iter_mut().zip(model.topic_word.row(z)) {
            *o += pz * pw;
        }
    }
    out
}

/// Divides a non-negative vector by its sum; all-zero input becomes uniform.
pub(crate) fn normalize(v: &mut [f64]) -> bool {
    let s: f64 = v.iter().sum();
    if s > 0.0 && s.is_finite() {
        v.iter_mut().for_each(|x| *x /= s);
        true
    } else {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
        false
    }
}
