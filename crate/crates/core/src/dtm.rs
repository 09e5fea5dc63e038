//! Vocabulary, sparse document-term counts, train/test splitting and
//! document-level co-occurrence statistics.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textprep::TokenizedDoc;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
}

impl TryFrom<VocabularyRepr> for Vocabulary {
    type Error = Error;

    fn try_from(r: VocabularyRepr) -> Result<Self> {
        Vocabulary::from_parts(r.terms, r.doc_freq)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            doc_freq: v.doc_freq,
        }
    }
}

impl Vocabulary {
    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::Format {
                what: "vocabulary",
                message: format!("{} terms but {} document frequencies", terms.len(), doc_freq.len()),
            });
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format {
                    what: "vocabulary",
                    message: format!("duplicate term `{t}`"),
                });
            }
        }
        Ok(Vocabulary {
            terms,
            index,
            doc_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// Sidecar format: `term_id term doc_freq` per line.
    pub fn write_sidecar<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, (t, df)) in self.terms.iter().zip(&self.doc_freq).enumerate() {
            writeln!(w, "{i} {t} {df}")?;
        }
        Ok(())
    }
}

/// Keeps tokens whose document frequency lies in
/// `[min_df, max_df_fraction * n_docs]`; terms are sorted lexicographically.
pub fn build_vocabulary(
    docs: &[TokenizedDoc],
    min_df: usize,
    max_df_fraction: f64,
) -> Result<Vocabulary> {
    if min_df < 1 {
        return Err(Error::invalid("min_df must be at least 1"));
    }
    if !(max_df_fraction > 0.0 && max_df_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "max_df_fraction must lie in (0, 1], got {max_df_fraction}"
        )));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = max_df_fraction * docs.len() as f64;
    let (terms, freqs): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df && n as f64 <= max_df + 1e-9)
        .map(|(t, n)| (t.to_string(), n))
        .unzip();
    if terms.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    Vocabulary::from_parts(terms, freqs)
}

/// Sparse document-term counts. Each row holds `(term_id, count)` pairs sorted
/// by term id with every count ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    n_terms: usize,
    rows: Vec<Vec<(usize, u32)>>,
    doc_ids: Vec<usize>,
}

impl DocTermMatrix {
    /// Builds a matrix from explicit rows; duplicate terms within a row are
    /// summed and zero counts dropped.
    pub fn from_rows(n_terms: usize, rows: Vec<Vec<(usize, u32)>>, doc_ids: Vec<usize>) -> Result<Self> {
        if rows.len() != doc_ids.len() {
            return Err(Error::invalid("rows and doc_ids differ in length"));
        }
        let rows = rows
            .into_iter()
            .map(|row| {
                let mut acc: BTreeMap<usize, u32> = BTreeMap::new();
                for (t, c) in row {
                    if t >= n_terms {
                        return Err(Error::invalid(format!("term id {t} out of range ({n_terms} terms)")));
                    }
                    *acc.entry(t).or_default() += c;
                }
                Ok(acc.into_iter().filter(|&(_, c)| c > 0).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DocTermMatrix {
            n_terms,
            rows,
            doc_ids,
        })
    }

    /// Dense rows, mainly for tests and tiny examples.
    pub fn from_dense(dense: &[Vec<u32>]) -> Result<Self> {
        let n_terms = dense.first().map_or(0, Vec::len);
        let rows = dense
            .iter()
            .map(|r| r.iter().enumerate().filter(|(_, &c)| c > 0).map(|(t, &c)| (t, c)).collect())
            .collect();
        DocTermMatrix::from_rows(n_terms, rows, (0..dense.len()).collect())
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, d: usize) -> &[(usize, u32)] {
        &self.rows[d]
    }

    pub fn rows(&self) -> &[Vec<(usize, u32)>] {
        &self.rows
    }

    pub fn doc_ids(&self) -> &[usize] {
        &self.doc_ids
    }

    pub fn doc_len(&self, d: usize) -> u64 {
        self.rows[d].iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn total_mass(&self) -> u64 {
        (0..self.n_docs()).map(|d| self.doc_len(d)).sum()
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Per-term totals over all documents.
    pub fn term_totals(&self) -> Vec<u64> {
        let mut totals = vec![0u64; self.n_terms];
        for row in &self.rows {
            for &(t, c) in row {
                totals[t] += c as u64;
            }
        }
        totals
    }

    /// Rows at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> DocTermMatrix {
        DocTermMatrix {
            n_terms: self.n_terms,
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            doc_ids: positions.iter().map(|&i| self.doc_ids[i]).collect(),
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.n_terms];
                for &(t, c) in row {
                    dense[t] = c as f64;
                }
                dense
            })
            .collect()
    }

    /// Triplet dump: `doc_id term_id count` per line.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (row, id) in self.rows.iter().zip(&self.doc_ids) {
            for &(t, c) in row {
                writeln!(w, "{id} {t} {c}")?;
            }
        }
        Ok(())
    }
}

/// Counts vocabulary terms per document. Documents left with no in-vocabulary
/// token are dropped; their record ids are returned alongside the matrix.
pub fn build_matrix(docs: &[TokenizedDoc], vocab: &Vocabulary) -> (DocTermMatrix, Vec<usize>) {
    let mut rows = Vec::with_capacity(docs.len());
    let mut doc_ids = Vec::with_capacity(docs.len());
    let mut excluded = Vec::new();
    for doc in docs {
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for t in &doc.tokens {
            if let Some(id) = vocab.id(t) {
                *counts.entry(id).or_default() += 1;
            }
        }
        if counts.is_empty() {
            excluded.push(doc.record_id);
        } else {
            rows.push(counts.into_iter().collect());
            doc_ids.push(doc.record_id);
        }
    }
    (
        DocTermMatrix {
            n_terms: vocab.len(),
            rows,
            doc_ids,
        },
        excluded,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSplit {
    pub train: DocTermMatrix,
    pub test: DocTermMatrix,
    pub seed: u64,
    pub ratio: f64,
}

/// `ceil(ratio * n_docs)` documents go to train, chosen by a seeded shuffle.
/// Both halves keep the original document order.
pub fn split_train_test(matrix: &DocTermMatrix, ratio: f64, seed: u64) -> Result<CorpusSplit> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::invalid(format!("split ratio must lie in (0, 1], got {ratio}")));
    }
    let n = matrix.n_docs();
    if n == 0 {
        return Err(Error::invalid("cannot split an empty matrix"));
    }
    let n_train = ((ratio * n as f64) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, test) = order.split_at(n_train);
    let (mut train, mut test) = (train.to_vec(), test.to_vec());
    train.sort_unstable();
    test.sort_unstable();
    Ok(CorpusSplit {
        train: matrix.select(&train),
        test: matrix.select(&test),
        seed,
        ratio,
    })
}

/// Document-level term presence statistics.
///
/// Pair counts are answered from per-term posting lists rather than a
/// materialized pair table, which keeps memory linear in corpus size while
/// still giving the same values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceStats {
    doc_count: usize,
    postings: Vec<Vec<u32>>,
}

impl CooccurrenceStats {
    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    /// Number of documents containing `term` at least once.
    pub fn single(&self, term: usize) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Number of documents containing both terms; `None` when `a == b`.
    pub fn pair(&self, a: usize, b: usize) -> Option<usize> {
        if a == b {
            return None;
        }
        let (Some(pa), Some(pb)) = (self.postings.get(a), self.postings.get(b)) else {
            return Some(0);
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Some(n)
    }

    pub fn from_matrix(matrix: &DocTermMatrix) -> Self {
        let mut postings = vec![Vec::new(); matrix.n_terms()];
        for (d, row) in matrix.rows().iter().enumerate() {
            for &(t, _) in row {
                postings[t].push(d as u32);
            }
        }
        CooccurrenceStats {
            doc_count: matrix.n_docs(),
            postings,
        }
    }
}

/// Presence-based counts over `docs`; tokens outside `vocab` are ignored.
pub fn cooccurrence_counts(docs: &[TokenizedDoc], vocab: &Vocabulary) -> CooccurrenceStats {
    let mut postings = vec![Vec::new(); vocab.len()];
    for (d, doc) in docs.iter().enumerate() {
        let mut ids: Vec<usize> = doc.tokens.iter().filter_map(|t| vocab.id(t)).collect();
        ids.sort_unstable();
        ids.dedup();
        for t in ids {
            postings[t].push(d as u32);
        }
    }
    CooccurrenceStats {
        doc_count: docs.len(),
        postings,
    }
}
