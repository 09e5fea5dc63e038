//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtm::{DocTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{FitMeta, ModelKind, TopicModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub k: usize,
    /// Symmetric document-topic pseudo-count.
    pub alpha: f64,
    /// Symmetric topic-word pseudo-count.
    pub beta: f64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th sweep after burn-in for the averaged estimate.
    pub thin: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// Defaults: `alpha = 50/K`, `beta = 0.01`, 1000 sweeps, 500 burn-in,
    /// every 10th sweep averaged.
    pub fn new(k: usize) -> Self {
        LdaConfig {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iterations: 1000,
            burn_in: 500,
            thin: 10,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("LDA needs K >= 1"));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid("LDA priors alpha and beta must be positive"));
        }
        if self.iterations <= self.burn_in {
            return Err(Error::invalid("LDA iterations must exceed burn_in"));
        }
        if self.thin == 0 {
            return Err(Error::invalid("LDA thin must be at least 1"));
        }
        Ok(())
    }

    fn keeps_sample(&self, sweep: usize) -> bool {
        sweep > self.burn_in && ((sweep - self.burn_in).is_multiple_of(self.thin) || sweep == self.iterations)
    }
}

/// Token assignments and the count tables they induce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsState {
    /// Topic of every token occurrence, documents laid out back to back.
    pub z: Vec<u32>,
    /// `n_dk[d * K + k]`.
    pub n_dk: Vec<u32>,
    /// Topic-word counts stored word-major: `n_wk[w * K + k]`.
    pub n_wk: Vec<u32>,
    pub n_k: Vec<u32>,
}

impl GibbsState {
    pub fn n_kw(&self, k: usize, w: usize, n_topics: usize) -> u32 {
        self.n_wk[w * n_topics + k]
    }
}

/// A collapsed Gibbs sampler over one training matrix.
pub struct GibbsSampler {
    cfg: LdaConfig,
    n_docs: usize,
    n_terms: usize,
    token_word: Vec<u32>,
    doc_start: Vec<usize>,
    state: GibbsState,
    rng: ChaCha8Rng,
    weights: Vec<f64>,
    sweeps: usize,
}

impl GibbsSampler {
    /// Seeded uniform random initialization of every token's topic.
    pub fn new(matrix: &DocTermMatrix, cfg: &LdaConfig) -> Result<Self> {
        cfg.validate()?;
        if matrix.is_empty() || matrix.total_mass() == 0 {
            return Err(Error::invalid("LDA needs a non-empty matrix"));
        }
        let k = cfg.k;
        let (n_docs, n_terms) = (matrix.n_docs(), matrix.n_terms());
        let mut token_word = Vec::with_capacity(matrix.total_mass() as usize);
        let mut doc_start = Vec::with_capacity(n_docs + 1);
        for row in matrix.rows() {
            doc_start.push(token_word.len());
            for &(w, c) in row {
                token_word.extend(std::iter::repeat_n(w as u32, c as usize));
            }
        }
        doc_start.push(token_word.len());

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut state = GibbsState {
            z: Vec::with_capacity(token_word.len()),
            n_dk: vec![0; n_docs * k],
            n_wk: vec![0; n_terms * k],
            n_k: vec![0; k],
        };
        for d in 0..n_docs {
            for &w in &token_word[doc_start[d]..doc_start[d + 1]] {
                let topic = rng.gen_range(0..k);
                let w = w as usize;
                state.z.push(topic as u32);
                state.n_dk[d * k + topic] += 1;
                state.n_wk[w * k + topic] += 1;
                state.n_k[topic] += 1;
            }
        }
        Ok(GibbsSampler {
            cfg: cfg.clone(),
            n_docs,
            n_terms,
            token_word,
            doc_start,
            state,
            rng,
            weights: vec![0.0; k],
            sweeps: 0,
        })
    }

    pub fn state(&self) -> &GibbsState {
        &self.state
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps
    }

    pub fn n_tokens(&self) -> usize {
        self.token_word.len()
    }

    fn doc_of(&self, token: usize) -> usize {
        self.doc_start.partition_point(|&s| s <= token) - 1
    }

    /// Full conditional of one token's topic with that token removed from the
    /// counts, normalized.
    pub fn conditional(&self, token: usize) -> Vec<f64> {
        let k = self.cfg.k;
        let d = self.doc_of(token);
        let w = self.token_word[token] as usize;
        let cur = self.state.z[token] as usize;
        let vbeta = self.n_terms as f64 * self.cfg.beta;
        let mut p: Vec<f64> = (0..k)
            .map(|t| {
                let own = (t == cur) as u32;
                let ndk = (self.state.n_dk[d * k + t] - own) as f64;
                let nwk = (self.state.n_wk[w * k + t] - own) as f64;
                let nk = (self.state.n_k[t] - own) as f64;
                (ndk + self.cfg.alpha) * (nwk + self.cfg.beta) / (nk + vbeta)
            })
            .collect();
        let s: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= s);
        p
    }

    /// One pass over every token in document order.
    pub fn sweep(&mut self) {
        let k = self.cfg.k;
        let (alpha, beta) = (self.cfg.alpha, self.cfg.beta);
        let vbeta = self.n_terms as f64 * beta;
        let st = &mut self.state;
        for d in 0..self.n_docs {
            let dk = &mut st.n_dk[d * k..(d + 1) * k];
            for i in self.doc_start[d]..self.doc_start[d + 1] {
                let w = self.token_word[i] as usize;
                let old = st.z[i] as usize;
                let wk = &mut st.n_wk[w * k..(w + 1) * k];
                dk[old] -= 1;
                wk[old] -= 1;
                st.n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (dk[t] as f64 + alpha) * (wk[t] as f64 + beta) / (st.n_k[t] as f64 + vbeta);
                    self.weights[t] = total;
                }
                let u = self.rng.gen::<f64>() * total;
                let new = self.weights.partition_point(|&c| c <= u).min(k - 1);

                st.z[i] = new as u32;
                dk[new] += 1;
                wk[new] += 1;
                st.n_k[new] += 1;
            }
        }
        self.sweeps += 1;
    }

    /// Exact integer check that all three count tables agree with `z`.
    pub fn counts_consistent(&self) -> bool {
        let k = self.cfg.k;
        let n = self.token_word.len() as u64;
        let sum = |v: &[u32]| v.iter().map(|&x| x as u64).sum::<u64>();
        if sum(&self.state.n_dk) != n || sum(&self.state.n_wk) != n || sum(&self.state.n_k) != n {
            return false;
        }
        let mut dk = vec![0u32; self.n_docs * k];
        let mut wk = vec![0u32; self.n_terms * k];
        let mut nk = vec![0u32; k];
        for d in 0..self.n_docs {
            for i in self.doc_start[d]..self.doc_start[d + 1] {
                let t = self.state.z[i] as usize;
                dk[d * k + t] += 1;
                wk[self.token_word[i] as usize * k + t] += 1;
                nk[t] += 1;
            }
        }
        dk == self.state.n_dk && wk == self.state.n_wk && nk == self.state.n_k
    }

    fn accumulate(&self, topic_word: &mut Array2<f64>, doc_topic: &mut Array2<f64>) {
        let k = self.cfg.k;
        let (alpha, beta) = (self.cfg.alpha, self.cfg.beta);
        let vbeta = self.n_terms as f64 * beta;
        for t in 0..k {
            let denom = self.state.n_k[t] as f64 + vbeta;
            for w in 0..self.n_terms {
                topic_word[[t, w]] += (self.state.n_wk[w * k + t] as f64 + beta) / denom;
            }
        }
        let kalpha = k as f64 * alpha;
        for d in 0..self.n_docs {
            let len = (self.doc_start[d + 1] - self.doc_start[d]) as f64;
            for t in 0..k {
                doc_topic[[d, t]] += (self.state.n_dk[d * k + t] as f64 + alpha) / (len + kalpha);
            }
        }
    }
}

/// Runs `iterations` sweeps and averages the smoothed estimates over the
/// thinned post-burn-in sweeps.
pub fn fit_lda(matrix: &DocTermMatrix, vocab: Arc<Vocabulary>, cfg: &LdaConfig) -> Result<TopicModel> {
    if vocab.len() != matrix.n_terms() {
        return Err(Error::invalid("vocabulary does not match matrix width"));
    }
    let mut sampler = GibbsSampler::new(matrix, cfg)?;
    let mut topic_word = Array2::zeros((cfg.k, matrix.n_terms()));
    let mut doc_topic = Array2::zeros((matrix.n_docs(), cfg.k));
    let mut samples = 0usize;
    for s in 1..=cfg.iterations {
        sampler.sweep();
        if cfg.keeps_sample(s) {
            sampler.accumulate(&mut topic_word, &mut doc_topic);
            samples += 1;
        }
    }
    let inv = 1.0 / samples as f64;
    topic_word.mapv_inplace(|x| x * inv);
    doc_topic.mapv_inplace(|x| x * inv);
    for mut row in topic_word.rows_mut().into_iter().chain(doc_topic.rows_mut()) {
        let s = row.sum();
        row.mapv_inplace(|x| x / s);
    }
    let mut model = TopicModel::new(
        ModelKind::Lda,
        topic_word,
        doc_topic,
        vocab,
        FitMeta {
            iterations: cfg.iterations,
            objective: 0.0,
            seed: cfg.seed,
            trace: Vec::new(),
            warnings: Vec::new(),
        },
    )?;
    model.meta.objective = model.log_likelihood(matrix);
    Ok(model)
}

/// Fold-in with the default random stream.
pub fn lda_fold_in(model: &TopicModel, doc: &[(usize, u32)], cfg: &LdaConfig) -> Result<Vec<f64>> {
    lda_fold_in_stream(model, doc, cfg, 0)
}

/// Gibbs sampling over a held-out document's assignments with the topic-word
/// table held fixed. `stream` selects an independent random stream so several
/// documents can be folded in reproducibly.
pub fn lda_fold_in_stream(
    model: &TopicModel,
    doc: &[(usize, u32)],
    cfg: &LdaConfig,
    stream: u64,
) -> Result<Vec<f64>> {
    if model.kind() != ModelKind::Lda {
        return Err(Error::invalid(format!("LDA fold-in on a {} model", model.kind())));
    }
    cfg.validate()?;
    let k = model.num_topics();
    let phi = model.topic_word();
    let words: Vec<usize> = doc
        .iter()
        .filter(|&&(w, _)| w < phi.ncols())
        .flat_map(|&(w, c)| std::iter::repeat_n(w, c as usize))
        .collect();
    if words.is_empty() {
        return Ok(vec![1.0 / k as f64; k]);
    }
    let alpha = cfg.alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let mut n_k = vec![0u32; k];
    let mut z: Vec<usize> = words
        .iter()
        .map(|_| {
            let t = rng.gen_range(0..k);
            n_k[t] += 1;
            t
        })
        .collect();

    let mut weights = vec![0.0; k];
    let mut acc = vec![0.0; k];
    let mut samples = 0usize;
    let denom = words.len() as f64 + k as f64 * alpha;
    for s in 1..=cfg.iterations {
        for (i, &w) in words.iter().enumerate() {
            n_k[z[i]] -= 1;
            let mut total = 0.0;
            for t in 0..k {
                total += (n_k[t] as f64 + alpha) * phi[[t, w]];
                weights[t] = total;
            }
            if total > 0.0 {
                let u = rng.gen::<f64>() * total;
                z[i] = weights.partition_point(|&c| c <= u).min(k - 1);
            }
            n_k[z[i]] += 1;
        }
        if cfg.keeps_sample(s) {
            for t in 0..k {
                acc[t] += (n_k[t] as f64 + alpha) / denom;
            }
            samples += 1;
        }
    }
    let mut out: Vec<f64> = acc.iter().map(|a| a / samples as f64).collect();
    crate::model::normalize(&mut out);
    Ok(out)
}
