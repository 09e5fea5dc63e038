//! Non-negative matrix factorization with Lee-Seung multiplicative updates
//! for the Frobenius objective, and its probabilistic normalization.

use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtm::{DocTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{normalize, FitMeta, ModelKind, TopicModel};

/// Added to every multiplicative-update denominator.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// Above this many `(zero entry) x K` products the zero-entry part of the
/// objective is computed through the Gram-matrix identity instead of directly.
const DIRECT_ZERO_PART_LIMIT: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NmfObjective {
    Frobenius,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmfConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once the relative objective improvement drops below this.
    pub tol: f64,
    pub seed: u64,
    pub objective: NmfObjective,
}

impl NmfConfig {
    pub fn new(k: usize) -> Self {
        NmfConfig {
            k,
            max_iterations: 500,
            tol: 1e-6,
            seed: 0,
            objective: NmfObjective::Frobenius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("NMF needs K >= 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("NMF tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmfFactors {
    /// Document loadings, `n_docs x K`.
    pub w: Array2<f64>,
    /// Topic loadings, `K x n_terms`.
    pub h: Array2<f64>,
    /// Squared Frobenius error after initialization and after every update.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl NmfFactors {
    pub fn frobenius_error(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::NAN).max(0.0).sqrt()
    }
}

/// Multiplicative-update state over a sparse matrix; one [`step`](Self::step)
/// updates `H` and then `W`.
pub struct NmfSolver<'a> {
    v: &'a DocTermMatrix,
    w: Array2<f64>,
    h: Array2<f64>,
    trace: Vec<f64>,
}

impl<'a> NmfSolver<'a> {
    /// Seeded uniform initialization scaled so `WH` matches the mean of `V`.
    pub fn new(v: &'a DocTermMatrix, cfg: &NmfConfig) -> Result<Self> {
        cfg.validate()?;
        if v.is_empty() || v.total_mass() == 0 || v.n_terms() == 0 {
            return Err(Error::invalid("NMF needs a non-empty matrix"));
        }
        let (n, m, k) = (v.n_docs(), v.n_terms(), cfg.k);
        let mean = v.total_mass() as f64 / (n * m) as f64;
        let scale = (mean / k as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let w = Array2::from_shape_simple_fn((n, k), || scale * rng.gen_range(0.01..1.0));
        let h = Array2::from_shape_simple_fn((k, m), || scale * rng.gen_range(0.01..1.0));
        let mut solver = NmfSolver {
            v,
            w,
            h,
            trace: Vec::new(),
        };
        let obj = solver.objective();
        solver.trace.push(obj);
        Ok(solver)
    }

    pub fn w(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn h(&self) -> &Array2<f64> {
        &self.h
    }

    pub fn trace(&self) -> &[f64] {
        &self.trace
    }

    fn wh(&self, d: usize, t: usize) -> f64 {
        self.w.row(d).dot(&self.h.column(t))
    }

    /// `||V - WH||_F^2`.
    pub fn objective(&self) -> f64 {
        let (n, m, k) = (self.v.n_docs(), self.v.n_terms(), self.h.nrows());
        let mut nz_part = 0.0;
        let mut nz_wh_sq = 0.0;
        for (d, row) in self.v.rows().iter().enumerate() {
            for &(t, c) in row {
                let p = self.wh(d, t);
                nz_part += (c as f64 - p).powi(2);
                nz_wh_sq += p * p;
            }
        }
        let zeros = n * m - self.v.nnz();
        let zero_part = if zeros.saturating_mul(k) <= DIRECT_ZERO_PART_LIMIT {
            let mut acc = 0.0;
            for (d, row) in self.v.rows().iter().enumerate() {
                let mut it = row.iter().peekable();
                for t in 0..m {
                    if it.peek().map(|&&(tt, _)| tt == t).unwrap_or(false) {
                        it.next();
                        continue;
                    }
                    acc += self.wh(d, t).powi(2);
                }
            }
            acc
        } else {
            let wtw = self.w.t().dot(&self.w);
            let hht = self.h.dot(&self.h.t());
            ((&wtw * &hht).sum() - nz_wh_sq).max(0.0)
        };
        nz_part + zero_part
    }

    /// `H <- H * (W^T V) / (W^T W H + eps)`, then
    /// `W <- W * (V H^T) / (W H H^T + eps)`. Returns the new objective.
    pub fn step(&mut self) -> f64 {
        let mut wtv = Array2::<f64>::zeros(self.h.raw_dim());
        for (d, row) in self.v.rows().iter().enumerate() {
            let wd = self.w.row(d);
            for &(t, c) in row {
                let mut col = wtv.column_mut(t);
                col.scaled_add(c as f64, &wd);
            }
        }
        let wtw = self.w.t().dot(&self.w);
        let denom = wtw.dot(&self.h);
        ndarray::Zip::from(&mut self.h)
            .and(&wtv)
            .and(&denom)
            .for_each(|h, &num, &den| *h *= num / (den + DENOMINATOR_FLOOR));

        let mut vht = Array2::<f64>::zeros(self.w.raw_dim());
        for (d, row) in self.v.rows().iter().enumerate() {
            let mut out = vht.row_mut(d);
            for &(t, c) in row {
                out.scaled_add(c as f64, &self.h.column(t));
            }
        }
        let hht = self.h.dot(&self.h.t());
        let denom = self.w.dot(&hht);
        ndarray::Zip::from(&mut self.w)
            .and(&vht)
            .and(&denom)
            .for_each(|w, &num, &den| *w *= num / (den + DENOMINATOR_FLOOR));
        debug_assert!(self.w.iter().chain(self.h.iter()).all(|&x| x >= 0.0));

        let obj = self.objective();
        self.trace.push(obj);
        obj
    }

    pub fn into_factors(self, seed: u64, warnings: Vec<String>) -> NmfFactors {
        NmfFactors {
            iterations: self.trace.len() - 1,
            w: self.w,
            h: self.h,
            objective_trace: self.trace,
            seed,
            warnings,
        }
    }
}

/// Runs multiplicative updates until the relative improvement falls below
/// `tol` or `max_iterations` is reached.
pub fn fit_nmf(matrix: &DocTermMatrix, cfg: &NmfConfig) -> Result<NmfFactors> {
    let mut warnings = Vec::new();
    if cfg.k > matrix.n_docs().min(matrix.n_terms()) {
        let msg = format!(
            "K={} exceeds min(n_docs, n_terms) = {}",
            cfg.k,
            matrix.n_docs().min(matrix.n_terms())
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut solver = NmfSolver::new(matrix, cfg)?;
    let mut prev = solver.trace()[0];
    for _ in 0..cfg.max_iterations {
        let cur = solver.step();
        if cur == 0.0 || (prev - cur) / prev < cfg.tol {
            break;
        }
        prev = cur;
    }
    Ok(solver.into_factors(cfg.seed, warnings))
}

/// Normalizes factors into a topic model: `p(w|z) = H[z]/sum(H[z])` and
/// `p(z|d) ∝ W[d,z] * sum(H[z])`, so the mixture reproduces `WH` up to a
/// per-document scale.
pub fn nmf_to_topic_model(factors: &NmfFactors, vocab: Arc<Vocabulary>) -> Result<TopicModel> {
    if factors.h.ncols() != vocab.len() {
        return Err(Error::invalid("vocabulary does not match H width"));
    }
    let mut warnings = factors.warnings.clone();
    let mut topic_word = factors.h.clone();
    let sums: Array1<f64> = factors.h.sum_axis(Axis(1));
    for (z, mut row) in topic_word.axis_iter_mut(Axis(0)).enumerate() {
        if !normalize(row.as_slice_mut().expect("standard layout")) {
            warnings.push(format!("topic {z} has an all-zero H row; using a uniform distribution"));
        }
    }
    let mut doc_topic = &factors.w * &sums.view().insert_axis(Axis(0));
    for (d, mut row) in doc_topic.axis_iter_mut(Axis(0)).enumerate() {
        if !normalize(row.as_slice_mut().expect("standard layout")) {
            warnings.push(format!("document {d} has an all-zero mixture; using a uniform distribution"));
        }
    }
    TopicModel::new(
        ModelKind::Nmf,
        topic_word,
        doc_topic,
        vocab,
        FitMeta {
            iterations: factors.iterations,
            objective: factors.objective_trace.last().copied().unwrap_or(f64::NAN),
            seed: factors.seed,
            trace: factors.objective_trace.clone(),
            warnings,
        },
    )
}

pub fn fit_nmf_model(matrix: &DocTermMatrix, vocab: Arc<Vocabulary>, cfg: &NmfConfig) -> Result<TopicModel> {
    let factors = fit_nmf(matrix, cfg)?;
    nmf_to_topic_model(&factors, vocab)
}

/// Held-out inference for an NMF-derived model: non-negative least squares
/// `v ≈ c Φ` with the normalized topics `Φ` fixed, solved by the same
/// multiplicative rule, then `p(z|d) ∝ c`.
pub struct NmfFoldIn<'a> {
    model: &'a TopicModel,
    gram: Array2<f64>,
    max_iterations: usize,
    tol: f64,
}

impl<'a> NmfFoldIn<'a> {
    pub fn new(model: &'a TopicModel, cfg: &NmfConfig) -> Result<Self> {
        if model.kind() != ModelKind::Nmf {
            return Err(Error::invalid(format!("NMF fold-in on a {} model", model.kind())));
        }
        let phi = model.topic_word();
        Ok(NmfFoldIn {
            model,
            gram: phi.dot(&phi.t()),
            max_iterations: cfg.max_iterations,
            tol: cfg.tol,
        })
    }

    pub fn infer(&self, doc: &[(usize, u32)]) -> Vec<f64> {
        let phi = self.model.topic_word();
        let k = phi.nrows();
        let doc: Vec<(usize, u32)> = doc.iter().copied().filter(|&(w, _)| w < phi.ncols()).collect();
        let mass: f64 = doc.iter().map(|&(_, c)| c as f64).sum();
        if mass == 0.0 {
            return vec![1.0 / k as f64; k];
        }
        let mut phiv = Array1::<f64>::zeros(k);
        for &(w, c) in &doc {
            phiv.scaled_add(c as f64, &phi.column(w));
        }
        let v_sq: f64 = doc.iter().map(|&(_, c)| (c as f64).powi(2)).sum();
        let mut c = Array1::from_elem(k, mass / k as f64);
        let objective = |c: &Array1<f64>| v_sq - 2.0 * c.dot(&phiv) + c.dot(&self.gram.dot(c));
        let mut prev = objective(&c);
        for _ in 0..self.max_iterations {
            let denom = self.gram.dot(&c);
            ndarray::Zip::from(&mut c)
                .and(&phiv)
                .and(&denom)
                .for_each(|x, &num, &den| *x *= num / (den + DENOMINATOR_FLOOR));
            let cur = objective(&c);
            if prev <= 0.0 || (prev - cur) / prev.abs() < self.tol {
                break;
            }
            prev = cur;
        }
        let mut out = c.to_vec();
        normalize(&mut out);
        out
    }
}

pub fn nmf_fold_in(model: &TopicModel, doc: &[(usize, u32)], cfg: &NmfConfig) -> Result<Vec<f64>> {
    Ok(NmfFoldIn::new(model, cfg)?.infer(doc))
}
