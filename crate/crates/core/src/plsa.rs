//! Probabilistic latent semantic analysis fitted by expectation-maximization,
//! with validation-based early stopping.

use std::sync::Arc;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dtm::{DocTermMatrix, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{normalize, FitMeta, ModelKind, TopicModel};

/// Added inside the log when scoring validation documents, whose words may
/// have zero probability under every topic.
const VALIDATION_EPSILON: f64 = 1e-12;
const VALIDATION_FOLD_IN_ITERS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsaConfig {
    pub k: usize,
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood improvement drops below this.
    pub tol: f64,
    pub seed: u64,
    /// Fraction of training documents held back to detect overfitting.
    pub early_stop_fraction: f64,
}

impl PlsaConfig {
    pub fn new(k: usize) -> Self {
        PlsaConfig {
            k,
            max_iterations: 500,
            tol: 1e-6,
            seed: 0,
            early_stop_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("PLSA needs K >= 1"));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::invalid("PLSA tol must be positive"));
        }
        if !(0.0..0.5).contains(&self.early_stop_fraction) {
            return Err(Error::invalid("PLSA early_stop_fraction must lie in [0, 0.5)"));
        }
        Ok(())
    }
}

/// EM parameters. `p_w_given_z` is `K x V`, `p_z_given_d` is `D x K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlsaParams {
    pub p_w_given_z: Array2<f64>,
    pub p_z_given_d: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    ValidationDecrease,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct PlsaFit {
    /// Parameters over the documents that were actually fitted (validation
    /// documents excluded).
    pub params: PlsaParams,
    /// Training log-likelihood per iteration, ending with the returned
    /// parameters' value.
    pub log_likelihood: Vec<f64>,
    pub validation_log_likelihood: Vec<f64>,
    pub fit_docs: Vec<usize>,
    pub validation_docs: Vec<usize>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub warnings: Vec<String>,
}

/// Word-major working copy: `wz[w * K + k] = p(w|z=k)`.
#[derive(Clone)]
struct State {
    wz: Vec<f64>,
    dz: Vec<f64>,
}

struct Em<'a> {
    rows: Vec<&'a [(usize, u32)]>,
    k: usize,
    v: usize,
}

impl Em<'_> {
    fn log_likelihood(&self, s: &State) -> f64 {
        let k = self.k;
        let mut ll = 0.0;
        for (d, row) in self.rows.iter().enumerate() {
            let dz = &s.dz[d * k..(d + 1) * k];
            for &(w, n) in row.iter() {
                let wz = &s.wz[w * k..(w + 1) * k];
                let p: f64 = dz.iter().zip(wz).map(|(a, b)| a * b).sum();
                ll += n as f64 * p.ln();
            }
        }
        ll
    }

    /// One E+M step. Returns the log-likelihood of `s` (before the update).
    fn step(&self, s: &State, warnings: &mut Vec<String>) -> (State, f64) {
        let k = self.k;
        let mut acc_wz = vec![0.0; self.v * k];
        let mut acc_dz = vec![0.0; self.rows.len() * k];
        let mut resp = vec![0.0; k];
        let mut ll = 0.0;
        for (d, row) in self.rows.iter().enumerate() {
            let dz = &s.dz[d * k..(d + 1) * k];
            let out_dz = &mut acc_dz[d * k..(d + 1) * k];
            for &(w, n) in row.iter() {
                let wz = &s.wz[w * k..(w + 1) * k];
                let mut total = 0.0;
                for z in 0..k {
                    resp[z] = dz[z] * wz[z];
                    total += resp[z];
                }
                if total <= 0.0 {
                    continue;
                }
                ll += n as f64 * total.ln();
                let scale = n as f64 / total;
                let out_wz = &mut acc_wz[w * k..(w + 1) * k];
                for z in 0..k {
                    let r = resp[z] * scale;
                    out_wz[z] += r;
                    out_dz[z] += r;
                }
            }
        }
        // M-step: column-normalize p(w|z), row-normalize p(z|d)
        let mut col = vec![0.0; k];
        for w in 0..self.v {
            for z in 0..k {
                col[z] += acc_wz[w * k + z];
            }
        }
        for (z, &c) in col.iter().enumerate() {
            if c > 0.0 {
                for w in 0..self.v {
                    acc_wz[w * k + z] /= c;
                }
            } else {
                let u = 1.0 / self.v as f64;
                for w in 0..self.v {
                    acc_wz[w * k + z] = u;
                }
                let msg = format!("topic {z} lost all mass; reset to uniform");
                if !warnings.contains(&msg) {
                    warnings.push(msg);
                }
            }
        }
        for d in 0..self.rows.len() {
            normalize(&mut acc_dz[d * k..(d + 1) * k]);
        }
        (
            State {
                wz: acc_wz,
                dz: acc_dz,
            },
            ll,
        )
    }
}

/// EM over a single document's mixture with `phi(z, w)` frozen. Returns the
/// number of iterations performed.
fn fold_in_em<F: Fn(usize, usize) -> f64>(
    phi: F,
    k: usize,
    doc: &[(usize, u32)],
    theta: &mut [f64],
    tol: f64,
    max_iterations: usize,
) -> usize {
    let mut acc = vec![0.0; k];
    let mut resp = vec![0.0; k];
    let mut prev: Option<f64> = None;
    for it in 0..max_iterations {
        acc.iter_mut().for_each(|a| *a = 0.0);
        let mut ll = 0.0;
        for &(w, n) in doc {
            let mut total = 0.0;
            for z in 0..k {
                resp[z] = theta[z] * phi(z, w);
                total += resp[z];
            }
            if total <= 0.0 {
                continue;
            }
            ll += n as f64 * total.ln();
            let scale = n as f64 / total;
            for z in 0..k {
                acc[z] += resp[z] * scale;
            }
        }
        if acc.iter().all(|&a| a == 0.0) {
            return it;
        }
        theta.copy_from_slice(&acc);
        normalize(theta);
        if let Some(p) = prev {
            if (ll - p) / p.abs().max(f64::MIN_POSITIVE) < tol {
                return it + 1;
            }
        }
        prev = Some(ll);
    }
    max_iterations
}

fn smoothed_doc_ll<F: Fn(usize, usize) -> f64>(phi: F, theta: &[f64], doc: &[(usize, u32)]) -> f64 {
    doc.iter()
        .map(|&(w, n)| {
            let p: f64 = theta.iter().enumerate().map(|(z, t)| t * phi(z, w)).sum();
            n as f64 * (p + VALIDATION_EPSILON).ln()
        })
        .sum()
}

fn random_state(k: usize, v: usize, d: usize, rng: &mut ChaCha8Rng) -> State {
    let mut wz: Vec<f64> = (0..v * k).map(|_| rng.gen_range(0.01..1.0)).collect();
    for z in 0..k {
        let s: f64 = (0..v).map(|w| wz[w * k + z]).sum();
        for w in 0..v {
            wz[w * k + z] /= s;
        }
    }
    let mut dz: Vec<f64> = (0..d * k).map(|_| rng.gen_range(0.01..1.0)).collect();
    for row in dz.chunks_mut(k) {
        normalize(row);
    }
    State { wz, dz }
}

/// Fits PLSA parameters. When `early_stop_fraction > 0` a seeded subset of
/// documents is held out and EM stops (reverting one step) as soon as their
/// folded-in log-likelihood decreases.
pub fn fit_plsa_params(matrix: &DocTermMatrix, cfg: &PlsaConfig) -> Result<PlsaFit> {
    cfg.validate()?;
    if matrix.is_empty() || matrix.total_mass() == 0 {
        return Err(Error::invalid("PLSA needs a non-empty matrix"));
    }
    let (k, v, n) = (cfg.k, matrix.n_terms(), matrix.n_docs());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n_val = (cfg.early_stop_fraction * n as f64).floor() as usize;
    let (fit_docs, validation_docs) = if n_val > 0 && n_val < n {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (val, fit) = order.split_at(n_val);
        let (mut val, mut fit) = (val.to_vec(), fit.to_vec());
        val.sort_unstable();
        fit.sort_unstable();
        (fit, val)
    } else {
        ((0..n).collect(), Vec::new())
    };

    let em = Em {
        rows: fit_docs.iter().map(|&d| matrix.row(d)).collect(),
        k,
        v,
    };
    let mut state = random_state(k, v, fit_docs.len(), &mut rng);
    let mut warnings = Vec::new();
    let mut trace = Vec::new();
    let mut val_trace = Vec::new();
    let mut val_theta = vec![1.0 / k as f64; validation_docs.len() * k];
    let mut stop_reason = StopReason::MaxIterations;
    let mut iterations = 0;

    for _ in 0..cfg.max_iterations {
        let (next, ll) = em.step(&state, &mut warnings);
        iterations += 1;
        let converged = trace
            .last()
            .map(|&prev: &f64| (ll - prev) / prev.abs().max(f64::MIN_POSITIVE) < cfg.tol)
            .unwrap_or(false);
        trace.push(ll);
        let previous = std::mem::replace(&mut state, next);
        if converged {
            stop_reason = StopReason::Converged;
            break;
        }
        if !validation_docs.is_empty() {
            let phi = |z: usize, w: usize| state.wz[w * k + z];
            let mut total = 0.0;
            for (i, &d) in validation_docs.iter().enumerate() {
                let theta = &mut val_theta[i * k..(i + 1) * k];
                fold_in_em(phi, k, matrix.row(d), theta, cfg.tol, VALIDATION_FOLD_IN_ITERS);
                total += smoothed_doc_ll(phi, theta, matrix.row(d));
            }
            let decreased = val_trace.last().map(|&p| total < p).unwrap_or(false);
            val_trace.push(total);
            if decreased {
                state = previous;
                stop_reason = StopReason::ValidationDecrease;
                break;
            }
        }
    }
    trace.push(em.log_likelihood(&state));

    let mut p_w_given_z = Array2::zeros((k, v));
    for w in 0..v {
        for z in 0..k {
            p_w_given_z[[z, w]] = state.wz[w * k + z];
        }
    }
    let p_z_given_d = Array2::from_shape_vec((fit_docs.len(), k), state.dz).expect("shape");
    Ok(PlsaFit {
        params: PlsaParams {
            p_w_given_z,
            p_z_given_d,
        },
        log_likelihood: trace,
        validation_log_likelihood: val_trace,
        fit_docs,
        validation_docs,
        iterations,
        stop_reason,
        warnings,
    })
}

/// Fits PLSA and packages it as a [`TopicModel`]. Mixtures of validation
/// documents are obtained by fold-in, so `doc_topic` covers every row of
/// `matrix`.
pub fn fit_plsa(matrix: &DocTermMatrix, vocab: Arc<Vocabulary>, cfg: &PlsaConfig) -> Result<TopicModel> {
    if vocab.len() != matrix.n_terms() {
        return Err(Error::invalid("vocabulary does not match matrix width"));
    }
    let fit = fit_plsa_params(matrix, cfg)?;
    let k = cfg.k;
    let phi = &fit.params.p_w_given_z;
    let mut doc_topic = Array2::zeros((matrix.n_docs(), k));
    for (i, &d) in fit.fit_docs.iter().enumerate() {
        doc_topic.row_mut(d).assign(&fit.params.p_z_given_d.row(i));
    }
    for &d in &fit.validation_docs {
        let mut theta = vec![1.0 / k as f64; k];
        fold_in_em(|z, w| phi[[z, w]], k, matrix.row(d), &mut theta, cfg.tol, cfg.max_iterations);
        doc_topic.row_mut(d).assign(&ndarray::ArrayView1::from(&theta));
    }
    let mut warnings = fit.warnings;
    if fit.stop_reason == StopReason::ValidationDecrease {
        warnings.push(format!("early stop after {} iterations (validation likelihood fell)", fit.iterations));
    }
    let objective = *fit.log_likelihood.last().expect("trace is non-empty");
    TopicModel::new(
        ModelKind::Plsa,
        fit.params.p_w_given_z,
        doc_topic,
        vocab,
        FitMeta {
            iterations: fit.iterations,
            objective,
            seed: cfg.seed,
            trace: fit.log_likelihood,
            warnings,
        },
    )
}

/// EM over `p(z|d_new)` only; the model's topic-word table is not touched.
pub fn plsa_fold_in(model: &TopicModel, doc: &[(usize, u32)], cfg: &PlsaConfig) -> Result<Vec<f64>> {
    if model.kind() != ModelKind::Plsa {
        return Err(Error::invalid(format!("PLSA fold-in on a {} model", model.kind())));
    }
    let k = model.num_topics();
    let phi = model.topic_word();
    let doc: Vec<(usize, u32)> = doc.iter().copied().filter(|&(w, _)| w < phi.ncols()).collect();
    let mut theta = vec![1.0 / k as f64; k];
    fold_in_em(|z, w| phi[[z, w]], k, &doc, &mut theta, cfg.tol, cfg.max_iterations);
    Ok(theta)
}
