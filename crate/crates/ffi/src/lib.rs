//! C ABI over `topicforge`.
//!
//! Every fallible function returns a [`TfStatus`]; on failure the message is
//! available from [`tf_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use topicforge::model::top_n_words;
use topicforge::pipeline::{run_pipeline, PipelineConfig, RunOutput};
use topicforge::textprep::{preprocess_text, LemmaLexicon, StopwordList};
use topicforge::{Error, ModelKind, TopicModel};

/// Result codes. Input, empty-corpus and model-failure codes match the
/// command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullArgument = 1,
    InputError = 2,
    EmptyCorpus = 3,
    ModelFailure = 4,
    InvalidUtf8 = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfModelKind {
    Lda = 0,
    Plsa = 1,
    Nmf = 2,
}

impl From<ModelKind> for TfModelKind {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Lda => TfModelKind::Lda,
            ModelKind::Plsa => TfModelKind::Plsa,
            ModelKind::Nmf => TfModelKind::Nmf,
        }
    }
}

/// A fitted topic model.
pub struct TfModel {
    model: TopicModel,
    terms: Vec<CString>,
}

/// The outputs of one pipeline run.
pub struct TfRun {
    output: RunOutput,
}

/// Tokens produced by [`tf_preprocess`].
pub struct TfTokens {
    tokens: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> TfStatus {
    match e.exit_code() {
        2 => TfStatus::InputError,
        3 => TfStatus::EmptyCorpus,
        _ => TfStatus::ModelFailure,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TfStatus>) -> TfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            TfStatus::Panic
        }
    }
}

fn fail(e: Error) -> TfStatus {
    set_error(e.to_string());
    status_of(&e)
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TfStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        return Err(TfStatus::NullArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{name} is not valid UTF-8"));
        TfStatus::InvalidUtf8
    })
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), TfStatus> {
    if p.is_null() {
        set_error(format!("{name} is null"));
        Err(TfStatus::NullArgument)
    } else {
        Ok(())
    }
}

fn c_string(s: &str) -> CString {
    CString::new(s.replace('\0', " ")).expect("interior NUL removed")
}

fn wrap_model(model: TopicModel) -> *mut TfModel {
    let terms = model.vocab().terms().iter().map(|t| c_string(t)).collect();
    Box::into_raw(Box::new(TfModel { model, terms }))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next `tf_*` call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Runs the pipeline described by a TOML config file and writes its outputs.
/// `out_dir` may be null to keep the config's output directory.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_run_pipeline(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut TfRun,
) -> TfStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = str_arg(config_path, "config_path")?;
        let mut cfg = PipelineConfig::from_toml_file(&PathBuf::from(path)).map_err(fail)?;
        if !out_dir.is_null() {
            cfg.out = PathBuf::from(str_arg(out_dir, "out_dir")?);
        }
        let output = run_pipeline(&cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(TfRun { output }));
        Ok(())
    })
}

/// Number of models in a run, in comparison-table order.
///
/// # Safety
/// `run` must be null or a live handle from [`tf_run_pipeline`].
#[no_mangle]
pub unsafe extern "C" fn tf_run_model_count(run: *const TfRun) -> usize {
    run.as_ref().map_or(0, |r| r.output.models.len())
}

/// Copies the selected model at `index` into a new handle.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_run_model(run: *const TfRun, index: usize, out: *mut *mut TfModel) -> TfStatus {
    guard(|| {
        non_null(run, "run")?;
        non_null(out, "out")?;
        let models = &(*run).output.models;
        let Some(m) = models.get(index) else {
            set_error(format!("model index {index} out of range ({} models)", models.len()));
            return Err(TfStatus::OutOfRange);
        };
        *out = wrap_model(m.clone());
        Ok(())
    })
}

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_run_free(run: *mut TfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Loads a model previously written as `model_<kind>.json`.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_model_load(path: *const c_char, out: *mut *mut TfModel) -> TfStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let text = std::fs::read_to_string(&path).map_err(|e| {
            fail(if e.kind() == std::io::ErrorKind::NotFound {
                Error::InputNotFound(path.clone())
            } else {
                Error::Io { path: path.clone(), source: e }
            })
        })?;
        let model = TopicModel::from_json(&text).map_err(fail)?;
        *out = wrap_model(model);
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_model_free(model: *mut TfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_model_kind(model: *const TfModel) -> TfModelKind {
    (*model).model.kind().into()
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_model_num_topics(model: *const TfModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.num_topics())
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_model_vocab_size(model: *const TfModel) -> usize {
    model.as_ref().map_or(0, |m| m.terms.len())
}

/// Term string for `term_id`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_model_term(model: *const TfModel, term_id: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.terms.get(term_id))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// Copies `p(w | topic)` for every term into `weights`, which must hold
/// `len >= vocab_size` values.
///
/// # Safety
/// `model` must be a live handle; `weights` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_model_topic_weights(
    model: *const TfModel,
    topic: usize,
    weights: *mut f64,
    len: usize,
) -> TfStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(weights, "weights")?;
        let m = &(*model).model;
        if topic >= m.num_topics() {
            set_error(format!("topic {topic} out of range ({} topics)", m.num_topics()));
            return Err(TfStatus::OutOfRange);
        }
        let row = m.topic_word().row(topic);
        if len < row.len() {
            set_error(format!("buffer holds {len} values, {} needed", row.len()));
            return Err(TfStatus::OutOfRange);
        }
        let dst = std::slice::from_raw_parts_mut(weights, row.len());
        for (d, &w) in dst.iter_mut().zip(row.iter()) {
            *d = w;
        }
        Ok(())
    })
}

/// Writes up to `n` top terms of `topic` (ids and weights, ranked) and stores
/// how many were written in `written`.
///
/// # Safety
/// `term_ids` and `weights` must each hold `n` values; `written` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tf_model_top_terms(
    model: *const TfModel,
    topic: usize,
    n: usize,
    term_ids: *mut usize,
    weights: *mut f64,
    written: *mut usize,
) -> TfStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(term_ids, "term_ids")?;
        non_null(weights, "weights")?;
        non_null(written, "written")?;
        let ranking = top_n_words(&(*model).model, topic, n).map_err(|e| {
            set_error(e.to_string());
            TfStatus::OutOfRange
        })?;
        let ids = std::slice::from_raw_parts_mut(term_ids, n);
        let ws = std::slice::from_raw_parts_mut(weights, n);
        for (i, r) in ranking.ranked_terms.iter().enumerate() {
            ids[i] = r.term_id;
            ws[i] = r.weight;
        }
        *written = ranking.ranked_terms.len();
        Ok(())
    })
}

/// Cleans, tokenizes, removes built-in stopwords and lemmatizes `text`.
///
/// # Safety
/// `text` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_preprocess(text: *const c_char, out: *mut *mut TfTokens) -> TfStatus {
    guard(|| {
        non_null(out, "out")?;
        let text = str_arg(text, "text")?;
        let tokens = preprocess_text(text, &StopwordList::builtin(), &LemmaLexicon::builtin());
        *out = Box::into_raw(Box::new(TfTokens {
            tokens: tokens.iter().map(|t| c_string(t)).collect(),
        }));
        Ok(())
    })
}

/// # Safety
/// `tokens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_tokens_len(tokens: *const TfTokens) -> usize {
    tokens.as_ref().map_or(0, |t| t.tokens.len())
}

/// Token at `index`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `tokens` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tf_tokens_get(tokens: *const TfTokens, index: usize) -> *const c_char {
    tokens
        .as_ref()
        .and_then(|t| t.tokens.get(index))
        .map_or(ptr::null(), |s| s.as_ptr())
}

/// # Safety
/// `tokens` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_tokens_free(tokens: *mut TfTokens) {
    if !tokens.is_null() {
        drop(Box::from_raw(tokens));
    }
}
