//! Report bundle and the files rendered from it.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::SweepRow;
use crate::model::{top_n_words, ModelKind, TopicModel, TopicTermRanking};
use crate::textprep::Exclusion;

/// Words per topic that feed the comparison table's word column.
pub const COMPARISON_WORDS_PER_TOPIC: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: ModelKind,
    pub selected_k: usize,
    pub coherence_umass: f64,
    pub coherence_umass_pair_mean: f64,
    pub coherence_npmi: f64,
    pub per_topic_umass: Vec<f64>,
    pub per_topic_npmi: Vec<f64>,
    pub perplexity: f64,
    pub heldout_docs: usize,
    pub heldout_tokens: u64,
    pub topics: Vec<TopicTermRanking>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub ingest_seconds: f64,
    pub preprocess_seconds: f64,
    pub matrix_seconds: f64,
    pub models_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub records_read: usize,
    pub records_in_category: usize,
    pub documents: usize,
    pub train_documents: usize,
    pub test_documents: usize,
    pub vocabulary_size: usize,
    pub excluded_records: usize,
    /// Absent in reproducible runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub manifest: RunManifest,
    /// One entry per model, in comparison-table order.
    pub reports: Vec<ModelReport>,
    pub sweep: Vec<SweepRow>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub top_words: String,
    pub coherence_umass: f64,
    pub coherence_npmi: f64,
    pub perplexity: f64,
}

/// Union of each topic's leading words, first occurrence wins.
pub fn comparison_words(topics: &[TopicTermRanking], per_topic: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for t in topics {
        for r in t.ranked_terms.iter().take(per_topic) {
            if seen.insert(r.term.as_str()) {
                out.push(r.term.clone());
            }
        }
    }
    out
}

pub fn comparison_rows(bundle: &ReportBundle) -> Vec<ComparisonRow> {
    let mut reports: Vec<&ModelReport> = bundle.reports.iter().collect();
    reports.sort_by_key(|r| ModelKind::REPORT_ORDER.iter().position(|&k| k == r.model));
    reports
        .into_iter()
        .map(|r| ComparisonRow {
            model: r.model.display_name().to_string(),
            k: r.selected_k,
            top_words: comparison_words(&r.topics, COMPARISON_WORDS_PER_TOPIC).join(", "),
            coherence_umass: r.coherence_umass,
            coherence_npmi: r.coherence_npmi,
            perplexity: r.perplexity,
        })
        .collect()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format {
        what: "CSV output",
        message: e.to_string(),
    }
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    if rows.is_empty() {
        w.write_record(["model", "K", "top_words", "coherence_umass", "coherence_npmi", "perplexity"])
            .map_err(csv_err)?;
    }
    finish(w)
}

pub fn parse_comparison_csv(text: &str) -> Result<Vec<ComparisonRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format {
        what: "CSV output",
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("CSV writer emits UTF-8"))
}

pub fn comparison_text(rows: &[ComparisonRow]) -> String {
    let header = ["Model", "K", "Coherence (UMass)", "Coherence (NPMI)", "Perplexity", "Common words"];
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                r.k.to_string(),
                format!("{:.4}", r.coherence_umass),
                format!("{:.4}", r.coherence_npmi),
                format!("{:.4}", r.perplexity),
                r.top_words.clone(),
            ]
        })
        .collect();
    let mut widths = header.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |row: &[String]| {
        let mut s = String::new();
        for (i, c) in row.iter().enumerate() {
            if i + 1 == row.len() {
                s.push_str(c);
            } else {
                s.push_str(&format!("{:<w$}  ", c, w = widths[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(&header.map(String::from));
    out.push_str(&line(&widths.map(|w| "-".repeat(w))));
    for row in &cells {
        out.push_str(&line(row));
    }
    out.push_str(
        "\nNotes:\n\
         - Perplexity is exp(-sum log p(D_d) / sum N_d) over the held-out split, natural log.\n\
         - NMF perplexity uses the normalized factors: p(w|z) from rows of H, p(z|d) from a\n  \
         non-negative least squares fold-in. NMF is not a probabilistic model.\n\
         - PLSA perplexity uses EM fold-in of the held-out documents with p(w|z) fixed.\n\
         - UMass coherence is the sum over ranked word pairs; NPMI is the mean over pairs.\n",
    );
    out
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "K", "coherence_umass", "coherence_npmi", "perplexity", "fit_seconds"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.as_str().to_string(),
            r.k.to_string(),
            fmt_f64(r.coherence_umass),
            fmt_f64(r.coherence_npmi),
            fmt_f64(r.perplexity),
            r.fit_seconds.map(fmt_f64).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn topics_csv(topics: &[TopicTermRanking]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["topic_id", "rank", "term", "weight"]).map_err(csv_err)?;
    for t in topics {
        for (rank, r) in t.ranked_terms.iter().enumerate() {
            w.write_record([t.topic_id.to_string(), (rank + 1).to_string(), r.term.clone(), fmt_f64(r.weight)])
                .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// `(term, weight)` pairs of the topic's top `n` terms, clamped to the
/// vocabulary size.
pub fn wordcloud_freqs(model: &TopicModel, topic_id: usize, n: usize) -> Result<Vec<(String, f64)>> {
    Ok(top_n_words(model, topic_id, n)?
        .ranked_terms
        .into_iter()
        .map(|r| (r.term, r.weight))
        .collect())
}

pub fn wordcloud_csv(freqs: &[(String, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["term", "weight"]).map_err(csv_err)?;
    for (term, weight) in freqs {
        w.write_record([term.clone(), fmt_f64(*weight)]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn excluded_log(excluded: &[Exclusion]) -> String {
    let mut out = String::from("# record_id\treason\n");
    for e in excluded {
        out.push_str(&format!("{}\t{}\n", e.record_id, e.reason));
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Writes the comparison table and sweep table rendered from `bundle`.
pub fn write_tables(bundle: &ReportBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows = comparison_rows(bundle);
    write_file(&dir.join("comparison.csv"), &comparison_csv(&rows)?)?;
    write_file(&dir.join("comparison.txt"), &comparison_text(&rows))?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(&bundle.sweep)?)
}

/// Writes every run artifact. `models` must line up with `bundle.reports`.
pub fn write_outputs(bundle: &ReportBundle, models: &[TopicModel], wordcloud_n: usize, dir: &Path) -> Result<()> {
    if models.len() != bundle.reports.len() {
        return Err(Error::invalid("one model per report is required"));
    }
    write_tables(bundle, dir)?;
    for (report, model) in bundle.reports.iter().zip(models) {
        let name = report.model.as_str();
        write_file(&dir.join(format!("topics_{name}.csv")), &topics_csv(&report.topics)?)?;
        write_file(&dir.join(format!("model_{name}.json")), &model.to_json())?;
        for topic in 0..model.num_topics() {
            let freqs = wordcloud_freqs(model, topic, wordcloud_n)?;
            write_file(&dir.join(format!("wordcloud_{name}_{topic}.csv")), &wordcloud_csv(&freqs)?)?;
        }
    }
    let manifest = serde_json::to_string_pretty(&bundle.manifest).expect("manifest serializes");
    write_file(&dir.join("manifest.json"), &(manifest + "\n"))?;
    write_file(&dir.join("excluded.log"), &excluded_log(&bundle.excluded))?;
    write_file(&dir.join("bundle.json"), &(bundle_to_json(bundle) + "\n"))
}

pub fn bundle_to_json(bundle: &ReportBundle) -> String {
    serde_json::to_string_pretty(bundle).expect("bundle serializes")
}

pub fn load_bundle(dir: &Path) -> Result<ReportBundle> {
    let path = dir.join("bundle.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::InputNotFound(path.clone())
        } else {
            Error::io(&path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        what: "report bundle",
        message: e.to_string(),
    })
}
