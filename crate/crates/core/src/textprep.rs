//! Narrative preprocessing: cleaning, tokenization, stopword removal and
//! dictionary-checked lemmatization.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::AccidentRecord;

const GENERAL_STOPWORDS: &str = include_str!("../resources/stopwords_general.txt");
const AVIATION_STOPWORDS: &str = include_str!("../resources/stopwords_aviation.txt");
const LEMMA_EXCEPTIONS: &str = include_str!("../resources/lemma_exceptions.tsv");
const WORD_LIST: &str = include_str!("../resources/words.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizedDoc {
    pub record_id: usize,
    pub tokens: Vec<String>,
}

/// Why a record never made it into the document-term matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    EmptyNarrative,
    BelowMinTokens,
    VocabEmpty,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExclusionReason::EmptyNarrative => "empty_narrative",
            ExclusionReason::BelowMinTokens => "below_min_tokens",
            ExclusionReason::VocabEmpty => "vocab_empty",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub record_id: usize,
    pub reason: ExclusionReason,
}

/// Lowercases, replaces every maximal run of non-letters with one space and
/// trims. Only ASCII `a-z` count as letters.
pub fn clean_text(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for ch in raw.chars() {
        let lower = ch.to_ascii_lowercase();
        if lower.is_ascii_lowercase() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(lower);
        } else {
            pending_space = true;
        }
    }
    out
}

pub fn tokenize(clean: &str) -> Vec<String> {
    clean.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopwordSource {
    BuiltinGeneral,
    AviationExtension,
    UserFile,
}

#[derive(Debug, Clone, Default)]
pub struct StopwordList {
    words: HashSet<String>,
    sources: Vec<StopwordSource>,
}

fn parse_word_lines(text: &str) -> impl Iterator<Item = String> + '_ {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_lowercase)
}

impl StopwordList {
    pub fn empty() -> Self {
        StopwordList::default()
    }

    /// The general English list plus the (empty by default) aviation extension.
    pub fn builtin() -> Self {
        let mut list = StopwordList::empty();
        list.extend_from_text(GENERAL_STOPWORDS, StopwordSource::BuiltinGeneral);
        list.extend_from_text(AVIATION_STOPWORDS, StopwordSource::AviationExtension);
        list
    }

    /// One token per line, `#` starts a comment.
    pub fn extend_from_text(&mut self, text: &str, source: StopwordSource) {
        self.words.extend(parse_word_lines(text));
        if !self.sources.contains(&source) {
            self.sources.push(source);
        }
    }

    pub fn extend_from_file(&mut self, path: &Path) -> Result<()> {
        let text = read_resource(path)?;
        self.extend_from_text(&text, StopwordSource::UserFile);
        Ok(())
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn sources(&self) -> &[StopwordSource] {
        &self.sources
    }
}

impl<S: AsRef<str>> FromIterator<S> for StopwordList {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut list = StopwordList::empty();
        list.words.extend(
            iter.into_iter()
                .map(|s| s.as_ref().trim().to_lowercase())
                .filter(|s| !s.is_empty()),
        );
        list.sources.push(StopwordSource::UserFile);
        list
    }
}

fn read_resource(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::InputNotFound(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &StopwordList) -> Vec<String> {
    tokens.into_iter().filter(|t| !stoplist.contains(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    /// Accept the rewrite only when the result is a known base form.
    pub check_dictionary: bool,
}

impl SuffixRule {
    pub fn new(suffix: &str, replacement: &str) -> Self {
        SuffixRule {
            suffix: suffix.to_string(),
            replacement: replacement.to_string(),
            check_dictionary: true,
        }
    }
}

/// Exception table + ordered suffix rules + base-form word list.
///
/// Lookup order for a token: exception table, then "already a base form"
/// (left unchanged), then the first suffix rule whose rewrite is accepted.
/// Exception values are folded into the word list and chains are collapsed at
/// construction, so `lemmatize` is idempotent on its own output.
#[derive(Debug, Clone)]
pub struct LemmaLexicon {
    exceptions: HashMap<String, String>,
    suffix_rules: Vec<SuffixRule>,
    words: HashSet<String>,
}

pub fn default_suffix_rules() -> Vec<SuffixRule> {
    [
        ("ies", "y"),
        ("ied", "y"),
        ("ing", ""),
        ("ing", "e"),
        ("ed", ""),
        ("ed", "e"),
        ("es", ""),
        ("s", ""),
    ]
    .iter()
    .map(|(s, r)| SuffixRule::new(s, r))
    .collect()
}

impl LemmaLexicon {
    pub fn new(
        exceptions: HashMap<String, String>,
        suffix_rules: Vec<SuffixRule>,
        words: HashSet<String>,
    ) -> Result<Self> {
        let mut resolved = HashMap::with_capacity(exceptions.len());
        for (form, lemma) in &exceptions {
            let mut seen = HashSet::from([form.as_str()]);
            let mut cur = lemma.as_str();
            while let Some(next) = exceptions.get(cur) {
                if next == cur {
                    break;
                }
                if !seen.insert(cur) {
                    return Err(Error::Format {
                        what: "lemma exceptions",
                        message: format!("cycle through `{form}`"),
                    });
                }
                cur = next;
            }
            resolved.insert(form.clone(), cur.to_string());
        }
        let mut words = words;
        for lemma in resolved.values() {
            words.insert(lemma.clone());
        }
        // A form that maps to itself is just a base form.
        resolved.retain(|form, lemma| form != lemma);
        Ok(LemmaLexicon {
            exceptions: resolved,
            suffix_rules,
            words,
        })
    }

    pub fn builtin() -> Self {
        let exceptions = parse_exceptions(LEMMA_EXCEPTIONS).expect("shipped exceptions parse");
        let words = parse_word_lines(WORD_LIST).collect();
        LemmaLexicon::new(exceptions, default_suffix_rules(), words)
            .expect("shipped lexicon is consistent")
    }

    /// Loads `token<TAB>lemma` exceptions and a one-per-line word list; either
    /// may be omitted to use the shipped resource.
    pub fn from_files(exceptions: Option<&Path>, words: Option<&Path>) -> Result<Self> {
        let exc_text = match exceptions {
            Some(p) => read_resource(p)?,
            None => LEMMA_EXCEPTIONS.to_string(),
        };
        let word_text = match words {
            Some(p) => read_resource(p)?,
            None => WORD_LIST.to_string(),
        };
        LemmaLexicon::new(
            parse_exceptions(&exc_text)?,
            default_suffix_rules(),
            parse_word_lines(&word_text).collect(),
        )
    }

    pub fn is_known(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn exceptions(&self) -> &HashMap<String, String> {
        &self.exceptions
    }

    pub fn suffix_rules(&self) -> &[SuffixRule] {
        &self.suffix_rules
    }

    pub fn lemmatize_token(&self, token: &str) -> String {
        if let Some(lemma) = self.exceptions.get(token) {
            return lemma.clone();
        }
        if self.words.contains(token) {
            return token.to_string();
        }
        for rule in &self.suffix_rules {
            if let Some(stem) = token.strip_suffix(rule.suffix.as_str()) {
                if stem.is_empty() {
                    continue;
                }
                let candidate = format!("{stem}{}", rule.replacement);
                if !rule.check_dictionary || self.words.contains(&candidate) {
                    return candidate;
                }
            }
        }
        token.to_string()
    }
}

fn parse_exceptions(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (form, lemma) = line.split_once('\t').ok_or_else(|| Error::Format {
            what: "lemma exceptions",
            message: format!("line {}: expected `token<TAB>lemma`", lineno + 1),
        })?;
        let (form, lemma) = (form.trim().to_lowercase(), lemma.trim().to_lowercase());
        if form.is_empty() || lemma.is_empty() {
            return Err(Error::Format {
                what: "lemma exceptions",
                message: format!("line {}: empty field", lineno + 1),
            });
        }
        map.insert(form, lemma);
    }
    Ok(map)
}

pub fn lemmatize(tokens: Vec<String>, lexicon: &LemmaLexicon) -> Vec<String> {
    tokens.iter().map(|t| lexicon.lemmatize_token(t)).collect()
}

/// The four token stages for a single narrative. Lemmas that land on a
/// stopword are dropped, which keeps the whole pipeline idempotent.
pub fn preprocess_text(raw: &str, stoplist: &StopwordList, lexicon: &LemmaLexicon) -> Vec<String> {
    let tokens = tokenize(&clean_text(raw));
    let tokens = remove_stopwords(tokens, stoplist);
    let tokens = lemmatize(tokens, lexicon);
    remove_stopwords(tokens, stoplist)
}

#[derive(Debug, Clone, Default)]
pub struct PreprocessedCorpus {
    pub docs: Vec<TokenizedDoc>,
    pub excluded: Vec<Exclusion>,
}

/// Runs [`preprocess_text`] over every record (in parallel, order preserved)
/// and drops records with an empty narrative or fewer than `min_tokens`
/// surviving tokens.
pub fn preprocess_corpus(
    records: &[AccidentRecord],
    stoplist: &StopwordList,
    lexicon: &LemmaLexicon,
    min_tokens: usize,
) -> Result<PreprocessedCorpus> {
    if min_tokens < 1 {
        return Err(Error::invalid("min_tokens must be at least 1"));
    }
    let processed: Vec<std::result::Result<TokenizedDoc, Exclusion>> = records
        .par_iter()
        .map(|r| {
            if r.narrative.trim().is_empty() {
                return Err(Exclusion {
                    record_id: r.record_id,
                    reason: ExclusionReason::EmptyNarrative,
                });
            }
            let tokens = preprocess_text(&r.narrative, stoplist, lexicon);
            if tokens.len() < min_tokens {
                Err(Exclusion {
                    record_id: r.record_id,
                    reason: ExclusionReason::BelowMinTokens,
                })
            } else {
                Ok(TokenizedDoc {
                    record_id: r.record_id,
                    tokens,
                })
            }
        })
        .collect();

    let mut corpus = PreprocessedCorpus::default();
    for item in processed {
        match item {
            Ok(doc) => corpus.docs.push(doc),
            Err(ex) => corpus.excluded.push(ex),
        }
    }
    Ok(corpus)
}
