//! Topic modeling for aviation accident narratives.
//!
//! The crate covers the whole path from a Socrata-style CSV export to a model
//! comparison report:
//!
//! * [`ingest`] parses records and assigns operator categories,
//! * [`textprep`] cleans, tokenizes, filters stopwords and lemmatizes,
//! * [`dtm`] builds the vocabulary, the sparse document-term matrix, the
//!   train/test split and document co-occurrence statistics,
//! * [`lda`], [`plsa`] and [`nmf`] fit the three topic models into the shared
//!   [`model::TopicModel`] representation,
//! * [`eval`] computes held-out perplexity, UMass/NPMI coherence and the
//!   topic-count sweep,
//! * [`pipeline`] and [`report`] orchestrate a full run and write its outputs.

pub mod dtm;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod lda;
pub mod model;
pub mod nmf;
pub mod pipeline;
pub mod plsa;
pub mod report;
pub mod textprep;

pub use error::{Error, Result};
pub use model::{ModelKind, TopicModel};
