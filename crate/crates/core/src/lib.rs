//! Supertagging by category generation.
//!
//! CCG categories are treated as structured objects rather than opaque class
//! labels. A category is decomposed into a sequence of atomic tags under one of
//! four oracle tag sets ([`oracle`]), generated word by word either with a
//! tag-wise beam decoder or with an in-order transition system that can only
//! produce well-formed categories ([`transition`], [`decode`]), and candidates
//! from several generators are reranked against a whole-category classifier
//! ([`rerank`]). Scoring goes through a small log-linear reference model
//! ([`model`]); [`eval`] reproduces the usual accuracy breakdowns.

pub mod category;
pub mod corpus;
pub mod decode;
pub mod eval;
pub mod model;
pub mod oracle;
pub mod rerank;
pub mod transition;

pub use category::{Atom, Category, ParseError, PunctuationSet, Slash, Token};
pub use corpus::{CorpusFormat, LabelInventory, TaggedSentence, UNK};
pub use oracle::{OracleKind, OracleSpec, TagId, TagVocabulary};
pub use transition::{Action, TransitionState, TransitionSystem};

use sha2::{Digest, Sha256};

/// Short content hash used to tie model files to the vocabulary and
/// inventory they were trained with.
pub(crate) fn fingerprint(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..16])
}
