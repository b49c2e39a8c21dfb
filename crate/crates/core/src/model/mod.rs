//! Log-linear reference scorers for generator steps, transition actions and
//! whole-category classification.
//!
//! Every distribution is a softmax over linear feature scores, computed with
//! max-subtraction. Transition distributions are restricted to the legal
//! actions of the state; illegal actions get probability exactly zero.

pub mod features;
mod params;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::category::Atom;
use crate::corpus::{CorpusError, LabelInventory};
use crate::oracle::{OracleError, TagVocabulary};
use crate::transition::{action_space, TransitionError, TransitionState, TransitionSystem};

pub use features::{ContextVector, GeneratorStepQuery, BOS};
pub use params::{Component, Hyper, ModelParameters, DEFAULT_SEED, FORMAT_VERSION, NO_VOCAB};
pub use train::{
    action_fingerprint, classifier_loss, generator_loss, train_classifier, train_generator, train_transition,
    transition_loss, Gradient, LossGradient, TrainOutcome,
};

/// Probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn floored_ln(p: f64) -> f64 {
    p.max(PROB_FLOOR).ln()
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: String, expected: String },
    #[error("{what} fingerprint mismatch: model has {found}, artifacts have {expected}")]
    FingerprintMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("model component is {found}, expected {expected}")]
    ComponentMismatch { expected: Component, found: Component },
    #[error("corrupt model file (line {line}): {message}")]
    Corrupt { line: usize, message: String },
    #[error("no trainable positions: every gold category is masked as UNK")]
    EmptyTrainingSet,
    #[error("state is terminated; no action distribution")]
    Terminated,
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Transition(#[from] TransitionError),
}

/// Softmax in place; entries with `allowed[i] == false` become exactly 0.
pub(crate) fn softmax(scores: &mut [f64], allowed: Option<&[bool]>) {
    let ok = |i: usize| allowed.is_none_or(|m| m[i]);
    let max = scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| ok(i))
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (i, s) in scores.iter_mut().enumerate() {
        if ok(i) {
            *s = (*s - max).exp();
            total += *s;
        } else {
            *s = 0.0;
        }
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

/// Labels of a generator model: tag surfaces in id order.
pub fn generator_labels(vocab: &TagVocabulary) -> Vec<String> {
    vocab.tags().iter().map(|t| t.surface().to_string()).collect()
}

/// Labels of a classifier model: kept categories in inventory order.
pub fn classifier_labels(inv: &LabelInventory) -> Vec<String> {
    inv.categories().map(ToString::to_string).collect()
}

/// Labels of a transition model: the action space over the inventory atoms.
pub fn transition_labels(atoms: &[Atom]) -> Vec<String> {
    action_space(atoms).iter().map(ToString::to_string).collect()
}

/// Distribution over the vocabulary (indexed by tag id) for one step.
pub fn generator_step_distribution(
    q: &GeneratorStepQuery<'_>,
    vocab: &TagVocabulary,
    params: &ModelParameters,
) -> Vec<f64> {
    debug_assert_eq!(params.num_labels(), vocab.len());
    let mut scores = params.scores(&features::generator_features(q));
    softmax(&mut scores, None);
    scores
}

/// Distribution over kept inventory categories (indexed by inventory order).
pub fn classifier_distribution(ctx: &ContextVector, inv: &LabelInventory, params: &ModelParameters) -> Vec<f64> {
    debug_assert_eq!(params.num_labels(), inv.len());
    let mut scores = params.scores(&features::classifier_features(ctx));
    softmax(&mut scores, None);
    scores
}

/// Mask of legal actions over `action_space(atoms)`.
pub(crate) fn legal_mask(sys: &TransitionSystem, state: &TransitionState, atoms: &[Atom]) -> Vec<bool> {
    action_space(atoms)
        .iter()
        .map(|a| sys.check(state, a).is_ok())
        .collect()
}

/// Distribution over `action_space(atoms)`; illegal actions get 0.
pub fn transition_action_distribution(
    state: &TransitionState,
    ctx: &ContextVector,
    sys: &TransitionSystem,
    atoms: &[Atom],
    params: &ModelParameters,
) -> Result<Vec<f64>, ModelError> {
    if state.is_terminated() {
        return Err(ModelError::Terminated);
    }
    let mask = legal_mask(sys, state, atoms);
    if !mask.iter().any(|&m| m) {
        return Err(ModelError::Terminated);
    }
    let mut scores = params.scores(&features::transition_features(state, ctx));
    softmax(&mut scores, Some(&mask));
    Ok(scores)
}
