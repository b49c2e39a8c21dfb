//! SGD training of the reference log-linear scorers.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{self, ContextVector, GeneratorStepQuery, BOS};
use super::params::{Component, Hyper, ModelParameters, NO_VOCAB};
use super::{classifier_labels, floored_ln, generator_labels, legal_mask, softmax, transition_labels, ModelError};
use crate::corpus::{LabelInventory, TaggedSentence};
use crate::oracle::{TagId, TagVocabulary};
use crate::transition::{TransitionState, TransitionSystem};

/// One softmax decision: active features, gold label and optional legality mask.
#[derive(Debug, Clone)]
struct Example {
    features: Vec<String>,
    gold: usize,
    mask: Option<Vec<bool>>,
}

impl Example {
    fn probabilities(&self, params: &ModelParameters) -> Vec<f64> {
        let mut p = params.scores(&self.features);
        softmax(&mut p, self.mask.as_deref());
        p
    }
}

/// Sparse gradient: one row per touched feature.
pub type Gradient = BTreeMap<String, Vec<f64>>;

#[derive(Debug, Clone, Default)]
pub struct LossGradient {
    pub loss: f64,
    pub gradient: Gradient,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParameters,
    /// Mean per-word loss of each epoch, in order.
    pub epoch_losses: Vec<f64>,
}

/// Returns the loss of one example and adds `scale` times its gradient to `acc`.
fn accumulate(ex: &Example, params: &ModelParameters, scale: f64, acc: &mut Gradient) -> f64 {
    let p = ex.probabilities(params);
    let n = p.len();
    for f in &ex.features {
        let row = acc.entry(f.clone()).or_insert_with(|| vec![0.0; n]);
        for (l, (g, &pl)) in row.iter_mut().zip(&p).enumerate() {
            let target = if l == ex.gold { 1.0 } else { 0.0 };
            *g += scale * (pl - target);
        }
    }
    -floored_ln(p[ex.gold])
}

fn sgd_step(ex: &Example, params: &mut ModelParameters, lr: f64) -> f64 {
    let p = ex.probabilities(params);
    for f in &ex.features {
        let row = params.row_mut(f);
        for (l, (w, &pl)) in row.iter_mut().zip(&p).enumerate() {
            let target = if l == ex.gold { 1.0 } else { 0.0 };
            *w -= lr * (pl - target);
        }
    }
    -floored_ln(p[ex.gold])
}

/// (sentence, position) pairs that take part in training.
fn trainable_positions(corpus: &[TaggedSentence], inv: &LabelInventory) -> Result<Vec<(usize, usize)>, ModelError> {
    let mut out = Vec::new();
    for (si, s) in corpus.iter().enumerate() {
        for (i, masked) in inv.unk_mask(s)?.into_iter().enumerate() {
            if !masked {
                out.push((si, i));
            }
        }
    }
    if out.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    Ok(out)
}

fn generator_examples(ctx: &ContextVector, seq: &[TagId], vocab: &TagVocabulary) -> Vec<Example> {
    let mut out = Vec::with_capacity(seq.len());
    let mut prev2 = BOS;
    let mut prev = BOS;
    for (j, &id) in seq.iter().enumerate() {
        let q = GeneratorStepQuery {
            context: ctx,
            prev_tag: prev,
            prev2_tag: prev2,
            step: j + 1,
        };
        out.push(Example {
            features: features::generator_features(&q),
            gold: id.0,
            mask: None,
        });
        prev2 = prev;
        prev = vocab.tag(id).surface();
    }
    out
}

fn transition_examples(
    ctx: &ContextVector,
    category: &crate::category::Category,
    sys: &TransitionSystem,
    atoms: &[crate::category::Atom],
    index: &HashMap<String, usize>,
) -> Result<Vec<Example>, ModelError> {
    let mut state = TransitionState::initial();
    let mut out = Vec::new();
    for action in crate::transition::oracle_actions(category) {
        let gold = index[&action.to_string()];
        out.push(Example {
            features: features::transition_features(&state, ctx),
            gold,
            mask: Some(legal_mask(sys, &state, atoms)),
        });
        state = sys.apply(&state, &action)?;
    }
    Ok(out)
}

/// Runs shuffled online SGD. `examples_for` builds the decisions of one
/// trainable word and may draw from the shared RNG.
fn run_sgd<F>(
    positions: &[(usize, usize)],
    mut params: ModelParameters,
    hyper: Hyper,
    mut examples_for: F,
) -> Result<TrainOutcome, ModelError>
where
    F: FnMut(usize, usize, &mut ChaCha8Rng) -> Result<Vec<Example>, ModelError>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut order = positions.to_vec();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &(si, i) in &order {
            for ex in examples_for(si, i, &mut rng)? {
                total += sgd_step(&ex, &mut params, hyper.learning_rate);
            }
        }
        epoch_losses.push(total / order.len() as f64);
    }
    params.prune();
    Ok(TrainOutcome { params, epoch_losses })
}

fn contexts(corpus: &[TaggedSentence]) -> Vec<Vec<ContextVector>> {
    corpus
        .iter()
        .map(|s| (0..s.len()).map(|i| ContextVector::new(&s.words, i)).collect())
        .collect()
}

/// Cross-entropy over oracle tag sequences, EOS step included.
pub fn train_generator(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    vocab: &TagVocabulary,
    hyper: Hyper,
) -> Result<TrainOutcome, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let ctxs = contexts(corpus);
    let params = ModelParameters::new(
        Component::Generator,
        generator_labels(vocab),
        hyper,
        vocab.fingerprint(),
        inv.fingerprint(),
    );
    if vocab.spec().deterministic {
        let mut cache: HashMap<(usize, usize), Vec<Example>> = HashMap::new();
        for &(si, i) in &positions {
            let seq = vocab.decompose(&corpus[si].gold[i])?;
            cache.insert((si, i), generator_examples(&ctxs[si][i], &seq, vocab));
        }
        run_sgd(&positions, params, hyper, |si, i, _| Ok(cache[&(si, i)].clone()))
    } else {
        run_sgd(&positions, params, hyper, |si, i, rng| {
            let seq = vocab.sample_with(&corpus[si].gold[i], rng)?;
            Ok(generator_examples(&ctxs[si][i], &seq, vocab))
        })
    }
}

/// Cross-entropy over kept inventory categories.
pub fn train_classifier(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    hyper: Hyper,
) -> Result<TrainOutcome, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let params = ModelParameters::new(
        Component::Classifier,
        classifier_labels(inv),
        hyper,
        NO_VOCAB.to_string(),
        inv.fingerprint(),
    );
    let examples = classifier_example_table(corpus, inv, &positions);
    run_sgd(&positions, params, hyper, |si, i, _| {
        Ok(vec![examples[&(si, i)].clone()])
    })
}

fn classifier_example_table(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    positions: &[(usize, usize)],
) -> HashMap<(usize, usize), Example> {
    positions
        .iter()
        .map(|&(si, i)| {
            let s = &corpus[si];
            let gold = match inv.lookup(&s.gold[i]) {
                crate::corpus::Label::Known(idx) => idx,
                crate::corpus::Label::Unk => unreachable!("masked positions are skipped"),
            };
            let ctx = ContextVector::new(&s.words, i);
            let ex = Example {
                features: features::classifier_features(&ctx),
                gold,
                mask: None,
            };
            ((si, i), ex)
        })
        .collect()
}

/// Fingerprint identifying a transition label space.
pub fn action_fingerprint(labels: &[String]) -> String {
    crate::fingerprint(&labels.join("\n"))
}

/// Cross-entropy over oracle action sequences, softmax masked to legal actions.
pub fn train_transition(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    sys: &TransitionSystem,
    hyper: Hyper,
) -> Result<TrainOutcome, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let atoms = inv.atoms();
    let labels = transition_labels(&atoms);
    let index = label_index(&labels);
    let params = ModelParameters::new(
        Component::Transition,
        labels.clone(),
        hyper,
        action_fingerprint(&labels),
        inv.fingerprint(),
    );
    let ctxs = contexts(corpus);
    let mut cache: HashMap<(usize, usize), Vec<Example>> = HashMap::new();
    for &(si, i) in &positions {
        let exs = transition_examples(&ctxs[si][i], &corpus[si].gold[i], sys, &atoms, &index)?;
        cache.insert((si, i), exs);
    }
    run_sgd(&positions, params, hyper, |si, i, _| Ok(cache[&(si, i)].clone()))
}

fn label_index(labels: &[String]) -> HashMap<String, usize> {
    labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect()
}

fn total_loss(examples: impl IntoIterator<Item = Example>, params: &ModelParameters) -> LossGradient {
    let mut out = LossGradient::default();
    for ex in examples {
        out.loss += accumulate(&ex, params, 1.0, &mut out.gradient);
    }
    out
}

/// Summed generator loss and gradient at `params`, using the deterministic
/// decomposition of every unmasked gold category.
pub fn generator_loss(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    vocab: &TagVocabulary,
    params: &ModelParameters,
) -> Result<LossGradient, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let mut examples = Vec::new();
    for (si, i) in positions {
        let s = &corpus[si];
        let seq = vocab.decompose(&s.gold[i])?;
        examples.extend(generator_examples(&ContextVector::new(&s.words, i), &seq, vocab));
    }
    Ok(total_loss(examples, params))
}

pub fn classifier_loss(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    params: &ModelParameters,
) -> Result<LossGradient, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let table = classifier_example_table(corpus, inv, &positions);
    Ok(total_loss(positions.iter().map(|p| table[p].clone()), params))
}

pub fn transition_loss(
    corpus: &[TaggedSentence],
    inv: &LabelInventory,
    sys: &TransitionSystem,
    params: &ModelParameters,
) -> Result<LossGradient, ModelError> {
    let positions = trainable_positions(corpus, inv)?;
    let atoms = inv.atoms();
    let index = label_index(&transition_labels(&atoms));
    let mut examples = Vec::new();
    for (si, i) in positions {
        let s = &corpus[si];
        let ctx = ContextVector::new(&s.words, i);
        examples.extend(transition_examples(&ctx, &s.gold[i], sys, &atoms, &index)?);
    }
    Ok(total_loss(examples, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::category::Category;
    use crate::oracle::OracleSpec;

    fn sentence(pairs: &[(&str, &str)]) -> TaggedSentence {
        let words = pairs.iter().map(|(w, _)| w.to_string()).collect();
        let gold = pairs.iter().map(|(_, c)| c.parse::<Category>().unwrap()).collect();
        TaggedSentence::new(words, None, gold).unwrap()
    }

    fn toy() -> Vec<TaggedSentence> {
        vec![sentence(&[
            ("John", "NP"),
            ("saw", "(S\\NP)/NP"),
            ("the", "NP/N"),
            ("dog", "N"),
            (".", "."),
        ])]
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_at_zero() {
        let corpus = toy();
        let inv = LabelInventory::build(&corpus, 1).unwrap();
        let hyper = Hyper {
            learning_rate: 0.0,
            ..Hyper::default()
        };
        let out = train_classifier(&corpus, &inv, hyper).unwrap();
        assert_eq!(out.params.nonzero_weights(), 0);
        assert!(out.params.features().is_empty());
        let vocab = TagVocabulary::build(&inv, OracleSpec::ac()).unwrap();
        assert!(train_generator(&corpus, &inv, &vocab, hyper)
            .unwrap()
            .params
            .features()
            .is_empty());
        let sys = TransitionSystem::default();
        assert!(train_transition(&corpus, &inv, &sys, hyper)
            .unwrap()
            .params
            .features()
            .is_empty());
    }

    #[test]
    fn all_masked_corpus_is_an_error() {
        let corpus = toy();
        let inv = LabelInventory::build(&corpus, 2).unwrap();
        assert!(matches!(
            train_classifier(&corpus, &inv, Hyper::default()),
            Err(ModelError::EmptyTrainingSet)
        ));
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let corpus = toy();
        let inv = LabelInventory::build(&corpus, 1).unwrap();
        let vocab = TagVocabulary::build(&inv, OracleSpec::ac()).unwrap();
        let a = train_generator(&corpus, &inv, &vocab, Hyper::default()).unwrap();
        let b = train_generator(&corpus, &inv, &vocab, Hyper::default()).unwrap();
        assert_eq!(a.params.to_text(), b.params.to_text());
        assert_eq!(a.epoch_losses, b.epoch_losses);
        assert!(a.epoch_losses.last().unwrap() < a.epoch_losses.first().unwrap());
    }

    #[test]
    fn nondeterministic_oracle_training_is_seeded() {
        let corpus = toy();
        let inv = LabelInventory::build(&corpus, 1).unwrap();
        let vocab = TagVocabulary::build(&inv, OracleSpec::pa(4).nondeterministic()).unwrap();
        let a = train_generator(&corpus, &inv, &vocab, Hyper::default()).unwrap();
        let b = train_generator(&corpus, &inv, &vocab, Hyper::default()).unwrap();
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn transition_gradient_is_zero_on_illegal_actions() {
        let corpus = toy();
        let inv = LabelInventory::build(&corpus, 1).unwrap();
        let sys = TransitionSystem::default();
        let atoms = inv.atoms();
        let labels = transition_labels(&atoms);
        let params = ModelParameters::new(
            Component::Transition,
            labels.clone(),
            Hyper::default(),
            String::new(),
            String::new(),
        );
        let lg = transition_loss(&corpus, &inv, &sys, &params).unwrap();
        let stop = labels.iter().position(|l| l == "stop").unwrap();
        // Stop is never legal on the empty initial stack, so the bias row
        // only collects gradient on it from legal states.
        let row = &lg.gradient["w=John"];
        assert!(row[stop] <= 0.0);
        assert!(lg.loss > 0.0);
    }
}
