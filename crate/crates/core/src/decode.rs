//! Per-word beam decoding for the tag-wise and transition generators, plus
//! sentence tagging and legality accounting.

use std::cmp::Ordering;

use crate::category::{Atom, Category};
use crate::corpus::LabelInventory;
use crate::model::{
    self, classifier_labels, floored_ln, generator_labels, transition_labels, Component, ContextVector,
    GeneratorStepQuery, ModelError, ModelParameters, BOS,
};
use crate::oracle::{TagId, TagVocabulary};
use crate::transition::{Action, TransitionState, TransitionSystem, DEFAULT_MAX_ACTIONS};

pub const DEFAULT_BEAM: usize = 4;
pub const DEFAULT_MAX_STEPS: usize = 32;

/// Marker written for candidates that do not reassemble into a category.
pub const ILLFORMED: &str = "ILLFORMED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BeamConfig {
    pub beam: usize,
    pub kbest: usize,
    /// Step cap: tags (EOS included) or actions (stop included).
    pub max_steps: usize,
}

impl BeamConfig {
    pub fn tagwise() -> Self {
        BeamConfig {
            beam: DEFAULT_BEAM,
            kbest: DEFAULT_BEAM,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }

    pub fn transition() -> Self {
        BeamConfig {
            max_steps: DEFAULT_MAX_ACTIONS,
            ..Self::tagwise()
        }
    }

    pub fn greedy(max_steps: usize) -> Self {
        BeamConfig {
            beam: 1,
            kbest: 1,
            max_steps,
        }
    }

    fn check(&self) {
        assert!(self.kbest >= 1, "kbest must be at least 1");
        assert!(self.beam >= self.kbest, "beam must be at least kbest");
        assert!(self.max_steps >= 1, "max_steps must be at least 1");
    }
}

/// A finished hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Tag surfaces or action names, terminator (EOS or stop) included.
    pub symbols: Vec<String>,
    /// Log-probability of every step, one per symbol.
    pub step_logprobs: Vec<f64>,
    pub logprob: f64,
    /// `None` when the sequence does not reassemble.
    pub category: Option<Category>,
}

impl Candidate {
    pub fn surface(&self) -> String {
        self.symbols.join(" ")
    }

    pub fn is_legal(&self) -> bool {
        self.category.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub word_index: usize,
    /// Sorted by log-probability, best first.
    pub kbest: Vec<Candidate>,
}

impl DecodeResult {
    /// Best well-formed category, if any.
    pub fn best_legal(&self) -> Option<&Category> {
        self.kbest.iter().find_map(|c| c.category.as_ref())
    }

    /// Tab-separated dump lines, one per candidate, ranks starting at 1.
    pub fn dump_lines(&self, sentence_index: usize) -> Vec<String> {
        self.kbest
            .iter()
            .enumerate()
            .map(|(rank, c)| {
                let cat = c
                    .category
                    .as_ref()
                    .map_or_else(|| ILLFORMED.to_string(), ToString::to_string);
                format!(
                    "{sentence_index}\t{}\t{}\t{:?}\t{}\t{}\t{cat}",
                    self.word_index,
                    rank + 1,
                    c.logprob,
                    u8::from(c.is_legal()),
                    c.surface(),
                )
            })
            .collect()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("k-best dump line {line}: {message}")]
pub struct DumpError {
    pub line: usize,
    pub message: String,
}

/// Reads dump lines back, grouped per word in file order. Step
/// log-probabilities are not part of the format and come back empty.
pub fn parse_dump(text: &str) -> Result<Vec<(usize, DecodeResult)>, DumpError> {
    let mut out: Vec<(usize, DecodeResult)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() || line == "#" || line.starts_with("# ") {
            continue;
        }
        let err = |message: String| DumpError { line: i + 1, message };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 7 {
            return Err(err(format!("expected 7 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad index {s:?}")));
        let (sentence, word, rank) = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
        let logprob: f64 = cols[3]
            .parse()
            .map_err(|_| err(format!("bad log-probability {:?}", cols[3])))?;
        let category = match cols[6] {
            ILLFORMED => None,
            text => Some(text.parse::<Category>().map_err(|e| err(e.to_string()))?),
        };
        if cols[4] != if category.is_some() { "1" } else { "0" } {
            return Err(err("legality flag disagrees with the category column".into()));
        }
        let candidate = Candidate {
            symbols: cols[5].split(' ').map(str::to_string).collect(),
            step_logprobs: Vec::new(),
            logprob,
            category,
        };
        match out.last_mut() {
            Some((s, r)) if *s == sentence && r.word_index == word => {
                if rank != r.kbest.len() + 1 {
                    return Err(err(format!("rank {rank} out of order")));
                }
                r.kbest.push(candidate);
            }
            _ => {
                if rank != 1 {
                    return Err(err(format!("word starts at rank {rank}")));
                }
                out.push((
                    sentence,
                    DecodeResult {
                        word_index: word,
                        kbest: vec![candidate],
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// Best first; equal scores ordered by surface string.
fn rank(a: &(f64, String), b: &(f64, String)) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(&b.1))
}

struct Partial<S> {
    state: S,
    symbols: Vec<String>,
    step_logprobs: Vec<f64>,
    logprob: f64,
}

impl<S> Partial<S> {
    fn key(&self) -> (f64, String) {
        (self.logprob, self.symbols.join(" "))
    }
}

type Step<S> = (String, f64, S);
type Forced<'f, S> = &'f mut dyn FnMut(&Partial<S>) -> Step<S>;
type Keyed<S> = ((f64, String), (Partial<S>, bool));

/// Generic beam search. `expand` returns `(symbol, logprob, next, finishes)`
/// for every allowed successor. When `forced` is given, hypotheses still
/// active at the step cap take its terminating step instead of expanding.
fn beam_search<S, E, R>(
    cfg: BeamConfig,
    init: S,
    mut expand: E,
    mut forced: Option<Forced<'_, S>>,
    mut finish: R,
) -> Vec<Candidate>
where
    E: FnMut(&Partial<S>) -> Vec<(String, f64, S, bool)>,
    R: FnMut(&S) -> Option<Category>,
{
    cfg.check();
    let mut active = vec![Partial {
        state: init,
        symbols: Vec::new(),
        step_logprobs: Vec::new(),
        logprob: 0.0,
    }];
    let mut finished: Vec<Partial<S>> = Vec::new();
    let extend = |p: &Partial<S>, sym: String, lp: f64, state: S| {
        let mut symbols = p.symbols.clone();
        symbols.push(sym);
        let mut step_logprobs = p.step_logprobs.clone();
        step_logprobs.push(lp);
        Partial {
            state,
            symbols,
            step_logprobs,
            logprob: p.logprob + lp,
        }
    };
    for step in 1..=cfg.max_steps {
        if active.is_empty() {
            break;
        }
        let mut next: Vec<(Partial<S>, bool)> = Vec::new();
        for p in &active {
            if let (true, Some(force)) = (step == cfg.max_steps, forced.as_mut()) {
                let (sym, lp, state) = force(p);
                next.push((extend(p, sym, lp, state), true));
            } else {
                for (sym, lp, state, done) in expand(p) {
                    next.push((extend(p, sym, lp, state), done));
                }
            }
        }
        let mut keyed: Vec<Keyed<S>> = next.into_iter().map(|x| (x.0.key(), x)).collect();
        keyed.sort_by(|a, b| rank(&a.0, &b.0));
        keyed.truncate(cfg.beam);
        active = Vec::new();
        for (_, (p, done)) in keyed {
            if done {
                finished.push(p);
            } else {
                active.push(p);
            }
        }
        // Scores only decrease, so stop once no active hypothesis can enter the k-best.
        if finished.len() >= cfg.kbest {
            let mut scores: Vec<f64> = finished.iter().map(|p| p.logprob).collect();
            scores.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
            let kth = scores[cfg.kbest - 1];
            if active.iter().all(|p| p.logprob < kth) {
                break;
            }
        }
    }
    let mut keyed: Vec<((f64, String), Partial<S>)> = finished.into_iter().map(|p| (p.key(), p)).collect();
    keyed.sort_by(|a, b| rank(&a.0, &b.0));
    keyed
        .into_iter()
        .take(cfg.kbest)
        .map(|(_, p)| Candidate {
            category: finish(&p.state),
            symbols: p.symbols,
            step_logprobs: p.step_logprobs,
            logprob: p.logprob,
        })
        .collect()
}

/// Beam search over sequences of symbol ids. `step` maps a prefix to a
/// distribution over all `surfaces`; a sequence ends with `eos`, and prefixes
/// still open at `cfg.max_steps` are closed with the EOS step. Returns the
/// id sequence of each k-best candidate alongside it; categories are unset.
pub fn decode_sequences<F>(
    surfaces: &[String],
    eos: usize,
    cfg: BeamConfig,
    mut step: F,
) -> Vec<(Vec<usize>, Candidate)>
where
    F: FnMut(&[usize]) -> Vec<f64>,
{
    let push = |ids: &[usize], id: usize| {
        let mut next = ids.to_vec();
        next.push(id);
        next
    };
    let mut ids_of = Vec::new();
    let step = std::cell::RefCell::new(&mut step);
    let mut force_eos = |p: &Partial<Vec<usize>>| {
        let prob = (step.borrow_mut())(&p.state)[eos];
        (surfaces[eos].clone(), floored_ln(prob), push(&p.state, eos))
    };
    let kbest = beam_search(
        cfg,
        Vec::<usize>::new(),
        |p| {
            (step.borrow_mut())(&p.state)
                .into_iter()
                .enumerate()
                .map(|(id, prob)| (surfaces[id].clone(), floored_ln(prob), push(&p.state, id), id == eos))
                .collect()
        },
        Some(&mut force_eos),
        |ids| {
            ids_of.push(ids.clone());
            None
        },
    );
    ids_of.into_iter().zip(kbest).collect()
}

/// Beam search over tag-wise generation for one word.
pub fn decode_tagwise(
    words: &[String],
    position: usize,
    vocab: &TagVocabulary,
    params: &ModelParameters,
    cfg: BeamConfig,
) -> DecodeResult {
    let ctx = ContextVector::new(words, position);
    let surfaces = generator_labels(vocab);
    let kbest = decode_sequences(&surfaces, vocab.eos().0, cfg, |ids| {
        let surface = |back: usize| ids.len().checked_sub(back).map_or(BOS, |i| surfaces[ids[i]].as_str());
        let q = GeneratorStepQuery {
            context: &ctx,
            prev_tag: surface(1),
            prev2_tag: surface(2),
            step: ids.len() + 1,
        };
        model::generator_step_distribution(&q, vocab, params)
    })
    .into_iter()
    .map(|(ids, mut cand)| {
        let seq: Vec<TagId> = ids.into_iter().map(TagId).collect();
        cand.category = vocab.reassemble(&seq).ok();
        cand
    })
    .collect();
    DecodeResult {
        word_index: position,
        kbest,
    }
}

/// Beam search over transition actions for one word; expansions are limited
/// to actions that can still terminate within `cfg.max_steps`.
pub fn decode_transition(
    words: &[String],
    position: usize,
    sys: &TransitionSystem,
    atoms: &[Atom],
    params: &ModelParameters,
    cfg: BeamConfig,
) -> DecodeResult {
    let ctx = ContextVector::new(words, position);
    let space = crate::transition::action_space(atoms);
    let budget = cfg.max_steps.min(sys.max_actions());
    let kbest = beam_search(
        cfg,
        TransitionState::initial(),
        |p| {
            let dist = match model::transition_action_distribution(&p.state, &ctx, sys, atoms, params) {
                Ok(d) => d,
                Err(_) => return Vec::new(),
            };
            let viable = sys.viable_actions(&p.state, atoms, budget);
            space
                .iter()
                .zip(dist)
                .filter(|(a, _)| viable.contains(a))
                .map(|(a, prob)| {
                    let next = sys.apply(&p.state, a).expect("viable action is legal");
                    (a.to_string(), floored_ln(prob), next, *a == Action::Stop)
                })
                .collect()
        },
        None,
        |state| {
            let c = state.result().expect("stop leaves exactly one category");
            Some(c)
        },
    );
    debug_assert!(kbest.iter().all(Candidate::is_legal));
    DecodeResult {
        word_index: position,
        kbest,
    }
}

/// Share of ill-formed entries among the top `k` candidates of every result.
pub fn illegal_rate(results: &[DecodeResult], k: usize) -> f64 {
    let mut total = 0usize;
    let mut bad = 0usize;
    for r in results {
        for c in r.kbest.iter().take(k) {
            total += 1;
            if !c.is_legal() {
                bad += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        bad as f64 / total as f64
    }
}

/// Everything needed to tag a sentence in one mode.
#[derive(Debug, Clone, Copy)]
pub enum Tagger<'a> {
    Classifier {
        inv: &'a LabelInventory,
        params: &'a ModelParameters,
    },
    Tagwise {
        vocab: &'a TagVocabulary,
        params: &'a ModelParameters,
        cfg: BeamConfig,
    },
    Transition {
        sys: &'a TransitionSystem,
        atoms: &'a [Atom],
        params: &'a ModelParameters,
        cfg: BeamConfig,
    },
}

impl<'a> Tagger<'a> {
    pub fn classifier(inv: &'a LabelInventory, params: &'a ModelParameters) -> Result<Self, ModelError> {
        params.ensure_compatible(
            Component::Classifier,
            &classifier_labels(inv),
            model::NO_VOCAB,
            &inv.fingerprint(),
        )?;
        Ok(Tagger::Classifier { inv, params })
    }

    pub fn tagwise(
        vocab: &'a TagVocabulary,
        inv: &LabelInventory,
        params: &'a ModelParameters,
        cfg: BeamConfig,
    ) -> Result<Self, ModelError> {
        params.ensure_compatible(
            Component::Generator,
            &generator_labels(vocab),
            &vocab.fingerprint(),
            &inv.fingerprint(),
        )?;
        Ok(Tagger::Tagwise { vocab, params, cfg })
    }

    pub fn transition(
        sys: &'a TransitionSystem,
        inv: &LabelInventory,
        atoms: &'a [Atom],
        params: &'a ModelParameters,
        cfg: BeamConfig,
    ) -> Result<Self, ModelError> {
        let labels = transition_labels(atoms);
        params.ensure_compatible(
            Component::Transition,
            &labels,
            &model::action_fingerprint(&labels),
            &inv.fingerprint(),
        )?;
        Ok(Tagger::Transition {
            sys,
            atoms,
            params,
            cfg,
        })
    }

    /// K-best lists for every word; `None` in classifier mode.
    pub fn decode_sentence(&self, words: &[String]) -> Option<Vec<DecodeResult>> {
        match *self {
            Tagger::Classifier { .. } => None,
            Tagger::Tagwise { vocab, params, cfg } => Some(
                (0..words.len())
                    .map(|i| decode_tagwise(words, i, vocab, params, cfg))
                    .collect(),
            ),
            Tagger::Transition {
                sys,
                atoms,
                params,
                cfg,
            } => Some(
                (0..words.len())
                    .map(|i| decode_transition(words, i, sys, atoms, params, cfg))
                    .collect(),
            ),
        }
    }

    /// Per-word 1-best category; `None` where no candidate is well formed.
    pub fn tag_sentence(&self, words: &[String]) -> Vec<Option<Category>> {
        match *self {
            Tagger::Classifier { inv, params } => (0..words.len())
                .map(|i| {
                    let dist = model::classifier_distribution(&ContextVector::new(words, i), inv, params);
                    argmax(&dist).map(|best| inv.category(best).clone())
                })
                .collect(),
            _ => self
                .decode_sentence(words)
                .unwrap_or_default()
                .iter()
                .map(|r| r.best_legal().cloned())
                .collect(),
        }
    }
}

/// First index of the largest value.
pub(crate) fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}
