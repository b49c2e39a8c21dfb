//! Reranking generator k-best lists with classifier confidence.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::category::Category;
use crate::corpus::{Label, LabelInventory};
use crate::decode::{argmax, DecodeResult};
use crate::model::{floored_ln, PROB_FLOOR};

pub const DEFAULT_LAMBDA: f64 = 0.9;
pub const DEFAULT_NU: f64 = 0.15;

/// Source name of a fallback choice.
pub const FALLBACK_SOURCE: &str = "classifier";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RerankConfig {
    /// Weight of the generator score.
    pub lambda: f64,
    /// Length-normalisation exponent.
    pub nu: f64,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            lambda: DEFAULT_LAMBDA,
            nu: DEFAULT_NU,
        }
    }
}

/// Sum of step log-probabilities divided by `m^nu`, `m` counting the
/// terminating step.
pub fn generator_confidence(step_logprobs: &[f64], nu: f64) -> f64 {
    normalized_confidence(step_logprobs.iter().sum(), step_logprobs.len(), nu)
}

/// Same score from a log-probability total over `m` steps.
pub fn normalized_confidence(logprob: f64, m: usize, nu: f64) -> f64 {
    logprob / (m.max(1) as f64).powf(nu)
}

/// Classifier log-probability of a category; categories outside the
/// inventory get the log of the probability floor.
pub fn classifier_confidence(category: &Category, classifier: &[f64], inv: &LabelInventory) -> f64 {
    match inv.lookup(category) {
        Label::Known(idx) => floored_ln(classifier[idx]),
        Label::Unk => PROB_FLOOR.ln(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidate {
    pub category: Category,
    pub u: f64,
    pub v: f64,
    pub combined: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub chosen: ScoredCandidate,
    /// No legal generator candidate; the classifier argmax was taken.
    pub fallback: bool,
}

fn better(a: &ScoredCandidate, b: &ScoredCandidate) -> bool {
    match a.combined.partial_cmp(&b.combined).unwrap_or(Ordering::Equal) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.category.to_string(), &a.source) < (b.category.to_string(), &b.source),
    }
}

/// Every legal candidate of every source, scored; duplicates keep their best
/// score. Ordered best first.
pub fn score_pool(
    sources: &[(&str, &DecodeResult)],
    classifier: &[f64],
    inv: &LabelInventory,
    cfg: RerankConfig,
) -> Vec<ScoredCandidate> {
    let mut best: BTreeMap<String, ScoredCandidate> = BTreeMap::new();
    for &(source, result) in sources {
        for cand in &result.kbest {
            let Some(category) = &cand.category else { continue };
            let u = normalized_confidence(cand.logprob, cand.symbols.len(), cfg.nu);
            let v = classifier_confidence(category, classifier, inv);
            let scored = ScoredCandidate {
                category: category.clone(),
                u,
                v,
                combined: cfg.lambda * u + (1.0 - cfg.lambda) * v,
                source: source.to_string(),
            };
            let key = category.to_string();
            match best.get(&key) {
                Some(old) if !better(&scored, old) => {}
                _ => {
                    best.insert(key, scored);
                }
            }
        }
    }
    let mut pool: Vec<ScoredCandidate> = best.into_values().collect();
    pool.sort_by(|a, b| {
        if better(a, b) {
            Ordering::Less
        } else if better(b, a) {
            Ordering::Greater
        } else {
            Ordering::Equal
        }
    });
    pool
}

/// Final choice for one word. `classifier` is the classifier distribution
/// over the inventory; it must be non-empty for the fallback to exist.
pub fn rerank_position(
    sources: &[(&str, &DecodeResult)],
    classifier: &[f64],
    inv: &LabelInventory,
    cfg: RerankConfig,
) -> Selection {
    if let Some(chosen) = score_pool(sources, classifier, inv, cfg).into_iter().next() {
        return Selection {
            chosen,
            fallback: false,
        };
    }
    let idx = argmax(classifier).expect("classifier distribution is non-empty");
    let v = floored_ln(classifier[idx]);
    Selection {
        chosen: ScoredCandidate {
            category: inv.category(idx).clone(),
            u: f64::NEG_INFINITY,
            v,
            combined: v,
            source: FALLBACK_SOURCE.to_string(),
        },
        fallback: true,
    }
}

/// Report line: word, gold, chosen, u, v, combined, source.
pub fn report_line(word: &str, gold: &Category, s: &Selection) -> String {
    let c = &s.chosen;
    format!(
        "{word}\t{gold}\t{}\t{:?}\t{:?}\t{:?}\t{}",
        c.category, c.u, c.v, c.combined, c.source
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TaggedSentence;
    use crate::decode::Candidate;

    fn inventory() -> LabelInventory {
        let words = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let gold = ["N", "N", "NP"].iter().map(|s| s.parse().unwrap()).collect();
        LabelInventory::build(&[TaggedSentence::new(words, None, gold).unwrap()], 1).unwrap()
    }

    fn cand(cat: Option<&str>, steps: &[f64]) -> Candidate {
        Candidate {
            symbols: vec!["x".into(); steps.len()],
            step_logprobs: steps.to_vec(),
            logprob: steps.iter().sum(),
            category: cat.map(|c| c.parse().unwrap()),
        }
    }

    fn result(cands: Vec<Candidate>) -> DecodeResult {
        DecodeResult {
            word_index: 0,
            kbest: cands,
        }
    }

    #[test]
    fn confidence_normalisation() {
        assert_eq!(generator_confidence(&[-0.5; 4], 0.0), -2.0);
        assert_eq!(generator_confidence(&[-3.0], 0.7), -3.0);
    }

    #[test]
    fn lambda_extremes() {
        let inv = inventory();
        // Inventory order: N (count 2), NP (count 1).
        let classifier = [0.2, 0.8];
        let r = result(vec![cand(Some("N"), &[-0.1, -0.1]), cand(Some("NP"), &[-1.0, -1.0])]);
        let gen_only = rerank_position(&[("g", &r)], &classifier, &inv, RerankConfig { lambda: 1.0, nu: 0.15 });
        assert_eq!(gen_only.chosen.category.to_string(), "N");
        let cls_only = rerank_position(&[("g", &r)], &classifier, &inv, RerankConfig { lambda: 0.0, nu: 0.15 });
        assert_eq!(cls_only.chosen.category.to_string(), "NP");
        assert!(!cls_only.fallback);
    }

    #[test]
    fn unseen_categories_get_the_floor() {
        let inv = inventory();
        let r = result(vec![cand(Some("S/NP"), &[-0.01])]);
        let s = rerank_position(&[("g", &r)], &[0.5, 0.5], &inv, RerankConfig::default());
        assert_eq!(s.chosen.v, PROB_FLOOR.ln());
        assert_eq!(s.chosen.category.to_string(), "S/NP");
    }

    #[test]
    fn illegal_only_pool_falls_back() {
        let inv = inventory();
        let r = result(vec![cand(None, &[-0.1])]);
        let s = rerank_position(&[("g", &r)], &[0.3, 0.7], &inv, RerankConfig::default());
        assert!(s.fallback);
        assert_eq!(s.chosen.category.to_string(), "NP");
        assert_eq!(s.chosen.source, FALLBACK_SOURCE);
    }

    #[test]
    fn duplicates_across_sources_keep_the_best() {
        let inv = inventory();
        let a = result(vec![cand(Some("N"), &[-2.0])]);
        let b = result(vec![cand(Some("N"), &[-0.5])]);
        let pool = score_pool(&[("a", &a), ("b", &b)], &[0.5, 0.5], &inv, RerankConfig::default());
        assert_eq!(pool.len(), 1);
        assert_eq!(pool[0].source, "b");
    }

    #[test]
    fn report_columns() {
        let inv = inventory();
        let r = result(vec![cand(Some("N"), &[-1.0])]);
        let s = rerank_position(&[("cg", &r)], &[0.5, 0.5], &inv, RerankConfig { lambda: 0.5, nu: 0.0 });
        let line = report_line("dog", &"N".parse().unwrap(), &s);
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 7);
        assert_eq!(&cols[..4], &["dog", "N", "N", "-1.0"]);
        assert_eq!(cols[6], "cg");
    }
}
