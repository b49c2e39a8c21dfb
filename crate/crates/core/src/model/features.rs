//! Feature templates of the reference log-linear scorers.
//!
//! The template set is versioned; a model file records the version it was
//! trained with and refuses to load under a different one.

use crate::transition::{StackItem, TransitionState};

pub const FEATURE_VERSION: u32 = 1;

/// Previous-tag marker for the first generation step.
pub const BOS: &str = "<BOS>";

const SENT_START: &str = "<S>";
const SENT_END: &str = "</S>";

/// Per-word context: the word, its lowercase form and a two-word window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextVector {
    pub word: String,
    pub lower: String,
    pub prev: String,
    pub next: String,
    pub prev2: String,
    pub next2: String,
    pub position: usize,
    pub sentence_len: usize,
}

impl ContextVector {
    pub fn new(words: &[String], position: usize) -> Self {
        let at = |offset: isize| -> String {
            let i = position as isize + offset;
            if i < 0 {
                SENT_START.to_string()
            } else if i as usize >= words.len() {
                SENT_END.to_string()
            } else {
                words[i as usize].clone()
            }
        };
        ContextVector {
            word: words[position].clone(),
            lower: words[position].to_lowercase(),
            prev: at(-1),
            next: at(1),
            prev2: at(-2),
            next2: at(2),
            position,
            sentence_len: words.len(),
        }
    }

    pub fn features(&self) -> Vec<String> {
        vec![
            "bias".to_string(),
            format!("w={}", self.word),
            format!("lw={}", self.lower),
            format!("w-1={}", self.prev),
            format!("w+1={}", self.next),
            format!("w-2={}", self.prev2),
            format!("w+2={}", self.next2),
        ]
    }
}

/// One step of tag-wise generation for a word.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorStepQuery<'a> {
    pub context: &'a ContextVector,
    /// Surface of the previous tag, [`BOS`] at step 1.
    pub prev_tag: &'a str,
    /// Surface of the tag before that, [`BOS`] when absent.
    pub prev2_tag: &'a str,
    /// 1-based step index.
    pub step: usize,
}

fn bucket(value: usize, top: usize) -> String {
    if value >= top {
        format!("{top}+")
    } else {
        value.to_string()
    }
}

pub fn generator_features(q: &GeneratorStepQuery<'_>) -> Vec<String> {
    let ctx = q.context;
    let sb = bucket(q.step, 5);
    let mut out = ctx.features();
    out.extend([
        format!("pt={}", q.prev_tag),
        format!("pt2={}|{}", q.prev2_tag, q.prev_tag),
        format!("sb={sb}"),
        format!("pt|sb={}|{sb}", q.prev_tag),
        format!("w|pt={}|{}", ctx.word, q.prev_tag),
        format!("w|pt2={}|{}|{}", ctx.word, q.prev2_tag, q.prev_tag),
        format!("w|j={}|{}", ctx.word, q.step),
        format!("w-1|j={}|{}", ctx.prev, q.step),
        format!("w+1|j={}|{}", ctx.next, q.step),
    ]);
    out
}

pub fn classifier_features(ctx: &ContextVector) -> Vec<String> {
    let mut out = ctx.features();
    out.push(format!("w-1|w={}|{}", ctx.prev, ctx.word));
    out.push(format!("w|w+1={}|{}", ctx.word, ctx.next));
    out
}

fn render_item(item: Option<&StackItem>) -> String {
    item.map_or_else(|| "<none>".to_string(), ToString::to_string)
}

pub fn transition_features(state: &TransitionState, ctx: &ContextVector) -> Vec<String> {
    let stack = state.stack();
    let s0 = render_item(stack.last());
    let s1 = render_item(stack.len().checked_sub(2).and_then(|i| stack.get(i)));
    let last = state
        .last_action()
        .map_or_else(|| "<none>".to_string(), ToString::to_string);
    let t = state.timestep();
    let mut out = ctx.features();
    out.extend([
        format!("s0={s0}"),
        format!("s1={s1}"),
        format!("d={}", bucket(stack.len(), 4)),
        format!("la={last}"),
        format!("bl={}", bucket(state.buffer().len(), 5)),
        format!("la|s0={last}|{s0}"),
        format!("w|la={}|{last}", ctx.word),
        format!("w|t={}|{t}", ctx.word),
        format!("w-1|t={}|{t}", ctx.prev),
        format!("w+1|t={}|{t}", ctx.next),
    ]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_window_pads_sentence_edges() {
        let words: Vec<String> = ["The", "dog", "barks"].iter().map(|s| s.to_string()).collect();
        let ctx = ContextVector::new(&words, 0);
        assert_eq!(ctx.prev, "<S>");
        assert_eq!(ctx.prev2, "<S>");
        assert_eq!(ctx.next2, "barks");
        assert_eq!(ctx.lower, "the");
        let last = ContextVector::new(&words, 2);
        assert_eq!(last.next, "</S>");
        assert_eq!(last.sentence_len, 3);
    }

    #[test]
    fn step_buckets() {
        assert_eq!(bucket(1, 5), "1");
        assert_eq!(bucket(5, 5), "5+");
        assert_eq!(bucket(9, 5), "5+");
    }

    #[test]
    fn features_are_deterministic() {
        let words: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let ctx = ContextVector::new(&words, 1);
        let q = GeneratorStepQuery {
            context: &ctx,
            prev_tag: BOS,
            prev2_tag: BOS,
            step: 1,
        };
        assert_eq!(generator_features(&q), generator_features(&q));
        assert!(generator_features(&q).contains(&"w|j=b|1".to_string()));
    }
}
