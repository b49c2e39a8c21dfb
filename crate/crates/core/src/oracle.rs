//! Atomic tag sets and category decomposition.
//!
//! Every vocabulary contains the base tag set: the atomic categories of the
//! inventory, the four structural tokens `(`, `)`, `/`, `\`, and `EOS`. The
//! richer oracles add multi-token tags on top of it:
//!
//! * **PA**: the `k` most frequent parenthesized sub-expressions (stored
//!   without their surrounding parentheses);
//! * **NG**: the `k` most frequent token `n`-grams;
//! * **OR**: every inventory category as a single tag.
//!
//! Frequencies are token frequencies: an item occurring in a category counts
//! once per training occurrence of that category.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::category::{join_tokens, Atom, Category, Slash, Token};
use crate::corpus::LabelInventory;
use crate::fingerprint;

pub const EOS: &str = "EOS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OracleKind {
    Ac,
    Pa,
    Ng,
    Or,
}

impl fmt::Display for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OracleKind::Ac => "AC",
            OracleKind::Pa => "PA",
            OracleKind::Ng => "NG",
            OracleKind::Or => "OR",
        })
    }
}

impl FromStr for OracleKind {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "AC" => Ok(OracleKind::Ac),
            "PA" => Ok(OracleKind::Pa),
            "NG" => Ok(OracleKind::Ng),
            "OR" => Ok(OracleKind::Or),
            _ => Err(OracleError::InvalidSpec(format!("unknown oracle kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSpec {
    pub kind: OracleKind,
    /// Top-k cutoff (PA and NG).
    pub k: usize,
    /// N-gram order (NG).
    pub n: usize,
    pub deterministic: bool,
}

impl OracleSpec {
    pub fn ac() -> Self {
        OracleSpec {
            kind: OracleKind::Ac,
            k: 0,
            n: 0,
            deterministic: true,
        }
    }

    pub fn pa(k: usize) -> Self {
        OracleSpec {
            kind: OracleKind::Pa,
            k,
            ..Self::ac()
        }
    }

    pub fn ng(n: usize, k: usize) -> Self {
        OracleSpec {
            kind: OracleKind::Ng,
            k,
            n,
            ..Self::ac()
        }
    }

    pub fn or() -> Self {
        OracleSpec {
            kind: OracleKind::Or,
            ..Self::ac()
        }
    }

    pub fn nondeterministic(mut self) -> Self {
        self.deterministic = false;
        self
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        match self.kind {
            OracleKind::Pa | OracleKind::Ng if self.k == 0 => {
                Err(OracleError::InvalidSpec(format!("{} requires k >= 1", self.kind)))
            }
            OracleKind::Ng if self.n < 2 => Err(OracleError::InvalidSpec("NG requires n >= 2".into())),
            _ => Ok(()),
        }
    }

    /// Vocabulary file header, e.g. `kind=NG n=2 k=10`.
    pub fn header(&self) -> String {
        match self.kind {
            OracleKind::Ac | OracleKind::Or => format!("kind={}", self.kind),
            OracleKind::Pa => format!("kind=PA k={}", self.k),
            OracleKind::Ng => format!("kind=NG n={} k={}", self.n, self.k),
        }
    }

    fn from_header(line: &str) -> Result<Self, OracleError> {
        let mut spec = OracleSpec::ac();
        let mut kind = None;
        for field in line.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| OracleError::Format(format!("bad header field {field:?}")))?;
            let number = || {
                value
                    .parse::<usize>()
                    .map_err(|_| OracleError::Format(format!("bad number in {field:?}")))
            };
            match key {
                "kind" => kind = Some(value.parse::<OracleKind>()?),
                "n" => spec.n = number()?,
                "k" => spec.k = number()?,
                _ => return Err(OracleError::Format(format!("unknown header field {key:?}"))),
            }
        }
        spec.kind = kind.ok_or_else(|| OracleError::Format("header lacks kind=".into()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle spec: {0}")]
    InvalidSpec(String),
    #[error("inventory is empty")]
    EmptyInventory,
    #[error("token {token:?} at position {position} of {category} is not covered by the vocabulary")]
    Uncovered {
        category: String,
        token: String,
        position: usize,
    },
    #[error("malformed vocabulary file: {0}")]
    Format(String),
}

/// Index of a tag in its vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicTag {
    surface: String,
    span: Vec<Token>,
}

impl AtomicTag {
    fn from_span(span: Vec<Token>) -> Self {
        AtomicTag {
            surface: join_tokens(&span),
            span,
        }
    }

    fn eos() -> Self {
        AtomicTag {
            surface: EOS.to_string(),
            span: Vec::new(),
        }
    }

    pub fn surface(&self) -> &str {
        &self.surface
    }

    /// Tokens this tag expands to; empty for EOS.
    pub fn span(&self) -> &[Token] {
        &self.span
    }

    pub fn is_eos(&self) -> bool {
        self.span.is_empty()
    }
}

/// A generation sequence that does not form a category.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ill-formed tag sequence: {reason}")]
pub struct IllFormed {
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagVocabulary {
    tags: Vec<AtomicTag>,
    index: HashMap<Vec<Token>, TagId>,
    max_span: usize,
    spec: OracleSpec,
}

impl TagVocabulary {
    pub fn build(inv: &LabelInventory, spec: OracleSpec) -> Result<Self, OracleError> {
        spec.validate()?;
        if inv.is_empty() {
            return Err(OracleError::EmptyInventory);
        }
        let mut spans: Vec<Vec<Token>> = vec![
            vec![Token::Open],
            vec![Token::Close],
            vec![Token::Slash(Slash::Forward)],
            vec![Token::Slash(Slash::Backward)],
        ];
        spans.extend(inv.atoms().into_iter().map(|a| vec![Token::Atom(a)]));

        let weighted = || inv.kept_frequencies().iter().map(|(c, n)| (c, *n));
        match spec.kind {
            OracleKind::Ac => {}
            OracleKind::Pa => {
                let mut counts: HashMap<Vec<Token>, u64> = HashMap::new();
                for (c, n) in weighted() {
                    for sub in nested_complex(c) {
                        *counts.entry(sub.tokens()).or_default() += n;
                    }
                }
                spans.extend(top_k(counts, spec.k));
            }
            OracleKind::Ng => {
                let mut counts: HashMap<Vec<Token>, u64> = HashMap::new();
                for (c, n) in weighted() {
                    for gram in c.tokens().windows(spec.n) {
                        *counts.entry(gram.to_vec()).or_default() += n;
                    }
                }
                spans.extend(top_k(counts, spec.k));
            }
            OracleKind::Or => spans.extend(inv.categories().map(Category::tokens)),
        }

        let mut tags = vec![AtomicTag::eos()];
        tags.extend(spans.into_iter().map(AtomicTag::from_span));
        Ok(Self::from_tags(tags, spec))
    }

    fn from_tags(raw: Vec<AtomicTag>, spec: OracleSpec) -> Self {
        let mut tags = Vec::with_capacity(raw.len());
        let mut index = HashMap::new();
        for tag in raw {
            if tag.is_eos() && !tags.is_empty() {
                continue;
            }
            // Identical spans collapse to the first (higher-ranked) entry.
            if !tag.is_eos() && index.contains_key(&tag.span) {
                continue;
            }
            if !tag.is_eos() {
                index.insert(tag.span.clone(), TagId(tags.len()));
            }
            tags.push(tag);
        }
        let max_span = tags.iter().map(|t| t.span.len()).max().unwrap_or(1);
        TagVocabulary {
            tags,
            index,
            max_span,
            spec,
        }
    }

    pub fn spec(&self) -> OracleSpec {
        self.spec
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn eos(&self) -> TagId {
        TagId(0)
    }

    pub fn tag(&self, id: TagId) -> &AtomicTag {
        &self.tags[id.0]
    }

    pub fn tags(&self) -> &[AtomicTag] {
        &self.tags
    }

    pub fn ids(&self) -> impl Iterator<Item = TagId> {
        (0..self.tags.len()).map(TagId)
    }

    pub fn lookup(&self, span: &[Token]) -> Option<TagId> {
        self.index.get(span).copied()
    }

    pub fn contains_span(&self, span: &[Token]) -> bool {
        self.index.contains_key(span)
    }

    /// Atomic categories present as single tags.
    pub fn atoms(&self) -> Vec<Atom> {
        self.tags
            .iter()
            .filter_map(|t| match t.span.as_slice() {
                [Token::Atom(a)] => Some(a.clone()),
                _ => None,
            })
            .collect()
    }

    /// Tags matching a prefix of `tokens[start..]`, longest first.
    fn matches_at(&self, tokens: &[Token], start: usize) -> Vec<(TagId, usize)> {
        let rest = tokens.len() - start;
        (1..=self.max_span.min(rest))
            .rev()
            .filter_map(|len| self.lookup(&tokens[start..start + len]).map(|id| (id, len)))
            .collect()
    }

    fn uncovered(&self, c: &Category, tokens: &[Token], position: usize) -> OracleError {
        OracleError::Uncovered {
            category: c.to_string(),
            token: tokens[position].to_string(),
            position,
        }
    }

    /// Longest forward match over the category's tokens, followed by EOS.
    pub fn decompose(&self, c: &Category) -> Result<Vec<TagId>, OracleError> {
        let tokens = c.tokens();
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let (id, len) = *self
                .matches_at(&tokens, pos)
                .first()
                .ok_or_else(|| self.uncovered(c, &tokens, pos))?;
            out.push(id);
            pos += len;
        }
        out.push(self.eos());
        Ok(out)
    }

    /// All segmentations, longer spans first at every branch (so the
    /// deterministic sequence comes first), truncated at `limit`.
    pub fn decompose_all(&self, c: &Category, limit: usize) -> Result<Vec<Vec<TagId>>, OracleError> {
        let tokens = c.tokens();
        // Fail early on uncovered tokens.
        self.decompose(c)?;
        let mut out = Vec::new();
        let mut prefix = Vec::new();
        self.enumerate(&tokens, 0, &mut prefix, &mut out, limit);
        Ok(out)
    }

    fn enumerate(
        &self,
        tokens: &[Token],
        pos: usize,
        prefix: &mut Vec<TagId>,
        out: &mut Vec<Vec<TagId>>,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if pos == tokens.len() {
            let mut seq = prefix.clone();
            seq.push(self.eos());
            out.push(seq);
            return;
        }
        for (id, len) in self.matches_at(tokens, pos) {
            prefix.push(id);
            self.enumerate(tokens, pos + len, prefix, out, limit);
            prefix.pop();
        }
    }

    /// `counts[i]` = number of segmentations of `tokens[i..]`.
    fn suffix_counts(&self, tokens: &[Token]) -> Vec<u128> {
        let mut counts = vec![0u128; tokens.len() + 1];
        counts[tokens.len()] = 1;
        for i in (0..tokens.len()).rev() {
            counts[i] = self
                .matches_at(tokens, i)
                .iter()
                .fold(0u128, |acc, &(_, len)| acc.saturating_add(counts[i + len]));
        }
        counts
    }

    pub fn count_segmentations(&self, c: &Category) -> u128 {
        self.suffix_counts(&c.tokens())[0]
    }

    /// Uniform sample over all segmentations, reproducible for a seed.
    pub fn sample_decomposition(&self, c: &Category, seed: u64) -> Result<Vec<TagId>, OracleError> {
        self.sample_with(c, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn sample_with<R: Rng>(&self, c: &Category, rng: &mut R) -> Result<Vec<TagId>, OracleError> {
        let tokens = c.tokens();
        let counts = self.suffix_counts(&tokens);
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < tokens.len() {
            let options = self.matches_at(&tokens, pos);
            if counts[pos] == 0 {
                return Err(self.uncovered(c, &tokens, pos));
            }
            let mut draw = rng.gen_range(0..counts[pos]);
            let mut chosen = options[0];
            for &(id, len) in &options {
                let weight = counts[pos + len];
                if draw < weight {
                    chosen = (id, len);
                    break;
                }
                draw -= weight;
            }
            out.push(chosen.0);
            pos += chosen.1;
        }
        out.push(self.eos());
        Ok(out)
    }

    /// Concatenates the tag spans of a complete sequence and parses them.
    pub fn reassemble(&self, seq: &[TagId]) -> Result<Category, IllFormed> {
        match seq.split_last() {
            Some((last, body)) if *last == self.eos() => {
                if body.contains(&self.eos()) {
                    return Err(IllFormed {
                        reason: "EOS before the end of the sequence".into(),
                    });
                }
                let tokens: Vec<Token> = body.iter().flat_map(|&id| self.tag(id).span.iter().cloned()).collect();
                Category::from_tokens(&tokens).map_err(|e| IllFormed { reason: e.to_string() })
            }
            _ => Err(IllFormed {
                reason: "sequence does not end with EOS".into(),
            }),
        }
    }

    /// Surfaces of a sequence, space separated.
    pub fn render(&self, seq: &[TagId]) -> String {
        seq.iter()
            .map(|&id| self.tag(id).surface())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Mean deterministic sequence length (EOS included) over the kept
    /// inventory categories.
    pub fn mean_length(&self, inv: &LabelInventory) -> Result<f64, OracleError> {
        let mut total = 0usize;
        for c in inv.categories() {
            total += self.decompose(c)?.len();
        }
        Ok(total as f64 / inv.len().max(1) as f64)
    }

    pub fn to_text(&self) -> String {
        let mut out = self.spec.header();
        out.push('\n');
        for tag in &self.tags {
            let joined: Vec<String> = tag.span.iter().map(Token::to_string).collect();
            out.push_str(&format!("{}\t{}\n", tag.surface, joined.join(" ")));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, OracleError> {
        let mut lines = text
            .lines()
            .filter(|l| !(l.trim().is_empty() || *l == "#" || l.starts_with("# ")));
        let header = lines
            .next()
            .ok_or_else(|| OracleError::Format("empty vocabulary file".into()))?;
        let spec = OracleSpec::from_header(header)?;
        let mut tags = Vec::new();
        for line in lines {
            let (surface, span) = line
                .split_once('\t')
                .ok_or_else(|| OracleError::Format(format!("missing tab in {line:?}")))?;
            if span.is_empty() {
                if surface != EOS {
                    return Err(OracleError::Format(format!("empty span for {surface:?}")));
                }
                tags.push(AtomicTag::eos());
                continue;
            }
            let span: Vec<Token> = span
                .split(' ')
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| OracleError::Format(format!("bad span in {line:?}: {e}")))?;
            let tag = AtomicTag::from_span(span);
            if tag.surface != surface {
                return Err(OracleError::Format(format!(
                    "surface {surface:?} does not match its span"
                )));
            }
            tags.push(tag);
        }
        if tags.first().is_none_or(|t| !t.is_eos()) {
            return Err(OracleError::Format("first tag must be EOS".into()));
        }
        let vocab = Self::from_tags(tags, spec);
        for base in [
            Token::Open,
            Token::Close,
            Token::Slash(Slash::Forward),
            Token::Slash(Slash::Backward),
        ] {
            if !vocab.contains_span(std::slice::from_ref(&base)) {
                return Err(OracleError::Format(format!("base tag {base} missing")));
            }
        }
        Ok(vocab)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_text())
    }
}

/// Complex subcategories that appear parenthesized in the canonical form.
fn nested_complex(c: &Category) -> Vec<&Category> {
    fn walk<'a>(c: &'a Category, nested: bool, out: &mut Vec<&'a Category>) {
        if let Category::Complex { result, argument, .. } = c {
            if nested {
                out.push(c);
            }
            walk(result, true, out);
            walk(argument, true, out);
        }
    }
    let mut out = Vec::new();
    walk(c, false, &mut out);
    out
}

/// Top-k spans by count, ties broken by surface string.
fn top_k(counts: HashMap<Vec<Token>, u64>, k: usize) -> Vec<Vec<Token>> {
    let mut ranked: Vec<(u64, String, Vec<Token>)> = counts
        .into_iter()
        .map(|(span, n)| (n, join_tokens(&span), span))
        .collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    ranked.into_iter().take(k).map(|(_, _, span)| span).collect()
}
