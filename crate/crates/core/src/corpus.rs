//! Supertag-annotated corpora and the category label inventory.
//!
//! Two on-disk formats are supported:
//!
//! * `pipe`: one sentence per line, tokens `word|POS|category` separated by spaces;
//! * `tsv`: one `word<TAB>category` per line, blank line between sentences.
//!
//! Lines starting with `# ` (or a lone `#`) are comments in both formats.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::category::{Atom, Category, ParseError};
use crate::fingerprint;

/// Reserved label for categories below the frequency threshold. It is not a
/// `Category` value, so no generator can ever emit it.
pub const UNK: &str = "UNK";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Pipe,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pipe" => Ok(CorpusFormat::Pipe),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected pipe or tsv)")),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Pipe => "pipe",
            CorpusFormat::Tsv => "tsv",
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: cannot parse category {text:?}")]
    Category {
        line: usize,
        text: String,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: token {token:?} is missing its {field} field")]
    MissingField {
        line: usize,
        token: String,
        field: &'static str,
    },
    #[error("line {line}: expected 2 tab-separated fields, found {found}")]
    Ragged { line: usize, found: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("corpus contains no sentences")]
    Empty,
    #[error("sentence fields have different lengths ({words} words, {gold} categories)")]
    LengthMismatch { words: usize, gold: usize },
    #[error("reserved label in corpus: {0:?} collides with the UNK marker")]
    ReservedLabel(String),
    #[error("frequency threshold must be at least 1")]
    InvalidThreshold,
}

/// A sentence with its gold categories (and POS tags when the format has them).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub words: Vec<String>,
    pub pos: Option<Vec<String>>,
    pub gold: Vec<Category>,
}

impl TaggedSentence {
    pub fn new(words: Vec<String>, pos: Option<Vec<String>>, gold: Vec<Category>) -> Result<Self, CorpusError> {
        let pos_ok = pos.as_ref().is_none_or(|p| p.len() == words.len());
        if words.len() != gold.len() || !pos_ok {
            return Err(CorpusError::LengthMismatch {
                words: words.len(),
                gold: gold.len(),
            });
        }
        Ok(TaggedSentence { words, pos, gold })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

fn is_comment(line: &str) -> bool {
    line == "#" || line.starts_with("# ")
}

fn parse_category(line: usize, text: &str) -> Result<Category, CorpusError> {
    text.parse().map_err(|source| CorpusError::Category {
        line,
        text: text.to_string(),
        source,
    })
}

/// Parses corpus text. Line numbers in errors are 1-based.
pub fn parse_corpus(text: &str, format: CorpusFormat) -> Result<Vec<TaggedSentence>, CorpusError> {
    let sentences = match format {
        CorpusFormat::Pipe => parse_pipe(text)?,
        CorpusFormat::Tsv => parse_tsv(text)?,
    };
    if sentences.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(sentences)
}

fn parse_pipe(text: &str) -> Result<Vec<TaggedSentence>, CorpusError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || is_comment(line) {
            continue;
        }
        let (mut words, mut pos, mut gold) = (Vec::new(), Vec::new(), Vec::new());
        for token in line.split_whitespace() {
            // Split from the right: words may contain '|', categories never do.
            let mut parts = token.rsplitn(3, '|');
            let cat = parts.next().unwrap_or_default();
            let (tag, word) = match (parts.next(), parts.next()) {
                (Some(t), Some(w)) => (t, w),
                _ => {
                    return Err(CorpusError::MissingField {
                        line: line_no,
                        token: token.to_string(),
                        field: "POS",
                    })
                }
            };
            if cat.is_empty() {
                return Err(CorpusError::MissingField {
                    line: line_no,
                    token: token.to_string(),
                    field: "category",
                });
            }
            words.push(word.to_string());
            pos.push(tag.to_string());
            gold.push(parse_category(line_no, cat)?);
        }
        out.push(TaggedSentence::new(words, Some(pos), gold)?);
    }
    Ok(out)
}

fn parse_tsv(text: &str) -> Result<Vec<TaggedSentence>, CorpusError> {
    let mut out = Vec::new();
    let (mut words, mut gold) = (Vec::new(), Vec::new());
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if is_comment(line) {
            continue;
        }
        if line.trim().is_empty() {
            if !words.is_empty() {
                out.push(TaggedSentence::new(
                    std::mem::take(&mut words),
                    None,
                    std::mem::take(&mut gold),
                )?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 || fields[0].is_empty() {
            return Err(CorpusError::Ragged {
                line: line_no,
                found: fields.len(),
            });
        }
        words.push(fields[0].to_string());
        gold.push(parse_category(line_no, fields[1])?);
    }
    if !words.is_empty() {
        out.push(TaggedSentence::new(words, None, gold)?);
    }
    Ok(out)
}

pub fn read_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<TaggedSentence>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_corpus(&text, format)
}

/// Renders sentences with the given category per word. Missing POS tags are
/// written as `-` in pipe format.
pub fn write_corpus(sentences: &[TaggedSentence], format: CorpusFormat) -> String {
    let rows: Vec<Vec<String>> = sentences
        .iter()
        .map(|s| s.gold.iter().map(Category::to_string).collect())
        .collect();
    write_labels(sentences, &rows, format)
}

/// Like [`write_corpus`] but with caller-supplied labels per word (used for
/// predictions, where a word may carry no category at all).
pub fn write_labels(sentences: &[TaggedSentence], labels: &[Vec<String>], format: CorpusFormat) -> String {
    let mut out = String::new();
    for (s, row) in sentences.iter().zip(labels) {
        match format {
            CorpusFormat::Pipe => {
                let toks: Vec<String> = (0..s.len())
                    .map(|i| {
                        let pos = s.pos.as_ref().map_or("-", |p| p[i].as_str());
                        format!("{}|{}|{}", s.words[i], pos, row[i])
                    })
                    .collect();
                out.push_str(&toks.join(" "));
                out.push('\n');
            }
            CorpusFormat::Tsv => {
                for (word, label) in s.words.iter().zip(row) {
                    out.push_str(&format!("{word}\t{label}\n"));
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Categories kept as classifier labels, with training frequencies for all
/// categories seen (kept or not).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelInventory {
    threshold: u64,
    frequencies: Vec<(Category, u64)>,
    kept: usize,
    index: HashMap<Category, usize>,
}

/// Result of looking a category up in the inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Known(usize),
    Unk,
}

impl LabelInventory {
    /// Counts gold categories and keeps those seen at least `threshold` times.
    pub fn build(train: &[TaggedSentence], threshold: u64) -> Result<Self, CorpusError> {
        if threshold == 0 {
            return Err(CorpusError::InvalidThreshold);
        }
        if train.iter().all(TaggedSentence::is_empty) {
            return Err(CorpusError::Empty);
        }
        let mut counts: HashMap<&Category, u64> = HashMap::new();
        for s in train {
            for c in &s.gold {
                check_reserved(c)?;
                *counts.entry(c).or_default() += 1;
            }
        }
        let freqs = counts.into_iter().map(|(c, n)| (c.clone(), n)).collect();
        Ok(Self::from_frequencies(freqs, threshold))
    }

    fn from_frequencies(mut frequencies: Vec<(Category, u64)>, threshold: u64) -> Self {
        let mut keyed: Vec<(String, Category, u64)> =
            frequencies.drain(..).map(|(c, n)| (c.to_string(), c, n)).collect();
        keyed.sort_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        let frequencies: Vec<(Category, u64)> = keyed.into_iter().map(|(_, c, n)| (c, n)).collect();
        let kept = frequencies.iter().take_while(|(_, n)| *n >= threshold).count();
        let index = frequencies
            .iter()
            .enumerate()
            .map(|(i, (c, _))| (c.clone(), i))
            .collect();
        LabelInventory {
            threshold,
            frequencies,
            kept,
            index,
        }
    }

    pub fn threshold(&self) -> u64 {
        self.threshold
    }

    /// Kept categories in descending frequency order.
    pub fn categories(&self) -> impl ExactSizeIterator<Item = &Category> + '_ {
        self.frequencies[..self.kept].iter().map(|(c, _)| c)
    }

    pub fn category(&self, idx: usize) -> &Category {
        &self.frequencies[idx].0
    }

    pub fn len(&self) -> usize {
        self.kept
    }

    pub fn is_empty(&self) -> bool {
        self.kept == 0
    }

    /// Number of distinct categories seen in training, kept or not.
    pub fn distinct(&self) -> usize {
        self.frequencies.len()
    }

    /// Every category seen in training with its count.
    pub fn all_frequencies(&self) -> &[(Category, u64)] {
        &self.frequencies
    }

    /// Kept categories with their counts.
    pub fn kept_frequencies(&self) -> &[(Category, u64)] {
        &self.frequencies[..self.kept]
    }

    pub fn frequency(&self, c: &Category) -> u64 {
        self.index.get(c).map_or(0, |&i| self.frequencies[i].1)
    }

    pub fn lookup(&self, c: &Category) -> Label {
        match self.index.get(c) {
            Some(&i) if i < self.kept => Label::Known(i),
            _ => Label::Unk,
        }
    }

    pub fn contains(&self, c: &Category) -> bool {
        matches!(self.lookup(c), Label::Known(_))
    }

    /// Distinct atomic categories of the kept categories, sorted by surface.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut atoms: Vec<Atom> = self.categories().flat_map(|c| c.atoms().into_iter().cloned()).collect();
        atoms.sort_by_key(|a| a.to_string());
        atoms.dedup();
        atoms
    }

    /// Positions whose gold category is outside the inventory; training
    /// losses skip them.
    pub fn unk_mask(&self, sentence: &TaggedSentence) -> Result<Vec<bool>, CorpusError> {
        sentence
            .gold
            .iter()
            .map(|c| {
                check_reserved(c)?;
                Ok(!self.contains(c))
            })
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("threshold={}\n", self.threshold);
        for (c, n) in &self.frequencies {
            out.push_str(&format!("{c}\t{n}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !is_comment(l) && !l.trim().is_empty());
        let threshold = match lines.next() {
            Some((i, l)) => l
                .strip_prefix("threshold=")
                .and_then(|v| v.trim().parse::<u64>().ok())
                .filter(|&t| t >= 1)
                .ok_or_else(|| CorpusError::Malformed {
                    line: i + 1,
                    message: "expected header \"threshold=<n>\"".into(),
                })?,
            None => return Err(CorpusError::Empty),
        };
        let mut freqs = Vec::new();
        for (i, line) in lines {
            let (cat, count) = line
                .split_once('\t')
                .ok_or(CorpusError::Ragged { line: i + 1, found: 1 })?;
            let count = count.trim().parse::<u64>().map_err(|_| CorpusError::Malformed {
                line: i + 1,
                message: format!("bad count {count:?}"),
            })?;
            freqs.push((parse_category(i + 1, cat)?, count));
        }
        Ok(Self::from_frequencies(freqs, threshold))
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&self.to_text())
    }
}

fn check_reserved(c: &Category) -> Result<(), CorpusError> {
    match c {
        Category::Atom(a) if a.feature().is_none() && a.base() == UNK => {
            Err(CorpusError::ReservedLabel(UNK.to_string()))
        }
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Category {
        s.parse().unwrap()
    }

    fn sentence(gold: &[&str]) -> TaggedSentence {
        let words = (0..gold.len()).map(|i| format!("w{i}")).collect();
        TaggedSentence::new(words, None, gold.iter().map(|g| c(g)).collect()).unwrap()
    }

    #[test]
    fn reads_pipe_line() {
        let s = parse_corpus("Mr.|NNP|N/N Vinken|NNP|N\n", CorpusFormat::Pipe).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].words, ["Mr.", "Vinken"]);
        assert_eq!(s[0].pos.as_deref().unwrap(), ["NNP", "NNP"]);
        assert_eq!(s[0].gold, vec![c("N/N"), c("N")]);
    }

    #[test]
    fn pipe_missing_pos_reports_line() {
        let err = parse_corpus("a|DT|NP/N\nword|N/N\n", CorpusFormat::Pipe).unwrap_err();
        match err {
            CorpusError::MissingField { line, field, .. } => {
                assert_eq!(line, 2);
                assert_eq!(field, "POS");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(parse_corpus("word|N/N", CorpusFormat::Pipe)
            .unwrap_err()
            .to_string()
            .contains("missing its POS field"));
    }

    #[test]
    fn pipe_bad_category_reports_line() {
        let err = parse_corpus("# header\nx|X|N\ny|Y|(N/\n", CorpusFormat::Pipe).unwrap_err();
        assert!(matches!(err, CorpusError::Category { line: 3, .. }), "{err}");
    }

    #[test]
    fn tsv_blank_line_splits_sentences() {
        let text = "The\tNP/N\ndog\tN\n\nIt\tNP\nbarks\tS\\NP\n";
        let s = parse_corpus(text, CorpusFormat::Tsv).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].gold, vec![c("NP"), c("S\\NP")]);
        assert!(s[0].pos.is_none());
    }

    #[test]
    fn tsv_ragged_line() {
        let err = parse_corpus("a\tNP\tx\n", CorpusFormat::Tsv).unwrap_err();
        assert!(matches!(err, CorpusError::Ragged { line: 1, found: 3 }));
    }

    #[test]
    fn empty_file_is_an_error() {
        assert!(matches!(parse_corpus("", CorpusFormat::Pipe), Err(CorpusError::Empty)));
        assert!(matches!(
            parse_corpus("\n\n", CorpusFormat::Tsv),
            Err(CorpusError::Empty)
        ));
    }

    #[test]
    fn pipe_write_back_is_idempotent() {
        let text = "Mr.|NNP|N/N   Vinken|NNP|N\nis|VBZ|(S[dcl]\\NP)/NP  x|Y|NP\\NP/NP\n";
        let once = write_corpus(&parse_corpus(text, CorpusFormat::Pipe).unwrap(), CorpusFormat::Pipe);
        let twice = write_corpus(&parse_corpus(&once, CorpusFormat::Pipe).unwrap(), CorpusFormat::Pipe);
        assert_eq!(once, twice);
        assert!(once.contains("(NP\\NP)/NP"));
    }

    #[test]
    fn threshold_semantics() {
        let mut gold = vec!["A"; 12];
        gold.extend(vec!["B"; 9]);
        let inv = LabelInventory::build(&[sentence(&gold)], 10).unwrap();
        assert_eq!(inv.categories().cloned().collect::<Vec<_>>(), vec![c("A")]);
        assert_eq!(inv.lookup(&c("B")), Label::Unk);
        assert_eq!(inv.frequency(&c("B")), 9);
        assert_eq!(inv.distinct(), 2);

        let inv1 = LabelInventory::build(&[sentence(&gold)], 1).unwrap();
        assert_eq!(inv1.len(), 2);

        let mut tie = vec!["A"; 10];
        tie.push("B");
        assert!(LabelInventory::build(&[sentence(&tie)], 10).unwrap().contains(&c("A")));
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let inv = LabelInventory::build(&[sentence(&["N", "NP", "NP", "B", "A", "N"])], 1).unwrap();
        let order: Vec<String> = inv.categories().map(|c| c.to_string()).collect();
        assert_eq!(order, ["N", "NP", "A", "B"]);
    }

    #[test]
    fn unk_mask_marks_excluded_positions() {
        let mut gold = vec!["A"; 12];
        gold.extend(vec!["B"; 9]);
        let inv = LabelInventory::build(&[sentence(&gold)], 10).unwrap();
        assert_eq!(inv.unk_mask(&sentence(&["A", "B"])).unwrap(), vec![false, true]);
        assert_eq!(inv.unk_mask(&sentence(&["A", "A"])).unwrap(), vec![false, false]);
        let err = inv.unk_mask(&sentence(&["A", "UNK"])).unwrap_err();
        assert!(err.to_string().contains("reserved label in corpus"));
    }

    #[test]
    fn build_rejects_bad_input() {
        assert!(matches!(LabelInventory::build(&[], 10), Err(CorpusError::Empty)));
        assert!(matches!(
            LabelInventory::build(&[sentence(&["A"])], 0),
            Err(CorpusError::InvalidThreshold)
        ));
        assert!(matches!(
            LabelInventory::build(&[sentence(&["UNK"])], 1),
            Err(CorpusError::ReservedLabel(_))
        ));
    }

    #[test]
    fn frequencies_sum_to_token_count() {
        let s = vec![sentence(&["A", "B", "A", "(S\\NP)/NP"]), sentence(&["A", "C"])];
        let inv = LabelInventory::build(&s, 2).unwrap();
        let kept: u64 = inv.kept_frequencies().iter().map(|(_, n)| n).sum();
        let all: u64 = inv.all_frequencies().iter().map(|(_, n)| n).sum();
        assert_eq!(kept, 3);
        assert_eq!(all, 6);
    }

    #[test]
    fn serialization_roundtrip_is_byte_stable() {
        let s = vec![sentence(&["A", "B", "A", "(S[dcl]\\NP)/NP", "B", "C"])];
        let inv = LabelInventory::build(&s, 2).unwrap();
        let text = inv.to_text();
        assert!(text.starts_with("threshold=2\n"));
        let back = LabelInventory::from_text(&text).unwrap();
        assert_eq!(back, inv);
        assert_eq!(back.to_text(), text);
        assert_eq!(LabelInventory::build(&s, 2).unwrap().to_text(), text);
    }

    #[test]
    fn atoms_of_inventory() {
        let inv = LabelInventory::build(&[sentence(&["(S[dcl]\\NP)/NP", "N"])], 1).unwrap();
        let atoms: Vec<String> = inv.atoms().iter().map(|a| a.to_string()).collect();
        assert_eq!(atoms, ["N", "NP", "S[dcl]"]);
    }
}
