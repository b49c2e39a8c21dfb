//! Tagging accuracy overall, by gold-category frequency, by gold-category
//! length, and p@k on categories outside the inventory.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::category::Category;
use crate::corpus::LabelInventory;

/// Default frequency buckets, half-open.
pub const DEFAULT_BUCKETS: [(u64, u64); 3] = [(10, 100), (100, 400), (400, 2000)];
pub const DEFAULT_KS: [usize; 4] = [1, 2, 4, 8];

const NA: &str = "n/a (0 tokens)";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{pred} predictions for {gold} gold tokens")]
    LengthMismatch { pred: usize, gold: usize },
    #[error("frequency buckets overlap or are empty: [{lo}, {hi})")]
    BadBucket { lo: u64, hi: u64 },
}

fn check_lengths(pred: usize, gold: usize) -> Result<(), EvalError> {
    if pred == gold {
        Ok(())
    } else {
        Err(EvalError::LengthMismatch { pred, gold })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub correct: usize,
    pub total: usize,
}

impl Tally {
    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.correct += usize::from(hit);
    }

    /// `None` for an empty group.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total > 0).then(|| self.correct as f64 / self.total as f64)
    }
}

/// Structural equality, features included. `None` predictions never match.
fn hit(pred: &Option<Category>, gold: &Category) -> bool {
    pred.as_ref() == Some(gold)
}

pub fn accuracy(pred: &[Option<Category>], gold: &[Category]) -> Result<f64, EvalError> {
    check_lengths(pred.len(), gold.len())?;
    let mut t = Tally::default();
    for (p, g) in pred.iter().zip(gold) {
        t.add(hit(p, g));
    }
    Ok(t.accuracy().unwrap_or(0.0))
}

/// Which frequency group a token belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FrequencyGroup {
    /// Below the lowest bucket.
    Below,
    Bucket(u64, u64),
    /// Between two non-adjacent buckets.
    Gap,
    /// At or above the top of the highest bucket.
    Above,
}

impl std::fmt::Display for FrequencyGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrequencyGroup::Below => f.write_str("below"),
            FrequencyGroup::Bucket(lo, hi) => write!(f, "[{lo},{hi})"),
            FrequencyGroup::Gap => f.write_str("gap"),
            FrequencyGroup::Above => f.write_str("above"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketRow {
    pub group: FrequencyGroup,
    pub tally: Tally,
    /// Share of all test tokens.
    pub share: f64,
}

fn sorted_buckets(buckets: &[(u64, u64)]) -> Result<Vec<(u64, u64)>, EvalError> {
    let mut b = buckets.to_vec();
    b.sort_unstable();
    for (i, &(lo, hi)) in b.iter().enumerate() {
        if lo >= hi || (i > 0 && lo < b[i - 1].1) {
            return Err(EvalError::BadBucket { lo, hi });
        }
    }
    Ok(b)
}

fn group_of(freq: u64, buckets: &[(u64, u64)]) -> FrequencyGroup {
    match buckets.iter().find(|&&(lo, hi)| lo <= freq && freq < hi) {
        Some(&(lo, hi)) => FrequencyGroup::Bucket(lo, hi),
        None if buckets.first().is_none_or(|b| freq < b.0) => FrequencyGroup::Below,
        None if buckets.last().is_none_or(|b| freq >= b.1) => FrequencyGroup::Above,
        None => FrequencyGroup::Gap,
    }
}

/// Accuracy per group of the gold category's training frequency. Every
/// configured bucket gets a row; `Below`, `Gap` and `Above` rows appear
/// when they hold tokens. Rows are ordered by frequency.
pub fn bucketed_accuracy(
    pred: &[Option<Category>],
    gold: &[Category],
    inv: &LabelInventory,
    buckets: &[(u64, u64)],
) -> Result<Vec<BucketRow>, EvalError> {
    check_lengths(pred.len(), gold.len())?;
    let buckets = sorted_buckets(buckets)?;
    let mut groups: BTreeMap<FrequencyGroup, Tally> = buckets
        .iter()
        .map(|&(lo, hi)| (FrequencyGroup::Bucket(lo, hi), Tally::default()))
        .collect();
    for (p, g) in pred.iter().zip(gold) {
        groups
            .entry(group_of(inv.frequency(g), &buckets))
            .or_default()
            .add(hit(p, g));
    }
    let n = gold.len().max(1) as f64;
    let mut rows: Vec<BucketRow> = groups
        .into_iter()
        .map(|(group, tally)| BucketRow {
            group,
            tally,
            share: tally.total as f64 / n,
        })
        .collect();
    // Below, buckets, gap, above.
    rows.sort_by_key(|r| match r.group {
        FrequencyGroup::Below => (0, 0),
        FrequencyGroup::Bucket(lo, _) => (1, lo),
        FrequencyGroup::Gap => (2, 0),
        FrequencyGroup::Above => (3, 0),
    });
    Ok(rows)
}

/// Accuracy keyed by the gold category's token length.
pub fn length_accuracy(pred: &[Option<Category>], gold: &[Category]) -> Result<BTreeMap<usize, Tally>, EvalError> {
    check_lengths(pred.len(), gold.len())?;
    let mut out: BTreeMap<usize, Tally> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gold) {
        out.entry(g.token_len()).or_default().add(hit(p, g));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PAtK {
    pub k: usize,
    pub hits: usize,
    pub total: usize,
}

impl PAtK {
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// For tokens whose gold category is outside the inventory: share whose gold
/// appears among the first `k` candidates. `None` candidates are ill-formed
/// entries that still occupy a rank. With `strip`, features are ignored on
/// both sides.
pub fn unseen_p_at_k(
    kbest: &[Vec<Option<Category>>],
    gold: &[Category],
    inv: &LabelInventory,
    ks: &[usize],
    strip: bool,
) -> Result<Vec<PAtK>, EvalError> {
    check_lengths(kbest.len(), gold.len())?;
    let norm = |c: &Category| if strip { c.strip_features() } else { c.clone() };
    let mut rank_of_gold: Vec<Option<usize>> = Vec::new();
    for (cands, g) in kbest.iter().zip(gold) {
        if inv.contains(g) {
            continue;
        }
        let target = norm(g);
        let rank = cands.iter().position(|c| c.as_ref().is_some_and(|c| norm(c) == target));
        rank_of_gold.push(rank);
    }
    Ok(ks
        .iter()
        .map(|&k| PAtK {
            k,
            hits: rank_of_gold.iter().filter(|r| r.is_some_and(|r| r < k)).count(),
            total: rank_of_gold.len(),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnseenReport {
    pub strict: Vec<PAtK>,
    pub stripped: Vec<PAtK>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub overall: Tally,
    pub buckets: Vec<BucketRow>,
    pub lengths: BTreeMap<usize, Tally>,
    pub unseen: Option<UnseenReport>,
}

impl EvalReport {
    /// Builds every section; the unseen table needs k-best lists.
    pub fn build(
        pred: &[Option<Category>],
        gold: &[Category],
        inv: &LabelInventory,
        buckets: &[(u64, u64)],
        kbest: Option<&[Vec<Option<Category>>]>,
        ks: &[usize],
    ) -> Result<Self, EvalError> {
        check_lengths(pred.len(), gold.len())?;
        let mut overall = Tally::default();
        for (p, g) in pred.iter().zip(gold) {
            overall.add(hit(p, g));
        }
        let unseen = match kbest {
            Some(kb) => Some(UnseenReport {
                strict: unseen_p_at_k(kb, gold, inv, ks, false)?,
                stripped: unseen_p_at_k(kb, gold, inv, ks, true)?,
            }),
            None => None,
        };
        Ok(EvalReport {
            overall,
            buckets: bucketed_accuracy(pred, gold, inv, buckets)?,
            lengths: length_accuracy(pred, gold)?,
            unseen,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Tsv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "tsv" => Ok(ReportFormat::Tsv),
            _ => Err(format!("unknown report format '{s}' (expected text or tsv)")),
        }
    }
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn frac(x: Option<f64>) -> String {
    x.map_or_else(|| NA.to_string(), |v| format!("{v:.6}"))
}

/// Deterministic rendering. TSV columns: section, key, correct, total,
/// value, share.
pub fn render_report(r: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(r),
        ReportFormat::Tsv => render_tsv(r),
    }
}

fn render_text(r: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "accuracy\t{}%\t({}/{})",
        pct(r.overall.accuracy()),
        r.overall.correct,
        r.overall.total
    );
    let _ = writeln!(out, "\nby gold frequency in training");
    let _ = writeln!(out, "group\taccuracy\t% in test\ttokens");
    for row in &r.buckets {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.2}\t{}",
            row.group,
            pct(row.tally.accuracy()),
            100.0 * row.share,
            row.tally.total
        );
    }
    let _ = writeln!(out, "(% in test is relative to all test tokens)");
    let _ = writeln!(out, "\nby gold category length");
    let _ = writeln!(out, "length\taccuracy\ttokens");
    for (len, t) in &r.lengths {
        let _ = writeln!(out, "{len}\t{}\t{}", pct(t.accuracy()), t.total);
    }
    if let Some(u) = &r.unseen {
        let tokens = u.strict.first().map_or(0, |p| p.total);
        let _ = writeln!(out, "\nunseen categories ({tokens} tokens)");
        for (name, rows) in [("strict", &u.strict), ("w/o feature", &u.stripped)] {
            let cells: Vec<String> = rows.iter().map(|p| format!("p@{}={}", p.k, pct(p.value()))).collect();
            let _ = writeln!(out, "{name}\t{}", cells.join("\t"));
        }
    }
    out
}

fn render_tsv(r: &EvalReport) -> String {
    let mut out = String::from("section\tkey\tcorrect\ttotal\tvalue\tshare\n");
    let o = &r.overall;
    let _ = writeln!(
        out,
        "overall\tall\t{}\t{}\t{}\t1.000000",
        o.correct,
        o.total,
        frac(o.accuracy())
    );
    for row in &r.buckets {
        let t = row.tally;
        let _ = writeln!(
            out,
            "frequency\t{}\t{}\t{}\t{}\t{:.6}",
            row.group,
            t.correct,
            t.total,
            frac(t.accuracy()),
            row.share
        );
    }
    let n = o.total.max(1) as f64;
    for (len, t) in &r.lengths {
        let _ = writeln!(
            out,
            "length\t{len}\t{}\t{}\t{}\t{:.6}",
            t.correct,
            t.total,
            frac(t.accuracy()),
            t.total as f64 / n
        );
    }
    if let Some(u) = &r.unseen {
        for (name, rows) in [("unseen", &u.strict), ("unseen_nofeat", &u.stripped)] {
            for p in rows.iter() {
                let _ = writeln!(
                    out,
                    "{name}\tp@{}\t{}\t{}\t{}\t{:.6}",
                    p.k,
                    p.hits,
                    p.total,
                    frac(p.value()),
                    p.total as f64 / n
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TaggedSentence;

    fn cats(s: &[&str]) -> Vec<Category> {
        s.iter().map(|c| c.parse().unwrap()).collect()
    }

    fn some(s: &[&str]) -> Vec<Option<Category>> {
        cats(s).into_iter().map(Some).collect()
    }

    fn inventory(counts: &[(&str, usize)]) -> LabelInventory {
        let mut gold = Vec::new();
        for &(c, n) in counts {
            gold.extend(std::iter::repeat_n(c.parse::<Category>().unwrap(), n));
        }
        let words = vec!["w".to_string(); gold.len()];
        LabelInventory::build(&[TaggedSentence::new(words, None, gold).unwrap()], 1).unwrap()
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&some(&["N", "NP"]), &cats(&["N", "N"])).unwrap(), 0.5);
        assert_eq!(accuracy(&some(&["S[dcl]"]), &cats(&["S"])).unwrap(), 0.0);
        assert_eq!(accuracy(&[None], &cats(&["S"])).unwrap(), 0.0);
        assert!(matches!(
            accuracy(&some(&["N"]), &[]),
            Err(EvalError::LengthMismatch { pred: 1, gold: 0 })
        ));
    }

    #[test]
    fn half_open_buckets() {
        let inv = inventory(&[("N", 100), ("NP", 99), ("S", 5)]);
        let gold = cats(&["N", "NP", "S", "PP"]);
        let pred = some(&["N", "N", "S", "PP"]);
        let rows = bucketed_accuracy(&pred, &gold, &inv, &DEFAULT_BUCKETS).unwrap();
        let find = |g: FrequencyGroup| rows.iter().find(|r| r.group == g).unwrap().tally;
        assert_eq!(find(FrequencyGroup::Bucket(100, 400)), Tally { correct: 1, total: 1 });
        assert_eq!(find(FrequencyGroup::Bucket(10, 100)), Tally { correct: 0, total: 1 });
        assert_eq!(find(FrequencyGroup::Below), Tally { correct: 2, total: 2 });
        assert_eq!(find(FrequencyGroup::Bucket(400, 2000)).total, 0);
        assert_eq!(rows.iter().map(|r| r.tally.total).sum::<usize>(), 4);
    }

    #[test]
    fn overlapping_buckets_are_rejected() {
        let inv = inventory(&[("N", 1)]);
        assert!(bucketed_accuracy(&[], &[], &inv, &[(1, 10), (5, 20)]).is_err());
    }

    #[test]
    fn p_at_k_ranks_and_stripping() {
        let inv = inventory(&[("N", 1)]);
        let gold = cats(&["N/S[dcl]", "N"]);
        let kbest = vec![
            vec![
                None,
                Some("N".parse().unwrap()),
                Some("N/S[qem]".parse().unwrap()),
                Some("N/S[dcl]".parse().unwrap()),
            ],
            vec![Some("N".parse().unwrap())],
        ];
        let strict = unseen_p_at_k(&kbest, &gold, &inv, &DEFAULT_KS, false).unwrap();
        let hits: Vec<usize> = strict.iter().map(|p| p.hits).collect();
        assert_eq!(hits, vec![0, 0, 1, 1]);
        assert!(strict.iter().all(|p| p.total == 1));
        let stripped = unseen_p_at_k(&kbest, &gold, &inv, &DEFAULT_KS, true).unwrap();
        let hits: Vec<usize> = stripped.iter().map(|p| p.hits).collect();
        assert_eq!(hits, vec![0, 0, 1, 1]);
        let kbest = vec![vec![Some("N/S[qem]".parse().unwrap())], vec![]];
        assert_eq!(unseen_p_at_k(&kbest, &gold, &inv, &[1], true).unwrap()[0].hits, 1);
        assert_eq!(unseen_p_at_k(&kbest, &gold, &inv, &[1], false).unwrap()[0].hits, 0);
    }

    #[test]
    fn rendering_is_stable_and_marks_empty_unseen() {
        let inv = inventory(&[("N", 20)]);
        let gold = cats(&["N", "N/N"]);
        let pred = some(&["N", "N"]);
        let kb: Vec<Vec<Option<Category>>> = vec![vec![], vec![]];
        let mut report = EvalReport::build(&pred, &gold, &inv, &DEFAULT_BUCKETS, Some(&kb), &DEFAULT_KS).unwrap();
        let text = render_report(&report, ReportFormat::Text);
        assert_eq!(text, render_report(&report, ReportFormat::Text));
        assert!(text.contains("% in test"));
        report.unseen = Some(UnseenReport {
            strict: unseen_p_at_k(&kb[..1], &gold[..1], &inv, &[1], false).unwrap(),
            stripped: vec![],
        });
        let tsv = render_report(&report, ReportFormat::Tsv);
        assert!(tsv.contains("unseen\tp@1\t0\t0\tn/a (0 tokens)"));
        assert!(render_report(&report, ReportFormat::Text).contains("p@1=n/a (0 tokens)"));
    }

    #[test]
    fn length_groups() {
        let gold = cats(&["N", "N/N", "(S\\NP)/NP", "N"]);
        let pred = some(&["N", "N", "(S\\NP)/NP", "NP"]);
        let m = length_accuracy(&pred, &gold).unwrap();
        assert_eq!(m[&1], Tally { correct: 1, total: 2 });
        assert_eq!(m[&3], Tally { correct: 0, total: 1 });
        assert_eq!(m[&7], Tally { correct: 1, total: 1 });
        assert!(!m.contains_key(&2));
    }
}
