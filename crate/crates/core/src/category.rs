//! CCG categories as binary trees of atomic categories joined by slashes.
//!
//! The text grammar is
//!
//! ```text
//! Cat     := Term (Slash Term)*        left-folding: S\NP/NP == (S\NP)/NP
//! Term    := AtomTok | "(" Cat ")"
//! AtomTok := base ("[" feature "]")?
//! Slash   := "/" | "\"
//! ```
//!
//! Printing is canonical: every complex category nested inside another one is
//! parenthesized, the top level never is. Tokenization splits that canonical
//! form into parentheses, slashes and atom tokens (a feature stays attached
//! to its atom).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// An atomic category such as `NP`, `S[dcl]` or `,`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    base: String,
    feature: Option<String>,
}

fn is_reserved(c: char) -> bool {
    matches!(c, '(' | ')' | '[' | ']' | '/' | '\\') || c.is_whitespace()
}

impl Atom {
    pub fn new(base: &str, feature: Option<&str>) -> Result<Self, ParseError> {
        if base.is_empty() {
            return Err(ParseError::new(0, ParseErrorKind::EmptyBase));
        }
        if let Some((i, c)) = base.char_indices().find(|&(_, c)| is_reserved(c)) {
            return Err(ParseError::new(i, ParseErrorKind::UnexpectedChar(c)));
        }
        if let Some(feat) = feature {
            if feat.is_empty() || feat.contains(['[', ']']) {
                return Err(ParseError::new(
                    base.len(),
                    ParseErrorKind::MalformedFeature(feat.to_string()),
                ));
            }
        }
        Ok(Atom {
            base: base.to_string(),
            feature: feature.map(str::to_string),
        })
    }

    /// Featureless atom. Panics on an invalid base; meant for literals.
    pub fn plain(base: &str) -> Self {
        Atom::new(base, None).expect("invalid atomic category base")
    }

    pub fn base(&self) -> &str {
        &self.base
    }

    pub fn feature(&self) -> Option<&str> {
        self.feature.as_deref()
    }

    pub fn without_feature(&self) -> Atom {
        Atom {
            base: self.base.clone(),
            feature: None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.feature {
            Some(feat) => write!(f, "{}[{}]", self.base, feat),
            None => f.write_str(&self.base),
        }
    }
}

impl FromStr for Atom {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Category::from_str(s)? {
            Category::Atom(a) => Ok(a),
            Category::Complex { .. } => Err(ParseError::new(0, ParseErrorKind::NotAtomic)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slash {
    Forward,
    Backward,
}

impl Slash {
    pub const ALL: [Slash; 2] = [Slash::Forward, Slash::Backward];

    pub fn symbol(self) -> char {
        match self {
            Slash::Forward => '/',
            Slash::Backward => '\\',
        }
    }
}

impl fmt::Display for Slash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    Atom(Atom),
    Complex {
        result: Box<Category>,
        slash: Slash,
        argument: Box<Category>,
    },
}

impl Category {
    pub fn complex(result: Category, slash: Slash, argument: Category) -> Self {
        Category::Complex {
            result: Box::new(result),
            slash,
            argument: Box::new(argument),
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self, Category::Atom(_))
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Category::Atom(a) => out.push(a),
            Category::Complex { result, argument, .. } => {
                result.collect_atoms(out);
                argument.collect_atoms(out);
            }
        }
    }

    pub fn num_atoms(&self) -> usize {
        match self {
            Category::Atom(_) => 1,
            Category::Complex { result, argument, .. } => result.num_atoms() + argument.num_atoms(),
        }
    }

    pub fn num_slashes(&self) -> usize {
        self.num_atoms() - 1
    }

    pub fn depth(&self) -> usize {
        match self {
            Category::Atom(_) => 0,
            Category::Complex { result, argument, .. } => 1 + result.depth().max(argument.depth()),
        }
    }

    /// Same tree with every feature removed (`S[dcl]\NP` becomes `S\NP`).
    pub fn strip_features(&self) -> Category {
        match self {
            Category::Atom(a) => Category::Atom(a.without_feature()),
            Category::Complex {
                result,
                slash,
                argument,
            } => Category::complex(result.strip_features(), *slash, argument.strip_features()),
        }
    }

    /// Tokens of the canonical printed form.
    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::new();
        self.push_tokens(&mut out, false);
        out
    }

    fn push_tokens(&self, out: &mut Vec<Token>, nested: bool) {
        match self {
            Category::Atom(a) => out.push(Token::Atom(a.clone())),
            Category::Complex {
                result,
                slash,
                argument,
            } => {
                if nested {
                    out.push(Token::Open);
                }
                result.push_tokens(out, true);
                out.push(Token::Slash(*slash));
                argument.push_tokens(out, true);
                if nested {
                    out.push(Token::Close);
                }
            }
        }
    }

    /// Number of tokens in the canonical form.
    pub fn token_len(&self) -> usize {
        match self {
            Category::Atom(_) => 1,
            Category::Complex { .. } => self.inner_len(),
        }
    }

    fn inner_len(&self) -> usize {
        match self {
            Category::Atom(_) => 1,
            Category::Complex { result, argument, .. } => {
                let wrap = |c: &Category| match c {
                    Category::Atom(_) => 1,
                    Category::Complex { .. } => c.inner_len() + 2,
                };
                wrap(result) + 1 + wrap(argument)
            }
        }
    }

    /// Parses a token sequence. Error offsets are token indices.
    pub fn from_tokens(tokens: &[Token]) -> Result<Category, ParseError> {
        let positioned: Vec<(Token, usize)> = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Parser::new(&positioned, tokens.len()).parse()
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn nested(c: &Category, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match c {
                Category::Atom(a) => write!(f, "{a}"),
                Category::Complex { .. } => write!(f, "({c})"),
            }
        }
        match self {
            Category::Atom(a) => write!(f, "{a}"),
            Category::Complex {
                result,
                slash,
                argument,
            } => {
                nested(result, f)?;
                write!(f, "{slash}")?;
                nested(argument, f)
            }
        }
    }
}

impl FromStr for Category {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens = lex(s)?;
        Parser::new(&tokens, s.len()).parse()
    }
}

impl From<Atom> for Category {
    fn from(a: Atom) -> Self {
        Category::Atom(a)
    }
}

/// Surface token of a category's canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Token {
    Open,
    Close,
    Slash(Slash),
    Atom(Atom),
}

impl Token {
    pub fn is_operator(&self) -> bool {
        matches!(self, Token::Slash(_))
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Open => f.write_str("("),
            Token::Close => f.write_str(")"),
            Token::Slash(s) => write!(f, "{s}"),
            Token::Atom(a) => write!(f, "{a}"),
        }
    }
}

impl FromStr for Token {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "(" => Ok(Token::Open),
            ")" => Ok(Token::Close),
            "/" => Ok(Token::Slash(Slash::Forward)),
            "\\" => Ok(Token::Slash(Slash::Backward)),
            _ => s.parse::<Atom>().map(Token::Atom),
        }
    }
}

/// Concatenates token surfaces without separators.
pub fn join_tokens(tokens: &[Token]) -> String {
    tokens.iter().map(Token::to_string).collect()
}

/// Splits category text into tokens with their byte offsets.
pub fn lex(text: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < text.len() {
        let c = text[i..].chars().next().unwrap();
        match c {
            '(' => {
                out.push((Token::Open, i));
                i += 1;
            }
            ')' => {
                out.push((Token::Close, i));
                i += 1;
            }
            '/' => {
                out.push((Token::Slash(Slash::Forward), i));
                i += 1;
            }
            '\\' => {
                out.push((Token::Slash(Slash::Backward), i));
                i += 1;
            }
            '[' | ']' => {
                return Err(ParseError::new(
                    i,
                    ParseErrorKind::MalformedFeature("bracket without atomic base".into()),
                ))
            }
            c if c.is_whitespace() => return Err(ParseError::new(i, ParseErrorKind::UnexpectedChar(c))),
            _ => {
                let start = i;
                while i < text.len() && !is_reserved(text[i..].chars().next().unwrap()) {
                    i += text[i..].chars().next().unwrap().len_utf8();
                }
                let base = &text[start..i];
                let mut feature = None;
                if i < text.len() && bytes[i] == b'[' {
                    let open = i;
                    let close = text[open + 1..].find([']', '[']).map(|p| p + open + 1);
                    match close {
                        Some(end) if bytes[end] == b']' && end > open + 1 => {
                            feature = Some(&text[open + 1..end]);
                            i = end + 1;
                        }
                        Some(end) if bytes[end] == b']' => {
                            return Err(ParseError::new(
                                open,
                                ParseErrorKind::MalformedFeature("empty feature".into()),
                            ))
                        }
                        _ => {
                            return Err(ParseError::new(
                                open,
                                ParseErrorKind::MalformedFeature("unterminated feature".into()),
                            ))
                        }
                    }
                }
                let atom = Atom::new(base, feature).map_err(|e| e.shifted(start))?;
                out.push((Token::Atom(atom), start));
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [(Token, usize)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [(Token, usize)], end: usize) -> Self {
        Parser { tokens, pos: 0, end }
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|t| &t.0)
    }

    fn parse(mut self) -> Result<Category, ParseError> {
        if self.tokens.is_empty() {
            return Err(ParseError::new(0, ParseErrorKind::Empty));
        }
        let cat = self.parse_cat()?;
        match self.peek() {
            None => Ok(cat),
            Some(Token::Close) => Err(ParseError::new(self.offset(), ParseErrorKind::UnmatchedClose)),
            Some(_) => Err(ParseError::new(self.offset(), ParseErrorKind::MissingSlash)),
        }
    }

    fn parse_cat(&mut self) -> Result<Category, ParseError> {
        let mut cat = self.parse_term()?;
        while let Some(Token::Slash(slash)) = self.peek() {
            let slash = *slash;
            let at = self.offset();
            self.pos += 1;
            if matches!(self.peek(), None | Some(Token::Close) | Some(Token::Slash(_))) {
                return Err(ParseError::new(at, ParseErrorKind::DanglingSlash));
            }
            let argument = self.parse_term()?;
            cat = Category::complex(cat, slash, argument);
        }
        Ok(cat)
    }

    fn parse_term(&mut self) -> Result<Category, ParseError> {
        let at = self.offset();
        match self.peek().cloned() {
            Some(Token::Atom(a)) => {
                self.pos += 1;
                Ok(Category::Atom(a))
            }
            Some(Token::Open) => {
                self.pos += 1;
                if matches!(self.peek(), Some(Token::Close)) {
                    return Err(ParseError::new(at, ParseErrorKind::EmptyGroup));
                }
                if self.peek().is_none() {
                    return Err(ParseError::new(at, ParseErrorKind::UnclosedParen));
                }
                let inner = self.parse_cat()?;
                match self.peek() {
                    Some(Token::Close) => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    None => Err(ParseError::new(at, ParseErrorKind::UnclosedParen)),
                    Some(_) => Err(ParseError::new(self.offset(), ParseErrorKind::MissingSlash)),
                }
            }
            Some(Token::Slash(_)) => Err(ParseError::new(at, ParseErrorKind::MissingResult)),
            Some(Token::Close) => Err(ParseError::new(at, ParseErrorKind::UnmatchedClose)),
            None => Err(ParseError::new(at, ParseErrorKind::Empty)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("empty category")]
    Empty,
    #[error("empty atomic base")]
    EmptyBase,
    #[error("unbalanced parentheses: '(' is never closed")]
    UnclosedParen,
    #[error("unbalanced parentheses: unexpected ')'")]
    UnmatchedClose,
    #[error("empty parenthesized group")]
    EmptyGroup,
    #[error("dangling slash without an argument")]
    DanglingSlash,
    #[error("slash without a result category")]
    MissingResult,
    #[error("two categories without a slash between them")]
    MissingSlash,
    #[error("malformed feature bracket: {0}")]
    MalformedFeature(String),
    #[error("unexpected character {0:?}")]
    UnexpectedChar(char),
    #[error("expected an atomic category")]
    NotAtomic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at offset {offset}")]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn new(offset: usize, kind: ParseErrorKind) -> Self {
        ParseError { offset, kind }
    }

    fn shifted(mut self, by: usize) -> Self {
        self.offset += by;
        self
    }
}

/// Base names treated as punctuation categories.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PunctuationSet {
    bases: BTreeSet<String>,
}

impl PunctuationSet {
    pub fn new<I, S>(bases: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        PunctuationSet {
            bases: bases.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.bases.contains(atom.base())
    }

    /// True iff `c` is a lone punctuation atom.
    pub fn is_punctuation_category(&self, c: &Category) -> bool {
        matches!(c, Category::Atom(a) if self.contains(a))
    }
}

impl Default for PunctuationSet {
    fn default() -> Self {
        PunctuationSet::new([".", ",", ";", ":", "LRB", "RRB"])
    }
}
