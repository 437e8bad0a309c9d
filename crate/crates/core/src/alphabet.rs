//! Symbol alphabets and corpus ingestion.
//!
//! Symbols are interned to dense `u16` ids so that downstream counting works
//! on integer slices.  An alphabet is either character-based (every symbol a
//! single char, text read char by char) or token-based (symbols may be
//! multi-char, text split on whitespace).

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

pub type SymbolId = u16;

#[derive(Debug, Error, PartialEq)]
pub enum AlphabetError {
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(String),
    #[error("alphabet is empty")]
    EmptyAlphabet,
    #[error("alphabet has {0} symbols, at most 65535 supported")]
    TooManySymbols(usize),
    #[error("unknown symbol {symbol:?} at position {position}")]
    UnknownSymbol { symbol: String, position: usize },
    #[error("input contains no symbols")]
    EmptyInput,
}

/// Ordered set of symbols.  The ordering is fixed at construction and is the
/// ordering used by the statistical tests and by every serialized artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<String>,
    index: HashMap<String, SymbolId>,
    token_mode: bool,
}

impl Alphabet {
    /// One symbol per character, in the order given.
    pub fn from_chars(chars: &str) -> Result<Self, AlphabetError> {
        let symbols: Vec<String> = chars.chars().map(|c| c.to_string()).collect();
        Self::build(symbols, false)
    }

    /// Multi-character symbols; text using this alphabet is whitespace-split.
    pub fn from_tokens<S: AsRef<str>>(tokens: &[S]) -> Result<Self, AlphabetError> {
        let symbols: Vec<String> = tokens.iter().map(|t| t.as_ref().to_string()).collect();
        Self::build(symbols, true)
    }

    /// CLI-style alphabet spec: with commas it is a token list ("up,down"),
    /// otherwise each character is a symbol ("AB").
    pub fn parse(spec: &str) -> Result<Self, AlphabetError> {
        if spec.contains(',') {
            let toks: Vec<&str> = spec.split(',').filter(|t| !t.is_empty()).collect();
            Self::from_tokens(&toks)
        } else {
            Self::from_chars(spec)
        }
    }

    /// Sorted distinct symbols occurring in `text` (characters, newlines
    /// excluded, unless the text contains interior whitespace, in which case
    /// whitespace-separated tokens).
    pub fn infer_from_text(text: &str) -> Result<Self, AlphabetError> {
        let tokenish = text.trim_end().lines().any(|l| l.contains(char::is_whitespace));
        if tokenish {
            let mut toks: Vec<&str> = text.split_whitespace().collect();
            toks.sort_unstable();
            toks.dedup();
            Self::from_tokens(&toks)
        } else {
            let mut cs: Vec<char> = text.chars().filter(|c| *c != '\n' && *c != '\r').collect();
            cs.sort_unstable();
            cs.dedup();
            let s: String = cs.into_iter().collect();
            Self::from_chars(&s)
        }
    }

    fn build(symbols: Vec<String>, token_mode: bool) -> Result<Self, AlphabetError> {
        if symbols.is_empty() {
            return Err(AlphabetError::EmptyAlphabet);
        }
        if symbols.len() > u16::MAX as usize {
            return Err(AlphabetError::TooManySymbols(symbols.len()));
        }
        let mut index = HashMap::with_capacity(symbols.len());
        for (i, s) in symbols.iter().enumerate() {
            if index.insert(s.clone(), i as SymbolId).is_some() {
                return Err(AlphabetError::DuplicateSymbol(s.clone()));
            }
        }
        Ok(Alphabet { symbols, index, token_mode })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbol(&self, id: SymbolId) -> &str {
        &self.symbols[id as usize]
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn id_of(&self, symbol: &str) -> Option<SymbolId> {
        self.index.get(symbol).copied()
    }

    pub fn token_mode(&self) -> bool {
        self.token_mode
    }

    /// Render a word of symbol ids as text ("" join for char alphabets,
    /// " " join for token alphabets).
    pub fn render_word(&self, word: &[SymbolId]) -> String {
        let sep = if self.token_mode { " " } else { "" };
        word.iter().map(|&s| self.symbol(s)).collect::<Vec<_>>().join(sep)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render_word(&(0..self.len() as u16).collect::<Vec<_>>()))
    }
}

/// One observed sequence, as interned symbol ids in time order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence(pub Vec<SymbolId>);

impl SymbolSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A set of sequences treated as independent samples of one process.
/// Subwords are never counted across sequence boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub sequences: Vec<SymbolSequence>,
}

impl Corpus {
    pub fn single(seq: Vec<SymbolId>) -> Self {
        Corpus { sequences: vec![SymbolSequence(seq)] }
    }

    pub fn total_len(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestMode {
    /// All text forms one sequence; newlines are skipped.
    WholeFile,
    /// Each non-empty line is its own sequence.
    PerLine,
}

/// Decode text into a corpus over `alphabet`.
///
/// Character alphabets read one symbol per char; token alphabets split each
/// line on whitespace.  Positions in errors count symbols from the start of
/// the text (newlines excluded).
pub fn ingest(text: &str, alphabet: &Alphabet, mode: IngestMode) -> Result<Corpus, AlphabetError> {
    let mut sequences = Vec::new();
    let mut position = 0usize;
    let push = |line: &str, position: &mut usize| -> Result<Option<SymbolSequence>, AlphabetError> {
        let mut seq = Vec::new();
        if alphabet.token_mode {
            for tok in line.split_whitespace() {
                match alphabet.id_of(tok) {
                    Some(id) => seq.push(id),
                    None => {
                        return Err(AlphabetError::UnknownSymbol {
                            symbol: tok.to_string(),
                            position: *position,
                        })
                    }
                }
                *position += 1;
            }
        } else {
            for c in line.chars() {
                if c == '\r' {
                    continue;
                }
                let s = c.to_string();
                match alphabet.id_of(&s) {
                    Some(id) => seq.push(id),
                    None => {
                        return Err(AlphabetError::UnknownSymbol { symbol: s, position: *position })
                    }
                }
                *position += 1;
            }
        }
        Ok(if seq.is_empty() { None } else { Some(SymbolSequence(seq)) })
    };

    match mode {
        IngestMode::WholeFile => {
            let mut seq = Vec::new();
            for line in text.lines() {
                if let Some(s) = push(line, &mut position)? {
                    seq.extend(s.0);
                }
            }
            if !seq.is_empty() {
                sequences.push(SymbolSequence(seq));
            }
        }
        IngestMode::PerLine => {
            for line in text.lines() {
                if let Some(s) = push(line, &mut position)? {
                    sequences.push(s);
                }
            }
        }
    }
    if sequences.is_empty() {
        return Err(AlphabetError::EmptyInput);
    }
    Ok(Corpus { sequences })
}

/// Inverse of [`ingest`]: one line per sequence.
pub fn render(corpus: &Corpus, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for seq in &corpus.sequences {
        out.push_str(&alphabet.render_word(&seq.0));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_chars() {
        let a = Alphabet::from_chars("AB").unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a.symbol(0), "A");
        assert_eq!(a.id_of("B"), Some(1));
        assert!(!a.token_mode());
    }

    #[test]
    fn duplicate_symbol_rejected() {
        assert_eq!(
            Alphabet::from_chars("ABA").unwrap_err(),
            AlphabetError::DuplicateSymbol("A".into())
        );
    }

    #[test]
    fn empty_alphabet_rejected() {
        assert_eq!(Alphabet::from_chars("").unwrap_err(), AlphabetError::EmptyAlphabet);
    }

    #[test]
    fn parse_token_list() {
        let a = Alphabet::parse("up,down,left").unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.token_mode());
        assert_eq!(a.id_of("down"), Some(1));
    }

    #[test]
    fn ingest_whole_file_skips_newlines() {
        let a = Alphabet::from_chars("AB").unwrap();
        let c = ingest("AB\nBA\n", &a, IngestMode::WholeFile).unwrap();
        assert_eq!(c.sequences.len(), 1);
        assert_eq!(c.sequences[0].0, vec![0, 1, 1, 0]);
        assert_eq!(c.total_len(), 4);
    }

    #[test]
    fn ingest_per_line_splits_sequences() {
        let a = Alphabet::from_chars("AB").unwrap();
        let c = ingest("AB\n\nBA\n", &a, IngestMode::PerLine).unwrap();
        assert_eq!(c.sequences.len(), 2);
        assert_eq!(c.sequences[1].0, vec![1, 0]);
    }

    #[test]
    fn unknown_symbol_reports_position() {
        let a = Alphabet::from_chars("AB").unwrap();
        let err = ingest("ABC", &a, IngestMode::WholeFile).unwrap_err();
        assert_eq!(err, AlphabetError::UnknownSymbol { symbol: "C".into(), position: 2 });
    }

    #[test]
    fn empty_input_rejected() {
        let a = Alphabet::from_chars("AB").unwrap();
        assert_eq!(ingest("\n\n", &a, IngestMode::PerLine).unwrap_err(), AlphabetError::EmptyInput);
    }

    #[test]
    fn token_ingest() {
        let a = Alphabet::parse("up,down").unwrap();
        let c = ingest("up down\ndown down\n", &a, IngestMode::PerLine).unwrap();
        assert_eq!(c.sequences.len(), 2);
        assert_eq!(c.sequences[0].0, vec![0, 1]);
        let text = render(&c, &a);
        assert_eq!(text, "up down\ndown down\n");
    }

    #[test]
    fn infer_alphabet_sorted_distinct() {
        let a = Alphabet::infer_from_text("BAAB\nBB").unwrap();
        assert_eq!(a.symbols(), &["A".to_string(), "B".to_string()]);
    }

    proptest! {
        #[test]
        fn render_ingest_round_trip(seqs in prop::collection::vec(
            prop::collection::vec(0u16..3, 1..40), 1..6)) {
            let a = Alphabet::from_chars("ABC").unwrap();
            let corpus = Corpus { sequences: seqs.into_iter().map(SymbolSequence).collect() };
            let text = render(&corpus, &a);
            let back = ingest(&text, &a, IngestMode::PerLine).unwrap();
            prop_assert_eq!(back, corpus);
        }
    }
}
