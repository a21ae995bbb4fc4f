//! Tokens and utterances.
//!
//! Offsets are measured in Unicode scalar values (chars), not bytes.

use serde::{Deserialize, Serialize};

/// Punctuation detached from the edges of a whitespace chunk.
const EDGE_PUNCT: &[char] = &[',', '.', ';', ':', '?', '!', '"', '(', ')', '[', ']'];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn lower(&self) -> String {
        self.surface.to_lowercase()
    }

    pub fn is_punct(&self) -> bool {
        self.surface.chars().all(|c| c.is_ascii_punctuation())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum TextError {
    #[error("token {index} ({surface:?}) not found in text after offset {after}")]
    TokenNotFound {
        index: usize,
        surface: String,
        after: usize,
    },
    #[error("empty token at index {0}")]
    EmptyToken(usize),
}

/// A tokenized piece of text.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Utterance {
    text: String,
    tokens: Vec<Token>,
}

impl Utterance {
    /// Tokenizes `text` on whitespace, detaching edge punctuation. A currency
    /// symbol glued to digits stays attached, so `$400` is one token.
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Utterance { text, tokens }
    }

    /// Builds an utterance from pre-split tokens, locating each token in
    /// `text` left to right.
    pub fn from_tokens<S: AsRef<str>>(text: impl Into<String>, tokens: &[S]) -> Result<Self, TextError> {
        let text = text.into();
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::with_capacity(tokens.len());
        let mut cursor = 0usize;
        for (index, tok) in tokens.iter().enumerate() {
            let tok = tok.as_ref();
            let needle: Vec<char> = tok.chars().collect();
            if needle.is_empty() {
                return Err(TextError::EmptyToken(index));
            }
            let found = (cursor..=chars.len().saturating_sub(needle.len()))
                .find(|&i| chars[i..i + needle.len()] == needle[..]);
            match found {
                Some(start) => {
                    let end = start + needle.len();
                    out.push(Token { surface: tok.to_string(), start, end });
                    cursor = end;
                }
                None => {
                    return Err(TextError::TokenNotFound {
                        index,
                        surface: tok.to_string(),
                        after: cursor,
                    })
                }
            }
        }
        Ok(Utterance { text, tokens: out })
    }

    /// Joins tokens with single spaces.
    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self, TextError> {
        let text = words.iter().map(|w| w.as_ref()).collect::<Vec<_>>().join(" ");
        Self::from_tokens(text, words)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surfaces(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    /// Text covered by the token range `[start, end)`, including inner whitespace.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        if start >= end || end > self.tokens.len() {
            return "";
        }
        let from = self.tokens[start].start;
        let to = self.tokens[end - 1].end;
        char_slice(&self.text, from, to)
    }
}

/// Byte-safe slice of `text` by char offsets.
pub(crate) fn char_slice(text: &str, from: usize, to: usize) -> &str {
    let mut idx = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_from = idx.by_ref().nth(from).unwrap_or(text.len());
    let b_to = if to > from {
        idx.nth(to - from - 1).unwrap_or(text.len())
    } else {
        b_from
    };
    &text[b_from..b_to]
}

fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let chunk_start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, chunk_start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    let mut trailing = Vec::new();
    while lo < hi && EDGE_PUNCT.contains(&chars[lo]) {
        out.push(make_token(chars, lo, lo + 1));
        lo += 1;
    }
    while hi > lo && EDGE_PUNCT.contains(&chars[hi - 1]) {
        // keep a decimal point or abbreviation dot inside the chunk ("U.S.")
        if chars[hi - 1] == '.' && hi - lo > 2 && chars[lo..hi - 1].contains(&'.') {
            break;
        }
        trailing.push(make_token(chars, hi - 1, hi));
        hi -= 1;
    }
    if lo < hi {
        out.push(make_token(chars, lo, hi));
    }
    out.extend(trailing.into_iter().rev());
}

fn make_token(chars: &[char], start: usize, end: usize) -> Token {
    Token {
        surface: chars[start..end].iter().collect(),
        start,
        end,
    }
}
