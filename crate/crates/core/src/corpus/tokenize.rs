use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::CharSpan;

const SHIPPED_ABBREVIATIONS: &str = include_str!("../../assets/abbreviations.txt");

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenization {
    pub sentences: Vec<CharSpan>,
    /// Tokens grouped by sentence.
    pub tokens: Vec<Vec<CharSpan>>,
}

/// Rule-based tokenizer and sentence splitter for German clinical text.
///
/// Tokens are maximal runs of letters and digits or single punctuation
/// characters. Sentences end at `.`, `!`, `?` and newlines, except for a
/// period that closes a known abbreviation or sits between two digits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    abbreviations: Vec<String>,
    #[serde(skip)]
    lookup: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        let entries = SHIPPED_ABBREVIATIONS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_owned);
        Tokenizer::with_abbreviations(entries)
    }
}

pub fn tokenize(text: &str) -> Tokenization {
    Tokenizer::default().tokenize(text)
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '»' | '“')
}

impl Tokenizer {
    pub fn with_abbreviations(entries: impl IntoIterator<Item = String>) -> Self {
        let mut abbreviations: Vec<String> = entries.into_iter().collect();
        abbreviations.sort();
        abbreviations.dedup();
        let lookup = abbreviations.iter().map(|a| a.to_lowercase()).collect();
        Tokenizer {
            abbreviations,
            lookup,
        }
    }

    /// Adds entries to the abbreviation list.
    pub fn extend(&mut self, entries: impl IntoIterator<Item = String>) {
        let merged = self.abbreviations.drain(..).chain(entries).collect::<Vec<_>>();
        *self = Tokenizer::with_abbreviations(merged);
    }

    pub fn abbreviations(&self) -> &[String] {
        &self.abbreviations
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn rebuilt(self) -> Self {
        Tokenizer::with_abbreviations(self.abbreviations)
    }

    /// True if the period at `period` belongs to an abbreviation, either as
    /// its final period or an inner one ("z." in "z.B.").
    fn in_abbreviation(&self, chars: &[char], period: usize) -> bool {
        let start = chars[..period]
            .iter()
            .rposition(|c| c.is_whitespace())
            .map_or(0, |p| p + 1);
        let end = chars[period..]
            .iter()
            .position(|c| c.is_whitespace())
            .map_or(chars.len(), |p| period + p);
        let word = &chars[start..end];
        let at = period - start;
        (0..at).any(|k| {
            (k == 0 || !word[k - 1].is_alphanumeric())
                && word[k].is_alphanumeric()
                && (at + 1..=word.len()).any(|e| {
                    word[e - 1] == '.'
                        && self
                            .lookup
                            .contains(&word[k..e].iter().collect::<String>().to_lowercase())
                })
        })
    }

    fn ends_sentence(&self, chars: &[char], i: usize) -> bool {
        let c = chars[i];
        if c != '.' {
            return is_terminator(c);
        }
        let digit_before = i > 0 && chars[i - 1].is_ascii_digit();
        let digit_after = chars.get(i + 1).is_some_and(|c| c.is_ascii_digit());
        if digit_before && digit_after {
            return false;
        }
        !self.in_abbreviation(chars, i)
    }

    pub fn tokenize(&self, text: &str) -> Tokenization {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Tokenization::default();
        let mut current: Vec<CharSpan> = Vec::new();
        // A terminator was seen; the sentence closes before the next token
        // unless that token is glued-on punctuation.
        let mut pending = false;

        let flush = |current: &mut Vec<CharSpan>, out: &mut Tokenization| {
            if let (Some(first), Some(last)) = (current.first(), current.last()) {
                out.sentences.push(CharSpan::new(first.start, last.end));
                out.tokens.push(std::mem::take(current));
            }
        };

        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                if c == '\n' {
                    flush(&mut current, &mut out);
                    pending = false;
                }
                i += 1;
                continue;
            }
            let start = i;
            if c.is_alphanumeric() {
                while i < chars.len() && chars[i].is_alphanumeric() {
                    i += 1;
                }
            } else {
                i += 1;
            }
            let token = CharSpan::new(start, i);

            if pending {
                let glued = current.last().is_some_and(|t| t.end == start)
                    && (is_terminator(c) || is_closer(c));
                if !glued {
                    flush(&mut current, &mut out);
                    pending = false;
                }
            }
            current.push(token);
            if token.len() == 1 && is_terminator(c) && self.ends_sentence(&chars, start) {
                pending = true;
            }
        }
        flush(&mut current, &mut out);
        out
    }
}
