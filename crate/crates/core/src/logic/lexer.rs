// SPDX-License-Identifier: Apache-2.0

//! Tokenizer shared by the formula parsers.

use super::SynthError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Tok<'a> {
    Ident(&'a str),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
pub(crate) struct Token<'a> {
    pub tok: Tok<'a>,
    pub offset: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.'
}

/// Splits `src` into identifiers and the given symbols (longest match
/// first). Identifiers may contain dots so dotted event names survive.
pub(crate) fn tokenize<'a>(src: &'a str, symbols: &[&'static str]) -> Result<Vec<Token<'a>>, SynthError> {
    let mut symbols = symbols.to_vec();
    symbols.sort_by_key(|s| std::cmp::Reverse(s.len()));
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < src.len() {
        let rest = &src[pos..];
        let c = rest.chars().next().unwrap();
        if c.is_whitespace() {
            pos += c.len_utf8();
            continue;
        }
        if let Some(sym) = symbols.iter().find(|s| rest.starts_with(**s)) {
            out.push(Token {
                tok: Tok::Sym(sym),
                offset: pos,
            });
            pos += sym.len();
            continue;
        }
        if is_ident_start(c) || c.is_ascii_digit() {
            let len = rest
                .char_indices()
                .find(|(_, ch)| !is_ident_char(*ch))
                .map_or(rest.len(), |(i, _)| i);
            out.push(Token {
                tok: Tok::Ident(&rest[..len]),
                offset: pos,
            });
            pos += len;
            continue;
        }
        return Err(SynthError::syntax(pos, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

/// Cursor over a token list with helpers for recursive-descent parsers.
pub(crate) struct Cursor<'a> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(tokens: Vec<Token<'a>>, src_len: usize) -> Self {
        Cursor {
            tokens,
            pos: 0,
            end: src_len,
        }
    }

    pub fn peek(&self) -> Option<&Tok<'a>> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    pub fn peek_at(&self, ahead: usize) -> Option<&Tok<'a>> {
        self.tokens.get(self.pos + ahead).map(|t| &t.tok)
    }

    pub fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.offset)
    }

    pub fn bump(&mut self) -> Option<Tok<'a>> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    pub fn eat_sym(&mut self, sym: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == sym) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, word: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if *s == word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect_sym(&mut self, sym: &str) -> Result<(), SynthError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{sym}`")))
        }
    }

    pub fn expect_ident(&mut self) -> Result<&'a str, SynthError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = *s;
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    pub fn expect_end(&self) -> Result<(), SynthError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    pub fn error(&self, message: impl Into<String>) -> SynthError {
        SynthError::syntax(self.offset(), message)
    }
}
