//! Solidity lexical analysis.
//!
//! Comments and whitespace are skipped; every token keeps its byte span so
//! that callers can slice the original text. A `pragma ...;` directive is
//! returned as one [`TokenKind::Pragma`] token because version constraints do
//! not tokenize cleanly (`^0.4.24`).

use std::fmt;

use crate::span::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Number,
    Str,
    HexStr,
    Punct,
    /// `pragma` up to (excluding) the terminating `;`.
    Pragma,
    /// Only produced by [`tokenize_lossy`] for bytes that start no token.
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub span: Span,
}

impl Token {
    pub fn text<'a>(&self, src: &'a str) -> &'a str {
        &src[self.span.start..self.span.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub message: String,
    pub offset: usize,
}

impl fmt::Display for LexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for LexError {}

// Longest first so that maximal munch works with a linear scan.
const PUNCTUATION: &[&str] = &[
    ">>>=", ">>>", "<<=", ">>=", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=",
    "*=", "/=", "%=", "|=", "&=", "^=", "<<", ">>", "=>", "->", ":=", "(", ")", "{", "}", "[",
    "]", ";", ",", ".", "?", ":", "=", "!", "<", ">", "+", "-", "*", "/", "%", "&", "|", "^", "~",
    "@",
];

/// Strict tokenization: malformed literals and stray bytes are errors.
pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer::new(src, false).run()
}

/// Total tokenization used for token counting and similarity: never fails.
pub fn tokenize_lossy(src: &str) -> Vec<Token> {
    Lexer::new(src, true)
        .run()
        .expect("lossy lexer does not report errors")
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    lossy: bool,
    out: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, lossy: bool) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            lossy,
            out: Vec::new(),
        }
    }

    fn peek(&self, ahead: usize) -> Option<u8> {
        self.bytes.get(self.pos + ahead).copied()
    }

    fn push(&mut self, kind: TokenKind, start: usize) {
        self.out.push(Token {
            kind,
            span: Span::new(start, self.pos),
        });
    }

    fn error(&self, message: &str, offset: usize) -> LexError {
        LexError {
            message: message.to_string(),
            offset,
        }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            let start = self.pos;
            match b {
                b' ' | b'\t' | b'\r' | b'\n' | 0x0c => self.pos += 1,
                b'/' if self.peek(1) == Some(b'/') => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b'/' if self.peek(1) == Some(b'*') => {
                    match self.src[self.pos + 2..].find("*/") {
                        Some(rel) => self.pos += rel + 4,
                        None if self.lossy => self.pos = self.bytes.len(),
                        None => return Err(self.error("unterminated block comment", start)),
                    }
                }
                b'"' | b'\'' => {
                    self.string(b)?;
                    self.push(TokenKind::Str, start);
                }
                b'0'..=b'9' => {
                    self.number();
                    self.push(TokenKind::Number, start);
                }
                b'.' if matches!(self.peek(1), Some(b'0'..=b'9')) => {
                    self.number();
                    self.push(TokenKind::Number, start);
                }
                b if is_ident_start(b) => {
                    while self.pos < self.bytes.len() && is_ident_continue(self.bytes[self.pos]) {
                        self.pos += 1;
                    }
                    let word = &self.src[start..self.pos];
                    let quote = self.peek(0);
                    if (word == "hex" || word == "unicode") && matches!(quote, Some(b'"' | b'\'')) {
                        self.string(quote.unwrap_or(b'"'))?;
                        let kind = if word == "hex" {
                            TokenKind::HexStr
                        } else {
                            TokenKind::Str
                        };
                        self.push(kind, start);
                    } else if word == "pragma" {
                        while self.pos < self.bytes.len() && self.bytes[self.pos] != b';' {
                            self.pos += 1;
                        }
                        self.push(TokenKind::Pragma, start);
                    } else {
                        self.push(TokenKind::Ident, start);
                    }
                }
                _ => {
                    let rest = &self.src[self.pos..];
                    if let Some(p) = PUNCTUATION.iter().find(|p| rest.starts_with(**p)) {
                        self.pos += p.len();
                        self.push(TokenKind::Punct, start);
                    } else if self.lossy {
                        let ch = rest.chars().next().map_or(1, char::len_utf8);
                        self.pos += ch;
                        self.push(TokenKind::Unknown, start);
                    } else {
                        let ch = rest.chars().next().unwrap_or('?');
                        return Err(self.error(&format!("unexpected character {ch:?}"), start));
                    }
                }
            }
        }
        Ok(self.out)
    }

    fn string(&mut self, quote: u8) -> Result<(), LexError> {
        let start = self.pos;
        self.pos += 1;
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'\\' => self.pos += 2,
                b'\n' if !self.lossy => {
                    return Err(self.error("unterminated string literal", start));
                }
                c if c == quote => {
                    self.pos += 1;
                    return Ok(());
                }
                _ => self.pos += 1,
            }
        }
        self.pos = self.bytes.len();
        if self.lossy {
            Ok(())
        } else {
            Err(self.error("unterminated string literal", start))
        }
    }

    fn number(&mut self) {
        let bytes = self.bytes;
        if bytes[self.pos] == b'0' && matches!(self.peek(1), Some(b'x' | b'X')) {
            self.pos += 2;
            while self.pos < bytes.len() && (bytes[self.pos].is_ascii_hexdigit() || bytes[self.pos] == b'_') {
                self.pos += 1;
            }
            return;
        }
        let digits = |lx: &mut Self| {
            while lx.pos < bytes.len() && (bytes[lx.pos].is_ascii_digit() || bytes[lx.pos] == b'_') {
                lx.pos += 1;
            }
        };
        digits(self);
        if self.peek(0) == Some(b'.') && matches!(self.peek(1), Some(b'0'..=b'9')) {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.peek(0), Some(b'e' | b'E')) {
            let signed = self.peek(1) == Some(b'-');
            let digit_at = if signed { 2 } else { 1 };
            if matches!(self.peek(digit_at), Some(b'0'..=b'9')) {
                self.pos += digit_at;
                digits(self);
            }
        }
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_' || b == b'$'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'$'
}

/// Line and column (both 1-based, column in bytes) of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(src.len());
    let before = &src.as_bytes()[..offset];
    let line = before.iter().filter(|b| **b == b'\n').count() + 1;
    let col = match before.iter().rposition(|b| *b == b'\n') {
        Some(nl) => offset - nl,
        None => offset + 1,
    };
    (line, col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<&str> {
        tokenize(src).unwrap().iter().map(|t| t.text(src)).collect()
    }

    #[test]
    fn state_variable_declaration() {
        assert_eq!(texts("uint x;"), vec!["uint", "x", ";"]);
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            texts("a /* b */ c // d\n e"),
            vec!["a", "c", "e"]
        );
    }

    #[test]
    fn operators_use_maximal_munch() {
        assert_eq!(texts("a>>>=b"), vec!["a", ">>>=", "b"]);
        assert_eq!(texts("x**2>=y"), vec!["x", "**", "2", ">=", "y"]);
    }

    #[test]
    fn numeric_literals() {
        assert_eq!(texts("1e18 0xFF 1_000 2.5 1 ether"), vec!["1e18", "0xFF", "1_000", "2.5", "1", "ether"]);
    }

    #[test]
    fn pragma_is_one_token() {
        let src = "pragma solidity >=0.4.22 <0.6.0; contract A {}";
        let toks = tokenize(src).unwrap();
        assert_eq!(toks[0].kind, TokenKind::Pragma);
        assert_eq!(toks[0].text(src), "pragma solidity >=0.4.22 <0.6.0");
        assert_eq!(toks[1].text(src), ";");
    }

    #[test]
    fn string_and_hex_literals() {
        let src = r#"require(ok, "it's \"fine\""); hex"00ff""#;
        let toks = tokenize(src).unwrap();
        assert!(toks.iter().any(|t| t.kind == TokenKind::HexStr));
        assert_eq!(toks[4].text(src), r#""it's \"fine\"""#);
    }

    #[test]
    fn strict_rejects_unterminated_string() {
        assert!(tokenize("x = \"abc").is_err());
        assert_eq!(tokenize_lossy("x = \"abc").len(), 3);
    }

    #[test]
    fn line_col_is_one_based() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
