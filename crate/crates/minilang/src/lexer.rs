//! Tokenizer for MiniLang source text.
//!
//! Whitespace and comments are not tokens. Token indices are dense and
//! strictly increasing per file, which makes them stable anchors for
//! token-level change tracking.

use thiserror::Error;

/// Reserved words. `String` is deliberately not reserved; it lexes as an
/// identifier and is recognized as a builtin type by the parser.
pub const KEYWORDS: &[&str] = &[
    "package", "class", "if", "else", "while", "return", "assert", "void", "int", "boolean",
    "true", "false", "null",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Keyword,
    Ident,
    IntLit,
    StrLit,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    /// 0-based position in the file's token stream.
    pub index: usize,
    /// 1-based source line.
    pub line: u32,
    /// 1-based source column.
    pub col: u32,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("unterminated string literal starting at {line}:{col}")]
    UnterminatedString { line: u32, col: u32 },
    #[error("unterminated block comment starting at {line}:{col}")]
    UnterminatedComment { line: u32, col: u32 },
    #[error("unexpected character {ch:?} at {line}:{col}")]
    UnexpectedChar { ch: char, line: u32, col: u32 },
}

const PUNCT2: &[&str] = &["==", "!=", "<=", ">=", "&&", "||"];
const PUNCT1: &str = "{}();,.=<>+-*/%!";

pub fn lex(text: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut line: u32 = 1;
    let mut col: u32 = 1;

    macro_rules! push {
        ($text:expr, $kind:expr, $line:expr, $col:expr) => {
            tokens.push(Token {
                text: $text,
                kind: $kind,
                index: tokens.len(),
                line: $line,
                col: $col,
            })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        // Line comment
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
            continue;
        }
        // Block comment
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            i += 2;
            col += 2;
            loop {
                if i >= chars.len() {
                    return Err(LexError::UnterminatedComment { line: sl, col: sc });
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    i += 2;
                    col += 2;
                    break;
                }
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            continue;
        }
        if c == '"' {
            let (sl, sc) = (line, col);
            let mut lit = String::from("\"");
            i += 1;
            col += 1;
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(LexError::UnterminatedString { line: sl, col: sc });
                }
                let ch = chars[i];
                if ch == '\\' {
                    let next = chars.get(i + 1).copied();
                    match next {
                        Some(n @ ('"' | '\\' | 'n' | 't')) => {
                            lit.push('\\');
                            lit.push(n);
                            i += 2;
                            col += 2;
                        }
                        _ => return Err(LexError::UnterminatedString { line: sl, col: sc }),
                    }
                    continue;
                }
                lit.push(ch);
                i += 1;
                col += 1;
                if ch == '"' {
                    break;
                }
            }
            push!(lit, TokenKind::StrLit, sl, sc);
            continue;
        }
        if c.is_ascii_digit() {
            let (sl, sc) = (line, col);
            let mut lit = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                lit.push(chars[i]);
                i += 1;
                col += 1;
            }
            push!(lit, TokenKind::IntLit, sl, sc);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let (sl, sc) = (line, col);
            let mut word = String::new();
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                word.push(chars[i]);
                i += 1;
                col += 1;
            }
            let kind = if KEYWORDS.contains(&word.as_str()) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            push!(word, kind, sl, sc);
            continue;
        }
        if i + 1 < chars.len() {
            let two: String = [c, chars[i + 1]].iter().collect();
            if PUNCT2.contains(&two.as_str()) {
                push!(two, TokenKind::Punct, line, col);
                i += 2;
                col += 2;
                continue;
            }
        }
        if PUNCT1.contains(c) {
            push!(c.to_string(), TokenKind::Punct, line, col);
            i += 1;
            col += 1;
            continue;
        }
        return Err(LexError::UnexpectedChar { ch: c, line, col });
    }
    Ok(tokens)
}

/// Token texts only, for callers that just need the stream.
pub fn lex_texts(text: &str) -> Result<Vec<String>, LexError> {
    Ok(lex(text)?.into_iter().map(|t| t.text).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(src: &str) -> Vec<String> {
        lex_texts(src).unwrap()
    }

    #[test]
    fn simple_statement() {
        assert_eq!(texts("return x;"), vec!["return", "x", ";"]);
    }

    #[test]
    fn empty_input() {
        assert!(texts("").is_empty());
    }

    #[test]
    fn multi_char_operators_take_longest_match() {
        assert_eq!(texts("a<=b==c&&!d"), vec!["a", "<=", "b", "==", "c", "&&", "!", "d"]);
    }

    #[test]
    fn comments_and_whitespace_are_not_tokens() {
        assert_eq!(
            texts("x = 1; // trailing\n/* block\ncomment */ y = 2;"),
            vec!["x", "=", "1", ";", "y", "=", "2", ";"]
        );
    }

    #[test]
    fn string_literal_keeps_quotes_and_escapes() {
        assert_eq!(texts(r#"s = "a\"b \n";"#), vec!["s", "=", r#""a\"b \n""#, ";"]);
    }

    #[test]
    fn unterminated_string_is_an_error() {
        assert!(matches!(
            lex("x = \"oops"),
            Err(LexError::UnterminatedString { line: 1, col: 5 })
        ));
    }

    #[test]
    fn line_and_column_positions() {
        let toks = lex("package p;\nclass A {\n}").unwrap();
        assert_eq!(toks[2].text, ";");
        assert_eq!((toks[2].line, toks[2].col), (1, 10));
        assert_eq!(toks[3].text, "class");
        assert_eq!((toks[3].line, toks[3].col), (2, 1));
        let indices: Vec<usize> = toks.iter().map(|t| t.index).collect();
        assert_eq!(indices, (0..toks.len()).collect::<Vec<_>>());
    }

    #[test]
    fn keywords_are_classified() {
        let toks = lex("if (isDelProp(gramps)) { return false; }").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Keyword);
        assert_eq!(toks[2].kind, TokenKind::Ident);
        assert_eq!(toks.len(), 12);
    }

    #[test]
    fn single_space_join_relexes_to_same_stream() {
        let src = "int a = x.len() <= 3 % 2; /* gone */ assert a != 0;";
        let first = texts(src);
        let joined = first.join(" ");
        assert_eq!(texts(&joined), first);
    }
}
