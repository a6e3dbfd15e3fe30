//! Profile-driven lexical scan shared by every metric: per-line
//! classification and the token stream.

use super::profile::LanguageProfile;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Code,
    Comment,
    Blank,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub kind: LineKind,
    /// Text outside comments, trimmed. Empty unless `kind` is `Code`.
    pub code: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Operator,
    Keyword,
    Identifier,
    Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    pub column: usize,
}

impl Token {
    pub fn is_operator(&self) -> bool {
        matches!(self.kind, TokenKind::Operator | TokenKind::Keyword)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scan {
    pub lines: Vec<Line>,
    pub tokens: Vec<Token>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Unknown characters are an error.
    Strict,
    /// Unknown characters are plain code.
    Lenient,
}

/// Scans `text`; characters outside the profile's token set count as code.
pub fn scan(text: &str, profile: &LanguageProfile) -> Scan {
    scan_with(text, profile, Mode::Lenient).expect("lenient scan cannot fail")
}

/// Scans `text`, rejecting characters that start no token.
pub fn tokenize(text: &str, profile: &LanguageProfile) -> Result<Scan, MetricsError> {
    scan_with(text, profile, Mode::Strict)
}

struct LineAcc {
    code: String,
    has_code: bool,
    has_comment: bool,
}

impl LineAcc {
    fn new() -> Self {
        LineAcc {
            code: String::new(),
            has_code: false,
            has_comment: false,
        }
    }

    fn finish(self) -> Line {
        if self.has_code {
            Line {
                kind: LineKind::Code,
                code: self.code.trim().to_string(),
            }
        } else if self.has_comment {
            Line {
                kind: LineKind::Comment,
                code: String::new(),
            }
        } else {
            Line {
                kind: LineKind::Blank,
                code: String::new(),
            }
        }
    }
}

fn scan_with(text: &str, profile: &LanguageProfile, mode: Mode) -> Result<Scan, MetricsError> {
    let chars: Vec<char> = text.chars().collect();
    let at = |i: usize, s: &str| s.chars().enumerate().all(|(k, c)| chars.get(i + k) == Some(&c));

    let mut out = Scan::default();
    let mut cur = LineAcc::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let mut block: Option<(&str, usize)> = None;

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            out.lines.push(std::mem::replace(&mut cur, LineAcc::new()).finish());
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if let Some((close, _)) = block {
            if at(i, close) {
                i += close.chars().count();
                col += close.chars().count();
                block = None;
            } else {
                if !c.is_whitespace() {
                    cur.has_comment = true;
                }
                i += 1;
                col += 1;
            }
            continue;
        }
        if c.is_whitespace() {
            cur.code.push(c);
            i += 1;
            col += 1;
            continue;
        }
        if profile.line_comments.iter().any(|m| at(i, m)) {
            cur.has_comment = true;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if let Some((open, close)) = profile.block_comments.iter().find(|(o, _)| at(i, o)) {
            cur.has_comment = true;
            block = Some((close.as_str(), line));
            i += open.chars().count();
            col += open.chars().count();
            continue;
        }

        let (start, start_line, start_col) = (i, line, col);
        let kind = if profile.string_delimiters.contains(&c) {
            i += 1;
            while i < chars.len() && chars[i] != c {
                if chars[i] == '\\' && i + 1 < chars.len() {
                    i += 1;
                }
                i += 1;
            }
            i = (i + 1).min(chars.len());
            Some(TokenKind::Literal)
        } else if c.is_ascii_digit() {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '.' || chars[i] == '_') {
                let exp = matches!(chars[i], 'e' | 'E');
                i += 1;
                if exp
                    && matches!(chars.get(i), Some('+' | '-'))
                    && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())
                {
                    i += 1;
                }
            }
            Some(TokenKind::Literal)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            Some(if profile.is_keyword(&word) {
                TokenKind::Keyword
            } else {
                TokenKind::Identifier
            })
        } else if let Some(op) = profile.operators.iter().find(|o| at(i, o)) {
            i += op.chars().count();
            Some(TokenKind::Operator)
        } else if mode == Mode::Strict {
            return Err(MetricsError::Token {
                line,
                column: col,
                found: c,
            });
        } else {
            i += 1;
            None
        };

        // Literals may span lines; every touched line is code.
        let lexeme: String = chars[start..i].iter().collect();
        let mut parts = lexeme.split('\n');
        let first = parts.next().unwrap_or_default();
        cur.code.push_str(first);
        cur.has_code = true;
        col += first.chars().count();
        for part in parts {
            out.lines.push(std::mem::replace(&mut cur, LineAcc::new()).finish());
            line += 1;
            cur.code.push_str(part);
            cur.has_code = !part.trim().is_empty() || cur.has_code;
            col = 1 + part.chars().count();
        }
        if let Some(kind) = kind {
            out.tokens.push(Token {
                kind,
                text: lexeme,
                line: start_line,
                column: start_col,
            });
        }
    }
    if let Some((_, opened)) = block {
        out.warnings
            .push(format!("unterminated block comment opened at line {opened}; counted as comment to end of file"));
    }
    if i > 0 && chars[i - 1] != '\n' {
        out.lines.push(cur.finish());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<LineKind> {
        scan(text, &LanguageProfile::model_dsl()).lines.iter().map(|l| l.kind).collect()
    }

    #[test]
    fn line_kinds() {
        use LineKind::*;
        assert_eq!(kinds("# note\n\nvar x = 1  # trailing\n"), vec![Comment, Blank, Code]);
        assert_eq!(kinds(""), vec![]);
        assert_eq!(kinds("a\nb"), vec![Code, Code]);
        assert_eq!(kinds("  \t\n"), vec![Blank]);
    }

    #[test]
    fn comment_markers_inside_strings_are_code() {
        let s = scan("include \"a#b\";\n", &LanguageProfile::model_dsl());
        assert_eq!(s.lines[0].code, "include \"a#b\";");
        assert_eq!(s.tokens[1].kind, TokenKind::Literal);
    }

    #[test]
    fn block_comments() {
        use LineKind::*;
        let c = LanguageProfile::generic_c_like();
        let s = scan("int x; /* a\n b */\n/* c */ y = 1;\n/* open\n\nz", &c);
        let k: Vec<_> = s.lines.iter().map(|l| l.kind).collect();
        assert_eq!(k, vec![Code, Comment, Code, Comment, Blank, Comment]);
        assert_eq!(s.lines[2].code, "y = 1;");
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn tokens_and_positions() {
        let s = tokenize("a = b + 1.5e-3\n  when x", &LanguageProfile::model_dsl()).unwrap();
        let t: Vec<_> = s.tokens.iter().map(|t| (t.kind, t.text.as_str(), t.line, t.column)).collect();
        use TokenKind::*;
        assert_eq!(
            t,
            vec![
                (Identifier, "a", 1, 1),
                (Operator, "=", 1, 3),
                (Identifier, "b", 1, 5),
                (Operator, "+", 1, 7),
                (Literal, "1.5e-3", 1, 9),
                (Keyword, "when", 2, 3),
                (Identifier, "x", 2, 8),
            ]
        );
    }

    #[test]
    fn unknown_character_is_located() {
        let err = tokenize("a = 1\nb = $", &LanguageProfile::model_dsl()).unwrap_err();
        assert!(matches!(err, MetricsError::Token { line: 2, column: 5, found: '$' }), "{err}");
    }
}
