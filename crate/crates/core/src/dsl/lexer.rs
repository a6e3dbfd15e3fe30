use super::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Punct(&'static str),
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(x) => write!(f, "`{x}`"),
            Tok::Str(s) => write!(f, "\"{s}\""),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

// Longest first.
const PUNCT: &[&str] = &[
    "<->", "->", "<=", ">=", "==", "!=", "{", "}", "(", ")", "[", "]", ",", ";", ":", ".", "=",
    "<", ">", "+", "-", "*", "/",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let x = s.parse::<f64>().map_err(|_| ParseError::at(pos, format!("bad number `{s}`")))?;
            out.push(Token {
                tok: Tok::Number(x),
                pos,
            });
            continue;
        }
        if c == '"' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                bump!();
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(ParseError::at(pos, "unterminated string"));
            }
            let s: String = chars[start..i].iter().collect();
            bump!();
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                out.push(Token {
                    tok: Tok::Punct(p),
                    pos,
                });
            }
            None => return Err(ParseError::at(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, column: col },
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_arrows_and_comments() {
        let toks = tokenize("connect a.x <-> b.y; # trailing\ntrans A -> B").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert!(kinds.contains(&Tok::Punct("<->")));
        assert!(kinds.contains(&Tok::Punct("->")));
        assert_eq!(toks.iter().find(|t| t.tok == Tok::Ident("trans".into())).unwrap().pos.line, 2);
    }

    #[test]
    fn numbers() {
        let toks = tokenize("0.01 22 1e-9 2.5E3").unwrap();
        let xs: Vec<f64> = toks
            .iter()
            .filter_map(|t| match t.tok {
                Tok::Number(x) => Some(x),
                _ => None,
            })
            .collect();
        assert_eq!(xs, vec![0.01, 22.0, 1e-9, 2500.0]);
    }

    #[test]
    fn rejects_stray_characters() {
        let err = tokenize("var x = 1 $").unwrap_err();
        assert_eq!((err.line, err.column), (1, 11));
    }
}
