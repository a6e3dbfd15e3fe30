//! Measurable units, cyclomatic complexity and the maintainability index.

use std::ops::Range;

use super::halstead::{self, HalsteadMetrics};
use super::profile::LanguageProfile;
use super::scan::{scan, tokenize, LineKind, Scan, Token, TokenKind};
use super::MetricsError;

/// Name given to the whole text when it contains no unit.
pub const WHOLE_FILE: &str = "<file>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub name: String,
    /// Token index range, header through closing delimiter.
    pub tokens: Range<usize>,
    pub first_line: usize,
    pub last_line: usize,
}

/// Splits a token stream into units. With start keywords, a unit is a
/// top-level `keyword [name] ... { ... }`; without, every top-level brace
/// block is one, named after the identifier before its first `(` or, failing
/// that, its last identifier.
pub fn find_units(tokens: &[Token], profile: &LanguageProfile) -> Vec<Unit> {
    let rule = &profile.units;
    let is = |t: &Token, s: &str| t.kind == TokenKind::Operator && t.text == s;
    let mut units = Vec::new();
    let mut header_start = 0;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let opens_unit = if rule.start.is_empty() {
            is(t, &rule.open)
        } else {
            t.kind == TokenKind::Keyword && rule.start.contains(&t.text)
        };
        if !opens_unit {
            if is(t, ";") || is(t, &rule.close) {
                header_start = i + 1;
            }
            i += 1;
            continue;
        }
        let start = if rule.start.is_empty() { header_start } else { i };
        let Some(open) = (i..tokens.len()).find(|&k| is(&tokens[k], &rule.open)) else {
            break;
        };
        let mut depth = 0usize;
        let mut end = tokens.len();
        for (k, tk) in tokens.iter().enumerate().skip(open) {
            if is(tk, &rule.open) {
                depth += 1;
            } else if is(tk, &rule.close) {
                depth -= 1;
                if depth == 0 {
                    end = k + 1;
                    break;
                }
            }
        }
        let header = &tokens[start..open];
        let name = if rule.start.is_empty() {
            let paren = header.iter().position(|t| is(t, "("));
            let before = &header[..paren.unwrap_or(header.len())];
            before
                .iter()
                .rev()
                .find(|t| t.kind == TokenKind::Identifier)
                .map(|t| t.text.clone())
                .unwrap_or_else(|| format!("block{}", units.len() + 1))
        } else {
            match header.get(1) {
                Some(t) if t.kind == TokenKind::Identifier => t.text.clone(),
                _ => header[0].text.clone(),
            }
        };
        units.push(Unit {
            name,
            tokens: start..end,
            first_line: tokens[start].line,
            last_line: tokens[end - 1].line,
        });
        i = end;
        header_start = end;
    }
    units
}

fn decisions(tokens: &[Token], profile: &LanguageProfile) -> usize {
    tokens
        .iter()
        .filter(|t| t.kind != TokenKind::Identifier && t.kind != TokenKind::Literal && profile.is_decision(&t.text))
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cyclomatic {
    pub units: Vec<(String, usize)>,
    pub average: f64,
}

/// `CC = 1 + decision tokens` per unit. A text without units is measured
/// as a single unit.
pub fn cyclomatic(text: &str, profile: &LanguageProfile) -> Cyclomatic {
    let s = scan(text, profile);
    let units: Vec<(String, usize)> = unit_spans(&s, profile)
        .into_iter()
        .map(|u| (u.name, 1 + decisions(&s.tokens[u.tokens], profile)))
        .collect();
    let average = units.iter().map(|u| u.1 as f64).sum::<f64>() / units.len() as f64;
    Cyclomatic { units, average }
}

fn unit_spans(s: &Scan, profile: &LanguageProfile) -> Vec<Unit> {
    let units = find_units(&s.tokens, profile);
    if !units.is_empty() {
        return units;
    }
    vec![Unit {
        name: WHOLE_FILE.into(),
        tokens: 0..s.tokens.len(),
        first_line: 1,
        last_line: s.lines.len(),
    }]
}

/// `171 - 5.2 ln V - 0.23 CC - 16.2 ln LOC` and its normalization
/// `max(0, 100 MI / 171)`. V and LOC below 1 are taken as 1.
pub fn maintainability_index(volume: f64, cc: f64, loc: usize) -> (f64, f64) {
    let raw = 171.0 - 5.2 * volume.max(1.0).ln() - 0.23 * cc - 16.2 * (loc.max(1) as f64).ln();
    (raw, (100.0 * raw / 171.0).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitMetrics {
    pub name: String,
    pub loc: usize,
    pub cc: usize,
    pub halstead: HalsteadMetrics,
    pub mi_raw: f64,
    pub mi_normalized: f64,
}

/// Every metric for every unit of `text`.
pub fn measure_units(text: &str, profile: &LanguageProfile) -> Result<Vec<UnitMetrics>, MetricsError> {
    let s = tokenize(text, profile)?;
    Ok(unit_spans(&s, profile)
        .into_iter()
        .map(|u| {
            let toks = &s.tokens[u.tokens.clone()];
            let loc = s
                .lines
                .iter()
                .enumerate()
                .filter(|(k, l)| l.kind == LineKind::Code && (u.first_line..=u.last_line).contains(&(k + 1)))
                .count();
            let cc = 1 + decisions(toks, profile);
            let h = halstead::from_tokens(toks);
            let (mi_raw, mi_normalized) = maintainability_index(h.volume, cc as f64, loc);
            UnitMetrics {
                name: u.name,
                loc,
                cc,
                halstead: h,
                mi_raw,
                mi_normalized,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_decisions_is_one() {
        let c = cyclomatic("component A() { var x: real = 1; }", &LanguageProfile::model_dsl());
        assert_eq!(c.units, vec![("A".to_string(), 1)]);
        assert_eq!(cyclomatic("x", &LanguageProfile::model_dsl()).units[0], (WHOLE_FILE.into(), 1));
    }

    #[test]
    fn connectives_add_paths() {
        let p = LanguageProfile::model_dsl();
        let c = cyclomatic("component A() { automaton M { trans X -> Y law inst when A or B and C; } }", &p);
        assert_eq!(c.units[0].1, 4);
    }

    #[test]
    fn shipped_heater_is_five() {
        let text = crate::cases::SOURCES
            .iter()
            .find(|(p, _)| p.ends_with("components/heater.model"))
            .unwrap()
            .1;
        let c = cyclomatic(text, &LanguageProfile::model_dsl());
        assert_eq!(c.units, vec![("Heater".to_string(), 5)]);
    }

    #[test]
    fn c_like_units() {
        let p = LanguageProfile::generic_c_like();
        let src = "int f(int a) { if (a && b) { return 1; } return 0; }\nstruct S { int x; };\nint g() { while (1) {} }";
        let c = cyclomatic(src, &p);
        assert_eq!(c.units, vec![("f".into(), 3), ("S".into(), 1), ("g".into(), 2)]);
        assert!((c.average - 2.0).abs() < 1e-12);
    }

    #[test]
    fn mi_formula() {
        let (raw, _) = maintainability_index(100.0, 5.0, 50);
        assert!((raw - 82.528).abs() < 1e-3, "{raw}");
        assert_eq!(maintainability_index(1.0, 0.0, 1), (171.0, 100.0));
        assert_eq!(maintainability_index(1e30, 1e3, 1 << 40).1, 0.0);
    }

    #[test]
    fn unit_metrics() {
        let p = LanguageProfile::model_dsl();
        let u = measure_units("include \"x\";\n\ncomponent A() {\n  # c\n  var x: real = 1;\n}\n", &p).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!((u[0].name.as_str(), u[0].loc, u[0].cc), ("A", 3, 1));
    }
}
