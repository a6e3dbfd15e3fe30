//! Language profiles: everything the metrics need to know about a syntax.
//!
//! A profile file has top-level `key = value` lines followed by the sections
//! `[comments]`, `[operators]`, `[keywords]`, `[decision]` and `[units]`.
//! Token-list sections are whitespace separated and may span lines; lines
//! starting with `#` are comments.

use std::path::{Path, PathBuf};

use super::MetricsError;

pub const MODEL_DSL: &str = include_str!("../../profiles/model-dsl.profile");
pub const GENERIC_C_LIKE: &str = include_str!("../../profiles/generic-c-like.profile");

/// Environment variable holding extra profile directories (`:`-separated).
pub const PROFILE_PATH_VAR: &str = "HYBRIDSIM_PROFILE_PATH";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageProfile {
    pub name: String,
    pub line_comments: Vec<String>,
    pub block_comments: Vec<(String, String)>,
    pub string_delimiters: Vec<char>,
    /// Sorted longest first for maximal munch.
    pub operators: Vec<String>,
    pub keywords: Vec<String>,
    pub decision: Vec<String>,
    pub units: UnitRule,
}

/// How a file splits into measurable units.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitRule {
    /// Keywords opening a unit at top level. When empty, every top-level
    /// brace block is a unit.
    pub start: Vec<String>,
    pub open: String,
    pub close: String,
}

impl LanguageProfile {
    pub fn model_dsl() -> Self {
        Self::parse(MODEL_DSL).expect("shipped profile")
    }

    pub fn generic_c_like() -> Self {
        Self::parse(GENERIC_C_LIKE).expect("shipped profile")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "model-dsl" => Some(Self::model_dsl()),
            "generic-c-like" => Some(Self::generic_c_like()),
            _ => None,
        }
    }

    pub fn is_keyword(&self, s: &str) -> bool {
        self.keywords.iter().any(|k| k == s)
    }

    pub fn is_decision(&self, s: &str) -> bool {
        self.decision.iter().any(|k| k == s)
    }

    pub fn parse(text: &str) -> Result<Self, MetricsError> {
        let bad = |line: usize, message: String| MetricsError::Profile { line, message };
        let mut name = None;
        let mut strings = Vec::new();
        let (mut line_comments, mut block_comments) = (Vec::new(), Vec::new());
        let (mut operators, mut keywords, mut decision) = (Vec::new(), Vec::new(), Vec::new());
        let (mut start, mut open, mut close) = (Vec::new(), None, None);
        let mut section = String::new();

        for (n, raw) in text.lines().enumerate() {
            let n = n + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(s) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = s.trim().to_string();
                if !matches!(section.as_str(), "comments" | "operators" | "keywords" | "decision" | "units") {
                    return Err(bad(n, format!("unknown section [{section}]")));
                }
                continue;
            }
            let words = || line.split_whitespace().map(str::to_string);
            match section.as_str() {
                "operators" => operators.extend(words()),
                "keywords" => keywords.extend(words()),
                "decision" => decision.extend(words()),
                _ => {
                    let (key, value) = line
                        .split_once('=')
                        .ok_or_else(|| bad(n, format!("expected `key = value`, found `{line}`")))?;
                    let values: Vec<String> = value.split_whitespace().map(str::to_string).collect();
                    match (section.as_str(), key.trim()) {
                        ("", "name") => name = Some(value.trim().to_string()),
                        ("", "strings") => {
                            for v in &values {
                                let mut cs = v.chars();
                                match (cs.next(), cs.next()) {
                                    (Some(c), None) => strings.push(c),
                                    _ => return Err(bad(n, format!("string delimiter `{v}` is not one character"))),
                                }
                            }
                        }
                        ("comments", "line") => line_comments.extend(values),
                        ("comments", "block") => {
                            if !values.len().is_multiple_of(2) {
                                return Err(bad(n, "block comments need open/close pairs".into()));
                            }
                            block_comments.extend(values.chunks(2).map(|p| (p[0].clone(), p[1].clone())));
                        }
                        ("units", "start") => start.extend(values),
                        ("units", "open") => open = values.into_iter().next(),
                        ("units", "close") => close = values.into_iter().next(),
                        (s, k) => return Err(bad(n, format!("unknown key `{k}` in [{s}]"))),
                    }
                }
            }
        }

        let name = name.ok_or_else(|| bad(0, "missing `name`".into()))?;
        if operators.is_empty() {
            return Err(bad(0, "operator list is empty".into()));
        }
        if let Some(d) = decision.iter().find(|d| !operators.contains(d) && !keywords.contains(d)) {
            return Err(bad(0, format!("decision token `{d}` is neither an operator nor a keyword")));
        }
        operators.sort_by(|a: &String, b: &String| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        operators.dedup();
        Ok(LanguageProfile {
            name,
            line_comments,
            block_comments,
            string_delimiters: strings,
            operators,
            keywords,
            decision,
            units: UnitRule {
                start,
                open: open.unwrap_or_else(|| "{".into()),
                close: close.unwrap_or_else(|| "}".into()),
            },
        })
    }
}

/// Directories listed in `HYBRIDSIM_PROFILE_PATH`.
pub fn search_path() -> Vec<PathBuf> {
    std::env::var_os(PROFILE_PATH_VAR)
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

/// Resolves a profile by file path, by `<name>.profile` in `dirs`, or by
/// built-in name, in that order.
pub fn resolve_profile(spec: &str, dirs: &[PathBuf]) -> Result<LanguageProfile, MetricsError> {
    let read = |p: &Path| {
        let text = std::fs::read_to_string(p).map_err(|e| MetricsError::Io {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?;
        LanguageProfile::parse(&text)
    };
    let direct = Path::new(spec);
    if direct.is_file() {
        return read(direct);
    }
    for d in dirs {
        let p = d.join(format!("{spec}.profile"));
        if p.is_file() {
            return read(&p);
        }
    }
    LanguageProfile::builtin(spec).ok_or_else(|| MetricsError::UnknownProfile(spec.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_profiles_parse() {
        let m = LanguageProfile::model_dsl();
        assert_eq!(m.line_comments, vec!["#"]);
        assert_eq!(m.operators[0], "<->");
        assert_eq!(m.units.start, vec!["component", "mediator", "system"]);
        let c = LanguageProfile::generic_c_like();
        assert_eq!(c.block_comments, vec![("/*".to_string(), "*/".to_string())]);
        assert!(c.units.start.is_empty());
    }

    #[test]
    fn decision_tokens_must_be_known() {
        let err = LanguageProfile::parse("name = x\n[operators]\n+\n[decision]\nwhen\n").unwrap_err();
        assert!(err.to_string().contains("when"), "{err}");
    }

    #[test]
    fn operators_are_required() {
        assert!(LanguageProfile::parse("name = x\n[keywords]\nif\n").is_err());
    }

    #[test]
    fn unknown_profile() {
        assert!(matches!(resolve_profile("cobol", &[]), Err(MetricsError::UnknownProfile(_))));
        assert_eq!(resolve_profile("model-dsl", &[]).unwrap().name, "model-dsl");
    }
}
