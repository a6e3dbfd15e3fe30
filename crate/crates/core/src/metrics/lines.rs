//! Physical line classification (LOC).

use super::profile::LanguageProfile;
use super::scan::{scan, LineKind};

/// `code + comment + blank` is the physical line count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LineCounts {
    pub code: usize,
    pub comment: usize,
    pub blank: usize,
}

impl LineCounts {
    pub fn physical(&self) -> usize {
        self.code + self.comment + self.blank
    }

    pub fn add(self, other: LineCounts) -> LineCounts {
        LineCounts {
            code: self.code + other.code,
            comment: self.comment + other.comment,
            blank: self.blank + other.blank,
        }
    }
}

/// Counts plus any warnings (an unterminated block comment runs to end of
/// file).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classified {
    pub counts: LineCounts,
    pub kinds: Vec<LineKind>,
    pub warnings: Vec<String>,
}

/// A line holding code and a trailing comment is code; a line holding only
/// comment text (or the inside of a block comment) is comment.
pub fn classify_lines(text: &str, profile: &LanguageProfile) -> LineCounts {
    classify(text, profile).counts
}

pub fn classify(text: &str, profile: &LanguageProfile) -> Classified {
    let s = scan(text, profile);
    let mut counts = LineCounts::default();
    for l in &s.lines {
        match l.kind {
            LineKind::Code => counts.code += 1,
            LineKind::Comment => counts.comment += 1,
            LineKind::Blank => counts.blank += 1,
        }
    }
    Classified {
        counts,
        kinds: s.lines.iter().map(|l| l.kind).collect(),
        warnings: s.warnings,
    }
}

/// Code lines with comments stripped and whitespace trimmed.
pub fn code_lines(text: &str, profile: &LanguageProfile) -> Vec<String> {
    scan(text, profile)
        .lines
        .into_iter()
        .filter(|l| l.kind == LineKind::Code)
        .map(|l| l.code)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let p = LanguageProfile::model_dsl();
        assert_eq!(
            classify_lines("# note\n\nvar x = 1  # trailing", &p),
            LineCounts { code: 1, comment: 1, blank: 1 }
        );
        assert_eq!(classify_lines("", &p), LineCounts::default());
        let ten = "x;\n".repeat(10);
        assert_eq!(classify_lines(&ten, &p), LineCounts { code: 10, comment: 0, blank: 0 });
        assert_eq!(code_lines("  a  # c\n# d\nb", &p), vec!["a", "b"]);
    }

    #[test]
    fn unterminated_block_comment_warns() {
        let c = classify("x;\n/* a\nb\n", &LanguageProfile::generic_c_like());
        assert_eq!(c.counts, LineCounts { code: 1, comment: 2, blank: 0 });
        assert_eq!(c.warnings.len(), 1);
    }
}
