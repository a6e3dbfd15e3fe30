//! Halstead software-science measures.

use std::collections::HashSet;

use super::profile::LanguageProfile;
use super::scan::{tokenize, Token};
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HalsteadMetrics {
    /// Distinct operators.
    pub eta1: usize,
    /// Distinct operands.
    pub eta2: usize,
    pub n1: usize,
    pub n2: usize,
    pub length: usize,
    pub vocabulary: usize,
    pub volume: f64,
    pub difficulty: f64,
    pub effort: f64,
    pub bugs: f64,
}

/// Operators are the profile's operator and keyword tokens; operands are
/// identifiers and literals, distinct by exact text.
pub fn halstead(text: &str, profile: &LanguageProfile) -> Result<HalsteadMetrics, MetricsError> {
    Ok(from_tokens(&tokenize(text, profile)?.tokens))
}

pub fn from_tokens(tokens: &[Token]) -> HalsteadMetrics {
    let (mut ops, mut operands) = (HashSet::new(), HashSet::new());
    let (mut n1, mut n2) = (0, 0);
    for t in tokens {
        if t.is_operator() {
            n1 += 1;
            ops.insert(t.text.as_str());
        } else {
            n2 += 1;
            operands.insert(t.text.as_str());
        }
    }
    from_counts(ops.len(), operands.len(), n1, n2)
}

/// The six formulas. With no operators or no operands, difficulty and
/// effort are 0; the volume's vocabulary is floored at 1 so that an empty
/// or single-token text has volume 0.
pub fn from_counts(eta1: usize, eta2: usize, n1: usize, n2: usize) -> HalsteadMetrics {
    let length = n1 + n2;
    let vocabulary = eta1 + eta2;
    let volume = length as f64 * (vocabulary.max(1) as f64).log2();
    let difficulty = if eta1 == 0 || eta2 == 0 {
        0.0
    } else {
        (eta1 as f64 / 2.0) * (n2 as f64 / eta2 as f64)
    };
    HalsteadMetrics {
        eta1,
        eta2,
        n1,
        n2,
        length,
        vocabulary,
        volume,
        difficulty,
        effort: difficulty * volume,
        bugs: volume / 3000.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignment_example() {
        let h = halstead("a = b + b * 2", &LanguageProfile::model_dsl()).unwrap();
        assert_eq!((h.eta1, h.eta2, h.n1, h.n2, h.length, h.vocabulary), (3, 3, 3, 4, 7, 6));
        assert!((h.volume - 7.0 * 6f64.log2()).abs() < 1e-9);
        assert!((h.volume - 18.095).abs() < 1e-3);
        assert_eq!(h.difficulty, 2.0);
        assert!((h.effort - 36.19).abs() < 1e-2);
        assert!((h.bugs - 0.00603).abs() < 1e-5);
    }

    #[test]
    fn single_identifier() {
        let h = halstead("a", &LanguageProfile::model_dsl()).unwrap();
        assert_eq!((h.eta1, h.n1, h.volume, h.difficulty, h.effort), (0, 0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn literals_are_distinct_by_text() {
        let h = halstead("x = 2 + 2.0", &LanguageProfile::model_dsl()).unwrap();
        assert_eq!(h.eta2, 3);
    }

    #[test]
    fn comments_are_ignored() {
        let p = LanguageProfile::model_dsl();
        assert_eq!(halstead("a = b # c + d\n", &p).unwrap(), halstead("a = b", &p).unwrap());
    }
}
