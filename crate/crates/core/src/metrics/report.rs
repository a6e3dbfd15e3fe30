//! Whole-file measurement and the six-case comparison tables.

use std::io::{self, Write};
use std::path::Path;

use super::complexity::{maintainability_index, measure_units, UnitMetrics};
use super::diff::{diff_lines, rloc, DiffCounts};
use super::halstead::{self, HalsteadMetrics};
use super::lines::{classify, code_lines, LineCounts};
use super::profile::LanguageProfile;
use super::scan::tokenize;
use super::MetricsError;
use crate::cases::CaseId;
use crate::dsl::{file_set, FsLoader};

/// Every metric for one text.
#[derive(Debug, Clone, PartialEq)]
pub struct FileMetrics {
    pub lines: LineCounts,
    pub halstead: HalsteadMetrics,
    pub units: Vec<UnitMetrics>,
    /// Sum of unit complexities.
    pub cc: usize,
    /// MI from the whole text's volume, summed CC and code lines.
    pub mi_raw: f64,
    pub mi_normalized: f64,
    pub warnings: Vec<String>,
}

pub fn measure(text: &str, profile: &LanguageProfile) -> Result<FileMetrics, MetricsError> {
    let classified = classify(text, profile);
    let h = halstead::from_tokens(&tokenize(text, profile)?.tokens);
    let units = measure_units(text, profile)?;
    let cc = units.iter().map(|u| u.cc).sum();
    let (mi_raw, mi_normalized) = maintainability_index(h.volume, cc as f64, classified.counts.code);
    Ok(FileMetrics {
        lines: classified.counts,
        halstead: h,
        units,
        cc,
        mi_raw,
        mi_normalized,
        warnings: classified.warnings,
    })
}

/// The files making up one case, included files first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSources {
    pub name: String,
    pub files: Vec<(String, String)>,
}

impl CaseSources {
    /// All files joined in order.
    pub fn concatenated(&self) -> String {
        let mut out = String::new();
        for (_, text) in &self.files {
            out.push_str(text);
            if !text.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }
}

/// Loads the six shipped cases from `dir` (the directory holding
/// `case0.model` etc. and their includes).
pub fn load_case_sets(dir: &Path) -> Result<Vec<CaseSources>, MetricsError> {
    let loader = FsLoader;
    CaseId::ALL
        .iter()
        .map(|case| {
            let path = dir.join(format!("{}.model", case.name()));
            if !path.is_file() {
                return Err(MetricsError::Report(format!("missing case file {}", path.display())));
            }
            let files = file_set(&loader, &path).map_err(|e| MetricsError::Report(e.to_string()))?;
            Ok(CaseSources {
                name: case.name().to_string(),
                files: files
                    .into_iter()
                    .map(|f| {
                        let rel = f.path.strip_prefix(dir).unwrap_or(&f.path);
                        (rel.to_string_lossy().replace('\\', "/"), f.text)
                    })
                    .collect(),
            })
        })
        .collect()
}

/// Case pairs compared by RLOC: scalability then redundancy, per design.
pub const RLOC_PAIRS: [(&str, &str); 4] = [
    ("case0", "case1"),
    ("case1", "case2"),
    ("case0a", "case1a"),
    ("case1a", "case2a"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRow {
    pub case: String,
    pub lines: LineCounts,
    pub halstead: HalsteadMetrics,
    pub cc_total: usize,
    pub cc_average: f64,
    /// Average over units.
    pub mi_raw: f64,
    pub mi_normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub from: String,
    pub to: String,
    pub diff: DiffCounts,
    pub loc_target: usize,
    /// Percentage.
    pub rloc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `(case, file, counts)`.
    pub files: Vec<(String, String, LineCounts)>,
    /// `(case, file, unit metrics)`.
    pub units: Vec<(String, String, UnitMetrics)>,
    pub cases: Vec<CaseRow>,
    pub pairs: Vec<PairRow>,
}

impl MetricsReport {
    pub fn case(&self, name: &str) -> Option<&CaseRow> {
        self.cases.iter().find(|c| c.case == name)
    }

    pub fn pair(&self, from: &str, to: &str) -> Option<&PairRow> {
        self.pairs.iter().find(|p| p.from == from && p.to == to)
    }
}

/// Measures each case and compares the [`RLOC_PAIRS`] that are present.
/// A case's files are measured individually for LOC and units, and as one
/// concatenated text for Halstead and the diff.
pub fn report_experiment(cases: &[CaseSources], profile: &LanguageProfile) -> Result<MetricsReport, MetricsError> {
    let mut report = MetricsReport {
        files: Vec::new(),
        units: Vec::new(),
        cases: Vec::new(),
        pairs: Vec::new(),
    };
    for case in cases {
        let mut total = LineCounts::default();
        let mut unit_rows = Vec::new();
        for (file, text) in &case.files {
            let counts = classify(text, profile).counts;
            total = total.add(counts);
            report.files.push((case.name.clone(), file.clone(), counts));
            for u in measure_units(text, profile)? {
                unit_rows.push((case.name.clone(), file.clone(), u));
            }
        }
        let h = halstead::from_tokens(&tokenize(&case.concatenated(), profile)?.tokens);
        let n = unit_rows.len().max(1) as f64;
        let cc_total: usize = unit_rows.iter().map(|u| u.2.cc).sum();
        report.cases.push(CaseRow {
            case: case.name.clone(),
            lines: total,
            halstead: h,
            cc_total,
            cc_average: cc_total as f64 / n,
            mi_raw: unit_rows.iter().map(|u| u.2.mi_raw).sum::<f64>() / n,
            mi_normalized: unit_rows.iter().map(|u| u.2.mi_normalized).sum::<f64>() / n,
        });
        report.units.extend(unit_rows);
    }
    for (from, to) in RLOC_PAIRS {
        let (Some(a), Some(b)) = (
            cases.iter().find(|c| c.name == from),
            cases.iter().find(|c| c.name == to),
        ) else {
            continue;
        };
        let new = code_lines(&b.concatenated(), profile);
        let diff = diff_lines(&code_lines(&a.concatenated(), profile), &new);
        report.pairs.push(PairRow {
            from: from.into(),
            to: to.into(),
            diff,
            loc_target: new.len(),
            rloc: rloc(&diff, new.len())?,
        });
    }
    Ok(report)
}

/// The report's CSV tables as `(file name, contents)`.
pub fn report_tables(report: &MetricsReport) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    let mut table = |name, header: &str, rows: Vec<String>| {
        let mut s = format!("{header}\n");
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        out.push((name, s));
    };

    table(
        "loc_by_file.csv",
        "case,file,code,comment,blank",
        report
            .files
            .iter()
            .map(|(c, f, l)| format!("{c},{f},{},{},{}", l.code, l.comment, l.blank))
            .collect(),
    );
    table(
        "loc_total.csv",
        "case,code,comment,blank",
        report
            .cases
            .iter()
            .map(|c| format!("{},{},{},{}", c.case, c.lines.code, c.lines.comment, c.lines.blank))
            .collect(),
    );
    table(
        "rloc.csv",
        "from,to,same,modified,added,removed,loc_target,rloc_percent",
        report
            .pairs
            .iter()
            .map(|p| {
                let d = p.diff;
                format!(
                    "{},{},{},{},{},{},{},{:.2}",
                    p.from, p.to, d.same, d.modified, d.added, d.removed, p.loc_target, p.rloc
                )
            })
            .collect(),
    );
    table(
        "cc.csv",
        "case,unit,cc",
        report
            .cases
            .iter()
            .flat_map(|c| {
                let units = report.units.iter().filter(|u| u.0 == c.case);
                units
                    .map(|u| format!("{},{},{}", c.case, u.2.name, u.2.cc))
                    .chain([
                        format!("{},(total),{}", c.case, c.cc_total),
                        format!("{},(average),{:.4}", c.case, c.cc_average),
                    ])
                    .collect::<Vec<_>>()
            })
            .collect(),
    );
    table(
        "halstead.csv",
        "case,eta1,eta2,n1,n2,length,vocabulary,volume,difficulty,effort,bugs",
        report
            .cases
            .iter()
            .map(|c| {
                let h = &c.halstead;
                format!(
                    "{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                    c.case, h.eta1, h.eta2, h.n1, h.n2, h.length, h.vocabulary, h.volume, h.difficulty, h.effort, h.bugs
                )
            })
            .collect(),
    );
    table(
        "mi.csv",
        "case,unit,mi_raw,mi_normalized",
        report
            .cases
            .iter()
            .flat_map(|c| {
                let units = report.units.iter().filter(|u| u.0 == c.case);
                units
                    .map(|u| format!("{},{},{:.4},{:.2}", c.case, u.2.name, u.2.mi_raw, u.2.mi_normalized))
                    .chain([format!("{},(average),{:.4},{:.2}", c.case, c.mi_raw, c.mi_normalized)])
                    .collect::<Vec<_>>()
            })
            .collect(),
    );
    out
}

pub const FILE_METRICS_HEADER: &str =
    "file,code,comment,blank,eta1,eta2,n1,n2,volume,difficulty,effort,bugs,cc,mi_raw,mi_normalized";

pub fn write_file_metrics<W: Write>(w: &mut W, file: &str, m: &FileMetrics) -> io::Result<()> {
    let (l, h) = (&m.lines, &m.halstead);
    writeln!(
        w,
        "{file},{},{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{},{:.4},{:.2}",
        l.code, l.comment, l.blank, h.eta1, h.eta2, h.n1, h.n2, h.volume, h.difficulty, h.effort, h.bugs, m.cc, m.mi_raw, m.mi_normalized
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cases;

    fn shipped() -> Vec<CaseSources> {
        CaseId::ALL
            .iter()
            .map(|&c| CaseSources {
                name: c.name().into(),
                files: cases::file_set(c)
                    .unwrap()
                    .into_iter()
                    .map(|f| (f.path.to_string_lossy().into_owned(), f.text))
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn shipped_corpus_ordering() {
        let r = report_experiment(&shipped(), &LanguageProfile::model_dsl()).unwrap();
        let p = |a, b| r.pair(a, b).unwrap().rloc;
        assert!(p("case0a", "case1a") < p("case0", "case1"), "{r:#?}");
        assert!(p("case1a", "case2a") < p("case1", "case2"), "{r:#?}");
        assert!(r.case("case0a").unwrap().lines.code > r.case("case0").unwrap().lines.code);
        assert_eq!(report_tables(&r).len(), 6);
    }

    #[test]
    fn single_case_has_no_pairs() {
        let one = &shipped()[..1];
        let r = report_experiment(one, &LanguageProfile::model_dsl()).unwrap();
        assert!(r.pairs.is_empty());
        assert_eq!(r.cases.len(), 1);
    }

    #[test]
    fn missing_case_file() {
        let err = load_case_sets(Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(err, MetricsError::Report(_)));
    }

    #[test]
    fn rloc_of_append() {
        let p = LanguageProfile::model_dsl();
        let a = CaseSources { name: "case0".into(), files: vec![("a".into(), "x;\ny;\n".into())] };
        let b = CaseSources { name: "case1".into(), files: vec![("a".into(), "x;\ny;\nz;\n".into())] };
        let r = report_experiment(&[a, b], &p).unwrap();
        assert!((r.pairs[0].rloc - 100.0 / 3.0).abs() < 1e-9);
    }
}
