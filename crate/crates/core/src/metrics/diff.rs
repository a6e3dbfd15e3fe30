//! Line diff (Myers shortest edit script) and the RLOC ratio.

use super::lines::code_lines;
use super::profile::LanguageProfile;
use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Equal,
    Delete,
    Insert,
}

/// Shortest edit script turning `a` into `b`, in order.
pub fn myers<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Edit> {
    let (n, m) = (a.len() as isize, b.len() as isize);
    let max = (n + m) as usize;
    let off = max as isize + 1;
    let mut v = vec![0isize; 2 * max + 3];
    let mut trace: Vec<Vec<isize>> = Vec::new();

    'search: for d in 0..=max as isize {
        trace.push(v.clone());
        let mut k = -d;
        while k <= d {
            let down = k == -d || (k != d && v[(off + k - 1) as usize] < v[(off + k + 1) as usize]);
            let mut x = if down { v[(off + k + 1) as usize] } else { v[(off + k - 1) as usize] + 1 };
            let mut y = x - k;
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            v[(off + k) as usize] = x;
            if x >= n && y >= m {
                break 'search;
            }
            k += 2;
        }
    }

    // trace[d] holds V as it was before round d.
    let mut edits = Vec::with_capacity(max);
    let (mut x, mut y) = (n, m);
    for d in (0..trace.len() as isize).rev() {
        let v = &trace[d as usize];
        let k = x - y;
        let down = k == -d || (k != d && v[(off + k - 1) as usize] < v[(off + k + 1) as usize]);
        let pk = if down { k + 1 } else { k - 1 };
        let px = v[(off + pk) as usize];
        let py = px - pk;
        while x > px && y > py {
            edits.push(Edit::Equal);
            x -= 1;
            y -= 1;
        }
        if d > 0 {
            edits.push(if down { Edit::Insert } else { Edit::Delete });
        }
        x = px;
        y = py;
    }
    edits.reverse();
    edits
}

/// Line accounting between two versions. Identities:
/// `same + modified + removed` = old lines and
/// `same + modified + added` = new lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DiffCounts {
    pub same: usize,
    pub modified: usize,
    pub added: usize,
    pub removed: usize,
}

impl DiffCounts {
    pub fn changed(&self) -> usize {
        self.modified + self.added + self.removed
    }
}

/// Counts an edit script. Within each run of non-equal edits, deletions and
/// insertions pair up in order as modifications; the surplus is removed or
/// added.
pub fn count_edits(edits: &[Edit]) -> DiffCounts {
    let mut c = DiffCounts::default();
    let (mut del, mut ins) = (0, 0);
    let flush = |c: &mut DiffCounts, del: &mut usize, ins: &mut usize| {
        let pairs = (*del).min(*ins);
        c.modified += pairs;
        c.removed += *del - pairs;
        c.added += *ins - pairs;
        *del = 0;
        *ins = 0;
    };
    for e in edits {
        match e {
            Edit::Equal => {
                flush(&mut c, &mut del, &mut ins);
                c.same += 1;
            }
            Edit::Delete => del += 1,
            Edit::Insert => ins += 1,
        }
    }
    flush(&mut c, &mut del, &mut ins);
    c
}

pub fn diff_lines<T: PartialEq>(old: &[T], new: &[T]) -> DiffCounts {
    count_edits(&myers(old, new))
}

/// Diff over code lines only; comments and blank lines never count, and
/// lines compare by their code text with surrounding whitespace trimmed.
pub fn diff_versions(old: &str, new: &str, profile: &LanguageProfile) -> DiffCounts {
    diff_lines(&code_lines(old, profile), &code_lines(new, profile))
}

/// Relative modification as a percentage of the target's LOC.
pub fn rloc(diff: &DiffCounts, loc_target: usize) -> Result<f64, MetricsError> {
    if loc_target == 0 {
        return Err(MetricsError::UndefinedRatio);
    }
    Ok(100.0 * diff.changed() as f64 / loc_target as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lines(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn replace_hunks_pair_up() {
        let c = diff_lines(&lines("a b c"), &lines("a x c d"));
        assert_eq!(c, DiffCounts { same: 2, modified: 1, added: 1, removed: 0 });
    }

    #[test]
    fn trivial_cases() {
        let a = lines("a b c");
        assert_eq!(diff_lines(&a, &a), DiffCounts { same: 3, ..Default::default() });
        assert_eq!(diff_lines(&[], &a), DiffCounts { added: 3, ..Default::default() });
        assert_eq!(diff_lines(&a, &[]), DiffCounts { removed: 3, ..Default::default() });
        assert_eq!(diff_lines::<&str>(&[], &[]), DiffCounts::default());
    }

    #[test]
    fn script_is_shortest() {
        let e = myers(&lines("a b c a b b a"), &lines("c b a b a c"));
        assert_eq!(e.iter().filter(|e| **e != Edit::Equal).count(), 5);
    }

    #[test]
    fn rloc_formula() {
        let d = DiffCounts { same: 0, modified: 2, added: 3, removed: 1 };
        assert!((rloc(&d, 20).unwrap() - 30.0).abs() < 1e-12);
        assert!(matches!(rloc(&d, 0), Err(MetricsError::UndefinedRatio)));
    }

    #[test]
    fn comments_do_not_count() {
        let p = LanguageProfile::model_dsl();
        let c = diff_versions("var x = 1;\n", "# new\nvar x = 1; # why\n\n", &p);
        assert_eq!(c, DiffCounts { same: 1, ..Default::default() });
    }
}
