use std::fs;
use std::path::Path;

use super::text::tokens;
use crate::error::{CgstaeError, Result};
use crate::training::{PriorEntry, PriorGraph};

/// Parses an n×n grid of `1`, `0` and `NA` tokens. Row `i`, column `j`
/// describes the edge i → j. `#` starts a comment.
pub fn parse_prior(text: &str) -> Result<PriorGraph> {
    let mut entries = Vec::new();
    let mut n = None;
    let mut rows = 0;
    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let mut count = 0;
        for (col, tok) in tokens(line) {
            let e = match tok {
                "1" => PriorEntry::Edge,
                "0" => PriorEntry::NoEdge,
                "NA" | "na" => PriorEntry::Unknown,
                other => {
                    return Err(CgstaeError::Parse {
                        line: li + 1,
                        col,
                        msg: format!("prior token must be 0, 1 or NA, got {other:?}"),
                    })
                }
            };
            entries.push(e);
            count += 1;
        }
        if count == 0 {
            continue;
        }
        match n {
            None => n = Some(count),
            Some(k) if k != count => {
                return Err(CgstaeError::Layout(format!(
                    "prior line {} has {count} entries, expected {k}",
                    li + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let n = n.ok_or_else(|| CgstaeError::Layout("empty prior file".into()))?;
    if rows != n {
        return Err(CgstaeError::Layout(format!("prior has {rows} rows and {n} columns")));
    }
    PriorGraph::from_entries(n, entries)
}

pub fn format_prior(p: &PriorGraph) -> String {
    let mut s = String::new();
    for i in 0..p.n() {
        let row: Vec<&str> = (0..p.n())
            .map(|j| match p.entry(i, j) {
                PriorEntry::Edge => "1",
                PriorEntry::NoEdge => "0",
                PriorEntry::Unknown => "NA",
            })
            .collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn load_prior(path: &Path) -> Result<PriorGraph> {
    parse_prior(&fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?)
}

pub fn save_prior(path: &Path, p: &PriorGraph) -> Result<()> {
    fs::write(path, format_prior(p)).map_err(|e| CgstaeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    #[test]
    fn all_na_gives_empty_mask() {
        let p = parse_prior("NA NA\nNA NA\n").unwrap();
        assert_eq!(p.mask(), Matrix::zeros(2, 2));
    }

    #[test]
    fn control_loop_fixture() {
        // LI701(0) -> MV701(1) -> FT9(2) -> LI701, MV705(3) -> FI701(4)
        let text = "\
NA 1 NA NA NA
NA NA 1 NA NA
1 NA NA NA NA
NA NA NA NA 1
NA NA NA NA NA
";
        let p = parse_prior(text).unwrap();
        for (i, j) in [(0, 1), (1, 2), (2, 0), (3, 4)] {
            assert_eq!(p.entry(i, j), PriorEntry::Edge);
        }
        assert_eq!(p.known_count(), 4);
    }

    #[test]
    fn round_trip() {
        let truth = Matrix::from_fn(6, 6, |i, j| if (i + 2 * j) % 5 == 1 { 1.0 } else { 0.0 });
        let p = PriorGraph::reveal_from_truth(&truth, 0.4, 3).unwrap();
        assert_eq!(parse_prior(&format_prior(&p)).unwrap(), p);
    }

    #[test]
    fn malformed_token() {
        match parse_prior("1 0\n0 yes\n") {
            Err(CgstaeError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_prior("1 0\n0\n"), Err(CgstaeError::Layout(_))));
        assert!(matches!(parse_prior("1 0\n"), Err(CgstaeError::Layout(_))));
    }
}
