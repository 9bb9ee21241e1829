use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{CgstaeError, Result};
use crate::numerics::Matrix;

/// Parses whitespace-separated numeric rows. Blank lines are skipped.
/// Line and column numbers in errors are 1-based.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (li, line) in text.lines().enumerate() {
        let mut row = Vec::new();
        for (col, tok) in tokens(line) {
            let v: f64 = tok.parse().map_err(|_| CgstaeError::Parse {
                line: li + 1,
                col,
                msg: format!("non-numeric token {tok:?}"),
            })?;
            if !v.is_finite() {
                return Err(CgstaeError::Parse {
                    line: li + 1,
                    col,
                    msg: format!("non-finite value {tok:?}"),
                });
            }
            row.push(v);
        }
        if row.is_empty() {
            continue;
        }
        match width {
            None => width = Some(row.len()),
            Some(wd) if wd != row.len() => {
                return Err(CgstaeError::Layout(format!(
                    "line {} has {} columns, expected {}",
                    li + 1,
                    row.len(),
                    wd
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    let cols = width.ok_or_else(|| CgstaeError::Layout("no numeric rows".into()))?;
    let n_rows = rows.len();
    Matrix::from_vec(n_rows, cols, rows.into_iter().flatten().collect())
}

/// (1-based column, token) pairs of a line.
pub(crate) fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s, &line[s..]));
    }
    out.into_iter().map(move |(s, t)| (line[..s].chars().count() + 1, t))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path).map_err(|e| CgstaeError::io(path, e))?;
    parse_matrix(&text)
}

/// Shortest round-tripping decimal representation, space separated.
pub fn format_matrix(m: &Matrix) -> String {
    let mut s = String::new();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{v:e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_matrix(m)).map_err(|e| CgstaeError::io(path, e))
}

/// Comma-separated with an optional header row.
pub fn format_csv(m: &Matrix, header: Option<&[String]>) -> String {
    let mut s = String::new();
    if let Some(h) = header {
        s.push_str(&h.join(","));
        s.push('\n');
    }
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let m = parse_matrix("1 2 3\n\n  4.5e0\t-1 0\n").unwrap();
        assert_eq!(m, Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.5, -1.0, 0.0]]));
    }

    #[test]
    fn reports_bad_token_position() {
        match parse_matrix("1 2\n3  x4\n") {
            Err(CgstaeError::Parse { line, col, .. }) => assert_eq!((line, col), (2, 4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_layout_errors() {
        assert!(matches!(parse_matrix("1 2\n3\n"), Err(CgstaeError::Layout(_))));
        assert!(matches!(parse_matrix("\n \n"), Err(CgstaeError::Layout(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let m = Matrix::from_fn(7, 3, |i, j| ((i * 3 + j) as f64 * 1.37).sin() / 3.0 + 1e-17 * i as f64);
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        assert_eq!(back, m);
    }
}
