//! Plain-text network and marginal formats.
//!
//! Network triplet file: a header line `m n nnz` followed by `nnz` lines
//! `i j w` (0-based indices, decimal weight) in row-major order.
//! Marginal file: one decimal value per line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::SparseNetwork;

pub fn format_network(net: &SparseNetwork) -> String {
    let mut out = String::with_capacity(16 * (net.nnz() + 1));
    let _ = writeln!(out, "{} {} {}", net.rows(), net.cols(), net.nnz());
    for (i, j, w) in net.entries() {
        let _ = writeln!(out, "{i} {j} {w}");
    }
    out
}

pub fn parse_network(text: &str) -> Result<SparseNetwork> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse {
            line: hline,
            message: format!("bad header: {e}"),
        })?;
    let [rows, cols, nnz] = head[..] else {
        return Err(Error::Parse {
            line: hline,
            message: "header must be `m n nnz`".into(),
        });
    };

    let mut triplets = Vec::with_capacity(nnz);
    for (line, content) in lines {
        let mut parts = content.split_whitespace();
        let mut field = |name: &str| {
            parts.next().ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {name}"),
            })
        };
        let bad = |e: String| Error::Parse { line, message: e };
        let i: usize = field("row")?.parse().map_err(|e| bad(format!("row: {e}")))?;
        let j: usize = field("col")?.parse().map_err(|e| bad(format!("col: {e}")))?;
        let w: f64 = field("weight")?
            .parse()
            .map_err(|e| bad(format!("weight: {e}")))?;
        if parts.next().is_some() {
            return Err(bad("trailing fields".into()));
        }
        if !(w > 0.0) || !w.is_finite() {
            return Err(bad(format!("weight must be positive and finite, got {w}")));
        }
        triplets.push((i, j, w));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse {
            line: hline,
            message: format!("header declares {nnz} entries, found {}", triplets.len()),
        });
    }
    SparseNetwork::from_triplets(rows, cols, triplets)
}

pub fn format_marginal(values: &[f64]) -> String {
    let mut out = String::with_capacity(12 * values.len());
    for v in values {
        let _ = writeln!(out, "{v}");
    }
    out
}

/// Parses one value per line; `expected_len` is checked when given.
pub fn parse_marginal(text: &str, expected_len: Option<usize>) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|e| Error::Parse {
            line: k + 1,
            message: format!("{e}"),
        })?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidMarginal {
                index: out.len(),
                value: v,
            });
        }
        out.push(v);
    }
    if let Some(n) = expected_len {
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} marginal values"),
                got: format!("{}", out.len()),
            });
        }
    }
    Ok(out)
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Parse {
        line: 0,
        message: format!("{}: {e}", path.display()),
    }
}

pub fn read_network(path: impl AsRef<Path>) -> Result<SparseNetwork> {
    let path = path.as_ref();
    parse_network(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

pub fn write_network(path: impl AsRef<Path>, net: &SparseNetwork) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_network(net)).map_err(|e| io_err(path, e))
}

pub fn read_marginal(path: impl AsRef<Path>, expected_len: Option<usize>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    parse_marginal(&fs::read_to_string(path).map_err(|e| io_err(path, e))?, expected_len)
}

pub fn write_marginal(path: impl AsRef<Path>, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_marginal(values)).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_basic_file() {
        let net = parse_network("2 3 2\n0 1 1.5\n1 2 4\n").unwrap();
        assert_eq!(net.shape(), (2, 3));
        assert_eq!(net.get(0, 1), 1.5);
        assert_eq!(net.get(1, 2), 4.0);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            parse_network("2 2 2\n0 0 1\n0 0 2\n"),
            Err(Error::DuplicateEntry { .. })
        ));
        assert!(matches!(
            parse_network("2 2 1\n2 0 1\n"),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(parse_network("2 2 2\n0 0 1\n").is_err());
        assert!(parse_network("2 2 1\n0 0 0\n").is_err());
        assert!(parse_network("2 2\n").is_err());
    }

    #[test]
    fn marginal_length_checked() {
        assert_eq!(parse_marginal("1\n2.5\n", Some(2)).unwrap(), vec![1.0, 2.5]);
        assert!(parse_marginal("1\n", Some(2)).is_err());
        assert!(parse_marginal("-1\n", None).is_err());
    }

    proptest! {
        #[test]
        fn network_round_trip(
            entries in proptest::collection::btree_map((0usize..6, 0usize..5), 1e-6f64..1e6, 0..20)
        ) {
            let net = SparseNetwork::from_triplets(
                6, 5, entries.into_iter().map(|((i, j), w)| (i, j, w))).unwrap();
            let back = parse_network(&format_network(&net)).unwrap();
            prop_assert_eq!(back, net);
        }

        #[test]
        fn marginal_round_trip(values in proptest::collection::vec(0.0f64..1e9, 0..30)) {
            let back = parse_marginal(&format_marginal(&values), Some(values.len())).unwrap();
            prop_assert_eq!(back, values);
        }
    }
}
