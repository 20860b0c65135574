//! Plain-text group-spec files.
//!
//! ```text
//! # Heisenberg group
//! m 2
//! d2 1
//! c 1 2 1 1
//! ```
//!
//! Indices are one-based, values are decimals or rationals `p/q`, missing
//! entries are zero and `#` starts a comment.

use std::collections::HashSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::algebra::{validate_dense, StructureConstants, ValidationReport};
use crate::error::{CarnotError, Result};

/// A parsed spec file before antisymmetry is enforced.
///
/// Entries are placed exactly where the file puts them, so a file that lists
/// `c j i l` with `j > i` shows up as an antisymmetry failure on validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecFile {
    pub m: usize,
    pub d2: usize,
    pub dense: Vec<DMatrix<f64>>,
}

impl SpecFile {
    pub fn validate(&self) -> Result<ValidationReport> {
        validate_dense(self.m, self.d2, &self.dense)
    }

    /// Structure constants after a successful validation.
    pub fn into_constants(self) -> Result<StructureConstants> {
        self.validate()?.into_result()?;
        StructureConstants::from_dense(self.m, self.d2, &self.dense)
    }
}

pub fn parse_spec(text: &str) -> Result<SpecFile> {
    let mut m: Option<usize> = None;
    let mut d2: Option<usize> = None;
    let mut dense: Vec<DMatrix<f64>> = Vec::new();
    let mut seen = HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |message: String| CarnotError::Parse { line: line_no, message };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "m" if m.is_none() => m = Some(parse_dim(&tokens, line_no)?),
            "d2" if m.is_some() && d2.is_none() => {
                let d = parse_dim(&tokens, line_no)?;
                let mm = m.expect("checked");
                dense = vec![DMatrix::zeros(mm, mm); d];
                d2 = Some(d);
            }
            "c" if d2.is_some() => {
                if tokens.len() != 5 {
                    return Err(err(format!("expected `c <i> <j> <l> <value>`, got `{line}`")));
                }
                let (mm, dd) = (m.expect("checked"), d2.expect("checked"));
                let index = |tok: &str, bound: usize| -> Result<usize> {
                    let v: usize = tok
                        .parse()
                        .map_err(|_| err(format!("bad index `{tok}`")))?;
                    if v == 0 || v > bound {
                        return Err(err(format!("index {v} out of range 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = index(tokens[1], mm)?;
                let j = index(tokens[2], mm)?;
                let l = index(tokens[3], dd)?;
                let value = parse_value(tokens[4]).map_err(err)?;
                if !seen.insert((i, j, l)) {
                    return Err(err(format!("duplicate entry for ({}, {}, {})", i + 1, j + 1, l + 1)));
                }
                dense[l][(i, j)] = value;
                if i < j && !seen.contains(&(j, i, l)) {
                    dense[l][(j, i)] = -value;
                }
            }
            other => {
                let expected = if m.is_none() {
                    "`m <int>`"
                } else if d2.is_none() {
                    "`d2 <int>`"
                } else {
                    "`c <i> <j> <l> <value>`"
                };
                return Err(err(format!("unexpected `{other}`, expected {expected}")));
            }
        }
    }
    match (m, d2) {
        (Some(m), Some(d2)) => Ok(SpecFile { m, d2, dense }),
        _ => Err(CarnotError::Parse {
            line: text.lines().count(),
            message: "missing `m` or `d2` header".into(),
        }),
    }
}

fn parse_dim(tokens: &[&str], line: usize) -> Result<usize> {
    if tokens.len() != 2 {
        return Err(CarnotError::Parse {
            line,
            message: format!("expected `{} <int>`", tokens[0]),
        });
    }
    tokens[1].parse().map_err(|_| CarnotError::Parse {
        line,
        message: format!("bad dimension `{}`", tokens[1]),
    })
}

fn parse_value(tok: &str) -> std::result::Result<f64, String> {
    let parsed = match tok.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| format!("bad numerator in `{tok}`"))?;
            let q: f64 = q.parse().map_err(|_| format!("bad denominator in `{tok}`"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in `{tok}`"));
            }
            p / q
        }
        None => tok.parse().map_err(|_| format!("bad value `{tok}`"))?,
    };
    if parsed.is_finite() {
        Ok(parsed)
    } else {
        Err(format!("non-finite value `{tok}`"))
    }
}

/// Canonical text form; values are printed with round-trip precision.
pub fn write_spec(sc: &StructureConstants) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "m {}", sc.m());
    let _ = writeln!(out, "d2 {}", sc.d2());
    for (i, j, l, v) in sc.upper_entries() {
        let _ = writeln!(out, "c {} {} {} {:?}", i + 1, j + 1, l + 1, v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::heisenberg;
    use crate::deformation::{gk_member, FamilyIndex};

    #[test]
    fn parses_heisenberg_with_comments() {
        let text = "# Heisenberg\nm 2\nd2 1   # one center direction\n\nc 1 2 1 1\n";
        let sc = parse_spec(text).unwrap().into_constants().unwrap();
        assert_eq!(sc, heisenberg());
    }

    #[test]
    fn rationals() {
        let text = "m 4\nd2 3\nc 1 2 1 1\nc 1 3 2 1\nc 1 4 3 1\nc 2 3 3 1/7\nc 2 4 2 -1/7\nc 3 4 1 1/7\n";
        let sc = parse_spec(text).unwrap().into_constants().unwrap();
        assert_eq!(sc, gk_member(FamilyIndex::Finite(7)));
    }

    #[test]
    fn lower_triangle_entry_fails_validation() {
        let spec = parse_spec("m 2\nd2 1\nc 2 1 1 1\n").unwrap();
        let report = spec.validate().unwrap();
        assert!(!report.antisymmetric);
        assert!(matches!(spec.into_constants(), Err(CarnotError::Antisymmetry { .. })));
    }

    #[test]
    fn explicit_pair_is_kept_in_either_order() {
        for text in ["m 2\nd2 1\nc 1 2 1 1\nc 2 1 1 1\n", "m 2\nd2 1\nc 2 1 1 1\nc 1 2 1 1\n"] {
            assert!(!parse_spec(text).unwrap().validate().unwrap().antisymmetric, "{text:?}");
        }
        let ok = parse_spec("m 2\nd2 1\nc 2 1 1 -1\nc 1 2 1 1\n").unwrap();
        assert!(ok.validate().unwrap().antisymmetric);
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "d2 1\nm 2\n",
            "m 2\nd2 1\nc 1 2 2 1\n",
            "m 2\nd2 1\nc 1 2 1 x\n",
            "m 2\nd2 1\nc 1 2 1 1/0\n",
            "m 2\nd2 1\nc 1 2 1 1\nc 1 2 1 2\n",
            "m 2\n",
            "m two\nd2 1\n",
        ] {
            assert!(matches!(parse_spec(bad), Err(CarnotError::Parse { .. })), "{bad:?}");
        }
    }

    #[test]
    fn write_then_parse() {
        let sc = gk_member(FamilyIndex::Finite(3));
        let back = parse_spec(&write_spec(&sc)).unwrap().into_constants().unwrap();
        assert_eq!(back, sc);
    }
}
