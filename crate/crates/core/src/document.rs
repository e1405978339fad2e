//! Matrix documents: the plain-text format
//!
//! ```text
//! # comment
//! modes 1
//! labels a
//! 1 0
//! 0 1
//! ```
//!
//! and an equivalent JSON object `{"modes": 1, "matrix": [[1, 0], [0, 1]]}`
//! with optional `labels` and `tolerances` fields. Entries are written with
//! the shortest decimal that parses back to the same bits, so a document
//! survives a parse/write round trip unchanged.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::quadratic::HamiltonianMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDocument {
    pub n_modes: usize,
    /// Row-major `2N×2N` entries.
    pub entries: DMatrix<f64>,
    pub labels: Option<Vec<String>>,
    pub tolerances: Option<Tolerances>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonDocument {
    #[serde(default)]
    modes: Option<usize>,
    matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerances: Option<Tolerances>,
}

fn at(line: usize, column: usize, kind: ParseErrorKind) -> Error {
    Error::Parse(ParseError { line, column, kind })
}

impl MatrixDocument {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c || r == 0 || r % 2 != 0 {
            return Err(Error::InvalidDimension(format!("matrix is {r}×{c}; expected 2N×2N with N ≥ 1")));
        }
        Ok(Self { n_modes: r / 2, entries, labels: None, tolerances: None })
    }

    /// Parses either format; input whose first non-blank character is `{`
    /// is read as JSON.
    pub fn parse(input: &str) -> Result<Self> {
        if input.trim_start().starts_with('{') {
            Self::parse_json(input)
        } else {
            Self::parse_text(input)
        }
    }

    pub fn parse_json(input: &str) -> Result<Self> {
        let doc: JsonDocument = serde_json::from_str(input)
            .map_err(|e| at(e.line(), e.column(), ParseErrorKind::Structured(e.to_string())))?;
        let size = doc.matrix.len();
        if let Some(modes) = doc.modes {
            if modes == 0 {
                return Err(at(1, 1, ParseErrorKind::InvalidModeCount("0".into())));
            }
            if size != 2 * modes {
                return Err(at(1, 1, ParseErrorKind::RowCount { expected: 2 * modes, found: size }));
            }
        }
        for (i, row) in doc.matrix.iter().enumerate() {
            if row.len() != size {
                return Err(Error::InvalidDimension(format!(
                    "row {} has {} entries, expected {size}",
                    i + 1,
                    row.len()
                )));
            }
        }
        let entries = DMatrix::from_fn(size, size, |r, c| doc.matrix[r][c]);
        let mut out = Self::new(entries)?;
        out.labels = doc.labels;
        out.tolerances = doc.tolerances;
        out.check_labels()?;
        Ok(out)
    }

    pub fn parse_text(input: &str) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("")))
            .filter(|(_, l)| !l.trim().is_empty());

        let (header_line, header) = lines.next().ok_or_else(|| at(1, 1, ParseErrorKind::MissingHeader))?;
        let mut words = tokens(header);
        let n_modes = match (words.next(), words.next(), words.next()) {
            (Some((_, "modes")), Some((col, count)), None) => match count.parse::<usize>() {
                Ok(n) if n > 0 => n,
                _ => return Err(at(header_line, col, ParseErrorKind::InvalidModeCount(count.into()))),
            },
            (Some((col, _)), _, _) => return Err(at(header_line, col, ParseErrorKind::MissingHeader)),
            (None, ..) => unreachable!("blank lines are filtered"),
        };
        let size = 2 * n_modes;

        let mut labels = None;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(size);
        let mut last_line = header_line;
        for (line_no, line) in lines {
            last_line = line_no;
            let mut words = tokens(line).peekable();
            if rows.is_empty() && labels.is_none() && words.peek().map(|w| w.1) == Some("labels") {
                labels = Some(words.skip(1).map(|(_, w)| w.to_string()).collect());
                continue;
            }
            if rows.len() == size {
                let col = words.peek().map_or(1, |w| w.0);
                return Err(at(line_no, col, ParseErrorKind::RowCount { expected: size, found: size + 1 }));
            }
            let mut row = Vec::with_capacity(size);
            for (col, word) in words {
                let value: f64 = word.parse().map_err(|_| at(line_no, col, ParseErrorKind::NonNumeric(word.into())))?;
                if !value.is_finite() {
                    return Err(at(line_no, col, ParseErrorKind::NonFinite(word.into())));
                }
                row.push(value);
            }
            if row.len() != size {
                return Err(at(line_no, 1, ParseErrorKind::RowLength { expected: size, found: row.len() }));
            }
            rows.push(row);
        }
        if rows.len() != size {
            return Err(at(last_line, 1, ParseErrorKind::RowCount { expected: size, found: rows.len() }));
        }
        let entries = DMatrix::from_fn(size, size, |r, c| rows[r][c]);
        let out = Self { n_modes, entries, labels, tolerances: None };
        out.check_labels()?;
        Ok(out)
    }

    fn check_labels(&self) -> Result<()> {
        match &self.labels {
            Some(l) if l.len() != self.n_modes => {
                Err(Error::InvalidDimension(format!("{} labels for {} modes", l.len(), self.n_modes)))
            }
            _ => Ok(()),
        }
    }

    /// Writes the plain-text format.
    pub fn to_text(&self) -> String {
        let mut out = format!("modes {}\n", self.n_modes);
        if let Some(labels) = &self.labels {
            let _ = writeln!(out, "labels {}", labels.join(" "));
        }
        for r in 0..self.entries.nrows() {
            let row: Vec<String> = self.entries.row(r).iter().map(|x| format!("{x}")).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let doc = JsonDocument {
            modes: Some(self.n_modes),
            matrix: (0..self.entries.nrows()).map(|r| self.entries.row(r).iter().cloned().collect()).collect(),
            labels: self.labels.clone(),
            tolerances: self.tolerances,
        };
        serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
    }

    /// Tolerances declared by the document, falling back to `base`.
    pub fn effective_tolerances(&self, base: &Tolerances) -> Tolerances {
        self.tolerances.unwrap_or(*base)
    }

    /// Validates symmetry under the effective tolerances.
    pub fn hamiltonian(&self, base: &Tolerances) -> Result<HamiltonianMatrix> {
        HamiltonianMatrix::new(self.entries.clone(), &self.effective_tolerances(base))
    }
}

/// Whitespace-separated words with their 1-based character columns.
fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_whitespace())?;
        let tail = &rest[start..];
        let len = tail.find(char::is_whitespace).unwrap_or(tail.len());
        let word = &tail[..len];
        let column = line[..offset + start].chars().count() + 1;
        offset += start + len;
        rest = &tail[len..];
        Some((column, word))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kind(e: Error) -> (usize, usize, ParseErrorKind) {
        match e {
            Error::Parse(p) => (p.line, p.column, p.kind),
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn parses_identity_with_comments() {
        let doc = MatrixDocument::parse("# unit oscillator\nmodes 1\n1 0  # x row\n\n0 1\n").unwrap();
        assert_eq!(doc.n_modes, 1);
        assert_eq!(doc.entries, DMatrix::identity(2, 2));
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let text = "modes 1\nlabels a\n0.1 -2.5e-7\n-2.5e-7 3.14159265358979\n";
        let doc = MatrixDocument::parse(text).unwrap();
        assert_eq!(doc.to_text(), "modes 1\nlabels a\n0.1 -0.00000025\n-0.00000025 3.14159265358979\n");
        let again = MatrixDocument::parse(&doc.to_text()).unwrap();
        assert_eq!(again, doc);
        let json = MatrixDocument::parse(&doc.to_json()).unwrap();
        assert_eq!(json, doc);
    }

    #[test]
    fn reports_positions() {
        let (line, col, k) = kind(MatrixDocument::parse("modes 1\n1 x\n0 1\n").unwrap_err());
        assert_eq!((line, col), (2, 3));
        assert_eq!(k, ParseErrorKind::NonNumeric("x".into()));
        let (line, _, k) = kind(MatrixDocument::parse("modes 1\n1 0 0\n0 1\n").unwrap_err());
        assert_eq!((line, k), (2, ParseErrorKind::RowLength { expected: 2, found: 3 }));
        let (_, _, k) = kind(MatrixDocument::parse("modes 1\n1 0\n").unwrap_err());
        assert_eq!(k, ParseErrorKind::RowCount { expected: 2, found: 1 });
        let (line, col, k) = kind(MatrixDocument::parse("\nmodes two\n").unwrap_err());
        assert_eq!((line, col, k), (2, 7, ParseErrorKind::InvalidModeCount("two".into())));
        let (_, _, k) = kind(MatrixDocument::parse("1 0\n0 1\n").unwrap_err());
        assert_eq!(k, ParseErrorKind::MissingHeader);
        let (_, _, k) = kind(MatrixDocument::parse("modes 1\n1 inf\n0 1\n").unwrap_err());
        assert_eq!(k, ParseErrorKind::NonFinite("inf".into()));
    }

    #[test]
    fn odd_dimension_is_rejected() {
        let e = MatrixDocument::parse(r#"{"matrix": [[1,0,0],[0,1,0],[0,0,1]]}"#).unwrap_err();
        assert!(matches!(e, Error::InvalidDimension(_)));
    }

    #[test]
    fn json_with_tolerances() {
        let doc =
            MatrixDocument::parse(r#"{"modes": 1, "matrix": [[1, 0.5], [0.5, 1]], "tolerances": {"verify": 1e-6}}"#)
                .unwrap();
        let tol = doc.effective_tolerances(&Tolerances::default());
        assert_eq!(tol.verify, 1e-6);
        assert_eq!(tol.cluster, Tolerances::default().cluster);
        let e = MatrixDocument::parse(r#"{"modes": 1, "matrix": [[1, 0.5], [0.5, 1]], "bogus": 1}"#).unwrap_err();
        assert!(matches!(e, Error::Parse(ParseError { kind: ParseErrorKind::Structured(_), .. })));
    }

    #[test]
    fn asymmetry_is_a_validation_error() {
        let doc = MatrixDocument::parse("modes 1\n1 0.5\n0.4 1\n").unwrap();
        assert!(matches!(doc.hamiltonian(&Tolerances::default()), Err(Error::NotSymmetric { .. })));
    }
}
