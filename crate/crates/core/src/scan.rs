//! Stability diagram of two position-coupled oscillators,
//! `M = [[1, Λ, 0, 0], [Λ, η, 0, 0], [0, 0, 1, 0], [0, 0, 0, η]]`, sampled on
//! an `(η, Λ)` grid.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::Config;
use crate::error::Result;
use crate::normal_form::{normal_form, NormalFormBlock, NormalFormReport};
use crate::quadratic::HamiltonianMatrix;
use crate::report::format_eigenvalue;
use crate::spectrum::{Case, EigenvalueClass, EigenvalueKind};

pub fn two_mode_hamiltonian(eta: f64, lambda: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[1.0, lambda, 0.0, 0.0, lambda, eta, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, eta],
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    /// `min + (max − min)·i/(steps − 1)`; a single step sits at `min`.
    pub fn value(&self, i: usize) -> f64 {
        if self.steps <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn spacing(&self) -> f64 {
        if self.steps <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.steps - 1) as f64
        }
    }
}

/// Regions of the diagram, named after the spectrum they carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// Two simple imaginary pairs.
    Stable,
    /// An imaginary pair and a real pair.
    RealPair,
    /// One complex quadruplet.
    Quadruplet,
    /// An imaginary pair and a rank-2 zero chain.
    ZeroChain,
    /// A degenerate, nondiagonalizable imaginary pair.
    DegenerateImaginary,
    /// An imaginary pair and a doubly degenerate, diagonalizable zero.
    ZeroModes,
    /// A doubly degenerate, diagonalizable imaginary pair.
    DegenerateOscillators,
    Other,
}

/// Structure of one eigenvalue class as seen by the scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassSignature {
    pub kind: EigenvalueKind,
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub eigenvalue: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Chain ranks at the representative eigenvalue, descending.
    pub ranks: Vec<usize>,
    /// Signs of the self-paired blocks, sorted.
    pub signs: Vec<String>,
}

impl ClassSignature {
    fn fields(&self) -> String {
        let ranks: Vec<String> = self.ranks.iter().map(usize::to_string).collect();
        let mut s = format!("a{},m{},D{}", self.algebraic, self.geometric, ranks.join("/"));
        if !self.signs.is_empty() {
            let _ = write!(s, ",s{}", self.signs.join("/"));
        }
        s
    }

    /// `I(3i,a1,m1,D1,s-i)`
    pub fn encode(&self) -> String {
        format!("{}({},{})", self.kind.letter(), format_eigenvalue(round(self.eigenvalue)), self.fields())
    }

    /// Like [`encode`](Self::encode) without the eigenvalue, so that it stays
    /// constant inside a region.
    pub fn structure(&self) -> String {
        format!("{}({})", self.kind.letter(), self.fields())
    }
}

fn round(z: Complex64) -> Complex64 {
    let r = |x: f64| (x * 1e4).round() / 1e4 + 0.0;
    Complex64::new(r(z.re), r(z.im))
}

fn sign_label(s: Complex64) -> String {
    let unit = if s.im.abs() > s.re.abs() { "i" } else { "1" };
    let negative = if unit == "i" { s.im < 0.0 } else { s.re < 0.0 };
    format!("{}{unit}", if negative { '-' } else { '+' })
}

fn kind_of(case: Case) -> EigenvalueKind {
    match case {
        Case::Real => EigenvalueKind::RealPair,
        Case::Quadruplet => EigenvalueKind::ComplexQuadruplet,
        Case::ZeroEven | Case::ZeroOdd => EigenvalueKind::Zero,
        Case::ImaginaryEven | Case::ImaginaryOdd => EigenvalueKind::ImaginaryPair,
    }
}

fn class_signature(class: &EigenvalueClass, blocks: &[NormalFormBlock]) -> ClassSignature {
    let scale = 1e-6 * (1.0 + class.representative.norm());
    let mut ranks = Vec::new();
    let mut signs = Vec::new();
    for b in blocks {
        if kind_of(b.case) != class.kind || (b.eigenvalue - class.representative).norm() > scale {
            continue;
        }
        ranks.push(b.rank);
        // A zero-odd block pairs two chains of equal rank.
        if b.case == Case::ZeroOdd {
            ranks.push(b.rank);
        }
        if let Some(s) = b.sigma {
            signs.push(sign_label(s));
        }
    }
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    signs.sort();
    ClassSignature {
        kind: class.kind,
        eigenvalue: class.representative,
        algebraic: class.algebraic,
        geometric: class.geometric.unwrap_or(0),
        ranks,
        signs,
    }
}

/// Class signatures of a report, in canonical (sorted) order.
pub fn signatures(report: &NormalFormReport) -> Vec<ClassSignature> {
    let mut out: Vec<ClassSignature> =
        report.spectrum.classes.iter().map(|c| class_signature(c, &report.blocks)).collect();
    out.sort_by_key(ClassSignature::encode);
    out
}

pub fn region(signatures: &[ClassSignature]) -> Region {
    use EigenvalueKind::*;
    let simple = |s: &ClassSignature| s.algebraic == 1 && s.geometric == 1;
    let imaginary = || signatures.iter().filter(|s| s.kind == ImaginaryPair);
    let find = |kind| signatures.iter().find(|s| s.kind == kind);
    match signatures.len() {
        1 => {
            let s = &signatures[0];
            match (s.kind, s.algebraic, s.geometric) {
                (ComplexQuadruplet, 1, 1) => Region::Quadruplet,
                (ImaginaryPair, 2, 1) => Region::DegenerateImaginary,
                (ImaginaryPair, 2, 2) => Region::DegenerateOscillators,
                _ => Region::Other,
            }
        }
        2 if imaginary().count() >= 1 && imaginary().all(simple) => {
            if imaginary().count() == 2 {
                return Region::Stable;
            }
            if find(RealPair).is_some_and(simple) {
                return Region::RealPair;
            }
            match find(Zero) {
                Some(z) if z.algebraic == 2 && z.geometric == 1 => Region::ZeroChain,
                Some(z) if z.algebraic == 2 && z.geometric == 2 => Region::ZeroModes,
                _ => Region::Other,
            }
        }
        _ => Region::Other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanCell {
    pub eta: f64,
    pub lambda: f64,
    /// `stable`, `marginal`, `unstable`, or `error`.
    pub verdict: String,
    /// Canonical encoding, e.g. `I(0.7071i,a1,m1,D1,s-i);I(1.2247i,a1,m1,D1,s-i)`.
    pub signature: String,
    /// The signature without eigenvalues; boundaries are where this changes.
    pub structure: String,
    pub region: Option<Region>,
    /// Set when some 4-neighbour has a different structure.
    pub boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanGrid {
    pub parameters: [&'static str; 2],
    pub eta: Axis,
    pub lambda: Axis,
    /// Row-major over `(eta, lambda)`: index `i·lambda.steps + j`.
    pub cells: Vec<ScanCell>,
}

impl ScanGrid {
    pub fn cell(&self, i: usize, j: usize) -> &ScanCell {
        &self.cells[i * self.lambda.steps + j]
    }

    /// `# eta lambda verdict signature` followed by one row per point.
    pub fn to_table(&self) -> String {
        let mut out = String::from("# eta lambda verdict signature\n");
        for c in &self.cells {
            let _ = writeln!(out, "{} {} {} {}", c.eta, c.lambda, c.verdict, c.signature);
        }
        out
    }

    /// Grid coordinates of the cells flagged as boundaries.
    pub fn boundary_table(&self) -> String {
        let mut out = String::from("# eta lambda structure\n");
        for c in self.cells.iter().filter(|c| c.boundary) {
            let _ = writeln!(out, "{} {} {}", c.eta, c.lambda, c.structure);
        }
        out
    }
}

fn analyze_point(eta: f64, lambda: f64, config: &Config) -> ScanCell {
    let outcome: Result<NormalFormReport> =
        HamiltonianMatrix::new(two_mode_hamiltonian(eta, lambda), &config.tolerances)
            .and_then(|m| normal_form(&m, config));
    match outcome {
        Ok(report) => {
            let sigs = signatures(&report);
            let join = |f: fn(&ClassSignature) -> String| sigs.iter().map(f).collect::<Vec<_>>().join(";");
            let mut structure: Vec<String> = sigs.iter().map(ClassSignature::structure).collect();
            structure.sort();
            ScanCell {
                eta,
                lambda,
                verdict: report.verdict.label().into(),
                signature: join(ClassSignature::encode),
                structure: structure.join(";"),
                region: Some(region(&sigs)),
                boundary: false,
            }
        }
        Err(e) => ScanCell {
            eta,
            lambda,
            verdict: "error".into(),
            signature: format!("error({})", e.code()),
            structure: format!("error({})", e.code()),
            region: None,
            boundary: false,
        },
    }
}

/// Analyzes every grid point in parallel; the cell order is fixed by the grid.
pub fn scan_two_mode(eta: Axis, lambda: Axis, config: &Config) -> ScanGrid {
    let (ni, nj) = (eta.steps, lambda.steps);
    let mut cells: Vec<ScanCell> = (0..ni * nj)
        .into_par_iter()
        .map(|idx| analyze_point(eta.value(idx / nj), lambda.value(idx % nj), config))
        .collect();
    let flags: Vec<bool> = (0..ni * nj)
        .map(|idx| {
            let (i, j) = (idx / nj, idx % nj);
            let here = &cells[idx].structure;
            let mut neighbours = Vec::with_capacity(4);
            if i > 0 {
                neighbours.push(idx - nj);
            }
            if i + 1 < ni {
                neighbours.push(idx + nj);
            }
            if j > 0 {
                neighbours.push(idx - 1);
            }
            if j + 1 < nj {
                neighbours.push(idx + 1);
            }
            neighbours.into_iter().any(|n| &cells[n].structure != here)
        })
        .collect();
    for (cell, flag) in cells.iter_mut().zip(flags) {
        cell.boundary = flag;
    }
    ScanGrid { parameters: ["eta", "lambda"], eta, lambda, cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(eta: f64, lambda: f64) -> ScanCell {
        analyze_point(eta, lambda, &Config::default())
    }

    #[test]
    fn axis_values() {
        let a = Axis::new(-2.0, 2.0, 41);
        assert_eq!(a.value(0), -2.0);
        assert_eq!(a.value(30), 1.0);
        assert_eq!(a.value(40), 2.0);
        assert_eq!(Axis::new(1.0, 5.0, 1).value(0), 1.0);
    }

    #[test]
    fn named_points() {
        let stable = point(1.0, 0.5);
        assert_eq!(stable.region, Some(Region::Stable));
        assert_eq!(stable.signature, "I(0.7071i,a1,m1,D1,s-i);I(1.2247i,a1,m1,D1,s-i)");
        assert_eq!(point(1.0, 2.0).region, Some(Region::RealPair));
        assert_eq!(point(-1.0, 0.5).region, Some(Region::Quadruplet));
        let blue = point(1.0, 1.0);
        assert_eq!(blue.region, Some(Region::ZeroChain));
        assert!(blue.signature.contains("Z(0,a2,m1,D2,s+1)"), "{}", blue.signature);
        let origin = point(0.0, 0.0);
        assert_eq!(origin.region, Some(Region::ZeroModes));
        assert!(origin.signature.contains("Z(0,a2,m2,D1/1)"), "{}", origin.signature);
        let special = point(-1.0, 0.0);
        assert_eq!(special.region, Some(Region::DegenerateOscillators));
        assert_eq!(special.signature, "I(i,a2,m2,D1/1,s+i/-i)");
    }

    #[test]
    fn scan_is_deterministic() {
        let config = Config::default();
        let a = scan_two_mode(Axis::new(-2.0, 2.0, 7), Axis::new(-2.0, 2.0, 5), &config);
        let b = scan_two_mode(Axis::new(-2.0, 2.0, 7), Axis::new(-2.0, 2.0, 5), &config);
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 35);
        assert_eq!(a.cell(3, 2).eta, 0.0);
        assert!(a.to_table().starts_with("# eta lambda verdict signature\n"));
        assert_eq!(a.to_table().lines().count(), 36);
    }
}
