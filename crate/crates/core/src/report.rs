//! Machine-readable (JSON) and human-readable renderings of a
//! [`NormalFormReport`], plus the structured error object the CLI emits.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::{Serialize, Serializer};

use crate::config::Tolerances;
use crate::error::{Error, Result, Stage};
use crate::linalg::max_abs;
use crate::normal_form::{
    format_coefficient, Growth, HamiltonianTerm, NormalFormBlock, NormalFormReport, PipelinePath, Residuals, Verdict,
};
use crate::quadratic::{build_eom, validate_eom_structure, HamiltonianMatrix, ModeLabel, StructureDiagnostics};
use crate::spectrum::{analyze_spectrum, EigenvalueKind, SpectrumReport};

pub(crate) fn serialize_complex<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
    let mut st = s.serialize_struct("Complex", 2)?;
    st.serialize_field("re", &z.re)?;
    st.serialize_field("im", &z.im)?;
    st.end()
}

pub(crate) fn serialize_optional_complex<S: Serializer>(z: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    match z {
        Some(z) => serialize_complex(z, s),
        None => s.serialize_none(),
    }
}

pub(crate) fn serialize_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for r in 0..m.nrows() {
        let row: Vec<f64> = m.row(r).iter().cloned().collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Row-major view of a matrix for serialization.
struct Rows<'a>(&'a DMatrix<f64>);

impl Serialize for Rows<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_matrix(self.0, s)
    }
}

#[derive(Serialize)]
struct TransformView<'a> {
    matrix: Rows<'a>,
    layout: &'a [ModeLabel],
}

/// Stable top-level schema of the JSON report.
#[derive(Serialize)]
struct ReportView<'a> {
    n_modes: usize,
    path: PipelinePath,
    verdict: &'a Verdict,
    zero_frequency_modes: usize,
    hamiltonian: String,
    terms: &'a [HamiltonianTerm],
    blocks: &'a [NormalFormBlock],
    spectrum: &'a SpectrumReport,
    transform: TransformView<'a>,
    k_normal: Rows<'a>,
    expected_k_normal: Rows<'a>,
    n_matrix: Rows<'a>,
    residuals: &'a Residuals,
    warnings: &'a [String],
}

/// Pretty-printed JSON. Floats use the shortest representation that parses
/// back to the same bits.
pub fn to_json(report: &NormalFormReport) -> String {
    let view = ReportView {
        n_modes: report.n_modes(),
        path: report.path,
        verdict: &report.verdict,
        zero_frequency_modes: report.zero_frequency_mode_count,
        hamiltonian: report.hamiltonian_expression(),
        terms: &report.terms,
        blocks: &report.blocks,
        spectrum: &report.spectrum,
        transform: TransformView { matrix: Rows(report.transform.entries()), layout: report.transform.layout() },
        k_normal: Rows(report.k_normal.entries()),
        expected_k_normal: Rows(&report.expected_k_normal),
        n_matrix: Rows(report.n_matrix.entries()),
        residuals: &report.residuals,
        warnings: &report.warnings,
    };
    serde_json::to_string_pretty(&view).expect("report serialization cannot fail")
}

/// Error object emitted in place of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub stage: Stage,
    pub code: &'static str,
    pub message: String,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        let (residual, tolerance) = match e {
            Error::NotSymmetric { residual, tolerance }
            | Error::NotSymplectic { residual, tolerance }
            | Error::Verification { residual, tolerance, .. } => (Some(*residual), Some(*tolerance)),
            _ => (None, None),
        };
        let (line, column) = match e {
            Error::Parse(p) => (Some(p.line), Some(p.column)),
            _ => (None, None),
        };
        Self {
            stage: e.stage(),
            code: e.code(),
            message: e.to_string(),
            exit_code: e.stage().exit_code(),
            residual,
            tolerance,
            line,
            column,
        }
    }
}

pub fn error_json(e: &Error) -> String {
    serde_json::to_string_pretty(&serde_json::json!({ "error": ErrorReport::from(e) }))
        .expect("error serialization cannot fail")
}

/// Validation and spectral diagnostics without building a transform.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub n_modes: usize,
    pub structure: StructureDiagnostics,
    pub spectrum: SpectrumReport,
    /// Whether the simplified path for stable spectra applies.
    pub bogoliubov_applicable: bool,
}

pub fn check(m: &HamiltonianMatrix, tol: &Tolerances) -> Result<CheckReport> {
    let k = build_eom(m);
    let structure = validate_eom_structure(k.entries(), tol.structural(max_abs(k.entries())))?;
    let spectrum = analyze_spectrum(&k, tol)?;
    Ok(CheckReport {
        n_modes: m.n_modes(),
        structure,
        bogoliubov_applicable: spectrum.is_imaginary_diagonalizable(),
        spectrum,
    })
}

pub fn check_to_text(c: &CheckReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "modes: {}", c.n_modes);
    let _ = writeln!(
        out,
        "structure: {} (residual {:.3e}, tolerance {:.3e})",
        if c.structure.passed { "ok" } else { "violated" },
        c.structure.hamiltonian_residual,
        c.structure.tolerance
    );
    write_spectrum(&mut out, &c.spectrum);
    let _ = writeln!(out, "sum rule residual: {}", c.spectrum.sum_rule_residual);
    let _ = writeln!(out, "bogoliubov path applicable: {}", if c.bogoliubov_applicable { "yes" } else { "no" });
    for w in &c.spectrum.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

fn write_spectrum(out: &mut String, spectrum: &SpectrumReport) {
    let _ = writeln!(out, "spectrum:");
    for c in &spectrum.classes {
        let m = c.geometric.map_or_else(|| "?".to_string(), |m| m.to_string());
        let _ = writeln!(
            out,
            "  {:<19} {:>12}  a={} m={m}",
            kind_name(c.kind),
            format_eigenvalue(c.representative),
            c.algebraic
        );
    }
}

/// Compact rendering of an eigenvalue: `2`, `3i`, `0.5+2i`.
pub fn format_eigenvalue(z: Complex64) -> String {
    let re = format_coefficient(z.re);
    let im = format_coefficient(z.im);
    match (re.as_str(), im.as_str()) {
        (_, "0") => re,
        ("0", "1") => "i".into(),
        ("0", "-1") => "-i".into(),
        ("0", _) => format!("{im}i"),
        _ if z.im < 0.0 => format!("{re}{im}i"),
        _ => format!("{re}+{im}i"),
    }
}

fn kind_name(kind: EigenvalueKind) -> &'static str {
    match kind {
        EigenvalueKind::RealPair => "real pair",
        EigenvalueKind::ComplexQuadruplet => "complex quadruplet",
        EigenvalueKind::Zero => "zero",
        EigenvalueKind::ImaginaryPair => "imaginary pair",
    }
}

fn mode_range(modes: &[usize]) -> String {
    match modes {
        [] => String::new(),
        [one] => format!("mode {one}"),
        [first, .., last] => format!("modes {first}-{last}"),
    }
}

fn write_matrix(out: &mut String, title: &str, m: &DMatrix<f64>) {
    let _ = writeln!(out, "{title}:");
    for r in 0..m.nrows() {
        // Round-off below the printed precision would show up as `-0.000000`.
        let row: Vec<String> =
            m.row(r).iter().map(|&x| format!("{:>11.6}", if x.abs() < 5e-7 { 0.0 } else { x })).collect();
        let _ = writeln!(out, "  {}", row.join(" "));
    }
}

/// Human-readable report.
pub fn to_text(report: &NormalFormReport) -> String {
    let mut out = String::new();
    let path = match report.path {
        PipelinePath::General => "general",
        PipelinePath::Bogoliubov => "bogoliubov",
    };
    let _ = writeln!(out, "modes: {}  (path: {path})", report.n_modes());
    let _ = writeln!(out, "H = {}", report.hamiltonian_expression());
    let _ = writeln!(out, "zero-frequency modes: {}", report.zero_frequency_mode_count);
    let _ = writeln!(out, "verdict: {}", report.verdict.label());
    if let Verdict::Unstable { reasons } = &report.verdict {
        for r in reasons {
            let growth = match r.growth {
                Growth::Exponential { rate, polynomial_order: 0 } => {
                    format!("exponential, rate {}", format_coefficient(rate))
                }
                Growth::Exponential { rate, polynomial_order } => {
                    format!("exponential, rate {} times t^{polynomial_order}", format_coefficient(rate))
                }
                Growth::Polynomial { order } => format!("polynomial, t^{order}"),
            };
            let _ = writeln!(
                out,
                "  case {} at {} (rank {}, {}): {growth}",
                r.case.number(),
                format_eigenvalue(r.eigenvalue),
                r.rank,
                mode_range(&r.modes)
            );
        }
    }
    write_spectrum(&mut out, &report.spectrum);
    let _ = writeln!(out, "blocks:");
    for b in &report.blocks {
        let modes: Vec<usize> = (b.mode_offset + 1..=b.mode_offset + b.mode_count).collect();
        let sigma = b.sigma.map(|s| format!(", sigma {}", format_eigenvalue(s))).unwrap_or_default();
        let _ = writeln!(
            out,
            "  case {} at {}, rank {}{sigma} ({})",
            b.case.number(),
            format_eigenvalue(b.eigenvalue),
            b.rank,
            mode_range(&modes)
        );
    }
    let r = &report.residuals;
    let _ = writeln!(out, "residuals:");
    let _ = writeln!(out, "  symplectic     {:.3e} (tolerance {:.3e})", r.symplectic, r.symplectic_tolerance);
    let _ = writeln!(out, "  block match    {:.3e} (tolerance {:.3e})", r.block_match, r.block_tolerance);
    let _ = writeln!(out, "  hamiltonian    {:.3e}", r.hamiltonian_match);
    let _ = writeln!(out, "  orthonormality {:.3e}", r.orthonormality);
    for w in &report.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    write_matrix(&mut out, "N = T^T M T", report.n_matrix.entries());
    write_matrix(&mut out, "T", report.transform.entries());
    out
}
