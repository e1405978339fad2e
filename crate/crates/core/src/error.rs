use std::fmt;

use thiserror::Error;

/// Pipeline stage an error originates from. Maps onto CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Validation,
    Pipeline,
    Verification,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Validation => 1,
            Stage::Pipeline => 2,
            Stage::Verification => 3,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Validation => "validation",
            Stage::Pipeline => "pipeline",
            Stage::Verification => "verification",
        })
    }
}

/// Location-tagged failure while reading a matrix document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("missing header, expected `modes N`")]
    MissingHeader,
    #[error("invalid mode count `{0}`")]
    InvalidModeCount(String),
    #[error("non-numeric entry `{0}`")]
    NonNumeric(String),
    #[error("non-finite entry `{0}`")]
    NonFinite(String),
    #[error("expected {expected} entries in row, found {found}")]
    RowLength { expected: usize, found: usize },
    #[error("expected {expected} rows, found {found}")]
    RowCount { expected: usize, found: usize },
    #[error("malformed structured document: {0}")]
    Structured(String),
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("matrix is not symmetric: max asymmetry {residual:.3e} exceeds {tolerance:.3e}")]
    NotSymmetric { residual: f64, tolerance: f64 },
    #[error("structure violated: {0}")]
    Structure(String),
    #[error("transform is not symplectic: residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotSymplectic { residual: f64, tolerance: f64 },
    #[error("transform is ill-conditioned: condition estimate {condition:.3e}")]
    IllConditioned { condition: f64 },
    #[error("matrix exponential overflowed (norm estimate {norm_estimate:.3e})")]
    Overflow { norm_estimate: f64 },
    #[error("ambiguous spectrum: {0}")]
    AmbiguousSpectrum(String),
    #[error("spectrum structure violated: {0}")]
    SpectrumStructure(String),
    #[error("chain extraction failed: {0}")]
    ChainExtraction(String),
    #[error("polynomial contract violated: {0}")]
    PolynomialContract(String),
    #[error("leading coefficient is zero; polynomial is not invertible")]
    NonInvertible,
    #[error("symplectic form is degenerate on the remaining chains: {0}")]
    Nondegeneracy(String),
    #[error("Bogoliubov path not applicable: {0}")]
    WrongPath(String),
    #[error("column construction failed: {0}")]
    Construction(String),
    #[error("verification failed: {message} (residual {residual:.3e}, tolerance {tolerance:.3e})")]
    Verification { message: String, residual: f64, tolerance: f64 },
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::InvalidDimension(_) | Error::NotSymmetric { .. } | Error::Structure(_) | Error::Parse(_) => {
                Stage::Validation
            }
            Error::Verification { .. } => Stage::Verification,
            _ => Stage::Pipeline,
        }
    }

    /// Short machine-readable tag.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidDimension(_) => "invalid_dimension",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::Structure(_) => "structure",
            Error::NotSymplectic { .. } => "not_symplectic",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::Overflow { .. } => "overflow",
            Error::AmbiguousSpectrum(_) => "ambiguous_spectrum",
            Error::SpectrumStructure(_) => "spectrum_structure",
            Error::ChainExtraction(_) => "chain_extraction",
            Error::PolynomialContract(_) => "polynomial_contract",
            Error::NonInvertible => "non_invertible",
            Error::Nondegeneracy(_) => "nondegeneracy",
            Error::WrongPath(_) => "wrong_path",
            Error::Construction(_) => "construction",
            Error::Verification { .. } => "verification",
            Error::Parse(_) => "parse",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
