use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the pipeline.
///
/// Structural checks compare against `atol + rtol * scale`, where `scale` is
/// the max-norm of the matrix under test. Spectral thresholds are relative to
/// `1 + ‖K‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Eigenvalues closer than `cluster * (1 + ‖K‖)` are merged.
    pub cluster: f64,
    /// Backward-error level used to widen clusters that come from defective
    /// eigenvalues: a group of `m` eigenvalues may spread by `defect^(1/m)`.
    pub defect: f64,
    /// Relative threshold for numerical rank decisions.
    pub rank: f64,
    /// Relative threshold below which a symplectic pairing counts as zero.
    pub alpha_zero: f64,
    /// Largest acceptable condition estimate for a transform.
    pub condition_limit: f64,
    /// Relative tolerance for the final block-structure verification.
    pub verify: f64,
    /// Relative tolerance for the symplectic condition.
    pub symplectic: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            cluster: 1e-7,
            defect: 1e-14,
            rank: 1e-9,
            alpha_zero: 1e-9,
            condition_limit: 1e12,
            verify: 1e-7,
            symplectic: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn structural(&self, scale: f64) -> f64 {
        self.atol + self.rtol * scale
    }
}

/// Options for [`crate::normal_form`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub tolerances: Tolerances,
    /// Take the simplified path when the spectrum is imaginary and diagonalizable.
    pub bogoliubov_fast_path: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self { tolerances: Tolerances::default(), bogoliubov_fast_path: true }
    }
}
