//! Phase-space matrices: the symplectic form, the equation-of-motion matrix,
//! canonical transforms and their bosonic representation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{condition_estimate, max_abs, CMat};
use crate::spectrum::Case;

/// Real symmetric `2N×2N` matrix `M` of `H = ½ Rᵀ M R`, with `R = (x₁..x_N, p₁..p_N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    n_modes: usize,
    entries: DMatrix<f64>,
}

impl HamiltonianMatrix {
    /// Validates shape and symmetry, then stores the symmetric part.
    pub fn new(entries: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let n_modes = mode_count(&entries)?;
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Structure("matrix has non-finite entries".into()));
        }
        let residual = max_abs(&(&entries - entries.transpose()));
        let tolerance = tol.structural(max_abs(&entries));
        if residual > tolerance {
            return Err(Error::NotSymmetric { residual, tolerance });
        }
        let entries = (&entries + entries.transpose()) * 0.5;
        Ok(Self { n_modes, entries })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

fn mode_count(m: &DMatrix<f64>) -> Result<usize> {
    let (rows, cols) = m.shape();
    if rows != cols {
        return Err(Error::InvalidDimension(format!("matrix is {rows}×{cols}, not square")));
    }
    if rows == 0 || rows % 2 != 0 {
        return Err(Error::InvalidDimension(format!("dimension {rows} is not a positive even number")));
    }
    Ok(rows / 2)
}

/// The standard form `J = [[0, I], [−I, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n_modes: usize,
    entries: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

pub fn standard_symplectic_form(n_modes: usize) -> Result<SymplecticForm> {
    if n_modes == 0 {
        return Err(Error::InvalidDimension("mode count must be at least 1".into()));
    }
    Ok(SymplecticForm { n_modes, entries: j_matrix(n_modes) })
}

pub(crate) fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, i + n)] = 1.0;
        j[(i + n, i)] = -1.0;
    }
    j
}

/// `K = J M`, the generator of the Heisenberg dynamics `R(t) = exp(Kt) R(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquationOfMotionMatrix {
    entries: DMatrix<f64>,
}

impl EquationOfMotionMatrix {
    /// Wraps `K` after checking the Hamiltonian structure `JK + KᵀJ = 0`.
    pub fn new(entries: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        let diagnostics = validate_eom_structure(&entries, tol.structural(max_abs(&entries)))?;
        if !diagnostics.passed {
            return Err(Error::Structure(format!(
                "matrix is not Hamiltonian: ‖JK + KᵀJ‖ = {:.3e}",
                diagnostics.hamiltonian_residual
            )));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    /// Frobenius norm, used as the scale of spectral thresholds.
    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }
}

pub fn build_eom(m: &HamiltonianMatrix) -> EquationOfMotionMatrix {
    EquationOfMotionMatrix { entries: j_matrix(m.n_modes) * &m.entries }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureDiagnostics {
    /// `‖JK + KᵀJ‖_max`
    pub hamiltonian_residual: f64,
    /// `‖A_R − A_Rᵀ‖_max` for the upper-right block.
    pub upper_right_asymmetry: f64,
    /// `‖A_L − A_Lᵀ‖_max` for the lower-left block.
    pub lower_left_asymmetry: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn validate_eom_structure(k: &DMatrix<f64>, tol: f64) -> Result<StructureDiagnostics> {
    let n = mode_count(k)?;
    let j = j_matrix(n);
    let hamiltonian_residual = max_abs(&(&j * k + k.transpose() * &j));
    let upper_right = k.view((0, n), (n, n));
    let lower_left = k.view((n, 0), (n, n));
    let upper_right_asymmetry = max_abs(&(upper_right - upper_right.transpose()));
    let lower_left_asymmetry = max_abs(&(lower_left - lower_left.transpose()));
    let passed = hamiltonian_residual <= tol && upper_right_asymmetry <= tol && lower_left_asymmetry <= tol;
    Ok(StructureDiagnostics {
        hamiltonian_residual,
        upper_right_asymmetry,
        lower_left_asymmetry,
        tolerance: tol,
        passed,
    })
}

/// Label of one normal mode: which case and eigenvalue its column pair came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeLabel {
    pub case: Case,
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub eigenvalue: Complex64,
    pub rank: usize,
}

/// Real canonical transform `T = (T₊ T₋)`; column `k` of `T₊` and of `T₋`
/// belong to mode `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalTransform {
    entries: DMatrix<f64>,
    layout: Vec<ModeLabel>,
}

impl CanonicalTransform {
    pub fn new(entries: DMatrix<f64>, layout: Vec<ModeLabel>) -> Result<Self> {
        let n = mode_count(&entries)?;
        if !layout.is_empty() && layout.len() != n {
            return Err(Error::InvalidDimension(format!("layout describes {} modes, transform has {n}", layout.len())));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Construction("transform has non-finite entries".into()));
        }
        Ok(Self { entries, layout })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self { entries: DMatrix::identity(2 * n_modes, 2 * n_modes), layout: Vec::new() }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn layout(&self) -> &[ModeLabel] {
        &self.layout
    }

    pub fn n_modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    /// `‖T J Tᵀ − J‖_max`
    pub fn symplectic_residual(&self) -> f64 {
        let j = j_matrix(self.n_modes());
        max_abs(&(&self.entries * &j * self.entries.transpose() - j))
    }

    /// Tolerance the symplectic condition is held to: `tol·(1 + ‖T‖²_max)`.
    pub fn symplectic_tolerance(&self, tol: &Tolerances) -> f64 {
        tol.symplectic * (1.0 + max_abs(&self.entries).powi(2))
    }

    /// Inverse via `T⁻¹ = −J Tᵀ J`.
    pub fn symplectic_inverse(&self) -> DMatrix<f64> {
        let j = j_matrix(self.n_modes());
        -(&j * self.entries.transpose() * &j)
    }
}

pub fn transform_hamiltonian(
    m: &HamiltonianMatrix,
    t: &CanonicalTransform,
    tol: &Tolerances,
) -> Result<HamiltonianMatrix> {
    check_dims(m.n_modes, t.n_modes())?;
    let residual = t.symplectic_residual();
    let tolerance = t.symplectic_tolerance(tol);
    if residual > tolerance {
        return Err(Error::NotSymplectic { residual, tolerance });
    }
    let n = t.entries.transpose() * &m.entries * &t.entries;
    let n = (&n + n.transpose()) * 0.5;
    Ok(HamiltonianMatrix { n_modes: m.n_modes, entries: n })
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidDimension(format!("mode counts differ: {a} vs {b}")));
    }
    Ok(())
}

/// `T⁻¹ K T`, refusing transforms whose condition estimate exceeds the limit.
pub fn similarity(
    k: &EquationOfMotionMatrix,
    t: &CanonicalTransform,
    tol: &Tolerances,
) -> Result<EquationOfMotionMatrix> {
    check_dims(k.n_modes(), t.n_modes())?;
    let condition = condition_estimate(&t.entries);
    if !(condition <= tol.condition_limit) {
        return Err(Error::IllConditioned { condition });
    }
    let inverse = t.entries.clone().lu().try_inverse().ok_or(Error::IllConditioned { condition: f64::INFINITY })?;
    Ok(EquationOfMotionMatrix { entries: inverse * &k.entries * &t.entries })
}

/// `T_C = G† T G` in the `(b, b†)` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonicTransform {
    entries: CMat,
}

impl BosonicTransform {
    pub fn entries(&self) -> &CMat {
        &self.entries
    }
}

/// The unitary `G = (1/√2) [[I, I], [−iI, iI]]` with `R = G (b, b†)`.
pub fn bosonic_unitary(n_modes: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut g = CMat::zeros(2 * n_modes, 2 * n_modes);
    for i in 0..n_modes {
        g[(i, i)] = Complex64::new(s, 0.0);
        g[(i, i + n_modes)] = Complex64::new(s, 0.0);
        g[(i + n_modes, i)] = Complex64::new(0.0, -s);
        g[(i + n_modes, i + n_modes)] = Complex64::new(0.0, s);
    }
    g
}

pub fn to_bosonic(t: &CanonicalTransform) -> BosonicTransform {
    let g = bosonic_unitary(t.n_modes());
    let t_c = crate::linalg::complexify(&t.entries);
    BosonicTransform { entries: g.adjoint() * t_c * g }
}

/// `exp(K t)` by scaling and squaring with a Padé approximant.
pub fn propagate(k: &EquationOfMotionMatrix, t: f64) -> Result<DMatrix<f64>> {
    if !t.is_finite() {
        return Err(Error::InvalidDimension("time must be finite".into()));
    }
    let scaled = &k.entries * t;
    let norm_estimate = scaled.norm();
    let result = scaled.exp();
    if result.iter().any(|x| !x.is_finite()) {
        return Err(Error::Overflow { norm_estimate: norm_estimate.exp() });
    }
    Ok(result)
}

/// Number of time samples used by [`stability_oracle`].
const ORACLE_SAMPLES: usize = 500;

/// Independent boundedness check by direct time evolution.
///
/// Samples `‖exp(Kt)‖₂` on a uniform grid over `[0, t_max]` and reports
/// bounded when the supremum over the whole window exceeds the supremum over
/// the first fifth by at most `growth_threshold`. Comparing against the early
/// window removes the dependence on the transient amplitude, which for stable
/// but strongly non-normal `K` can exceed any fixed absolute bound.
pub fn stability_oracle(k: &EquationOfMotionMatrix, t_max: f64, growth_threshold: f64) -> bool {
    let dim = k.entries.nrows();
    let step = match propagate(k, t_max / ORACLE_SAMPLES as f64) {
        Ok(step) => step,
        Err(_) => return false,
    };
    let mut state = DMatrix::<f64>::identity(dim, dim);
    let mut early = 0.0f64;
    let mut overall = 0.0f64;
    for i in 0..=ORACLE_SAMPLES {
        let norm = spectral_norm(&state);
        if !norm.is_finite() {
            return false;
        }
        if i <= ORACLE_SAMPLES / 5 {
            early = early.max(norm);
        }
        overall = overall.max(norm);
        state = &state * &step;
    }
    overall <= growth_threshold * early
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}
