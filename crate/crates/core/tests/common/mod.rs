//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qhnf::config::Tolerances;
use qhnf::linalg::{null_space, CMat, CVec};
use qhnf::normal_form::{assemble_normal_form, NormalFormBlock};
use qhnf::quadratic::{EquationOfMotionMatrix, HamiltonianMatrix};
use qhnf::spectrum::Case;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn j_matrix(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, i + n)] = 1.0;
        j[(i + n, i)] = -1.0;
    }
    j
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Symmetric `2N×2N` matrix with entries uniform in `[-bound, bound]`.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n_modes: usize, bound: f64) -> DMatrix<f64> {
    let d = 2 * n_modes;
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = rng.gen_range(-bound..=bound);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// `AᵀA + shift·I` with `A` uniform in `[-1, 1]`.
pub fn random_positive_definite(rng: &mut ChaCha8Rng, n_modes: usize, shift: f64) -> DMatrix<f64> {
    let d = 2 * n_modes;
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..=1.0));
    a.transpose() * &a + DMatrix::identity(d, d) * shift
}

pub fn hamiltonian(m: DMatrix<f64>) -> HamiltonianMatrix {
    HamiltonianMatrix::new(m, &Tolerances::default()).expect("valid test matrix")
}

/// Symplectic frequencies of a positive-definite `M`, from the Hermitian
/// matrix `i S J S` with `S = M^{1/2}`; its spectrum is `±ν`. Ascending.
pub fn symplectic_frequencies(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows() / 2;
    let eig = SymmetricEigen::new(m.clone());
    let root =
        &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
    let h = (&root * j_matrix(n) * &root).map(|x| c(0.0, x));
    let values = SymmetricEigen::new(h).eigenvalues;
    let mut nu: Vec<f64> = values.iter().cloned().filter(|&v| v > 0.0).collect();
    nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nu
}

/// A random real symplectic matrix `exp(J A)` with `A` symmetric of scale
/// `spread`.
pub fn random_symplectic(rng: &mut ChaCha8Rng, n_modes: usize, spread: f64) -> DMatrix<f64> {
    let a = random_symmetric(rng, n_modes, spread);
    (j_matrix(n_modes) * a).exp()
}

/// One synthetic eigenvalue family for the algebra identities.
#[derive(Debug, Clone, Copy)]
pub struct Family {
    pub case: Case,
    pub eigenvalue: Complex64,
    pub rank: usize,
    pub sigma: Option<Complex64>,
}

/// Families covering every case, used to build `K_N` from block templates.
pub fn families() -> Vec<Family> {
    vec![
        Family { case: Case::Real, eigenvalue: c(1.3, 0.0), rank: 2, sigma: None },
        Family { case: Case::Real, eigenvalue: c(0.7, 0.0), rank: 3, sigma: None },
        Family { case: Case::Quadruplet, eigenvalue: c(0.4, 1.1), rank: 2, sigma: None },
        Family { case: Case::ZeroEven, eigenvalue: c(0.0, 0.0), rank: 2, sigma: Some(c(1.0, 0.0)) },
        Family { case: Case::ZeroEven, eigenvalue: c(0.0, 0.0), rank: 4, sigma: Some(c(-1.0, 0.0)) },
        Family { case: Case::ZeroOdd, eigenvalue: c(0.0, 0.0), rank: 3, sigma: None },
        Family { case: Case::ImaginaryEven, eigenvalue: c(0.0, 1.7), rank: 2, sigma: Some(c(1.0, 0.0)) },
        Family { case: Case::ImaginaryOdd, eigenvalue: c(0.0, 0.9), rank: 3, sigma: Some(c(0.0, -1.0)) },
        Family { case: Case::ImaginaryOdd, eigenvalue: c(0.0, 2.2), rank: 1, sigma: Some(c(0.0, 1.0)) },
    ]
}

/// `K = S K_N S⁻¹` for a single family, with a random symplectic `S`.
pub fn synthetic_eom(rng: &mut ChaCha8Rng, family: Family) -> EquationOfMotionMatrix {
    let block = NormalFormBlock::template(family.case, family.eigenvalue, family.rank, family.sigma, 0);
    let n = block.mode_count;
    let kn = assemble_normal_form(&[block], n);
    let s = random_symplectic(rng, n, 0.3);
    let s_inv = -(j_matrix(n) * s.transpose() * j_matrix(n));
    EquationOfMotionMatrix::new(&s * kn * s_inv, &Tolerances::default()).expect("Hamiltonian by construction")
}

/// Random unit vector in `ker (K − λ)^rank`.
pub fn random_generalized_eigenvector(
    rng: &mut ChaCha8Rng,
    k: &EquationOfMotionMatrix,
    lambda: Complex64,
    rank: usize,
) -> CVec {
    let d = k.entries().nrows();
    let shifted = k.entries().map(|x| c(x, 0.0)) - CMat::identity(d, d) * lambda;
    let mut power = CMat::identity(d, d);
    for _ in 0..rank {
        power = &power * &shifted;
    }
    let threshold = 1e-8 * (1.0 + power.norm());
    let (basis, _) = null_space(&power, threshold, d);
    assert!(basis.ncols() > 0, "empty generalized eigenspace at {lambda}");
    let weights = CVec::from_fn(basis.ncols(), |_, _| c(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
    let v = basis * weights;
    let norm = v.norm();
    v / c(norm, 0.0)
}

pub fn random_coefficients(rng: &mut ChaCha8Rng, len: usize, lead_floor: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| loop {
            let z = c(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            if i > 0 || z.norm() >= lead_floor {
                break z;
            }
        })
        .collect()
}
