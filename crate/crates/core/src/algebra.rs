//! Truncated polynomials in the nilpotent operator `K − λ`, the generalized
//! symplectic Gram polynomial Ω, and the symplectic orthonormalization of
//! Jordan chains for every case.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{symplectic_gram, symplectic_product, CMat, CVec};
use crate::quadratic::EquationOfMotionMatrix;
use crate::spectrum::{Case, ClassChains, EigenvalueClass, EigenvalueKind, JordanChain};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `Φ_λ = Σ_{k=1}^{D} φ_k (K − λ)^{k−1}`, stored by its coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct NilpotentPolynomial {
    eigenvalue: Complex64,
    coefficients: Vec<Complex64>,
}

impl NilpotentPolynomial {
    pub fn new(eigenvalue: Complex64, coefficients: Vec<Complex64>) -> Self {
        Self { eigenvalue, coefficients }
    }

    pub fn from_real(eigenvalue: Complex64, coefficients: &[f64]) -> Self {
        Self::new(eigenvalue, coefficients.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn identity(eigenvalue: Complex64, rank_bound: usize) -> Self {
        let mut coefficients = vec![ZERO; rank_bound];
        if rank_bound > 0 {
            coefficients[0] = ONE;
        }
        Self { eigenvalue, coefficients }
    }

    pub fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn rank_bound(&self) -> usize {
        self.coefficients.len()
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self::new(self.eigenvalue, self.coefficients.iter().map(|c| c * factor).collect())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.eigenvalue != other.eigenvalue || self.rank_bound() != other.rank_bound() {
            return Err(Error::PolynomialContract(format!(
                "operands differ: (λ = {}, D = {}) vs (λ = {}, D = {})",
                self.eigenvalue,
                self.rank_bound(),
                other.eigenvalue,
                other.rank_bound()
            )));
        }
        Ok(())
    }
}

/// Coefficient convolution `χ_k = Σ_{l=1}^{k} φ_l θ_{k+1−l}`.
pub fn poly_product(a: &NilpotentPolynomial, b: &NilpotentPolynomial) -> Result<NilpotentPolynomial> {
    a.check_compatible(b)?;
    Ok(NilpotentPolynomial::new(a.eigenvalue, convolve(&a.coefficients, &b.coefficients)))
}

fn convolve(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    (0..a.len()).map(|k| (0..=k).map(|l| a[l] * b[k - l]).sum()).collect()
}

/// Principal square root of a complex number, taking `+i√x` on the negative
/// real axis regardless of the sign of zero in the imaginary part.
fn principal_sqrt(z: Complex64) -> Complex64 {
    if z.im == 0.0 && z.re < 0.0 {
        Complex64::new(0.0, (-z.re).sqrt())
    } else {
        z.sqrt()
    }
}

/// `Φ` with `Φ·Φ = w`, leading coefficient on the principal branch.
pub fn poly_sqrt(w: &NilpotentPolynomial) -> Result<NilpotentPolynomial> {
    let c = &w.coefficients;
    if c.is_empty() || c[0] == ZERO {
        return Err(Error::NonInvertible);
    }
    let mut phi = vec![ZERO; c.len()];
    phi[0] = principal_sqrt(c[0]);
    for k in 1..c.len() {
        let cross: Complex64 = (1..k).map(|l| phi[l] * phi[k - l]).sum();
        phi[k] = (c[k] - cross) / (phi[0] * 2.0);
    }
    Ok(NilpotentPolynomial::new(w.eigenvalue, phi))
}

/// Multiplicative inverse in the truncated algebra.
pub fn poly_inverse(p: &NilpotentPolynomial) -> Result<NilpotentPolynomial> {
    let c = &p.coefficients;
    if c.is_empty() || c[0] == ZERO {
        return Err(Error::NonInvertible);
    }
    let mut q = vec![ZERO; c.len()];
    q[0] = ONE / c[0];
    for k in 1..c.len() {
        let acc: Complex64 = (1..=k).map(|l| c[l] * q[k - l]).sum();
        q[k] = -acc / c[0];
    }
    Ok(NilpotentPolynomial::new(p.eigenvalue, q))
}

fn conjugates_under_star(lambda: Complex64) -> bool {
    lambda.re == 0.0 && lambda.im != 0.0
}

/// `φ̃_k (−1)^{k−1}`, with `φ̃ = φ̄` for imaginary `λ` and `φ̃ = φ` otherwise.
pub fn poly_star(p: &NilpotentPolynomial) -> NilpotentPolynomial {
    let conj = conjugates_under_star(p.eigenvalue);
    NilpotentPolynomial::new(
        p.eigenvalue,
        p.coefficients
            .iter()
            .enumerate()
            .map(|(k, &c)| {
                let c = if conj { c.conj() } else { c };
                if k % 2 == 1 {
                    -c
                } else {
                    c
                }
            })
            .collect(),
    )
}

/// Sign alternation without conjugation: the operator that `Φ_{−λ}` becomes
/// when moved across the bilinear form.
fn alternate(p: &NilpotentPolynomial) -> NilpotentPolynomial {
    NilpotentPolynomial::new(
        p.eigenvalue,
        p.coefficients.iter().enumerate().map(|(k, &c)| if k % 2 == 1 { -c } else { c }).collect(),
    )
}

/// `K x` for real `K` and complex `x`.
fn k_times(k: &DMatrix<f64>, x: &CVec) -> CVec {
    let re = k * x.map(|z| z.re);
    let im = k * x.map(|z| z.im);
    CVec::from_fn(x.len(), |i, _| Complex64::new(re[i], im[i]))
}

/// `(K − λ) x`
pub(crate) fn shift(k: &EquationOfMotionMatrix, lambda: Complex64, x: &CVec) -> CVec {
    k_times(k.entries(), x) - x * lambda
}

/// `[x, (K−λ)x, …, (K−λ)^{n−1} x]`
pub(crate) fn powers(k: &EquationOfMotionMatrix, lambda: Complex64, x: &CVec, n: usize) -> Vec<CVec> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(x.clone());
    for _ in 1..n {
        let next = shift(k, lambda, out.last().expect("non-empty"));
        out.push(next);
    }
    out
}

/// `Σ φ_k (K − λ)^{k−1} x`, by Horner's rule.
pub fn apply_poly(p: &NilpotentPolynomial, k: &EquationOfMotionMatrix, x: &CVec) -> CVec {
    apply_at(p, p.eigenvalue, k, x)
}

/// Applies the coefficients of `p` as a polynomial in `K − shift_point`.
fn apply_at(p: &NilpotentPolynomial, shift_point: Complex64, k: &EquationOfMotionMatrix, x: &CVec) -> CVec {
    let mut acc = CVec::zeros(x.len());
    for &c in p.coefficients.iter().rev() {
        acc = shift(k, shift_point, &acc) + x * c;
    }
    acc
}

/// Coefficients `ω_k = [(K − λ)^{D−k} x]ᵀ J y`, `k = 1..D`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticGram {
    pub eigenvalue: Complex64,
    pub coefficients: Vec<Complex64>,
}

impl SymplecticGram {
    /// The α form, `ω₁`.
    pub fn alpha(&self) -> Complex64 {
        self.coefficients[0]
    }

    pub fn as_polynomial(&self) -> NilpotentPolynomial {
        NilpotentPolynomial::new(self.eigenvalue, self.coefficients.clone())
    }
}

pub fn omega(k: &EquationOfMotionMatrix, lambda: Complex64, x: &CVec, rank: usize, y: &CVec) -> SymplecticGram {
    let chain = powers(k, lambda, x, rank);
    let coefficients = (1..=rank).map(|j| symplectic_product(&chain[rank - j], y)).collect();
    SymplecticGram { eigenvalue: lambda, coefficients }
}

/// `[(K − λ)^{D−1} x]ᵀ J y`
pub fn alpha(k: &EquationOfMotionMatrix, lambda: Complex64, x: &CVec, rank: usize, y: &CVec) -> Complex64 {
    let top = powers(k, lambda, x, rank).pop().expect("rank ≥ 1");
    symplectic_product(&top, y)
}

/// Symplectically normalized vectors of one chain (or chain pair).
#[derive(Debug, Clone, PartialEq)]
pub enum OrthonormalBlock {
    /// Real pairs and quadruplets: `Ω_λ(e, ẽ) = 1`, `ẽ ∈ H(−λ)`.
    Paired { case: Case, eigenvalue: Complex64, rank: usize, e: CVec, partner: CVec },
    /// Zero eigenvalue, even rank: `Ω₀(e, e) = σ` with `σ = ±1`.
    SelfPaired { rank: usize, sigma: f64, e: CVec },
    /// Zero eigenvalue, two odd-rank chains: `Ω₀(f, h) = 1`, `Ω₀(f, f) = Ω₀(h, h) = 0`.
    ZeroPair { rank: usize, f: CVec, h: CVec },
    /// Imaginary pairs: `Ω_λ(e, ē) = σ`, `σ = ±1` for even and `±i` for odd rank.
    Conjugate { case: Case, eigenvalue: Complex64, rank: usize, sigma: Complex64, e: CVec },
}

impl OrthonormalBlock {
    pub fn case(&self) -> Case {
        match self {
            OrthonormalBlock::Paired { case, .. } | OrthonormalBlock::Conjugate { case, .. } => *case,
            OrthonormalBlock::SelfPaired { .. } => Case::ZeroEven,
            OrthonormalBlock::ZeroPair { .. } => Case::ZeroOdd,
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            OrthonormalBlock::Paired { rank, .. }
            | OrthonormalBlock::SelfPaired { rank, .. }
            | OrthonormalBlock::ZeroPair { rank, .. }
            | OrthonormalBlock::Conjugate { rank, .. } => *rank,
        }
    }

    pub fn eigenvalue(&self) -> Complex64 {
        match self {
            OrthonormalBlock::Paired { eigenvalue, .. } | OrthonormalBlock::Conjugate { eigenvalue, .. } => *eigenvalue,
            _ => ZERO,
        }
    }

    /// `σ` of even-rank zero chains and of imaginary chains.
    pub fn sigma(&self) -> Option<Complex64> {
        match self {
            OrthonormalBlock::SelfPaired { sigma, .. } => Some(Complex64::new(*sigma, 0.0)),
            OrthonormalBlock::Conjugate { sigma, .. } => Some(*sigma),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalizedSet {
    pub class: EigenvalueClass,
    pub blocks: Vec<OrthonormalBlock>,
}

/// Serializable summary of an orthonormalized block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSummary {
    pub case: Case,
    pub rank: usize,
}

/// A chain generator still waiting to be orthonormalized.
#[derive(Debug, Clone)]
struct Pending {
    vector: CVec,
    rank: usize,
}

fn pending(chains: &[JordanChain]) -> Vec<Pending> {
    chains.iter().map(|c| Pending { vector: c.generator.clone(), rank: c.rank }).collect()
}

fn max_rank(list: &[Pending]) -> usize {
    list.iter().map(|p| p.rank).max().unwrap_or(0)
}

/// `|α|` scaled by the norms entering it, so the zero test is relative.
fn relative_alpha(k: &EquationOfMotionMatrix, lambda: Complex64, x: &CVec, rank: usize, y: &CVec) -> (Complex64, f64) {
    let top = powers(k, lambda, x, rank).pop().expect("rank ≥ 1");
    let a = symplectic_product(&top, y);
    let scale = top.norm() * y.norm();
    (a, if scale > 0.0 { a.norm() / scale } else { 0.0 })
}

/// Chain matrix `[x, (K−λ)x, …, (K−λ)^{D−1} x]` for several generators.
fn chain_matrix(k: &EquationOfMotionMatrix, lambda: Complex64, vectors: &[(&CVec, usize)]) -> CMat {
    let cols: Vec<CVec> = vectors.iter().flat_map(|(v, rank)| powers(k, lambda, v, *rank)).collect();
    CMat::from_columns(&cols)
}

/// Removes from `x` its component along span(`c`), using the pairing with
/// span(`partner`): afterwards `xᵀ J partner = 0`.
fn deflate(c: &CMat, partner: &CMat, x: &CVec) -> Result<CVec> {
    // (x − C a)ᵀ J P = 0  ⇔  (Pᵀ Jᵀ C) a = Pᵀ Jᵀ x, and Pᵀ Jᵀ = −(Jᵀ... ) so use the gram of (P, ·)
    let h = symplectic_gram(partner, c); // Pᵀ J C = −(Cᵀ J P)ᵀ
    let rhs = CVec::from_fn(partner.ncols(), |i, _| symplectic_product(&partner.column(i).into_owned(), x));
    let coeffs =
        h.lu().solve(&rhs).ok_or_else(|| Error::Nondegeneracy("Gram matrix of a finished block is singular".into()))?;
    Ok(x - c * coeffs)
}

fn nondegenerate(context: &str, rank: usize) -> Error {
    Error::Nondegeneracy(format!("no chain pair of rank {rank} with nonzero pairing ({context})"))
}

/// Normalizes the generators of a real pair or quadruplet against their
/// partners at `−λ` so that `Ω_λ(e_j, ẽ_j′) = δ_jj′`.
pub fn orthonormalize_real_complex(
    k: &EquationOfMotionMatrix,
    entry: &ClassChains,
    tol: &Tolerances,
) -> Result<OrthonormalizedSet> {
    let lambda = entry.class.representative;
    let case = match entry.class.kind {
        EigenvalueKind::RealPair => Case::Real,
        EigenvalueKind::ComplexQuadruplet => Case::Quadruplet,
        other => {
            return Err(Error::PolynomialContract(format!("real/complex orthonormalization applied to {other:?}")))
        }
    };
    let mut left = pending(&entry.chains);
    let mut right = pending(&entry.partners);
    let mut blocks = Vec::new();
    while !left.is_empty() {
        let d = max_rank(&left);
        let mut best: Option<(usize, usize, Complex64, f64)> = None;
        for (i, x) in left.iter().enumerate().filter(|(_, x)| x.rank == d) {
            for (j, y) in right.iter().enumerate().filter(|(_, y)| y.rank == d) {
                let (a, rel) = relative_alpha(k, lambda, &x.vector, d, &y.vector);
                if best.as_ref().map_or(true, |b| rel > b.3) {
                    best = Some((i, j, a, rel));
                }
            }
        }
        let (i, j, a, rel) = best.ok_or_else(|| nondegenerate("missing partner", d))?;
        if rel <= tol.alpha_zero {
            return Err(nondegenerate("real/complex", d));
        }
        let g = left.remove(i).vector;
        let g_partner = right.remove(j).vector / a;
        let gram = omega(k, lambda, &g, d, &g_partner).as_polynomial();
        let phi = poly_sqrt(&gram)?;
        let phi_inv = poly_inverse(&phi)?;
        let e = apply_at(&phi_inv, lambda, k, &g);
        let partner = apply_at(&poly_inverse(&alternate(&phi))?, -lambda, k, &g_partner);

        let c = chain_matrix(k, lambda, &[(&e, d)]);
        let c_partner = chain_matrix(k, -lambda, &[(&partner, d)]);
        for x in &mut left {
            x.vector = deflate(&c, &c_partner, &x.vector)?;
        }
        for y in &mut right {
            y.vector = deflate(&c_partner, &c, &y.vector)?;
        }
        blocks.push(OrthonormalBlock::Paired { case, eigenvalue: lambda, rank: d, e, partner });
    }
    Ok(OrthonormalizedSet { class: entry.class, blocks })
}

/// Ω-normalization of a zero-eigenvalue pair `(e1, e2)` of odd rank into
/// `(f, h)` with `Ω(f, h) = 1` and `Ω(f, f) = Ω(h, h) = 0`.
fn zero_odd_pair(k: &EquationOfMotionMatrix, e1: &CVec, e2: &CVec, rank: usize, a: Complex64) -> Result<(CVec, CVec)> {
    let normalize = |x: &CVec, y: &CVec| -> Result<(CVec, CVec)> {
        let gram = omega(k, ZERO, x, rank, y).as_polynomial();
        let phi = poly_sqrt(&gram)?;
        let x = apply_poly(&poly_inverse(&phi)?, k, x);
        let y = apply_poly(&poly_inverse(&alternate(&phi))?, k, y);
        Ok((x, y))
    };
    let (e1, e2) = normalize(e1, &(e2 / a))?;
    let w11 = omega(k, ZERO, &e1, rank, &e1).as_polynomial();
    let w22 = omega(k, ZERO, &e2, rank, &e2).as_polynomial();
    // Ω11 − 2Ψ − Ψ²Ω22 = 0, solved order by order with ψ₁ = 0.
    let mut psi = NilpotentPolynomial::new(ZERO, vec![ZERO; rank]);
    for idx in 1..rank {
        let sq = poly_product(&psi, &psi)?;
        let quad = poly_product(&sq, &w22)?;
        psi.coefficients[idx] = (w11.coefficients[idx] - quad.coefficients[idx]) * 0.5;
    }
    let f = &e1 + apply_poly(&psi, k, &e2);
    let (f, e2) = normalize(&f, &e2)?;
    let w22 = omega(k, ZERO, &e2, rank, &e2).as_polynomial();
    let h = &e2 - apply_poly(&w22.scaled(Complex64::new(0.5, 0.0)), k, &f);
    Ok((f, h))
}

fn pick_pair<F>(list: &[Pending], rank: usize, mut score: F) -> Option<(usize, usize, Complex64, f64)>
where
    F: FnMut(&Pending, &Pending) -> (Complex64, f64),
{
    let mut best: Option<(usize, usize, Complex64, f64)> = None;
    for i in 0..list.len() {
        for j in (i + 1)..list.len() {
            if list[i].rank != rank || list[j].rank != rank {
                continue;
            }
            let (a, rel) = score(&list[i], &list[j]);
            if best.as_ref().map_or(true, |b| rel > b.3) {
                best = Some((i, j, a, rel));
            }
        }
    }
    best
}

fn pick_self<F>(list: &[Pending], rank: usize, mut score: F) -> Option<(usize, Complex64, f64)>
where
    F: FnMut(&Pending) -> (Complex64, f64),
{
    let mut best: Option<(usize, Complex64, f64)> = None;
    for (i, x) in list.iter().enumerate().filter(|(_, x)| x.rank == rank) {
        let (a, rel) = score(x);
        if best.as_ref().map_or(true, |b| rel > b.2) {
            best = Some((i, a, rel));
        }
    }
    best
}

/// Orthonormalizes all chains of the zero eigenvalue: even-rank chains become
/// self-paired vectors with `σ = ±1`, odd-rank chains are paired into `(f, h)`.
pub fn orthonormalize_zero(
    k: &EquationOfMotionMatrix,
    entry: &ClassChains,
    tol: &Tolerances,
) -> Result<OrthonormalizedSet> {
    if entry.class.kind != EigenvalueKind::Zero {
        return Err(Error::PolynomialContract("zero orthonormalization needs the zero class".into()));
    }
    let mut list = pending(&entry.chains);
    let mut blocks = Vec::new();
    while !list.is_empty() {
        let d = max_rank(&list);
        let self_score = |x: &Pending| relative_alpha(k, ZERO, &x.vector, d, &x.vector);
        let cross_score = |x: &Pending, y: &Pending| relative_alpha(k, ZERO, &x.vector, d, &y.vector);
        let finished: CMat;
        if d % 2 == 0 {
            let (i, a, rel) = pick_self(&list, d, self_score).expect("a chain of maximal rank exists");
            if rel <= tol.alpha_zero {
                let (i, j, _, rel) =
                    pick_pair(&list, d, cross_score).ok_or_else(|| nondegenerate("zero, even rank", d))?;
                if rel <= tol.alpha_zero {
                    return Err(nondegenerate("zero, even rank", d));
                }
                let (gi, gj) = (list[i].vector.clone(), list[j].vector.clone());
                list[i].vector = &gi + &gj;
                list[j].vector = &gi - &gj;
                continue;
            }
            let sigma = a.re.signum();
            let g = list.remove(i).vector;
            let gram = omega(k, ZERO, &g, d, &g).as_polynomial().scaled(Complex64::new(sigma, 0.0));
            let e = apply_poly(&poly_inverse(&poly_sqrt(&gram)?)?, k, &g);
            finished = chain_matrix(k, ZERO, &[(&e, d)]);
            blocks.push(OrthonormalBlock::SelfPaired { rank: d, sigma, e });
        } else {
            let (i, j, a, rel) =
                pick_pair(&list, d, cross_score).ok_or_else(|| nondegenerate("zero, odd rank: unpaired chain", d))?;
            if rel <= tol.alpha_zero {
                return Err(nondegenerate("zero, odd rank", d));
            }
            let g2 = list.remove(j).vector;
            let g1 = list.remove(i).vector;
            let (f, h) = zero_odd_pair(k, &g1, &g2, d, a)?;
            finished = chain_matrix(k, ZERO, &[(&f, d), (&h, d)]);
            blocks.push(OrthonormalBlock::ZeroPair { rank: d, f, h });
        }
        for x in &mut list {
            x.vector = deflate(&finished, &finished, &x.vector)?;
        }
    }
    Ok(OrthonormalizedSet { class: entry.class, blocks })
}

/// Pairs odd-rank zero-eigenvalue chains into `(f, h)` blocks.
pub fn zero_odd_pairing(
    k: &EquationOfMotionMatrix,
    entry: &ClassChains,
    tol: &Tolerances,
) -> Result<OrthonormalizedSet> {
    if entry.chains.iter().any(|c| c.rank % 2 == 0) {
        return Err(Error::PolynomialContract("zero_odd_pairing received an even-rank chain".into()));
    }
    orthonormalize_zero(k, entry, tol)
}

/// `σ` from the leading pairing of an imaginary-eigenvalue chain.
fn imaginary_sigma(a: Complex64, rank: usize) -> Complex64 {
    if rank % 2 == 0 {
        Complex64::new(a.re.signum(), 0.0)
    } else {
        Complex64::new(0.0, a.im.signum())
    }
}

/// Replaces `(x, y)` by `(x + φy, x − φy)` with the phase `φ ∈ {1, i}` that
/// gives the larger self-pairing, for chains whose self-pairings vanish.
fn conjugate_superposition(
    k: &EquationOfMotionMatrix,
    lambda: Complex64,
    x: &CVec,
    y: &CVec,
    rank: usize,
) -> (CVec, CVec) {
    let candidates = [ONE, I].map(|phase| {
        let s = x + y * phase;
        let a = alpha(k, lambda, &s, rank, &s.conjugate()).norm();
        (phase, a)
    });
    let phase = if candidates[1].1 > candidates[0].1 { I } else { ONE };
    (x + y * phase, x - y * phase)
}

/// Orthonormalizes the chains of an imaginary pair against their conjugates:
/// `Ω_λ(e_j, ē_j′) = δ_jj′ σ_j`.
pub fn orthonormalize_imaginary(
    k: &EquationOfMotionMatrix,
    entry: &ClassChains,
    tol: &Tolerances,
) -> Result<OrthonormalizedSet> {
    if entry.class.kind != EigenvalueKind::ImaginaryPair {
        return Err(Error::PolynomialContract("imaginary orthonormalization needs an imaginary pair".into()));
    }
    let lambda = entry.class.representative;
    let mut list = pending(&entry.chains);
    let mut blocks = Vec::new();
    while !list.is_empty() {
        let d = max_rank(&list);
        let self_score = |x: &Pending| relative_alpha(k, lambda, &x.vector, d, &x.vector.conjugate());
        let (i, a, rel) = pick_self(&list, d, self_score).expect("a chain of maximal rank exists");
        if rel <= tol.alpha_zero {
            let cross = |x: &Pending, y: &Pending| relative_alpha(k, lambda, &x.vector, d, &y.vector.conjugate());
            let (i, j, _, rel) = pick_pair(&list, d, cross).ok_or_else(|| nondegenerate("imaginary", d))?;
            if rel <= tol.alpha_zero {
                return Err(nondegenerate("imaginary", d));
            }
            let (x, y) = conjugate_superposition(k, lambda, &list[i].vector, &list[j].vector, d);
            list[i].vector = x;
            list[j].vector = y;
            continue;
        }
        let sigma = imaginary_sigma(a, d);
        let g = list.remove(i).vector;
        let gram = omega(k, lambda, &g, d, &g.conjugate()).as_polynomial().scaled(sigma.conj());
        let e = apply_poly(&poly_inverse(&poly_sqrt(&gram)?)?, k, &g);
        let c = chain_matrix(k, lambda, &[(&e, d)]);
        let c_conj = c.conjugate();
        for x in &mut list {
            x.vector = deflate(&c, &c_conj, &x.vector)?;
        }
        let case = Case::for_chain(EigenvalueKind::ImaginaryPair, d);
        blocks.push(OrthonormalBlock::Conjugate { case, eigenvalue: lambda, rank: d, sigma, e });
    }
    Ok(OrthonormalizedSet { class: entry.class, blocks })
}

/// Orthonormalization for a diagonalizable, purely imaginary spectrum, where
/// every chain is a single eigenvector: `e = g / √(−σ α(g, ḡ))` followed by
/// deflation of the remaining eigenvectors.
pub fn bogoliubov_orthonormalize(
    k: &EquationOfMotionMatrix,
    entry: &ClassChains,
    tol: &Tolerances,
) -> Result<OrthonormalizedSet> {
    if entry.class.kind != EigenvalueKind::ImaginaryPair {
        return Err(Error::WrongPath(format!("eigenvalue {} is not purely imaginary", entry.class.representative)));
    }
    if entry.chains.iter().any(|c| c.rank != 1) {
        return Err(Error::WrongPath("spectrum is not diagonalizable".into()));
    }
    let lambda = entry.class.representative;
    let mut list = pending(&entry.chains);
    let mut blocks = Vec::new();
    let pairing = |x: &CVec, y: &CVec| symplectic_product(x, &y.conjugate());
    while !list.is_empty() {
        let score = |x: &Pending| {
            let a = pairing(&x.vector, &x.vector);
            (a, a.norm() / x.vector.norm_squared())
        };
        let (i, a, rel) = pick_self(&list, 1, score).expect("non-empty");
        if rel <= tol.alpha_zero {
            let cross = |x: &Pending, y: &Pending| {
                let a = pairing(&x.vector, &y.vector);
                (a, a.norm() / (x.vector.norm() * y.vector.norm()))
            };
            let (i, j, _, rel) = pick_pair(&list, 1, cross).ok_or_else(|| nondegenerate("Bogoliubov", 1))?;
            if rel <= tol.alpha_zero {
                return Err(nondegenerate("Bogoliubov", 1));
            }
            let (x, y) = conjugate_superposition(k, lambda, &list[i].vector, &list[j].vector, 1);
            list[i].vector = x;
            list[j].vector = y;
            continue;
        }
        let sigma = imaginary_sigma(a, 1);
        let g = list.remove(i).vector;
        let e = &g / (-sigma * a).sqrt();
        for x in &mut list {
            let c = sigma * pairing(&e, &x.vector).conj();
            x.vector -= &e * c;
        }
        blocks.push(OrthonormalBlock::Conjugate { case: Case::ImaginaryOdd, eigenvalue: lambda, rank: 1, sigma, e });
    }
    Ok(OrthonormalizedSet { class: entry.class, blocks })
}

/// Dispatches to the procedure for the class's kind.
pub fn orthonormalize(k: &EquationOfMotionMatrix, entry: &ClassChains, tol: &Tolerances) -> Result<OrthonormalizedSet> {
    match entry.class.kind {
        EigenvalueKind::RealPair | EigenvalueKind::ComplexQuadruplet => orthonormalize_real_complex(k, entry, tol),
        EigenvalueKind::Zero => orthonormalize_zero(k, entry, tol),
        EigenvalueKind::ImaginaryPair => orthonormalize_imaginary(k, entry, tol),
    }
}

/// Largest deviation of the Ω products within one set from their target
/// values (`1`, `σ` or `0` as polynomials).
pub fn orthonormality_residual(k: &EquationOfMotionMatrix, set: &OrthonormalizedSet) -> f64 {
    // (left vector, rank, right vector, target leading coefficient, block id)
    let mut lefts: Vec<(CVec, usize, usize)> = Vec::new();
    let mut rights: Vec<(CVec, usize)> = Vec::new();
    let mut targets: Vec<((usize, usize), Complex64)> = Vec::new();
    let lambda = set.class.representative;
    for (b, block) in set.blocks.iter().enumerate() {
        match block {
            OrthonormalBlock::Paired { rank, e, partner, .. } => {
                lefts.push((e.clone(), *rank, b));
                rights.push((partner.clone(), b));
                targets.push(((lefts.len() - 1, rights.len() - 1), ONE));
            }
            OrthonormalBlock::SelfPaired { rank, sigma, e } => {
                lefts.push((e.clone(), *rank, b));
                rights.push((e.clone(), b));
                targets.push(((lefts.len() - 1, rights.len() - 1), Complex64::new(*sigma, 0.0)));
            }
            OrthonormalBlock::ZeroPair { rank, f, h } => {
                lefts.push((f.clone(), *rank, b));
                lefts.push((h.clone(), *rank, b));
                rights.push((f.clone(), b));
                rights.push((h.clone(), b));
                let (lf, rf) = (lefts.len() - 2, rights.len() - 2);
                targets.push(((lf, rf + 1), ONE));
                targets.push(((lf + 1, rf), -ONE));
            }
            OrthonormalBlock::Conjugate { rank, sigma, e, .. } => {
                lefts.push((e.clone(), *rank, b));
                rights.push((e.conjugate(), b));
                targets.push(((lefts.len() - 1, rights.len() - 1), *sigma));
            }
        }
    }
    let mut worst = 0.0f64;
    for (li, (x, rank, _)) in lefts.iter().enumerate() {
        for (ri, (y, _)) in rights.iter().enumerate() {
            let gram = omega(k, lambda, x, *rank, y);
            let target = targets.iter().find(|(idx, _)| *idx == (li, ri)).map_or(ZERO, |(_, t)| *t);
            for (idx, c) in gram.coefficients.iter().enumerate() {
                let expected = if idx == 0 { target } else { ZERO };
                worst = worst.max((c - expected).norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::{build_eom, HamiltonianMatrix};
    use crate::spectrum::{analyze_spectrum, extract_chains};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn real_poly(coeffs: &[f64]) -> NilpotentPolynomial {
        NilpotentPolynomial::from_real(c(2.0, 0.0), coeffs)
    }

    fn close(a: &NilpotentPolynomial, b: &[Complex64], tol: f64) -> bool {
        a.coefficients().iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn product_examples() {
        let id = real_poly(&[1.0, 0.0]);
        assert_eq!(poly_product(&id, &id).unwrap(), id);
        let p = real_poly(&[-10.0, 13.0]);
        assert_eq!(poly_product(&p, &p).unwrap(), real_poly(&[100.0, -260.0]));
        let (a, b, cc, d) = (1.5, -2.0, 0.25, 4.0);
        let prod = poly_product(&real_poly(&[a, b]), &real_poly(&[cc, d])).unwrap();
        assert_eq!(prod, real_poly(&[a * cc, a * d + b * cc]));
    }

    #[test]
    fn product_rejects_mismatch() {
        let a = real_poly(&[1.0, 0.0]);
        let b = NilpotentPolynomial::from_real(c(3.0, 0.0), &[1.0, 0.0]);
        assert!(matches!(poly_product(&a, &b), Err(Error::PolynomialContract(_))));
        let short = real_poly(&[1.0]);
        assert!(matches!(poly_product(&a, &short), Err(Error::PolynomialContract(_))));
    }

    #[test]
    fn sqrt_examples() {
        let id = real_poly(&[1.0, 0.0, 0.0]);
        assert_eq!(poly_sqrt(&id).unwrap(), id);
        assert_eq!(poly_sqrt(&real_poly(&[4.0, 4.0])).unwrap(), real_poly(&[2.0, 1.0]));
        let w = real_poly(&[-10.0, 13.0]);
        let root = poly_sqrt(&w).unwrap();
        assert!((root.coefficients()[0] - c(0.0, 10f64.sqrt())).norm() < 1e-15);
        let back = poly_product(&root, &root).unwrap();
        assert!(close(&back, w.coefficients(), 1e-12));
        assert!(matches!(poly_sqrt(&real_poly(&[0.0, 1.0])), Err(Error::NonInvertible)));
    }

    #[test]
    fn negative_real_axis_branch() {
        let w = NilpotentPolynomial::new(c(2.0, 0.0), vec![c(-4.0, -0.0)]);
        assert_eq!(poly_sqrt(&w).unwrap().coefficients()[0], c(0.0, 2.0));
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(poly_inverse(&real_poly(&[2.0, 0.0])).unwrap(), real_poly(&[0.5, 0.0]));
        assert_eq!(poly_inverse(&real_poly(&[1.0, 3.0])).unwrap(), real_poly(&[1.0, -3.0]));
        let p = real_poly(&[-10.0, 13.0]);
        let q = poly_inverse(&p).unwrap();
        let prod = poly_product(&p, &q).unwrap();
        assert!(close(&prod, &[c(1.0, 0.0), c(0.0, 0.0)], 1e-14));
        assert!(matches!(poly_inverse(&real_poly(&[0.0, 1.0])), Err(Error::NonInvertible)));
    }

    #[test]
    fn star_examples() {
        let (a, b) = (c(1.0, 2.0), c(-3.0, 0.5));
        let real = NilpotentPolynomial::new(c(2.0, 0.0), vec![a, b]);
        assert_eq!(poly_star(&real).coefficients(), &[a, -b]);
        let imag = NilpotentPolynomial::new(c(0.0, 3.0), vec![a, b]);
        assert_eq!(poly_star(&imag).coefficients(), &[a.conj(), -b.conj()]);
        let zero = NilpotentPolynomial::new(c(0.0, 0.0), vec![a, b]);
        assert_eq!(poly_star(&zero).coefficients(), &[a, -b]);
        let r = real_poly(&[1.0, 2.0, 3.0]);
        assert_eq!(poly_star(&poly_star(&r)), r);
    }

    fn coeff_strategy(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), len)
            .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    }

    fn nonzero_lead(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        coeff_strategy(len).prop_filter("leading coefficient away from zero", |v| v[0].norm() > 0.1)
    }

    proptest! {
        #[test]
        fn product_is_commutative_and_associative(
            a in coeff_strategy(4), b in coeff_strategy(4), d in coeff_strategy(4)
        ) {
            let lam = c(0.5, 0.0);
            let (a, b, d) = (
                NilpotentPolynomial::new(lam, a),
                NilpotentPolynomial::new(lam, b),
                NilpotentPolynomial::new(lam, d),
            );
            let ab = poly_product(&a, &b).unwrap();
            let ba = poly_product(&b, &a).unwrap();
            prop_assert!(close(&ab, ba.coefficients(), 1e-12));
            let left = poly_product(&ab, &d).unwrap();
            let right = poly_product(&a, &poly_product(&b, &d).unwrap()).unwrap();
            prop_assert!(close(&left, right.coefficients(), 1e-10));
        }

        #[test]
        fn sqrt_and_inverse_round_trip(w in nonzero_lead(5)) {
            let p = NilpotentPolynomial::new(c(0.0, 1.0), w);
            let root = poly_sqrt(&p).unwrap();
            prop_assert!(root.coefficients()[0].re >= 0.0);
            let sq = poly_product(&root, &root).unwrap();
            let scale = p.coefficients().iter().map(|z| z.norm()).fold(1.0, f64::max);
            prop_assert!(close(&sq, p.coefficients(), 1e-12 * scale * scale));
            let inv = poly_inverse(&p).unwrap();
            let id = poly_product(&p, &inv).unwrap();
            let mut expected = vec![c(0.0, 0.0); 5];
            expected[0] = c(1.0, 0.0);
            let lead = p.coefficients()[0].norm();
            prop_assert!(close(&id, &expected, 1e-12 * (scale / lead).powi(5)));
        }

        #[test]
        fn star_is_multiplicative(a in coeff_strategy(4), b in coeff_strategy(4)) {
            let lam = c(0.0, 2.0);
            let a = NilpotentPolynomial::new(lam, a);
            let b = NilpotentPolynomial::new(lam, b);
            let lhs = poly_star(&poly_product(&a, &b).unwrap());
            let rhs = poly_product(&poly_star(&a), &poly_star(&b)).unwrap();
            prop_assert!(close(&lhs, rhs.coefficients(), 1e-12));
        }
    }

    fn pipeline(m: &[f64], rows: usize) -> (EquationOfMotionMatrix, Vec<ClassChains>) {
        let tol = Tolerances::default();
        let m = HamiltonianMatrix::new(DMatrix::from_row_slice(rows, rows, m), &tol).unwrap();
        let k = build_eom(&m);
        let spectrum = analyze_spectrum(&k, &tol).unwrap();
        let set = extract_chains(&k, &spectrum, &tol).unwrap();
        (k, set.entries)
    }

    fn two_mode(eta: f64, lambda: f64) -> Vec<f64> {
        vec![1.0, lambda, 0.0, 0.0, lambda, eta, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, eta]
    }

    #[test]
    fn every_two_mode_region_orthonormalizes() {
        let tol = Tolerances::default();
        for (eta, lam) in [(1.0, 0.5), (1.0, 2.0), (-1.0, 0.5), (1.0, 1.0), (0.0, 0.0), (-1.0, 0.0)] {
            let (k, entries) = pipeline(&two_mode(eta, lam), 4);
            for entry in &entries {
                let set = orthonormalize(&k, entry, &tol).unwrap();
                let r = orthonormality_residual(&k, &set);
                assert!(r < 1e-9, "({eta}, {lam}) residual {r}");
            }
        }
    }

    #[test]
    fn zero_boundary_has_positive_sigma() {
        let tol = Tolerances::default();
        let (k, entries) = pipeline(&two_mode(1.0, 1.0), 4);
        let zero = entries.iter().find(|e| e.class.kind == EigenvalueKind::Zero).unwrap();
        let set = orthonormalize_zero(&k, zero, &tol).unwrap();
        assert!(matches!(set.blocks[..], [OrthonormalBlock::SelfPaired { rank: 2, sigma, .. }] if sigma == 1.0));
    }

    #[test]
    fn special_point_signs() {
        let tol = Tolerances::default();
        let (k, entries) = pipeline(&two_mode(-1.0, 0.0), 4);
        assert_eq!(entries.len(), 1);
        let set = orthonormalize_imaginary(&k, &entries[0], &tol).unwrap();
        let mut sigmas: Vec<f64> = set.blocks.iter().map(|b| b.sigma().unwrap().im).collect();
        sigmas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(sigmas, vec![-1.0, 1.0]);
    }

    #[test]
    fn bogoliubov_on_single_oscillator() {
        let tol = Tolerances::default();
        let (k, entries) = pipeline(&[1.0, 0.0, 0.0, 1.0], 2);
        let set = bogoliubov_orthonormalize(&k, &entries[0], &tol).unwrap();
        assert_eq!(set.blocks[0].sigma(), Some(c(0.0, -1.0)));
        assert!(orthonormality_residual(&k, &set) < 1e-12);
    }

    #[test]
    fn bogoliubov_rejects_real_pairs() {
        let tol = Tolerances::default();
        let (k, entries) = pipeline(&two_mode(1.0, 2.0), 4);
        let real = entries.iter().find(|e| e.class.kind == EigenvalueKind::RealPair).unwrap();
        assert!(matches!(bogoliubov_orthonormalize(&k, real, &tol), Err(Error::WrongPath(_))));
    }
}
