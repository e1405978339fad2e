//! Assembly of the canonical transform from orthonormalized chains, the
//! expected real Jordan blocks of `K_N`, the normal-form Hamiltonian terms
//! and the stability verdict.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{bogoliubov_orthonormalize, orthonormalize, powers, OrthonormalBlock, OrthonormalizedSet};
use crate::config::{Config, Tolerances};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, CVec};
use crate::quadratic::{
    build_eom, j_matrix, similarity, transform_hamiltonian, CanonicalTransform, EquationOfMotionMatrix,
    HamiltonianMatrix, ModeLabel,
};
use crate::spectrum::{analyze_spectrum, extract_chains, Case, JordanChainSet, SpectrumReport};

/// Column pairs `(t, s)` contributed by one orthonormalized block.
#[derive(Debug, Clone)]
pub struct ColumnGroup {
    pub case: Case,
    pub eigenvalue: Complex64,
    pub rank: usize,
    pub sigma: Option<Complex64>,
    pub plus: Vec<CVec>,
    pub minus: Vec<CVec>,
}

impl ColumnGroup {
    pub fn mode_count(&self) -> usize {
        self.plus.len()
    }
}

fn real_column(v: &CVec, scale: f64) -> Result<CVec> {
    let imaginary = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if imaginary > 1e-8 * scale.max(1.0) {
        return Err(Error::Construction(format!("column has imaginary residual {imaginary:.3e}")));
    }
    Ok(v.map(|z| Complex64::new(z.re, 0.0)))
}

fn re(v: &CVec) -> CVec {
    v.map(|z| Complex64::new(SQRT_2 * z.re, 0.0))
}

fn im(v: &CVec) -> CVec {
    v.map(|z| Complex64::new(SQRT_2 * z.im, 0.0))
}

/// `s_k = (−1)^{D−k} (K + λ)^{D−k} ẽ` for `k = 1..D`.
fn partner_columns(k: &EquationOfMotionMatrix, lambda: Complex64, partner: &CVec, rank: usize) -> Vec<CVec> {
    let up = powers(k, -lambda, partner, rank);
    (1..=rank)
        .map(|idx| {
            let power = rank - idx;
            if power % 2 == 0 {
                up[power].clone()
            } else {
                -&up[power]
            }
        })
        .collect()
}

/// Real columns of `T₊` and `T₋` for one block.
pub fn build_case_columns(k: &EquationOfMotionMatrix, block: &OrthonormalBlock) -> Result<ColumnGroup> {
    let zero = Complex64::new(0.0, 0.0);
    let (plus, minus) = match block {
        OrthonormalBlock::Paired { case: Case::Real, eigenvalue, rank, e, partner } => {
            let t = powers(k, *eigenvalue, e, *rank);
            let s = partner_columns(k, *eigenvalue, partner, *rank);
            let scale = e.norm().max(partner.norm());
            (
                t.iter().map(|v| real_column(v, scale)).collect::<Result<Vec<_>>>()?,
                s.iter().map(|v| real_column(v, scale)).collect::<Result<Vec<_>>>()?,
            )
        }
        OrthonormalBlock::Paired { eigenvalue, rank, e, partner, .. } => {
            let z = powers(k, *eigenvalue, e, *rank);
            let w = partner_columns(k, *eigenvalue, partner, *rank);
            let mut plus = Vec::with_capacity(2 * rank);
            let mut minus = Vec::with_capacity(2 * rank);
            for (zk, wk) in z.iter().zip(&w) {
                plus.push(re(zk));
                plus.push(im(zk));
                minus.push(re(wk));
                minus.push(-im(wk));
            }
            (plus, minus)
        }
        OrthonormalBlock::SelfPaired { rank, sigma, e } => {
            let chain = powers(k, zero, e, *rank);
            let scale = e.norm();
            let half = rank / 2;
            let mut plus = Vec::with_capacity(half);
            let mut minus = Vec::with_capacity(half);
            for idx in 1..=half {
                plus.push(real_column(&(&chain[idx - 1] * Complex64::new(sigma.powi(idx as i32 - 1), 0.0)), scale)?);
                minus.push(real_column(
                    &(&chain[rank - idx] * Complex64::new((-sigma).powi((rank - idx) as i32), 0.0)),
                    scale,
                )?);
            }
            (plus, minus)
        }
        OrthonormalBlock::ZeroPair { rank, f, h } => {
            let t = powers(k, zero, f, *rank);
            let s = partner_columns(k, zero, h, *rank);
            let scale = f.norm().max(h.norm());
            (
                t.iter().map(|v| real_column(v, scale)).collect::<Result<Vec<_>>>()?,
                s.iter().map(|v| real_column(v, scale)).collect::<Result<Vec<_>>>()?,
            )
        }
        OrthonormalBlock::Conjugate { case: Case::ImaginaryEven, eigenvalue, rank, sigma, e } => {
            let z = powers(k, *eigenvalue, e, *rank);
            let d = *rank;
            let mut plus = Vec::with_capacity(d);
            let mut minus = Vec::with_capacity(d);
            for idx in 1..=d {
                let odd = idx % 2 == 1;
                plus.push(if odd { re(&z[idx - 1]) } else { im(&z[idx - 1]) });
                let sign = if idx % 2 == 0 { 1.0 } else { -1.0 };
                let w = z[d - idx].conjugate() * (*sigma * sign);
                minus.push(if odd { re(&w) } else { -im(&w) });
            }
            (plus, minus)
        }
        OrthonormalBlock::Conjugate { eigenvalue, rank, sigma, e, .. } => {
            let z = powers(k, *eigenvalue, e, *rank);
            let d = *rank;
            let tau = (Complex64::new(0.0, 1.0) * sigma).re;
            let plus = z.iter().map(re).collect();
            let minus = (1..=d)
                .map(|idx| {
                    let sign = if idx % 2 == 1 { tau } else { -tau };
                    im(&z[d - idx]) * Complex64::new(sign, 0.0)
                })
                .collect();
            (plus, minus)
        }
    };
    Ok(ColumnGroup {
        case: block.case(),
        eigenvalue: block.eigenvalue(),
        rank: block.rank(),
        sigma: block.sigma(),
        plus,
        minus,
    })
}

/// Deterministic mode order: case, then `|λ|` descending, `Im λ`
/// descending, rank descending.
fn group_order(a: &ColumnGroup, b: &ColumnGroup) -> Ordering {
    a.case
        .cmp(&b.case)
        .then(b.eigenvalue.norm().partial_cmp(&a.eigenvalue.norm()).unwrap_or(Ordering::Equal))
        .then(b.eigenvalue.im.partial_cmp(&a.eigenvalue.im).unwrap_or(Ordering::Equal))
        .then(b.rank.cmp(&a.rank))
}

/// `T = (T₊ T₋)` from column groups sorted into the canonical mode order.
pub fn assemble_transform(
    mut groups: Vec<ColumnGroup>,
    tol: &Tolerances,
) -> Result<(CanonicalTransform, Vec<ColumnGroup>)> {
    groups.sort_by(group_order);
    let n: usize = groups.iter().map(ColumnGroup::mode_count).sum();
    let dim = groups.first().and_then(|g| g.plus.first()).map_or(0, |v| v.len());
    if dim != 2 * n {
        return Err(Error::Construction(format!(
            "column groups provide {n} modes for a {dim}-dimensional phase space"
        )));
    }
    let mut t = DMatrix::<f64>::zeros(dim, dim);
    let mut layout = Vec::with_capacity(n);
    let mut col = 0;
    for g in &groups {
        for (p, m) in g.plus.iter().zip(&g.minus) {
            for r in 0..dim {
                t[(r, col)] = p[r].re;
                t[(r, col + n)] = m[r].re;
            }
            layout.push(ModeLabel { case: g.case, eigenvalue: g.eigenvalue, rank: g.rank });
            col += 1;
        }
    }
    let transform = CanonicalTransform::new(t, layout)?;
    let residual = transform.symplectic_residual();
    let tolerance = transform.symplectic_tolerance(tol);
    if !(residual <= tolerance) {
        let j = j_matrix(n);
        let gram = transform.entries().transpose() * &j * transform.entries() - &j;
        let worst = (0..dim)
            .flat_map(|r| (0..dim).map(move |c| (r, c)))
            .max_by(|a, b| gram[*a].abs().partial_cmp(&gram[*b].abs()).unwrap_or(Ordering::Equal))
            .unwrap_or((0, 0));
        return Err(Error::Verification {
            message: format!("assembled transform is not symplectic; worst Gram entry at columns {worst:?}"),
            residual,
            tolerance,
        });
    }
    Ok((transform, groups))
}

/// One block of the real Jordan normal form, `[[I_I, I_R], [I_L, −I_Iᵀ]]`,
/// acting on `mode_count` consecutive modes starting at `mode_offset`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormBlock {
    pub case: Case,
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub eigenvalue: Complex64,
    pub rank: usize,
    #[serde(serialize_with = "crate::report::serialize_optional_complex")]
    pub sigma: Option<Complex64>,
    pub mode_offset: usize,
    pub mode_count: usize,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub diagonal_block: DMatrix<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub upper_block: DMatrix<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub lower_block: DMatrix<f64>,
}

impl NormalFormBlock {
    /// Template for a case, eigenvalue, rank and sign.
    pub fn template(
        case: Case,
        eigenvalue: Complex64,
        rank: usize,
        sigma: Option<Complex64>,
        mode_offset: usize,
    ) -> Self {
        let d = rank;
        let sig = sigma.unwrap_or(Complex64::new(1.0, 0.0));
        let nu = eigenvalue.im;
        let size = match case {
            Case::Quadruplet => 2 * d,
            Case::ZeroEven => d / 2,
            _ => d,
        };
        let mut ii = DMatrix::<f64>::zeros(size, size);
        let mut ir = DMatrix::<f64>::zeros(size, size);
        let mut il = DMatrix::<f64>::zeros(size, size);
        let shift = |m: &mut DMatrix<f64>, value: f64| {
            for r in 1..size {
                m[(r, r - 1)] = value;
            }
        };
        // 1-based parity helper for the anti-diagonal templates
        let alt = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
        match case {
            Case::Real => {
                shift(&mut ii, 1.0);
                for r in 0..size {
                    ii[(r, r)] = eigenvalue.re;
                }
            }
            Case::Quadruplet => {
                for b in 0..d {
                    let o = 2 * b;
                    ii[(o, o)] = eigenvalue.re;
                    ii[(o + 1, o + 1)] = eigenvalue.re;
                    ii[(o, o + 1)] = eigenvalue.im;
                    ii[(o + 1, o)] = -eigenvalue.im;
                    if b + 1 < d {
                        ii[(o + 2, o)] = 1.0;
                        ii[(o + 3, o + 1)] = 1.0;
                    }
                }
            }
            Case::ZeroEven => {
                shift(&mut ii, sig.re);
                il[(size - 1, size - 1)] = sig.re * alt(d / 2);
            }
            Case::ZeroOdd => shift(&mut ii, 1.0),
            Case::ImaginaryEven => {
                for i in 1..=d {
                    for j in 1..=d {
                        let mut upper = 0.0;
                        let mut lower = 0.0;
                        if i + j == d + 1 {
                            upper += nu;
                            lower -= nu;
                        }
                        if i + j == d + 2 {
                            upper += alt(i);
                        }
                        if i + j == d {
                            lower += alt(i);
                        }
                        ir[(i - 1, j - 1)] = sig.re * upper;
                        il[(i - 1, j - 1)] = sig.re * lower;
                    }
                }
            }
            Case::ImaginaryOdd => {
                let tau = (Complex64::new(0.0, 1.0) * sig).re;
                shift(&mut ii, 1.0);
                for i in 1..=d {
                    ir[(i - 1, d - i)] = tau * nu * -alt(i);
                    il[(i - 1, d - i)] = tau * nu * alt(i);
                }
            }
        }
        Self {
            case,
            eigenvalue,
            rank,
            sigma,
            mode_offset,
            mode_count: size,
            diagonal_block: ii,
            upper_block: ir,
            lower_block: il,
        }
    }
}

/// Block templates for each column group, with consecutive mode offsets.
pub fn expected_blocks(groups: &[ColumnGroup]) -> Vec<NormalFormBlock> {
    let mut offset = 0;
    groups
        .iter()
        .map(|g| {
            let block = NormalFormBlock::template(g.case, g.eigenvalue, g.rank, g.sigma, offset);
            offset += block.mode_count;
            block
        })
        .collect()
}

/// Direct-sum assembly `K_N = [[O_I, O_R], [O_L, −O_Iᵀ]]`.
pub fn assemble_normal_form(blocks: &[NormalFormBlock], n_modes: usize) -> DMatrix<f64> {
    let mut k = DMatrix::<f64>::zeros(2 * n_modes, 2 * n_modes);
    for b in blocks {
        let (o, s) = (b.mode_offset, b.mode_count);
        k.view_mut((o, o), (s, s)).copy_from(&b.diagonal_block);
        k.view_mut((o, n_modes + o), (s, s)).copy_from(&b.upper_block);
        k.view_mut((n_modes + o, o), (s, s)).copy_from(&b.lower_block);
        k.view_mut((n_modes + o, n_modes + o), (s, s)).copy_from(&(-b.diagonal_block.transpose()));
    }
    k
}

/// Elementary term types of a normal-form Hamiltonian. Mode indices are
/// 1-based; `X` and `P` are the normal-mode quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TermKind {
    /// `c (X_k² + P_k²)`
    HarmonicOscillator,
    /// `c X_k²`
    FreeParticleX,
    /// `c P_k²`
    FreeParticleP,
    /// `c X_k P_k`
    SingleModeSqueeze,
    /// `c (X_k P_l − P_k X_l)`
    BeamSplitterXP,
    /// `c (X_k X_l + P_k P_l)`
    BeamSplitterXXPP,
    /// `c X_k P_l`
    BeamSplitterPlusTwoModeSqueeze,
    /// `c X_k X_l`
    PositionCoupling,
    /// `c P_k P_l`
    MomentumCoupling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HamiltonianTerm {
    pub kind: TermKind,
    pub coefficient: f64,
    pub modes: Vec<usize>,
    pub symbol: String,
}

impl HamiltonianTerm {
    pub fn new(kind: TermKind, coefficient: f64, modes: Vec<usize>) -> Self {
        let mut term = Self { kind, coefficient, modes, symbol: String::new() };
        term.symbol = format_term(&term);
        term
    }

    /// Operator part without the coefficient, e.g. `X1 P2`.
    pub fn body(&self) -> String {
        let m = &self.modes;
        match self.kind {
            TermKind::HarmonicOscillator => format!("X{0}^2 + P{0}^2", m[0]),
            TermKind::FreeParticleX => format!("X{}^2", m[0]),
            TermKind::FreeParticleP => format!("P{}^2", m[0]),
            TermKind::SingleModeSqueeze => format!("X{0} P{0}", m[0]),
            TermKind::BeamSplitterXP => format!("X{0} P{1} - P{0} X{1}", m[0], m[1]),
            TermKind::BeamSplitterXXPP => format!("X{0} X{1} + P{0} P{1}", m[0], m[1]),
            TermKind::BeamSplitterPlusTwoModeSqueeze => format!("X{} P{}", m[0], m[1]),
            TermKind::PositionCoupling => format!("X{} X{}", m[0], m[1]),
            TermKind::MomentumCoupling => format!("P{} P{}", m[0], m[1]),
        }
    }

    fn compound(&self) -> bool {
        matches!(self.kind, TermKind::HarmonicOscillator | TermKind::BeamSplitterXP | TermKind::BeamSplitterXXPP)
    }
}

/// Coefficient as text with round-off noise trimmed: `1.5`, `2`, `-0.25`.
pub fn format_coefficient(x: f64) -> String {
    let s = format!("{:.10}", x);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn scaled_body(magnitude: &str, body: &str, compound: bool) -> String {
    match (magnitude, compound) {
        ("1", false) => body.to_string(),
        ("1", true) => format!("({body})"),
        (m, true) => format!("{m}({body})"),
        (m, false) => format!("{m} {body}"),
    }
}

fn format_term(term: &HamiltonianTerm) -> String {
    let c = format_coefficient(term.coefficient);
    let (sign, magnitude) = match c.strip_prefix('-') {
        Some(rest) => ("-", rest.to_string()),
        None => ("", c),
    };
    format!("{sign}{}", scaled_body(&magnitude, &term.body(), term.compound()))
}

/// The full Hamiltonian as one expression, grouping consecutive terms of
/// equal kind and coefficient: `2(X1 P1 + X2 P2) + X1 P2`.
pub fn render_terms(terms: &[HamiltonianTerm]) -> String {
    if terms.is_empty() {
        return "0".to_string();
    }
    let mut out = String::new();
    let mut i = 0;
    while i < terms.len() {
        let coeff = format_coefficient(terms[i].coefficient);
        let mut j = i + 1;
        while j < terms.len() && terms[j].kind == terms[i].kind && format_coefficient(terms[j].coefficient) == coeff {
            j += 1;
        }
        let bodies: Vec<String> = terms[i..j].iter().map(HamiltonianTerm::body).collect();
        let compound = j - i > 1 || terms[i].compound();
        let (negative, magnitude) = match coeff.strip_prefix('-') {
            Some(rest) => (true, rest.to_string()),
            None => (false, coeff.clone()),
        };
        let piece = scaled_body(&magnitude, &bodies.join(" + "), compound);
        match (out.is_empty(), negative) {
            (true, false) => out.push_str(&piece),
            (true, true) => {
                let _ = write!(out, "-{piece}");
            }
            (false, false) => {
                let _ = write!(out, " + {piece}");
            }
            (false, true) => {
                let _ = write!(out, " - {piece}");
            }
        }
        i = j;
    }
    out
}

/// Collects `X_i X_j` and `P_i P_j` coefficients and emits them as the
/// tightest term kinds.
#[derive(Default)]
struct QuadraticParts {
    xx: BTreeMap<(usize, usize), f64>,
    pp: BTreeMap<(usize, usize), f64>,
}

impl QuadraticParts {
    fn add_xx(&mut self, i: usize, j: usize, c: f64) {
        *self.xx.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
    }

    fn add_pp(&mut self, i: usize, j: usize, c: f64) {
        *self.pp.entry((i.min(j), i.max(j))).or_insert(0.0) += c;
    }

    fn emit(self, out: &mut Vec<HamiltonianTerm>) {
        let mut keys: Vec<(usize, usize)> = self.xx.keys().chain(self.pp.keys()).cloned().collect();
        keys.sort_unstable();
        keys.dedup();
        for (i, j) in keys {
            let x = self.xx.get(&(i, j)).cloned().unwrap_or(0.0);
            let p = self.pp.get(&(i, j)).cloned().unwrap_or(0.0);
            let diag = i == j;
            if x != 0.0 && x == p {
                let kind = if diag { TermKind::HarmonicOscillator } else { TermKind::BeamSplitterXXPP };
                out.push(HamiltonianTerm::new(kind, x, if diag { vec![i] } else { vec![i, j] }));
                continue;
            }
            if x != 0.0 {
                let kind = if diag { TermKind::FreeParticleX } else { TermKind::PositionCoupling };
                out.push(HamiltonianTerm::new(kind, x, if diag { vec![i] } else { vec![i, j] }));
            }
            if p != 0.0 {
                let kind = if diag { TermKind::FreeParticleP } else { TermKind::MomentumCoupling };
                out.push(HamiltonianTerm::new(kind, p, if diag { vec![i] } else { vec![i, j] }));
            }
        }
    }
}

/// Hamiltonian terms of each block. Zero-frequency modes (`ZeroOdd` with
/// rank 1) contribute nothing and are counted instead.
pub fn emit_terms(blocks: &[NormalFormBlock]) -> (Vec<HamiltonianTerm>, usize) {
    let mut terms = Vec::new();
    let mut zero_modes = 0;
    for b in blocks {
        let d = b.rank;
        let mode = |k: usize| b.mode_offset + k; // k is 1-based within the block
        let sigma = b.sigma.unwrap_or(Complex64::new(1.0, 0.0));
        let nu = b.eigenvalue.im;
        match b.case {
            Case::Real => {
                for k in 1..=d {
                    terms.push(HamiltonianTerm::new(TermKind::SingleModeSqueeze, b.eigenvalue.re, vec![mode(k)]));
                }
                for k in 1..d {
                    terms.push(HamiltonianTerm::new(
                        TermKind::BeamSplitterPlusTwoModeSqueeze,
                        1.0,
                        vec![mode(k), mode(k + 1)],
                    ));
                }
            }
            Case::Quadruplet => {
                for k in 1..=2 * d {
                    terms.push(HamiltonianTerm::new(TermKind::SingleModeSqueeze, b.eigenvalue.re, vec![mode(k)]));
                }
                for k in 1..=d {
                    terms.push(HamiltonianTerm::new(TermKind::BeamSplitterXP, nu, vec![mode(2 * k), mode(2 * k - 1)]));
                }
                for k in 1..=2 * d - 2 {
                    terms.push(HamiltonianTerm::new(
                        TermKind::BeamSplitterPlusTwoModeSqueeze,
                        1.0,
                        vec![mode(k), mode(k + 2)],
                    ));
                }
            }
            Case::ZeroEven => {
                let half = d / 2;
                for k in 1..half {
                    terms.push(HamiltonianTerm::new(
                        TermKind::BeamSplitterPlusTwoModeSqueeze,
                        sigma.re,
                        vec![mode(k), mode(k + 1)],
                    ));
                }
                let sign = if half % 2 == 0 { -1.0 } else { 1.0 };
                terms.push(HamiltonianTerm::new(TermKind::FreeParticleX, sign * sigma.re / 2.0, vec![mode(half)]));
            }
            Case::ZeroOdd => {
                if d == 1 {
                    zero_modes += 1;
                }
                for k in 1..d {
                    terms.push(HamiltonianTerm::new(
                        TermKind::BeamSplitterPlusTwoModeSqueeze,
                        1.0,
                        vec![mode(k), mode(k + 1)],
                    ));
                }
            }
            Case::ImaginaryEven => {
                let s = sigma.re;
                let mut parts = QuadraticParts::default();
                for k in 1..=d {
                    parts.add_xx(mode(k), mode(d + 1 - k), s * nu / 2.0);
                    parts.add_pp(mode(k), mode(d + 1 - k), s * nu / 2.0);
                }
                for k in 1..d {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    parts.add_xx(mode(k), mode(d - k), s * sign / 2.0);
                    parts.add_pp(mode(k + 1), mode(d + 1 - k), s * sign / 2.0);
                }
                parts.emit(&mut terms);
            }
            Case::ImaginaryOdd => {
                let tau = (Complex64::new(0.0, 1.0) * sigma).re;
                let mut parts = QuadraticParts::default();
                for k in 1..=d {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    parts.add_xx(mode(k), mode(d + 1 - k), tau * nu * sign / 2.0);
                    parts.add_pp(mode(k), mode(d + 1 - k), tau * nu * sign / 2.0);
                }
                parts.emit(&mut terms);
                for k in 1..d {
                    terms.push(HamiltonianTerm::new(
                        TermKind::BeamSplitterPlusTwoModeSqueeze,
                        1.0,
                        vec![mode(k), mode(k + 1)],
                    ));
                }
            }
        }
    }
    (terms, zero_modes)
}

/// The symmetric matrix `N` with `H = ½ ρᵀ N ρ` for a term list.
pub fn terms_matrix(terms: &[HamiltonianTerm], n_modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::zeros(2 * n_modes, 2 * n_modes);
    let x = |k: usize| k - 1;
    let p = |k: usize| n_modes + k - 1;
    let mut add = |a: usize, b: usize, c: f64| {
        if a == b {
            m[(a, a)] += 2.0 * c;
        } else {
            m[(a, b)] += c;
            m[(b, a)] += c;
        }
    };
    for t in terms {
        let c = t.coefficient;
        let k = t.modes[0];
        let l = t.modes.get(1).cloned().unwrap_or(k);
        match t.kind {
            TermKind::HarmonicOscillator => {
                add(x(k), x(k), c);
                add(p(k), p(k), c);
            }
            TermKind::FreeParticleX => add(x(k), x(k), c),
            TermKind::FreeParticleP => add(p(k), p(k), c),
            TermKind::SingleModeSqueeze | TermKind::BeamSplitterPlusTwoModeSqueeze => add(x(k), p(l), c),
            TermKind::BeamSplitterXP => {
                add(x(k), p(l), c);
                add(x(l), p(k), -c);
            }
            TermKind::BeamSplitterXXPP => {
                add(x(k), x(l), c);
                add(p(k), p(l), c);
            }
            TermKind::PositionCoupling => add(x(k), x(l), c),
            TermKind::MomentumCoupling => add(p(k), p(l), c),
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Growth {
    /// `exp(rate·t)` times a polynomial of the given order.
    Exponential { rate: f64, polynomial_order: usize },
    /// `t^order`
    Polynomial { order: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReason {
    pub case: Case,
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub eigenvalue: Complex64,
    pub rank: usize,
    pub modes: Vec<usize>,
    pub growth: Growth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// Diagonalizable with a purely imaginary spectrum.
    Stable,
    /// Diagonalizable, imaginary or zero spectrum, with zero-frequency modes.
    Marginal {
        zero_frequency_modes: usize,
    },
    Unstable {
        reasons: Vec<GrowthReason>,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Marginal { .. } => "marginal",
            Verdict::Unstable { .. } => "unstable",
        }
    }
}

pub fn verdict(blocks: &[NormalFormBlock]) -> Verdict {
    let mut reasons = Vec::new();
    let mut zero_modes = 0;
    for b in blocks {
        let modes = (b.mode_offset + 1..=b.mode_offset + b.mode_count).collect();
        let growth = match b.case {
            Case::Real | Case::Quadruplet => {
                Some(Growth::Exponential { rate: b.eigenvalue.re.abs(), polynomial_order: b.rank - 1 })
            }
            _ if b.rank > 1 => Some(Growth::Polynomial { order: b.rank - 1 }),
            _ => None,
        };
        if b.case == Case::ZeroOdd && b.rank == 1 {
            zero_modes += 1;
        }
        if let Some(growth) = growth {
            reasons.push(GrowthReason { case: b.case, eigenvalue: b.eigenvalue, rank: b.rank, modes, growth });
        }
    }
    if !reasons.is_empty() {
        Verdict::Unstable { reasons }
    } else if zero_modes > 0 {
        Verdict::Marginal { zero_frequency_modes: zero_modes }
    } else {
        Verdict::Stable
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelinePath {
    General,
    Bogoliubov,
}

/// Residuals the report was validated against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `‖T J Tᵀ − J‖_max`
    pub symplectic: f64,
    pub symplectic_tolerance: f64,
    /// `‖T⁻¹ K T − K_N(expected)‖_max`
    pub block_match: f64,
    pub block_tolerance: f64,
    /// `‖Tᵀ M T + J K_N(expected)‖_max`
    pub hamiltonian_match: f64,
    /// Largest Ω-orthonormality defect over all classes.
    pub orthonormality: f64,
}

#[derive(Debug, Clone)]
pub struct NormalFormReport {
    pub spectrum: SpectrumReport,
    pub transform: CanonicalTransform,
    /// `T⁻¹ K T` as computed.
    pub k_normal: EquationOfMotionMatrix,
    /// The block-template assembly `T⁻¹ K T` was matched against.
    pub expected_k_normal: DMatrix<f64>,
    pub n_matrix: HamiltonianMatrix,
    pub blocks: Vec<NormalFormBlock>,
    pub terms: Vec<HamiltonianTerm>,
    pub verdict: Verdict,
    pub zero_frequency_mode_count: usize,
    pub residuals: Residuals,
    pub path: PipelinePath,
    pub warnings: Vec<String>,
}

impl NormalFormReport {
    pub fn n_modes(&self) -> usize {
        self.transform.n_modes()
    }

    /// The Hamiltonian expression, e.g. `2(X1 P1 + X2 P2) + X1 P2`.
    pub fn hamiltonian_expression(&self) -> String {
        render_terms(&self.terms)
    }
}

fn finish(
    m: &HamiltonianMatrix,
    k: &EquationOfMotionMatrix,
    spectrum: SpectrumReport,
    sets: &[OrthonormalizedSet],
    path: PipelinePath,
    mut warnings: Vec<String>,
    tol: &Tolerances,
) -> Result<NormalFormReport> {
    let mut groups = Vec::new();
    let mut orthonormality = 0.0f64;
    for set in sets {
        orthonormality = orthonormality.max(crate::algebra::orthonormality_residual(k, set));
        for block in &set.blocks {
            groups.push(build_case_columns(k, block)?);
        }
    }
    let (transform, groups) = assemble_transform(groups, tol)?;
    let blocks = expected_blocks(&groups);
    let n = m.n_modes();
    let expected = assemble_normal_form(&blocks, n);
    let k_normal = similarity(k, &transform, tol)?;
    let block_match = max_abs(&(k_normal.entries() - &expected));
    let t_scale = max_abs(transform.entries());
    let block_tolerance = tol.verify * (1.0 + k.norm()) * (1.0 + t_scale).powi(2);
    if !(block_match <= block_tolerance) {
        return Err(Error::Verification {
            message: "T⁻¹KT does not match the expected normal-form blocks".into(),
            residual: block_match,
            tolerance: block_tolerance,
        });
    }
    let n_matrix = transform_hamiltonian(m, &transform, tol)?;
    let hamiltonian_match = max_abs(&(n_matrix.entries() + j_matrix(n) * &expected));
    let hamiltonian_tolerance = tol.verify * (1.0 + max_abs(m.entries())) * (1.0 + t_scale).powi(2);
    if !(hamiltonian_match <= hamiltonian_tolerance) {
        return Err(Error::Verification {
            message: "TᵀMT does not match −J K_N".into(),
            residual: hamiltonian_match,
            tolerance: hamiltonian_tolerance,
        });
    }
    let (terms, zero_frequency_mode_count) = emit_terms(&blocks);
    let verdict = verdict(&blocks);
    warnings.extend(spectrum.warnings.iter().cloned());
    let residuals = Residuals {
        symplectic: transform.symplectic_residual(),
        symplectic_tolerance: transform.symplectic_tolerance(tol),
        block_match,
        block_tolerance,
        hamiltonian_match,
        orthonormality,
    };
    Ok(NormalFormReport {
        spectrum,
        transform,
        k_normal,
        expected_k_normal: expected,
        n_matrix,
        blocks,
        terms,
        verdict,
        zero_frequency_mode_count,
        residuals,
        path,
        warnings,
    })
}

fn chain_warnings(chains: &JordanChainSet) -> Vec<String> {
    chains.entries.iter().flat_map(|e| e.warnings.iter().cloned()).collect()
}

/// Normal form through the simplified orthonormalization for a diagonalizable
/// purely imaginary spectrum.
pub fn bogoliubov_transform(m: &HamiltonianMatrix, config: &Config) -> Result<NormalFormReport> {
    let tol = &config.tolerances;
    let k = build_eom(m);
    let spectrum = analyze_spectrum(&k, tol)?;
    if !spectrum.is_imaginary_diagonalizable() {
        return Err(Error::WrongPath(
            "spectrum is not purely imaginary and diagonalizable; use the general pipeline".into(),
        ));
    }
    let chains = extract_chains(&k, &spectrum, tol)?;
    let sets =
        chains.entries.iter().map(|entry| bogoliubov_orthonormalize(&k, entry, tol)).collect::<Result<Vec<_>>>()?;
    finish(m, &k, spectrum, &sets, PipelinePath::Bogoliubov, chain_warnings(&chains), tol)
}

/// Full pipeline: spectrum, chains, orthonormalization, transform assembly,
/// verification against the expected blocks, terms and verdict.
pub fn normal_form(m: &HamiltonianMatrix, config: &Config) -> Result<NormalFormReport> {
    let tol = &config.tolerances;
    let k = build_eom(m);
    let spectrum = analyze_spectrum(&k, tol)?;
    if spectrum.sum_rule_residual != 0 {
        return Err(Error::SpectrumStructure(format!("sum rule violated by {}", spectrum.sum_rule_residual)));
    }
    if config.bogoliubov_fast_path && spectrum.is_imaginary_diagonalizable() {
        return bogoliubov_transform(m, config);
    }
    let chains = extract_chains(&k, &spectrum, tol)?;
    let sets = chains.entries.iter().map(|entry| orthonormalize(&k, entry, tol)).collect::<Result<Vec<_>>>()?;
    finish(m, &k, spectrum, &sets, PipelinePath::General, chain_warnings(&chains), tol)
}
