//! Eigenvalue clustering and classification of `K`, and extraction of Jordan
//! chains from the nullspace filtration of `(K − λ)^k`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{
    complexify, complexify_vec, eigenvalues, null_space, orthonormal_span, pivoted_select, project_out, sorted_svd,
    CVec, Scalar,
};
use crate::quadratic::EquationOfMotionMatrix;

/// Symmetry family of an eigenvalue of a Hamiltonian matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenvalueKind {
    /// `{λ, −λ}` with real `λ > 0`.
    RealPair,
    /// `{λ, −λ, λ̄, −λ̄}`.
    ComplexQuadruplet,
    Zero,
    /// `{λ, λ̄}` with `λ = iν`, `ν > 0`.
    ImaginaryPair,
}

impl EigenvalueKind {
    pub fn letter(self) -> char {
        match self {
            EigenvalueKind::RealPair => 'R',
            EigenvalueKind::ComplexQuadruplet => 'C',
            EigenvalueKind::Zero => 'Z',
            EigenvalueKind::ImaginaryPair => 'I',
        }
    }
}

/// The six chain cases; the discriminant is the conventional case number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    Real = 1,
    Quadruplet = 2,
    ZeroEven = 3,
    ZeroOdd = 4,
    ImaginaryEven = 5,
    ImaginaryOdd = 6,
}

impl Case {
    pub fn number(self) -> u8 {
        self as u8
    }

    pub fn for_chain(kind: EigenvalueKind, rank: usize) -> Self {
        let even = rank % 2 == 0;
        match kind {
            EigenvalueKind::RealPair => Case::Real,
            EigenvalueKind::ComplexQuadruplet => Case::Quadruplet,
            EigenvalueKind::Zero if even => Case::ZeroEven,
            EigenvalueKind::Zero => Case::ZeroOdd,
            EigenvalueKind::ImaginaryPair if even => Case::ImaginaryEven,
            EigenvalueKind::ImaginaryPair => Case::ImaginaryOdd,
        }
    }
}

impl Serialize for Case {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u8(self.number())
    }
}

/// A group of numerically coincident eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cluster {
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenvalueClass {
    pub kind: EigenvalueKind,
    /// Member with `Re λ > 0` (and `Im λ > 0` for quadruplets), `iν` with
    /// `ν > 0` for imaginary pairs, `0` for the zero class.
    #[serde(serialize_with = "crate::report::serialize_complex")]
    pub representative: Complex64,
    pub algebraic: usize,
    /// Filled in once the nullspace of `K − λ` has been measured.
    pub geometric: Option<usize>,
}

impl EigenvalueClass {
    /// Number of eigenvalues of `K` this class accounts for.
    pub fn dimension(&self) -> usize {
        self.algebraic
            * match self.kind {
                EigenvalueKind::Zero => 1,
                EigenvalueKind::RealPair | EigenvalueKind::ImaginaryPair => 2,
                EigenvalueKind::ComplexQuadruplet => 4,
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub classes: Vec<EigenvalueClass>,
    /// `2N − (a₀ + 2Σ_R a + 4Σ_C a + 2Σ_I a)`; zero on every valid report.
    pub sum_rule_residual: i64,
    pub warnings: Vec<String>,
}

impl SpectrumReport {
    pub fn is_imaginary_diagonalizable(&self) -> bool {
        self.classes.iter().all(|c| c.kind == EigenvalueKind::ImaginaryPair && c.geometric == Some(c.algebraic))
    }
}

fn spectral_scale(k: &EquationOfMotionMatrix) -> f64 {
    1.0 + k.norm()
}

/// Largest spread a group of `size` eigenvalues may have and still be merged.
fn merge_threshold(scale: f64, tol: &Tolerances, size: usize) -> f64 {
    let defect = if size >= 2 { tol.defect.powf(1.0 / size as f64) } else { 0.0 };
    scale * tol.cluster.max(defect)
}

fn diameter(points: &[Complex64]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Groups the eigenvalues of `K`, snaps group centers onto the axes and
/// symmetrizes the result so that every cluster has its mirror images with
/// equal multiplicity.
///
/// A perturbed Jordan block of size `m` splits into `m` eigenvalues spread by
/// roughly `ε^(1/m)`, so a group of `m` values is accepted when its diameter
/// is within `max(cluster, defect^(1/m))·(1 + ‖K‖)`. Larger groups are
/// preferred; their centroids are accurate even when the members are not.
pub fn cluster_eigenvalues(k: &EquationOfMotionMatrix, tol: &Tolerances) -> Result<Vec<Cluster>> {
    let eigenvalues = eigenvalues(k.entries())
        .ok_or_else(|| Error::AmbiguousSpectrum("eigenvalue iteration did not converge".into()))?;
    if eigenvalues.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::AmbiguousSpectrum("eigenvalue solver did not converge".into()));
    }
    let scale = spectral_scale(k);
    let base = scale * tol.cluster;

    let mut remaining: Vec<usize> = (0..eigenvalues.len()).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64, Vec<usize>)> = None;
        for &i in &remaining {
            let mut near = remaining.clone();
            near.sort_by(|&a, &b| {
                let da = (eigenvalues[a] - eigenvalues[i]).norm();
                let db = (eigenvalues[b] - eigenvalues[i]).norm();
                da.partial_cmp(&db).unwrap_or(Ordering::Equal).then(a.cmp(&b))
            });
            for size in (1..=near.len()).rev() {
                let members: Vec<Complex64> = near[..size].iter().map(|&j| eigenvalues[j]).collect();
                let d = diameter(&members);
                if size == 1 || d <= merge_threshold(scale, tol, size) {
                    let better = match &best {
                        None => true,
                        Some((s, bd, _)) => size > *s || (size == *s && d < *bd),
                    };
                    if better {
                        best = Some((size, d, near[..size].to_vec()));
                    }
                    break;
                }
            }
        }
        let (_, _, mut members) = best.expect("at least one eigenvalue remains");
        members.sort_unstable();
        remaining.retain(|i| !members.contains(i));
        groups.push(members);
    }

    for (gi, a) in groups.iter().enumerate() {
        for b in &groups[gi + 1..] {
            let gap = a
                .iter()
                .flat_map(|&i| b.iter().map(move |&j| (i, j)))
                .map(|(i, j)| (eigenvalues[i] - eigenvalues[j]).norm())
                .fold(f64::INFINITY, f64::min);
            if gap <= base {
                return Err(Error::AmbiguousSpectrum(format!(
                    "clusters around {} and {} are {gap:.3e} apart but cannot be merged",
                    fmt_c(centroid(a, &eigenvalues)),
                    fmt_c(centroid(b, &eigenvalues))
                )));
            }
        }
    }

    let snapped: Vec<Cluster> = groups
        .iter()
        .map(|g| {
            let mut c = centroid(g, &eigenvalues);
            if c.re.abs() <= base {
                c.re = 0.0;
            }
            if c.im.abs() <= base {
                c.im = 0.0;
            }
            Cluster { value: c, multiplicity: g.len() }
        })
        .collect();
    symmetrize(&snapped, scale, tol)
}

fn centroid(group: &[usize], values: &[Complex64]) -> Complex64 {
    group.iter().map(|&i| values[i]).sum::<Complex64>() / group.len() as f64
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}

fn symmetrize(clusters: &[Cluster], scale: f64, tol: &Tolerances) -> Result<Vec<Cluster>> {
    let mut used = vec![false; clusters.len()];
    let mut out = Vec::with_capacity(clusters.len());
    let find = |used: &[bool], target: Complex64, exclude: &[usize]| -> Option<usize> {
        (0..clusters.len()).filter(|&j| !used[j] && !exclude.contains(&j)).min_by(|&a, &b| {
            let da = (clusters[a].value - target).norm();
            let db = (clusters[b].value - target).norm();
            da.partial_cmp(&db).unwrap_or(Ordering::Equal)
        })
    };
    for i in 0..clusters.len() {
        if used[i] {
            continue;
        }
        let Cluster { value: c, multiplicity: m } = clusters[i];
        used[i] = true;
        if c == Complex64::new(0.0, 0.0) {
            out.push(clusters[i]);
            continue;
        }
        let limit = merge_threshold(scale, tol, m);
        let mut mirror = |target: Complex64, exclude: &[usize]| -> Result<usize> {
            let j = find(&used, target, exclude)
                .filter(|&j| (clusters[j].value - target).norm() <= limit && clusters[j].multiplicity == m);
            let j = j.ok_or_else(|| {
                Error::SpectrumStructure(format!(
                    "eigenvalue {} (multiplicity {m}) has no mirror near {}",
                    fmt_c(c),
                    fmt_c(target)
                ))
            })?;
            used[j] = true;
            Ok(j)
        };
        if c.im == 0.0 || c.re == 0.0 {
            let j = mirror(-c, &[])?;
            let avg = (c - clusters[j].value) * 0.5;
            out.push(Cluster { value: avg, multiplicity: m });
            out.push(Cluster { value: -avg, multiplicity: m });
        } else {
            let j1 = mirror(c.conj(), &[])?;
            let j2 = mirror(-c, &[j1])?;
            let j3 = mirror(-c.conj(), &[j1, j2])?;
            let members = [c, clusters[j1].value, clusters[j2].value, clusters[j3].value];
            let re = members.iter().map(|z| z.re.abs()).sum::<f64>() / 4.0;
            let im = members.iter().map(|z| z.im.abs()).sum::<f64>() / 4.0;
            for (sr, si) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                out.push(Cluster { value: Complex64::new(sr * re, si * im), multiplicity: m });
            }
        }
    }
    Ok(out)
}

fn class_order(a: &EigenvalueClass, b: &EigenvalueClass) -> Ordering {
    a.kind.cmp(&b.kind).then_with(|| {
        b.representative
            .norm()
            .partial_cmp(&a.representative.norm())
            .unwrap_or(Ordering::Equal)
            .then(b.representative.im.partial_cmp(&a.representative.im).unwrap_or(Ordering::Equal))
    })
}

/// Assigns symmetrized clusters to eigenvalue classes and checks the sum rule.
pub fn classify_spectrum(clusters: &[Cluster]) -> Result<SpectrumReport> {
    let total: usize = clusters.iter().map(|c| c.multiplicity).sum();
    let mut covered = vec![false; clusters.len()];
    let mut classes = Vec::new();
    let close = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * (1.0 + a.norm());
    let claim = |covered: &mut Vec<bool>, target: Complex64, m: usize| -> Result<()> {
        let j = (0..clusters.len())
            .find(|&j| !covered[j] && close(clusters[j].value, target) && clusters[j].multiplicity == m)
            .ok_or_else(|| Error::SpectrumStructure(format!("unpaired eigenvalue: no partner at {}", fmt_c(target))))?;
        covered[j] = true;
        Ok(())
    };
    for (i, cl) in clusters.iter().enumerate() {
        let z = cl.value;
        let m = cl.multiplicity;
        let kind = if z.re == 0.0 && z.im == 0.0 {
            EigenvalueKind::Zero
        } else if z.im == 0.0 && z.re > 0.0 {
            EigenvalueKind::RealPair
        } else if z.re == 0.0 && z.im > 0.0 {
            EigenvalueKind::ImaginaryPair
        } else if z.re > 0.0 && z.im > 0.0 {
            EigenvalueKind::ComplexQuadruplet
        } else {
            continue;
        };
        if covered[i] {
            continue;
        }
        covered[i] = true;
        match kind {
            EigenvalueKind::Zero => {
                if m % 2 != 0 {
                    return Err(Error::SpectrumStructure(format!("zero eigenvalue has odd multiplicity {m}")));
                }
            }
            EigenvalueKind::RealPair | EigenvalueKind::ImaginaryPair => claim(&mut covered, -z, m)?,
            EigenvalueKind::ComplexQuadruplet => {
                claim(&mut covered, z.conj(), m)?;
                claim(&mut covered, -z, m)?;
                claim(&mut covered, -z.conj(), m)?;
            }
        }
        classes.push(EigenvalueClass { kind, representative: z, algebraic: m, geometric: None });
    }
    if let Some(j) = covered.iter().position(|c| !c) {
        return Err(Error::SpectrumStructure(format!("unpaired eigenvalue {}", fmt_c(clusters[j].value))));
    }
    classes.sort_by(class_order);
    let counted: usize = classes.iter().map(EigenvalueClass::dimension).sum();
    Ok(SpectrumReport { classes, sum_rule_residual: total as i64 - counted as i64, warnings: Vec::new() })
}

/// Outcome of a numerical rank decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankDecision {
    pub value: usize,
    /// A singular value fell within a factor ten of the threshold.
    pub borderline: bool,
}

/// `dim null(K − λ)` by SVD with threshold `rank·max(1, ‖K − λ‖)`.
pub fn geometric_multiplicity(k: &EquationOfMotionMatrix, lambda: Complex64, tol: &Tolerances) -> RankDecision {
    let dim = k.entries().nrows();
    if lambda.im == 0.0 {
        let a = k.entries() - DMatrix::<f64>::identity(dim, dim) * lambda.re;
        let threshold = tol.rank * a.norm().max(1.0);
        let (basis, borderline) = null_space(&a, threshold, dim);
        RankDecision { value: basis.ncols(), borderline }
    } else {
        let a = complexify(k.entries()) - DMatrix::<Complex64>::identity(dim, dim) * lambda;
        let threshold = tol.rank * a.norm().max(1.0);
        let (basis, borderline) = null_space(&a, threshold, dim);
        RankDecision { value: basis.ncols(), borderline }
    }
}

/// Clusters and classifies the spectrum of `K` and measures each class's
/// geometric multiplicity.
pub fn analyze_spectrum(k: &EquationOfMotionMatrix, tol: &Tolerances) -> Result<SpectrumReport> {
    let clusters = cluster_eigenvalues(k, tol)?;
    let mut report = classify_spectrum(&clusters)?;
    let mut warnings = Vec::new();
    for class in &mut report.classes {
        let decision = geometric_multiplicity(k, class.representative, tol);
        if decision.borderline {
            warnings.push(format!("borderline rank decision for eigenvalue {}", fmt_c(class.representative)));
        }
        class.geometric = Some(decision.value.clamp(1, class.algebraic));
    }
    report.warnings = warnings;
    Ok(report)
}

/// One Jordan chain: `generator` has rank `rank`; `chain_vectors[k−1]` is
/// `(K − λ)^(D−k) g`, so the first entry is an eigenvector and the last is `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct JordanChain {
    pub eigenvalue: Complex64,
    pub generator: CVec,
    pub rank: usize,
    pub chain_vectors: Vec<CVec>,
}

impl JordanChain {
    pub fn new(k: &EquationOfMotionMatrix, eigenvalue: Complex64, generator: CVec, rank: usize) -> Self {
        let kc = complexify(k.entries());
        let mut chain_vectors = vec![generator.clone()];
        for _ in 1..rank {
            let last = chain_vectors.last().expect("non-empty");
            let next = &kc * last - last * eigenvalue;
            chain_vectors.push(next);
        }
        chain_vectors.reverse();
        Self { eigenvalue, generator, rank, chain_vectors }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            eigenvalue: self.eigenvalue.conj(),
            generator: self.generator.conjugate(),
            rank: self.rank,
            chain_vectors: self.chain_vectors.iter().map(|v| v.conjugate()).collect(),
        }
    }
}

/// `l` and `n` of the case bookkeeping: for the zero class `l₀` even-rank
/// chains and `n₀` pairs of odd-rank chains; for imaginary pairs `l` even and
/// `n` odd chains; unused otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct CaseCounts {
    pub l: usize,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassChains {
    pub class: EigenvalueClass,
    /// Chains for the representative `λ`, in descending rank.
    pub chains: Vec<JordanChain>,
    /// Chains for `−λ` (real pairs and quadruplets) or exact conjugates
    /// (imaginary pairs). Empty for the zero class.
    pub partners: Vec<JordanChain>,
    /// One case label per chain, filled by [`assign_cases`].
    pub cases: Vec<Case>,
    pub counts: CaseCounts,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JordanChainSet {
    pub entries: Vec<ClassChains>,
}

struct Filtration<T: Scalar> {
    /// Orthonormal basis of the generalized eigenspace.
    basis: DMatrix<T>,
    /// `(chain coordinates in basis, rank)`
    chains: Vec<(DVector<T>, usize)>,
    warnings: Vec<String>,
}

fn power<T: Scalar>(m: &DMatrix<T>, exponent: usize) -> DMatrix<T> {
    let mut p = DMatrix::<T>::identity(m.nrows(), m.ncols());
    for _ in 0..exponent {
        p = &p * m;
    }
    p
}

/// Nullspace filtration of `A = K − λ` restricted to the `a`-dimensional
/// generalized eigenspace, and top-down selection of chain generators.
fn filtration<T: Scalar>(a_full: &DMatrix<T>, multiplicity: usize, tol: &Tolerances) -> Result<Filtration<T>> {
    let dim = a_full.nrows();
    let scale = a_full.norm().max(1.0);
    let mut warnings = Vec::new();

    let svd = sorted_svd(&power(a_full, multiplicity));
    let cut = tol.rank * scale.powi(multiplicity as i32);
    let smallest_kept = svd.values[dim - multiplicity];
    if smallest_kept > cut {
        return Err(Error::ChainExtraction(format!(
            "generalized eigenspace has dimension below {multiplicity} (singular value {smallest_kept:.3e} above {cut:.3e})"
        )));
    }
    if dim > multiplicity && svd.values[dim - multiplicity - 1] <= cut {
        return Err(Error::ChainExtraction(format!("generalized eigenspace has dimension above {multiplicity}")));
    }
    if svd.values.iter().any(|&s| s > cut / 10.0 && s < cut * 10.0) {
        warnings.push("borderline rank decision for the generalized eigenspace".to_string());
    }
    let basis = svd.right.columns(dim - multiplicity, multiplicity).into_owned();
    let restricted = basis.adjoint() * a_full * &basis;

    // null((A|H)^k) for k = 1..=top
    let mut levels: Vec<DMatrix<T>> = vec![DMatrix::zeros(multiplicity, 0)];
    let mut bk = DMatrix::<T>::identity(multiplicity, multiplicity);
    for k in 1..=multiplicity {
        bk = &bk * &restricted;
        let threshold = tol.rank * scale.powi(k as i32);
        let (null, borderline) = null_space(&bk, threshold, multiplicity);
        if borderline {
            warnings.push(format!("borderline rank decision at filtration level {k}"));
        }
        let previous = levels.last().expect("level 0 present").ncols();
        if null.ncols() <= previous {
            return Err(Error::ChainExtraction(format!(
                "filtration stalled at level {k} with dimension {previous} of {multiplicity}"
            )));
        }
        let done = null.ncols() == multiplicity;
        levels.push(null);
        if done {
            break;
        }
    }
    let top = levels.len() - 1;

    let mut chains: Vec<(DVector<T>, usize)> = Vec::new();
    for k in (1..=top).rev() {
        let longer = chains.len();
        let fresh = levels[k].ncols() as isize - levels[k - 1].ncols() as isize - longer as isize;
        if fresh < 0 {
            return Err(Error::ChainExtraction(format!("filtration dimensions are inconsistent at level {k}")));
        }
        if fresh == 0 {
            continue;
        }
        let mut span: Vec<DVector<T>> = levels[k - 1].column_iter().map(|c| c.into_owned()).collect();
        for (y, rank) in &chains {
            span.push(power(&restricted, rank - k) * y);
        }
        let occupied = if span.is_empty() {
            DMatrix::zeros(multiplicity, 0)
        } else {
            orthonormal_span(&DMatrix::from_columns(&span), 1e-8)
        };
        let candidates = project_out(&occupied, &levels[k]);
        let picked = pivoted_select(&candidates, fresh as usize, 1e-8)
            .ok_or_else(|| Error::ChainExtraction(format!("no complement of the required dimension at level {k}")))?;
        chains.extend(picked.into_iter().map(|y| (y, k)));
    }
    Ok(Filtration { basis, chains, warnings })
}

fn chains_at<T: Scalar>(
    k: &EquationOfMotionMatrix,
    k_t: &DMatrix<T>,
    lambda: T,
    multiplicity: usize,
    tol: &Tolerances,
) -> Result<(Vec<JordanChain>, Vec<String>)> {
    let dim = k_t.nrows();
    let a = k_t - DMatrix::<T>::identity(dim, dim) * lambda;
    let scale = a.norm().max(1.0);
    let f = filtration(&a, multiplicity, tol)?;
    let lambda_c = lambda.to_c64();
    let mut out = Vec::with_capacity(f.chains.len());
    for (y, rank) in f.chains {
        let g = &f.basis * y;
        let g = complexify_vec(&g.unscale(g.norm()));
        let chain = JordanChain::new(k, lambda_c, g, rank);
        let kc = complexify(k.entries());
        let top = chain.chain_vectors[0].clone();
        let annihilated = (&kc * &top - &top * lambda_c).norm();
        if annihilated > 1e-6 * scale.powi(rank as i32) {
            return Err(Error::ChainExtraction(format!(
                "chain of rank {rank} is not annihilated (residual {annihilated:.3e})"
            )));
        }
        out.push(chain);
    }
    Ok((out, f.warnings))
}

fn chains_for(
    k: &EquationOfMotionMatrix,
    lambda: Complex64,
    multiplicity: usize,
    tol: &Tolerances,
) -> Result<(Vec<JordanChain>, Vec<String>)> {
    if lambda.im == 0.0 {
        chains_at(k, k.entries(), lambda.re, multiplicity, tol)
    } else {
        chains_at(k, &complexify(k.entries()), lambda, multiplicity, tol)
    }
}

/// Jordan chains of one eigenvalue class, with partners for `−λ` or conjugates.
pub fn jordan_chains(k: &EquationOfMotionMatrix, class: &EigenvalueClass, tol: &Tolerances) -> Result<ClassChains> {
    let lambda = class.representative;
    let (chains, mut warnings) = chains_for(k, lambda, class.algebraic, tol)?;
    let partners = match class.kind {
        EigenvalueKind::Zero => Vec::new(),
        EigenvalueKind::ImaginaryPair => chains.iter().map(JordanChain::conjugate).collect(),
        EigenvalueKind::RealPair | EigenvalueKind::ComplexQuadruplet => {
            let (partners, more) = chains_for(k, -lambda, class.algebraic, tol)?;
            warnings.extend(more);
            let ranks: Vec<usize> = chains.iter().map(|c| c.rank).collect();
            let partner_ranks: Vec<usize> = partners.iter().map(|c| c.rank).collect();
            if ranks != partner_ranks {
                return Err(Error::ChainExtraction(format!(
                    "chain ranks {ranks:?} at λ differ from {partner_ranks:?} at −λ"
                )));
            }
            partners
        }
    };
    let mut class = *class;
    class.geometric = Some(chains.len());
    Ok(ClassChains { class, chains, partners, cases: Vec::new(), counts: CaseCounts::default(), warnings })
}

/// Labels every chain with its case and computes the `l`/`n` counts.
pub fn assign_cases(mut set: JordanChainSet) -> Result<JordanChainSet> {
    for entry in &mut set.entries {
        entry.cases = entry.chains.iter().map(|c| Case::for_chain(entry.class.kind, c.rank)).collect();
        let even = entry.chains.iter().filter(|c| c.rank % 2 == 0).count();
        let odd = entry.chains.len() - even;
        entry.counts = match entry.class.kind {
            EigenvalueKind::Zero => {
                if odd % 2 != 0 {
                    return Err(Error::Structure(format!(
                        "zero eigenvalue has {odd} odd-rank chains; the count must be even"
                    )));
                }
                CaseCounts { l: even, n: odd / 2 }
            }
            EigenvalueKind::ImaginaryPair => CaseCounts { l: even, n: odd },
            _ => CaseCounts::default(),
        };
    }
    Ok(set)
}

/// Chains for every class of the report, with cases assigned.
pub fn extract_chains(
    k: &EquationOfMotionMatrix,
    spectrum: &SpectrumReport,
    tol: &Tolerances,
) -> Result<JordanChainSet> {
    let entries = spectrum.classes.iter().map(|class| jordan_chains(k, class, tol)).collect::<Result<Vec<_>>>()?;
    assign_cases(JordanChainSet { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::{build_eom, j_matrix, HamiltonianMatrix};

    fn eom(rows: usize, data: &[f64]) -> EquationOfMotionMatrix {
        let m = DMatrix::from_row_slice(rows, rows, data);
        build_eom(&HamiltonianMatrix::new(m, &Tolerances::default()).unwrap())
    }

    fn two_mode(eta: f64, lambda: f64) -> EquationOfMotionMatrix {
        eom(4, &[1.0, lambda, 0.0, 0.0, lambda, eta, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, eta])
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rotation_generator_clusters_into_one_pair() {
        let k = EquationOfMotionMatrix::new(j_matrix(2), &Tolerances::default()).unwrap();
        let mut clusters = cluster_eigenvalues(&k, &Tolerances::default()).unwrap();
        clusters.sort_by(|a, b| b.value.im.partial_cmp(&a.value.im).unwrap());
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].multiplicity, 2);
        assert_eq!(clusters[1].multiplicity, 2);
        assert!((clusters[0].value - c(0.0, 1.0)).norm() < 1e-12);
        assert_eq!(clusters[1].value, clusters[0].value.conj());
        let report = analyze_spectrum(&k, &Tolerances::default()).unwrap();
        assert_eq!(report.classes.len(), 1);
        assert_eq!(report.classes[0].kind, EigenvalueKind::ImaginaryPair);
        assert_eq!(report.classes[0].geometric, Some(2));
    }

    #[test]
    fn defective_zero_at_the_two_mode_boundary() {
        let report = analyze_spectrum(&two_mode(1.0, 1.0), &Tolerances::default()).unwrap();
        assert_eq!(report.sum_rule_residual, 0);
        let zero = report.classes.iter().find(|c| c.kind == EigenvalueKind::Zero).unwrap();
        assert_eq!((zero.algebraic, zero.geometric), (2, Some(1)));
        let imag = report.classes.iter().find(|c| c.kind == EigenvalueKind::ImaginaryPair).unwrap();
        assert!((imag.representative - c(0.0, 2f64.sqrt())).norm() < 1e-12);
    }

    #[test]
    fn quadruplet_region() {
        let report = analyze_spectrum(&two_mode(-1.0, 0.5), &Tolerances::default()).unwrap();
        assert_eq!(report.classes.len(), 1);
        let q = report.classes[0];
        assert_eq!(q.kind, EigenvalueKind::ComplexQuadruplet);
        assert_eq!(q.algebraic, 1);
        // λ² = (−2 ± i)/2
        let sq = q.representative * q.representative;
        assert!((sq - c(-1.0, 0.5)).norm() < 1e-12 || (sq - c(-1.0, -0.5)).norm() < 1e-12);
    }

    #[test]
    fn unpaired_clusters_rejected() {
        let clusters = [Cluster { value: c(2.0, 0.0), multiplicity: 1 }];
        assert!(matches!(classify_spectrum(&clusters), Err(Error::SpectrumStructure(_))));
        let odd_zero = [Cluster { value: c(0.0, 0.0), multiplicity: 1 }];
        assert!(matches!(classify_spectrum(&odd_zero), Err(Error::SpectrumStructure(_))));
    }

    #[test]
    fn classification_of_given_clusters() {
        let clusters = [
            Cluster { value: c(2.0, 0.0), multiplicity: 2 },
            Cluster { value: c(-2.0, 0.0), multiplicity: 2 },
            Cluster { value: c(0.0, 0.0), multiplicity: 2 },
            Cluster { value: c(0.0, 3.0), multiplicity: 1 },
            Cluster { value: c(0.0, -3.0), multiplicity: 1 },
        ];
        let report = classify_spectrum(&clusters).unwrap();
        let kinds: Vec<_> = report.classes.iter().map(|c| (c.kind, c.algebraic)).collect();
        assert_eq!(
            kinds,
            vec![(EigenvalueKind::RealPair, 2), (EigenvalueKind::Zero, 2), (EigenvalueKind::ImaginaryPair, 1)]
        );
        assert_eq!(report.sum_rule_residual, 0);
    }

    #[test]
    fn triple_jordan_block_is_clustered() {
        // K_N of a zero-odd block with D = 3 after a random-ish symplectic shear
        let mut kn = DMatrix::<f64>::zeros(6, 6);
        kn[(1, 0)] = 1.0;
        kn[(2, 1)] = 1.0;
        kn[(3, 4)] = -1.0;
        kn[(4, 5)] = -1.0;
        let mut s = DMatrix::<f64>::identity(6, 6);
        let sym = DMatrix::from_row_slice(3, 3, &[0.3, -0.2, 0.5, -0.2, 1.1, 0.4, 0.5, 0.4, -0.7]);
        s.view_mut((0, 3), (3, 3)).copy_from(&sym);
        let inv = {
            let mut i = DMatrix::<f64>::identity(6, 6);
            i.view_mut((0, 3), (3, 3)).copy_from(&(-sym));
            i
        };
        let k = EquationOfMotionMatrix::new(&s * kn * inv, &Tolerances::default()).unwrap();
        let report = analyze_spectrum(&k, &Tolerances::default()).unwrap();
        assert_eq!(report.classes.len(), 1);
        assert_eq!(report.classes[0].algebraic, 6);
        let set = extract_chains(&k, &report, &Tolerances::default()).unwrap();
        let ranks: Vec<usize> = set.entries[0].chains.iter().map(|c| c.rank).collect();
        assert_eq!(ranks, vec![3, 3]);
        assert_eq!(set.entries[0].cases, vec![Case::ZeroOdd, Case::ZeroOdd]);
        assert_eq!(set.entries[0].counts, CaseCounts { l: 0, n: 1 });
    }

    #[test]
    fn chains_satisfy_definition() {
        let k = two_mode(1.0, 1.0);
        let tol = Tolerances::default();
        let set = extract_chains(&k, &analyze_spectrum(&k, &tol).unwrap(), &tol).unwrap();
        let kc = complexify(k.entries());
        for entry in &set.entries {
            for (chain, case) in entry.chains.iter().zip(&entry.cases) {
                let lam = chain.eigenvalue;
                let top = &chain.chain_vectors[0];
                assert!((&kc * top - top * lam).norm() < 1e-9);
                assert!((chain.generator.norm() - 1.0).abs() < 1e-12);
                if entry.class.kind == EigenvalueKind::Zero {
                    assert_eq!((*case, chain.rank), (Case::ZeroEven, 2));
                }
            }
            if entry.class.kind == EigenvalueKind::ImaginaryPair {
                assert_eq!(entry.partners[0].generator, entry.chains[0].generator.conjugate());
            }
        }
    }
}
