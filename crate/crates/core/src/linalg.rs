//! Dense helpers shared by the pipeline stages.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, SVD};
use num_complex::Complex64;

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Scalars the rank-revealing helpers run over: `f64` for real eigenvalues,
/// `Complex64` otherwise.
pub trait Scalar: ComplexField<RealField = f64> + Copy {
    fn to_c64(self) -> Complex64;
}

impl Scalar for f64 {
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn to_c64(self) -> Complex64 {
        self
    }
}

pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.modulus()))
}

pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn complexify_vec<T: Scalar>(v: &DVector<T>) -> CVec {
    v.map(|x| x.to_c64())
}

pub fn real_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// `J v` for `v = (x, p)`, i.e. `(p, -x)`.
pub fn apply_j(v: &CVec) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(v.len(), |i, _| if i < n { v[i + n] } else { -v[i - n] })
}

/// The bilinear symplectic product `uᵀ J v` (no conjugation).
pub fn symplectic_product(u: &CVec, v: &CVec) -> Complex64 {
    let n = u.len() / 2;
    (0..n).fold(Complex64::new(0.0, 0.0), |acc, i| acc + u[i] * v[i + n] - u[i + n] * v[i])
}

/// `Aᵀ J B` for matrices whose columns live in phase space.
pub fn symplectic_gram(a: &CMat, b: &CMat) -> CMat {
    CMat::from_fn(a.ncols(), b.ncols(), |i, j| symplectic_product(&a.column(i).into_owned(), &b.column(j).into_owned()))
}

pub struct SortedSvd<T: Scalar> {
    /// Singular values in descending order.
    pub values: Vec<f64>,
    /// Right singular vectors, columns ordered like `values`.
    pub right: DMatrix<T>,
}

pub fn sorted_svd<T: Scalar>(m: &DMatrix<T>) -> SortedSvd<T> {
    let n = m.ncols();
    let padded;
    // Pad short matrices so the SVD produces a full set of right vectors.
    let source = if m.nrows() < n {
        padded = m.clone().resize(n, n, T::zero());
        &padded
    } else {
        m
    };
    let svd = SVD::new(source.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let right = DMatrix::from_fn(n, n, |r, c| v_t[(order[c], r)].conjugate());
    SortedSvd { values, right }
}

/// Null space of `m` with singular values at most `threshold`. Returns the
/// basis and whether any singular value fell within a factor ten of the cut.
pub fn null_space<T: Scalar>(m: &DMatrix<T>, threshold: f64, cap: usize) -> (DMatrix<T>, bool) {
    let svd = sorted_svd(m);
    let n = svd.values.len();
    let nullity = svd.values.iter().filter(|&&s| s <= threshold).count().min(cap);
    let borderline = svd.values.iter().any(|&s| s > threshold / 10.0 && s < threshold * 10.0);
    (svd.right.columns(n - nullity, nullity).into_owned(), borderline)
}

/// Orthonormal basis of the column span, dropping columns whose residual
/// after projection falls below `threshold` times their original norm.
pub fn orthonormal_span<T: Scalar>(cols: &DMatrix<T>, threshold: f64) -> DMatrix<T> {
    let mut basis: Vec<DVector<T>> = Vec::new();
    for col in cols.column_iter() {
        let original = col.norm();
        if original == 0.0 {
            continue;
        }
        let mut v = col.into_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let r = v.norm();
        if r > threshold * original {
            basis.push(v.unscale(r));
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(cols.nrows(), 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

/// `(I − Q Qᴴ) x` for orthonormal `Q`.
pub fn project_out<T: Scalar>(q: &DMatrix<T>, x: &DMatrix<T>) -> DMatrix<T> {
    if q.ncols() == 0 {
        return x.clone();
    }
    let once = x - q * (q.adjoint() * x);
    &once - q * (q.adjoint() * &once)
}

/// Column-pivoted Gram-Schmidt: repeatedly take the candidate with the
/// largest residual norm (lowest index on ties), normalize it and deflate the
/// rest. Returns `count` orthonormal vectors, or `None` when the candidates
/// do not span enough directions above `floor`.
pub fn pivoted_select<T: Scalar>(candidates: &DMatrix<T>, count: usize, floor: f64) -> Option<Vec<DVector<T>>> {
    let mut pool: Vec<DVector<T>> = candidates.column_iter().map(|c| c.into_owned()).collect();
    let mut chosen = Vec::with_capacity(count);
    for _ in 0..count {
        let (best, norm) = pool
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((usize::MAX, 0.0), |acc, (i, n)| if n > acc.1 { (i, n) } else { acc });
        if best == usize::MAX || norm <= floor {
            return None;
        }
        let q = pool[best].unscale(norm);
        for v in pool.iter_mut() {
            let c = q.dotc(v);
            *v -= &q * c;
        }
        chosen.push(q);
    }
    Some(chosen)
}

/// Eigenvalues of a real matrix via the real Schur form.
///
/// The QR iteration can stall on exactly defective inputs such as nilpotent
/// Jordan blocks. On failure the matrix is first rotated by a fixed generic
/// orthogonal matrix, then shifted; both leave the spectrum unchanged up to
/// rounding.
pub fn eigenvalues(m: &DMatrix<f64>) -> Option<Vec<Complex64>> {
    let n = m.nrows();
    let max_iter = 200 * n.max(1);
    let run = |a: DMatrix<f64>| {
        Schur::try_new(a, f64::EPSILON, max_iter).map(|s| s.complex_eigenvalues().iter().cloned().collect::<Vec<_>>())
    };
    if let Some(values) = run(m.clone()) {
        return Some(values);
    }
    let generic = DMatrix::from_fn(n, n, |i, j| ((7 * i + 13 * j + 1) as f64).sin());
    let q = generic.qr().q();
    if let Some(values) = run(q.transpose() * m * &q) {
        return Some(values);
    }
    let shift = 0.37 * (1.0 + m.norm());
    run(m + DMatrix::<f64>::identity(n, n) * shift).map(|values| values.into_iter().map(|z| z - shift).collect())
}

/// Ratio of extreme singular values.
pub fn condition_estimate<T: Scalar>(m: &DMatrix<T>) -> f64 {
    let values = m.clone().singular_values();
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symplectic_product_matches_matrix_form() {
        let u = CVec::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.5, 0.0),
        ]);
        let v = CVec::from_vec(vec![
            Complex64::new(0.0, 1.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(-1.0, -1.0),
        ]);
        let expected = u.transpose() * apply_j(&v);
        assert!((symplectic_product(&u, &v) - expected[(0, 0)]).norm() < 1e-15);
        // uᵀJv = -vᵀJu
        assert!((symplectic_product(&u, &v) + symplectic_product(&v, &u)).norm() < 1e-15);
    }

    #[test]
    fn eigenvalues_of_nilpotent_blocks() {
        let mut m = DMatrix::<f64>::zeros(6, 6);
        m[(1, 0)] = 1.0;
        m[(2, 1)] = 1.0;
        m[(3, 4)] = -1.0;
        m[(4, 5)] = -1.0;
        let values = eigenvalues(&m).unwrap();
        assert_eq!(values.len(), 6);
        assert!(values.iter().all(|z| z.norm() < 1e-4));
    }

    #[test]
    fn null_space_of_rank_one() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, -2.0, -3.0]);
        let (basis, borderline) = null_space(&m, 1e-10, 3);
        assert_eq!(basis.ncols(), 2);
        assert!(!borderline);
        assert!((&m * &basis).norm() < 1e-12);
    }

    #[test]
    fn pivoted_select_prefers_largest_residual() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 3.0, 0.0, 1.0, 0.0]);
        let picked = pivoted_select(&m, 2, 1e-12).unwrap();
        assert!((picked[0][0] - 1.0).abs() < 1e-15);
        assert!((picked[1][1].abs() - 1.0).abs() < 1e-15);
        assert!(pivoted_select(&m, 3, 1e-12).is_none());
    }

    #[test]
    fn orthonormal_span_drops_dependent_columns() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let q = orthonormal_span(&m, 1e-12);
        assert_eq!(q.ncols(), 2);
        assert!((q.adjoint() * &q - DMatrix::<f64>::identity(2, 2)).norm() < 1e-14);
    }
}
