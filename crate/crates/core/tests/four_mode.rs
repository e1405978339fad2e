//! The four-mode example with a real pair at ±2, a doubly degenerate zero
//! eigenvalue and an imaginary pair at ±3i.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qhnf::algebra::{alpha, omega};
use qhnf::config::{Config, Tolerances};
use qhnf::linalg::CVec;
use qhnf::normal_form::{normal_form, Verdict};
use qhnf::quadratic::{build_eom, HamiltonianMatrix};
use qhnf::spectrum::EigenvalueKind;

#[rustfmt::skip]
const FOUR_MODE: [f64; 64] = [
    -21.0, -11.0, -17.0, -45.0,  16.0,   7.0, -3.0,  22.0,
    -11.0,   2.0,  -6.0, -15.0,   3.0,   6.0, -3.0,   9.0,
    -17.0,  -6.0,  -3.0, -29.0,   8.0,   4.0,  0.0,  16.0,
    -45.0, -15.0, -29.0, -60.0,  19.0,  16.0,  0.0,  33.0,
     16.0,   3.0,   8.0,  19.0,  -5.0,  -6.0,  0.0, -11.0,
      7.0,   6.0,   4.0,  16.0,  -6.0,  -1.0,  0.0,  -8.0,
     -3.0,  -3.0,   0.0,   0.0,   0.0,   0.0,  3.0,   0.0,
     22.0,   9.0,  16.0,  33.0, -11.0,  -8.0,  0.0, -17.0,
];

fn four_mode() -> HamiltonianMatrix {
    HamiltonianMatrix::new(DMatrix::from_row_slice(8, 8, &FOUR_MODE), &Tolerances::default()).unwrap()
}

fn real(v: &[f64]) -> CVec {
    CVec::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}

#[test]
fn spectrum_is_clustered_to_integers() {
    let report = normal_form(&four_mode(), &Config::default()).unwrap();
    let classes = &report.spectrum.classes;
    assert_eq!(classes.len(), 3);
    let expect = [
        (EigenvalueKind::RealPair, Complex64::new(2.0, 0.0), 2, 1),
        (EigenvalueKind::Zero, Complex64::new(0.0, 0.0), 2, 2),
        (EigenvalueKind::ImaginaryPair, Complex64::new(0.0, 3.0), 1, 1),
    ];
    for (class, (kind, value, a, m)) in classes.iter().zip(expect) {
        assert_eq!(class.kind, kind);
        assert!((class.representative - value).norm() < 1e-8, "{:?}", class.representative);
        assert_eq!(class.algebraic, a);
        assert_eq!(class.geometric, Some(m));
    }
    assert_eq!(report.spectrum.sum_rule_residual, 0);
}

#[test]
fn transform_and_normal_form_match() {
    let report = normal_form(&four_mode(), &Config::default()).unwrap();
    assert!(report.residuals.symplectic <= 1e-10, "{}", report.residuals.symplectic);
    let mut expected = DMatrix::<f64>::zeros(8, 8);
    for (i, j, v) in [(0, 4, 2.0), (0, 5, 1.0), (1, 5, 2.0), (3, 3, 3.0), (7, 7, 3.0)] {
        expected[(i, j)] = v;
        expected[(j, i)] = v;
    }
    let n = report.n_matrix.entries();
    let diff = (n - &expected).abs().max();
    assert!(diff <= 1e-8, "N differs by {diff}\n{n:.6}");
    assert_eq!(report.hamiltonian_expression(), "2(X1 P1 + X2 P2) + X1 P2 + 1.5(X4^2 + P4^2)");
    assert_eq!(report.zero_frequency_mode_count, 1);
    assert!(matches!(report.verdict, Verdict::Unstable { .. }));
}

#[test]
fn seeded_generators_reproduce_intermediate_values() {
    let k = build_eom(&four_mode());
    let g11 = real(&[-1.0, 2.0, 0.0, 1.0, 3.0, -1.0, 1.0, 0.0]);
    let g11_partner = real(&[3.0, -6.0, 0.0, -2.0, -12.0, 8.0, -3.0, 0.0]);
    let gram = omega(&k, Complex64::new(2.0, 0.0), &g11, 2, &g11_partner);
    assert!((gram.coefficients[0] - Complex64::new(-10.0, 0.0)).norm() < 1e-10);
    assert!((gram.coefficients[1] - Complex64::new(13.0, 0.0)).norm() < 1e-10);

    let g01 = real(&[2.0, 2.0, -1.0, 1.0, 1.0, 0.0, 4.0, 4.0]);
    let g02 = real(&[0.0, 0.0, 1.0, 1.0, 3.0, 2.0, 0.0, 0.0]);
    let a0 = alpha(&k, Complex64::new(0.0, 0.0), &g01, 1, &g02);
    assert!((a0 - Complex64::new(2.0, 0.0)).norm() < 1e-10);

    let c = |re: f64, im: f64| Complex64::new(re, im);
    let g21 = CVec::from_vec(vec![
        c(1.0, 0.0),
        c(1.0, 0.0),
        c(0.0, -1.0),
        c(1.0, 0.0),
        c(2.0, -1.0),
        c(1.0, -1.0),
        c(3.0, 0.0),
        c(2.0, 0.0),
    ]);
    let a3i = alpha(&k, c(0.0, 3.0), &g21, 1, &g21.map(|z| z.conj()));
    assert!((a3i - c(0.0, -2.0)).norm() < 1e-10, "{a3i}");
}
