mod common;

use proptest::prelude::*;
use qhnf::config::{Config, Tolerances};
use qhnf::document::MatrixDocument;
use qhnf::normal_form::{normal_form, Verdict};

#[test]
fn four_mode_document_parses() {
    let rows = [
        "-21 -11 -17 -45 16 7 -3 22",
        "-11 2 -6 -15 3 6 -3 9",
        "-17 -6 -3 -29 8 4 0 16",
        "-45 -15 -29 -60 19 16 0 33",
        "16 3 8 19 -5 -6 0 -11",
        "7 6 4 16 -6 -1 0 -8",
        "-3 -3 0 0 0 0 3 0",
        "22 9 16 33 -11 -8 0 -17",
    ];
    let doc = MatrixDocument::parse(&format!("modes 4\n{}\n", rows.join("\n"))).unwrap();
    assert_eq!(doc.n_modes, 4);
    assert_eq!(doc.entries[(3, 3)], -60.0);
    let m = doc.hamiltonian(&Tolerances::default()).unwrap();
    let report = normal_form(&m, &Config::default()).unwrap();
    assert!(matches!(report.verdict, Verdict::Unstable { .. }));
}

#[test]
fn identity_document() {
    let doc = MatrixDocument::parse(r#"{"modes": 1, "matrix": [[1, 0], [0, 1]], "labels": ["q"]}"#).unwrap();
    assert_eq!(doc.n_modes, 1);
    assert_eq!(doc.labels.as_deref(), Some(&["q".to_string()][..]));
    let report = normal_form(&doc.hamiltonian(&Tolerances::default()).unwrap(), &Config::default()).unwrap();
    assert_eq!(report.verdict, Verdict::Stable);
}

fn decimal() -> impl Strategy<Value = String> {
    (any::<bool>(), 0u32..100000, 0u32..1000000, -12i32..12)
        .prop_map(|(neg, int, frac, exp)| format!("{}{int}.{frac:06}e{exp}", if neg { "-" } else { "" }))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn decimal_documents_round_trip_bit_exactly(modes in 1usize..4, words in prop::collection::vec(decimal(), 64)) {
        let d = 2 * modes;
        let mut rows = vec![vec![String::new(); d]; d];
        let mut next = words.iter().cycle();
        for i in 0..d {
            for j in i..d {
                let w = next.next().unwrap().clone();
                rows[i][j] = w.clone();
                rows[j][i] = w;
            }
        }
        let text = format!("modes {modes}\n{}\n", rows.iter().map(|r| r.join(" ")).collect::<Vec<_>>().join("\n"));
        let doc = MatrixDocument::parse(&text).unwrap();
        for i in 0..d {
            for j in 0..d {
                prop_assert_eq!(doc.entries[(i, j)].to_bits(), rows[i][j].parse::<f64>().unwrap().to_bits());
            }
        }
        let written = doc.to_text();
        let again = MatrixDocument::parse(&written).unwrap();
        prop_assert_eq!(&again, &doc);
        prop_assert_eq!(again.to_text(), written);
        prop_assert_eq!(&MatrixDocument::parse(&doc.to_json()).unwrap(), &doc);
    }
}

#[test]
fn sample_documents_analyze() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    for (name, verdict) in
        [("four_mode.txt", "unstable"), ("coupled_oscillators.json", "stable"), ("free_particle.txt", "unstable")]
    {
        let text = std::fs::read_to_string(dir.join(name)).unwrap();
        let doc = MatrixDocument::parse(&text).unwrap();
        let report = normal_form(&doc.hamiltonian(&Tolerances::default()).unwrap(), &Config::default()).unwrap();
        assert_eq!(report.verdict.label(), verdict, "{name}");
    }
}
