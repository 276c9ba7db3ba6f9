//! Property tests for formats, scoring and selection invariants.

use proptest::prelude::*;

use prunekit::alignment::{self, AlignmentScores, CrossMetric};
use prunekit::pipeline::{self, PruneConfig};
use prunekit::repmax;
use prunekit::tokenset::{self, Modality, Selection, TokenMatrix, Violation};

fn matrix(rows: std::ops::RangeInclusive<usize>, dim: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = TokenMatrix> {
    (rows, dim).prop_flat_map(|(r, d)| {
        prop::collection::vec(-4.0f32..4.0, r * d)
            .prop_map(move |data| TokenMatrix::new(Modality::Visual, r, d, data).unwrap())
    })
}

fn nonzero_rows(m: &TokenMatrix) -> bool {
    m.iter_rows().all(|r| r.iter().any(|&v| v != 0.0))
}

/// Small integer coordinates keep every intermediate sum exact.
fn integer_pair(max_rows: usize) -> impl Strategy<Value = (TokenMatrix, TokenMatrix)> {
    (3..=max_rows, 1..=4usize, 1..=5usize).prop_flat_map(|(n, m, d)| {
        let cell = (-8i8..=8).prop_map(f32::from);
        (
            prop::collection::vec(cell.clone(), n * d),
            prop::collection::vec(cell, m * d),
        )
            .prop_map(move |(v, t)| {
                (
                    TokenMatrix::new(Modality::Visual, n, d, v).unwrap(),
                    TokenMatrix::new(Modality::Textual, m, d, t).unwrap(),
                )
            })
            .prop_filter("zero row", |(v, _)| nonzero_rows(v))
    })
}

fn finite_f32() -> impl Strategy<Value = f32> {
    any::<f32>().prop_filter("finite", |v| v.is_finite())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tpk_round_trip_is_bit_exact(
        (r, d, data) in (1..6usize, 1..6usize).prop_flat_map(|(r, d)| (Just(r), Just(d), prop::collection::vec(finite_f32(), r * d))),
        textual in any::<bool>(),
    ) {
        let modality = if textual { Modality::Textual } else { Modality::Visual };
        let m = TokenMatrix::new(modality, r, d, data).unwrap();
        let back = tokenset::decode_tpk(&tokenset::encode_tpk(&m)).unwrap();
        prop_assert_eq!(back.modality(), modality);
        prop_assert_eq!((back.rows(), back.dim()), (r, d));
        let bits = |x: &TokenMatrix| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn csv_round_trip_is_bit_exact(
        (r, d, data) in (1..6usize, 1..6usize).prop_flat_map(|(r, d)| (Just(r), Just(d), prop::collection::vec(finite_f32(), r * d))),
    ) {
        let m = TokenMatrix::new(Modality::Visual, r, d, data).unwrap();
        let back = tokenset::decode_csv(&tokenset::encode_csv(&m), Modality::Visual).unwrap();
        let bits = |x: &TokenMatrix| x.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn validate_reports_exactly_the_violations(
        rows in 0..4usize,
        dim in 0..4usize,
        data in prop::collection::vec(prop_oneof![4 => -1.0f32..1.0, 1 => Just(f32::NAN), 1 => Just(f32::INFINITY)], 0..12),
    ) {
        let mut expected = Vec::new();
        if rows == 0 { expected.push(Violation::NoRows); }
        if dim == 0 { expected.push(Violation::NoDims); }
        if rows * dim != data.len() {
            expected.push(Violation::LengthMismatch { expected: rows * dim, actual: data.len() });
        }
        if dim > 0 {
            for (k, v) in data.iter().enumerate() {
                if !v.is_finite() {
                    expected.push(Violation::NonFinite { row: k / dim, col: k % dim });
                }
            }
        }
        prop_assert_eq!(tokenset::validate(rows, dim, &data), expected.clone());
        prop_assert_eq!(TokenMatrix::new(Modality::Visual, rows, dim, data).is_ok(), expected.is_empty());
    }

    #[test]
    fn selection_json_round_trip(
        (n, picks) in (1..40usize).prop_flat_map(|n| (Just(n), Just((0..n).collect::<Vec<_>>()).prop_shuffle())),
        take in 0..40usize,
        scored in any::<bool>(),
    ) {
        let indices: Vec<usize> = picks.into_iter().take(take.min(n)).collect();
        let scores = scored.then(|| indices.iter().map(|&i| (i as f64).sqrt() / 3.0).collect());
        let sel = Selection::new(n, indices, scores).unwrap();
        let text = serde_json::to_string(&sel).unwrap();
        prop_assert_eq!(tokenset::parse_selection(&text).unwrap(), sel);
    }

    #[test]
    fn l2_scores_are_translation_invariant(
        (v, t) in (1..8usize, 1..5usize, 1..8usize).prop_flat_map(|(n, m, d)| (
            prop::collection::vec(-1.0f32..1.0, n * d).prop_map(move |x| TokenMatrix::new(Modality::Visual, n, d, x).unwrap()),
            prop::collection::vec(-1.0f32..1.0, m * d).prop_map(move |x| TokenMatrix::new(Modality::Textual, m, d, x).unwrap()),
        )),
        shift in prop::collection::vec(-5.0f32..5.0, 8),
    ) {
        let base = alignment::score_l2(&v, &t).unwrap();
        let moved = alignment::score_l2(
            &v.map(|_, c, x| x + shift[c]).unwrap(),
            &t.map(|_, c, x| x + shift[c]).unwrap(),
        ).unwrap();
        for (a, b) in base.values.iter().zip(&moved.values) {
            prop_assert!((a - b).abs() <= 1e-5, "{} vs {}", a, b);
        }
    }

    #[test]
    fn l2_scores_scale_with_the_data(v in matrix(1..=6, 1..=6), c in 0.01f32..100.0) {
        let t = v.gather(&[0]).with_modality(Modality::Textual);
        let base = alignment::score_l2(&v, &t).unwrap();
        let scaled = alignment::score_l2(&v.map(|_, _, x| x * c).unwrap(), &t.map(|_, _, x| x * c).unwrap()).unwrap();
        for (a, b) in base.values.iter().zip(&scaled.values) {
            let want = a * f64::from(c);
            prop_assert!((b - want).abs() <= 1e-5 * (1.0 + want.abs()), "{} vs {}", b, want);
        }
    }

    #[test]
    fn cosine_scores_ignore_power_of_two_row_scaling(
        v in matrix(1..=6, 1..=6).prop_filter("zero row", nonzero_rows),
        exps in prop::collection::vec(-6i32..=6, 6),
    ) {
        let t = v.gather(&[v.rows() - 1]).with_modality(Modality::Textual);
        let scaled = v.map(|r, _, x| x * 2f32.powi(exps[r])).unwrap();
        prop_assert_eq!(alignment::score_cosine(&v, &t).unwrap(), alignment::score_cosine(&scaled, &t).unwrap());
    }

    #[test]
    fn similarity_ignores_power_of_two_row_scaling(
        v in matrix(2..=7, 1..=6).prop_filter("zero row", nonzero_rows),
        exps in prop::collection::vec(-6i32..=6, 7),
    ) {
        let all = Selection::all(v.rows());
        let scaled = v.map(|r, _, x| x * 2f32.powi(exps[r])).unwrap();
        let a = repmax::build_similarity(&v, &all).unwrap();
        let b = repmax::build_similarity(&scaled, &all).unwrap();
        prop_assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn select_top_full_keep_is_identity(values in prop::collection::vec(-10.0f64..10.0, 1..30)) {
        let n = values.len();
        let scores = AlignmentScores { metric: CrossMetric::L2, values };
        let top = alignment::select_top(&scores, n).unwrap();
        prop_assert_eq!(top.indices().to_vec(), (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn select_top_is_nested(values in prop::collection::vec(-3i8..3, 2..30), k in 0..29usize) {
        let n = values.len();
        let k = 1 + k % (n - 1);
        let scores = AlignmentScores { metric: CrossMetric::L2, values: values.iter().map(|&v| f64::from(v)).collect() };
        let small = alignment::select_top(&scores, k).unwrap();
        let large = alignment::select_top(&scores, k + 1).unwrap();
        prop_assert!(small.indices().windows(2).all(|w| w[0] < w[1]));
        prop_assert!(small.indices().iter().all(|i| large.indices().contains(i)));
    }

    #[test]
    fn greedy_is_bounded_by_exact(v in matrix(3..=9, 2..=6).prop_filter("zero row", nonzero_rows), keep in 2..9usize) {
        let n = v.rows();
        let keep = 2 + keep % (n - 1);
        let sim = repmax::build_similarity(&v, &Selection::all(n)).unwrap();
        let greedy = repmax::objective(&sim, &repmax::greedy_repmax(&sim, keep).unwrap()).unwrap();
        let exact = repmax::objective(&sim, &repmax::exact_solve(&sim, keep).unwrap()).unwrap();
        prop_assert!((0.0..=2.0).contains(&greedy));
        prop_assert!((0.0..=2.0).contains(&exact));
        prop_assert!(greedy <= exact + 1e-12, "{} > {}", greedy, exact);
    }

    #[test]
    fn prune_is_deterministic_and_echoes_config((v, t) in integer_pair(12), keep in 1..12usize, ratio in 0.1f64..1.0) {
        let n = v.rows();
        let config = PruneConfig::new(1 + keep % n).with_ratio(ratio);
        let a = pipeline::prune(&v, &t, &config).unwrap();
        let b = pipeline::prune(&v, &t, &config).unwrap();
        prop_assert!(a.same_result(&b));
        prop_assert_eq!(&a.config, &config);
        prop_assert_eq!(a.stage1.len(), pipeline::resolve_n1(n, &config));
        prop_assert_eq!(a.stage2.len(), config.keep_final);
    }

    #[test]
    fn prune_ignores_global_power_of_two_scaling((v, t) in integer_pair(12), keep in 1..12usize, e in -5i32..=5) {
        let config = PruneConfig::new(1 + keep % v.rows());
        let c = 2f32.powi(e);
        let base = pipeline::prune(&v, &t, &config).unwrap();
        let scaled = pipeline::prune(&v.map(|_, _, x| x * c).unwrap(), &t.map(|_, _, x| x * c).unwrap(), &config).unwrap();
        prop_assert_eq!(base.stage1.indices(), scaled.stage1.indices());
        prop_assert_eq!(base.stage2.indices(), scaled.stage2.indices());
    }

    #[test]
    fn stage_one_ignores_translation((v, t) in integer_pair(12), keep in 1..12usize, shift in prop::collection::vec(-8i8..=8, 5)) {
        let config = PruneConfig::new(1 + keep % v.rows());
        let moved = |m: &TokenMatrix| m.map(|_, c, x| x + f32::from(shift[c])).unwrap();
        let base = pipeline::prune(&v, &t, &config).unwrap();
        let translated = pipeline::prune(&moved(&v), &moved(&t), &config);
        // A shift can zero a row, which the cosine stage rejects.
        if let Ok(translated) = translated {
            prop_assert_eq!(base.stage1.indices(), translated.stage1.indices());
            prop_assert_eq!(&base.alignment_scores, &translated.alignment_scores);
        }
    }
}
