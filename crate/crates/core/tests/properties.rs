use proptest::prelude::*;

use homosem::agreement::{cohen_kappa, pooled_kappa, AnnotationSheet, Label};
use homosem::context_embed::{sentence_vector_ctx, target_vector, CeifRecord, CeifToken, ContextStrategy};
use homosem::eval::{aggregate_cells, cosine, score_triple, Cell};
use homosem::{SentenceKey, TargetSpan};

fn triple(dim: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    let v = || prop::collection::vec(-10.0f64..10.0, dim);
    (v(), v(), v())
}

fn sized_triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..40).prop_flat_map(triple)
}

fn nonzero(v: &[f64]) -> bool {
    v.iter().any(|x| x.abs() > 1e-6)
}

proptest! {
    #[test]
    fn cosine_bounded_and_symmetric((a, b, _) in sized_triple()) {
        prop_assume!(nonzero(&a) && nonzero(&b));
        let x = cosine(&a, &b).unwrap();
        prop_assert!(x.abs() <= 1.0 + 1e-12);
        prop_assert_eq!(x, cosine(&b, &a).unwrap());
    }

    #[test]
    fn verdict_scale_invariant((a, b, c) in sized_triple(), ka in 1e-3f64..1e3, kb in 1e-3f64..1e3, kc in 1e-3f64..1e3) {
        prop_assume!(nonzero(&a) && nonzero(&b) && nonzero(&c));
        let base = score_triple(&a, &b, &c).unwrap();
        // skip draws whose margin sits at rounding level
        prop_assume!((base.sim1 - base.sim2).abs() > 1e-9 && (base.sim1 - base.sim3).abs() > 1e-9);
        let s = |v: &[f64], k: f64| v.iter().map(|x| x * k).collect::<Vec<_>>();
        let scaled = score_triple(&s(&a, ka), &s(&b, kb), &s(&c, kc)).unwrap();
        prop_assert_eq!(base.correct, scaled.correct);
    }

    #[test]
    fn verdict_anchor_swap((a, b, c) in sized_triple()) {
        prop_assume!(nonzero(&a) && nonzero(&b) && nonzero(&c));
        let x = score_triple(&a, &b, &c).unwrap();
        let y = score_triple(&b, &a, &c).unwrap();
        prop_assert_eq!(x.correct, y.correct);
        prop_assert_eq!(x.sim1, y.sim1);
        prop_assert_eq!((x.sim2, x.sim3), (y.sim3, y.sim2));
    }

    #[test]
    fn micro_of_partition_is_pooled(cells in prop::collection::vec((1usize..50, 0usize..50), 1..8)) {
        let cells: Vec<Cell> = cells.into_iter().map(|(n, c)| Cell { n, correct: c.min(n), failures: 0 }).collect();
        let (_, micro) = aggregate_cells(&cells);
        let n: usize = cells.iter().map(|c| c.n).sum();
        let k: usize = cells.iter().map(|c| c.correct).sum();
        prop_assert!((micro.unwrap() - k as f64 / n as f64).abs() < 1e-15);
    }

    #[test]
    fn kappa_properties(labels in prop::collection::vec((any::<bool>(), any::<bool>()), 2..60)) {
        let sheet = |pick: fn(&(bool, bool)) -> bool, flip: bool| AnnotationSheet {
            annotator_id: "s".into(),
            pairs: labels
                .iter()
                .enumerate()
                .map(|(i, l)| (format!("r{i}"), Some(Label::from_bool(pick(l) != flip))))
                .collect(),
        };
        let a = sheet(|l| l.0, false);
        let b = sheet(|l| l.1, false);
        let k = cohen_kappa(&a, &b).unwrap().kappa;
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
        prop_assert!((k - cohen_kappa(&b, &a).unwrap().kappa).abs() < 1e-12);
        let kf = cohen_kappa(&sheet(|l| l.0, true), &sheet(|l| l.1, true)).unwrap().kappa;
        prop_assert!((k - kf).abs() < 1e-12);
        prop_assert_eq!(cohen_kappa(&a, &a).unwrap().kappa, 1.0);
        prop_assert!((pooled_kappa(&[(&a, &b)]).unwrap().kappa - k).abs() < 1e-15);
    }

    #[test]
    fn ceif_layer_algebra(layers in 4usize..10, hidden in 1usize..12, pieces in 1usize..4, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 40) as f32 / (1u64 << 24) as f32 - 0.5
        };
        let mut tokens = vec![CeifToken { text: "<s>".into(), start: 0, end: 0, special: true, word_index: None }];
        for p in 0..pieces {
            tokens.push(CeifToken { text: format!("p{p}"), start: 2 * p, end: 2 * p + 2, special: false, word_index: Some(0) });
        }
        tokens.push(CeifToken { text: "x".into(), start: 2 * pieces + 1, end: 2 * pieces + 2, special: false, word_index: Some(1) });
        let n = tokens.len();
        let stack: Vec<Vec<Vec<f32>>> = (0..layers).map(|_| (0..n).map(|_| (0..hidden).map(|_| next()).collect()).collect()).collect();
        let rec = CeifRecord::new(SentenceKey::new("w", "1", 1), "m", hidden, false, tokens, stack).unwrap();
        let span = vec![TargetSpan::new(0, 2 * pieces, "w")];
        let cat = target_vector(&rec, &span, ContextStrategy::Cat { last_n: 4 }).unwrap();
        let add = target_vector(&rec, &span, ContextStrategy::Add { last_n: 4 }).unwrap();
        prop_assert_eq!(cat.len(), 4 * hidden);
        prop_assert_eq!(add.len(), hidden);
        for (i, l) in (layers - 3..=layers).enumerate() {
            let lay = target_vector(&rec, &span, ContextStrategy::Lay { layer: l }).unwrap();
            // cat of layer means equals the layer means laid side by side
            prop_assert_eq!(&cat[i * hidden..(i + 1) * hidden], &lay[..]);
        }
        for h in 0..hidden {
            let s: f32 = (0..4).map(|i| cat[i * hidden + h]).sum();
            prop_assert!((s - add[h]).abs() < 1e-5);
        }
        prop_assert_eq!(sentence_vector_ctx(&rec, 4).unwrap().len(), 4 * hidden);
    }
}
