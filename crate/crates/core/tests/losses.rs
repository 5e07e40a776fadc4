mod common;

use common::*;
use mlrules::data::{Attribute, AttributeSchema, Body, Condition, Dataset, Example, Head, LabelVector, Rule, Value};
use mlrules::losses::{ExampleWiseLogistic, GradHessStore, LabelWiseLogistic, LossFunction, LossId, ScoreMatrix};
use mlrules::predict::predict_sign;
use proptest::prelude::*;

fn labels_and_scores() -> impl Strategy<Value = (Vec<i8>, Vec<f64>)> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::bool::ANY.prop_map(|b| if b { 1i8 } else { -1 }), n),
            prop::collection::vec(-5.0f64..5.0, n),
        )
    })
}

fn losses() -> [&'static dyn LossFunction; 2] {
    [&LabelWiseLogistic, &ExampleWiseLogistic]
}

proptest! {
    #[test]
    fn gradient_matches_finite_differences((y, q) in labels_and_scores()) {
        let y = LabelVector::new(y).unwrap();
        for loss in losses() {
            let g = loss.gradient(&y, &q).unwrap();
            let fd = fd_gradient(loss, y.as_slice(), &q, 1e-5);
            for k in 0..q.len() {
                prop_assert!(close(g[k], fd[k], 1e-5, 1e-8), "{:?} k={} {} vs {}", loss.id(), k, g[k], fd[k]);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences((y, q) in labels_and_scores()) {
        let y = LabelVector::new(y).unwrap();
        for loss in losses() {
            let h = loss.hessian(&y, &q).unwrap();
            let fd = fd_hessian(loss, &y, &q, 1e-5);
            for k in 0..q.len() {
                for j in 0..q.len() {
                    prop_assert!(close(h[k][j], fd[k][j], 1e-5, 1e-8));
                    prop_assert_eq!(h[k][j], h[j][k]);
                }
            }
        }
    }

    #[test]
    fn hessian_structure((y, q) in labels_and_scores()) {
        let y = LabelVector::new(y).unwrap();
        let lw = LabelWiseLogistic.hessian(&y, &q).unwrap();
        let ew = ExampleWiseLogistic.hessian(&y, &q).unwrap();
        for k in 0..q.len() {
            for j in 0..q.len() {
                if j != k {
                    prop_assert_eq!(lw[k][j], 0.0);
                    prop_assert!(ew[k][j] != 0.0);
                }
            }
        }
    }

    /// The example-wise loss bounds the subset 0/1 loss once measured in bits.
    #[test]
    fn example_wise_loss_bounds_subset_error((y, q) in labels_and_scores()) {
        let y = LabelVector::new(y).unwrap();
        let wrong = predict_sign(&q).unwrap() != y;
        let bits = ExampleWiseLogistic.evaluate(&y, &q).unwrap() / std::f64::consts::LN_2;
        let bound = if wrong { 1.0 } else { 0.0 };
        prop_assert!(bits >= bound, "{} bits for a {} prediction", bits, if wrong { "wrong" } else { "correct" });
    }
}

#[test]
fn natural_log_loss_alone_is_not_an_upper_bound() {
    // sgn(0) = -1 mispredicts y = +1 while the loss is only ln 2
    let y = LabelVector::new(vec![1]).unwrap();
    let l = ExampleWiseLogistic.evaluate(&y, &[0.0]).unwrap();
    assert!(l < 1.0);
    assert!((l / std::f64::consts::LN_2 - 1.0).abs() < 1e-15);
}

#[test]
fn non_finite_scores_are_rejected() {
    let y = LabelVector::new(vec![1, -1]).unwrap();
    for loss in losses() {
        assert!(loss.evaluate(&y, &[f64::NAN, 0.0]).is_err());
        assert!(loss.gradient(&y, &[0.0, f64::INFINITY]).is_err());
        assert!(loss.evaluate(&y, &[0.0]).is_err());
    }
}

fn random_dataset(seed: u64, n: usize, num_labels: usize) -> Dataset {
    let mut r = rng(seed);
    micro_dataset(&mut r, n, 2, num_labels)
}

fn assert_store_matches(store: &GradHessStore, loss: &dyn LossFunction, dataset: &Dataset, scores: &ScoreMatrix) {
    let fresh = GradHessStore::from_scores(loss, dataset, scores);
    for i in 0..dataset.num_examples() {
        assert_eq!(store.gradient(i), fresh.gradient(i), "example {i}");
        assert_eq!(store.hessian(i), fresh.hessian(i), "example {i}");
    }
}

#[test]
fn incremental_update_equals_recomputation() {
    use rand::Rng;
    for seed in 0..30 {
        let dataset = random_dataset(seed, 40, 1 + (seed as usize % 4));
        let l = dataset.num_labels();
        let loss = if seed % 2 == 0 { LossId::LabelWiseLogistic } else { LossId::ExampleWiseLogistic }.function();
        let mut store = GradHessStore::init(loss, &dataset);
        let mut scores = ScoreMatrix::zeros(dataset.num_examples(), l);
        let mut r = rng(seed + 1000);
        for _ in 0..10 {
            let body = if r.gen_bool(0.2) {
                Body::empty()
            } else if dataset.schema().attributes()[0].is_numeric() {
                Body::new(vec![Condition::le(0, r.gen_range(-1.0..2.0))])
            } else {
                Body::new(vec![Condition::ne(0, 0)])
            };
            let head = if r.gen_bool(0.5) {
                Head::full((0..l).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
            } else {
                Head::single(l, r.gen_range(0..l), r.gen_range(-1.0..1.0)).unwrap()
            };
            let rule = Rule::new(body, head);
            let before = scores.clone();
            store.update(loss, &dataset, &rule, &mut scores).unwrap();
            for (i, x) in dataset.examples().iter().enumerate() {
                let covered = rule.body.covers(x).unwrap();
                for k in 0..l {
                    let expected = if covered { before.row(i)[k] + rule.head.scores()[k] } else { before.row(i)[k] };
                    assert_eq!(scores.row(i)[k], expected);
                }
            }
            assert_store_matches(&store, loss, &dataset, &scores);
        }
    }
}

#[test]
fn store_at_zero_scores() {
    let dataset = random_dataset(3, 25, 2);
    let lw = GradHessStore::init(&LabelWiseLogistic, &dataset);
    let ew = GradHessStore::init(&ExampleWiseLogistic, &dataset);
    for i in 0..dataset.num_examples() {
        assert!(lw.gradient(i).iter().all(|g| g.abs() == 0.5));
        assert!(lw.hessian(i).iter().all(|h| *h == 0.25));
        assert!(ew.gradient(i).iter().all(|g| (g.abs() - 1.0 / 3.0).abs() < 1e-15));
    }
}

#[test]
fn rule_covering_nothing_leaves_store_unchanged() {
    let schema = AttributeSchema::new(vec![Attribute::numeric("x")]).unwrap();
    let examples = (0..5).map(|i| Example::new(&schema, vec![Value::Numeric(i as f64)]).unwrap()).collect();
    let labels = (0..5).map(|_| LabelVector::new(vec![1, -1]).unwrap()).collect();
    let dataset = Dataset::new(schema, examples, labels, vec!["a".into(), "b".into()]).unwrap();
    let mut store = GradHessStore::init(&ExampleWiseLogistic, &dataset);
    let mut scores = ScoreMatrix::zeros(5, 2);
    let original = store.clone();
    let nothing = Rule::new(Body::new(vec![Condition::gt(0, 100.0)]), Head::full(vec![1.0, 1.0]).unwrap());
    assert_eq!(store.update(&ExampleWiseLogistic, &dataset, &nothing, &mut scores).unwrap(), 0);
    let zero = Rule::new(Body::empty(), Head::zeros(2));
    store.update(&ExampleWiseLogistic, &dataset, &zero, &mut scores).unwrap();
    for i in 0..5 {
        assert_eq!(store.gradient(i), original.gradient(i));
        assert_eq!(store.hessian(i), original.hessian(i));
    }
}
