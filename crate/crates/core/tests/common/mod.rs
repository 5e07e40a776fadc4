//! Independent reference implementations used by the integration tests.

#![allow(dead_code)]

use mlrules::data::{Attribute, AttributeSchema, Condition, Dataset, Example, LabelVector, Threshold, Value};
use mlrules::head::HeadKind;
use mlrules::losses::{GradHessStore, LossFunction, LossId, ScoreMatrix};
use mlrules::refine::{refine_rule, FeatureIndex, RefinementContext};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_labels<R: Rng>(rng: &mut R, num_labels: usize) -> LabelVector {
    LabelVector::new((0..num_labels).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect()).unwrap()
}

/// Central finite-difference gradient of `loss` at `q`.
pub fn fd_gradient(loss: &dyn LossFunction, y: &[i8], q: &[f64], h: f64) -> Vec<f64> {
    (0..q.len())
        .map(|k| {
            let mut plus = q.to_vec();
            let mut minus = q.to_vec();
            plus[k] += h;
            minus[k] -= h;
            (loss.value(y, &plus) - loss.value(y, &minus)) / (2.0 * h)
        })
        .collect()
}

/// Central differences of the analytic gradient.
pub fn fd_hessian(loss: &dyn LossFunction, y: &LabelVector, q: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = q.len();
    let mut out = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut plus = q.to_vec();
        let mut minus = q.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let gp = loss.gradient(y, &plus).unwrap();
        let gm = loss.gradient(y, &minus).unwrap();
        for k in 0..n {
            out[k][j] = (gp[k] - gm[k]) / (2.0 * h);
        }
    }
    out
}

pub fn close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * a.abs().max(b.abs())
}

/// Summed gradient and dense Hessian over weighted examples.
pub fn dense_stats(store: &GradHessStore, weights: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = store.num_labels();
    let mut g = vec![0.0; n];
    let mut h = vec![vec![0.0; n]; n];
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let gi = store.gradient(i);
        let hi = store.hessian_dense(i);
        for k in 0..n {
            g[k] += w * gi[k];
            for j in 0..n {
                h[k][j] += w * hi[k][j];
            }
        }
    }
    (g, h)
}

/// Minimizer of `g·p + ½pᵀ(H+λI)p` via LU decomposition, with its objective.
pub fn oracle_full_head(g: &[f64], h: &[Vec<f64>], l2: f64) -> Option<(Vec<f64>, f64)> {
    let n = g.len();
    let a = DMatrix::from_fn(n, n, |i, j| h[i][j] + if i == j { l2 } else { 0.0 });
    let b = DVector::from_iterator(n, g.iter().map(|v| -v));
    let p = a.clone().lu().solve(&b)?;
    if p.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let gv = DVector::from_column_slice(g);
    let objective = gv.dot(&p) + 0.5 * p.dot(&(&a * &p));
    Some((p.iter().copied().collect(), objective))
}

/// Best single-label head `(label, score, objective)`, lowest label on ties.
pub fn oracle_single_head(g: &[f64], h: &[Vec<f64>], l2: f64, fixed: Option<usize>) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for k in 0..g.len() {
        if fixed.is_some_and(|f| f != k) {
            continue;
        }
        let d = h[k][k] + l2;
        if d <= 0.0 {
            continue;
        }
        let p = -g[k] / d;
        let objective = g[k] * p + 0.5 * d * p * p;
        if best.is_none_or(|b| objective < b.2) {
            best = Some((k, p, objective));
        }
    }
    best
}

/// Random dataset with `num_attributes` columns (numeric or nominal with
/// few distinct values and some missing entries) and random labels.
pub fn micro_dataset<R: Rng>(rng: &mut R, n: usize, num_attributes: usize, num_labels: usize) -> Dataset {
    let attributes: Vec<Attribute> = (0..num_attributes)
        .map(|a| {
            if rng.gen_bool(0.6) {
                Attribute::numeric(format!("a{a}"))
            } else {
                let k = rng.gen_range(2..=4);
                Attribute::nominal(format!("a{a}"), (0..k).map(|v| format!("v{v}")))
            }
        })
        .collect();
    let schema = AttributeSchema::new(attributes).unwrap();
    let examples = (0..n)
        .map(|_| {
            let values = schema
                .attributes()
                .iter()
                .map(|attr| {
                    if rng.gen_bool(0.05) {
                        return Value::Missing;
                    }
                    match attr.nominal_values() {
                        None => Value::Numeric(rng.gen_range(0..12) as f64 * 0.25 - 1.0),
                        Some(values) => Value::Nominal(rng.gen_range(0..values.len() as u32)),
                    }
                })
                .collect();
            Example::new(&schema, values).unwrap()
        })
        .collect();
    let labels = (0..n).map(|_| random_labels(rng, num_labels)).collect();
    let names = (0..num_labels).map(|k| format!("y{k}")).collect();
    Dataset::new(schema, examples, labels, names).unwrap()
}

/// Random current scores, so that gradients differ between examples.
pub fn random_scores<R: Rng>(rng: &mut R, dataset: &Dataset) -> ScoreMatrix {
    let mut scores = ScoreMatrix::zeros(dataset.num_examples(), dataset.num_labels());
    for i in 0..dataset.num_examples() {
        for s in scores.row_mut(i) {
            *s = rng.gen_range(-2.0..2.0);
        }
    }
    scores
}

/// All conditions on any attribute, each with the weights of the examples it
/// keeps, skipping those that keep nothing or everything.
pub fn all_refinements(dataset: &Dataset, weights: &[f64]) -> Vec<(Condition, Vec<f64>)> {
    let total: f64 = weights.iter().sum();
    let mut out = Vec::new();
    for a in 0..dataset.num_attributes() {
        let mut thresholds: Vec<f64> = Vec::new();
        let mut nominal: Vec<u32> = Vec::new();
        for (x, &w) in dataset.examples().iter().zip(weights) {
            if w > 0.0 {
                match x.value(a) {
                    Value::Numeric(v) => thresholds.push(v),
                    Value::Nominal(v) => nominal.push(v),
                    Value::Missing => {}
                }
            }
        }
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        nominal.sort_unstable();
        nominal.dedup();
        let mut conditions = Vec::new();
        for w in thresholds.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            conditions.push(Condition::le(a, t));
            conditions.push(Condition::gt(a, t));
        }
        for v in nominal {
            conditions.push(Condition::eq(a, v));
            conditions.push(Condition::ne(a, v));
        }
        for c in conditions {
            let kept: Vec<f64> = dataset
                .examples()
                .iter()
                .zip(weights)
                .map(|(x, &w)| if w > 0.0 && c.test(x.value(a)).unwrap() { w } else { 0.0 })
                .collect();
            let s: f64 = kept.iter().sum();
            if s > 0.0 && s < total {
                out.push((c, kept));
            }
        }
    }
    out
}

/// Compares the first condition chosen by `refine_rule` on a random
/// micro-dataset with exhaustive enumeration. Objectives within a relative
/// 1e-9 of the optimum count as ties, because the incremental sweep and the
/// direct sums round differently.
pub fn refinement_oracle_case<R: Rng>(r: &mut R, case: u64) -> Result<(), String> {
    let n = r.gen_range(4..=50);
    let m = r.gen_range(1..=4);
    let l = r.gen_range(1..=3);
    let dataset = micro_dataset(r, n, m, l);
    let loss = if r.gen_bool(0.5) { LossId::LabelWiseLogistic } else { LossId::ExampleWiseLogistic };
    let head = if r.gen_bool(0.5) { HeadKind::Single } else { HeadKind::Multi };
    let l2 = [0.25, 1.0, 4.0][r.gen_range(0..3)];
    let scores = random_scores(r, &dataset);
    let store = GradHessStore::from_scores(loss.function(), &dataset, &scores);
    let mut weights: Vec<f64> = (0..n).map(|_| r.gen_range(0..3) as f64).collect();
    if weights.iter().all(|w| *w == 0.0) {
        weights[0] = 1.0;
    }
    let index = FeatureIndex::new(&dataset);
    let ctx = RefinementContext {
        dataset: &dataset,
        store: &store,
        index: &index,
        head,
        l2,
        feature_sampling: false,
    };
    let refined = refine_rule(&ctx, &weights, &mut rng(case)).map_err(|e| format!("case {case}: {e}"))?;

    let objective_of = |w: &[f64]| -> f64 {
        let (g, h) = dense_stats(&store, w);
        match head {
            HeadKind::Multi => oracle_full_head(&g, &h, l2).expect("regularized system").1,
            HeadKind::Single => oracle_single_head(&g, &h, l2, None).expect("regularized system").2,
        }
    };
    let empty = objective_of(&weights);
    let scored: Vec<(Condition, f64)> = all_refinements(&dataset, &weights)
        .into_iter()
        .map(|(c, w)| (c, objective_of(&w)))
        .collect();
    let best = scored.iter().map(|(_, o)| *o).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * best.abs().max(1.0);
    let same = |a: &Condition, b: &Condition| {
        a.attribute == b.attribute
            && a.operator == b.operator
            && match (a.threshold, b.threshold) {
                (Threshold::Numeric(x), Threshold::Numeric(y)) => (x - y).abs() < 1e-12,
                (x, y) => x == y,
            }
    };
    let ok = match refined.rule.body.conditions.first() {
        None => best >= empty - tol,
        Some(c) => {
            let optimal: Vec<&Condition> = scored.iter().filter(|(_, o)| *o <= best + tol).map(|(c, _)| c).collect();
            best < empty && optimal.iter().any(|o| same(o, c))
        }
    };
    if ok {
        Ok(())
    } else {
        Err(format!(
            "case {case}: chosen {:?}, oracle best {best}, empty body {empty}",
            refined.rule.body.conditions.first()
        ))
    }
}
