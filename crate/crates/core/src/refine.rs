//! Top-down greedy rule refinement.
//!
//! Starting from the empty body, each step draws a random subset of the
//! attributes, evaluates every condition that can be built from the values of
//! the currently covered sample, and keeps the one whose optimal head has the
//! lowest objective. Refinement stops as soon as no condition strictly improves
//! on the current rule.
//!
//! Candidate statistics are accumulated with a single sweep over the examples
//! in attribute order, so each step costs O(N) per attribute plus one head
//! solve per candidate condition.

use rand::seq::index;
use rand::Rng;

use crate::data::{AttributeKind, Body, Condition, Dataset, HeadMode, Rule, Value};
use crate::error::{Error, Result};
use crate::head::{AggregatedStats, HeadKind, HeadSolver, HeadTarget};
use crate::losses::GradHessStore;
use crate::par;

/// Number of attributes considered per refinement step, ⌊log₂(M−1) + 1⌋.
pub fn candidate_attribute_count(num_attributes: usize) -> usize {
    if num_attributes < 2 {
        return num_attributes;
    }
    let k = ((num_attributes - 1) as f64).log2().floor() as usize + 1;
    k.clamp(1, num_attributes)
}

/// Example indices with a known value, sorted by value, for every numeric
/// attribute. Nominal attributes get an empty list.
#[derive(Clone, Debug)]
pub struct FeatureIndex {
    sorted: Vec<Vec<u32>>,
}

impl FeatureIndex {
    pub fn new(dataset: &Dataset) -> Self {
        let examples = dataset.examples();
        let sorted = par::map(dataset.num_attributes(), |a| {
            if !dataset.schema().attributes()[a].is_numeric() {
                return Vec::new();
            }
            let mut idx: Vec<u32> = (0..examples.len() as u32)
                .filter(|&i| !matches!(examples[i as usize].value(a), Value::Missing))
                .collect();
            idx.sort_by(|&i, &j| {
                numeric(examples[i as usize].value(a)).total_cmp(&numeric(examples[j as usize].value(a)))
            });
            idx
        });
        FeatureIndex { sorted }
    }

    pub fn sorted(&self, attribute: usize) -> &[u32] {
        &self.sorted[attribute]
    }
}

#[inline]
fn numeric(v: Value) -> f64 {
    match v {
        Value::Numeric(x) => x,
        _ => f64::NAN,
    }
}

/// Threshold strictly between two adjacent distinct values such that
/// `lo <= t < hi`.
#[inline]
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) * 0.5;
    if t >= lo && t < hi {
        t
    } else {
        lo
    }
}

/// Every condition on `attribute` that can be formed from the examples with a
/// nonzero weight, in evaluation order: ascending thresholds with `<=` before
/// `>`, or nominal values in schema order with `==` before `!=`.
pub fn enumerate_conditions(dataset: &Dataset, weights: &[f64], attribute: usize) -> Vec<Condition> {
    let examples = dataset.examples();
    let covered = || {
        examples
            .iter()
            .zip(weights)
            .filter(|(_, w)| **w > 0.0)
            .map(|(x, _)| x.value(attribute))
    };
    match &dataset.schema().attributes()[attribute].kind {
        AttributeKind::Numeric => {
            let mut values: Vec<f64> = covered()
                .filter_map(|v| match v {
                    Value::Numeric(x) => Some(x),
                    _ => None,
                })
                .collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            values
                .windows(2)
                .flat_map(|w| {
                    let t = midpoint(w[0], w[1]);
                    [Condition::le(attribute, t), Condition::gt(attribute, t)]
                })
                .collect()
        }
        AttributeKind::Nominal { values } => {
            let mut present = vec![false; values.len()];
            for v in covered() {
                if let Value::Nominal(i) = v {
                    present[i as usize] = true;
                }
            }
            (0..values.len() as u32)
                .filter(|&v| present[v as usize])
                .flat_map(|v| [Condition::eq(attribute, v), Condition::ne(attribute, v)])
                .collect()
        }
    }
}

/// `candidate < incumbent`; ties keep the incumbent.
pub fn objective_improvement(candidate: f64, incumbent: f64) -> Result<bool> {
    if candidate.is_nan() || incumbent.is_nan() {
        return Err(Error::Induction("objective is NaN".into()));
    }
    Ok(candidate < incumbent)
}

/// Inputs shared by all refinement steps of one rule.
pub struct RefinementContext<'a> {
    pub dataset: &'a Dataset,
    pub store: &'a GradHessStore,
    pub index: &'a FeatureIndex,
    pub head: HeadKind,
    pub l2: f64,
    /// Draw a random attribute subset per step; otherwise use all attributes.
    pub feature_sampling: bool,
}

/// Result of refining one rule.
#[derive(Clone, Debug)]
pub struct Refinement {
    /// The rule with its head fitted on the sample it was refined on.
    pub rule: Rule,
    /// Objective of the rule after each step, starting with the empty body.
    pub objectives: Vec<f64>,
    /// Label a single-label rule predicts for.
    pub label: Option<usize>,
}

#[derive(Clone, Debug)]
struct Candidate {
    condition: Condition,
    objective: f64,
    stats: AggregatedStats,
}

/// Refines a rule on the sample described by `weights` (multiplicity of each
/// training example in the sample).
pub fn refine_rule<R: Rng>(ctx: &RefinementContext<'_>, weights: &[f64], rng: &mut R) -> Result<Refinement> {
    let dataset = ctx.dataset;
    let n = dataset.num_examples();
    if weights.len() != n || ctx.store.num_examples() != n {
        return Err(Error::Shape("sample weights do not match the dataset".into()));
    }
    if !weights.iter().any(|w| *w > 0.0) {
        return Err(Error::Induction("cannot refine a rule on an empty sample".into()));
    }
    let num_labels = dataset.num_labels();
    let num_attributes = dataset.num_attributes();
    let mut weights = weights.to_vec();
    let mut covered_weight: f64 = weights.iter().sum();

    let mut solver = HeadSolver::new(num_labels);
    let stats = AggregatedStats::from_weights(ctx.store, &weights);
    let mut target = HeadTarget::for_kind(ctx.head);
    let mut objective = solver.solve(&stats, target, ctx.l2)?;
    let mut head = solver.head()?;
    let mut body = Body::empty();
    let mut objectives = vec![objective];

    loop {
        let attributes: Vec<usize> = if ctx.feature_sampling {
            let k = candidate_attribute_count(num_attributes);
            index::sample(rng, num_attributes, k).into_vec()
        } else {
            (0..num_attributes).collect()
        };

        let per_attribute = par::try_map(attributes.len(), |j| {
            best_condition(ctx, attributes[j], &weights, covered_weight, target)
        })?;
        let mut best: Option<Candidate> = None;
        for c in per_attribute.into_iter().flatten() {
            let better = match &best {
                None => true,
                Some(b) => objective_improvement(c.objective, b.objective)?,
            };
            if better {
                best = Some(c);
            }
        }
        let Some(best) = best else { break };
        if !objective_improvement(best.objective, objective)? {
            break;
        }

        objective = solver.solve(&best.stats, target, ctx.l2)?;
        head = solver.head()?;
        if let HeadTarget::Single(None) = target {
            if let HeadMode::Single(label) = head.mode() {
                target = HeadTarget::Single(Some(label));
            }
        }
        let a = best.condition.attribute;
        for (w, x) in weights.iter_mut().zip(dataset.examples()) {
            if *w > 0.0 && !best.condition.test(x.value(a))? {
                *w = 0.0;
            }
        }
        covered_weight = weights.iter().sum();
        body.conditions.push(best.condition);
        objectives.push(objective);
    }

    let label = match head.mode() {
        HeadMode::Single(label) => Some(label),
        HeadMode::Full => None,
    };
    Ok(Refinement {
        rule: Rule::new(body, head),
        objectives,
        label,
    })
}

/// Strictly best condition on one attribute, first in enumeration order on ties.
fn best_condition(
    ctx: &RefinementContext<'_>,
    attribute: usize,
    weights: &[f64],
    covered_weight: f64,
    target: HeadTarget,
) -> Result<Option<Candidate>> {
    let num_labels = ctx.dataset.num_labels();
    let layout = ctx.store.layout();
    let mut solver = HeadSolver::new(num_labels);
    let mut best: Option<Candidate> = None;
    let mut consider = |condition: Condition, stats: &AggregatedStats| -> Result<()> {
        // A singular system rules the candidate out.
        let Ok(objective) = solver.solve(stats, target, ctx.l2) else {
            return Ok(());
        };
        let better = match &best {
            None => true,
            Some(b) => objective_improvement(objective, b.objective)?,
        };
        if better {
            best = Some(Candidate {
                condition,
                objective,
                stats: stats.clone(),
            });
        }
        Ok(())
    };

    let examples = ctx.dataset.examples();
    match &ctx.dataset.schema().attributes()[attribute].kind {
        AttributeKind::Numeric => {
            let covered: Vec<(u32, f64)> = ctx
                .index
                .sorted(attribute)
                .iter()
                .filter(|&&i| weights[i as usize] > 0.0)
                .map(|&i| (i, numeric(examples[i as usize].value(attribute))))
                .collect();
            if covered.len() < 2 {
                return Ok(None);
            }
            let mut total = AggregatedStats::zeros(num_labels, layout);
            for &(i, _) in &covered {
                total.add_example(ctx.store, i as usize, weights[i as usize]);
            }
            let mut prefix = AggregatedStats::zeros(num_labels, layout);
            let mut rest = AggregatedStats::zeros(num_labels, layout);
            for j in 0..covered.len() - 1 {
                let (i, lo) = covered[j];
                prefix.add_example(ctx.store, i as usize, weights[i as usize]);
                let hi = covered[j + 1].1;
                if hi > lo {
                    let t = midpoint(lo, hi);
                    consider(Condition::le(attribute, t), &prefix)?;
                    rest.set_difference(&total, &prefix);
                    consider(Condition::gt(attribute, t), &rest)?;
                }
            }
        }
        AttributeKind::Nominal { values } => {
            let mut per_value = vec![AggregatedStats::zeros(num_labels, layout); values.len()];
            let mut value_weight = vec![0.0; values.len()];
            let mut total = AggregatedStats::zeros(num_labels, layout);
            let mut known_weight = 0.0;
            for (i, (x, &w)) in examples.iter().zip(weights).enumerate() {
                if w > 0.0 {
                    if let Value::Nominal(v) = x.value(attribute) {
                        per_value[v as usize].add_example(ctx.store, i, w);
                        total.add_example(ctx.store, i, w);
                        value_weight[v as usize] += w;
                        known_weight += w;
                    }
                }
            }
            let mut rest = AggregatedStats::zeros(num_labels, layout);
            for v in 0..values.len() {
                if value_weight[v] == 0.0 {
                    continue;
                }
                // Conditions that keep every covered example do not refine the rule.
                if value_weight[v] < covered_weight {
                    consider(Condition::eq(attribute, v as u32), &per_value[v])?;
                }
                let others = known_weight - value_weight[v];
                if others > 0.0 && others < covered_weight {
                    rest.set_difference(&total, &per_value[v]);
                    consider(Condition::ne(attribute, v as u32), &rest)?;
                }
            }
        }
    }
    Ok(best)
}
