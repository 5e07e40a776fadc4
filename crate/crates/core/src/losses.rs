//! Surrogate losses with exact first and second derivatives, and the
//! per-example gradient/Hessian store maintained during boosting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelVector, Rule};
use crate::error::{Error, Result};
use crate::linalg::{packed_index, packed_len, sym_index};
use crate::par;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossId {
    LabelWiseLogistic,
    ExampleWiseLogistic,
}

impl LossId {
    pub fn function(self) -> &'static dyn LossFunction {
        match self {
            LossId::LabelWiseLogistic => &LabelWiseLogistic,
            LossId::ExampleWiseLogistic => &ExampleWiseLogistic,
        }
    }

    pub fn is_decomposable(self) -> bool {
        self.function().is_decomposable()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LossId::LabelWiseLogistic => "label-wise-logistic",
            LossId::ExampleWiseLogistic => "example-wise-logistic",
        }
    }
}

impl fmt::Display for LossId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "label-wise-logistic" | "lw" | "l.w.-log" => Ok(LossId::LabelWiseLogistic),
            "example-wise-logistic" | "ew" | "ex.w.-log" => Ok(LossId::ExampleWiseLogistic),
            other => Err(Error::Config(format!(
                "unknown loss '{other}' (expected label-wise-logistic or example-wise-logistic)"
            ))),
        }
    }
}

/// How a store or aggregate keeps its Hessians.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HessianLayout {
    /// ℓ diagonal entries; off-diagonals are known to be zero.
    Diagonal,
    /// ℓ(ℓ+1)/2 entries of the lower triangle.
    Packed,
}

impl HessianLayout {
    pub fn len(self, num_labels: usize) -> usize {
        match self {
            HessianLayout::Diagonal => num_labels,
            HessianLayout::Packed => packed_len(num_labels),
        }
    }

    #[inline]
    pub fn diagonal_index(self, k: usize) -> usize {
        match self {
            HessianLayout::Diagonal => k,
            HessianLayout::Packed => packed_index(k, k),
        }
    }

    /// Expands a stored Hessian into a dense row-major ℓ×ℓ matrix.
    pub fn to_dense(self, stored: &[f64], num_labels: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; num_labels]; num_labels];
        for (j, row) in m.iter_mut().enumerate() {
            for (k, entry) in row.iter_mut().enumerate() {
                *entry = match self {
                    HessianLayout::Diagonal if j == k => stored[j],
                    HessianLayout::Diagonal => 0.0,
                    HessianLayout::Packed => stored[sym_index(j, k)],
                };
            }
        }
        m
    }
}

/// A twice differentiable multi-label loss `L(y, q)`.
pub trait LossFunction: Send + Sync {
    fn id(&self) -> LossId;

    /// True iff the Hessian is diagonal for every input.
    fn is_decomposable(&self) -> bool;

    fn layout(&self) -> HessianLayout {
        if self.is_decomposable() {
            HessianLayout::Diagonal
        } else {
            HessianLayout::Packed
        }
    }

    /// Loss value; `y` and `q` must have equal length and `q` must be finite.
    fn value(&self, y: &[i8], q: &[f64]) -> f64;

    /// Writes the gradient (ℓ entries) and the Hessian in [`Self::layout`].
    fn derivatives(&self, y: &[i8], q: &[f64], gradient: &mut [f64], hessian: &mut [f64]);

    fn evaluate(&self, y: &LabelVector, q: &[f64]) -> Result<f64> {
        check_input(y, q)?;
        Ok(self.value(y.as_slice(), q))
    }

    fn gradient(&self, y: &LabelVector, q: &[f64]) -> Result<Vec<f64>> {
        check_input(y, q)?;
        let mut g = vec![0.0; q.len()];
        let mut h = vec![0.0; self.layout().len(q.len())];
        self.derivatives(y.as_slice(), q, &mut g, &mut h);
        Ok(g)
    }

    /// Dense symmetric ℓ×ℓ Hessian.
    fn hessian(&self, y: &LabelVector, q: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_input(y, q)?;
        let mut g = vec![0.0; q.len()];
        let mut h = vec![0.0; self.layout().len(q.len())];
        self.derivatives(y.as_slice(), q, &mut g, &mut h);
        Ok(self.layout().to_dense(&h, q.len()))
    }
}

fn check_input(y: &LabelVector, q: &[f64]) -> Result<()> {
    if y.len() != q.len() {
        return Err(Error::Shape(format!(
            "label vector has {} entries, score vector {}",
            y.len(),
            q.len()
        )));
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("scores must be finite".into()));
    }
    Ok(())
}

/// log(1 + e^z) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// 1 / (1 + e^-z) without overflow.
#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Σₖ log(1 + exp(−yₖ qₖ)).
#[derive(Clone, Copy, Debug, Default)]
pub struct LabelWiseLogistic;

impl LossFunction for LabelWiseLogistic {
    fn id(&self) -> LossId {
        LossId::LabelWiseLogistic
    }

    fn is_decomposable(&self) -> bool {
        true
    }

    fn value(&self, y: &[i8], q: &[f64]) -> f64 {
        y.iter().zip(q).map(|(&y, &q)| softplus(-f64::from(y) * q)).sum()
    }

    fn derivatives(&self, y: &[i8], q: &[f64], gradient: &mut [f64], hessian: &mut [f64]) {
        for k in 0..y.len() {
            let yk = f64::from(y[k]);
            // sigma(-y q) = 1 / (1 + exp(y q))
            let s = sigmoid(-yk * q[k]);
            gradient[k] = -yk * s;
            hessian[k] = s * (1.0 - s);
        }
    }
}

/// log(1 + Σₖ exp(−yₖ qₖ)).
#[derive(Clone, Copy, Debug, Default)]
pub struct ExampleWiseLogistic;

impl ExampleWiseLogistic {
    /// Max exponent, clamped at 0 for the implicit "1" term.
    #[inline]
    fn shift(y: &[i8], q: &[f64]) -> f64 {
        y.iter()
            .zip(q)
            .map(|(&y, &q)| -f64::from(y) * q)
            .fold(0.0, f64::max)
    }
}

impl LossFunction for ExampleWiseLogistic {
    fn id(&self) -> LossId {
        LossId::ExampleWiseLogistic
    }

    fn is_decomposable(&self) -> bool {
        false
    }

    fn value(&self, y: &[i8], q: &[f64]) -> f64 {
        let m = Self::shift(y, q);
        let s: f64 = (-m).exp()
            + y.iter()
                .zip(q)
                .map(|(&y, &q)| (-f64::from(y) * q - m).exp())
                .sum::<f64>();
        m + s.ln()
    }

    fn derivatives(&self, y: &[i8], q: &[f64], gradient: &mut [f64], hessian: &mut [f64]) {
        // With eₖ = exp(−yₖqₖ) and S = 1 + Σ eⱼ, pₖ = eₖ/S:
        //   gₖ = −yₖ pₖ,  hₖₖ = pₖ(1 − pₖ),  hⱼₖ = −yⱼ yₖ pⱼ pₖ.
        let n = y.len();
        let m = Self::shift(y, q);
        let mut total = (-m).exp();
        for k in 0..n {
            let e = (-f64::from(y[k]) * q[k] - m).exp();
            gradient[k] = e;
            total += e;
        }
        for p in gradient.iter_mut() {
            *p /= total;
        }
        for j in 0..n {
            let pj = gradient[j];
            let yj = f64::from(y[j]);
            for k in 0..j {
                hessian[packed_index(j, k)] = -yj * f64::from(y[k]) * pj * gradient[k];
            }
            hessian[packed_index(j, j)] = pj * (1.0 - pj);
        }
        for k in 0..n {
            gradient[k] *= -f64::from(y[k]);
        }
    }
}

/// Aggregated model scores, row-major N×ℓ.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    num_labels: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn zeros(num_examples: usize, num_labels: usize) -> Self {
        ScoreMatrix {
            num_labels,
            values: vec![0.0; num_examples * num_labels],
        }
    }

    pub fn num_examples(&self) -> usize {
        self.values.len().checked_div(self.num_labels).unwrap_or(0)
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.num_labels..(i + 1) * self.num_labels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Adds `head` to every row flagged in `covered`.
    pub fn add_to_rows(&mut self, covered: &[bool], head: &[f64]) {
        for (i, _) in covered.iter().enumerate().filter(|(_, c)| **c) {
            for (s, h) in self.row_mut(i).iter_mut().zip(head) {
                *s += h;
            }
        }
    }
}

/// Gradient vectors and Hessian matrices of the loss at the current scores,
/// one block of `ℓ + hessian_len` values per example.
#[derive(Clone, Debug, PartialEq)]
pub struct GradHessStore {
    num_labels: usize,
    layout: HessianLayout,
    stride: usize,
    data: Vec<f64>,
}

impl GradHessStore {
    /// Derivatives at q = 0 for every example.
    pub fn init(loss: &dyn LossFunction, dataset: &Dataset) -> Self {
        let scores = ScoreMatrix::zeros(dataset.num_examples(), dataset.num_labels());
        Self::from_scores(loss, dataset, &scores)
    }

    /// Derivatives recomputed from scratch at the given scores.
    pub fn from_scores(loss: &dyn LossFunction, dataset: &Dataset, scores: &ScoreMatrix) -> Self {
        let num_labels = dataset.num_labels();
        let layout = loss.layout();
        let stride = num_labels + layout.len(num_labels);
        let mut data = vec![0.0; stride * dataset.num_examples()];
        let labels = dataset.labels();
        par::for_each_row(&mut data, stride, |i, block| {
            let (g, h) = block.split_at_mut(num_labels);
            loss.derivatives(labels[i].as_slice(), scores.row(i), g, h);
            Ok(())
        })
        .expect("infallible");
        GradHessStore {
            num_labels,
            layout,
            stride,
            data,
        }
    }

    pub fn num_examples(&self) -> usize {
        self.data.len().checked_div(self.stride).unwrap_or(0)
    }

    pub fn num_labels(&self) -> usize {
        self.num_labels
    }

    pub fn layout(&self) -> HessianLayout {
        self.layout
    }

    pub fn hessian_len(&self) -> usize {
        self.stride - self.num_labels
    }

    #[inline]
    pub fn gradient(&self, i: usize) -> &[f64] {
        let start = i * self.stride;
        &self.data[start..start + self.num_labels]
    }

    /// Hessian of example `i` in the store's layout.
    #[inline]
    pub fn hessian(&self, i: usize) -> &[f64] {
        let start = i * self.stride;
        &self.data[start + self.num_labels..start + self.stride]
    }

    pub fn hessian_dense(&self, i: usize) -> Vec<Vec<f64>> {
        self.layout.to_dense(self.hessian(i), self.num_labels)
    }

    /// Applies `rule` to the training data: covered examples get the rule's
    /// head added to their scores and their derivatives recomputed. Returns
    /// the number of covered examples.
    pub fn update(
        &mut self,
        loss: &dyn LossFunction,
        dataset: &Dataset,
        rule: &Rule,
        scores: &mut ScoreMatrix,
    ) -> Result<usize> {
        let examples = dataset.examples();
        let covered = par::try_map(examples.len(), |i| rule.body.covers(&examples[i]))?;
        self.update_covered(loss, dataset, &covered, rule.head.scores(), scores);
        Ok(covered.iter().filter(|c| **c).count())
    }

    /// Same as [`Self::update`] with a precomputed coverage mask.
    pub fn update_covered(
        &mut self,
        loss: &dyn LossFunction,
        dataset: &Dataset,
        covered: &[bool],
        head: &[f64],
        scores: &mut ScoreMatrix,
    ) {
        scores.add_to_rows(covered, head);
        let num_labels = self.num_labels;
        let labels = dataset.labels();
        let scores = &*scores;
        par::for_each_row(&mut self.data, self.stride, |i, block| {
            if covered[i] {
                let (g, h) = block.split_at_mut(num_labels);
                loss.derivatives(labels[i].as_slice(), scores.row(i), g, h);
            }
            Ok(())
        })
        .expect("infallible");
    }
}
