//! Loss-minimizing rule heads.
//!
//! A rule predicts the same vector `p` for every example it covers, so the
//! second-order objective of the rule only depends on the summed gradient `g`
//! and summed Hessian `H` of the covered examples:
//!
//! ```text
//! J(p) = g·p + ½ pᵀHp + ½λ‖p‖²
//! ```
//!
//! The minimizer solves `(H + λI) p = −g`. For diagonal `H`, and for heads
//! that predict a single label, it reduces to `pₖ = −gₖ / (hₖₖ + λ)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Body, Dataset, Head, HeadMode};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve_shifted, packed_index, packed_len};
use crate::losses::{GradHessStore, HessianLayout};

/// Whether refined rules predict for one label or for all of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    Single,
    Multi,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Single => "single",
            HeadKind::Multi => "multi",
        }
    }
}

impl fmt::Display for HeadKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HeadKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(HeadKind::Single),
            "multi" => Ok(HeadKind::Multi),
            other => Err(Error::Config(format!("unknown head kind '{other}' (expected single or multi)"))),
        }
    }
}

/// Which head to search for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadTarget {
    /// Scores for every label.
    Full,
    /// The best single label, or the given one.
    Single(Option<usize>),
}

impl HeadTarget {
    pub fn for_kind(kind: HeadKind) -> Self {
        match kind {
            HeadKind::Multi => HeadTarget::Full,
            HeadKind::Single => HeadTarget::Single(None),
        }
    }
}

/// Summed gradients and Hessians of the examples covered by a body.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedStats {
    layout: HessianLayout,
    gradient: Vec<f64>,
    hessian: Vec<f64>,
}

impl AggregatedStats {
    pub fn zeros(num_labels: usize, layout: HessianLayout) -> Self {
        AggregatedStats {
            layout,
            gradient: vec![0.0; num_labels],
            hessian: vec![0.0; layout.len(num_labels)],
        }
    }

    /// Stats with a diagonal Hessian.
    pub fn diagonal(gradient: Vec<f64>, hessian_diagonal: Vec<f64>) -> Result<Self> {
        if gradient.len() != hessian_diagonal.len() {
            return Err(Error::Shape("gradient and Hessian diagonal differ in length".into()));
        }
        Ok(AggregatedStats {
            layout: HessianLayout::Diagonal,
            gradient,
            hessian: hessian_diagonal,
        })
    }

    /// Stats with a full symmetric Hessian given as a dense matrix.
    pub fn dense(gradient: Vec<f64>, hessian: &[Vec<f64>]) -> Result<Self> {
        let n = gradient.len();
        if hessian.len() != n || hessian.iter().any(|r| r.len() != n) {
            return Err(Error::Shape(format!("Hessian must be {n}x{n}")));
        }
        let mut packed = vec![0.0; packed_len(n)];
        for j in 0..n {
            for k in 0..=j {
                if hessian[j][k] != hessian[k][j] {
                    return Err(Error::InvalidInput(format!("Hessian is not symmetric at ({j}, {k})")));
                }
                packed[packed_index(j, k)] = hessian[j][k];
            }
        }
        Ok(AggregatedStats {
            layout: HessianLayout::Packed,
            gradient,
            hessian: packed,
        })
    }

    pub fn num_labels(&self) -> usize {
        self.gradient.len()
    }

    pub fn layout(&self) -> HessianLayout {
        self.layout
    }

    pub fn gradient(&self) -> &[f64] {
        &self.gradient
    }

    /// Hessian in the stats' layout.
    pub fn hessian(&self) -> &[f64] {
        &self.hessian
    }

    pub fn hessian_dense(&self) -> Vec<Vec<f64>> {
        self.layout.to_dense(&self.hessian, self.num_labels())
    }

    #[inline]
    pub fn hessian_diagonal(&self, k: usize) -> f64 {
        self.hessian[self.layout.diagonal_index(k)]
    }

    pub fn clear(&mut self) {
        self.gradient.iter_mut().for_each(|v| *v = 0.0);
        self.hessian.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Adds `weight` times the derivatives of example `i`.
    #[inline]
    pub fn add_example(&mut self, store: &GradHessStore, i: usize, weight: f64) {
        for (a, g) in self.gradient.iter_mut().zip(store.gradient(i)) {
            *a += weight * g;
        }
        for (a, h) in self.hessian.iter_mut().zip(store.hessian(i)) {
            *a += weight * h;
        }
    }

    /// `self = total − part`.
    pub fn set_difference(&mut self, total: &AggregatedStats, part: &AggregatedStats) {
        for ((a, t), p) in self.gradient.iter_mut().zip(&total.gradient).zip(&part.gradient) {
            *a = t - p;
        }
        for ((a, t), p) in self.hessian.iter_mut().zip(&total.hessian).zip(&part.hessian) {
            *a = t - p;
        }
    }

    pub fn copy_from(&mut self, other: &AggregatedStats) {
        self.gradient.copy_from_slice(&other.gradient);
        self.hessian.copy_from_slice(&other.hessian);
    }

    /// Sums over examples with per-example weights (0 = not covered).
    pub fn from_weights(store: &GradHessStore, weights: &[f64]) -> Self {
        let mut stats = AggregatedStats::zeros(store.num_labels(), store.layout());
        for (i, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                stats.add_example(store, i, w);
            }
        }
        stats
    }
}

/// Sums the derivatives of all examples in `dataset` covered by `body`.
pub fn aggregate_stats(store: &GradHessStore, body: &Body, dataset: &Dataset) -> Result<AggregatedStats> {
    if store.num_examples() != dataset.num_examples() || store.num_labels() != dataset.num_labels() {
        return Err(Error::Shape("gradient store does not match the dataset".into()));
    }
    let mut stats = AggregatedStats::zeros(store.num_labels(), store.layout());
    for (i, x) in dataset.examples().iter().enumerate() {
        if body.covers(x)? {
            stats.add_example(store, i, 1.0);
        }
    }
    Ok(stats)
}

fn check_l2(l2: f64) -> Result<()> {
    if !l2.is_finite() || l2 < 0.0 {
        return Err(Error::Config(format!("regularization weight must be finite and >= 0, got {l2}")));
    }
    Ok(())
}

/// `g·p + ½ pᵀHp + ½λ‖p‖²`.
pub fn objective_value(stats: &AggregatedStats, head: &Head, l2: f64) -> f64 {
    objective_of_scores(stats, head.scores(), l2)
}

pub(crate) fn objective_of_scores(stats: &AggregatedStats, p: &[f64], l2: f64) -> f64 {
    let g = &stats.gradient;
    let h = &stats.hessian;
    let mut linear = 0.0;
    let mut quadratic = 0.0;
    match stats.layout {
        HessianLayout::Diagonal => {
            for k in 0..p.len() {
                linear += g[k] * p[k];
                quadratic += (h[k] + l2) * p[k] * p[k];
            }
        }
        HessianLayout::Packed => {
            for j in 0..p.len() {
                linear += g[j] * p[j];
                if p[j] == 0.0 {
                    continue;
                }
                quadratic += (h[packed_index(j, j)] + l2) * p[j] * p[j];
                for k in 0..j {
                    quadratic += 2.0 * h[packed_index(j, k)] * p[j] * p[k];
                }
            }
        }
    }
    linear + 0.5 * quadratic
}

/// Solves `(H + λI) p = −g` for a head predicting every label.
pub fn solve_full_head(stats: &AggregatedStats, l2: f64) -> Result<Head> {
    check_l2(l2)?;
    let mut solver = HeadSolver::new(stats.num_labels());
    solver.solve(stats, HeadTarget::Full, l2)?;
    solver.head()
}

/// Best head predicting a single label (or exactly `fixed_label`).
pub fn solve_single_label_head(stats: &AggregatedStats, l2: f64, fixed_label: Option<usize>) -> Result<Head> {
    check_l2(l2)?;
    let mut solver = HeadSolver::new(stats.num_labels());
    solver.solve(stats, HeadTarget::Single(fixed_label), l2)?;
    solver.head()
}

/// Head of the requested kind for the given statistics.
pub fn find_head(stats: &AggregatedStats, target: HeadTarget, l2: f64) -> Result<Head> {
    match target {
        HeadTarget::Full => solve_full_head(stats, l2),
        HeadTarget::Single(label) => solve_single_label_head(stats, l2, label),
    }
}

/// Reusable scratch space for solving many heads of the same size.
#[derive(Clone, Debug)]
pub struct HeadSolver {
    scores: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
    mode: HeadMode,
    objective: f64,
}

impl HeadSolver {
    pub fn new(num_labels: usize) -> Self {
        HeadSolver {
            scores: vec![0.0; num_labels],
            rhs: vec![0.0; num_labels],
            work: vec![0.0; packed_len(num_labels)],
            mode: HeadMode::Full,
            objective: 0.0,
        }
    }

    /// Solves for the optimal head and returns its objective. The head itself
    /// stays in the solver until the next call.
    pub fn solve(&mut self, stats: &AggregatedStats, target: HeadTarget, l2: f64) -> Result<f64> {
        let n = stats.num_labels();
        debug_assert_eq!(n, self.scores.len());
        match target {
            HeadTarget::Full => {
                self.mode = HeadMode::Full;
                match stats.layout {
                    HessianLayout::Diagonal => {
                        for k in 0..n {
                            let denom = stats.hessian[k] + l2;
                            if denom.is_nan() || denom <= 0.0 {
                                return Err(Error::Solver(format!(
                                    "label {k}: hessian + l2 = {denom:e} (diagonal system is singular)"
                                )));
                            }
                            self.scores[k] = -stats.gradient[k] / denom;
                        }
                    }
                    HessianLayout::Packed => {
                        for k in 0..n {
                            self.rhs[k] = -stats.gradient[k];
                        }
                        cholesky_solve_shifted(&stats.hessian, l2, &self.rhs, &mut self.work, &mut self.scores)
                            .map_err(|b| Error::Solver(b.to_string()))?;
                    }
                }
                self.objective = objective_of_scores(stats, &self.scores, l2);
            }
            HeadTarget::Single(fixed) => {
                if let Some(label) = fixed {
                    if label >= n {
                        return Err(Error::InvalidInput(format!("label {label} out of range")));
                    }
                }
                let candidates = match fixed {
                    Some(label) => label..label + 1,
                    None => 0..n,
                };
                let mut best: Option<(usize, f64, f64)> = None;
                for k in candidates {
                    let denom = stats.hessian_diagonal(k) + l2;
                    if denom.is_nan() || denom <= 0.0 {
                        continue;
                    }
                    let g = stats.gradient[k];
                    let p = -g / denom;
                    let objective = g * p + 0.5 * denom * p * p;
                    if best.is_none_or(|(_, _, b)| objective < b) {
                        best = Some((k, p, objective));
                    }
                }
                let (label, p, objective) = best.ok_or_else(|| {
                    Error::Solver("every candidate label has hessian + l2 = 0".into())
                })?;
                self.scores.iter_mut().for_each(|s| *s = 0.0);
                self.scores[label] = p;
                self.mode = HeadMode::Single(label);
                self.objective = objective;
            }
        }
        if self.scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Solver("head scores are not finite".into()));
        }
        Ok(self.objective)
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn mode(&self) -> HeadMode {
        self.mode
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn head(&self) -> Result<Head> {
        match self.mode {
            HeadMode::Full => Head::full(self.scores.clone()),
            HeadMode::Single(label) => Head::single(self.scores.len(), label, self.scores[label]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_head_closed_forms() {
        let s = AggregatedStats::diagonal(vec![-0.5], vec![0.25]).unwrap();
        assert_eq!(solve_full_head(&s, 0.0).unwrap().scores(), &[2.0]);

        let s = AggregatedStats::diagonal(vec![-0.5, 0.5], vec![0.25, 0.25]).unwrap();
        let p = solve_full_head(&s, 1.0).unwrap();
        assert!((p.scores()[0] - 0.4).abs() < 1e-15 && (p.scores()[1] + 0.4).abs() < 1e-15);
    }

    #[test]
    fn full_head_linear_system() {
        let s = AggregatedStats::dense(
            vec![-1.0 / 3.0, -1.0 / 3.0],
            &[vec![2.0 / 9.0, -1.0 / 9.0], vec![-1.0 / 9.0, 2.0 / 9.0]],
        )
        .unwrap();
        let p = solve_full_head(&s, 0.0).unwrap();
        assert!(p.scores().iter().all(|v| (v - 3.0).abs() < 1e-12));
        // J(3,3) = -2 + 1 = -1
        assert!((objective_value(&s, &p, 0.0) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_systems_fail() {
        let s = AggregatedStats::dense(vec![1.0, 1.0], &[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(solve_full_head(&s, 0.0), Err(Error::Solver(_))));
        assert!(solve_full_head(&s, 0.25).is_ok());
        let s = AggregatedStats::diagonal(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(solve_full_head(&s, 0.0), Err(Error::Solver(_))));
        let s = AggregatedStats::diagonal(vec![1.0], vec![0.0]).unwrap();
        assert!(matches!(solve_single_label_head(&s, 0.0, None), Err(Error::Solver(_))));
    }

    #[test]
    fn negative_l2_is_rejected() {
        let s = AggregatedStats::diagonal(vec![-0.5], vec![0.25]).unwrap();
        assert!(matches!(solve_full_head(&s, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn single_label_examples() {
        let s = AggregatedStats::diagonal(vec![-0.5, -0.1], vec![0.25, 0.25]).unwrap();
        let h = solve_single_label_head(&s, 0.0, None).unwrap();
        assert_eq!(h.mode(), HeadMode::Single(0));
        assert_eq!(h.scores(), &[2.0, 0.0]);
        assert!((objective_value(&s, &h, 0.0) + 0.5).abs() < 1e-15);

        let h = solve_single_label_head(&s, 0.0, Some(1)).unwrap();
        assert_eq!(h.mode(), HeadMode::Single(1));
        assert!((h.scores()[1] - 0.4).abs() < 1e-15);
        assert!((objective_value(&s, &h, 0.0) + 0.02).abs() < 1e-15);

        let s = AggregatedStats::diagonal(vec![0.0, 0.0], vec![0.25, 0.25]).unwrap();
        let h = solve_single_label_head(&s, 0.0, None).unwrap();
        assert_eq!(h.mode(), HeadMode::Single(0));
        assert_eq!(h.scores(), &[0.0, 0.0]);
    }

    #[test]
    fn single_label_uses_diagonal_of_full_hessian() {
        let s = AggregatedStats::dense(
            vec![-1.0 / 3.0, -0.1],
            &[vec![2.0 / 9.0, -1.0 / 9.0], vec![-1.0 / 9.0, 2.0 / 9.0]],
        )
        .unwrap();
        let h = solve_single_label_head(&s, 0.0, None).unwrap();
        assert_eq!(h.mode(), HeadMode::Single(0));
        assert!((h.scores()[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn objective_of_zero_head_is_zero() {
        let s = AggregatedStats::diagonal(vec![-0.5, 0.3], vec![0.25, 0.1]).unwrap();
        assert_eq!(objective_value(&s, &Head::zeros(2), 4.0), 0.0);
        let s = AggregatedStats::diagonal(vec![-0.5], vec![0.25]).unwrap();
        assert_eq!(objective_value(&s, &Head::full(vec![2.0]).unwrap(), 0.0), -0.5);
    }

    #[test]
    fn head_kind_parses() {
        assert_eq!("single".parse::<HeadKind>().unwrap(), HeadKind::Single);
        assert_eq!("multi".parse::<HeadKind>().unwrap(), HeadKind::Multi);
        assert!("partial".parse::<HeadKind>().is_err());
    }
}
