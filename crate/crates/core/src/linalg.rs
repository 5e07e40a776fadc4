//! Small dense symmetric systems stored as packed lower triangles.

/// Index of entry (row, col) in a packed lower triangle, `row >= col`.
#[inline]
pub fn packed_index(row: usize, col: usize) -> usize {
    debug_assert!(row >= col);
    row * (row + 1) / 2 + col
}

/// Index of entry (j, k) in a packed symmetric matrix, any order.
#[inline]
pub fn sym_index(j: usize, k: usize) -> usize {
    if j >= k {
        packed_index(j, k)
    } else {
        packed_index(k, j)
    }
}

#[inline]
pub fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Why a factorization failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Breakdown {
    pub pivot: usize,
    pub value: f64,
    pub diagonal_ratio: f64,
}

impl std::fmt::Display for Breakdown {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "pivot {} is {:e} (not positive); max/min diagonal ratio {:e}",
            self.pivot, self.value, self.diagonal_ratio
        )
    }
}

/// Solves `(A + shift*I) x = rhs` for symmetric positive definite `A` given as a
/// packed lower triangle, using an in-place Cholesky factorization of `work`.
///
/// `work` must have `packed_len(n)` entries and `x` must have `n` entries.
pub fn cholesky_solve_shifted(
    a: &[f64],
    shift: f64,
    rhs: &[f64],
    work: &mut [f64],
    x: &mut [f64],
) -> Result<(), Breakdown> {
    let n = rhs.len();
    debug_assert_eq!(a.len(), packed_len(n));
    work.copy_from_slice(a);
    for j in 0..n {
        work[packed_index(j, j)] += shift;
    }
    for j in 0..n {
        let mut d = work[packed_index(j, j)];
        for k in 0..j {
            let l = work[packed_index(j, k)];
            d -= l * l;
        }
        if !d.is_finite() || d <= 0.0 {
            return Err(Breakdown {
                pivot: j,
                value: d,
                diagonal_ratio: diagonal_ratio(a, shift, n),
            });
        }
        let d = d.sqrt();
        work[packed_index(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = work[packed_index(i, j)];
            for k in 0..j {
                s -= work[packed_index(i, k)] * work[packed_index(j, k)];
            }
            work[packed_index(i, j)] = s / d;
        }
    }
    // forward: L y = rhs
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= work[packed_index(i, k)] * x[k];
        }
        x[i] = s / work[packed_index(i, i)];
    }
    // backward: L^T x = y
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= work[packed_index(k, i)] * x[k];
        }
        x[i] = s / work[packed_index(i, i)];
    }
    Ok(())
}

fn diagonal_ratio(a: &[f64], shift: f64, n: usize) -> f64 {
    let diag = (0..n).map(|j| (a[packed_index(j, j)] + shift).abs());
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), d| (lo.min(d), hi.max(d)));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}
