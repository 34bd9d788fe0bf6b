//! Rectangular linear assignment (Hungarian algorithm with potentials).
//!
//! The square O(n³) shortest-augmenting-path solver runs on the cost matrix
//! padded with a constant. Among all optimal assignments the one whose
//! row-sorted pair list is lexicographically smallest is returned: every
//! optimal assignment uses only edges that are tight under the final
//! potentials, so a greedy row-by-row re-routing inside the tight subgraph
//! finds it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const NONE: usize = usize::MAX;

struct Square {
    n: usize,
    cost: Vec<f64>,
}

impl Square {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j]
    }

    /// Returns the row→column assignment and the reduced costs.
    fn solve(&self) -> (Vec<usize>, Vec<f64>) {
        let n = self.n;
        let mut u = vec![0.0; n + 1];
        let mut v = vec![0.0; n + 1];
        let mut p = vec![0usize; n + 1];
        let mut way = vec![0usize; n + 1];
        for i in 1..=n {
            p[0] = i;
            let mut j0 = 0;
            let mut minv = vec![f64::INFINITY; n + 1];
            let mut used = vec![false; n + 1];
            loop {
                used[j0] = true;
                let i0 = p[j0];
                let mut delta = f64::INFINITY;
                let mut j1 = 0;
                for j in 1..=n {
                    if used[j] {
                        continue;
                    }
                    let cur = self.at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for j in 0..=n {
                    if used[j] {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    } else {
                        minv[j] -= delta;
                    }
                }
                j0 = j1;
                if p[j0] == 0 {
                    break;
                }
            }
            loop {
                let j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }
        let mut col_of_row = vec![0; n];
        for j in 1..=n {
            col_of_row[p[j] - 1] = j - 1;
        }
        let mut reduced = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                reduced[i * n + j] = self.at(i, j) - u[i + 1] - v[j + 1];
            }
        }
        (col_of_row, reduced)
    }
}

struct Refiner<'a> {
    n: usize,
    tight: &'a [bool],
    col_of_row: Vec<usize>,
    row_of_col: Vec<usize>,
    locked: Vec<bool>,
}

impl Refiner<'_> {
    fn is_tight(&self, r: usize, c: usize) -> bool {
        self.tight[r * self.n + c]
    }

    /// Kuhn-style search: re-seat `row` on an unlocked tight column other
    /// than `banned`, displacing other rows along an alternating path that
    /// must end at the free column `free`.
    fn reseat(&mut self, row: usize, banned: usize, free: usize, seen: &mut [bool]) -> bool {
        for c in 0..self.n {
            if c == banned || self.locked[c] || seen[c] || !self.is_tight(row, c) {
                continue;
            }
            seen[c] = true;
            let ok = if c == free {
                true
            } else {
                let other = self.row_of_col[c];
                other != NONE && self.reseat(other, banned, free, seen)
            };
            if ok {
                self.col_of_row[row] = c;
                self.row_of_col[c] = row;
                return true;
            }
        }
        false
    }

    fn run(mut self) -> Vec<usize> {
        for i in 0..self.n {
            for j in 0..self.n {
                if self.locked[j] || !self.is_tight(i, j) {
                    continue;
                }
                let current = self.col_of_row[i];
                if j == current {
                    break;
                }
                let displaced = self.row_of_col[j];
                let snapshot = (self.col_of_row.clone(), self.row_of_col.clone());
                self.col_of_row[i] = j;
                self.row_of_col[j] = i;
                self.row_of_col[current] = NONE;
                self.col_of_row[displaced] = NONE;
                self.locked[j] = true;
                let mut seen = vec![false; self.n];
                if self.reseat(displaced, j, current, &mut seen) {
                    self.locked[j] = false;
                    break;
                }
                self.locked[j] = false;
                (self.col_of_row, self.row_of_col) = snapshot;
            }
            self.locked[self.col_of_row[i]] = true;
        }
        self.col_of_row
    }
}

/// Minimum-cost injective assignment on an `R×S` cost matrix. Returns
/// `min(R, S)` `(row, col)` pairs sorted by row.
pub fn hungarian_assign(cost: &Tensor) -> Result<Vec<(usize, usize)>> {
    cost.expect_rank(2, "cost matrix")?;
    if cost.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("cost matrix must be finite (no NaN)".into()));
    }
    let (rows, cols) = (cost.dims()[0], cost.dims()[1]);
    let n = rows.max(cols);
    let max_abs = cost.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pad = max_abs + 1.0;
    let mut square = vec![pad; n * n];
    for r in 0..rows {
        for c in 0..cols {
            square[r * n + c] = cost.get(&[r, c]);
        }
    }
    let square = Square { n, cost: square };
    let (col_of_row, reduced) = square.solve();

    let tol = 1e-9 * (1.0 + max_abs);
    let mut tight: Vec<bool> = reduced.iter().map(|&r| r <= tol).collect();
    for (r, &c) in col_of_row.iter().enumerate() {
        tight[r * n + c] = true;
    }
    let mut row_of_col = vec![NONE; n];
    for (r, &c) in col_of_row.iter().enumerate() {
        row_of_col[c] = r;
    }
    let refined = Refiner {
        n,
        tight: &tight,
        col_of_row,
        row_of_col,
        locked: vec![false; n],
    }
    .run();

    Ok(refined
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < rows && c < cols)
        .map(|(r, &c)| (r, c))
        .collect())
}

/// Sum of the costs of `pairs`.
pub fn assignment_cost(cost: &Tensor, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, c)| cost.get(&[r, c])).sum()
}
