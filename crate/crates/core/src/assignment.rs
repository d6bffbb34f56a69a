//! Exact rectangular assignment solvers and their brute-force oracles.
//!
//! Both solvers return the lexicographically smallest optimum, comparing the
//! row-sorted list of `(row, col)` pairs. Min-cost ties are resolved with an
//! absolute tolerance of [`TIE_TOLERANCE`].

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance under which two assignment costs are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Largest `min(rows, cols)` accepted by [`brute_force_min_cost`].
pub const BRUTE_FORCE_MAX_MATCHED: usize = 8;
/// Largest `max(rows, cols)` accepted by [`brute_force_min_cost`].
pub const BRUTE_FORCE_MAX_SIDE: usize = 12;
/// Largest `rows + cols` accepted by [`brute_force_max_matching`].
pub const BRUTE_FORCE_MAX_NODES: usize = 16;

/// Dense row-major matrix of finite matching costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                expected: rows * cols,
                actual: values.len(),
            });
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
            });
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from nested rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    rows: rows.len(),
                    cols,
                    expected: rows.len() * cols,
                    actual: values.len() + row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.cols..(row + 1) * self.cols]
    }

    /// Returns a copy with `offset` added to every entry.
    pub fn shifted(&self, offset: f64) -> Result<Self> {
        Self::new(
            self.rows,
            self.cols,
            self.values.iter().map(|v| v + offset).collect(),
        )
    }
}

/// Dense row-major adjacency between left (rows) and right (cols) nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolMatrix {
    rows: usize,
    cols: usize,
    values: Vec<bool>,
}

impl BoolMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<bool>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                rows,
                cols,
                expected: rows * cols,
                actual: values.len(),
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[bool]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::ShapeMismatch {
                    rows: rows.len(),
                    cols,
                    expected: rows.len() * cols,
                    actual: values.len() + row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, values)
    }

    /// Builds the matrix by evaluating `edge(row, col)` on every cell.
    pub fn from_fn(rows: usize, cols: usize, mut edge: impl FnMut(usize, usize) -> bool) -> Self {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(edge(r, c));
            }
        }
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.values[row * self.cols + col]
    }

    fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        (0..self.rows)
            .map(|r| (0..self.cols).filter(|&c| self.get(r, c)).collect())
            .collect()
    }
}

/// One-to-one pairing between row and column indices.
///
/// `pairs` is sorted by row index; unmatched index lists are ascending.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            pairs: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        }
    }

    /// Builds an assignment from arbitrary-order pairs, deriving the leftovers.
    ///
    /// Panics if a row or column index repeats or is out of range.
    pub fn from_pairs(rows: usize, cols: usize, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let mut row_used = vec![false; rows];
        let mut col_used = vec![false; cols];
        for &(r, c) in &pairs {
            assert!(!row_used[r], "row {r} assigned twice");
            assert!(!col_used[c], "col {c} assigned twice");
            row_used[r] = true;
            col_used[c] = true;
        }
        Self {
            pairs,
            unmatched_rows: (0..rows).filter(|&r| !row_used[r]).collect(),
            unmatched_cols: (0..cols).filter(|&c| !col_used[c]).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Sum of the assigned costs, accumulated in pair order.
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }

    /// Checks uniqueness and size accounting against a `rows x cols` instance.
    pub fn is_consistent(&self, rows: usize, cols: usize) -> bool {
        let mut row_seen = vec![false; rows];
        let mut col_seen = vec![false; cols];
        for &(r, c) in &self.pairs {
            if r >= rows || c >= cols || row_seen[r] || col_seen[c] {
                return false;
            }
            row_seen[r] = true;
            col_seen[c] = true;
        }
        for &r in &self.unmatched_rows {
            if r >= rows || row_seen[r] {
                return false;
            }
            row_seen[r] = true;
        }
        for &c in &self.unmatched_cols {
            if c >= cols || col_seen[c] {
                return false;
            }
            col_seen[c] = true;
        }
        self.pairs.len() + self.unmatched_rows.len() == rows
            && self.pairs.len() + self.unmatched_cols.len() == cols
    }
}

/// Minimum-cost assignment of size `min(rows, cols)`.
///
/// Runs the O(n²m) shortest-augmenting-path Hungarian method with the short
/// side as rows, then walks the equality subgraph of the optimal duals to
/// pick the lexicographically smallest optimum.
pub fn solve_min_cost(costs: &CostMatrix) -> Assignment {
    let (n, m) = (costs.rows(), costs.cols());
    if n == 0 || m == 0 {
        return Assignment::empty(n, m);
    }
    let duals = if n <= m {
        hungarian(n, m, &|r, c| costs.get(r, c))
    } else {
        let t = hungarian(m, n, &|r, c| costs.get(c, r));
        let mut row_to_col = vec![None; n];
        for (c, r) in t.row_to_col.iter().enumerate() {
            row_to_col[r.expect("short side fully matched")] = Some(c);
        }
        Duals {
            u: t.v,
            v: t.u,
            row_to_col,
        }
    };
    let mut refiner = TightRefiner::new(costs, duals);
    for row in 0..n {
        refiner.fix_smallest(row);
    }
    let pairs = (0..n)
        .filter_map(|r| {
            let c = refiner.row_to_col[r];
            (c < m).then_some((r, c))
        })
        .collect();
    Assignment::from_pairs(n, m, pairs)
}

/// Optimal duals and matching of a `rows x cols` instance.
///
/// `u[r] + v[c] <= cost(r, c)` everywhere with equality on matched pairs,
/// and `v <= 0` with `v = 0` on unmatched columns (and symmetrically for
/// rows when transposed), so zero-cost padding keeps the duals feasible.
struct Duals {
    u: Vec<f64>,
    v: Vec<f64>,
    row_to_col: Vec<Option<usize>>,
}

/// Hungarian method with row/column potentials; requires `n <= m`.
fn hungarian(n: usize, m: usize, cost: &dyn Fn(usize, usize) -> f64) -> Duals {
    debug_assert!(n <= m);
    // 1-based internally; index 0 is the virtual root
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    // col_owner[j] = row currently assigned to column j; 0 = free
    let mut col_owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![f64::INFINITY; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0usize;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; n];
    for j in 1..=m {
        if col_owner[j] != 0 {
            row_to_col[col_owner[j] - 1] = Some(j - 1);
        }
    }
    Duals {
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
        row_to_col,
    }
}

/// Lexicographic refinement over the equality subgraph of optimal duals.
///
/// The instance is padded to `k x k` with zero-cost dummy rows or columns
/// (zero duals). Every optimal assignment is then a perfect matching on tight
/// edges, so fixing real rows one at a time to their smallest feasible tight
/// column yields the lexicographically smallest optimum. Dummy columns sort
/// after real ones, which ranks "unmatched" last.
struct TightRefiner {
    k: usize,
    tight: Vec<Vec<usize>>,
    row_to_col: Vec<usize>,
    col_to_row: Vec<usize>,
    row_fixed: Vec<bool>,
    col_fixed: Vec<bool>,
}

impl TightRefiner {
    fn new(costs: &CostMatrix, duals: Duals) -> Self {
        let (n, m) = (costs.rows(), costs.cols());
        let k = n.max(m);
        let row_dual = |r: usize| if r < n { duals.u[r] } else { 0.0 };
        let col_dual = |c: usize| if c < m { duals.v[c] } else { 0.0 };
        let tight = (0..k)
            .map(|r| {
                (0..k)
                    .filter(|&c| {
                        let cost = if r < n && c < m { costs.get(r, c) } else { 0.0 };
                        cost - row_dual(r) - col_dual(c) <= TIE_TOLERANCE
                    })
                    .collect()
            })
            .collect();

        const FREE: usize = usize::MAX;
        let mut row_to_col = vec![FREE; k];
        let mut col_to_row = vec![FREE; k];
        for (r, c) in duals.row_to_col.iter().enumerate() {
            if let Some(c) = *c {
                row_to_col[r] = c;
                col_to_row[c] = r;
            }
        }
        // hand leftover real rows/cols to the padding in order
        let mut free_cols = (0..k).filter(|&c| col_to_row[c] == FREE).collect::<Vec<_>>().into_iter();
        for (r, slot) in row_to_col.iter_mut().enumerate() {
            if *slot == FREE {
                let c = free_cols.next().expect("square padding balances");
                *slot = c;
                col_to_row[c] = r;
            }
        }
        Self {
            k,
            tight,
            row_to_col,
            col_to_row,
            row_fixed: vec![false; k],
            col_fixed: vec![false; k],
        }
    }

    fn fix_smallest(&mut self, row: usize) {
        for idx in 0..self.tight[row].len() {
            let col = self.tight[row][idx];
            if self.col_fixed[col] {
                continue;
            }
            if self.try_force(row, col) {
                self.row_fixed[row] = true;
                self.col_fixed[col] = true;
                return;
            }
        }
        unreachable!("current tight matching always offers a feasible column");
    }

    /// Re-routes the current perfect matching so that `row` takes `col`,
    /// keeping fixed rows in place. Returns false when impossible.
    fn try_force(&mut self, row: usize, col: usize) -> bool {
        let freed = self.row_to_col[row];
        if freed == col {
            return true;
        }
        let start = self.col_to_row[col];
        let mut prev = vec![usize::MAX; self.k];
        let mut visited = vec![false; self.k];
        visited[start] = true;
        visited[row] = true;
        let mut queue = VecDeque::from([start]);
        let mut end = None;
        'search: while let Some(r) = queue.pop_front() {
            for &c in &self.tight[r] {
                if c == col || self.col_fixed[c] {
                    continue;
                }
                if c == freed {
                    end = Some(r);
                    break 'search;
                }
                let next = self.col_to_row[c];
                if !visited[next] {
                    visited[next] = true;
                    prev[next] = r;
                    queue.push_back(next);
                }
            }
        }
        let Some(mut r) = end else {
            return false;
        };
        // walk back: each row on the path takes the column of its successor
        let mut take = freed;
        loop {
            let held = self.row_to_col[r];
            self.row_to_col[r] = take;
            self.col_to_row[take] = r;
            if r == start {
                break;
            }
            take = held;
            r = prev[r];
        }
        self.row_to_col[row] = col;
        self.col_to_row[col] = row;
        true
    }
}

/// Maximum-cardinality matching over the true entries of `adjacency`.
///
/// Cardinality comes from Hopcroft-Karp; the lexicographically smallest
/// maximum matching is then selected by fixing rows in order and re-checking
/// that the remaining graph still supports the required size.
pub fn solve_max_matching(adjacency: &BoolMatrix) -> Assignment {
    let (n, m) = (adjacency.rows(), adjacency.cols());
    let adj = adjacency.adjacency_lists();
    let mut row_removed = vec![false; n];
    let mut col_removed = vec![false; m];
    let mut needed = hopcroft_karp(&adj, m, &row_removed, &col_removed);
    let mut pairs = Vec::with_capacity(needed);
    for row in 0..n {
        if needed == 0 {
            break;
        }
        row_removed[row] = true;
        for &col in &adj[row] {
            if col_removed[col] {
                continue;
            }
            col_removed[col] = true;
            if hopcroft_karp(&adj, m, &row_removed, &col_removed) + 1 == needed {
                pairs.push((row, col));
                needed -= 1;
                break;
            }
            col_removed[col] = false;
        }
    }
    Assignment::from_pairs(n, m, pairs)
}

/// Hopcroft-Karp cardinality on the subgraph without the removed nodes.
fn hopcroft_karp(
    adj: &[Vec<usize>],
    cols: usize,
    row_removed: &[bool],
    col_removed: &[bool],
) -> usize {
    const FREE: usize = usize::MAX;
    let rows = adj.len();
    let mut row_match = vec![FREE; rows];
    let mut col_match = vec![FREE; cols];
    let mut dist = vec![u32::MAX; rows];
    let mut size = 0;

    loop {
        // layered BFS from free rows
        let mut queue = VecDeque::new();
        for r in 0..rows {
            if !row_removed[r] && row_match[r] == FREE {
                dist[r] = 0;
                queue.push_back(r);
            } else {
                dist[r] = u32::MAX;
            }
        }
        let mut found = false;
        while let Some(r) = queue.pop_front() {
            for &c in &adj[r] {
                if col_removed[c] {
                    continue;
                }
                match col_match[c] {
                    FREE => found = true,
                    r2 if dist[r2] == u32::MAX => {
                        dist[r2] = dist[r] + 1;
                        queue.push_back(r2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            return size;
        }
        for r in 0..rows {
            if !row_removed[r]
                && row_match[r] == FREE
                && augment(r, adj, col_removed, &mut row_match, &mut col_match, &mut dist)
            {
                size += 1;
            }
        }
    }

    fn augment(
        r: usize,
        adj: &[Vec<usize>],
        col_removed: &[bool],
        row_match: &mut [usize],
        col_match: &mut [usize],
        dist: &mut [u32],
    ) -> bool {
        for &c in &adj[r] {
            if col_removed[c] {
                continue;
            }
            let owner = col_match[c];
            let ok = owner == FREE
                || (dist[owner] == dist[r] + 1
                    && augment(owner, adj, col_removed, row_match, col_match, dist));
            if ok {
                row_match[r] = c;
                col_match[c] = r;
                return true;
            }
        }
        dist[r] = u32::MAX;
        false
    }
}

/// Exhaustive minimum-cost assignment; testing oracle for [`solve_min_cost`].
///
/// Enumerates every injective map of size `min(rows, cols)`. Among all
/// assignments within [`TIE_TOLERANCE`] of the minimum it returns the
/// lexicographically smallest.
pub fn brute_force_min_cost(costs: &CostMatrix) -> Result<Assignment> {
    let (n, m) = (costs.rows(), costs.cols());
    if n.min(m) > BRUTE_FORCE_MAX_MATCHED || n.max(m) > BRUTE_FORCE_MAX_SIDE {
        return Err(Error::EnumerationBound {
            rows: n,
            cols: m,
            bound: "min(rows, cols) <= 8 and max(rows, cols) <= 12",
        });
    }
    let mut candidates: Vec<Vec<(usize, usize)>> = Vec::new();
    let transposed = n > m;
    let (small, large) = if transposed { (m, n) } else { (n, m) };
    let mut image = Vec::with_capacity(small);
    let mut used = vec![false; large];
    enumerate_injections(small, large, &mut image, &mut used, &mut |image| {
        let mut pairs: Vec<(usize, usize)> = image
            .iter()
            .enumerate()
            .map(|(a, &b)| if transposed { (b, a) } else { (a, b) })
            .collect();
        pairs.sort_unstable();
        candidates.push(pairs);
    });

    let cost_of = |pairs: &[(usize, usize)]| -> f64 { pairs.iter().map(|&(r, c)| costs.get(r, c)).sum() };
    let best = candidates
        .iter()
        .map(|p| cost_of(p))
        .fold(f64::INFINITY, f64::min);
    let chosen = candidates
        .into_iter()
        .filter(|p| cost_of(p) <= best + TIE_TOLERANCE)
        .min()
        .unwrap_or_default();
    Ok(Assignment::from_pairs(n, m, chosen))
}

fn enumerate_injections(
    len: usize,
    range: usize,
    image: &mut Vec<usize>,
    used: &mut [bool],
    visit: &mut dyn FnMut(&[usize]),
) {
    if image.len() == len {
        visit(image);
        return;
    }
    for target in 0..range {
        if used[target] {
            continue;
        }
        used[target] = true;
        image.push(target);
        enumerate_injections(len, range, image, used, visit);
        image.pop();
        used[target] = false;
    }
}

/// Exhaustive maximum matching; testing oracle for [`solve_max_matching`].
pub fn brute_force_max_matching(adjacency: &BoolMatrix) -> Result<Assignment> {
    let (n, m) = (adjacency.rows(), adjacency.cols());
    if n + m > BRUTE_FORCE_MAX_NODES {
        return Err(Error::EnumerationBound {
            rows: n,
            cols: m,
            bound: "rows + cols <= 16",
        });
    }
    let mut best: Vec<(usize, usize)> = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; m];
    search_matchings(adjacency, 0, &mut current, &mut used, &mut best);
    Ok(Assignment::from_pairs(n, m, best))
}

fn search_matchings(
    adjacency: &BoolMatrix,
    row: usize,
    current: &mut Vec<(usize, usize)>,
    used: &mut [bool],
    best: &mut Vec<(usize, usize)>,
) {
    if row == adjacency.rows() {
        if current.len() > best.len() || (current.len() == best.len() && *current < *best) {
            best.clone_from(current);
        }
        return;
    }
    for col in 0..adjacency.cols() {
        if used[col] || !adjacency.get(row, col) {
            continue;
        }
        used[col] = true;
        current.push((row, col));
        search_matchings(adjacency, row + 1, current, used, best);
        current.pop();
        used[col] = false;
    }
    search_matchings(adjacency, row + 1, current, used, best);
}
