//! Minimum-cost one-to-one assignment (Kuhn–Munkres with row/column potentials).

/// Rectangular cost matrix with per-cell prohibition flags.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub cost: Vec<f64>,
    pub forbidden: Vec<bool>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, cost: Vec<f64>) -> Self {
        assert_eq!(cost.len(), rows * cols, "cost length must be rows * cols");
        CostMatrix {
            rows,
            cols,
            forbidden: vec![false; cost.len()],
            cost,
        }
    }

    pub fn with_forbidden(mut self, forbidden: Vec<bool>) -> Self {
        assert_eq!(forbidden.len(), self.cost.len());
        self.forbidden = forbidden;
        self
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.cost[r * self.cols + c]
    }

    #[inline]
    pub fn allowed(&self, r: usize, c: usize) -> bool {
        let i = r * self.cols + c;
        !self.forbidden[i] && self.cost[i].is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssignmentResult {
    /// `(row, col)` pairs sorted by row.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of matched costs, accumulated in row order.
    pub total_cost: f64,
}

/// Solves the assignment problem over the allowed cells.
///
/// Among all matchings of maximum cardinality (over allowed cells) it returns
/// one of minimum total cost. Forbidden or non-finite cells are never matched.
pub fn solve_assignment(m: &CostMatrix) -> AssignmentResult {
    if m.rows == 0 || m.cols == 0 {
        return AssignmentResult {
            unmatched_rows: (0..m.rows).collect(),
            unmatched_cols: (0..m.cols).collect(),
            ..Default::default()
        };
    }

    // Forbidden cells get a penalty larger than any sum of allowed costs, so
    // the optimum first minimises the number of forbidden cells used.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..m.rows {
        for c in 0..m.cols {
            if m.allowed(r, c) {
                lo = lo.min(m.at(r, c));
                hi = hi.max(m.at(r, c));
            }
        }
    }
    if !lo.is_finite() {
        return AssignmentResult {
            unmatched_rows: (0..m.rows).collect(),
            unmatched_cols: (0..m.cols).collect(),
            ..Default::default()
        };
    }
    let span = (hi - lo).max(1.0);
    let penalty = hi + span * (m.rows.min(m.cols) as f64 + 1.0);

    let transpose = m.rows > m.cols;
    let (n, k) = if transpose { (m.cols, m.rows) } else { (m.rows, m.cols) };
    let cell = |i: usize, j: usize| {
        let (r, c) = if transpose { (j, i) } else { (i, j) };
        if m.allowed(r, c) {
            m.at(r, c)
        } else {
            penalty
        }
    };

    let col_of_row = hungarian(n, k, cell);

    let mut matches = Vec::new();
    for (i, &j) in col_of_row.iter().enumerate() {
        let (r, c) = if transpose { (j, i) } else { (i, j) };
        if m.allowed(r, c) {
            matches.push((r, c));
        }
    }
    matches.sort_unstable();
    let mut row_used = vec![false; m.rows];
    let mut col_used = vec![false; m.cols];
    let mut total_cost = 0.0;
    for &(r, c) in &matches {
        row_used[r] = true;
        col_used[c] = true;
        total_cost += m.at(r, c);
    }
    AssignmentResult {
        matches,
        unmatched_rows: (0..m.rows).filter(|&r| !row_used[r]).collect(),
        unmatched_cols: (0..m.cols).filter(|&c| !col_used[c]).collect(),
        total_cost,
    }
}

/// Shortest-augmenting-path Hungarian algorithm for `n <= k`; returns the
/// column assigned to each row.
fn hungarian(n: usize, k: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    debug_assert!(n <= k);
    // 1-based, index 0 is the virtual root.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; k + 1];
    let mut row_of_col = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
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
            for j in 0..=k {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=k {
        if row_of_col[j] != 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_of_row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let r = solve_assignment(&CostMatrix::new(1, 1, vec![0.4]));
        assert_eq!(r.matches, vec![(0, 0)]);
        assert_eq!(r.total_cost, 0.4);
    }

    #[test]
    fn zero_diagonal() {
        let mut cost = vec![1.0; 9];
        for i in 0..3 {
            cost[i * 3 + i] = 0.0;
        }
        let r = solve_assignment(&CostMatrix::new(3, 3, cost));
        assert_eq!(r.matches, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = CostMatrix::new(2, 3, vec![5.0, 1.0, 3.0, 2.0, 4.0, 0.5]);
        let r = solve_assignment(&wide);
        assert_eq!(r.matches, vec![(0, 1), (1, 2)]);
        assert_eq!(r.unmatched_cols, vec![0]);
        let tall = CostMatrix::new(3, 2, vec![5.0, 2.0, 1.0, 4.0, 3.0, 0.5]);
        let r = solve_assignment(&tall);
        assert_eq!(r.matches, vec![(1, 0), (2, 1)]);
        assert_eq!(r.unmatched_rows, vec![0]);
    }

    #[test]
    fn forbidden_cells_are_never_used() {
        let m = CostMatrix::new(2, 2, vec![0.0, 9.0, 0.0, 9.0])
            .with_forbidden(vec![false, true, false, true]);
        let r = solve_assignment(&m);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.unmatched_rows.len(), 1);
        assert_eq!(r.unmatched_cols, vec![1]);
    }

    #[test]
    fn cardinality_beats_cost() {
        // the cheap cell (0,0) would block row 1, which can only use column 0
        let m = CostMatrix::new(2, 2, vec![0.0, 0.9, 0.5, 0.0])
            .with_forbidden(vec![false, false, false, true]);
        let r = solve_assignment(&m);
        assert_eq!(r.matches, vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn empty_and_all_forbidden() {
        let r = solve_assignment(&CostMatrix::new(0, 3, vec![]));
        assert_eq!(r.unmatched_cols, vec![0, 1, 2]);
        let m = CostMatrix::new(1, 2, vec![1.0, 1.0]).with_forbidden(vec![true, true]);
        let r = solve_assignment(&m);
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_rows, vec![0]);
    }
}
