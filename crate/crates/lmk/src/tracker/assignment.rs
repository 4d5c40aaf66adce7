//! Minimum-cost one-to-one assignment between tracks and observations.
//!
//! Shortest-augmenting-path solver (Jonker-Volgenant style, O(n^3)) over a
//! dense rectangular cost matrix. The smaller side is always matched
//! completely. Among equal-cost optima the solver prefers the
//! lexicographically smallest (row, column) pairing, so matching is fully
//! deterministic for tied costs.

/// Dense row-major cost matrix; rows are tracks, columns observations.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl CostMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            assert_eq!(row.len(), c, "ragged cost matrix");
            data.extend_from_slice(row);
        }
        Self { data, rows: r, cols: c }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }
}

/// An optimal assignment: pairs sorted by row, plus the summed cost of the
/// selected entries (accumulated in row order).
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Solve the minimum-cost assignment covering the smaller matrix side.
///
/// All costs must be finite.
pub fn solve(costs: &CostMatrix) -> Assignment {
    if costs.rows() == 0 || costs.cols() == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    debug_assert!(
        costs.data.iter().all(|c| c.is_finite()),
        "assignment costs must be finite"
    );

    let transposed = costs.rows() > costs.cols();
    let (n, m) = if transposed {
        (costs.cols(), costs.rows())
    } else {
        (costs.rows(), costs.cols())
    };
    let at = |i: usize, j: usize| {
        if transposed {
            costs.get(j, i)
        } else {
            costs.get(i, j)
        }
    };

    let (row_to_col, u, v) = augmenting_path_solve(&at, n, m);

    // Back to (row, col) in the original orientation.
    let mut pairs: Vec<(usize, usize)> = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| if transposed { (j, i) } else { (i, j) })
        .collect();
    pairs.sort_unstable();

    let reduced = |i: usize, j: usize| {
        if transposed {
            costs.get(i, j) - u[j] - v[i]
        } else {
            costs.get(i, j) - u[i] - v[j]
        }
    };
    let refined = lexicographic_refine(costs, &reduced, &pairs);

    let total_of = |ps: &[(usize, usize)]| ps.iter().map(|&(i, j)| costs.get(i, j)).sum::<f64>();
    let total = total_of(&pairs);
    // Adopt the lexicographic choice only when it is cost-identical; near
    // ties within the tightness epsilon otherwise keep the solver's pick.
    if let Some(better) = refined {
        if total_of(&better) == total {
            return Assignment {
                pairs: better,
                total,
            };
        }
    }
    Assignment { pairs, total }
}

/// Classic shortest-augmenting-path assignment for `n <= m`. Returns the
/// row-to-column matching and the dual potentials (u per row, v per col).
fn augmenting_path_solve(
    at: &dyn Fn(usize, usize) -> f64,
    n: usize,
    m: usize,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    // 1-indexed internals with a virtual column 0.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut col_row = vec![0usize; m + 1]; // column -> matched row, 0 = free
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        col_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = col_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[col_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_row[j0] = col_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if col_row[j] != 0 {
            row_to_col[col_row[j] - 1] = j - 1;
        }
    }
    debug_assert!(row_to_col.iter().all(|&j| j != usize::MAX));
    (row_to_col, u[1..].to_vec(), v[1..].to_vec())
}

/// Among assignments using only tight edges (zero reduced cost up to a
/// small epsilon), pick the lexicographically smallest sorted pair list.
/// Returns None when the initial matching itself is not tight under the
/// epsilon (accumulated rounding made the duals unusable for this).
fn lexicographic_refine(
    costs: &CostMatrix,
    reduced: &dyn Fn(usize, usize) -> f64,
    initial: &[(usize, usize)],
) -> Option<Vec<(usize, usize)>> {
    let rows = costs.rows();
    let cols = costs.cols();
    let scale = costs
        .data
        .iter()
        .fold(0.0_f64, |acc, c| acc.max(c.abs()));
    let eps = 1e-9 * (1.0 + scale);

    if initial.iter().any(|&(i, j)| reduced(i, j).abs() > eps) {
        return None;
    }

    // Tight adjacency, ascending column order per row.
    let mut tight: Vec<Vec<usize>> = vec![Vec::new(); rows];
    for (i, row) in tight.iter_mut().enumerate() {
        for j in 0..cols {
            if reduced(i, j).abs() <= eps {
                row.push(j);
            }
        }
    }

    let mut row_match: Vec<Option<usize>> = vec![None; rows];
    let mut col_match: Vec<Option<usize>> = vec![None; cols];
    for &(i, j) in initial {
        row_match[i] = Some(j);
        col_match[j] = Some(i);
    }

    let cover_rows = rows <= cols; // the fully matched side
    let mut col_fixed = vec![false; cols];
    let mut result: Vec<(usize, usize)> = Vec::with_capacity(initial.len());

    for i in 0..rows {
        let mut chosen: Option<usize> = None;
        for &j in &tight[i] {
            if col_fixed[j] {
                continue;
            }
            if row_match[i] == Some(j) {
                chosen = Some(j);
                break;
            }
            if try_fix(
                i,
                j,
                cover_rows,
                &tight,
                &mut row_match,
                &mut col_match,
                &col_fixed,
            ) {
                chosen = Some(j);
                break;
            }
        }
        match chosen {
            Some(j) => {
                col_fixed[j] = true;
                result.push((i, j));
            }
            None => {
                // Leaving a row unmatched is only legal when rows outnumber
                // columns; a matched row always has a fixable tight edge.
                if cover_rows || row_match[i].is_some() {
                    return None;
                }
            }
        }
    }
    if result.len() != rows.min(cols) {
        return None;
    }
    Some(result)
}

/// Try to re-route the current matching so that row `i` takes column `j`
/// while the covered side stays fully matched. Commits on success.
fn try_fix(
    i: usize,
    j: usize,
    cover_rows: bool,
    tight: &[Vec<usize>],
    row_match: &mut Vec<Option<usize>>,
    col_match: &mut Vec<Option<usize>>,
    col_fixed: &[bool],
) -> bool {
    let displaced = col_match[j].filter(|&r| r != i);
    let freed = row_match[i].filter(|&c| c != j);

    // Tentatively claim (i, j).
    if let Some(r) = displaced {
        row_match[r] = None;
    }
    if let Some(c) = freed {
        col_match[c] = None;
    }
    row_match[i] = Some(j);
    col_match[j] = Some(i);

    let ok = if cover_rows {
        // Every row must stay matched: re-seat the displaced row.
        match displaced {
            None => true,
            Some(r) => {
                let mut visited = vec![false; col_match.len()];
                visited[j] = true;
                augment_row(r, i, tight, row_match, col_match, col_fixed, &mut visited)
            }
        }
    } else {
        // Every column must stay matched: re-cover the freed column.
        match freed {
            None => true,
            Some(c) => {
                let mut visited = vec![false; row_match.len()];
                augment_col(c, i, tight, row_match, col_match, col_fixed, &mut visited)
            }
        }
    };

    if !ok {
        // The augment search mutates nothing on failure, so undoing the
        // tentative claim restores the previous matching exactly.
        row_match[i] = freed;
        col_match[j] = displaced;
        if let Some(r) = displaced {
            row_match[r] = Some(j);
        }
        if let Some(c) = freed {
            col_match[c] = Some(i);
        }
    }
    ok
}

fn augment_row(
    r: usize,
    fixed_until: usize,
    tight: &[Vec<usize>],
    row_match: &mut Vec<Option<usize>>,
    col_match: &mut Vec<Option<usize>>,
    col_fixed: &[bool],
    visited: &mut Vec<bool>,
) -> bool {
    for &j in &tight[r] {
        if col_fixed[j] || visited[j] {
            continue;
        }
        visited[j] = true;
        let next = col_match[j];
        let free = match next {
            None => true,
            Some(r2) => {
                r2 > fixed_until
                    && augment_row(r2, fixed_until, tight, row_match, col_match, col_fixed, visited)
            }
        };
        if free {
            row_match[r] = Some(j);
            col_match[j] = Some(r);
            return true;
        }
    }
    false
}

fn augment_col(
    c: usize,
    fixed_until: usize,
    tight: &[Vec<usize>],
    row_match: &mut Vec<Option<usize>>,
    col_match: &mut Vec<Option<usize>>,
    col_fixed: &[bool],
    visited: &mut Vec<bool>,
) -> bool {
    for (r, cols) in tight.iter().enumerate().skip(fixed_until + 1) {
        if visited[r] || !cols.contains(&c) {
            continue;
        }
        visited[r] = true;
        let free = match row_match[r] {
            None => true,
            Some(c2) => {
                !col_fixed[c2]
                    && augment_col(c2, fixed_until, tight, row_match, col_match, col_fixed, visited)
            }
        };
        if free {
            row_match[r] = Some(c);
            col_match[c] = Some(r);
            return true;
        }
    }
    false
}
