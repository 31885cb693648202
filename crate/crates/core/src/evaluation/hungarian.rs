/// Minimum-cost assignment on a rectangular cost matrix (`cost[r][c]`).
///
/// Every row is matched to a distinct column when there are at least as many
/// columns as rows; otherwise every column gets a distinct row and the
/// remaining rows map to `None`.
pub fn assign_min(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == cols), "ragged cost matrix");
    if cols == 0 {
        return vec![None; rows];
    }
    if rows <= cols {
        potentials(cost, rows, cols).into_iter().map(Some).collect()
    } else {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        let mut out = vec![None; rows];
        for (c, r) in potentials(&transposed, cols, rows).into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

/// Shortest augmenting path with row/column potentials, `rows ≤ cols`.
fn potentials(cost: &[Vec<f64>], rows: usize, cols: usize) -> Vec<usize> {
    // 1-based internally; column 0 is a virtual start.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for r in 1..=rows {
        owner[0] = r;
        let mut col = 0;
        let mut min = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[col] = true;
            let row = owner[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=cols {
                if used[c] {
                    continue;
                }
                let reduced = cost[row - 1][c - 1] - u[row] - v[c];
                if reduced < min[c] {
                    min[c] = reduced;
                    way[c] = col;
                }
                if min[c] < delta {
                    delta = min[c];
                    next = c;
                }
            }
            for c in 0..=cols {
                if used[c] {
                    u[owner[c]] += delta;
                    v[c] -= delta;
                } else {
                    min[c] -= delta;
                }
            }
            col = next;
            if owner[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            owner[col] = owner[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; rows];
    for c in 1..=cols {
        if owner[c] != 0 {
            out[owner[c] - 1] = c - 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(r, c)| c.map(|c| cost[r][c])).sum()
    }

    /// Smallest total over all injective maps of the smaller side.
    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], r: usize, used: &mut Vec<bool>, free_rows: usize) -> f64 {
            if r == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            // Skipping a row is allowed only while rows outnumber columns.
            if free_rows > 0 {
                best = rec(cost, r + 1, used, free_rows - 1);
            }
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[r][c] + rec(cost, r + 1, used, free_rows));
                    used[c] = false;
                }
            }
            best
        }
        let cols = cost[0].len();
        rec(cost, 0, &mut vec![false; cols], cost.len().saturating_sub(cols))
    }

    #[test]
    fn obvious_two_by_two() {
        let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert_eq!(assign_min(&cost), vec![Some(0), Some(1)]);
        let cost = vec![vec![5.0, 1.0], vec![1.0, 5.0]];
        assert_eq!(assign_min(&cost), vec![Some(1), Some(0)]);
    }

    #[test]
    fn more_rows_than_columns() {
        let cost = vec![vec![3.0], vec![1.0], vec![2.0]];
        assert_eq!(assign_min(&cost), vec![None, Some(0), None]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(-5.0f64..5.0, 36)) {
            let cost: Vec<Vec<f64>> = (0..rows).map(|r| (0..cols).map(|c| seed[r * 6 + c]).collect()).collect();
            let a = assign_min(&cost);
            let used: Vec<usize> = a.iter().flatten().copied().collect();
            let mut dedup = used.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(used.len(), dedup.len());
            prop_assert_eq!(used.len(), rows.min(cols));
            prop_assert!((total(&cost, &a) - brute(&cost)).abs() < 1e-9);
        }
    }
}
