//! Exact minimum-cost one-to-one assignment (Hungarian algorithm with row
//! and column potentials, O(rows^2 * cols)). Rows must not outnumber
//! columns; every row is assigned a distinct column.

/// Cost value treated as "effectively forbidden". Kept finite so potential
/// arithmetic stays well defined; callers compare chosen-edge costs against
/// this to detect forced infeasible pairings.
pub const FORBIDDEN: f64 = 1e12;

/// Solve the assignment problem for a `rows x cols` cost matrix with
/// `rows <= cols`. Returns, for each row, its assigned column. The summed
/// cost over returned pairs is the global minimum.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    let m = cost[0].len();
    assert!(
        n <= m,
        "assignment requires rows ({n}) <= cols ({m})"
    );
    debug_assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");

    // 1-based arrays; p[j] is the row matched to column j (0 = unmatched)
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
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
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut result = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] != 0 {
            result[p[j] - 1] = j - 1;
        }
    }
    debug_assert!(result.iter().all(|&c| c != usize::MAX));
    result
}
