//! Minimum-cost assignment between estimates and truths.

/// Hungarian algorithm on a rectangular cost matrix (`rows x cols`).
///
/// Returns `(row, col)` pairs covering `min(rows, cols)` entries with
/// minimum total cost.
pub fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let mut pairs: Vec<(usize, usize)> = min_cost_assignment(&t)
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect();
        pairs.sort_unstable();
        return pairs;
    }
    // Potentials formulation with 1-based sentinels; n <= m.
    let (n, m) = (rows, cols);
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
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
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Matches estimated angles to true angles minimizing total absolute error.
/// Returns `(estimate_index, truth_index)` pairs.
pub fn match_angles(estimates: &[f64], truths: &[f64]) -> Vec<(usize, usize)> {
    let cost: Vec<Vec<f64>> = estimates
        .iter()
        .map(|e| truths.iter().map(|t| (e - t).abs()).collect())
        .collect();
    min_cost_assignment(&cost)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(cost: &[Vec<f64>]) -> f64 {
        fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
            if row == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for c in 0..used.len() {
                if !used[c] {
                    used[c] = true;
                    best = best.min(cost[row][c] + rec(cost, row + 1, used));
                    used[c] = false;
                }
            }
            best
        }
        rec(cost, 0, &mut vec![false; cost[0].len()])
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = crate::rng::stream(1, crate::rng::Domain::Scenario, 0);
        use rand::Rng;
        for _ in 0..200 {
            let n = rng.gen_range(1..=5);
            let m = rng.gen_range(n..=5);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen::<f64>()).collect())
                .collect();
            let pairs = min_cost_assignment(&cost);
            assert_eq!(pairs.len(), n);
            let total: f64 = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
            assert!((total - brute(&cost)).abs() < 1e-12);
        }
    }

    #[test]
    fn more_rows_than_columns() {
        let pairs = match_angles(&[10.0, 50.0, 90.0], &[88.0, 12.0]);
        assert_eq!(pairs, vec![(0, 1), (2, 0)]);
        assert!(match_angles(&[], &[1.0]).is_empty());
    }
}
