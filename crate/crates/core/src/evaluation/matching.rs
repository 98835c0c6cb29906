use serde::{Deserialize, Serialize};

use super::metrics::relative_l2;
use crate::error::{Result, TfmdError};
use crate::signals::Signal;

/// Optimal pairing of ground-truth modes with reconstructed modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `assignment[j]` is the reconstructed mode paired with ground truth `j`.
    pub assignment: Vec<Option<usize>>,
    /// Relative L2 error of each ground-truth mode against its partner.
    pub per_mode_errors: Vec<Option<f64>>,
    pub unmatched_reconstructed: Vec<usize>,
    pub total_cost: f64,
}

impl MatchResult {
    /// Mean error over matched ground-truth modes, if any were matched.
    pub fn mean_error(&self) -> Option<f64> {
        let matched: Vec<f64> = self.per_mode_errors.iter().flatten().copied().collect();
        if matched.is_empty() {
            None
        } else {
            Some(matched.iter().sum::<f64>() / matched.len() as f64)
        }
    }
}

/// Minimum-cost assignment of rows to distinct columns (Hungarian method).
/// Every row is assigned when `rows <= cols`; otherwise every column is.
/// Returns `result[row] = Some(col)`.
pub fn optimal_assignment(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols)
            .map(|c| (0..rows).map(|r| cost[r][c]).collect())
            .collect();
        let by_col = optimal_assignment(&transposed);
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }

    // Potentials-based O(n^2 m) formulation, 1-indexed with a virtual column 0.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Pairs ground truth with reconstructed modes minimizing the summed
/// relative L2 error. When the counts differ, `min(N_f, N_g)` pairs are made.
pub fn match_modes(truth_modes: &[Signal], reconstructed: &[Signal]) -> Result<MatchResult> {
    if truth_modes.is_empty() {
        return Err(TfmdError::invalid("no ground-truth modes to match"));
    }
    let cost = truth_modes
        .iter()
        .map(|t| {
            reconstructed
                .iter()
                .map(|r| relative_l2(t, r))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let assignment = optimal_assignment(&cost);
    let per_mode_errors: Vec<Option<f64>> = assignment
        .iter()
        .enumerate()
        .map(|(j, a)| a.map(|i| cost[j][i]))
        .collect();
    let unmatched_reconstructed = (0..reconstructed.len())
        .filter(|i| !assignment.contains(&Some(*i)))
        .collect();
    let total_cost = per_mode_errors.iter().flatten().sum();
    Ok(MatchResult {
        assignment,
        per_mode_errors,
        unmatched_reconstructed,
        total_cost,
    })
}
