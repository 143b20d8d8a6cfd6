//! Rescaling of dual blocks to the `c * widths` column structure, which makes
//! the lifted subgradient a scalar subgradient times the interval widths.

use super::labels::{LabelSet, SublabelIndex};
use super::projection::TvKind;

/// Replace every row of `q` (`rows x dims`) by the active row `idx.interval`
/// rescaled to each row's width: `out[r][j] = widths[r] * q[i][j] / widths[i]`.
pub fn transform_dual(q: &[f64], dims: usize, idx: SublabelIndex, labels: &LabelSet) -> Vec<f64> {
    let rows = vec![idx.interval; dims];
    transform_dual_columns(q, dims, &rows, labels)
}

/// As [`transform_dual`] but with the source row chosen per column.
pub fn transform_dual_columns(q: &[f64], dims: usize, source_rows: &[usize], labels: &LabelSet) -> Vec<f64> {
    let widths = labels.widths();
    let mut out = vec![0.0; q.len()];
    for (j, &i) in source_rows.iter().enumerate().take(dims) {
        let c = q[i * dims + j] / widths[i];
        for (r, w) in widths.iter().enumerate() {
            out[r * dims + j] = c * w;
        }
    }
    out
}

/// Source row for each column of a sublabel-integral pixel.
///
/// Away from labels this is the interval containing the value. At a label
/// `g_m` the pixel belongs to both adjacent intervals; the row whose gradient
/// entry is nonzero is the one facing the forward neighbour: `m` when the
/// neighbour is higher and `m - 1` when it is lower. `forward_diff[a]` is the
/// unlifted forward difference along axis `a`; differences within `flat_tol`
/// keep the containing interval. The isotropic constraint couples the
/// columns, so there a single row (the containing interval) is used.
pub fn source_rows(idx: SublabelIndex, forward_diff: &[f64], tv: TvKind, intervals: usize, alpha_tol: f64, flat_tol: f64) -> Vec<usize> {
    let dims = forward_diff.len();
    if tv == TvKind::Iso {
        return vec![idx.interval; dims];
    }
    let label = if idx.alpha <= alpha_tol {
        Some(idx.interval)
    } else if idx.alpha >= 1.0 - alpha_tol {
        Some(idx.interval + 1)
    } else {
        None
    };
    forward_diff
        .iter()
        .map(|&g| match label {
            Some(m) if g > flat_tol => m.min(intervals - 1),
            Some(m) if g < -flat_tol => m.saturating_sub(1),
            _ => idx.interval,
        })
        .collect()
}
