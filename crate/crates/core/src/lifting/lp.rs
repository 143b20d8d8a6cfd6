//! Two-phase dense simplex for the tiny equality-form LPs arising from
//! sampled envelopes: `min c.x  s.t.  A x = b, x >= 0`.

const EPS: f64 = 1e-12;

/// Returns the optimal value, or `None` when the system is infeasible.
/// Bland's rule keeps degenerate problems (common here) from cycling.
pub(crate) fn minimize(a: &[Vec<f64>], b: &[f64], cost: &[f64]) -> Option<f64> {
    let m = a.len();
    let n = cost.len();
    let width = n + m + 1;
    // Tableau rows: constraints (with artificials), then phase-1 objective.
    let mut t = vec![vec![0.0; width]; m + 1];
    let mut basis: Vec<usize> = (n..n + m).collect();
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][width - 1] = sign * b[i];
    }
    for i in 0..m {
        for j in 0..width {
            if j < n || j == width - 1 {
                t[m][j] -= t[i][j];
            }
        }
    }
    run(&mut t, &mut basis, n + m)?;
    if -t[m][width - 1] > 1e-9 {
        return None;
    }
    // Drive zero-level artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| t[i][j].abs() > 1e-9) {
                pivot(&mut t, &mut basis, i, j);
            }
        }
    }
    // Phase 2 objective expressed in the current basis.
    for j in 0..width {
        t[m][j] = if j < n { cost[j] } else { 0.0 };
    }
    for i in 0..m {
        let bj = basis[i];
        if bj < n {
            let f = t[m][bj];
            if f != 0.0 {
                for j in 0..width {
                    t[m][j] -= f * t[i][j];
                }
            }
        }
    }
    // Artificials may no longer enter.
    for i in 0..=m {
        for j in n..n + m {
            if !basis.contains(&j) {
                t[i][j] = 0.0;
            }
        }
    }
    run(&mut t, &mut basis, n)?;
    Some(-t[m][width - 1])
}

fn run(t: &mut [Vec<f64>], basis: &mut [usize], entering_limit: usize) -> Option<()> {
    let m = basis.len();
    let rhs = t[0].len() - 1;
    for _ in 0..10_000 {
        let Some(col) = (0..entering_limit).find(|&j| t[m][j] < -EPS) else {
            return Some(());
        };
        let mut row: Option<(usize, f64)> = None;
        for i in 0..m {
            if t[i][col] > EPS {
                let ratio = t[i][rhs] / t[i][col];
                row = match row {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        // Unbounded below cannot happen for bounded feasible sets.
        let (r, _) = row?;
        pivot(t, basis, r, col);
    }
    None
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    basis[r] = c;
}
