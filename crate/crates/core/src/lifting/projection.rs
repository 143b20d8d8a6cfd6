//! Projections onto the per-pixel dual constraint sets of lifted TV.
//!
//! A pixel's dual block is `rows x dims`, row-major; row `i` is bounded by
//! the interval width `labels.widths()[i]`.

use super::labels::LabelSet;

/// Isotropic (row-wise 2-norm) or anisotropic (entry-wise) lifted TV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TvKind {
    Iso,
    An,
}

impl TvKind {
    pub fn name(self) -> &'static str {
        match self {
            TvKind::Iso => "iso",
            TvKind::An => "an",
        }
    }

    /// Project one pixel's dual block in place.
    pub fn project(self, q: &mut [f64], dims: usize, widths: &[f64]) {
        match self {
            TvKind::Iso => {
                for (row, &r) in q.chunks_exact_mut(dims).zip(widths) {
                    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > r {
                        let s = r / n;
                        row.iter_mut().for_each(|v| *v *= s);
                    }
                }
            }
            TvKind::An => {
                for (row, &r) in q.chunks_exact_mut(dims).zip(widths) {
                    row.iter_mut().for_each(|v| *v = v.clamp(-r, r));
                }
            }
        }
    }

    /// `sup_{q in K} <q, g>` for one pixel's gradient block.
    pub fn support(self, g: &[f64], dims: usize, widths: &[f64]) -> f64 {
        g.chunks_exact(dims)
            .zip(widths)
            .map(|(row, &r)| match self {
                TvKind::Iso => r * row.iter().map(|v| v * v).sum::<f64>().sqrt(),
                TvKind::An => r * row.iter().map(|v| v.abs()).sum::<f64>(),
            })
            .sum()
    }

    /// Whether a pixel's dual block lies in the constraint set (with slack `tol`).
    pub fn contains(self, q: &[f64], dims: usize, widths: &[f64], tol: f64) -> bool {
        q.chunks_exact(dims).zip(widths).all(|(row, &r)| match self {
            TvKind::Iso => row.iter().map(|v| v * v).sum::<f64>().sqrt() <= r + tol,
            TvKind::An => row.iter().all(|v| v.abs() <= r + tol),
        })
    }
}

impl std::str::FromStr for TvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "iso" => Ok(TvKind::Iso),
            "an" => Ok(TvKind::An),
            _ => Err(format!("unknown TV kind '{s}' (expected iso or an)")),
        }
    }
}

/// Projection of a `rows x dims` block onto `{ |q_i|_2 <= widths[i] }`.
pub fn project_k_iso(q: &[f64], dims: usize, labels: &LabelSet) -> Vec<f64> {
    let mut out = q.to_vec();
    TvKind::Iso.project(&mut out, dims, labels.widths());
    out
}

/// Projection of a `rows x dims` block onto `{ |q_ij| <= widths[i] }`.
pub fn project_k_an(q: &[f64], dims: usize, labels: &LabelSet) -> Vec<f64> {
    let mut out = q.to_vec();
    TvKind::An.project(&mut out, dims, labels.widths());
    out
}
