//! Per-interval data-term pieces and their one-dimensional convex envelopes.

use super::labels::{LabelSet, SublabelIndex};
use crate::error::{Error, Result};

/// The data term restricted to one interval `[g_i, g_{i+1}]`.
#[derive(Clone, Debug, PartialEq)]
pub enum Piece {
    /// `a t^2 + b t + c` in label units, `a >= 0`.
    Quadratic { a: f64, b: f64, c: f64 },
    /// Values at `n >= 2` equispaced sublabels including both interval
    /// endpoints, linearly interpolated in between.
    Sampled(Vec<f64>),
}

impl Piece {
    /// Raw (unconvexified) value at `t = g_i + alpha (g_{i+1} - g_i)`.
    pub fn value(&self, lo: f64, width: f64, alpha: f64) -> f64 {
        match self {
            Piece::Quadratic { a, b, c } => {
                let t = lo + alpha * width;
                a * t * t + b * t + c
            }
            Piece::Sampled(v) => {
                let n = v.len() - 1;
                let x = alpha.clamp(0.0, 1.0) * n as f64;
                let k = (x.floor() as usize).min(n - 1);
                let f = x - k as f64;
                v[k] * (1.0 - f) + v[k + 1] * f
            }
        }
    }
}

/// One [`Piece`] per interval; `rho(x, .)` at a single pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct PieceModel {
    pieces: Vec<Piece>,
}

impl PieceModel {
    pub fn new(pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Model("no pieces".into()));
        }
        let quadratic = matches!(pieces[0], Piece::Quadratic { .. });
        for (i, p) in pieces.iter().enumerate() {
            match p {
                Piece::Quadratic { a, b, c } => {
                    if !quadratic {
                        return Err(Error::Model("cannot mix quadratic and sampled pieces".into()));
                    }
                    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
                        return Err(Error::Model(format!("piece {i}: non-finite coefficient")));
                    }
                    if *a < 0.0 {
                        return Err(Error::Model(format!("piece {i}: negative curvature {a}")));
                    }
                }
                Piece::Sampled(v) => {
                    if quadratic {
                        return Err(Error::Model("cannot mix quadratic and sampled pieces".into()));
                    }
                    if v.len() < 2 {
                        return Err(Error::Model(format!("piece {i}: need at least 2 samples")));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Model(format!("piece {i}: non-finite sample")));
                    }
                }
            }
        }
        Ok(Self { pieces })
    }

    /// The same quadratic `a t^2 + b t + c` on every interval.
    pub fn quadratic(intervals: usize, a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(vec![Piece::Quadratic { a, b, c }; intervals])
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn intervals(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self.pieces[0], Piece::Quadratic { .. })
    }

    /// Raw data term at the label-space value addressed by `idx`.
    pub fn value(&self, labels: &LabelSet, idx: SublabelIndex) -> f64 {
        let i = idx.interval;
        self.pieces[i].value(labels.labels()[i], labels.widths()[i], idx.alpha)
    }

    /// `rho - p t`: the same model with a linear term subtracted.
    pub fn minus_linear(&self, labels: &LabelSet, p: f64) -> PieceModel {
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .map(|(i, piece)| match piece {
                Piece::Quadratic { a, b, c } => Piece::Quadratic {
                    a: *a,
                    b: b - p,
                    c: *c,
                },
                Piece::Sampled(v) => {
                    let n = v.len() - 1;
                    let (lo, w) = (labels.labels()[i], labels.widths()[i]);
                    Piece::Sampled(
                        v.iter()
                            .enumerate()
                            .map(|(k, s)| s - p * (lo + w * k as f64 / n as f64))
                            .collect(),
                    )
                }
            })
            .collect();
        PieceModel { pieces }
    }
}

/// Convex envelope of one piece as a function of `alpha` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum HullPiece {
    /// `q2 alpha^2 + q1 alpha + q0`, `q2 >= 0`.
    Quadratic { q2: f64, q1: f64, q0: f64 },
    /// Lower convex hull through `knots` (first 0, last 1), with the slope of
    /// each segment.
    Linear {
        knots: Vec<f64>,
        values: Vec<f64>,
        slopes: Vec<f64>,
    },
}

/// Minimizer of `(c/2) a^2 - t a + hull(a)` over `[0, 1]`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Inner {
    pub alpha: f64,
    /// `d(alpha)/dt * (c + curvature)`, i.e. the fraction of a perturbation
    /// that is not absorbed by moving alpha; 1 when alpha is pinned.
    pub stiffness: f64,
}

impl HullPiece {
    pub fn from_piece(piece: &Piece, lo: f64, width: f64) -> Self {
        match piece {
            Piece::Quadratic { a, b, c } => HullPiece::Quadratic {
                q2: a * width * width,
                q1: (2.0 * a * lo + b) * width,
                q0: (a * lo + b) * lo + c,
            },
            Piece::Sampled(v) => {
                let n = (v.len() - 1) as f64;
                let mut knots: Vec<f64> = Vec::with_capacity(v.len());
                let mut values: Vec<f64> = Vec::with_capacity(v.len());
                for (k, &y) in v.iter().enumerate() {
                    let x = k as f64 / n;
                    // Drop previous points lying on or above the new chord.
                    while knots.len() >= 2 {
                        let m = knots.len();
                        let (x0, y0, x1, y1) = (knots[m - 2], values[m - 2], knots[m - 1], values[m - 1]);
                        if (x1 - x0) * (y - y0) - (y1 - y0) * (x - x0) <= 0.0 {
                            knots.pop();
                            values.pop();
                        } else {
                            break;
                        }
                    }
                    knots.push(x);
                    values.push(y);
                }
                let slopes = knots
                    .windows(2)
                    .zip(values.windows(2))
                    .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
                    .collect();
                HullPiece::Linear {
                    knots,
                    values,
                    slopes,
                }
            }
        }
    }

    pub fn value(&self, alpha: f64) -> f64 {
        match self {
            HullPiece::Quadratic { q2, q1, q0 } => (q2 * alpha + q1) * alpha + q0,
            HullPiece::Linear {
                knots,
                values,
                slopes,
            } => {
                let k = knots[1..knots.len() - 1].partition_point(|&x| x <= alpha);
                values[k] + slopes[k] * (alpha - knots[k])
            }
        }
    }

    /// Solve `min_{a in [0,1]} (c/2) a^2 - t a + hull(a)` for `c >= 0`.
    pub fn inner(&self, c: f64, t: f64) -> Inner {
        match self {
            HullPiece::Quadratic { q2, q1, .. } => {
                let curv = 2.0 * q2;
                let denom = c + curv;
                if denom > 0.0 {
                    let a = (t - q1) / denom;
                    if a <= 0.0 {
                        Inner { alpha: 0.0, stiffness: 1.0 }
                    } else if a >= 1.0 {
                        Inner { alpha: 1.0, stiffness: 1.0 }
                    } else {
                        Inner {
                            alpha: a,
                            stiffness: curv / denom,
                        }
                    }
                } else {
                    let alpha = if t > *q1 { 1.0 } else { 0.0 };
                    Inner { alpha, stiffness: 1.0 }
                }
            }
            HullPiece::Linear { knots, slopes, .. } => {
                // Optimality: t - c a lies in the subdifferential of the hull at a.
                let segs = slopes.len();
                for k in 0..=segs {
                    let x = knots[k];
                    let r = t - c * x;
                    let lo = if k == 0 { f64::NEG_INFINITY } else { slopes[k - 1] };
                    let hi = if k == segs { f64::INFINITY } else { slopes[k] };
                    if r >= lo && r <= hi {
                        return Inner { alpha: x, stiffness: 1.0 };
                    }
                    if k < segs && c > 0.0 {
                        let a = (t - slopes[k]) / c;
                        if a > x && a < knots[k + 1] {
                            return Inner { alpha: a, stiffness: 0.0 };
                        }
                    }
                }
                // Unreachable for finite input; fall back to the better endpoint.
                let a = if t > 0.0 { 1.0 } else { 0.0 };
                Inner { alpha: a, stiffness: 1.0 }
            }
        }
    }
}
