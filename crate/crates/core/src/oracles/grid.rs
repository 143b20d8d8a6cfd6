use super::biconjugate::brute_biconjugate_1d;
use crate::error::{Error, Result};
use crate::lifting::{LabelSet, PieceModel};

/// Resolution of the brute-force searches.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOracleConfig {
    /// Grid points per axis of the prox search over the lifted domain.
    pub resolution: usize,
    /// Samples per interval for the per-piece biconjugates.
    pub samples: usize,
}

impl Default for GridOracleConfig {
    fn default() -> Self {
        Self {
            resolution: 101,
            samples: 1001,
        }
    }
}

impl GridOracleConfig {
    pub fn spacing(&self) -> f64 {
        1.0 / (self.resolution - 1) as f64
    }
}

/// Brute-force envelope of a model with at most two intervals.
///
/// Each piece is convexified on its own by [`brute_biconjugate_1d`]; a
/// lifted point is then the cheapest mixture of one point per interval,
/// found by enumerating the position inside one interval on a fine grid.
pub struct EnvelopeOracle {
    hulls: Vec<Vec<f64>>,
}

impl EnvelopeOracle {
    pub fn new(model: &PieceModel, labels: &LabelSet, cfg: &GridOracleConfig) -> Result<Self> {
        let l = model.intervals();
        if l > 2 {
            return Err(Error::Unsupported(format!("grid oracle needs l <= 2, got {l}")));
        }
        if cfg.resolution < 101 || cfg.samples < 101 {
            return Err(Error::Config("oracle resolution must be at least 101".into()));
        }
        let n = cfg.samples;
        let hulls = model
            .pieces()
            .iter()
            .enumerate()
            .map(|(j, piece)| {
                let (lo, w) = (labels.labels()[j], labels.widths()[j]);
                let raw: Vec<f64> = (0..n)
                    .map(|k| piece.value(lo, w, k as f64 / (n - 1) as f64))
                    .collect();
                brute_biconjugate_1d(&raw, 0.0, 1.0)
            })
            .collect();
        Ok(Self { hulls })
    }

    fn hull(&self, j: usize, alpha: f64) -> f64 {
        let h = &self.hulls[j];
        let n = h.len() - 1;
        let x = alpha.clamp(0.0, 1.0) * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        let f = x - k as f64;
        h[k] * (1.0 - f) + h[k + 1] * f
    }

    pub fn eval(&self, w: &[f64]) -> f64 {
        const TOL: f64 = 1e-12;
        match w.len() {
            1 => {
                if w[0] < -TOL || w[0] > 1.0 + TOL {
                    f64::INFINITY
                } else {
                    self.hull(0, w[0])
                }
            }
            2 => {
                let (w0, w1) = (w[0], w[1]);
                if w0 > 1.0 + TOL || w1 < -TOL || w1 > w0 + TOL {
                    return f64::INFINITY;
                }
                let n = self.hulls[0].len() - 1;
                let mut best = f64::INFINITY;
                let inside = |x: f64| (-TOL..=1.0 + TOL).contains(&x);
                for k in 0..=n {
                    let a = k as f64 / n as f64;
                    // Position a in interval 0 with weight lam.
                    if a < 1.0 {
                        let lam = (1.0 - w0) / (1.0 - a);
                        if inside(lam) {
                            if 1.0 - lam > TOL {
                                let b = w1 / (1.0 - lam);
                                if inside(b) {
                                    best = best.min(lam * self.hull(0, a) + (1.0 - lam) * self.hull(1, b));
                                }
                            } else if w1.abs() <= TOL {
                                best = best.min(self.hull(0, a));
                            }
                        }
                    }
                    // Position b = a in interval 1 with weight 1 - lam.
                    let b = a;
                    if b > 0.0 {
                        let lam = 1.0 - w1 / b;
                        if inside(lam) {
                            if lam > TOL {
                                let a2 = (w0 - 1.0 + lam) / lam;
                                if inside(a2) {
                                    best = best.min(lam * self.hull(0, a2) + (1.0 - lam) * self.hull(1, b));
                                }
                            } else if (w0 - 1.0).abs() <= TOL {
                                best = best.min(self.hull(1, b));
                            }
                        }
                    }
                }
                best
            }
            _ => f64::INFINITY,
        }
    }
}

/// Argmin of `|w - u|^2 / (2 tau) + rho**(w)` over a grid of the lifted
/// domain (l <= 2), with the envelope from [`EnvelopeOracle`].
pub fn grid_prox_oracle(
    model: &PieceModel,
    labels: &LabelSet,
    u: &[f64],
    tau: f64,
    cfg: &GridOracleConfig,
) -> Result<Vec<f64>> {
    let oracle = EnvelopeOracle::new(model, labels, cfg)?;
    let r = cfg.resolution - 1;
    let obj = |w: &[f64]| {
        w.iter().zip(u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (2.0 * tau) + oracle.eval(w)
    };
    let mut best = (f64::INFINITY, Vec::new());
    match u.len() {
        1 => {
            for i in 0..=r {
                let w = [i as f64 / r as f64];
                let v = obj(&w);
                if v < best.0 {
                    best = (v, w.to_vec());
                }
            }
        }
        2 => {
            for i in 0..=r {
                for j in 0..=i {
                    let w = [i as f64 / r as f64, j as f64 / r as f64];
                    let v = obj(&w);
                    if v < best.0 {
                        best = (v, w.to_vec());
                    }
                }
            }
        }
        l => return Err(Error::Unsupported(format!("grid oracle needs l <= 2, got {l}"))),
    }
    Ok(best.1)
}
