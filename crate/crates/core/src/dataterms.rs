//! Data terms: quadratic ROF fidelity and a truncated patch-based stereo
//! matching cost, plus the bundled synthetic inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridShape, ScalarField};
use crate::lifting::{build_envelope, EnvelopeModel, LabelSet, Piece, PieceModel};

/// Grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    field: ScalarField,
}

impl Image {
    /// Clips `values` to `[0, 1]`; non-finite values are rejected.
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        let clipped = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            field: ScalarField::new(shape, clipped)?,
        })
    }

    pub fn from_field(field: &ScalarField) -> Result<Self> {
        Self::new(field.shape(), field.values().to_vec())
    }

    pub fn shape(&self) -> GridShape {
        self.field.shape()
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.field.get(row, col)
    }
}

/// One [`PieceModel`] per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelField {
    shape: GridShape,
    models: Vec<PieceModel>,
}

impl ModelField {
    pub fn new(shape: GridShape, models: Vec<PieceModel>) -> Result<Self> {
        if models.len() != shape.len() {
            return Err(Error::Shape(format!("{} models for {} pixels", models.len(), shape.len())));
        }
        if let Some(l) = models.first().map(PieceModel::intervals) {
            if models.iter().any(|m| m.intervals() != l) {
                return Err(Error::Model("pixels disagree on the interval count".into()));
            }
        }
        Ok(Self { shape, models })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn models(&self) -> &[PieceModel] {
        &self.models
    }

    pub fn intervals(&self) -> usize {
        self.models[0].intervals()
    }

    /// Per-pixel envelopes, built in parallel.
    pub fn envelopes(&self, labels: &LabelSet) -> Result<Vec<EnvelopeModel>> {
        self.models.par_iter().map(|m| build_envelope(m, labels)).collect()
    }

    /// The same model multiplied by `s > 0` (a data weight).
    pub fn scaled(&self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("data weight must be positive, got {s}")));
        }
        let models = self
            .models
            .iter()
            .map(|m| {
                let pieces = m
                    .pieces()
                    .iter()
                    .map(|p| match p {
                        Piece::Quadratic { a, b, c } => Piece::Quadratic { a: a * s, b: b * s, c: c * s },
                        Piece::Sampled(v) => Piece::Sampled(v.iter().map(|x| x * s).collect()),
                    })
                    .collect();
                PieceModel::new(pieces)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape: self.shape, models })
    }

    /// Every piece minus `p * t`, pixel-wise.
    pub fn minus_linear(&self, labels: &LabelSet, p: &[f64]) -> Result<Self> {
        if p.len() != self.models.len() {
            return Err(Error::Shape("offset length differs from pixel count".into()));
        }
        let models = self
            .models
            .iter()
            .zip(p)
            .map(|(m, &pv)| m.minus_linear(labels, pv))
            .collect();
        Ok(Self {
            shape: self.shape,
            models,
        })
    }
}

/// `(lambda / 2) (t - f(x))^2` on every interval of every pixel.
pub fn rof_model(f: &Image, lambda: f64, labels: &LabelSet) -> Result<ModelField> {
    if !(lambda > 0.0) {
        return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
    }
    let l = labels.intervals();
    let models = f
        .values()
        .iter()
        .map(|&fx| PieceModel::quadratic(l, 0.5 * lambda, -lambda * fx, 0.5 * lambda * fx * fx))
        .collect::<Result<Vec<_>>>()?;
    ModelField::new(f.shape(), models)
}

/// Forward differences along rows (`x1`, vertical) and columns (`x2`,
/// horizontal) in pixel units, zero at the far border.
pub fn image_derivatives(img: &Image) -> (ScalarField, ScalarField) {
    let shape = img.shape();
    let (h, w) = (shape.height(), shape.width());
    let d1 = ScalarField::from_fn(shape, |r, c| if r + 1 < h { img.get(r + 1, c) - img.get(r, c) } else { 0.0 });
    let d2 = ScalarField::from_fn(shape, |r, c| if c + 1 < w { img.get(r, c + 1) - img.get(r, c) } else { 0.0 });
    (d1, d2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StereoConfig {
    pub patch_radius: usize,
    /// Truncation threshold of the per-sample derivative difference.
    pub beta: f64,
    pub samples_per_interval: usize,
    /// Admissible disparities `[lo, hi]`.
    pub disparity_range: (f64, f64),
}

impl Default for StereoConfig {
    fn default() -> Self {
        Self {
            patch_radius: 1,
            beta: 0.1,
            samples_per_interval: 4,
            disparity_range: (0.0, 3.0),
        }
    }
}

impl StereoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if self.samples_per_interval < 2 {
            return Err(Error::Config("need at least 2 samples per interval".into()));
        }
        let (lo, hi) = self.disparity_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("bad disparity range [{lo}, {hi}]")));
        }
        Ok(())
    }
}

/// Precomputed derivatives of a stereo pair.
#[derive(Clone, Debug)]
pub struct StereoCost {
    shape: GridShape,
    left: [ScalarField; 2],
    right: [ScalarField; 2],
    cfg: StereoConfig,
}

impl StereoCost {
    pub fn new(i1: &Image, i2: &Image, cfg: &StereoConfig) -> Result<Self> {
        cfg.validate()?;
        if i1.shape() != i2.shape() {
            return Err(Error::Shape(format!(
                "stereo pair differs in shape: {}x{} vs {}x{}",
                i1.shape().height(),
                i1.shape().width(),
                i2.shape().height(),
                i2.shape().width()
            )));
        }
        let (a1, a2) = image_derivatives(i1);
        let (b1, b2) = image_derivatives(i2);
        Ok(Self {
            shape: i1.shape(),
            left: [a1, a2],
            right: [b1, b2],
            cfg: cfg.clone(),
        })
    }

    /// Left derivative `d` at row `r`, fractional column `x` (clamped).
    fn left_at(&self, d: usize, r: usize, x: f64) -> f64 {
        let w = self.shape.width();
        let x = x.clamp(0.0, (w - 1) as f64);
        let k = (x.floor() as usize).min(w.saturating_sub(2));
        let f = x - k as f64;
        let field = &self.left[d];
        if w == 1 {
            return field.get(r, 0);
        }
        field.get(r, k) * (1.0 - f) + field.get(r, k + 1) * f
    }

    /// Cost at pixel `(row, col)` for disparity `t`.
    pub fn cost(&self, row: usize, col: usize, t: f64) -> Result<f64> {
        let (lo, hi) = self.cfg.disparity_range;
        if !(t >= lo - 1e-12 && t <= hi + 1e-12) {
            return Err(Error::Range { value: t, lo, hi });
        }
        let r = self.cfg.patch_radius;
        let (h, w) = (self.shape.height(), self.shape.width());
        let mut sum = 0.0;
        for y1 in row.saturating_sub(r)..=(row + r).min(h - 1) {
            for y2 in col.saturating_sub(r)..=(col + r).min(w - 1) {
                for d in 0..2 {
                    let diff = self.left_at(d, y1, y2 as f64 + t) - self.right[d].get(y1, y2);
                    sum += diff.abs().min(self.cfg.beta);
                }
            }
        }
        Ok(sum)
    }
}

/// Truncated derivative matching cost of pixel `x = (row, col)` at disparity `t`.
pub fn stereo_cost(i1: &Image, i2: &Image, x: (usize, usize), t: f64, cfg: &StereoConfig) -> Result<f64> {
    StereoCost::new(i1, i2, cfg)?.cost(x.0, x.1, t)
}

/// Sampled stereo model: `samples_per_interval` equispaced costs per interval,
/// endpoints included.
pub fn stereo_model(i1: &Image, i2: &Image, labels: &LabelSet, cfg: &StereoConfig) -> Result<ModelField> {
    let (lo, hi) = cfg.disparity_range;
    if labels.first() < lo - 1e-12 || labels.last() > hi + 1e-12 {
        return Err(Error::Config(format!(
            "labels [{}, {}] exceed the disparity range [{lo}, {hi}]",
            labels.first(),
            labels.last()
        )));
    }
    let cost = StereoCost::new(i1, i2, cfg)?;
    let shape = i1.shape();
    let n = cfg.samples_per_interval;
    let models = (0..shape.len())
        .into_par_iter()
        .map(|p| {
            let (row, col) = (p / shape.width(), p % shape.width());
            let pieces = labels
                .labels()
                .windows(2)
                .map(|g| {
                    (0..n)
                        .map(|k| {
                            let t = if k + 1 == n { g[1] } else { g[0] + (g[1] - g[0]) * k as f64 / (n - 1) as f64 };
                            cost.cost(row, col, t)
                        })
                        .collect::<Result<Vec<_>>>()
                        .map(Piece::Sampled)
                })
                .collect::<Result<Vec<_>>>()?;
            PieceModel::new(pieces)
        })
        .collect::<Result<Vec<_>>>()?;
    ModelField::new(shape, models)
}

/// 32x32 denoising input: a large bright square and a small mid-gray one on
/// a dark background, plus Gaussian noise of standard deviation `noise`. The
/// small square disappears in the first Bregman steps and returns later.
pub fn two_squares(noise: f64, seed: u64) -> Result<Image> {
    let n = 32;
    let shape = GridShape::new(n, n)?.with_spacing(1.0 / n as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let clean = ScalarField::from_fn(shape, |r, c| {
        if (4..20).contains(&r) && (4..20).contains(&c) {
            0.9
        } else if (21..27).contains(&r) && (21..27).contains(&c) {
            0.6
        } else {
            0.2
        }
    });
    let values = clean.values().iter().map(|v| v + normal.sample(&mut rng)).collect();
    Image::new(shape, values)
}

/// The bundled denoising input used by the CLI and the acceptance tests.
pub fn bundled_two_squares() -> Image {
    two_squares(0.05, 1).expect("fixed parameters are valid")
}

/// Seeded synthetic stereo pair of size `n x n` with piecewise-constant
/// disparity. Returns `(left, right, ground truth)`; the right image samples
/// the left one at `col + disparity`.
pub fn synthetic_stereo_pair(n: usize, seed: u64) -> Result<(Image, Image, ScalarField)> {
    let shape = GridShape::new(n, n)?.with_spacing(1.0 / n as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>()).collect();
    // Light 3x3 box blur so that sub-pixel shifts stay informative.
    let texture = ScalarField::from_fn(shape, |r, c| {
        let mut s = 0.0;
        let mut k = 0.0;
        for rr in r.saturating_sub(1)..=(r + 1).min(n - 1) {
            for cc in c.saturating_sub(1)..=(c + 1).min(n - 1) {
                s += raw[rr * n + cc];
                k += 1.0;
            }
        }
        s / k
    });
    let q = n as f64 / 64.0;
    let truth = ScalarField::from_fn(shape, |r, c| {
        let (y, x) = (r as f64 / q, c as f64 / q);
        if (12.0..36.0).contains(&y) && (10.0..34.0).contains(&x) {
            2.5
        } else if (y - 44.0).powi(2) + (x - 44.0).powi(2) < 13.0f64.powi(2) {
            0.5
        } else {
            1.0
        }
    });
    let right = ScalarField::from_fn(shape, |r, c| {
        let x = (c as f64 + truth.get(r, c)).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let f = x - k as f64;
        texture.get(r, k) * (1.0 - f) + texture.get(r, k + 1) * f
    });
    Ok((Image::from_field(&texture)?, Image::from_field(&right)?, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rof_piece_values() {
        let labels = LabelSet::uniform(2, 0.0, 1.0).unwrap();
        let shape = GridShape::new(1, 2).unwrap();
        let img = Image::new(shape, vec![0.25, 0.0]).unwrap();
        let m = rof_model(&img, 2.0, &labels).unwrap();
        assert_eq!(m.models()[0].pieces()[0].value(0.0, 1.0, 0.25), 0.0);
        assert_eq!(m.models()[1].pieces()[0].value(0.0, 1.0, 1.0), 1.0);
    }

    #[test]
    fn image_clips_to_unit_range() {
        let img = Image::new(GridShape::line(3).unwrap(), vec![-0.5, 0.5, 1.5]).unwrap();
        assert_eq!(img.values(), &[0.0, 0.5, 1.0]);
        assert!(Image::new(GridShape::line(1).unwrap(), vec![f64::NAN]).is_err());
    }

    #[test]
    fn derivatives_of_constant_and_ramp() {
        let shape = GridShape::new(4, 5).unwrap();
        let c = Image::new(shape, vec![0.3; 20]).unwrap();
        let (d1, d2) = image_derivatives(&c);
        assert!(d1.values().iter().chain(d2.values()).all(|&v| v == 0.0));
        let ramp = Image::from_field(&ScalarField::from_fn(shape, |_, c| c as f64 / 5.0)).unwrap();
        let (d1, d2) = image_derivatives(&ramp);
        assert!(d1.values().iter().all(|&v| v == 0.0));
        for r in 0..4 {
            for c in 0..4 {
                assert!((d2.get(r, c) - 0.2).abs() < 1e-15);
            }
            assert_eq!(d2.get(r, 4), 0.0);
        }
    }

    #[test]
    fn stereo_cost_checks_range_and_shape() {
        let cfg = StereoConfig::default();
        let a = Image::new(GridShape::new(3, 3).unwrap(), vec![0.5; 9]).unwrap();
        let b = Image::new(GridShape::new(3, 4).unwrap(), vec![0.5; 12]).unwrap();
        assert!(matches!(stereo_cost(&a, &b, (0, 0), 0.0, &cfg), Err(Error::Shape(_))));
        assert!(matches!(stereo_cost(&a, &a, (0, 0), 3.5, &cfg), Err(Error::Range { .. })));
        assert_eq!(stereo_cost(&a, &a, (1, 1), 0.0, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn synthetic_assets_are_deterministic() {
        assert_eq!(two_squares(0.05, 3).unwrap(), two_squares(0.05, 3).unwrap());
        let (a, b, t) = synthetic_stereo_pair(64, 9).unwrap();
        let (c, d, u) = synthetic_stereo_pair(64, 9).unwrap();
        assert_eq!((a, b, t), (c, d, u));
    }
}
