//! Discrete image domain and the fields living on it.
//!
//! Pixels are stored row-major. Lifted fields keep their channels innermost
//! per pixel, dual fields store a `rows x dims` matrix per pixel (row-major).
//!
//! The gradient is a forward difference with Neumann boundary: the difference
//! is zero wherever the forward neighbour falls outside the grid.
//! [`divergence_adjoint`] is its exact transpose.

use crate::error::{Error, Result};

/// Shape of the discrete domain.
///
/// `dims` is the number of spatial derivative directions: 2 for images, 1
/// for signals (which are stored as a single row).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridShape {
    height: usize,
    width: usize,
    spacing: f64,
    dims: usize,
}

impl GridShape {
    /// A two-dimensional grid with unit spacing.
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("{height}x{width} grid is empty")));
        }
        Ok(Self {
            height,
            width,
            spacing: 1.0,
            dims: 2,
        })
    }

    /// A one-dimensional grid of `n` samples (one row, derivatives along it only).
    pub fn line(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Shape("empty signal".into()));
        }
        Ok(Self {
            height: 1,
            width: n,
            spacing: 1.0,
            dims: 1,
        })
    }

    pub fn with_spacing(mut self, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Shape(format!("grid spacing must be positive, got {h}")));
        }
        self.spacing = h;
        Ok(self)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Upper bound on the squared operator norm of the forward-difference gradient.
    pub fn gradient_norm_sq_bound(&self) -> f64 {
        4.0 * self.dims as f64 / (self.spacing * self.spacing)
    }

    /// Forward neighbour of pixel `p` along derivative direction `axis`.
    ///
    /// For 2D grids axis 0 is vertical (next row) and axis 1 horizontal
    /// (next column); 1D grids only have the horizontal axis.
    #[inline]
    pub fn forward(&self, p: usize, axis: usize) -> Option<usize> {
        let (row, col) = (p / self.width, p % self.width);
        let vertical = self.dims == 2 && axis == 0;
        if vertical {
            (row + 1 < self.height).then(|| p + self.width)
        } else {
            (col + 1 < self.width).then(|| p + 1)
        }
    }

    /// Backward neighbour, i.e. the pixel whose forward neighbour is `p`.
    #[inline]
    pub fn backward(&self, p: usize, axis: usize) -> Option<usize> {
        let (row, col) = (p / self.width, p % self.width);
        let vertical = self.dims == 2 && axis == 0;
        if vertical {
            (row > 0).then(|| p - self.width)
        } else {
            (col > 0).then(|| p - 1)
        }
    }
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Numeric(format!("{what} has non-finite entry at {i}"))),
        None => Ok(()),
    }
}

/// One real value per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    shape: GridShape,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(shape: GridShape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                shape.len(),
                values.len()
            )));
        }
        check_finite(&values, "scalar field")?;
        Ok(Self { shape, values })
    }

    pub fn constant(shape: GridShape, value: f64) -> Self {
        Self {
            shape,
            values: vec![value; shape.len()],
        }
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self::constant(shape, 0.0)
    }

    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for r in 0..shape.height() {
            for c in 0..shape.width() {
                values.push(f(r, c));
            }
        }
        Self { shape, values }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[self.shape.index(row, col)]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// View as a single-channel lifted field.
    pub fn to_lifted(&self) -> LiftedField {
        LiftedField {
            shape: self.shape,
            channels: 1,
            values: self.values.clone(),
        }
    }
}

/// `channels` reals per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedField {
    shape: GridShape,
    channels: usize,
    values: Vec<f64>,
}

impl LiftedField {
    pub fn new(shape: GridShape, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::Shape("lifted field needs at least one channel".into()));
        }
        if values.len() != shape.len() * channels {
            return Err(Error::Shape(format!(
                "expected {} values, got {}",
                shape.len() * channels,
                values.len()
            )));
        }
        check_finite(&values, "lifted field")?;
        Ok(Self {
            shape,
            channels,
            values,
        })
    }

    pub fn zeros(shape: GridShape, channels: usize) -> Self {
        Self {
            shape,
            channels,
            values: vec![0.0; shape.len() * channels],
        }
    }

    /// Repeat the same per-pixel vector everywhere.
    pub fn broadcast(shape: GridShape, pixel: &[f64]) -> Self {
        let mut values = Vec::with_capacity(shape.len() * pixel.len());
        for _ in 0..shape.len() {
            values.extend_from_slice(pixel);
        }
        Self {
            shape,
            channels: pixel.len(),
            values,
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        &self.values[p * self.channels..(p + 1) * self.channels]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        &mut self.values[p * self.channels..(p + 1) * self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.channels)
    }

    pub fn dot(&self, other: &LiftedField) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Collapse a single-channel field into a scalar field.
    pub fn to_scalar(&self) -> Result<ScalarField> {
        if self.channels != 1 {
            return Err(Error::Shape(format!(
                "cannot view {}-channel field as scalar",
                self.channels
            )));
        }
        Ok(ScalarField {
            shape: self.shape,
            values: self.values.clone(),
        })
    }
}

/// A `rows x dims` matrix per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    shape: GridShape,
    rows: usize,
    values: Vec<f64>,
}

impl DualField {
    pub fn new(shape: GridShape, rows: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::Shape("dual field needs at least one row".into()));
        }
        let expected = shape.len() * rows * shape.dims();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        check_finite(&values, "dual field")?;
        Ok(Self {
            shape,
            rows,
            values,
        })
    }

    pub fn zeros(shape: GridShape, rows: usize) -> Self {
        Self {
            shape,
            rows,
            values: vec![0.0; shape.len() * rows * shape.dims()],
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.shape.dims()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn stride(&self) -> usize {
        self.rows * self.shape.dims()
    }

    pub fn pixel(&self, p: usize) -> &[f64] {
        let s = self.stride();
        &self.values[p * s..(p + 1) * s]
    }

    pub fn pixel_mut(&mut self, p: usize) -> &mut [f64] {
        let s = self.stride();
        &mut self.values[p * s..(p + 1) * s]
    }

    pub fn get(&self, p: usize, row: usize, axis: usize) -> f64 {
        self.values[p * self.stride() + row * self.shape.dims() + axis]
    }

    pub fn dot(&self, other: &DualField) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Sequential dot product (fixed summation order).
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Forward-difference gradient of raw channel-interleaved data into `out`.
pub(crate) fn gradient_raw(shape: &GridShape, channels: usize, u: &[f64], out: &mut [f64]) {
    let dims = shape.dims();
    let inv_h = 1.0 / shape.spacing();
    for p in 0..shape.len() {
        let base = p * channels * dims;
        for axis in 0..dims {
            match shape.forward(p, axis) {
                Some(n) => {
                    for i in 0..channels {
                        out[base + i * dims + axis] =
                            (u[n * channels + i] - u[p * channels + i]) * inv_h;
                    }
                }
                None => {
                    for i in 0..channels {
                        out[base + i * dims + axis] = 0.0;
                    }
                }
            }
        }
    }
}

/// Transpose of [`gradient_raw`] (negative divergence).
pub(crate) fn adjoint_raw(shape: &GridShape, channels: usize, q: &[f64], out: &mut [f64]) {
    let dims = shape.dims();
    let inv_h = 1.0 / shape.spacing();
    out.iter_mut().for_each(|v| *v = 0.0);
    for p in 0..shape.len() {
        let base = p * channels * dims;
        for axis in 0..dims {
            if let Some(n) = shape.forward(p, axis) {
                for i in 0..channels {
                    let qv = q[base + i * dims + axis] * inv_h;
                    out[n * channels + i] += qv;
                    out[p * channels + i] -= qv;
                }
            }
        }
    }
}

/// Forward-difference gradient, per channel and direction.
pub fn gradient(u: &LiftedField) -> DualField {
    let mut out = DualField::zeros(u.shape, u.channels);
    gradient_raw(&u.shape, u.channels, &u.values, &mut out.values);
    out
}

/// Exact adjoint of [`gradient`]: `<grad u, q> = <u, adjoint q>`.
pub fn divergence_adjoint(q: &DualField) -> LiftedField {
    let mut out = LiftedField::zeros(q.shape, q.rows);
    adjoint_raw(&q.shape, q.rows, &q.values, &mut out.values);
    out
}

/// Gradient of a scalar field (a dual field with one row).
pub fn scalar_gradient(u: &ScalarField) -> DualField {
    let mut out = DualField::zeros(u.shape, 1);
    gradient_raw(&u.shape, 1, &u.values, &mut out.values);
    out
}

/// Adjoint of [`scalar_gradient`]; `q` must have a single row.
pub fn scalar_adjoint(q: &DualField) -> Result<ScalarField> {
    if q.rows != 1 {
        return Err(Error::Shape(format!("expected 1 row, got {}", q.rows)));
    }
    let mut out = ScalarField::zeros(q.shape);
    adjoint_raw(&q.shape, 1, &q.values, &mut out.values);
    Ok(out)
}
