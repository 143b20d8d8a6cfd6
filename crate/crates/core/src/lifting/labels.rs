use crate::error::{Error, Result};

/// Ordered labels `g_1 < ... < g_L` discretizing the range.
///
/// The `L - 1` intervals `[g_i, g_{i+1}]` are indexed from 0 in this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    labels: Vec<f64>,
    widths: Vec<f64>,
}

impl LabelSet {
    pub fn new(labels: Vec<f64>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::Labels(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Labels("labels must be finite".into()));
        }
        let widths: Vec<f64> = labels.windows(2).map(|w| w[1] - w[0]).collect();
        if widths.iter().any(|&w| w <= 0.0) {
            return Err(Error::Labels("labels must be strictly increasing".into()));
        }
        Ok(Self { labels, widths })
    }

    /// `count` equispaced labels covering `[lo, hi]`.
    pub fn uniform(count: usize, lo: f64, hi: f64) -> Result<Self> {
        if count < 2 {
            return Err(Error::Labels(format!("need at least 2 labels, got {count}")));
        }
        let step = (hi - lo) / (count - 1) as f64;
        let mut labels: Vec<f64> = (0..count).map(|k| lo + step * k as f64).collect();
        labels[count - 1] = hi;
        Self::new(labels)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Interval widths `g_{i+1} - g_i`.
    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    /// Number of labels `L`.
    pub fn count(&self) -> usize {
        self.labels.len()
    }

    /// Number of intervals `l = L - 1`, i.e. the lifted dimension.
    pub fn intervals(&self) -> usize {
        self.widths.len()
    }

    pub fn first(&self) -> f64 {
        self.labels[0]
    }

    pub fn last(&self) -> f64 {
        self.labels[self.labels.len() - 1]
    }

    /// The label-space value addressed by `idx`.
    pub fn value(&self, idx: SublabelIndex) -> f64 {
        self.labels[idx.interval] + idx.alpha * self.widths[idx.interval]
    }

    /// Locate `value` on the label grid. Interior labels go to the interval on
    /// their right with `alpha = 0`; the last label is `alpha = 1` of the last interval.
    pub fn locate(&self, value: f64) -> Result<SublabelIndex> {
        let (lo, hi) = (self.first(), self.last());
        if !(value >= lo && value <= hi) {
            return Err(Error::Range { value, lo, hi });
        }
        let l = self.intervals();
        let interval = self.labels[1..l].partition_point(|&g| g <= value);
        let alpha = ((value - self.labels[interval]) / self.widths[interval]).clamp(0.0, 1.0);
        Ok(SublabelIndex { interval, alpha })
    }
}

/// Interval index (0-based) and position `alpha` in `[0, 1]` inside it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SublabelIndex {
    pub interval: usize,
    pub alpha: f64,
}

impl SublabelIndex {
    /// The lifted vector: `interval` ones, then `alpha`, then zeros.
    pub fn to_vector(self, intervals: usize) -> Vec<f64> {
        (0..intervals)
            .map(|r| match r.cmp(&self.interval) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => self.alpha,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect()
    }
}

/// Lift a label-space value to its sublabel-integral vector.
pub fn lift(value: f64, labels: &LabelSet) -> Result<(SublabelIndex, Vec<f64>)> {
    let idx = labels.locate(value)?;
    Ok((idx, idx.to_vector(labels.intervals())))
}

/// Map a lifted vector back to the label space. Applied as-is to relaxed
/// (non-integral) vectors.
pub fn unlift(vec: &[f64], labels: &LabelSet) -> f64 {
    labels.first()
        + vec
            .iter()
            .zip(labels.widths())
            .map(|(u, w)| u * w)
            .sum::<f64>()
}

/// If `vec` is within `tol` (max-norm) of a sublabel-integral vector, return
/// its index. Exact ties between the two intervals sharing a label resolve to
/// the right interval, matching [`lift`].
pub fn check_sublabel_integral(vec: &[f64], tol: f64) -> Option<SublabelIndex> {
    let l = vec.len();
    let mut best: Option<(f64, SublabelIndex)> = None;
    for i in 0..l {
        let alpha = vec[i].clamp(0.0, 1.0);
        let mut dist = (vec[i] - alpha).abs();
        for &v in &vec[..i] {
            dist = dist.max((v - 1.0).abs());
        }
        for &v in &vec[i + 1..] {
            dist = dist.max(v.abs());
        }
        if best.map_or(true, |(d, _)| dist <= d) {
            best = Some((dist, SublabelIndex { interval: i, alpha }));
        }
    }
    best.filter(|(d, _)| *d <= tol).map(|(_, idx)| idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three() -> LabelSet {
        LabelSet::new(vec![0.0, 0.5, 1.0]).unwrap()
    }

    #[test]
    fn lift_inside_first_interval() {
        let (idx, v) = lift(0.25, &three()).unwrap();
        assert_eq!(idx, SublabelIndex { interval: 0, alpha: 0.5 });
        assert_eq!(v, vec![0.5, 0.0]);
    }

    #[test]
    fn lift_inside_second_interval() {
        let (idx, v) = lift(0.75, &three()).unwrap();
        assert_eq!(idx, SublabelIndex { interval: 1, alpha: 0.5 });
        assert_eq!(v, vec![1.0, 0.5]);
    }

    #[test]
    fn lift_boundaries_and_interior_label() {
        let labels = three();
        assert_eq!(lift(0.0, &labels).unwrap().1, vec![0.0, 0.0]);
        assert_eq!(lift(1.0, &labels).unwrap().1, vec![1.0, 1.0]);
        let (idx, v) = lift(0.5, &labels).unwrap();
        assert_eq!(idx, SublabelIndex { interval: 1, alpha: 0.0 });
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn lift_out_of_range() {
        assert!(matches!(lift(1.5, &three()), Err(Error::Range { .. })));
        assert!(matches!(lift(-0.1, &three()), Err(Error::Range { .. })));
        assert!(lift(f64::NAN, &three()).is_err());
    }

    #[test]
    fn unlift_examples() {
        let labels = three();
        assert_eq!(unlift(&[0.5, 0.0], &labels), 0.25);
        assert_eq!(unlift(&[0.0, 0.0], &labels), 0.0);
        assert_eq!(unlift(&[1.0, 1.0], &labels), 1.0);
        let four = LabelSet::new(vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        assert!((unlift(&[1.0, 0.5, 0.5], &four) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn round_trip_random_values() {
        let labels = LabelSet::new(vec![-1.0, -0.2, 0.3, 2.0, 2.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = rng.gen_range(-1.0..=2.5);
            let (_, vec) = lift(v, &labels).unwrap();
            assert!((unlift(&vec, &labels) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn integrality_check_examples() {
        let idx = check_sublabel_integral(&[1.0, 0.3, 0.0], 1e-6).unwrap();
        assert_eq!(idx.interval, 1);
        assert!((idx.alpha - 0.3).abs() < 1e-15);
        assert!(check_sublabel_integral(&[1.0, 0.5, 0.4], 1e-6).is_none());
        let idx = check_sublabel_integral(&[1.0, 0.3 + 1e-8, 1e-8], 1e-6).unwrap();
        assert_eq!(idx.interval, 1);
        assert!((idx.alpha - 0.3).abs() < 1e-7);
    }

    #[test]
    fn integrality_tie_goes_right() {
        let idx = check_sublabel_integral(&[1.0, 0.0, 0.0], 1e-9).unwrap();
        assert_eq!(idx, SublabelIndex { interval: 1, alpha: 0.0 });
        let idx = check_sublabel_integral(&[1.0, 1.0], 1e-9).unwrap();
        assert_eq!(idx, SublabelIndex { interval: 1, alpha: 1.0 });
    }

    #[test]
    fn label_set_validation() {
        assert!(LabelSet::new(vec![0.0]).is_err());
        assert!(LabelSet::new(vec![0.0, 0.0, 1.0]).is_err());
        assert!(LabelSet::new(vec![1.0, 0.0]).is_err());
        let u = LabelSet::uniform(5, 0.0, 1.0).unwrap();
        assert_eq!(u.widths(), &[0.25; 4]);
        assert_eq!(u.intervals(), 4);
    }
}
