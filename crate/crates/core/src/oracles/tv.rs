/// `max <q, g>` over the per-pixel lifted-TV dual set, by projected ascent.
///
/// `g` holds per-pixel `rows x dims` blocks; row `r` of every block is
/// bounded by `widths[r]` in the 2-norm (`isotropic`) or entry-wise.
pub fn tv_support_ascent(g: &[f64], dims: usize, widths: &[f64], isotropic: bool, steps: usize) -> f64 {
    let rows = widths.len();
    let block = rows * dims;
    assert_eq!(g.len() % block, 0);
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let eta = 0.01 / scale;
    let mut q = vec![0.0; g.len()];
    for _ in 0..steps {
        for (k, v) in q.iter_mut().enumerate() {
            *v += eta * g[k];
        }
        for px in q.chunks_exact_mut(block) {
            for (r, row) in px.chunks_exact_mut(dims).enumerate() {
                let w = widths[r];
                if isotropic {
                    let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > w {
                        for v in row.iter_mut() {
                            *v *= w / n;
                        }
                    }
                } else {
                    for v in row.iter_mut() {
                        if *v > w {
                            *v = w;
                        } else if *v < -w {
                            *v = -w;
                        }
                    }
                }
            }
        }
    }
    q.iter().zip(g).map(|(a, b)| a * b).sum()
}
