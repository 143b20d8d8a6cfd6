/// Discrete double Legendre transform of `values` sampled at equispaced
/// points of `[lo, hi]`: the convex envelope at the same points.
///
/// The conjugate `f*(s) = max_i (s x_i - f_i)` is kept exactly as the upper
/// envelope of its lines; its breakpoints are the only slopes the second
/// transform needs.
pub fn brute_biconjugate_1d(values: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 2, "need at least two samples");
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let cross = |a: usize, b: usize| (values[b] - values[a]) / (xs[b] - xs[a]);
    // Lines s -> x_i s - f_i arrive with increasing slope x_i.
    let mut env: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        while env.len() >= 2 {
            let (a, b) = (env[env.len() - 2], env[env.len() - 1]);
            if cross(a, i) <= cross(a, b) {
                env.pop();
            } else {
                break;
            }
        }
        env.push(i);
    }
    let breaks: Vec<(f64, f64)> = env
        .windows(2)
        .map(|p| {
            let s = cross(p[0], p[1]);
            (s, xs[p[0]] * s - values[p[0]])
        })
        .collect();
    xs.iter()
        .map(|&x| {
            breaks
                .iter()
                .map(|(s, conj)| s * x - conj)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}
