//! Correlation estimators.

/// Pearson correlation; NaN when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

/// Standard error of an estimator by batch means: split the paired data
/// into `batches` contiguous blocks, evaluate `stat` on each, and return
/// `(stat on all data, sd of block values / sqrt(batches))`.
pub fn batch_means_se<F: Fn(&[f64], &[f64]) -> f64>(x: &[f64], y: &[f64], batches: usize, stat: F) -> (f64, f64) {
    let n = x.len().min(y.len());
    let batches = batches.clamp(2, n.max(2));
    let size = n / batches;
    let vals: Vec<f64> =
        (0..batches).map(|b| stat(&x[b * size..(b + 1) * size], &y[b * size..(b + 1) * size])).collect();
    let mean = vals.iter().sum::<f64>() / batches as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (stat(&x[..n], &y[..n]), (var / batches as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_anti() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x) - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| -2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y) + 1.0).abs() < 1e-15);
        assert!(pearson(&x, &[1.0; 4]).is_nan());
    }

    #[test]
    fn batch_se_shrinks_with_data() {
        use crate::seeds::walk_rng;
        use rand::Rng;
        let mut rng = walk_rng(1);
        let x: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.random::<f64>()).collect();
        let (r, se) = batch_means_se(&x, &y, 20, pearson);
        // Corr(U, U + V) = 1/sqrt(2).
        assert!((r - 0.5f64.sqrt()).abs() < 4.0 * se + 1e-3, "{r} +- {se}");
        assert!(se < 0.01);
    }
}
