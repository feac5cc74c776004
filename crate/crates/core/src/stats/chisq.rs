//! Chi-square goodness of fit for Poisson counts.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use super::TestReport;
use crate::error::{Error, Result};

/// Chi-square test of `counts` against Poisson with the sample-mean rate.
/// Cells are pooled from both ends until every expected count is at least 5;
/// one degree of freedom is spent on the fitted rate.
pub fn poisson_count_test(counts: &[u64]) -> Result<TestReport> {
    if counts.is_empty() {
        return Err(Error::InsufficientData("no counts".into()));
    }
    let n = counts.len() as f64;
    let lambda = counts.iter().sum::<u64>() as f64 / n;
    if lambda <= 0.0 {
        return Err(Error::InsufficientData("all counts are zero".into()));
    }
    let pois = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let top = *counts.iter().max().expect("nonempty") as usize;
    let mut observed = vec![0.0; top + 1];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    let mut expected: Vec<f64> = (0..=top).map(|k| n * pois.pmf(k as u64)).collect();
    // The last cell carries the whole upper tail.
    let head: f64 = expected[..top].iter().sum();
    expected[top] = n - head;

    let mut cells: Vec<(f64, f64)> = observed.into_iter().zip(expected).collect();
    // Pool from the right, then from the left.
    while cells.len() > 1 && cells.last().expect("nonempty").1 < 5.0 {
        let (o, e) = cells.pop().expect("nonempty");
        let last = cells.last_mut().expect("nonempty");
        last.0 += o;
        last.1 += e;
    }
    while cells.len() > 1 && cells[0].1 < 5.0 {
        let (o, e) = cells.remove(0);
        cells[0].0 += o;
        cells[0].1 += e;
    }
    let df = cells.len() as f64 - 2.0;
    if df < 1.0 {
        return Err(Error::InsufficientData(format!("only {} cells after pooling", cells.len())));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let chi = ChiSquared::new(df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(TestReport::new(stat, counts.len(), Some(chi.sf(stat))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds::walk_rng;
    use rand::Rng;
    use rand_distr::{Distribution, Geometric, Poisson as PoissonDist};

    #[test]
    fn poisson_two_passes() {
        let mut rng = walk_rng(77);
        let d = PoissonDist::new(2.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| d.sample(&mut rng) as u64).collect();
        let r = poisson_count_test(&counts).unwrap().p_above(0.01);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn geometric_is_overdispersed() {
        let mut rng = walk_rng(78);
        let d = Geometric::new(1.0 / 3.0).unwrap();
        let counts: Vec<u64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
        assert!(!poisson_count_test(&counts).unwrap().p_above(0.01).passed);
        let _ = rng.random::<u8>();
    }

    #[test]
    fn degenerate_inputs() {
        assert!(poisson_count_test(&[]).is_err());
        assert!(poisson_count_test(&[0, 0, 0]).is_err());
    }
}
