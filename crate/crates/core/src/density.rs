//! Gaussian-kernel density estimates and boxplot summaries of score
//! distributions.

use crate::error::{Error, Result};

pub const DEFAULT_GRID_SIZE: usize = 512;

/// A density estimate evaluated on a regular grid.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
}

/// Five-number summary with 1.5 IQR whiskers.
#[derive(Debug, Clone)]
pub struct BoxplotSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub lower_whisker: f64,
    pub upper_whisker: f64,
    pub outliers: Vec<f64>,
}

/// Linear-interpolation quantile (type 7) of an ascending-sorted slice.
fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Silverman's rule-of-thumb bandwidth, nrd0 variant:
/// 0.9 * min(sd, IQR/1.34) * n^(-1/5), with the usual fallbacks when the
/// IQR degenerates to zero.
pub fn silverman_bandwidth(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "bandwidth needs n >= 2, got {}",
            xs.len()
        )));
    }
    let sd = sample_sd(xs);
    if sd == 0.0 {
        return Err(Error::InvalidInput(
            "sample has zero variance; density is a point mass".into(),
        ));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_type7(&sorted, 0.75) - quantile_type7(&sorted, 0.25);
    let mut spread = sd.min(iqr / 1.34);
    if spread == 0.0 {
        spread = sd;
    }
    Ok(0.9 * spread * (xs.len() as f64).powf(-0.2))
}

/// Gaussian KDE on a `grid_size`-point grid spanning
/// [min - 3h, max + 3h].
pub fn kde(xs: &[f64], grid_size: usize) -> Result<DensityCurve> {
    if xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "kde needs n >= 2, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("kde input contains a non-finite value".into()));
    }
    if grid_size < 2 {
        return Err(Error::InvalidInput("grid size must be at least 2".into()));
    }
    let bandwidth = silverman_bandwidth(xs)?;

    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let step = (hi - lo) / (grid_size - 1) as f64;
    let grid: Vec<f64> = (0..grid_size).map(|i| lo + step * i as f64).collect();

    let norm = 1.0 / (xs.len() as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let density: Vec<f64> = grid
        .iter()
        .map(|&g| {
            let sum: f64 = xs
                .iter()
                .map(|&x| {
                    let z = (g - x) / bandwidth;
                    (-0.5 * z * z).exp()
                })
                .sum();
            norm * sum
        })
        .collect();

    Ok(DensityCurve {
        grid,
        density,
        bandwidth,
        n: xs.len(),
    })
}

impl DensityCurve {
    /// Trapezoidal integral of the density over the emitted grid.
    pub fn integral(&self) -> f64 {
        let mut total = 0.0;
        for i in 1..self.grid.len() {
            total += (self.grid[i] - self.grid[i - 1])
                * (self.density[i] + self.density[i - 1])
                * 0.5;
        }
        total
    }
}

/// Quartiles by type-7 interpolation; whiskers reach the most extreme data
/// within 1.5 IQR of the quartile hinges.
pub fn boxplot_summary(xs: &[f64]) -> Result<BoxplotSummary> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("boxplot needs at least one value".into()));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "boxplot input contains a non-finite value".into(),
        ));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);

    let q1 = quantile_type7(&sorted, 0.25);
    let median = quantile_type7(&sorted, 0.5);
    let q3 = quantile_type7(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;

    let lower_whisker = sorted
        .iter()
        .copied()
        .find(|&v| v >= lo_fence)
        .unwrap_or(sorted[0]);
    let upper_whisker = sorted
        .iter()
        .rev()
        .copied()
        .find(|&v| v <= hi_fence)
        .unwrap_or(*sorted.last().unwrap());
    let outliers: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v < lo_fence || v > hi_fence)
        .collect();

    Ok(BoxplotSummary {
        min: sorted[0],
        q1,
        median,
        q3,
        max: *sorted.last().unwrap(),
        lower_whisker,
        upper_whisker,
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn kde_rejects_degenerate_input() {
        assert!(kde(&[1.0], 128).is_err());
        assert!(kde(&[2.0, 2.0, 2.0], 128).is_err());
    }

    #[test]
    fn kde_converges_to_standard_normal_pdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5150);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let curve = kde(&xs, DEFAULT_GRID_SIZE).unwrap();
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let worst = curve
            .grid
            .iter()
            .zip(&curve.density)
            .map(|(&g, &d)| (d - norm * (-0.5 * g * g).exp()).abs())
            .fold(0.0f64, f64::max);
        assert!(worst <= 0.02, "sup distance {worst} above 0.02");
        assert!((curve.integral() - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn kde_preserves_separated_modes() {
        let mut xs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..300 {
            xs.push(rng.sample::<f64, _>(StandardNormal) - 30.0);
            xs.push(rng.sample::<f64, _>(StandardNormal) + 30.0);
        }
        let curve = kde(&xs, DEFAULT_GRID_SIZE).unwrap();
        let maxima = curve
            .density
            .windows(3)
            .filter(|w| w[1] > w[0] && w[1] > w[2] && w[1] > 1e-4)
            .count();
        assert_eq!(maxima, 2);
    }

    #[test]
    fn boxplot_frozen_examples() {
        let xs: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        let summary = boxplot_summary(&xs).unwrap();
        assert_eq!(summary.q1, 3.0);
        assert_eq!(summary.median, 5.0);
        assert_eq!(summary.q3, 7.0);
        assert!(summary.outliers.is_empty());

        let single = boxplot_summary(&[4.2]).unwrap();
        assert_eq!(single.min, 4.2);
        assert_eq!(single.q1, 4.2);
        assert_eq!(single.median, 4.2);
        assert_eq!(single.q3, 4.2);
        assert_eq!(single.max, 4.2);
        assert_eq!(single.lower_whisker, 4.2);
        assert_eq!(single.upper_whisker, 4.2);
        assert!(single.outliers.is_empty());

        let skew = boxplot_summary(&[1.0, 2.0, 3.0, 4.0, 100.0]).unwrap();
        assert_eq!(skew.outliers, vec![100.0]);
        assert_eq!(skew.upper_whisker, 4.0);
        assert_eq!(skew.max, 100.0);
    }

    proptest! {
        #[test]
        fn kde_location_equivariant(
            xs in proptest::collection::vec(-10.0f64..10.0, 5..40),
            shift in -50.0f64..50.0,
        ) {
            prop_assume!(sample_sd(&xs) > 1e-9);
            let base = kde(&xs, 64).unwrap();
            let moved: Vec<f64> = xs.iter().map(|&v| v + shift).collect();
            let shifted = kde(&moved, 64).unwrap();
            for (a, b) in base.density.iter().zip(&shifted.density) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in base.grid.iter().zip(&shifted.grid) {
                prop_assert!((a + shift - b).abs() < 1e-7);
            }
        }

        #[test]
        fn kde_integral_is_one(
            xs in proptest::collection::vec(-10.0f64..10.0, 5..60),
        ) {
            prop_assume!(sample_sd(&xs) > 1e-6);
            let curve = kde(&xs, DEFAULT_GRID_SIZE).unwrap();
            prop_assert!((curve.integral() - 1.0).abs() <= 1e-3);
            prop_assert!(curve.density.iter().all(|&d| d >= 0.0));
        }

        #[test]
        fn boxplot_invariant_under_permutation(
            mut xs in proptest::collection::vec(-100.0f64..100.0, 1..40),
        ) {
            let forward = boxplot_summary(&xs).unwrap();
            xs.reverse();
            let backward = boxplot_summary(&xs).unwrap();
            prop_assert_eq!(forward.q1, backward.q1);
            prop_assert_eq!(forward.median, backward.median);
            prop_assert_eq!(forward.q3, backward.q3);
            prop_assert_eq!(forward.lower_whisker, backward.lower_whisker);
            prop_assert_eq!(forward.upper_whisker, backward.upper_whisker);
            prop_assert_eq!(forward.outliers, backward.outliers);
        }

        #[test]
        fn boxplot_ordering_invariant(
            xs in proptest::collection::vec(-100.0f64..100.0, 1..40),
        ) {
            let s = boxplot_summary(&xs).unwrap();
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median);
            prop_assert!(s.median <= s.q3 && s.q3 <= s.max);
            prop_assert!(s.lower_whisker >= s.min && s.upper_whisker <= s.max);
        }
    }
}
