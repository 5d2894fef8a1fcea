//! Truncated series values, batch-means error bars and per-index RNG streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generator for item `index` of an ensemble seeded by `seed`.
/// Results do not depend on which thread evaluates which item.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// A truncated series or product together with a bound on the omitted tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

pub const BATCHES: usize = 10;

/// Mean and batch-means standard error of `values`, summed in index order.
///
/// With fewer values than batches every value is its own batch.
pub fn batch_means(values: &[f64], batches: usize) -> MeanEstimate {
    let n = values.len();
    if n == 0 {
        return MeanEstimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            samples: 0,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return MeanEstimate {
            mean,
            std_error: f64::INFINITY,
            samples: n,
        };
    }
    let len = n / b;
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let chunk = &values[i * len..(i + 1) * len];
            chunk.iter().sum::<f64>() / len as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / (b - 1) as f64;
    MeanEstimate {
        mean,
        std_error: (var / b as f64).sqrt(),
        samples: n,
    }
}

/// Sample standard deviation (divisor `n - 1`).
pub fn std_dev(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_error() {
        let e = batch_means(&[2.0; 100], BATCHES);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(std_dev(&[2.0; 5]), 0.0);
    }

    #[test]
    fn batch_error_of_alternating_blocks() {
        // batch means 0,1,0,1,... -> sd of means 0.527, se 0.1667
        let mut v = Vec::new();
        for i in 0..10 {
            v.extend(std::iter::repeat_n((i % 2) as f64, 10));
        }
        let e = batch_means(&v, 10);
        assert!((e.mean - 0.5).abs() < 1e-15);
        let sd = (10.0 * 0.25 / 9.0f64).sqrt();
        assert!((e.std_error - sd / 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn std_dev_matches_closed_form() {
        assert!((std_dev(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
