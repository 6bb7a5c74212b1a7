//! Deterministic resampling machinery shared by bootstrap and permutation code.
//!
//! Every replicate draws from its own ChaCha stream derived from
//! `(seed, replicate index)`, so parallel and sequential execution agree
//! bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicates: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicates: DEFAULT_REPLICATES,
            confidence: DEFAULT_CONFIDENCE,
            seed: 0,
        }
    }
}

impl BootstrapOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be positive".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Percentile interval plus bookkeeping about dropped replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
    pub replicates: usize,
    pub dropped: usize,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }

    pub fn excludes_zero(&self) -> bool {
        self.low > 0.0 || self.high < 0.0
    }
}

pub(crate) fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Indices `0..n` drawn `n` times with replacement.
pub(crate) fn draw_indices(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Runs `replicate` for every index in parallel, drops degenerate
/// replicates, and returns the percentile interval of the rest.
pub(crate) fn percentile_interval<F>(opts: &BootstrapOptions, replicate: F) -> Result<Interval>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    opts.validate()?;
    let outcomes: Vec<Result<f64>> = (0..opts.replicates as u64)
        .into_par_iter()
        .map(|i| replicate(&mut substream(opts.seed, i)))
        .collect();
    let mut values = Vec::with_capacity(outcomes.len());
    let mut dropped = 0;
    for outcome in outcomes {
        match outcome {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => dropped += 1,
            Err(e) if e.is_degenerate() => dropped += 1,
            Err(e) => return Err(e),
        }
    }
    if dropped * 2 > opts.replicates || values.is_empty() {
        return Err(Error::TooManyDegenerate {
            dropped,
            total: opts.replicates,
        });
    }
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - opts.confidence) / 2.0;
    Ok(Interval {
        low: quantile_sorted(&values, tail),
        high: quantile_sorted(&values, 1.0 - tail),
        replicates: opts.replicates,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert_eq!(quantile_sorted(&v, 1.0), 5.0);
        assert!((quantile_sorted(&v, 0.125) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: u64 = substream(7, 3).random();
        let b: u64 = substream(7, 3).random();
        let c: u64 = substream(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_majority_is_an_error() {
        let opts = BootstrapOptions {
            replicates: 10,
            ..BootstrapOptions::default()
        };
        let r = percentile_interval(&opts, |rng| {
            if rng.random::<f64>() < 2.0 {
                Err(Error::Degenerate("x".into()))
            } else {
                Ok(0.0)
            }
        });
        assert!(matches!(
            r,
            Err(Error::TooManyDegenerate {
                dropped: 10,
                total: 10
            })
        ));
    }
}
