//! Wall-clock measurement of per-cycle prediction latency. Each invocation
//! of the workload is timed individually; summary statistics use the
//! nearest-rank method so the reported percentiles are actual observations.

use std::time::Instant;

use anyhow::{bail, Result};
use serde::Serialize;

/// Latency distribution of one workload, in microseconds.
#[derive(Debug, Clone, Serialize)]
pub struct TimingStats {
    pub repetitions: usize,
    pub median_us: f64,
    pub p99_us: f64,
    pub mean_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

/// Nearest-rank percentile of an ascending-sorted sample: the smallest
/// observation such that at least `p` of the sample is at or below it.
fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// Runs `work` `warmup` times untimed, then `repetitions` times timed.
pub fn measure(warmup: usize, repetitions: usize, mut work: impl FnMut()) -> Result<TimingStats> {
    if repetitions == 0 {
        bail!("time_repetitions must be >= 1");
    }
    for _ in 0..warmup {
        work();
    }
    let mut samples_us = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let begin = Instant::now();
        work();
        samples_us.push(begin.elapsed().as_secs_f64() * 1e6);
    }
    samples_us.sort_by(|a, b| a.total_cmp(b));
    let mean_us = samples_us.iter().sum::<f64>() / repetitions as f64;
    Ok(TimingStats {
        repetitions,
        median_us: nearest_rank(&samples_us, 0.5),
        p99_us: nearest_rank(&samples_us, 0.99),
        mean_us,
        min_us: samples_us[0],
        max_us: samples_us[repetitions - 1],
    })
}

pub fn render_timing(name: &str, stats: &TimingStats) -> String {
    format!(
        "{name}: median {:.1} us, p99 {:.1} us, mean {:.1} us, min {:.1} us, max {:.1} us ({} repetitions)\n",
        stats.median_us, stats.p99_us, stats.mean_us, stats.min_us, stats.max_us, stats.repetitions
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_repetitions_is_an_error() {
        assert!(measure(0, 0, || {}).is_err());
    }

    #[test]
    fn statistics_are_ordered_and_counted() {
        let mut n = 0u64;
        let stats = measure(3, 40, || {
            n += 1;
            std::hint::black_box(n);
        })
        .unwrap();
        assert_eq!(n, 43, "warmup plus timed repetitions");
        assert_eq!(stats.repetitions, 40);
        assert!(stats.min_us <= stats.median_us);
        assert!(stats.median_us <= stats.p99_us);
        assert!(stats.p99_us <= stats.max_us);
        assert!(stats.mean_us > 0.0);
    }

    #[test]
    fn nearest_rank_picks_actual_observations() {
        let sorted = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(nearest_rank(&sorted, 0.5), 2.0);
        assert_eq!(nearest_rank(&sorted, 0.99), 4.0);
        assert_eq!(nearest_rank(&sorted, 0.25), 1.0);
        assert_eq!(nearest_rank(&[7.0], 0.5), 7.0);
    }
}
