//! Pooled time-and-ensemble estimators with batch-means standard errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::observables::{ObservableRecord, N_OBSERVABLES, OBSERVABLE_NAMES};

/// Minimum number of batches behind any reported standard error.
pub const MIN_BATCHES: usize = 8;
/// Minimum post-burn-in samples per trajectory.
pub const MIN_SAMPLES_PER_TRAJECTORY: usize = 64;

/// Streaming sums for one observable. Merging adds the sums, so it is
/// commutative and associative up to floating-point reassociation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    count: u64,
    sum: f64,
    batches: u64,
    batch_sum: f64,
    batch_sum_sq: f64,
}

impl Accumulator {
    /// Adds one contiguous batch of samples.
    pub fn push_batch(&mut self, samples: &[f64]) {
        if samples.is_empty() {
            return;
        }
        let s: f64 = samples.iter().sum();
        let m = s / samples.len() as f64;
        self.count += samples.len() as u64;
        self.sum += s;
        self.batches += 1;
        self.batch_sum += m;
        self.batch_sum_sq += m * m;
    }

    pub fn merge(&mut self, other: &Accumulator) {
        self.count += other.count;
        self.sum += other.sum;
        self.batches += other.batches;
        self.batch_sum += other.batch_sum;
        self.batch_sum_sq += other.batch_sum_sq;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn batches(&self) -> u64 {
        self.batches
    }

    /// Pooled sample mean.
    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    /// Standard deviation of the batch means divided by `√batches`; NaN
    /// with fewer than two batches.
    pub fn stderr(&self) -> f64 {
        if self.batches < 2 {
            return f64::NAN;
        }
        let b = self.batches as f64;
        let mean = self.batch_sum / b;
        let var = ((self.batch_sum_sq - b * mean * mean) / (b - 1.0)).max(0.0);
        (var / b).sqrt()
    }
}

/// One accumulator per entry of [`OBSERVABLE_NAMES`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    acc: Vec<Accumulator>,
}

impl Default for EnsembleStats {
    fn default() -> Self {
        Self { acc: vec![Accumulator::default(); N_OBSERVABLES] }
    }
}

impl EnsembleStats {
    pub fn get(&self, name: &str) -> Option<&Accumulator> {
        OBSERVABLE_NAMES.iter().position(|n| *n == name).map(|i| &self.acc[i])
    }

    pub fn by_index(&self, i: usize) -> &Accumulator {
        &self.acc[i]
    }

    /// Accumulator for `name`; panics on unknown names, which are a
    /// programming error.
    pub fn obs(&self, name: &str) -> &Accumulator {
        self.get(name).unwrap_or_else(|| panic!("unknown observable {name}"))
    }

    pub fn push_batch(&mut self, records: &[ObservableRecord]) {
        let columns: Vec<[f64; N_OBSERVABLES]> = records.iter().map(|r| r.values()).collect();
        for (k, acc) in self.acc.iter_mut().enumerate() {
            let col: Vec<f64> = columns.iter().map(|c| c[k]).collect();
            acc.push_batch(&col);
        }
    }

    pub fn merge(&mut self, other: &EnsembleStats) {
        for (a, b) in self.acc.iter_mut().zip(&other.acc) {
            a.merge(b);
        }
    }

    pub fn count(&self) -> u64 {
        self.acc[0].count()
    }

    pub fn batches(&self) -> u64 {
        self.acc[0].batches()
    }
}

/// Splits `samples` into `batches` contiguous, nearly equal blocks.
pub fn contiguous_batches<T>(samples: &[T], batches: usize) -> Vec<&[T]> {
    let n = samples.len();
    (0..batches).map(|b| &samples[b * n / batches..(b + 1) * n / batches]).filter(|s| !s.is_empty()).collect()
}

/// Default batches per trajectory: one per trajectory when there are at
/// least [`MIN_BATCHES`] of them, otherwise enough to reach that minimum.
pub fn auto_batches_per_trajectory(trajectories: usize) -> usize {
    MIN_BATCHES.div_ceil(trajectories.max(1)).max(1)
}

/// Pools post-burn-in samples (every `stride`-th record) from all
/// trajectories.
pub fn stationary_estimate(
    trajectories: &[Vec<ObservableRecord>],
    burn_in: f64,
    stride: usize,
    batches_per_trajectory: Option<usize>,
) -> Result<EnsembleStats> {
    if trajectories.is_empty() {
        return Err(Error::Estimation("no trajectories supplied".into()));
    }
    let stride = stride.max(1);
    let per = batches_per_trajectory.unwrap_or_else(|| auto_batches_per_trajectory(trajectories.len()));
    if per * trajectories.len() < MIN_BATCHES {
        return Err(Error::Estimation(format!(
            "{} trajectories x {per} batches is below the minimum of {MIN_BATCHES} batches",
            trajectories.len()
        )));
    }
    let mut stats = EnsembleStats::default();
    for (index, records) in trajectories.iter().enumerate() {
        let kept: Vec<ObservableRecord> = records.iter().filter(|r| r.t >= burn_in).step_by(stride).copied().collect();
        if kept.len() < MIN_SAMPLES_PER_TRAJECTORY.max(per) {
            return Err(Error::Estimation(format!(
                "trajectory {index} has {} samples after burn-in {burn_in} (stride {stride}); need at least {}",
                kept.len(),
                MIN_SAMPLES_PER_TRAJECTORY.max(per)
            )));
        }
        for batch in contiguous_batches(&kept, per) {
            stats.push_batch(batch);
        }
    }
    Ok(stats)
}

/// Cross-sectional statistics at each sampling time; every trajectory is
/// one independent batch. Trajectories must share sampling times.
pub fn time_series_stats(trajectories: &[Vec<ObservableRecord>]) -> Result<Vec<(f64, EnsembleStats)>> {
    let len = trajectories.first().map(Vec::len).unwrap_or(0);
    if trajectories.iter().any(|t| t.len() != len) {
        return Err(Error::Estimation("trajectories have different sampling grids".into()));
    }
    Ok((0..len)
        .map(|k| {
            let mut s = EnsembleStats::default();
            for traj in trajectories {
                s.push_batch(std::slice::from_ref(&traj[k]));
            }
            (trajectories[0][k].t, s)
        })
        .collect())
}

/// Burn-in from the empirical mixing proxy: the first sampling time after
/// which the ensemble mean of `grad_l2_sq` stays within one cross-sectional
/// standard error of its late-time level, times five. Falls back to the
/// largest burn-in that still leaves [`MIN_SAMPLES_PER_TRAJECTORY`] samples.
pub fn estimate_burn_in(trajectories: &[Vec<ObservableRecord>]) -> Result<f64> {
    let series = time_series_stats(trajectories)?;
    if series.len() < 2 * MIN_SAMPLES_PER_TRAJECTORY {
        return Err(Error::Estimation(format!(
            "need at least {} samples per trajectory to estimate burn-in, have {}",
            2 * MIN_SAMPLES_PER_TRAJECTORY,
            series.len()
        )));
    }
    let means: Vec<f64> = series.iter().map(|(_, s)| s.obs("grad_l2_sq").mean()).collect();
    let errs: Vec<f64> = series.iter().map(|(_, s)| s.obs("grad_l2_sq").stderr()).collect();
    let tail = &means[means.len() / 2..];
    let level = tail.iter().sum::<f64>() / tail.len() as f64;
    let mut first_stable = means.len() - 1;
    for k in (0..means.len()).rev() {
        let band = if errs[k].is_finite() { errs[k] } else { 0.0 };
        if (means[k] - level).abs() > band {
            break;
        }
        first_stable = k;
    }
    let proxy = series[first_stable].0 - series[0].0;
    let latest = series[series.len() - MIN_SAMPLES_PER_TRAJECTORY].0;
    Ok((5.0 * proxy + series[0].0).min(latest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_substream;
    use crate::vec3;
    use proptest::prelude::*;

    fn record(t: f64, x: f64) -> ObservableRecord {
        ObservableRecord {
            t,
            grad_l2_sq: x,
            grad_l4_4: x,
            lap_l2_sq: x,
            cross_lap_l2_sq: x,
            avg: vec3::ZERO,
            avg_hu_sq: 0.0,
            avg_h2u_dot_avg: 0.0,
            avg_ugrad2_dot_avg: 0.0,
            fund_residual: 0.0,
        }
    }

    #[test]
    fn identical_records_have_zero_stderr() {
        let trajs: Vec<Vec<_>> = (0..8).map(|_| (0..100).map(|k| record(k as f64, 2.5)).collect()).collect();
        let s = stationary_estimate(&trajs, 0.0, 1, None).unwrap();
        let a = s.obs("cross_lap_l2_sq");
        assert_eq!(a.mean(), 2.5);
        assert_eq!(a.stderr(), 0.0);
        assert_eq!(a.count(), 800);
        assert_eq!(a.batches(), 8);
    }

    #[test]
    fn iid_normal_stream_mean_and_stderr() {
        let (mu, sigma) = (1.5, 0.7);
        let mut rng = derive_substream(2024, 0);
        let n = 20_000;
        let samples: Vec<f64> = (0..n).map(|_| mu + sigma * rng.brownian_increment(1.0)[0]).collect();
        let mut acc = Accumulator::default();
        for b in contiguous_batches(&samples, 100) {
            acc.push_batch(b);
        }
        let se = sigma / (n as f64).sqrt();
        assert!((acc.mean() - mu).abs() < 3.0 * se);
        assert!((acc.stderr() - se).abs() < 0.3 * se, "stderr {} vs {se}", acc.stderr());
    }

    #[test]
    fn split_and_merge_reproduces_pooled_estimate() {
        // dyadic values keep every partial sum exact
        let trajs: Vec<Vec<_>> =
            (0..16).map(|i| (0..64).map(|k| record(k as f64, ((i * 7 + k) % 13) as f64 * 0.25)).collect()).collect();
        let all = stationary_estimate(&trajs, 0.0, 1, Some(1)).unwrap();
        let mut a = stationary_estimate(&trajs[..8], 0.0, 1, Some(1)).unwrap();
        let b = stationary_estimate(&trajs[8..], 0.0, 1, Some(1)).unwrap();
        a.merge(&b);
        let (x, y) = (a.obs("grad_l2_sq"), all.obs("grad_l2_sq"));
        assert_eq!(x.count(), y.count());
        assert_eq!(x.mean(), y.mean());
        assert!((x.stderr() - y.stderr()).abs() < 1e-14);
    }

    #[test]
    fn insufficient_samples_are_reported() {
        let trajs: Vec<Vec<_>> = (0..8).map(|_| (0..100).map(|k| record(k as f64, 1.0)).collect()).collect();
        let err = stationary_estimate(&trajs, 50.0, 1, None).unwrap_err();
        assert!(matches!(err, Error::Estimation(msg) if msg.contains("need at least 64")));
        assert!(stationary_estimate(&trajs[..2], 0.0, 1, Some(1)).is_err());
        assert!(stationary_estimate(&[], 0.0, 1, None).is_err());
    }

    #[test]
    fn single_trajectory_uses_eight_batches() {
        let trajs = vec![(0..200).map(|k| record(k as f64, k as f64)).collect::<Vec<_>>()];
        let s = stationary_estimate(&trajs, 0.0, 1, None).unwrap();
        assert_eq!(s.batches(), 8);
        assert!(s.obs("grad_l2_sq").stderr() > 0.0);
    }

    #[test]
    fn burn_in_detects_transient() {
        // relaxing mean 1 - exp(-t) with small noise; sampled every 0.1
        let mut rng = derive_substream(8, 1);
        let trajs: Vec<Vec<_>> = (0..32)
            .map(|_| {
                (0..400)
                    .map(|k| {
                        let t = 0.1 * k as f64;
                        record(t, 1.0 - (-t).exp() + 0.05 * rng.brownian_increment(1.0)[0])
                    })
                    .collect()
            })
            .collect();
        let b = estimate_burn_in(&trajs).unwrap();
        assert!(b > 5.0 && b <= 0.1 * (400 - 64) as f64, "burn-in {b}");
    }

    proptest! {
        #[test]
        fn merge_is_commutative(xs in proptest::collection::vec(-10.0f64..10.0, 1..40),
                                ys in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
            a.push_batch(&xs);
            b.push_batch(&ys);
            let mut ab = a;
            ab.merge(&b);
            let mut ba = b;
            ba.merge(&a);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab.count(), (xs.len() + ys.len()) as u64);
        }
    }
}
