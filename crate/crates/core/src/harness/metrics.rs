//! Throughput, regret and DoA error metrics.

use serde::{Deserialize, Serialize};

use super::run::SlotReport;

/// Total transmission opportunities over a report stream.
pub fn compute_throughput(reports: &[SlotReport], doa_tolerance_deg: f64) -> i64 {
    reports
        .iter()
        .map(|r| r.throughput(doa_tolerance_deg))
        .sum()
}

/// Per-slot throughput of one policy's report stream.
pub fn throughput_series(reports: &[SlotReport], doa_tolerance_deg: f64) -> Vec<i64> {
    reports
        .iter()
        .map(|r| r.throughput(doa_tolerance_deg))
        .collect()
}

/// Cumulative regret against the IMP stream, slot by slot.
pub fn compute_regret(imp: &[i64], policy: &[i64]) -> Vec<i64> {
    let mut acc = 0;
    imp.iter()
        .zip(policy)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect()
}

/// Mean per-slot regret over the last `fraction` of a cumulative curve.
pub fn tail_regret_rate(cumulative: &[i64], fraction: f64) -> f64 {
    let n = cumulative.len();
    let tail = ((n as f64 * fraction).round() as usize).clamp(1, n.max(1));
    if n == 0 {
        return 0.0;
    }
    let start = n - tail;
    let before = if start == 0 { 0 } else { cumulative[start - 1] };
    (cumulative[n - 1] - before) as f64 / tail as f64
}

/// Mean absolute difference between estimates at some gain and the
/// reference estimates at the highest gain, over slot/user pairs where
/// both exist. Returns `None` when nothing can be matched.
pub fn compute_doa_error(
    at_gain: &[Vec<Option<f64>>],
    reference: &[Vec<Option<f64>>],
) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (g, r) in at_gain.iter().zip(reference) {
        for (a, b) in g.iter().zip(r) {
            if let (Some(a), Some(b)) = (a, b) {
                sum += (a - b).abs();
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Spread `max - min` of repeated estimates; 0 for fewer than two samples.
pub fn compute_deviation(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    hi - lo
}

/// Sample mean, standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Stats {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub se: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self::default();
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            n,
            mean,
            std,
            se: std / (n as f64).sqrt(),
        }
    }

    /// `[mean - k std, mean + k std]`.
    pub fn band(&self, k: f64) -> (f64, f64) {
        (self.mean - k * self.std, self.mean + k * self.std)
    }
}

/// Aggregate of one policy's run at one seed and gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub gain_db: f64,
    pub policy: crate::ldm::Policy,
    pub slots: usize,
    pub throughput: i64,
    pub declared_vacant: usize,
    pub false_vacant: usize,
    pub doa_hits: usize,
    pub failures: usize,
    /// Cumulative regret against IMP at the last slot, when IMP ran.
    pub regret: Option<i64>,
    /// Mean per-slot regret over the last fifth of the run.
    pub tail_regret_rate: Option<f64>,
}

/// Summarizes each policy's stream; `streams` share seed and gain.
pub fn summarize(streams: &[Vec<SlotReport>], doa_tolerance_deg: f64) -> Vec<RunSummary> {
    let imp = streams
        .iter()
        .find(|s| s.first().map(|r| r.policy) == Some(crate::ldm::Policy::Imp))
        .map(|s| throughput_series(s, doa_tolerance_deg));
    streams
        .iter()
        .filter_map(|s| {
            let first = s.first()?;
            let series = throughput_series(s, doa_tolerance_deg);
            let mut sum = RunSummary {
                seed: first.seed,
                gain_db: first.gain_db,
                policy: first.policy,
                slots: s.len(),
                throughput: series.iter().sum(),
                declared_vacant: 0,
                false_vacant: 0,
                doa_hits: 0,
                failures: s.iter().filter(|r| r.zeta).count(),
                regret: None,
                tail_regret_rate: None,
            };
            for r in s {
                let t = r.terms(doa_tolerance_deg);
                sum.declared_vacant += t.declared_vacant;
                sum.false_vacant += t.false_vacant;
                sum.doa_hits += t.doa_hits;
            }
            if let Some(imp) = &imp {
                let regret = compute_regret(imp, &series);
                sum.regret = regret.last().copied();
                sum.tail_regret_rate = Some(tail_regret_rate(&regret, 0.2));
            }
            Some(sum)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_of_identical_streams_is_zero() {
        let s = vec![3, 1, 4, 1, 5];
        assert!(compute_regret(&s, &s).iter().all(|&r| r == 0));
        assert_eq!(compute_regret(&[2, 2, 2], &[1, 2, 0]), vec![1, 1, 3]);
    }

    #[test]
    fn tail_rate() {
        let cum: Vec<i64> = (1..=10).map(|t| if t <= 8 { t } else { 8 }).collect();
        assert_eq!(tail_regret_rate(&cum, 0.2), 0.0);
        assert_eq!(tail_regret_rate(&cum, 0.5), 3.0 / 5.0);
        assert_eq!(tail_regret_rate(&[], 0.2), 0.0);
    }

    #[test]
    fn doa_error_and_deviation() {
        let a = vec![vec![Some(10.0), None], vec![Some(12.0), Some(50.0)]];
        assert_eq!(compute_doa_error(&a, &a), Some(0.0));
        let r = vec![vec![Some(11.0), Some(40.0)], vec![Some(12.0), Some(49.0)]];
        assert_eq!(compute_doa_error(&a, &r), Some(2.0 / 3.0));
        assert_eq!(compute_deviation(&[5.0; 4]), 0.0);
        assert_eq!(compute_deviation(&[1.0, 4.0, 2.5]), 3.0);
    }

    #[test]
    fn stats() {
        let s = Stats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.se - s.std / 2.0).abs() < 1e-12);
    }
}
