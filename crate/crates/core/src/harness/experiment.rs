//! Runs configured experiments over seeds and gains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ldm::Policy;

use super::config::ExperimentConfig;
use super::metrics::{summarize, RunSummary, Stats};
use super::run::{Simulation, SlotReport, SpectrumDump};

/// Output of one `(seed, gain)` point: one report stream per policy.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub seed: u64,
    pub gain_db: f64,
    pub streams: Vec<Vec<SlotReport>>,
    pub summaries: Vec<RunSummary>,
    pub spectra: Vec<SpectrumDump>,
}

/// Runs one seed at one gain.
pub fn run_point(cfg: &ExperimentConfig, seed: u64, gain_db: f64) -> Result<PointResult> {
    let sim = Simulation::new(cfg, seed, gain_db)?;
    let mut streams = vec![Vec::with_capacity(cfg.slots); cfg.policies.len()];
    let mut spectra = Vec::new();
    for out in sim {
        let out = out?;
        for (s, r) in streams.iter_mut().zip(out.reports) {
            s.push(r);
        }
        spectra.extend(out.spectra);
    }
    let summaries = summarize(&streams, cfg.doa_tolerance_deg);
    Ok(PointResult {
        seed,
        gain_db,
        streams,
        summaries,
        spectra,
    })
}

/// Runs every `(seed, gain)` point in parallel; results are ordered by gain,
/// then seed, as listed in the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PointResult>> {
    cfg.validate()?;
    let points: Vec<(f64, u64)> = cfg
        .gains_db
        .iter()
        .flat_map(|&g| cfg.seeds.iter().map(move |&s| (g, s)))
        .collect();
    points
        .par_iter()
        .map(|&(g, s)| run_point(cfg, s, g))
        .collect()
}

/// Across-seed statistics of one policy at one gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyAggregate {
    pub policy: Policy,
    pub gain_db: f64,
    pub throughput: Stats,
    pub failures: Stats,
    pub tail_regret_rate: Option<Stats>,
}

/// Groups run summaries by `(policy, gain)` in first-seen order.
pub fn aggregate(summaries: &[RunSummary]) -> Vec<PolicyAggregate> {
    let mut keys: Vec<(Policy, f64)> = Vec::new();
    for s in summaries {
        if !keys.contains(&(s.policy, s.gain_db)) {
            keys.push((s.policy, s.gain_db));
        }
    }
    keys.into_iter()
        .map(|(policy, gain_db)| {
            let group: Vec<&RunSummary> = summaries
                .iter()
                .filter(|s| s.policy == policy && s.gain_db == gain_db)
                .collect();
            let col = |f: &dyn Fn(&RunSummary) -> f64| {
                Stats::of(&group.iter().map(|s| f(s)).collect::<Vec<_>>())
            };
            let tails: Vec<f64> = group.iter().filter_map(|s| s.tail_regret_rate).collect();
            PolicyAggregate {
                policy,
                gain_db,
                throughput: col(&|s| s.throughput as f64),
                failures: col(&|s| s.failures as f64),
                tail_regret_rate: (!tails.is_empty()).then(|| Stats::of(&tails)),
            }
        })
        .collect()
}
