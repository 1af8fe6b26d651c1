//! Direction-finding sweeps over receiver gain with fixed users.

use serde::{Deserialize, Serialize};

use crate::array::{generate_prs, noise_power_for_snr, AfeImpairment, GeometryPreset};
use crate::calibration::SlotSync;
use crate::error::{Result, UwasError};
use crate::plan::PlanConfig;
use crate::sensing::SensingParams;

use super::config::{DoaInput, ExperimentConfig, SamplingMode};
use super::metrics::{compute_deviation, compute_doa_error};
use super::receiver::{DoaOutput, Receiver};
use super::run::FrontEnd;

/// Angle given to the synchronization band, which is never digitized here.
const SS_DOA_DEG: f64 = 90.0;

/// Users always on, at fixed angles, digitized as the selected band set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaSweep {
    pub plan: PlanConfig,
    pub geometry: GeometryPreset,
    pub mode: SamplingMode,
    pub k_branches: usize,
    pub snr_db: f64,
    /// `(band, angle)` per user; bands are 1-based.
    pub users: Vec<(usize, f64)>,
    pub gains_db: Vec<f64>,
    pub slots: usize,
    pub seed: u64,
    pub sensing: SensingParams,
    pub prs_amplitude: f64,
}

impl DoaSweep {
    /// Takes plan, receiver and SNR settings from an experiment config.
    pub fn from_experiment(cfg: &ExperimentConfig, users: Vec<(usize, f64)>, seed: u64) -> Self {
        Self {
            plan: cfg.plan.clone(),
            geometry: cfg.geometry,
            mode: cfg.mode,
            k_branches: cfg.k_branches,
            snr_db: cfg.snr_db,
            users,
            gains_db: cfg.sweep.gains_db.clone(),
            slots: cfg.slots,
            seed,
            sensing: cfg.sensing,
            prs_amplitude: cfg.prs_amplitude,
        }
    }

    /// Runs every gain over the same traffic, phases and unit noise.
    pub fn run(&self) -> Result<DoaSweepResult> {
        let plan = crate::plan::BandPlan::new(&self.plan)?;
        if self.users.is_empty() || self.gains_db.is_empty() {
            return Err(UwasError::Config(
                "a DoA sweep needs users and gains".into(),
            ));
        }
        let mut beta: Vec<usize> = self.users.iter().map(|u| u.0).collect();
        beta.sort_unstable();
        beta.dedup();
        if beta.len() != self.users.len() || beta.iter().any(|&b| b == 0 || b > plan.n_bands()) {
            return Err(UwasError::Config(
                "users need distinct bands in 1..=N".into(),
            ));
        }
        let geometry = self.geometry.build(&plan);
        let mut band_doa = vec![SS_DOA_DEG; plan.n_bands() + 1];
        let mut status = vec![false; plan.n_bands() + 1];
        for &(b, a) in &self.users {
            band_doa[b] = a;
            status[b] = true;
        }
        let receiver = Receiver {
            plan: plan.clone(),
            geometry: geometry.clone(),
            mode: self.mode,
            doa_input: DoaInput::Demixed,
            k_branches: self.k_branches,
            sensing: self.sensing,
            mixing_seed: self.seed,
            keep_spectra: false,
        };
        let prs = generate_prs(&plan);
        let noise_power = noise_power_for_snr(self.snr_db, &plan);

        let mut estimates = Vec::with_capacity(self.gains_db.len());
        let mut failures = Vec::with_capacity(self.gains_db.len());
        for &g in &self.gains_db {
            let front = FrontEnd {
                plan: plan.clone(),
                geometry: geometry.clone(),
                impairment: AfeImpairment::random(geometry.len(), noise_power, g, self.seed),
                prs: prs.clone(),
                prs_amplitude: self.prs_amplitude,
                band_doa: band_doa.clone(),
                seed: self.seed,
            };
            let mut sync = SlotSync::default();
            let mut per_slot = Vec::with_capacity(self.slots);
            let mut failed = 0;
            for t in 0..self.slots {
                status[0] = t % 2 == 0;
                let cal = front.receive(t, &status, &mut sync)?;
                let analysis = receiver.analyze(&cal, &beta)?;
                failed += analysis.failure as usize;
                let found: Vec<(usize, Option<f64>)> = match analysis.doa {
                    DoaOutput::PerBand(v) => v,
                    _ => Vec::new(),
                };
                per_slot.push(
                    self.users
                        .iter()
                        .map(|&(b, _)| found.iter().find(|x| x.0 == b).and_then(|x| x.1))
                        .collect(),
                );
            }
            estimates.push(per_slot);
            failures.push(failed);
        }
        Ok(DoaSweepResult {
            gains_db: self.gains_db.clone(),
            truth: self.users.iter().map(|u| u.1).collect(),
            estimates,
            failures,
        })
    }
}

/// Estimates indexed `[gain][slot][user]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaSweepResult {
    pub gains_db: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimates: Vec<Vec<Vec<Option<f64>>>>,
    pub failures: Vec<usize>,
}

impl DoaSweepResult {
    /// Index of the highest gain, whose estimates are the reference.
    pub fn reference_index(&self) -> usize {
        (0..self.gains_db.len())
            .max_by(|&a, &b| self.gains_db[a].total_cmp(&self.gains_db[b]))
            .unwrap_or(0)
    }

    pub fn gain_index(&self, gain_db: f64) -> Option<usize> {
        self.gains_db.iter().position(|&g| g == gain_db)
    }

    /// Mean error against the highest-gain estimates.
    pub fn doa_error(&self, gi: usize) -> Option<f64> {
        compute_doa_error(&self.estimates[gi], &self.estimates[self.reference_index()])
    }

    /// Mean error against the true angles.
    pub fn truth_error(&self, gi: usize) -> Option<f64> {
        let truth =
            vec![self.truth.iter().map(|&a| Some(a)).collect::<Vec<_>>(); self.estimates[gi].len()];
        compute_doa_error(&self.estimates[gi], &truth)
    }

    /// Largest per-user spread of the estimates.
    pub fn deviation(&self, gi: usize) -> f64 {
        (0..self.truth.len())
            .map(|u| {
                let xs: Vec<f64> = self.estimates[gi].iter().filter_map(|s| s[u]).collect();
                compute_deviation(&xs)
            })
            .fold(0.0, f64::max)
    }

    /// Slots at gain `gi` where some user has no estimate.
    pub fn misses(&self, gi: usize) -> usize {
        self.estimates[gi]
            .iter()
            .filter(|s| s.iter().any(Option::is_none))
            .count()
    }
}
