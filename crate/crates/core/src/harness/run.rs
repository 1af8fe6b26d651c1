//! Closed-loop slot simulation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::array::{
    generate_prs, noise_power_for_snr, propagate, AfeImpairment, ArrayGeometry, DirectionalSource,
    NoiseKey,
};
use crate::calibration::{calibrate, CalibratedSlot, SlotSync};
use crate::dsp::SlotSignal;
use crate::error::Result;
use crate::ldm::{DecisionMaker, Policy};
use crate::plan::BandPlan;
use crate::rng::{self, Domain};
use crate::sensing::BandStatus;
use crate::traffic::{direction_of, generate_scfdma, OccupancyProcess};

use super::config::ExperimentConfig;
use super::matching::match_angles;
use super::receiver::{DoaOutput, Receiver, SlotAnalysis};

/// Direction estimate for one detected-busy band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoaRecord {
    pub band: usize,
    pub estimate: Option<f64>,
    /// True angle when the band is actually busy.
    pub truth: Option<f64>,
}

impl DoaRecord {
    pub fn is_hit(&self, tolerance_deg: f64) -> bool {
        matches!((self.estimate, self.truth), (Some(e), Some(t)) if (e - t).abs() <= tolerance_deg)
    }
}

/// One slot of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotReport {
    pub t_s: usize,
    pub seed: u64,
    pub gain_db: f64,
    pub policy: Policy,
    /// Selected bands, 1-based.
    pub beta: Vec<usize>,
    /// Receiver's status per band `1..=N`.
    pub s_hat: Vec<BandStatus>,
    /// Ground truth per band `1..=N` (true = busy).
    pub truth: Vec<bool>,
    pub zeta: bool,
    pub source_count: usize,
    pub slot_pulse: bool,
    pub exploring: bool,
    pub expected_reward: f64,
    pub doa: Vec<DoaRecord>,
}

/// Opportunity terms of one slot at a DoA tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotTerms {
    /// Bands declared vacant.
    pub declared_vacant: usize,
    /// Declared vacant but truly busy.
    pub false_vacant: usize,
    /// Busy bands with a direction estimate within tolerance.
    pub doa_hits: usize,
}

impl SlotTerms {
    pub fn throughput(&self) -> i64 {
        self.declared_vacant as i64 - self.false_vacant as i64 + self.doa_hits as i64
    }
}

impl SlotReport {
    /// A failed slot yields no opportunities.
    pub fn terms(&self, tolerance_deg: f64) -> SlotTerms {
        if self.zeta {
            return SlotTerms::default();
        }
        let mut t = SlotTerms::default();
        for &b in &self.beta {
            if self.s_hat[b - 1] == BandStatus::Vacant {
                t.declared_vacant += 1;
                if self.truth[b - 1] {
                    t.false_vacant += 1;
                }
            }
        }
        t.doa_hits = self.doa.iter().filter(|d| d.is_hit(tolerance_deg)).count();
        t
    }

    pub fn throughput(&self, tolerance_deg: f64) -> i64 {
        self.terms(tolerance_deg).throughput()
    }
}

/// Draws `count` angles on the half-degree grid within `range`, pairwise at
/// least `min_sep` apart.
pub fn draw_directions(seed: u64, count: usize, range: [f64; 2], min_sep: f64) -> Vec<f64> {
    let mut rng = rng::stream(seed, Domain::Directions, 0);
    let steps = ((range[1] - range[0]) / 0.5).floor() as u64;
    loop {
        let mut a: Vec<f64> = (0..count)
            .map(|_| range[0] + 0.5 * rng.gen_range(0..=steps) as f64)
            .collect();
        a.sort_by(f64::total_cmp);
        if a.windows(2).all(|w| w[1] - w[0] >= min_sep) {
            let mut shuffled = a.clone();
            for i in (1..shuffled.len()).rev() {
                let j = rng.gen_range(0..=i);
                shuffled.swap(i, j);
            }
            return shuffled;
        }
    }
}

/// Everything the transmitter and front end need for one slot.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub plan: BandPlan,
    pub geometry: ArrayGeometry,
    pub impairment: AfeImpairment,
    pub prs: SlotSignal,
    pub prs_amplitude: f64,
    /// Angle per band `0..=N` (0 = SS).
    pub band_doa: Vec<f64>,
    pub seed: u64,
}

impl FrontEnd {
    /// Synthesizes, propagates and calibrates one slot with the given active
    /// bands (`status[0]` is SS).
    pub fn receive(
        &self,
        t: usize,
        status: &[bool],
        sync: &mut SlotSync,
    ) -> Result<CalibratedSlot> {
        let data_seed = rng::stream(self.seed, Domain::BandData, t as u64).gen::<u64>();
        let mut waveforms = Vec::new();
        let mut sources = Vec::new();
        for (i, &busy) in status.iter().enumerate() {
            if !busy {
                continue;
            }
            waveforms.push(generate_scfdma(i, &self.plan, data_seed)?);
            sources.push(DirectionalSource {
                band_index: i,
                doa_deg: self.band_doa[i],
                carrier_hz: self.plan.rf_carrier_hz(i),
            });
        }
        let rx = propagate(
            &waveforms,
            &sources,
            &self.geometry,
            &self.impairment,
            &self.prs,
            self.prs_amplitude,
            NoiseKey {
                seed: self.seed,
                slot: t as u64,
            },
        )?;
        calibrate(&rx.y, &self.prs, &self.plan, sync)
    }
}

/// Optional MUSIC spectrum captured during a slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDump {
    pub policy: Policy,
    pub t_s: usize,
    pub band: usize,
    pub values: Vec<f64>,
}

/// One seed at one gain, all configured policies driven in lockstep over the
/// same traffic, noise and front end.
pub struct Simulation {
    cfg: ExperimentConfig,
    front: FrontEnd,
    receiver: Receiver,
    occupancy: OccupancyProcess,
    sync: SlotSync,
    makers: Vec<DecisionMaker>,
    t: usize,
    seed: u64,
    gain_db: f64,
}

/// Reports of one slot.
#[derive(Debug, Clone)]
pub struct SlotOutput {
    pub reports: Vec<SlotReport>,
    pub spectra: Vec<SpectrumDump>,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, seed: u64, gain_db: f64) -> Result<Self> {
        cfg.validate()?;
        let plan = cfg.band_plan()?;
        let geometry = cfg.geometry.build(&plan);
        let (p10, p01) = cfg.occupancy.probabilities(plan.n_bands())?;
        let truth = cfg.occupancy.transitions(plan.n_bands())?;
        let angles = if cfg.direction_angles_deg.is_empty() {
            draw_directions(
                seed,
                cfg.directions,
                cfg.doa_range_deg,
                cfg.min_separation_deg,
            )
        } else {
            cfg.direction_angles_deg.clone()
        };
        let band_doa = (0..=plan.n_bands())
            .map(|i| direction_of(i, plan.n_bands(), cfg.directions).map(|m| angles[m - 1]))
            .collect::<Result<Vec<f64>>>()?;
        let impairment = AfeImpairment::random(
            geometry.len(),
            noise_power_for_snr(cfg.snr_db, &plan),
            gain_db,
            seed,
        );
        let front = FrontEnd {
            prs: generate_prs(&plan),
            plan: plan.clone(),
            geometry: geometry.clone(),
            impairment,
            prs_amplitude: cfg.prs_amplitude,
            band_doa,
            seed,
        };
        let receiver = Receiver {
            plan: plan.clone(),
            geometry: geometry.clone(),
            mode: cfg.mode,
            doa_input: cfg.doa_input,
            k_branches: cfg.k_branches,
            sensing: cfg.sensing,
            mixing_seed: seed,
            keep_spectra: cfg.dump_spectra,
        };
        let makers = cfg
            .policies
            .iter()
            .map(|&p| DecisionMaker::new(p, truth.clone(), geometry.aperture(), cfg.ldm, seed))
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            front,
            receiver,
            occupancy: OccupancyProcess::new(p10, p01, seed)?,
            sync: SlotSync::default(),
            makers,
            t: 0,
            seed,
            gain_db,
        })
    }

    pub fn slot_index(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.cfg.slots
    }

    /// Angle of each band `0..=N`.
    pub fn band_doa(&self) -> &[f64] {
        &self.front.band_doa
    }

    pub fn makers(&self) -> &[DecisionMaker] {
        &self.makers
    }

    /// Advances one slot for every policy.
    pub fn step(&mut self) -> Result<SlotOutput> {
        let t = self.t;
        let truth = self.occupancy.step().to_vec();
        let mut status = Vec::with_capacity(truth.len() + 1);
        status.push(t % 2 == 0);
        status.extend_from_slice(&truth);
        let cal = self.front.receive(t, &status, &mut self.sync)?;

        let mut reports = Vec::with_capacity(self.makers.len());
        let mut spectra = Vec::new();
        // Policies that pick the same bands share one receiver pass.
        let mut cache: Vec<(Vec<usize>, SlotAnalysis)> = Vec::new();
        for maker in &mut self.makers {
            let sel = maker.select();
            let beta: Vec<usize> = sel.beta.iter().map(|b| b + 1).collect();
            let analysis = match cache.iter().find(|(b, _)| *b == beta) {
                Some((_, a)) => a.clone(),
                None => {
                    let a = self.receiver.analyze(&cal, &beta)?;
                    cache.push((beta.clone(), a.clone()));
                    a
                }
            };
            maker.observe(&sel.beta, &analysis.statuses, analysis.failure);
            let doa = doa_records(&analysis.doa, &truth, &self.front.band_doa);
            for (band, values) in analysis.spectra {
                spectra.push(SpectrumDump {
                    policy: maker.policy,
                    t_s: t,
                    band,
                    values,
                });
            }
            reports.push(SlotReport {
                t_s: t,
                seed: self.seed,
                gain_db: self.gain_db,
                policy: maker.policy,
                beta,
                s_hat: analysis.statuses,
                truth: truth.clone(),
                zeta: analysis.failure,
                source_count: analysis.source_count,
                slot_pulse: cal.slot_pulse,
                exploring: sel.exploring,
                expected_reward: sel.expected_reward,
                doa,
            });
        }
        self.t += 1;
        Ok(SlotOutput { reports, spectra })
    }
}

impl Iterator for Simulation {
    type Item = Result<SlotOutput>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.is_done() {
            None
        } else {
            Some(self.step())
        }
    }
}

/// Attaches ground truth to the receiver's direction estimates.
///
/// Joint estimates are assigned to the truly busy detected bands by minimum
/// total angular error; bands left without an estimate get `None`.
pub fn doa_records(doa: &DoaOutput, truth: &[bool], band_doa: &[f64]) -> Vec<DoaRecord> {
    let true_angle = |b: usize| truth[b - 1].then(|| band_doa[b]);
    match doa {
        DoaOutput::None => Vec::new(),
        DoaOutput::PerBand(v) => v
            .iter()
            .map(|&(band, estimate)| DoaRecord {
                band,
                estimate,
                truth: true_angle(band),
            })
            .collect(),
        DoaOutput::Joint { bands, angles } => {
            let mut recs: Vec<DoaRecord> = bands
                .iter()
                .map(|&band| DoaRecord {
                    band,
                    estimate: None,
                    truth: true_angle(band),
                })
                .collect();
            let busy: Vec<usize> = (0..recs.len())
                .filter(|&i| recs[i].truth.is_some())
                .collect();
            let truths: Vec<f64> = busy.iter().map(|&i| recs[i].truth.unwrap_or(0.0)).collect();
            let mut used = vec![false; angles.len()];
            for (e, tix) in match_angles(angles, &truths) {
                recs[busy[tix]].estimate = Some(angles[e]);
                used[e] = true;
            }
            // Spare estimates go to detected bands without ground truth.
            let mut spare = angles
                .iter()
                .zip(&used)
                .filter(|(_, u)| !**u)
                .map(|(a, _)| *a);
            for r in recs.iter_mut().filter(|r| r.truth.is_none()) {
                r.estimate = spare.next();
            }
            recs
        }
    }
}
