//! Phase calibration and slot synchronization.
//!
//! The phase reference tone sits alone in `[0, f_prs)`, so correlating the
//! low-passed front-end output with the known tone reduces to reading the
//! tone bin. The remaining bins of that band carry noise only and give the
//! receiver's noise-floor estimate.

use std::collections::VecDeque;

use crate::dsp::{wrap_phase, SlotSignal, C64};
use crate::error::{Result, UwasError};
use crate::plan::BandPlan;

/// Minimum tone-to-noise ratio (per bin) for a usable phase estimate.
pub const MIN_TONE_TO_NOISE: f64 = 10.0;

/// Output of the calibration unit for one slot.
#[derive(Debug, Clone)]
pub struct CalibratedSlot {
    /// Calibrated user-data signals, one per antenna.
    pub uds: Vec<SlotSignal>,
    pub slot_pulse: bool,
    pub phase_estimates: Vec<f64>,
    /// Noise variance per sample estimated from the reference band guard bins.
    pub noise_power: f64,
}

fn guard_bins(plan: &BandPlan) -> impl Iterator<Item = usize> + '_ {
    let tone = plan.prs_tone_bin();
    (0..plan.prs_bins()).filter(move |&k| k + 1 < tone || k > tone + 1)
}

/// Noise variance per sample from the empty bins of the reference band.
pub fn estimate_noise_power(y: &[SlotSignal], plan: &BandPlan) -> f64 {
    let n = plan.samples_per_slot() as f64;
    let mut acc = 0.0;
    let mut count = 0usize;
    for yl in y {
        for k in guard_bins(plan) {
            acc += yl.spectrum()[k].norm_sqr();
            count += 1;
        }
    }
    if count == 0 {
        0.0
    } else {
        acc / (count as f64 * n)
    }
}

/// Correlates each front end's reference band against the known tone and
/// returns the phase of the correlation, wrapped to `(-pi, pi]`.
pub fn estimate_phase_offsets(
    y: &[SlotSignal],
    prs: &SlotSignal,
    plan: &BandPlan,
) -> Result<Vec<f64>> {
    let n = plan.samples_per_slot() as f64;
    let noise = estimate_noise_power(y, plan);
    let mut out = Vec::with_capacity(y.len());
    for yl in y {
        if yl.len() != prs.len() {
            return Err(UwasError::LengthMismatch {
                expected: prs.len(),
                actual: yl.len(),
            });
        }
        let corr: C64 = yl.spectrum()[..plan.prs_bins()]
            .iter()
            .zip(&prs.spectrum()[..plan.prs_bins()])
            .map(|(a, b)| a * b.conj())
            .sum::<C64>()
            / n;
        let tone = yl.spectrum()[plan.prs_tone_bin()].norm_sqr();
        let ratio = if noise > 0.0 {
            tone / (n * noise)
        } else if tone > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio < MIN_TONE_TO_NOISE {
            return Err(UwasError::CalibrationUnavailable { ratio });
        }
        out.push(wrap_phase(corr.arg()));
    }
    Ok(out)
}

/// High-passes each front-end output above `f_r` and removes its phase offset.
pub fn calibrate_and_extract(
    y: &[SlotSignal],
    phase_estimates: &[f64],
    plan: &BandPlan,
) -> Result<Vec<SlotSignal>> {
    if y.len() != phase_estimates.len() {
        return Err(UwasError::LengthMismatch {
            expected: y.len(),
            actual: phase_estimates.len(),
        });
    }
    let (lo, hi) = plan.uds_extent();
    Ok(y.iter()
        .zip(phase_estimates)
        .map(|(yl, &phi)| yl.band_pass(lo, hi).scaled(C64::from_polar(1.0, -phi)))
        .collect())
}

/// Energy detector on the synchronization band with an adaptive threshold.
///
/// The floor is the median energy of recent slots judged SS-absent, seeded
/// from the guard-bin noise estimate. A pulse marks a change of SS state.
#[derive(Debug, Clone)]
pub struct SlotSync {
    factor: f64,
    window: usize,
    absent: VecDeque<f64>,
    last: Option<bool>,
}

/// One synchronization decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncObservation {
    pub energy: f64,
    pub threshold: f64,
    pub present: bool,
    pub pulse: bool,
}

impl Default for SlotSync {
    fn default() -> Self {
        Self::new(1.5, 64)
    }
}

impl SlotSync {
    pub fn new(factor: f64, window: usize) -> Self {
        Self {
            factor,
            window: window.max(1),
            absent: VecDeque::new(),
            last: None,
        }
    }

    fn floor(&self, bootstrap: f64) -> f64 {
        if self.absent.is_empty() {
            return bootstrap;
        }
        let mut v: Vec<f64> = self.absent.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        let mid = v.len() / 2;
        if v.len() % 2 == 1 {
            v[mid]
        } else {
            0.5 * (v[mid - 1] + v[mid])
        }
    }

    /// Decides SS presence for this slot; `noise_power` seeds the floor
    /// before any absent slot has been seen.
    pub fn observe(
        &mut self,
        y: &[SlotSignal],
        plan: &BandPlan,
        noise_power: f64,
    ) -> SyncObservation {
        let (lo, hi) = plan.band_extent(0).expect("SS band always exists");
        let energy: f64 = y.iter().map(|yl| yl.energy_in(lo, hi)).sum();
        let bootstrap = noise_power * (hi - lo) as f64 * y.len() as f64;
        let threshold = self.factor * self.floor(bootstrap);
        let present = energy > threshold;
        if !present {
            self.absent.push_back(energy);
            if self.absent.len() > self.window {
                self.absent.pop_front();
            }
        }
        let pulse = matches!(self.last, Some(prev) if prev != present);
        self.last = Some(present);
        SyncObservation {
            energy,
            threshold,
            present,
            pulse,
        }
    }
}

/// Full calibration unit: noise floor, sync pulse, phase estimation and UDS extraction.
pub fn calibrate(
    y: &[SlotSignal],
    prs: &SlotSignal,
    plan: &BandPlan,
    sync: &mut SlotSync,
) -> Result<CalibratedSlot> {
    let noise_power = estimate_noise_power(y, plan);
    let obs = sync.observe(y, plan, noise_power);
    let phase_estimates = estimate_phase_offsets(y, prs, plan)?;
    let uds = calibrate_and_extract(y, &phase_estimates, plan)?;
    Ok(CalibratedSlot {
        uds,
        slot_pulse: obs.pulse,
        phase_estimates,
        noise_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{
        generate_prs, propagate, AfeImpairment, ArrayGeometry, DirectionalSource, NoiseKey,
    };
    use crate::traffic::generate_scfdma;
    use std::f64::consts::PI;

    fn receive(phases: Vec<f64>, noise_power: f64, bands: &[usize], slot: u64) -> Vec<SlotSignal> {
        let plan = BandPlan::reference();
        let g = ArrayGeometry::ula(phases.len(), plan.unit_spacing_m()).unwrap();
        let ws: Vec<_> = bands
            .iter()
            .map(|&b| generate_scfdma(b, &plan, slot).unwrap())
            .collect();
        let srcs: Vec<_> = bands
            .iter()
            .map(|&b| DirectionalSource {
                band_index: b,
                doa_deg: 90.0,
                carrier_hz: plan.rf_carrier_hz(b),
            })
            .collect();
        let imp = AfeImpairment {
            phase_offsets: phases,
            noise_power,
            gain_db: 0.0,
        };
        propagate(
            &ws,
            &srcs,
            &g,
            &imp,
            &generate_prs(&plan),
            0.5,
            NoiseKey { seed: 9, slot },
        )
        .unwrap()
        .y
    }

    #[test]
    fn noiseless_phase_recovery() {
        let plan = BandPlan::reference();
        let phi = vec![0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        let y = receive(phi.clone(), 0.0, &[2, 5], 0);
        let est = estimate_phase_offsets(&y, &generate_prs(&plan), &plan).unwrap();
        for (a, b) in est.iter().zip(&phi) {
            assert!(wrap_phase(a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_offsets_give_zero_estimates() {
        let plan = BandPlan::reference();
        let y = receive(vec![0.0; 3], 1e-3, &[1], 3);
        let est = estimate_phase_offsets(&y, &generate_prs(&plan), &plan).unwrap();
        assert!(est.iter().all(|p| p.abs() < 0.01));
    }

    #[test]
    fn missing_reference_is_an_error() {
        let plan = BandPlan::reference();
        let y = vec![SlotSignal::zeros(plan.samples_per_slot())];
        assert!(matches!(
            estimate_phase_offsets(&y, &generate_prs(&plan), &plan),
            Err(UwasError::CalibrationUnavailable { .. })
        ));
    }

    #[test]
    fn calibration_is_a_pure_rotation_of_the_uds() {
        let plan = BandPlan::reference();
        let y = receive(vec![0.3, 2.0], 0.01, &[4], 1);
        let est = estimate_phase_offsets(&y, &generate_prs(&plan), &plan).unwrap();
        let uds = calibrate_and_extract(&y, &est, &plan).unwrap();
        let (lo, hi) = plan.uds_extent();
        for (u, yl) in uds.iter().zip(&y) {
            let a = u.samples();
            let b = yl.band_pass(lo, hi).samples();
            for (p, q) in a.iter().zip(&b) {
                assert!((p.norm() - q.norm()).abs() < 1e-12);
            }
            assert!((u.energy() - yl.energy_in(lo, hi)).abs() < 1e-9 * u.energy());
            assert_eq!(u.energy_in(0, lo), 0.0);
        }
    }

    #[test]
    fn noise_estimate_matches_configured_power() {
        let plan = BandPlan::reference();
        let y = receive(vec![0.0; 4], 0.2, &[], 2);
        let est = estimate_noise_power(&y, &plan);
        assert!((est / 0.2 - 1.0).abs() < 0.15, "estimate {est}");
    }

    #[test]
    fn sync_pulses_on_every_toggle() {
        let plan = BandPlan::reference();
        let mut sync = SlotSync::default();
        let mut pulses = 0;
        for slot in 0..40u64 {
            let bands: Vec<usize> = if slot % 2 == 0 { vec![0] } else { vec![] };
            let y = receive(vec![0.0; 2], 0.05, &bands, slot);
            let n = estimate_noise_power(&y, &plan);
            if sync.observe(&y, &plan, n).pulse {
                pulses += 1;
            }
        }
        assert_eq!(pulses, 39);
    }

    #[test]
    fn sync_silent_when_ss_absent() {
        let plan = BandPlan::reference();
        let mut sync = SlotSync::default();
        for slot in 0..40u64 {
            let y = receive(vec![0.0; 2], 0.05, &[3], slot);
            let n = estimate_noise_power(&y, &plan);
            let obs = sync.observe(&y, &plan, n);
            assert!(!obs.present);
            if slot > 0 {
                assert!(!obs.pulse);
            }
        }
    }
}
