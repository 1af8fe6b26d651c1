//! Per-slot receive chain after calibration: digitize, sense, estimate DoA.

use nalgebra::DMatrix;

use crate::array::ArrayGeometry;
use crate::calibration::CalibratedSlot;
use crate::doa::{coarray_music, sample_covariance};
use crate::dsp::C64;
use crate::error::{Result, UwasError};
use crate::plan::BandPlan;
use crate::sensing::{energy_detect, sense, status_from_support, BandStatus, SensingParams};
use crate::sns::{digitize, isolate_bands, make_mixing_matrix, SnsConfig, SnsOutput};

use super::config::{DoaInput, SamplingMode};

/// Estimator settings shared by every slot of a run.
#[derive(Debug, Clone)]
pub struct Receiver {
    pub plan: BandPlan,
    pub geometry: ArrayGeometry,
    pub mode: SamplingMode,
    pub doa_input: DoaInput,
    pub k_branches: usize,
    pub sensing: SensingParams,
    /// Seed of the run's mixing coefficients.
    pub mixing_seed: u64,
    pub keep_spectra: bool,
}

/// Direction estimates of one slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum DoaOutput {
    #[default]
    None,
    /// One estimate per detected band (`None` when no peak was found).
    PerBand(Vec<(usize, Option<f64>)>),
    /// Unassigned joint estimates for the detected bands.
    Joint { bands: Vec<usize>, angles: Vec<f64> },
}

/// Receiver decisions for one slot.
#[derive(Debug, Clone)]
pub struct SlotAnalysis {
    /// Per band `1..=N` (index `i` is band `i + 1`).
    pub statuses: Vec<BandStatus>,
    pub failure: bool,
    pub source_count: usize,
    pub doa: DoaOutput,
    /// MUSIC pseudo-spectra keyed by band (0 for a joint spectrum).
    pub spectra: Vec<(usize, Vec<f64>)>,
}

impl Receiver {
    pub fn aperture(&self) -> usize {
        self.geometry.aperture()
    }

    fn rf_carriers(&self, bands: &[usize]) -> Vec<f64> {
        bands.iter().map(|&b| self.plan.rf_carrier_hz(b)).collect()
    }

    /// Analyzes one calibrated slot for the selected bands `beta` (1-based).
    pub fn analyze(&self, cal: &CalibratedSlot, beta: &[usize]) -> Result<SlotAnalysis> {
        match self.mode {
            SamplingMode::Sns => self.analyze_sns(cal, beta),
            SamplingMode::Nyquist => self.analyze_nyquist(cal, beta),
        }
    }

    /// Digitizes the calibrated slot for `beta`.
    pub fn digitize(&self, cal: &CalibratedSlot, beta: &[usize]) -> Result<SnsOutput> {
        let cfg = SnsConfig::new(beta.to_vec(), self.k_branches, &self.plan)?;
        let mixing = make_mixing_matrix(self.k_branches, beta, self.mixing_seed);
        digitize(&cal.uds, &cfg, &mixing, &self.plan)
    }

    fn analyze_sns(&self, cal: &CalibratedSlot, beta: &[usize]) -> Result<SlotAnalysis> {
        let out = self.digitize(cal, beta)?;
        let n = self.plan.samples_per_slot();
        let carriers = self.rf_carriers(beta);
        let outcome = sense(
            &out,
            cal.noise_power,
            &self.geometry,
            &carriers,
            n,
            &self.sensing,
        )?;
        let statuses = status_from_support(&outcome.s_hat_beta, beta, self.plan.n_bands());
        let mut analysis = SlotAnalysis {
            statuses,
            failure: outcome.failure,
            source_count: outcome.source_count,
            doa: DoaOutput::None,
            spectra: Vec::new(),
        };
        if outcome.failure {
            return Ok(analysis);
        }
        let cols: Vec<usize> = (0..beta.len()).filter(|&c| outcome.s_hat_beta[c]).collect();
        if cols.is_empty() {
            return Ok(analysis);
        }
        match self.doa_input {
            DoaInput::Demixed => {
                let separated = demix(&out, &cols)?;
                let mut per_band = Vec::with_capacity(cols.len());
                for (s, &c) in cols.iter().enumerate() {
                    let band = beta[c];
                    let (est, spec) = self.single_source(&separated[s], band)?;
                    if self.keep_spectra {
                        analysis.spectra.push((band, spec));
                    }
                    per_band.push((band, est));
                }
                analysis.doa = DoaOutput::PerBand(per_band);
            }
            DoaInput::Branch => {
                let snapshots: Vec<Vec<C64>> = (0..out.antennas())
                    .map(|l| out.bins(0, l).to_vec())
                    .collect();
                let r = sample_covariance(&snapshots)?;
                let bands: Vec<usize> = cols.iter().map(|&c| beta[c]).collect();
                let carrier = self.rf_carriers(&bands).iter().sum::<f64>() / bands.len() as f64;
                let n_src = bands.len().min(self.aperture() - 1);
                let est = coarray_music(&r, &self.geometry, carrier, n_src)?;
                if self.keep_spectra {
                    analysis.spectra.push((0, est.spectrum.clone()));
                }
                analysis.doa = DoaOutput::Joint {
                    bands,
                    angles: est.angles_deg,
                };
            }
        }
        Ok(analysis)
    }

    fn analyze_nyquist(&self, cal: &CalibratedSlot, beta: &[usize]) -> Result<SlotAnalysis> {
        let bands = isolate_bands(&cal.uds, beta, &self.plan)?;
        let bin_noise = cal.noise_power * self.plan.samples_per_slot() as f64;
        let busy = energy_detect(&bands, bin_noise, &self.sensing);
        let statuses = status_from_support(&busy, beta, self.plan.n_bands());
        let mut spectra = Vec::new();
        let mut per_band = Vec::new();
        for (c, per_antenna) in bands.iter().enumerate() {
            if !busy[c] {
                continue;
            }
            let (est, spec) = self.single_source(per_antenna, beta[c])?;
            if self.keep_spectra {
                spectra.push((beta[c], spec));
            }
            per_band.push((beta[c], est));
        }
        Ok(SlotAnalysis {
            statuses,
            failure: false,
            source_count: per_band.len(),
            doa: if per_band.is_empty() {
                DoaOutput::None
            } else {
                DoaOutput::PerBand(per_band)
            },
            spectra,
        })
    }

    /// Co-array MUSIC for one band from its per-antenna baseband bins.
    fn single_source(
        &self,
        per_antenna: &[Vec<C64>],
        band: usize,
    ) -> Result<(Option<f64>, Vec<f64>)> {
        let r = sample_covariance(per_antenna)?;
        let est = coarray_music(&r, &self.geometry, self.plan.rf_carrier_hz(band), 1)?;
        Ok((est.angles_deg.first().copied(), est.spectrum))
    }
}

/// Separates the detected bands on every antenna by least squares on the
/// branch outputs: `C_l = gamma_S^+ Z_l`. Returns `[band][antenna][bin]`.
pub fn demix(out: &SnsOutput, cols: &[usize]) -> Result<Vec<Vec<Vec<C64>>>> {
    let k = out.k_branches();
    let gamma_s = out.mixing.gamma.select_columns(cols);
    let pinv = gamma_s
        .pseudo_inverse(1e-12)
        .map_err(|e| UwasError::Numerical(e.to_string()))?;
    let j = out.bins(0, 0).len();
    let mut sep = vec![Vec::with_capacity(out.antennas()); cols.len()];
    for l in 0..out.antennas() {
        let z = DMatrix::from_fn(k, j, |r, c| out.bins(r, l)[c]);
        let c = &pinv * z;
        for (s, row) in sep.iter_mut().enumerate() {
            row.push(c.row(s).iter().copied().collect());
        }
    }
    Ok(sep)
}
