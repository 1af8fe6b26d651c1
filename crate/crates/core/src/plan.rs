//! Static spectrum layout.
//!
//! The simulation runs on normalized discrete time: the Nyquist span `f_max`
//! maps to one sample per step and a slot of `n` samples resolves `n` DFT
//! bins. All band edges are quantized to whole bins so brickwall filters and
//! the sub-Nyquist mixer shifts are exact.
//!
//! ```text
//! bin 0        f_prs         f_r        f_r+B              f_r+N*B    n
//! |--- PRS ----|---- SS -----|-- U_1 --|-- ... --|-- U_N --|  guard  |
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Result, UwasError};

/// Speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Physical parameters from which a [`BandPlan`] is quantized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub n_bands: usize,
    pub band_bw_hz: f64,
    pub prs_bw_hz: f64,
    pub nyquist_hz: f64,
    pub transmit_hz: f64,
    pub prs_tone_hz: f64,
    pub resource_blocks: usize,
    pub samples_per_slot: usize,
}

impl Default for PlanConfig {
    /// Transmission and reception parameters of the reference prototype.
    fn default() -> Self {
        Self {
            n_bands: 8,
            band_bw_hz: 1.4e6,
            prs_bw_hz: 0.4e6,
            nyquist_hz: 13.0e6,
            transmit_hz: 2.4e9,
            prs_tone_hz: 200e3,
            resource_blocks: 6,
            samples_per_slot: 4096,
        }
    }
}

/// Bin-quantized spectrum layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPlan {
    n_bands: usize,
    samples_per_slot: usize,
    band_bins: usize,
    prs_bins: usize,
    prs_tone_bin: usize,
    decimation: usize,
    resource_blocks: usize,
    nyquist_hz: f64,
    transmit_hz: f64,
}

impl BandPlan {
    pub fn new(cfg: &PlanConfig) -> Result<Self> {
        let n = cfg.samples_per_slot;
        if n < 16 || !n.is_power_of_two() {
            return Err(UwasError::Config(format!(
                "samples_per_slot must be a power of two >= 16, got {n}"
            )));
        }
        if cfg.n_bands == 0 {
            return Err(UwasError::Config("n_bands must be positive".into()));
        }
        if !(cfg.nyquist_hz > 0.0 && cfg.band_bw_hz > 0.0 && cfg.prs_bw_hz > 0.0) {
            return Err(UwasError::Config("frequencies must be positive".into()));
        }
        let to_bins = |hz: f64| (hz / cfg.nyquist_hz * n as f64).round() as usize;
        let band_bins = to_bins(cfg.band_bw_hz);
        let prs_bins = to_bins(cfg.prs_bw_hz);
        let prs_tone_bin = to_bins(cfg.prs_tone_hz);
        if band_bins < 2 || prs_bins < 4 {
            return Err(UwasError::Config(
                "slot too short to resolve band and reference widths".into(),
            ));
        }
        if prs_tone_bin == 0 || prs_tone_bin + 1 >= prs_bins {
            return Err(UwasError::Config(format!(
                "reference tone bin {prs_tone_bin} must lie strictly inside 0..{prs_bins}"
            )));
        }
        let offset = prs_bins + band_bins;
        if offset + cfg.n_bands * band_bins > n {
            return Err(UwasError::Config(format!(
                "{} bands of {} bins starting at bin {} exceed the {}-bin Nyquist span",
                cfg.n_bands, band_bins, offset, n
            )));
        }
        let decimation = ((n as f64) / band_bins as f64).round() as usize;
        if decimation == 0 || n / decimation < band_bins {
            return Err(UwasError::Config(format!(
                "decimation {decimation} leaves fewer than {band_bins} low-rate samples"
            )));
        }
        Ok(Self {
            n_bands: cfg.n_bands,
            samples_per_slot: n,
            band_bins,
            prs_bins,
            prs_tone_bin,
            decimation,
            resource_blocks: cfg.resource_blocks,
            nyquist_hz: cfg.nyquist_hz,
            transmit_hz: cfg.transmit_hz,
        })
    }

    /// The reference prototype layout at the default slot length.
    pub fn reference() -> Self {
        Self::new(&PlanConfig::default()).expect("reference plan is valid")
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn samples_per_slot(&self) -> usize {
        self.samples_per_slot
    }

    pub fn band_bins(&self) -> usize {
        self.band_bins
    }

    pub fn prs_bins(&self) -> usize {
        self.prs_bins
    }

    /// First bin of band 1, `f_r = f_prs + B`.
    pub fn offset_bins(&self) -> usize {
        self.prs_bins + self.band_bins
    }

    pub fn prs_tone_bin(&self) -> usize {
        self.prs_tone_bin
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    /// Length of each sub-Nyquist branch output.
    pub fn decimated_len(&self) -> usize {
        self.samples_per_slot / self.decimation
    }

    pub fn resource_blocks(&self) -> usize {
        self.resource_blocks
    }

    pub fn nyquist_hz(&self) -> f64 {
        self.nyquist_hz
    }

    pub fn transmit_hz(&self) -> f64 {
        self.transmit_hz
    }

    pub fn bin_hz(&self) -> f64 {
        self.nyquist_hz / self.samples_per_slot as f64
    }

    pub fn band_bw_hz(&self) -> f64 {
        self.band_bins as f64 * self.bin_hz()
    }

    pub fn prs_bw_hz(&self) -> f64 {
        self.prs_bins as f64 * self.bin_hz()
    }

    pub fn band_offset_hz(&self) -> f64 {
        self.offset_bins() as f64 * self.bin_hz()
    }

    /// Bin range `[lo, hi)` of band `index`; index 0 is the synchronization band.
    pub fn band_extent(&self, index: usize) -> Result<(usize, usize)> {
        if index > self.n_bands {
            return Err(UwasError::BandIndex {
                index,
                max: self.n_bands,
            });
        }
        let lo = self.prs_bins + index * self.band_bins;
        Ok((lo, lo + self.band_bins))
    }

    /// Bins `[f_r, f_r + N*B)` holding user data.
    pub fn uds_extent(&self) -> (usize, usize) {
        let lo = self.offset_bins();
        (lo, lo + self.n_bands * self.band_bins)
    }

    /// Band center in bins, `f_r + (i - 1/2) B` for data bands.
    pub fn carrier_bin(&self, index: usize) -> f64 {
        self.prs_bins as f64 + (index as f64 + 0.5) * self.band_bins as f64
    }

    /// Band center as a fraction of the Nyquist span.
    pub fn carrier_normalized(&self, index: usize) -> f64 {
        self.carrier_bin(index) / self.samples_per_slot as f64
    }

    pub fn carrier_hz(&self, index: usize) -> f64 {
        self.carrier_bin(index) * self.bin_hz()
    }

    /// Data band centers `f_1..f_N` in Hz.
    pub fn carriers_hz(&self) -> Vec<f64> {
        (1..=self.n_bands).map(|i| self.carrier_hz(i)).collect()
    }

    /// Radio frequency of band `index` after upconversion; sets the steering phase.
    pub fn rf_carrier_hz(&self, index: usize) -> f64 {
        self.transmit_hz + self.carrier_hz(index)
    }

    /// Antenna unit spacing `d = c / (2 f_t)`.
    pub fn unit_spacing_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.transmit_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layout() {
        let p = BandPlan::reference();
        assert_eq!(p.n_bands(), 8);
        assert_eq!(p.samples_per_slot(), 4096);
        assert_eq!(p.band_bins(), 441);
        assert_eq!(p.prs_bins(), 126);
        assert_eq!(p.offset_bins(), p.prs_bins() + p.band_bins());
        assert_eq!(p.decimation(), 9);
        assert_eq!(p.decimated_len(), 455);
        assert_eq!(p.prs_tone_bin(), 63);
        assert!(p.uds_extent().1 <= p.samples_per_slot());
        assert!((p.band_bw_hz() - 1.4e6).abs() < p.bin_hz());
        assert!((p.band_offset_hz() - 1.8e6).abs() < 2.0 * p.bin_hz());
    }

    #[test]
    fn carriers_inside_band_extents() {
        let p = BandPlan::reference();
        for i in 1..=p.n_bands() {
            let (lo, hi) = p.band_extent(i).unwrap();
            let c = p.carrier_bin(i);
            assert!(c > lo as f64 && c < hi as f64);
        }
        assert_eq!(p.carriers_hz().len(), 8);
    }

    #[test]
    fn rejects_bad_layouts() {
        let mut cfg = PlanConfig {
            samples_per_slot: 3000,
            ..PlanConfig::default()
        };
        assert!(BandPlan::new(&cfg).is_err());
        cfg.samples_per_slot = 4096;
        cfg.n_bands = 9;
        assert!(BandPlan::new(&cfg).is_err());
        assert!(BandPlan::reference().band_extent(9).is_err());
    }

    #[test]
    fn decimation_by_eight() {
        let p = BandPlan::new(&PlanConfig {
            n_bands: 6,
            band_bw_hz: 13.0e6 / 8.0,
            ..PlanConfig::default()
        })
        .unwrap();
        assert_eq!(p.decimation(), 8);
        assert_eq!(p.decimated_len(), 512);
    }

    #[test]
    fn unit_spacing_at_2_4_ghz() {
        assert!((BandPlan::reference().unit_spacing_m() - 0.0625).abs() < 1e-12);
    }
}
