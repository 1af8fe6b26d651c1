//! Multi-user traffic generation.
//!
//! Band occupancy follows an independent two-state Markov chain per band,
//! stepped once per slot. Each busy band carries an SC-FDMA (DFT-spread OFDM)
//! waveform confined to its bin range. Status vectors handed to the
//! composer and the direction mask have length `N + 1`, with entry 0 being
//! the synchronization band.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{fft, ifft_unscaled_in_place, SlotSignal, C64};
use crate::error::{Result, UwasError};
use crate::plan::BandPlan;
use crate::rng::{self, Domain};

/// SC-FDMA symbol FFT size for the 1.4 MHz LTE numerology.
pub const SCFDMA_FFT: usize = 128;
/// Cyclic prefix length per symbol.
pub const SCFDMA_CP: usize = 9;
/// Subcarriers per resource block.
pub const SUBCARRIERS_PER_RB: usize = 12;

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(UwasError::Config(format!("probability {p} outside [0, 1]")))
    }
}

/// One Markov step for every band: busy -> vacant w.p. `p10`, vacant -> busy w.p. `p01`.
pub fn step_occupancy<R: Rng + ?Sized>(
    p10: &[f64],
    p01: &[f64],
    status: &[bool],
    rng: &mut R,
) -> Vec<bool> {
    status
        .iter()
        .enumerate()
        .map(|(i, &busy)| {
            let u: f64 = rng.gen();
            if busy {
                u >= p10[i]
            } else {
                u < p01[i]
            }
        })
        .collect()
}

/// Per-band occupancy chain with its own random stream.
#[derive(Debug, Clone)]
pub struct OccupancyProcess {
    p10: Vec<f64>,
    p01: Vec<f64>,
    status: Vec<bool>,
    rng: ChaCha8Rng,
}

impl OccupancyProcess {
    /// Starts the chain from a draw of its stationary distribution.
    pub fn new(p10: Vec<f64>, p01: Vec<f64>, seed: u64) -> Result<Self> {
        if p10.len() != p01.len() || p10.is_empty() {
            return Err(UwasError::Config(
                "p10 and p01 must be non-empty and equally long".into(),
            ));
        }
        for &p in p10.iter().chain(&p01) {
            check_probability(p)?;
        }
        let mut rng = rng::stream(seed, Domain::Occupancy, 0);
        let status = p10
            .iter()
            .zip(&p01)
            .map(|(&a, &b)| {
                let busy = if a + b > 0.0 { b / (a + b) } else { 0.0 };
                rng.gen::<f64>() < busy
            })
            .collect();
        Ok(Self {
            p10,
            p01,
            status,
            rng,
        })
    }

    pub fn with_status(mut self, status: Vec<bool>) -> Result<Self> {
        if status.len() != self.p10.len() {
            return Err(UwasError::LengthMismatch {
                expected: self.p10.len(),
                actual: status.len(),
            });
        }
        self.status = status;
        Ok(self)
    }

    pub fn n_bands(&self) -> usize {
        self.p10.len()
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn p10(&self) -> &[f64] {
        &self.p10
    }

    pub fn p01(&self) -> &[f64] {
        &self.p01
    }

    /// Long-run probability that band `i` (0-based) is vacant.
    pub fn stationary_vacancy(&self, i: usize) -> f64 {
        let s = self.p10[i] + self.p01[i];
        if s > 0.0 {
            self.p10[i] / s
        } else {
            1.0
        }
    }

    pub fn step(&mut self) -> &[bool] {
        self.status = step_occupancy(&self.p10, &self.p01, &self.status, &mut self.rng);
        &self.status
    }
}

/// One band's slot waveform at the Nyquist rate, already placed at its carrier.
#[derive(Debug, Clone, PartialEq)]
pub struct BandWaveform {
    pub band_index: usize,
    pub signal: SlotSignal,
}

fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.gen::<bool>() { s } else { -s };
    let im = if rng.gen::<bool>() { s } else { -s };
    C64::new(re, im)
}

/// Low-rate SC-FDMA baseband: QPSK -> M-point DFT -> 128-point IFFT -> cyclic prefix.
fn scfdma_baseband<R: Rng + ?Sized>(n_sc: usize, len: usize, rng: &mut R) -> Vec<C64> {
    let mut out = Vec::with_capacity(len + SCFDMA_FFT + SCFDMA_CP);
    let norm = 1.0 / (n_sc as f64).sqrt();
    while out.len() < len {
        let data: Vec<C64> = (0..n_sc).map(|_| qpsk(rng)).collect();
        let spread = fft(&data);
        let mut grid = vec![C64::new(0.0, 0.0); SCFDMA_FFT];
        for (j, v) in spread.iter().enumerate() {
            let bin = (j as isize - (n_sc / 2) as isize).rem_euclid(SCFDMA_FFT as isize) as usize;
            grid[bin] = v * norm;
        }
        ifft_unscaled_in_place(&mut grid);
        out.extend_from_slice(&grid[SCFDMA_FFT - SCFDMA_CP..]);
        out.extend_from_slice(&grid);
    }
    out.truncate(len);
    out
}

/// Generates one slot of SC-FDMA traffic for band `band_index` (0 = SS).
///
/// The occupied subcarriers are stretched to span the band width, the block
/// spectrum is cut to the band's bins and centered on its carrier, and the
/// result is scaled to unit mean power.
pub fn generate_scfdma(band_index: usize, plan: &BandPlan, data_seed: u64) -> Result<BandWaveform> {
    let (lo, hi) = plan.band_extent(band_index)?;
    let n = plan.samples_per_slot();
    let width = hi - lo;
    let n_sc = (SUBCARRIERS_PER_RB * plan.resource_blocks()).clamp(2, SCFDMA_FFT - 2);
    let low_len = ((SCFDMA_FFT * width) as f64 / n_sc as f64).round() as usize;
    let low_len = low_len.max(width);

    let mut rng = rng::stream(data_seed, Domain::BandData, band_index as u64);
    let low = scfdma_baseband(n_sc, low_len, &mut rng);
    let low_spec = fft(&low);

    let mut spec = vec![C64::new(0.0, 0.0); n];
    let half = (width / 2) as isize;
    for q in 0..width {
        let k = (q as isize - half).rem_euclid(low_len as isize) as usize;
        spec[lo + q] = low_spec[k];
    }
    let power: f64 = spec.iter().map(|v| v.norm_sqr()).sum::<f64>() / (n * n) as f64;
    if power > 0.0 {
        let s = 1.0 / power.sqrt();
        spec.iter_mut().for_each(|v| *v *= s);
    }
    Ok(BandWaveform {
        band_index,
        signal: SlotSignal::from_spectrum(spec),
    })
}

/// Sums the waveforms of active bands. `status` has length `N + 1` (entry 0 is SS).
pub fn compose_multiband(
    status: &[bool],
    waveforms: &[BandWaveform],
    plan: &BandPlan,
) -> Result<SlotSignal> {
    let n = plan.samples_per_slot();
    if status.len() != plan.n_bands() + 1 {
        return Err(UwasError::LengthMismatch {
            expected: plan.n_bands() + 1,
            actual: status.len(),
        });
    }
    let mut out = SlotSignal::zeros(n);
    for (i, &busy) in status.iter().enumerate() {
        if !busy {
            continue;
        }
        let w = waveforms
            .iter()
            .find(|w| w.band_index == i)
            .ok_or_else(|| UwasError::Config(format!("no waveform for busy band {i}")))?;
        out.add_assign(&w.signal)?;
    }
    Ok(out)
}

/// Keeps the `m`-th (1-based) of `M` contiguous blocks of `s` and zeros the rest.
///
/// `s` has length `N + 1`; block 1 holds `{SS, U_1 .. U_{q-1}}` with `q = (N + 1) / M`.
pub fn apply_direction_mask(s: &[bool], m: usize, directions: usize) -> Result<Vec<bool>> {
    let total = s.len();
    if directions == 0 || total % directions != 0 {
        return Err(UwasError::Config(format!(
            "{total} bands (SS included) cannot be split into {directions} equal directions"
        )));
    }
    if m == 0 || m > directions {
        return Err(UwasError::Config(format!(
            "direction {m} outside 1..={directions}"
        )));
    }
    let q = total / directions;
    Ok(s.iter()
        .enumerate()
        .map(|(i, &v)| v && i / q == m - 1)
        .collect())
}

/// Direction (1-based) that carries band `index` (0 = SS).
pub fn direction_of(index: usize, n_bands: usize, directions: usize) -> Result<usize> {
    let total = n_bands + 1;
    if directions == 0 || total % directions != 0 {
        return Err(UwasError::Config(format!(
            "{total} bands (SS included) cannot be split into {directions} equal directions"
        )));
    }
    if index >= total {
        return Err(UwasError::BandIndex {
            index,
            max: n_bands,
        });
    }
    Ok(index / (total / directions) + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::energy;
    use rand::SeedableRng;

    #[test]
    fn deterministic_transitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = step_occupancy(&[1.0; 4], &[0.0; 4], &[true; 4], &mut rng);
        assert_eq!(s, vec![false; 4]);
        let old = vec![true, false, true, false];
        let s = step_occupancy(&[0.0; 4], &[0.0; 4], &old, &mut rng);
        assert_eq!(s, old);
    }

    #[test]
    fn rejects_invalid_probabilities() {
        assert!(OccupancyProcess::new(vec![1.2], vec![0.1], 0).is_err());
        assert!(OccupancyProcess::new(vec![0.2, 0.3], vec![0.1], 0).is_err());
    }

    #[test]
    fn stationary_vacancy_of_band_one() {
        // Markov-chain Monte Carlo against p0 = p10 / (p10 + p01).
        let mut p = OccupancyProcess::new(vec![0.95], vec![0.05], 11).unwrap();
        let slots = 10_000;
        let vacant = (0..slots).filter(|_| !p.step()[0]).count();
        let rate = vacant as f64 / slots as f64;
        assert!((rate - 0.95).abs() < 0.02, "empirical vacancy {rate}");
        assert!((p.stationary_vacancy(0) - 0.95).abs() < 1e-12);
    }

    #[test]
    fn seventy_two_subcarriers_for_six_blocks() {
        assert_eq!(
            SUBCARRIERS_PER_RB * BandPlan::reference().resource_blocks(),
            72
        );
    }

    #[test]
    fn waveform_is_band_limited_and_centered() {
        let plan = BandPlan::reference();
        let w = generate_scfdma(3, &plan, 5).unwrap();
        let (lo, hi) = plan.band_extent(3).unwrap();
        let total = w.signal.energy();
        let inband = w.signal.energy_in(lo, hi);
        let leak = (total - inband).max(0.0);
        assert!(leak <= 1e-4 * inband);
        let pg = w.signal.periodogram();
        let centroid: f64 = pg
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum::<f64>()
            / pg.iter().sum::<f64>();
        assert!((centroid - plan.carrier_bin(3)).abs() < plan.band_bins() as f64 / 10.0);
        let power = energy(&w.signal.samples()) / plan.samples_per_slot() as f64;
        assert!((power - 1.0).abs() < 1e-9);
    }

    #[test]
    fn independent_seeds_are_uncorrelated() {
        let plan = BandPlan::reference();
        let a = generate_scfdma(2, &plan, 1).unwrap().signal;
        let b = generate_scfdma(2, &plan, 2).unwrap().signal;
        let cross: C64 = a
            .spectrum()
            .iter()
            .zip(b.spectrum())
            .map(|(x, y)| x * y.conj())
            .sum();
        let rho = cross.norm() / (a.energy() * b.energy()).sqrt() / plan.samples_per_slot() as f64;
        assert!(rho < 0.1, "correlation {rho}");
    }

    #[test]
    fn band_index_out_of_range() {
        assert!(generate_scfdma(9, &BandPlan::reference(), 0).is_err());
    }

    #[test]
    fn compose_all_vacant_is_zero() {
        let plan = BandPlan::reference();
        let x = compose_multiband(&[false; 9], &[], &plan).unwrap();
        assert_eq!(x.energy(), 0.0);
        assert!(compose_multiband(&[false; 8], &[], &plan).is_err());
    }

    #[test]
    fn mask_blocks_for_three_directions() {
        let s = vec![true; 9];
        let d1 = apply_direction_mask(&s, 1, 3).unwrap();
        let d2 = apply_direction_mask(&s, 2, 3).unwrap();
        let d3 = apply_direction_mask(&s, 3, 3).unwrap();
        let on = |v: &[bool]| {
            v.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect::<Vec<_>>()
        };
        assert_eq!(on(&d1), vec![0, 1, 2]);
        assert_eq!(on(&d2), vec![3, 4, 5]);
        assert_eq!(on(&d3), vec![6, 7, 8]);
        assert_eq!(apply_direction_mask(&s, 1, 1).unwrap(), s);
        assert!(apply_direction_mask(&s, 1, 2).is_err());
        assert_eq!(direction_of(5, 8, 3).unwrap(), 2);
        assert_eq!(direction_of(0, 8, 3).unwrap(), 1);
    }
}
