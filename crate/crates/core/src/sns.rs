//! Reconfigurable sub-Nyquist digitizer.
//!
//! Branch `k` multiplies the calibrated stream by
//! `m_k[n] = sum_{b in beta} gamma_{k,b} e^{-j 2 pi ((b-1)B + f_r) n}`,
//! low-passes to `[0, B)` and decimates. In the bin domain the mixer is a
//! set of exact shifts, so the branch spectrum is
//! `Z_k[j] = sum_b gamma_{k,b} Y[lo_b + j]` for `j < B`. Outputs are kept as
//! these `B`-bin spectra; time samples at the low rate are produced on demand.

use nalgebra::DMatrix;

use crate::dsp::{complex_gaussian, ifft_unscaled_in_place, SlotSignal, C64};
use crate::error::{Result, UwasError};
use crate::plan::BandPlan;
use crate::rng::{self, Domain};

/// Branch count and selected bands for one slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnsConfig {
    beta: Vec<usize>,
    k_branches: usize,
    decimation: usize,
}

impl SnsConfig {
    pub fn new(beta: Vec<usize>, k_branches: usize, plan: &BandPlan) -> Result<Self> {
        if beta.is_empty() {
            return Err(UwasError::Config("band selection must not be empty".into()));
        }
        if k_branches == 0 {
            return Err(UwasError::Config("at least one branch is required".into()));
        }
        for (i, &b) in beta.iter().enumerate() {
            if b == 0 || b > plan.n_bands() {
                return Err(UwasError::BandIndex {
                    index: b,
                    max: plan.n_bands(),
                });
            }
            if beta[..i].contains(&b) {
                return Err(UwasError::Config(format!("band {b} selected twice")));
            }
        }
        Ok(Self {
            beta,
            k_branches,
            decimation: plan.decimation(),
        })
    }

    pub fn beta(&self) -> &[usize] {
        &self.beta
    }

    pub fn k_branches(&self) -> usize {
        self.k_branches
    }

    pub fn decimation(&self) -> usize {
        self.decimation
    }

    /// True when `K < L_s - 1`, so recovery of a full-rank support is not guaranteed.
    pub fn underdetermined(&self, aperture: usize) -> bool {
        self.k_branches + 1 < aperture
    }
}

/// Mixing coefficients `gamma` (`K x |beta|`).
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub gamma: DMatrix<C64>,
    pub beta: Vec<usize>,
    pub seed: u64,
}

/// Draws unit-variance circular complex Gaussian coefficients.
///
/// Column `b` comes from its own stream keyed by the band index, so the
/// coefficients of a band do not depend on which other bands are selected.
pub fn make_mixing_matrix(k_branches: usize, beta: &[usize], seed: u64) -> MixingMatrix {
    let mut gamma = DMatrix::from_element(k_branches, beta.len(), C64::new(0.0, 0.0));
    for (c, &b) in beta.iter().enumerate() {
        let mut rng = rng::stream(seed, Domain::Mixing, b as u64);
        for k in 0..k_branches {
            gamma[(k, c)] = complex_gaussian(&mut rng, 1.0);
        }
    }
    MixingMatrix {
        gamma,
        beta: beta.to_vec(),
        seed,
    }
}

impl MixingMatrix {
    pub fn k_branches(&self) -> usize {
        self.gamma.nrows()
    }

    /// Column of `gamma` for global band `band`, if selected.
    pub fn column_of(&self, band: usize) -> Option<usize> {
        self.beta.iter().position(|&b| b == band)
    }
}

/// Branch `k` spectrum for one antenna: mix, brickwall low-pass to `[0, B)`.
pub fn mix_filter(uds: &SlotSignal, mixing: &MixingMatrix, k: usize, plan: &BandPlan) -> Vec<C64> {
    let width = plan.band_bins();
    let mut out = vec![C64::new(0.0, 0.0); width];
    let spec = uds.spectrum();
    for (c, &b) in mixing.beta.iter().enumerate() {
        let (lo, _) = plan.band_extent(b).expect("selection validated");
        let g = mixing.gamma[(k, c)];
        for (o, y) in out.iter_mut().zip(&spec[lo..lo + width]) {
            *o += g * y;
        }
    }
    out
}

/// Low-rate time samples of a `B`-bin baseband spectrum.
///
/// `z[t] = (1/n) sum_j Z[j] e^{j 2 pi j t / m}` with `m` the decimated length,
/// i.e. the band-limited baseband signal resampled at `m` points per slot.
pub fn low_rate_samples(bins: &[C64], plan: &BandPlan) -> Vec<C64> {
    let m = plan.decimated_len();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    buf[..bins.len()].copy_from_slice(bins);
    ifft_unscaled_in_place(&mut buf);
    let s = 1.0 / plan.samples_per_slot() as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}

/// Mixes, filters and decimates antenna signal `uds` on branch `k`.
pub fn mix_filter_decimate(
    uds: &SlotSignal,
    mixing: &MixingMatrix,
    k: usize,
    plan: &BandPlan,
) -> Vec<C64> {
    low_rate_samples(&mix_filter(uds, mixing, k, plan), plan)
}

/// `K x L` grid of branch outputs.
#[derive(Debug, Clone)]
pub struct SnsOutput {
    bins: Vec<Vec<C64>>,
    k_branches: usize,
    antennas: usize,
    pub config: SnsConfig,
    pub mixing: MixingMatrix,
}

impl SnsOutput {
    pub fn k_branches(&self) -> usize {
        self.k_branches
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Baseband spectrum `Z_{k,l}` over the `B` bins.
    pub fn bins(&self, k: usize, l: usize) -> &[C64] {
        &self.bins[k * self.antennas + l]
    }

    /// Low-rate sequence `z_{k,l}[t]`.
    pub fn samples(&self, k: usize, l: usize, plan: &BandPlan) -> Vec<C64> {
        low_rate_samples(self.bins(k, l), plan)
    }

    /// Total energy of the low-rate outputs.
    pub fn energy(&self, plan: &BandPlan) -> f64 {
        let n = plan.samples_per_slot() as f64;
        let m = plan.decimated_len() as f64;
        self.bins
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v.norm_sqr())
            .sum::<f64>()
            * m
            / (n * n)
    }
}

/// Digitizes the calibrated signals of all antennas on all branches.
pub fn digitize(
    uds: &[SlotSignal],
    config: &SnsConfig,
    mixing: &MixingMatrix,
    plan: &BandPlan,
) -> Result<SnsOutput> {
    if mixing.beta != config.beta || mixing.k_branches() != config.k_branches {
        return Err(UwasError::Config(
            "mixing matrix does not match the digitizer configuration".into(),
        ));
    }
    let antennas = uds.len();
    let mut bins = Vec::with_capacity(config.k_branches * antennas);
    for k in 0..config.k_branches {
        for u in uds {
            if u.len() != plan.samples_per_slot() {
                return Err(UwasError::LengthMismatch {
                    expected: plan.samples_per_slot(),
                    actual: u.len(),
                });
            }
            bins.push(mix_filter(u, mixing, k, plan));
        }
    }
    Ok(SnsOutput {
        bins,
        k_branches: config.k_branches,
        antennas,
        config: config.clone(),
        mixing: mixing.clone(),
    })
}

/// Per-band, per-antenna spectra cut directly from the Nyquist-rate stream.
///
/// Used by the Nyquist-rate reference receiver. Entry `[c][l]` holds band
/// `beta[c]` at antenna `l`, shifted to baseband.
pub fn isolate_bands(
    uds: &[SlotSignal],
    beta: &[usize],
    plan: &BandPlan,
) -> Result<Vec<Vec<Vec<C64>>>> {
    let width = plan.band_bins();
    beta.iter()
        .map(|&b| {
            let (lo, _) = plan.band_extent(b)?;
            Ok(uds
                .iter()
                .map(|u| u.spectrum()[lo..lo + width].to_vec())
                .collect())
        })
        .collect()
}

/// Noise variance per low-rate sample on a branch with coefficients `gamma_k`,
/// given Nyquist-rate noise variance `sigma2`.
pub fn branch_noise_variance(gamma_row: &[C64], sigma2: f64, plan: &BandPlan) -> f64 {
    let g: f64 = gamma_row.iter().map(|v| v.norm_sqr()).sum();
    g * sigma2 * plan.band_bins() as f64 / plan.samples_per_slot() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::generate_scfdma;

    fn uds_for(bands: &[usize], plan: &BandPlan) -> SlotSignal {
        let mut s = SlotSignal::zeros(plan.samples_per_slot());
        for &b in bands {
            s.add_assign(&generate_scfdma(b, plan, 11).unwrap().signal)
                .unwrap();
        }
        s
    }

    #[test]
    fn mixing_matrix_shape_and_determinism() {
        let a = make_mixing_matrix(5, &[1, 2, 3, 4, 5, 7, 8], 3);
        let b = make_mixing_matrix(5, &[1, 2, 3, 4, 5, 7, 8], 3);
        assert_eq!(a, b);
        assert_eq!(a.gamma.shape(), (5, 7));
        let c = make_mixing_matrix(5, &[8, 1], 3);
        for k in 0..5 {
            assert_eq!(c.gamma[(k, 0)], a.gamma[(k, 6)]);
        }
    }

    #[test]
    fn config_validation() {
        let plan = BandPlan::reference();
        assert!(SnsConfig::new(vec![], 3, &plan).is_err());
        assert!(SnsConfig::new(vec![1, 1], 3, &plan).is_err());
        assert!(SnsConfig::new(vec![9], 3, &plan).is_err());
        assert!(SnsConfig::new(vec![0], 3, &plan).is_err());
        let c = SnsConfig::new(vec![1, 2], 3, &plan).unwrap();
        assert!(c.underdetermined(6));
        assert!(!c.underdetermined(4));
    }

    #[test]
    fn single_band_lands_at_baseband_with_its_gain() {
        let plan = BandPlan::reference();
        let beta: Vec<usize> = (1..=8).collect();
        let mut mix = make_mixing_matrix(1, &beta, 0);
        for c in 0..8 {
            mix.gamma[(0, c)] = C64::new(if beta[c] == 4 { 1.0 } else { 0.0 }, 0.0);
        }
        let u = uds_for(&[4], &plan);
        let z = mix_filter(&u, &mix, 0, &plan);
        let (lo, hi) = plan.band_extent(4).unwrap();
        assert_eq!(&z[..], &u.spectrum()[lo..hi]);
    }

    #[test]
    fn vacant_noiseless_output_is_zero() {
        let plan = BandPlan::reference();
        let cfg = SnsConfig::new(vec![1, 3, 5], 3, &plan).unwrap();
        let mix = make_mixing_matrix(3, cfg.beta(), 1);
        let out = digitize(
            &vec![SlotSignal::zeros(plan.samples_per_slot()); 2],
            &cfg,
            &mix,
            &plan,
        )
        .unwrap();
        assert_eq!(out.energy(&plan), 0.0);
    }

    #[test]
    fn low_rate_length() {
        let plan = crate::plan::BandPlan::new(&crate::plan::PlanConfig {
            n_bands: 6,
            band_bw_hz: 13.0e6 / 8.0,
            ..Default::default()
        })
        .unwrap();
        let cfg = SnsConfig::new(vec![1, 2], 3, &plan).unwrap();
        let mix = make_mixing_matrix(3, cfg.beta(), 1);
        let u = vec![uds_for(&[1], &plan); 4];
        let out = digitize(&u, &cfg, &mix, &plan).unwrap();
        assert_eq!((out.k_branches(), out.antennas()), (3, 4));
        assert_eq!(out.samples(2, 3, &plan).len(), 512);
    }

    #[test]
    fn energy_matches_time_domain() {
        let plan = BandPlan::reference();
        let cfg = SnsConfig::new(vec![2, 6], 2, &plan).unwrap();
        let mix = make_mixing_matrix(2, cfg.beta(), 5);
        let out = digitize(&[uds_for(&[2, 6], &plan)], &cfg, &mix, &plan).unwrap();
        let direct: f64 = (0..2)
            .map(|k| crate::dsp::energy(&out.samples(k, 0, &plan)))
            .sum();
        assert!((direct - out.energy(&plan)).abs() < 1e-9 * direct);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use crate::dsp::{SlotSignal, C64};
    use crate::plan::PlanConfig;
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn digitizer_is_linear(seed in 0u64..1000, a in 0.1f64..3.0, mask in 1u16..256) {
            let plan = BandPlan::new(&PlanConfig { samples_per_slot: 1024, ..PlanConfig::default() }).unwrap();
            let n = plan.samples_per_slot();
            let beta: Vec<usize> = (1..=8).filter(|b| mask & (1 << (b - 1)) != 0).collect();
            let cfg = SnsConfig::new(beta.clone(), 5, &plan).unwrap();
            let mix = make_mixing_matrix(5, &beta, seed);
            let mut rng = rng::stream(seed, Domain::Scenario, 0);
            let mut draw = || -> Vec<C64> {
                (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
            };
            let (x, y) = (draw(), draw());
            let sum: Vec<C64> = x.iter().zip(&y).map(|(p, q)| p * a + q).collect();
            let dig = |v: Vec<C64>| digitize(&[SlotSignal::from_spectrum(v)], &cfg, &mix, &plan).unwrap();
            let (zx, zy, zs) = (dig(x), dig(y), dig(sum));
            for k in 0..5 {
                for ((s, p), q) in zs.bins(k, 0).iter().zip(zx.bins(k, 0)).zip(zy.bins(k, 0)) {
                    prop_assert!((s - (p * a + q)).norm() <= 1e-9 * (1.0 + s.norm()));
                }
            }
        }
    }
}
