//! Antenna array geometry and the propagation channel.
//!
//! Steering follows the narrowband model: a band at RF carrier `f` arriving
//! from angle `theta` reaches element `l` with phase `2 pi f tau_l(theta)`,
//! `tau_l = p_l d cos(theta) / c`. The phase reference is injected after the
//! antenna by cable, so it carries no steering, and each front end then
//! rotates the combined signal by its own static offset.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{complex_gaussian, SlotSignal, C64};
use crate::error::{Result, UwasError};
use crate::plan::{BandPlan, SPEED_OF_LIGHT};
use crate::rng::{self, Domain};
use crate::traffic::BandWaveform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrayKind {
    Ula,
    Sparse,
}

/// Element positions in multiples of the unit spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    positions: Vec<usize>,
    unit_spacing_m: f64,
    aperture: usize,
    kind: ArrayKind,
}

impl ArrayGeometry {
    pub fn ula(elements: usize, unit_spacing_m: f64) -> Result<Self> {
        Self::from_positions((0..elements).collect(), unit_spacing_m)
    }

    /// Minimum sparse ruler arrays for `L` in 2..=4.
    pub fn sparse_ruler(elements: usize, unit_spacing_m: f64) -> Result<Self> {
        let positions = match elements {
            2 => vec![0, 1],
            3 => vec![0, 1, 3],
            4 => vec![0, 1, 3, 5],
            other => return Err(UwasError::UnsupportedArray(other)),
        };
        Self::from_positions(positions, unit_spacing_m)
    }

    /// Validates that `positions` start at zero, increase, and cover every lag.
    pub fn from_positions(positions: Vec<usize>, unit_spacing_m: f64) -> Result<Self> {
        if positions.is_empty() || positions[0] != 0 {
            return Err(UwasError::Config("array positions must start at 0".into()));
        }
        if positions.windows(2).any(|w| w[1] <= w[0]) {
            return Err(UwasError::Config(
                "array positions must be strictly increasing".into(),
            ));
        }
        let aperture = positions[positions.len() - 1] + 1;
        let mut covered = vec![false; aperture];
        for &a in &positions {
            for &b in &positions {
                if a >= b {
                    covered[a - b] = true;
                }
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(UwasError::IncompleteCoarray(positions));
        }
        let kind = if aperture == positions.len() {
            ArrayKind::Ula
        } else {
            ArrayKind::Sparse
        };
        Ok(Self {
            positions,
            unit_spacing_m,
            aperture,
            kind,
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// Physical element count `L`.
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Virtual aperture `L_s` of the difference co-array.
    pub fn aperture(&self) -> usize {
        self.aperture
    }

    pub fn kind(&self) -> ArrayKind {
        self.kind
    }

    pub fn unit_spacing_m(&self) -> f64 {
        self.unit_spacing_m
    }

    /// Sorted, deduplicated `|p_a - p_b|`.
    pub fn difference_set(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self
            .positions
            .iter()
            .flat_map(|&a| self.positions.iter().map(move |&b| a.abs_diff(b)))
            .collect();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Named array arrangements used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeometryPreset {
    #[serde(rename = "2-ULA")]
    Ula2,
    #[serde(rename = "3-ULA")]
    Ula3,
    #[serde(rename = "4-ULA")]
    Ula4,
    #[serde(rename = "3-Sparse")]
    Sparse3,
    #[serde(rename = "4-Sparse")]
    Sparse4,
}

impl GeometryPreset {
    pub const ALL: [GeometryPreset; 5] = [
        GeometryPreset::Ula2,
        GeometryPreset::Ula3,
        GeometryPreset::Sparse3,
        GeometryPreset::Ula4,
        GeometryPreset::Sparse4,
    ];

    pub fn build(self, plan: &BandPlan) -> ArrayGeometry {
        let d = plan.unit_spacing_m();
        let g = match self {
            GeometryPreset::Ula2 => ArrayGeometry::ula(2, d),
            GeometryPreset::Ula3 => ArrayGeometry::ula(3, d),
            GeometryPreset::Ula4 => ArrayGeometry::ula(4, d),
            GeometryPreset::Sparse3 => ArrayGeometry::sparse_ruler(3, d),
            GeometryPreset::Sparse4 => ArrayGeometry::sparse_ruler(4, d),
        };
        g.expect("preset geometries are valid")
    }
}

impl fmt::Display for GeometryPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GeometryPreset::Ula2 => "2-ULA",
            GeometryPreset::Ula3 => "3-ULA",
            GeometryPreset::Ula4 => "4-ULA",
            GeometryPreset::Sparse3 => "3-Sparse",
            GeometryPreset::Sparse4 => "4-Sparse",
        };
        f.write_str(s)
    }
}

impl FromStr for GeometryPreset {
    type Err = UwasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "2-ula" => Ok(GeometryPreset::Ula2),
            "3-ula" => Ok(GeometryPreset::Ula3),
            "4-ula" => Ok(GeometryPreset::Ula4),
            "3-sparse" => Ok(GeometryPreset::Sparse3),
            "4-sparse" => Ok(GeometryPreset::Sparse4),
            _ => Err(UwasError::Config(format!("unknown geometry '{s}'"))),
        }
    }
}

/// A band arriving from a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalSource {
    pub band_index: usize,
    pub doa_deg: f64,
    /// RF carrier of the band, Hz.
    pub carrier_hz: f64,
}

/// Receiver front-end impairments.
#[derive(Debug, Clone, PartialEq)]
pub struct AfeImpairment {
    pub phase_offsets: Vec<f64>,
    /// Complex noise variance per sample at 0 dB receiver gain.
    pub noise_power: f64,
    pub gain_db: f64,
}

impl AfeImpairment {
    /// Offsets drawn uniformly on `[0, 2 pi)` from the run's phase stream.
    pub fn random(elements: usize, noise_power: f64, gain_db: f64, seed: u64) -> Self {
        let mut rng = rng::stream(seed, Domain::AfePhase, 0);
        let phase_offsets = (0..elements).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
        Self {
            phase_offsets,
            noise_power,
            gain_db,
        }
    }

    pub fn ideal(elements: usize) -> Self {
        Self {
            phase_offsets: vec![0.0; elements],
            noise_power: 0.0,
            gain_db: 0.0,
        }
    }

    /// Receiver gain raises SNR: the noise amplitude scales by `10^(-g/20)`.
    pub fn noise_std(&self) -> f64 {
        self.noise_power.sqrt() * 10f64.powf(-self.gain_db / 20.0)
    }
}

/// Noise variance per sample giving `snr_db` for a unit-power band, measured
/// inside that band's bandwidth.
pub fn noise_power_for_snr(snr_db: f64, plan: &BandPlan) -> f64 {
    let span = plan.samples_per_slot() as f64 / plan.band_bins() as f64;
    span * 10f64.powf(-snr_db / 10.0)
}

/// Time difference `tau_l(theta)` between element `l` and the reference element, seconds.
pub fn steering_delay(geometry: &ArrayGeometry, l: usize, doa_deg: f64) -> f64 {
    geometry.positions[l] as f64 * geometry.unit_spacing_m / SPEED_OF_LIGHT
        * doa_deg.to_radians().cos()
}

/// Steering phase `2 pi f tau_l(theta)` for a carrier at `carrier_hz`.
pub fn steering_phase(geometry: &ArrayGeometry, l: usize, doa_deg: f64, carrier_hz: f64) -> f64 {
    2.0 * PI * carrier_hz * steering_delay(geometry, l, doa_deg)
}

/// Unit-magnitude complex exponential at the reference tone bin.
pub fn generate_prs(plan: &BandPlan) -> SlotSignal {
    let n = plan.samples_per_slot();
    let mut spec = vec![C64::new(0.0, 0.0); n];
    spec[plan.prs_tone_bin()] = C64::new(n as f64, 0.0);
    SlotSignal::from_spectrum(spec)
}

/// Per-antenna signals before (`x`) and after (`y`) reference injection and
/// front-end rotation.
#[derive(Debug, Clone)]
pub struct Received {
    pub x: Vec<SlotSignal>,
    pub y: Vec<SlotSignal>,
}

/// Key of the noise stream for one slot.
#[derive(Debug, Clone, Copy)]
pub struct NoiseKey {
    pub seed: u64,
    pub slot: u64,
}

/// Complex white Gaussian noise of unit variance per sample, for antenna `l`.
///
/// Drawn directly as its DFT (i.i.d. bins of variance `n`).
pub fn unit_noise(n: usize, key: NoiseKey, l: usize) -> SlotSignal {
    let mut rng = rng::stream(key.seed, Domain::Noise, rng::pair(key.slot, l as u64));
    let spec = (0..n)
        .map(|_| complex_gaussian(&mut rng, n as f64))
        .collect();
    SlotSignal::from_spectrum(spec)
}

/// Propagates the active band waveforms onto the array.
///
/// `x_l = sum_i a_i e^{j w_i tau_l(theta_i)} + eta_l` and
/// `y_l = (x_l + A_prs p) e^{j phi_l}`.
pub fn propagate(
    waveforms: &[BandWaveform],
    sources: &[DirectionalSource],
    geometry: &ArrayGeometry,
    impairment: &AfeImpairment,
    prs: &SlotSignal,
    prs_amplitude: f64,
    noise: NoiseKey,
) -> Result<Received> {
    let n = prs.len();
    let elements = geometry.len();
    if impairment.phase_offsets.len() != elements {
        return Err(UwasError::LengthMismatch {
            expected: elements,
            actual: impairment.phase_offsets.len(),
        });
    }
    let mut matched = Vec::with_capacity(waveforms.len());
    for w in waveforms {
        if w.signal.len() != n {
            return Err(UwasError::LengthMismatch {
                expected: n,
                actual: w.signal.len(),
            });
        }
        let src = sources
            .iter()
            .find(|s| s.band_index == w.band_index)
            .ok_or(UwasError::MissingDoa(w.band_index))?;
        matched.push((w, src));
    }

    let std = impairment.noise_std();
    let mut x = Vec::with_capacity(elements);
    let mut y = Vec::with_capacity(elements);
    for l in 0..elements {
        let mut xl = if std > 0.0 {
            unit_noise(n, noise, l).scaled(C64::new(std, 0.0))
        } else {
            SlotSignal::zeros(n)
        };
        for (w, src) in &matched {
            let phase = steering_phase(geometry, l, src.doa_deg, src.carrier_hz);
            let rot = C64::from_polar(1.0, phase);
            for (a, b) in xl.spectrum_mut().iter_mut().zip(w.signal.spectrum()) {
                *a += b * rot;
            }
        }
        let mut yl = xl.clone();
        yl.add_scaled_range(prs, C64::new(prs_amplitude, 0.0), 0, n);
        let yl = yl.scaled(C64::from_polar(1.0, impairment.phase_offsets[l]));
        x.push(xl);
        y.push(yl);
    }
    Ok(Received { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::generate_scfdma;

    #[test]
    fn sparse_rulers() {
        let g3 = ArrayGeometry::sparse_ruler(3, 0.0625).unwrap();
        assert_eq!(g3.positions(), &[0, 1, 3]);
        assert_eq!(g3.aperture(), 4);
        let g4 = ArrayGeometry::sparse_ruler(4, 0.0625).unwrap();
        assert_eq!(g4.positions(), &[0, 1, 3, 5]);
        assert_eq!(g4.aperture(), 6);
        assert_eq!(g4.difference_set(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(g4.kind(), ArrayKind::Sparse);
        let g2 = ArrayGeometry::sparse_ruler(2, 0.0625).unwrap();
        assert_eq!(g2.kind(), ArrayKind::Ula);
        assert!(ArrayGeometry::sparse_ruler(5, 0.0625).is_err());
        assert!(ArrayGeometry::from_positions(vec![0, 2, 3, 7], 0.0625).is_err());
        assert!(ArrayGeometry::from_positions(vec![0, 1, 4, 9], 0.0625).is_err());
        assert!(ArrayGeometry::from_positions(vec![0, 2, 5, 6], 0.0625).is_ok());
    }

    #[test]
    fn presets_parse_and_display() {
        for p in GeometryPreset::ALL {
            assert_eq!(p.to_string().parse::<GeometryPreset>().unwrap(), p);
        }
        let plan = BandPlan::reference();
        assert_eq!(GeometryPreset::Ula4.build(&plan).aperture(), 4);
        assert_eq!(GeometryPreset::Sparse3.build(&plan).aperture(), 4);
    }

    #[test]
    fn delays() {
        let g = ArrayGeometry::sparse_ruler(4, 0.0625).unwrap();
        for l in 0..4 {
            assert!(steering_delay(&g, l, 90.0).abs() < 1e-20);
        }
        assert_eq!(steering_delay(&g, 0, 33.0), 0.0);
        let tau = steering_delay(&g, 3, 0.0);
        assert!((tau - 1.0417e-9).abs() < 1e-13, "tau = {tau}");
    }

    #[test]
    fn prs_is_a_unit_tone() {
        let plan = BandPlan::reference();
        let p = generate_prs(&plan).samples();
        let step = 2.0 * PI * plan.prs_tone_bin() as f64 / plan.samples_per_slot() as f64;
        for (i, v) in p.iter().enumerate() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
            if i > 0 {
                let d = (v * p[i - 1].conj()).arg();
                assert!((d - step).abs() < 1e-9);
            }
        }
        let pg = generate_prs(&plan).periodogram();
        let peak = pg
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, plan.prs_tone_bin());
        // 200 kHz at 13 MHz over 4096 bins.
        assert_eq!(peak, (0.2 / 13.0 * 4096.0_f64).round() as usize);
    }

    #[test]
    fn broadside_source_reaches_all_elements_equally() {
        let plan = BandPlan::reference();
        let g = ArrayGeometry::sparse_ruler(4, plan.unit_spacing_m()).unwrap();
        let w = generate_scfdma(2, &plan, 1).unwrap();
        let src = DirectionalSource {
            band_index: 2,
            doa_deg: 90.0,
            carrier_hz: plan.rf_carrier_hz(2),
        };
        let rx = propagate(
            &[w],
            &[src],
            &g,
            &AfeImpairment::ideal(4),
            &generate_prs(&plan),
            0.5,
            NoiseKey { seed: 0, slot: 0 },
        )
        .unwrap();
        for l in 1..4 {
            for (a, b) in rx.x[l].spectrum().iter().zip(rx.x[0].spectrum()) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
            }
        }
    }

    #[test]
    fn missing_doa_is_an_error() {
        let plan = BandPlan::reference();
        let g = ArrayGeometry::ula(2, plan.unit_spacing_m()).unwrap();
        let w = generate_scfdma(2, &plan, 1).unwrap();
        let err = propagate(
            &[w],
            &[],
            &g,
            &AfeImpairment::ideal(2),
            &generate_prs(&plan),
            0.5,
            NoiseKey { seed: 0, slot: 0 },
        );
        assert!(matches!(err, Err(UwasError::MissingDoa(2))));
    }

    #[test]
    fn gain_scales_noise_std() {
        let mut imp = AfeImpairment::ideal(1);
        imp.noise_power = 4.0;
        let s0 = imp.noise_std();
        imp.gain_db = 20.0;
        assert!((s0 / imp.noise_std() - 10.0).abs() < 1e-12);
    }
}
