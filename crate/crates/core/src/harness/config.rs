use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::array::GeometryPreset;
use crate::error::{Result, UwasError};
use crate::ldm::{LdmParams, Policy, Transitions};
use crate::plan::{BandPlan, PlanConfig};
use crate::sensing::SensingParams;

pub const CASE1_P10: [f64; 8] = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6];
pub const CASE1_P01: [f64; 8] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];
pub const CASE2_P01: [f64; 8] = [0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6];

/// Occupancy statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OccupancyCase {
    /// Sparse spectrum.
    Case1,
    /// Dense spectrum.
    Case2,
    Custom {
        p10: Vec<f64>,
        p01: Vec<f64>,
    },
}

impl OccupancyCase {
    pub fn probabilities(&self, n_bands: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (p10, p01) = match self {
            OccupancyCase::Case1 => (CASE1_P10.to_vec(), CASE1_P01.to_vec()),
            OccupancyCase::Case2 => (CASE1_P10.to_vec(), CASE2_P01.to_vec()),
            OccupancyCase::Custom { p10, p01 } => (p10.clone(), p01.clone()),
        };
        if p10.len() != n_bands || p01.len() != n_bands {
            return Err(UwasError::Config(format!(
                "occupancy statistics cover {} / {} bands, plan has {n_bands}",
                p10.len(),
                p01.len()
            )));
        }
        Ok((p10, p01))
    }

    pub fn transitions(&self, n_bands: usize) -> Result<Transitions> {
        let (p10, p01) = self.probabilities(n_bands)?;
        Ok(Transitions::from_p10_p01(&p10, &p01))
    }
}

impl FromStr for OccupancyCase {
    type Err = UwasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "case1" | "1" => Ok(OccupancyCase::Case1),
            "case2" | "2" => Ok(OccupancyCase::Case2),
            _ => Err(UwasError::Config(format!("unknown occupancy case '{s}'"))),
        }
    }
}

/// Receiver architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    /// Sub-Nyquist digitizer with compressive sensing.
    Sns,
    /// Nyquist-rate reference: per-band isolation and energy detection.
    Nyquist,
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Sns => "sns",
            SamplingMode::Nyquist => "nyquist",
        })
    }
}

impl FromStr for SamplingMode {
    type Err = UwasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sns" => Ok(SamplingMode::Sns),
            "nyquist" | "ns" => Ok(SamplingMode::Nyquist),
            _ => Err(UwasError::Config(format!("unknown sampling mode '{s}'"))),
        }
    }
}

/// Which digitized data feed the direction estimator in SNS mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DoaInput {
    /// Per-band signals separated from all branches with the known mixing
    /// coefficients of the detected support; one estimate per band.
    Demixed,
    /// Joint co-array MUSIC on the first branch of every antenna.
    Branch,
}

/// Cartesian sweep axes for the `sweep` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepAxes {
    pub geometries: Vec<GeometryPreset>,
    pub gains_db: Vec<f64>,
    pub policies: Vec<Policy>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        Self {
            geometries: GeometryPreset::ALL.to_vec(),
            gains_db: vec![0.0, 2.0, 6.0, 10.0],
            policies: Policy::ALL.to_vec(),
        }
    }
}

/// Full experiment description, loadable from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plan: PlanConfig,
    pub occupancy: OccupancyCase,
    pub geometry: GeometryPreset,
    pub policies: Vec<Policy>,
    pub k_branches: usize,
    pub gains_db: Vec<f64>,
    pub slots: usize,
    pub seeds: Vec<u64>,
    pub mode: SamplingMode,
    pub doa_input: DoaInput,
    pub doa_tolerance_deg: f64,
    /// In-band SNR of a unit-power band at 0 dB receiver gain.
    pub snr_db: f64,
    /// Number of transmit directions `M`; `N + 1` must be divisible by it.
    pub directions: usize,
    /// Range from which per-direction angles are drawn.
    pub doa_range_deg: [f64; 2],
    pub min_separation_deg: f64,
    /// Fixed per-direction angles; drawn per seed when empty.
    pub direction_angles_deg: Vec<f64>,
    /// Reference tone amplitude relative to the per-band RMS amplitude.
    pub prs_amplitude: f64,
    pub sensing: SensingParams,
    pub ldm: LdmParams,
    /// Dump MUSIC pseudo-spectra per slot.
    pub dump_spectra: bool,
    pub sweep: SweepAxes,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            plan: PlanConfig::default(),
            occupancy: OccupancyCase::Case1,
            geometry: GeometryPreset::Sparse4,
            policies: Policy::ALL.to_vec(),
            k_branches: 5,
            gains_db: vec![10.0],
            slots: 10_000,
            seeds: (0..20).collect(),
            mode: SamplingMode::Sns,
            doa_input: DoaInput::Demixed,
            doa_tolerance_deg: 2.0,
            snr_db: 0.0,
            directions: 3,
            doa_range_deg: [20.0, 160.0],
            min_separation_deg: 15.0,
            direction_angles_deg: Vec::new(),
            prs_amplitude: 0.5,
            sensing: SensingParams::default(),
            ldm: LdmParams::default(),
            dump_spectra: false,
            sweep: SweepAxes::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn band_plan(&self) -> Result<BandPlan> {
        BandPlan::new(&self.plan)
    }

    /// Checks everything that can be checked before a run starts.
    pub fn validate(&self) -> Result<()> {
        let plan = self.band_plan()?;
        let (p10, p01) = self.occupancy.probabilities(plan.n_bands())?;
        if p10.iter().chain(&p01).any(|p| !(0.0..=1.0).contains(p)) {
            return Err(UwasError::Config(
                "transition probabilities must lie in [0, 1]".into(),
            ));
        }
        if self.policies.is_empty() {
            return Err(UwasError::Config("at least one policy is required".into()));
        }
        if self.k_branches == 0 {
            return Err(UwasError::Config("k_branches must be positive".into()));
        }
        if self.gains_db.is_empty() || self.seeds.is_empty() {
            return Err(UwasError::Config(
                "gains_db and seeds must not be empty".into(),
            ));
        }
        if self.directions == 0 || (plan.n_bands() + 1) % self.directions != 0 {
            return Err(UwasError::Config(format!(
                "{} bands plus SS cannot be split into {} directions",
                plan.n_bands(),
                self.directions
            )));
        }
        let [lo, hi] = self.doa_range_deg;
        if !(0.0 < lo && lo < hi && hi < 180.0) {
            return Err(UwasError::Config(
                "doa_range_deg must satisfy 0 < lo < hi < 180".into(),
            ));
        }
        if !self.direction_angles_deg.is_empty() {
            if self.direction_angles_deg.len() != self.directions {
                return Err(UwasError::Config(format!(
                    "{} direction angles given for {} directions",
                    self.direction_angles_deg.len(),
                    self.directions
                )));
            }
            if self
                .direction_angles_deg
                .iter()
                .any(|a| !(0.0 < *a && *a < 180.0))
            {
                return Err(UwasError::Config(
                    "direction angles must lie in (0, 180)".into(),
                ));
            }
        } else if self.min_separation_deg * (self.directions as f64 - 1.0) > hi - lo {
            return Err(UwasError::Config(
                "direction range too narrow for the requested separation".into(),
            ));
        }
        if !(self.doa_tolerance_deg >= 0.0)
            || !self.snr_db.is_finite()
            || !(self.prs_amplitude > 0.0)
        {
            return Err(UwasError::Config(
                "doa_tolerance_deg, snr_db and prs_amplitude must be finite and sensible".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ldm.epsilon) || !(self.ldm.delta >= 0.0) {
            return Err(UwasError::Config(
                "epsilon must lie in [0, 1] and delta be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let s = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&s).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            geometry = "3-Sparse"
            occupancy = "case2"
            policies = ["WUCB"]
            slots = 50
            [ldm]
            epsilon = 0.2
            "#,
        )
        .unwrap();
        assert_eq!(cfg.geometry, GeometryPreset::Sparse3);
        assert_eq!(cfg.occupancy, OccupancyCase::Case2);
        assert_eq!(cfg.ldm.delta, 2.0);
        assert_eq!(cfg.k_branches, 5);
    }

    #[test]
    fn custom_occupancy() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            [occupancy.custom]
            p10 = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
            p01 = [0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5]
            "#,
        )
        .unwrap();
        assert!(matches!(cfg.occupancy, OccupancyCase::Custom { .. }));
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_toml_str("slotz = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("directions = 2").is_err());
        assert!(ExperimentConfig::from_toml_str("geometry = \"5-ULA\"").is_err());
        assert!(ExperimentConfig::from_toml_str("[plan]\nsamples_per_slot = 1000").is_err());
        assert!(
            ExperimentConfig::from_toml_str("[occupancy.custom]\np10 = [0.5]\np01 = [0.5]")
                .is_err()
        );
    }
}
