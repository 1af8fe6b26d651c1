//! CSV and JSON report files.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, UwasError};
use crate::ldm::Policy;
use crate::sensing::BandStatus;

use super::config::ExperimentConfig;
use super::experiment::{aggregate, PointResult, PolicyAggregate};
use super::metrics::RunSummary;
use super::run::{DoaRecord, SlotReport, SpectrumDump};

/// Column order of the per-slot CSV.
pub const SLOT_COLUMNS: [&str; 17] = [
    "t_s",
    "seed",
    "gain_db",
    "policy",
    "beta",
    "s_hat",
    "truth",
    "zeta",
    "source_count",
    "slot_pulse",
    "exploring",
    "expected_reward",
    "declared_vacant",
    "false_vacant",
    "doa_hits",
    "throughput",
    "doa",
];

/// One flattened CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SlotRow {
    t_s: usize,
    seed: u64,
    gain_db: f64,
    policy: Policy,
    beta: String,
    s_hat: String,
    truth: String,
    zeta: u8,
    source_count: usize,
    slot_pulse: u8,
    exploring: u8,
    expected_reward: f64,
    declared_vacant: usize,
    false_vacant: usize,
    doa_hits: usize,
    throughput: i64,
    doa: String,
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse()
            .map(Some)
            .map_err(|_| UwasError::Config(format!("bad number '{s}' in doa column")))
    }
}

impl SlotRow {
    fn new(r: &SlotReport, tolerance_deg: f64) -> Self {
        let terms = r.terms(tolerance_deg);
        Self {
            t_s: r.t_s,
            seed: r.seed,
            gain_db: r.gain_db,
            policy: r.policy,
            beta: r
                .beta
                .iter()
                .map(|b| b.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            s_hat: r.s_hat.iter().map(|s| s.symbol()).collect(),
            truth: r.truth.iter().map(|&b| if b { '1' } else { '0' }).collect(),
            zeta: r.zeta as u8,
            source_count: r.source_count,
            slot_pulse: r.slot_pulse as u8,
            exploring: r.exploring as u8,
            expected_reward: r.expected_reward,
            declared_vacant: terms.declared_vacant,
            false_vacant: terms.false_vacant,
            doa_hits: terms.doa_hits,
            throughput: terms.throughput(),
            doa: r
                .doa
                .iter()
                .map(|d| format!("{}:{}:{}", d.band, opt(d.estimate), opt(d.truth)))
                .collect::<Vec<_>>()
                .join(";"),
        }
    }

    fn into_report(self) -> Result<SlotReport> {
        let bad =
            |what: &str| UwasError::Config(format!("malformed {what} column at slot {}", self.t_s));
        let beta = if self.beta.is_empty() {
            Vec::new()
        } else {
            self.beta
                .split(';')
                .map(|b| b.parse().map_err(|_| bad("beta")))
                .collect::<Result<Vec<usize>>>()?
        };
        let s_hat = self
            .s_hat
            .chars()
            .map(|c| BandStatus::from_symbol(c).ok_or_else(|| bad("s_hat")))
            .collect::<Result<Vec<_>>>()?;
        let truth = self
            .truth
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(bad("truth")),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut doa = Vec::new();
        for rec in self.doa.split(';').filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = rec.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("doa"));
            }
            doa.push(DoaRecord {
                band: parts[0].parse().map_err(|_| bad("doa"))?,
                estimate: parse_opt(parts[1])?,
                truth: parse_opt(parts[2])?,
            });
        }
        Ok(SlotReport {
            t_s: self.t_s,
            seed: self.seed,
            gain_db: self.gain_db,
            policy: self.policy,
            beta,
            s_hat,
            truth,
            zeta: self.zeta != 0,
            source_count: self.source_count,
            slot_pulse: self.slot_pulse != 0,
            exploring: self.exploring != 0,
            expected_reward: self.expected_reward,
            doa,
        })
    }
}

/// Writes the per-slot CSV. An empty stream yields only the header.
pub fn write_slot_csv<W: Write>(w: W, reports: &[SlotReport], tolerance_deg: f64) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(SLOT_COLUMNS)?;
    for r in reports {
        wr.serialize(SlotRow::new(r, tolerance_deg))?;
    }
    wr.flush()?;
    Ok(())
}

/// Parses a per-slot CSV back into reports.
pub fn read_slot_csv<R: Read>(r: R) -> Result<Vec<SlotReport>> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != SLOT_COLUMNS {
        return Err(UwasError::Config("unexpected CSV header".into()));
    }
    rd.deserialize::<SlotRow>()
        .map(|row| row?.into_report())
        .collect()
}

/// Summary file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
    pub aggregates: Vec<PolicyAggregate>,
}

/// Paths of the files written by [`emit_reports`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub slots_csv: PathBuf,
    pub summary_json: PathBuf,
    pub spectra_csv: Option<PathBuf>,
}

/// Writes `slots.csv`, `summary.json` and, when spectra were kept,
/// `spectra.csv` into `dir`.
pub fn emit_reports(
    dir: &Path,
    cfg: &ExperimentConfig,
    points: &[PointResult],
) -> Result<OutputPaths> {
    fs::create_dir_all(dir)?;
    let slots_csv = dir.join("slots.csv");
    let reports: Vec<SlotReport> = points
        .iter()
        .flat_map(|p| p.streams.iter().flatten().cloned())
        .collect();
    write_slot_csv(
        fs::File::create(&slots_csv)?,
        &reports,
        cfg.doa_tolerance_deg,
    )?;

    let runs: Vec<RunSummary> = points
        .iter()
        .flat_map(|p| p.summaries.iter().cloned())
        .collect();
    let summary = Summary {
        config: cfg.clone(),
        aggregates: aggregate(&runs),
        runs,
    };
    let summary_json = dir.join("summary.json");
    fs::write(&summary_json, serde_json::to_string_pretty(&summary)?)?;

    let spectra_csv = if cfg.dump_spectra {
        let path = dir.join("spectra.csv");
        let dumps: Vec<(u64, f64, &SpectrumDump)> = points
            .iter()
            .flat_map(|p| p.spectra.iter().map(move |s| (p.seed, p.gain_db, s)))
            .collect();
        write_spectra_csv(fs::File::create(&path)?, &dumps)?;
        Some(path)
    } else {
        None
    };
    Ok(OutputPaths {
        slots_csv,
        summary_json,
        spectra_csv,
    })
}

/// One row per spectrum: `seed,gain_db,policy,t_s,band,p_0,...,p_360`.
fn write_spectra_csv<W: Write>(w: W, dumps: &[(u64, f64, &SpectrumDump)]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
    let mut header = vec![
        "seed".to_string(),
        "gain_db".into(),
        "policy".into(),
        "t_s".into(),
        "band".into(),
    ];
    header.extend(crate::doa::angle_grid().iter().map(|a| format!("p_{a}")));
    wr.write_record(&header)?;
    for (seed, gain, d) in dumps {
        let mut rec = vec![
            seed.to_string(),
            gain.to_string(),
            d.policy.to_string(),
            d.t_s.to_string(),
            d.band.to_string(),
        ];
        rec.extend(d.values.iter().map(|v| v.to_string()));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SlotReport {
        SlotReport {
            t_s: 7,
            seed: 3,
            gain_db: 10.0,
            policy: Policy::Wucb,
            beta: vec![1, 3, 4],
            s_hat: vec![
                BandStatus::Vacant,
                BandStatus::Unsensed,
                BandStatus::Busy,
                BandStatus::Vacant,
            ],
            truth: vec![false, true, true, true],
            zeta: false,
            source_count: 1,
            slot_pulse: true,
            exploring: false,
            expected_reward: 1.0 / 3.0,
            doa: vec![DoaRecord {
                band: 3,
                estimate: Some(62.5),
                truth: Some(62.0),
            }],
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut other = sample();
        other.doa = vec![DoaRecord {
            band: 2,
            estimate: None,
            truth: None,
        }];
        other.beta.clear();
        let reports = vec![sample(), other];
        let mut buf = Vec::new();
        write_slot_csv(&mut buf, &reports, 2.0).unwrap();
        assert_eq!(read_slot_csv(buf.as_slice()).unwrap(), reports);
    }

    #[test]
    fn derived_columns() {
        let mut buf = Vec::new();
        write_slot_csv(&mut buf, &[sample()], 2.0).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        // bands 1 and 4 declared vacant, band 4 truly busy, one DoA hit
        assert_eq!(&row[12..16], &["2", "1", "1", "2"]);
    }

    #[test]
    fn empty_stream_is_header_only() {
        let mut buf = Vec::new();
        write_slot_csv(&mut buf, &[], 2.0).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            SLOT_COLUMNS.join(",") + "\n"
        );
    }
}
