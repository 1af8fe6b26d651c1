use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use uwas_core::acceptance::{run_all, AcceptanceOptions, SINGLE_USER};
use uwas_core::array::GeometryPreset;
use uwas_core::harness::{
    aggregate, emit_reports, run_experiment, DoaSweep, ExperimentConfig, SamplingMode,
};
use uwas_core::ldm::Policy;

#[derive(Parser)]
#[command(
    name = "uwas",
    version,
    about = "Ultra-wideband angular spectrum sensing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write slots.csv and summary.json.
    Run(Common),
    /// Sweep geometries and gains; writes sweep.csv and doa_sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// DoA sweep users as `band:angle` pairs.
        #[arg(long, value_delimiter = ',')]
        users: Vec<String>,
    },
    /// Run the acceptance criteria; exits nonzero if any fails.
    Verify,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seeds to run (comma separated).
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    slots: Option<usize>,
    /// Policies to run (comma separated): IMP, WUCB, OLDM.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<Policy>,
    /// Array preset: 2-ULA, 3-ULA, 4-ULA, 3-Sparse, 4-Sparse.
    #[arg(long)]
    geometry: Option<GeometryPreset>,
    /// Receiver gains in dB (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    gain_db: Vec<f64>,
    /// sns or nyquist.
    #[arg(long)]
    mode: Option<SamplingMode>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                ExperimentConfig::load(p).with_context(|| format!("loading {}", p.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(s) = self.slots {
            cfg.slots = s;
        }
        if !self.policy.is_empty() {
            cfg.policies = self.policy.clone();
            cfg.sweep.policies = self.policy.clone();
        }
        if let Some(g) = self.geometry {
            cfg.geometry = g;
            cfg.sweep.geometries = vec![g];
        }
        if !self.gain_db.is_empty() {
            cfg.gains_db = self.gain_db.clone();
            cfg.sweep.gains_db = self.gain_db.clone();
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_users(raw: &[String]) -> Result<Vec<(usize, f64)>> {
    if raw.is_empty() {
        return Ok(vec![SINGLE_USER]);
    }
    raw.iter()
        .map(|u| {
            let (b, a) = u
                .split_once(':')
                .with_context(|| format!("user '{u}' is not band:angle"))?;
            Ok((b.trim().parse()?, a.trim().parse()?))
        })
        .collect()
}

fn run(common: &Common) -> Result<()> {
    let cfg = common.config()?;
    let points = run_experiment(&cfg)?;
    let paths = emit_reports(&common.out_dir, &cfg, &points)?;
    let runs: Vec<_> = points
        .iter()
        .flat_map(|p| p.summaries.iter().cloned())
        .collect();
    println!("policy  gain_db  throughput(mean±std)  failures(mean)");
    for a in aggregate(&runs) {
        println!(
            "{:<6}  {:>7}  {:>10.1} ± {:<8.1}  {:.1}",
            a.policy.to_string(),
            a.gain_db,
            a.throughput.mean,
            a.throughput.std,
            a.failures.mean
        );
    }
    info!("wrote {}", paths.slots_csv.display());
    Ok(())
}

fn sweep(common: &Common, users: &[String]) -> Result<()> {
    let base = common.config()?;
    let users = parse_users(users)?;
    fs::create_dir_all(&common.out_dir)?;
    let mut agg = csv::Writer::from_path(common.out_dir.join("sweep.csv"))?;
    agg.write_record([
        "geometry",
        "gain_db",
        "policy",
        "seeds",
        "throughput_mean",
        "throughput_std",
        "failures_mean",
        "tail_regret_mean",
    ])?;
    let mut doa = csv::Writer::from_path(common.out_dir.join("doa_sweep.csv"))?;
    doa.write_record([
        "geometry",
        "mode",
        "gain_db",
        "doa_error_deg",
        "truth_error_deg",
        "deviation_deg",
        "misses",
        "failures",
    ])?;
    for &geometry in &base.sweep.geometries {
        let mut cfg = base.clone();
        cfg.geometry = geometry;
        cfg.gains_db = base.sweep.gains_db.clone();
        cfg.policies = base.sweep.policies.clone();
        info!("closed loop on {geometry}");
        let points = run_experiment(&cfg)?;
        let runs: Vec<_> = points
            .iter()
            .flat_map(|p| p.summaries.iter().cloned())
            .collect();
        for a in aggregate(&runs) {
            agg.write_record([
                geometry.to_string(),
                a.gain_db.to_string(),
                a.policy.to_string(),
                a.throughput.n.to_string(),
                a.throughput.mean.to_string(),
                a.throughput.std.to_string(),
                a.failures.mean.to_string(),
                a.tail_regret_rate
                    .map(|s| s.mean.to_string())
                    .unwrap_or_default(),
            ])?;
        }
        for mode in [SamplingMode::Sns, SamplingMode::Nyquist] {
            info!("DoA sweep on {geometry} ({mode})");
            let mut c = cfg.clone();
            c.mode = mode;
            let r = DoaSweep::from_experiment(&c, users.clone(), cfg.seeds[0]).run()?;
            for (gi, g) in r.gains_db.iter().enumerate() {
                let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
                doa.write_record([
                    geometry.to_string(),
                    mode.to_string(),
                    g.to_string(),
                    opt(r.doa_error(gi)),
                    opt(r.truth_error(gi)),
                    r.deviation(gi).to_string(),
                    r.misses(gi).to_string(),
                    r.failures[gi].to_string(),
                ])?;
            }
        }
    }
    agg.flush()?;
    doa.flush()?;
    println!(
        "wrote {} and {}",
        common.out_dir.join("sweep.csv").display(),
        common.out_dir.join("doa_sweep.csv").display()
    );
    Ok(())
}

fn verify() -> Result<()> {
    let outcomes = run_all(&AcceptanceOptions::default(), |o| println!("{o}"));
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        bail!("{failed} acceptance criteria failed");
    }
    println!("all {} acceptance criteria passed", outcomes.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => run(c),
        Command::Sweep { common, users } => sweep(common, users),
        Command::Verify => verify(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
