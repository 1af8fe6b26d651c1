//! Acceptance suite: each criterion runs its experiment and reports one
//! PASS/FAIL line with the measured numbers.

use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::array::{generate_prs, AfeImpairment, GeometryPreset};
use crate::calibration::SlotSync;
use crate::doa::{
    coarray_extract, coarray_music, model_covariance, music, sample_covariance, spatial_smooth,
    Steering,
};
use crate::dsp::{complex_gaussian, wrap_phase, C64};
use crate::error::Result;
use crate::harness::config::{DoaInput, ExperimentConfig, OccupancyCase, SamplingMode};
use crate::harness::experiment::run_point;
use crate::harness::matching::match_angles;
use crate::harness::metrics::Stats;
use crate::harness::receiver::{DoaOutput, Receiver};
use crate::harness::run::{draw_directions, FrontEnd};
use crate::harness::sweep::{DoaSweep, DoaSweepResult};
use crate::ldm::{exhaustive_select, failure_probability, imp_select, objective, Policy};
use crate::plan::BandPlan;
use crate::rng::{self, Domain};
use crate::sensing::{BandStatus, SensingParams};
use crate::sns::{digitize, make_mixing_matrix, SnsConfig};
use crate::traffic::{direction_of, OccupancyProcess};

/// Result of one criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

/// Experiment sizes. Defaults are the stated acceptance protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceOptions {
    pub boundary_trials: usize,
    pub music_seeds: u64,
    pub music_snapshots: usize,
    pub throughput_seeds: u64,
    pub throughput_slots: usize,
    /// Slot length for the closed-loop throughput studies.
    pub throughput_samples_per_slot: usize,
    pub doa_slots: usize,
    pub property_trials: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        Self {
            boundary_trials: 500,
            music_seeds: 200,
            music_snapshots: 4096,
            throughput_seeds: 20,
            throughput_slots: 10_000,
            throughput_samples_per_slot: 1024,
            doa_slots: 1000,
            property_trials: 1000,
        }
    }
}

fn timed(
    id: u8,
    name: &'static str,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionOutcome {
    let t0 = Instant::now();
    let (passed, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionOutcome {
        id,
        name,
        passed,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn sns_receiver(plan: &BandPlan, geometry: GeometryPreset, mixing_seed: u64) -> Receiver {
    Receiver {
        plan: plan.clone(),
        geometry: geometry.build(plan),
        mode: SamplingMode::Sns,
        doa_input: DoaInput::Demixed,
        k_branches: 5,
        sensing: SensingParams::default(),
        mixing_seed,
        keep_spectra: false,
    }
}

fn noiseless_front(
    plan: &BandPlan,
    geometry: GeometryPreset,
    band_doa: Vec<f64>,
    seed: u64,
) -> FrontEnd {
    let g = geometry.build(plan);
    FrontEnd {
        impairment: AfeImpairment::random(g.len(), 0.0, 0.0, seed),
        geometry: g,
        plan: plan.clone(),
        prs: generate_prs(plan),
        prs_amplitude: 0.5,
        band_doa,
        seed,
    }
}

/// Criterion 1: noiseless sweep of the busy count over `beta = {1..8}` with
/// `K = 5` and the 4-element sparse ruler (`L_s = 6`).
pub fn sensing_boundary(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(1, "sensing boundary", || {
        let plan = BandPlan::reference();
        let beta: Vec<usize> = (1..=plan.n_bands()).collect();
        let l_s = GeometryPreset::Sparse4.build(&plan).aperture();
        let mut ok = true;
        let mut parts = Vec::new();
        for b in 1..=plan.n_bands() {
            let mut good = 0usize;
            for trial in 0..opts.boundary_trials {
                let seed = ((b as u64) << 20) | trial as u64;
                let mut rng = rng::stream(seed, Domain::Scenario, 0);
                let mut bands = beta.clone();
                bands.shuffle(&mut rng);
                let mut status = vec![false; plan.n_bands() + 1];
                status[0] = true;
                for &i in &bands[..b] {
                    status[i] = true;
                }
                let angles = draw_directions(seed, 3, [20.0, 160.0], 15.0);
                let band_doa = (0..=plan.n_bands())
                    .map(|i| direction_of(i, plan.n_bands(), 3).map(|m| angles[m - 1]))
                    .collect::<Result<Vec<f64>>>()?;
                let front = noiseless_front(&plan, GeometryPreset::Sparse4, band_doa.clone(), seed);
                let cal = front.receive(0, &status, &mut SlotSync::default())?;
                let a = sns_receiver(&plan, GeometryPreset::Sparse4, seed).analyze(&cal, &beta)?;
                let pass = if b < l_s {
                    let support = (1..=plan.n_bands())
                        .all(|i| (a.statuses[i - 1] == BandStatus::Busy) == status[i]);
                    let doa_exact = match &a.doa {
                        DoaOutput::PerBand(v) => {
                            v.len() == b
                                && v.iter().all(|&(band, est)| {
                                    est.is_some_and(|e| (e - band_doa[band]).abs() < 1e-9)
                                })
                        }
                        _ => false,
                    };
                    !a.failure && support && doa_exact
                } else {
                    a.failure
                };
                good += pass as usize;
            }
            let rate = good as f64 / opts.boundary_trials as f64;
            let need = if b < l_s { 0.99 } else { 1.0 };
            ok &= rate >= need;
            parts.push(format!("b={b}:{:.1}%", 100.0 * rate));
        }
        Ok((ok, parts.join(" ")))
    })
}

/// Criterion 2: the worked three-user example with one unselected busy band.
pub fn golden_scenario() -> CriterionOutcome {
    timed(2, "golden scenario", || {
        let plan = BandPlan::reference();
        let beta = vec![1, 2, 3, 4, 5, 7, 8];
        let mut ok = true;
        let mut worst_leak = f64::NEG_INFINITY;
        let mut exact = 0;
        let runs = 20u64;
        for seed in 0..runs {
            let mut status = vec![false; plan.n_bands() + 1];
            for b in [3, 6, 8] {
                status[b] = true;
            }
            let front = noiseless_front(
                &plan,
                GeometryPreset::Sparse4,
                vec![90.0, 40.0, 40.0, 62.0, 62.0, 62.0, 120.0, 120.0, 120.0],
                seed,
            );
            let cal = front.receive(seed as usize, &status, &mut SlotSync::default())?;
            let a = sns_receiver(&plan, GeometryPreset::Sparse4, seed).analyze(&cal, &beta)?;
            let busy: Vec<usize> = (1..=plan.n_bands())
                .filter(|&i| a.statuses[i - 1] == BandStatus::Busy)
                .collect();
            let hit = busy == vec![3, 8] && a.statuses[5] == BandStatus::Unsensed && !a.failure;
            exact += hit as usize;

            let mut only6 = vec![false; plan.n_bands() + 1];
            only6[6] = true;
            let cal6 = front.receive(seed as usize, &only6, &mut SlotSync::default())?;
            let leak = digitize(
                &cal6.uds,
                &SnsConfig::new(beta.clone(), 5, &plan)?,
                &make_mixing_matrix(5, &beta, seed),
                &plan,
            )?
            .energy(&plan);
            let own = digitize(
                &cal6.uds,
                &SnsConfig::new(vec![6], 5, &plan)?,
                &make_mixing_matrix(5, &[6], seed),
                &plan,
            )?
            .energy(&plan);
            let db = 10.0 * (leak.max(1e-300) / own).log10();
            worst_leak = worst_leak.max(db);
            ok &= hit && db < -50.0;
        }
        Ok((
            ok,
            format!(
                "support {{3,8}} exact in {exact}/{runs}; worst band-6 leak {worst_leak:.1} dB"
            ),
        ))
    })
}

/// Criterion 3: co-array MUSIC on synthetic sources at 10 dB per element.
pub fn music_reproduction(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(3, "sparse-array MUSIC", || {
        let plan = BandPlan::reference();
        let geometry = GeometryPreset::Sparse4.build(&plan);
        let carrier = plan.transmit_hz();
        let sigma2 = 0.1;
        let scenarios: [&[f64]; 2] = [&[18.0, 62.0], &[42.0, 87.0, 145.0]];
        let mut ok = true;
        let mut parts = Vec::new();
        for (si, truth) in scenarios.iter().enumerate() {
            let mut good = 0u64;
            for seed in 0..opts.music_seeds {
                let mut rng = rng::stream(seed, Domain::Scenario, 100 + si as u64);
                let steer = Steering {
                    carrier_hz: carrier,
                    unit_spacing_m: geometry.unit_spacing_m(),
                };
                let mut x = vec![vec![C64::new(0.0, 0.0); opts.music_snapshots]; geometry.len()];
                for t in 0..opts.music_snapshots {
                    let s: Vec<C64> = truth
                        .iter()
                        .map(|_| complex_gaussian(&mut rng, 1.0))
                        .collect();
                    for (l, row) in x.iter_mut().enumerate() {
                        let p = geometry.positions()[l] as f64;
                        let mut v = complex_gaussian(&mut rng, sigma2);
                        for (amp, &th) in s.iter().zip(truth.iter()) {
                            v += amp * C64::from_polar(1.0, steer.phase_step(th) * p);
                        }
                        row[t] = v;
                    }
                }
                let r = sample_covariance(&x)?;
                let est = coarray_music(&r, &geometry, carrier, truth.len())?;
                let pairs = match_angles(&est.angles_deg, truth);
                let hit = est.angles_deg.len() == truth.len()
                    && pairs.len() == truth.len()
                    && pairs
                        .iter()
                        .all(|&(e, t)| (est.angles_deg[e] - truth[t]).abs() <= 0.5 + 1e-9);
                good += hit as u64;
            }
            let rate = good as f64 / opts.music_seeds as f64;
            ok &= rate >= 0.95;
            parts.push(format!("{:?}: {:.1}%", truth, 100.0 * rate));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// Per-seed totals and cumulative curve checkpoints of one study.
#[derive(Debug, Clone)]
pub struct ThroughputStudy {
    pub policies: Vec<Policy>,
    /// `[seed][policy]` total throughput.
    pub totals: Vec<Vec<f64>>,
    /// `[seed][policy]` mean per-slot regret over the last fifth.
    pub tail_regret: Vec<Vec<f64>>,
    /// `[seed][policy][checkpoint]` cumulative throughput.
    pub curves: Vec<Vec<Vec<f64>>>,
}

impl ThroughputStudy {
    fn column(&self, p: usize) -> Vec<f64> {
        self.totals.iter().map(|s| s[p]).collect()
    }

    fn index(&self, policy: Policy) -> usize {
        self.policies
            .iter()
            .position(|&p| p == policy)
            .expect("policy in study")
    }
}

pub const CURVE_CHECKPOINTS: usize = 10;

/// Runs all policies over the configured seeds at 10 dB gain.
pub fn throughput_study(
    opts: &AcceptanceOptions,
    occupancy: OccupancyCase,
    geometry: GeometryPreset,
) -> Result<ThroughputStudy> {
    let mut cfg = ExperimentConfig {
        occupancy,
        geometry,
        slots: opts.throughput_slots,
        ..ExperimentConfig::default()
    };
    cfg.plan.samples_per_slot = opts.throughput_samples_per_slot;
    let policies = cfg.policies.clone();
    let step = (opts.throughput_slots / CURVE_CHECKPOINTS).max(1);
    let mut study = ThroughputStudy {
        policies,
        totals: Vec::new(),
        tail_regret: Vec::new(),
        curves: Vec::new(),
    };
    for seed in 0..opts.throughput_seeds {
        let p = run_point(&cfg, seed, 10.0)?;
        study
            .totals
            .push(p.summaries.iter().map(|s| s.throughput as f64).collect());
        study.tail_regret.push(
            p.summaries
                .iter()
                .map(|s| s.tail_regret_rate.unwrap_or(f64::NAN))
                .collect(),
        );
        study.curves.push(
            p.streams
                .iter()
                .map(|s| {
                    let mut acc = 0i64;
                    let mut pts = Vec::new();
                    for (t, r) in s.iter().enumerate() {
                        acc += r.throughput(cfg.doa_tolerance_deg);
                        if (t + 1) % step == 0 {
                            pts.push(acc as f64);
                        }
                    }
                    pts
                })
                .collect(),
        );
    }
    Ok(study)
}

/// Criterion 4 on precomputed Case 1 and Case 2 studies.
pub fn policy_ordering(
    studies: &[(&str, &Result<ThroughputStudy>)],
    seconds: f64,
) -> CriterionOutcome {
    let mut out = timed(4, "policy ordering", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for (label, study) in studies {
            let st = match study {
                Ok(s) => s,
                Err(e) => return Ok((false, format!("{label}: {e}"))),
            };
            let imp = st.column(st.index(Policy::Imp));
            let wucb = st.column(st.index(Policy::Wucb));
            let oldm = st.column(st.index(Policy::Oldm));
            let d1: Vec<f64> = imp.iter().zip(&wucb).map(|(a, b)| a - b).collect();
            let d2: Vec<f64> = wucb.iter().zip(&oldm).map(|(a, b)| a - b).collect();
            let (s1, s2) = (Stats::of(&d1), Stats::of(&d2));
            let ordered = s1.mean > 2.0 * s1.se && s2.mean > 2.0 * s2.se;
            let tail = |p: Policy| {
                let i = st.index(p);
                Stats::of(&st.tail_regret.iter().map(|s| s[i]).collect::<Vec<_>>()).mean
            };
            let (tw, to) = (tail(Policy::Wucb), tail(Policy::Oldm));
            let converged = tw < 0.05 && to < 0.05;
            ok &= ordered && converged;
            parts.push(format!(
                "{label}: IMP {:.0} WUCB {:.0} OLDM {:.0}, IMP-WUCB {:.1}±{:.1}, WUCB-OLDM {:.1}±{:.1} (se), tail regret WUCB {:.4} OLDM {:.4}",
                Stats::of(&imp).mean,
                Stats::of(&wucb).mean,
                Stats::of(&oldm).mean,
                s1.mean,
                s1.se,
                s2.mean,
                s2.se,
                tw,
                to
            ));
        }
        Ok((ok, parts.join("; ")))
    });
    out.seconds += seconds;
    out
}

/// Criterion 5: sparse occupancy offers more opportunities, seed by seed.
pub fn case_sparsity(
    case1: &Result<ThroughputStudy>,
    case2: &Result<ThroughputStudy>,
) -> CriterionOutcome {
    timed(5, "case sparsity", || {
        let (c1, c2) = match (case1, case2) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Ok((false, "throughput studies failed".into())),
        };
        let mut ok = true;
        let mut parts = Vec::new();
        for (pi, p) in c1.policies.iter().enumerate() {
            let q = c2.index(*p);
            let wins = c1
                .totals
                .iter()
                .zip(&c2.totals)
                .filter(|(a, b)| a[pi] > b[q])
                .count();
            ok &= wins == c1.totals.len();
            parts.push(format!(
                "{p}: {wins}/{} seeds (means {:.0} vs {:.0})",
                c1.totals.len(),
                Stats::of(&c1.column(pi)).mean,
                Stats::of(&c2.column(q)).mean
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// Criterion 6: 4-ULA and 3-Sparse curves overlap within two standard
/// deviations at every checkpoint, for every policy.
pub fn array_equivalence(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(6, "array equivalence", || {
        let a = throughput_study(opts, OccupancyCase::Case1, GeometryPreset::Ula4)?;
        let b = throughput_study(opts, OccupancyCase::Case1, GeometryPreset::Sparse3)?;
        let mut ok = true;
        let mut parts = Vec::new();
        for (pi, p) in a.policies.iter().enumerate() {
            let q = b.index(*p);
            let points = a.curves[0][pi].len();
            let mut overlap = 0;
            for c in 0..points {
                let sa = Stats::of(&a.curves.iter().map(|s| s[pi][c]).collect::<Vec<_>>());
                let sb = Stats::of(&b.curves.iter().map(|s| s[q][c]).collect::<Vec<_>>());
                let (lo_a, hi_a) = sa.band(2.0);
                let (lo_b, hi_b) = sb.band(2.0);
                overlap += (lo_a <= hi_b && lo_b <= hi_a) as usize;
            }
            ok &= overlap == points;
            let (ta, tb) = (Stats::of(&a.column(pi)), Stats::of(&b.column(q)));
            parts.push(format!(
                "{p}: {overlap}/{points} checkpoints overlap, totals {:.0}±{:.0} vs {:.0}±{:.0}",
                ta.mean, ta.std, tb.mean, tb.std
            ));
        }
        Ok((ok, parts.join("; ")))
    })
}

/// Base SNR of the low-SNR direction sweeps.
pub const DOA_SWEEP_SNR_DB: f64 = -5.0;
/// Base SNR of the high-SNR deviation check.
pub const DOA_HIGH_SNR_DB: f64 = 10.0;
/// Single user of the direction sweeps.
pub const SINGLE_USER: (usize, f64) = (3, 62.0);
/// Three users for the deviation comparison.
pub const THREE_USERS: [(usize, f64); 3] = [(2, 40.0), (3, 62.0), (6, 118.0)];

fn doa_sweep(
    opts: &AcceptanceOptions,
    geometry: GeometryPreset,
    mode: SamplingMode,
    users: Vec<(usize, f64)>,
    snr_db: f64,
    gains_db: Vec<f64>,
) -> Result<DoaSweepResult> {
    let cfg = ExperimentConfig {
        geometry,
        mode,
        snr_db,
        slots: opts.doa_slots,
        ..ExperimentConfig::default()
    };
    let mut sweep = DoaSweep::from_experiment(&cfg, users, 1);
    sweep.gains_db = gains_db;
    sweep.run()
}

/// Criterion 7: error ladder over geometries and gains, and SNS vs
/// Nyquist agreement at the highest gain.
pub fn error_monotonicity(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(7, "DoA error monotonicity", || {
        let gains = vec![0.0, 2.0, 6.0, 10.0];
        let mut errs = Vec::new();
        let mut ok = true;
        let mut parts = Vec::new();
        let mut sns_vs_ns = Vec::new();
        for geo in GeometryPreset::ALL {
            let sns = doa_sweep(
                opts,
                geo,
                SamplingMode::Sns,
                vec![SINGLE_USER],
                DOA_SWEEP_SNR_DB,
                gains.clone(),
            )?;
            let e: Vec<f64> = (0..gains.len())
                .map(|g| sns.doa_error(g).unwrap_or(f64::NAN))
                .collect();
            ok &= e.windows(2).all(|w| w[0] > w[1]);
            let ns = doa_sweep(
                opts,
                geo,
                SamplingMode::Nyquist,
                vec![SINGLE_USER],
                DOA_SWEEP_SNR_DB,
                gains.clone(),
            )?;
            let top = sns.reference_index();
            let gap = (sns.truth_error(top).unwrap_or(f64::NAN)
                - ns.truth_error(top).unwrap_or(f64::NAN))
            .abs();
            ok &= gap < 0.5;
            sns_vs_ns.push(format!("{geo} {gap:.3}"));
            parts.push(format!(
                "{geo}: {}",
                e.iter()
                    .map(|x| format!("{x:.3}"))
                    .collect::<Vec<_>>()
                    .join(" > ")
            ));
            errs.push(e);
        }
        for g in 0..gains.len() - 1 {
            ok &= errs.windows(2).all(|w| w[0][g] > w[1][g]);
        }
        Ok((
            ok,
            format!(
                "theta_err at g={:?} dB: {}; |SNS-NS| truth error at 10 dB: {}",
                gains,
                parts.join("; "),
                sns_vs_ns.join(", ")
            ),
        ))
    })
}

/// Criterion 8: no spread for one user on 4-element arrays at high gain,
/// and more spread with three users than one on 3-ULA.
pub fn deviation(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(8, "DoA deviation", || {
        let mut ok = true;
        let mut parts = Vec::new();
        for geo in [GeometryPreset::Ula4, GeometryPreset::Sparse4] {
            let r = doa_sweep(
                opts,
                geo,
                SamplingMode::Sns,
                vec![SINGLE_USER],
                DOA_HIGH_SNR_DB,
                vec![10.0],
            )?;
            let d = r.deviation(0);
            ok &= d == 0.0 && r.misses(0) == 0;
            parts.push(format!("{geo} 1 user: delta {d} deg"));
        }
        let one = doa_sweep(
            opts,
            GeometryPreset::Ula3,
            SamplingMode::Nyquist,
            vec![SINGLE_USER],
            DOA_SWEEP_SNR_DB,
            vec![2.0],
        )?;
        let three = doa_sweep(
            opts,
            GeometryPreset::Ula3,
            SamplingMode::Nyquist,
            THREE_USERS.to_vec(),
            DOA_SWEEP_SNR_DB,
            vec![2.0],
        )?;
        let (d1, d3) = (one.deviation(0), three.deviation(0));
        ok &= d3 > d1;
        parts.push(format!(
            "3-ULA at 2 dB: delta 1 user {d1} deg, 3 users {d3} deg"
        ));
        Ok((ok, parts.join("; ")))
    })
}

/// Criterion 9: oracle-equivalence property checks.
pub fn property_suites(opts: &AcceptanceOptions) -> CriterionOutcome {
    timed(9, "property suites", || {
        let mut parts = Vec::new();
        let mut ok = true;
        let mut rng = rng::stream(9, Domain::Scenario, 0);

        // Poisson-binomial tail vs explicit enumeration.
        let mut worst = 0.0f64;
        for _ in 0..opts.property_trials {
            let n = rng.gen_range(1..=10);
            let psi: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
            let aperture = rng.gen_range(1..=n + 1);
            let mut tail = 0.0;
            for mask in 0u32..(1 << n) {
                let mut p = 1.0;
                for (i, &v) in psi.iter().enumerate() {
                    p *= if mask & (1 << i) != 0 { 1.0 - v } else { v };
                }
                if mask.count_ones() as usize >= aperture {
                    tail += p;
                }
            }
            worst = worst.max((failure_probability(&psi, aperture) - tail).abs());
        }
        ok &= worst <= 1e-12;
        parts.push(format!("failure probability max error {worst:.1e}"));

        // Prefix search vs exhaustive subsets.
        let mut mismatches = 0;
        for _ in 0..opts.property_trials {
            let psi: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
            let aperture = rng.gen_range(2..=7);
            let s = imp_select(&psi, aperture);
            let (_, best) = exhaustive_select(&psi, aperture);
            let own = objective(&psi, &s.beta, aperture);
            if (own - best).abs() > 1e-12 || (s.expected_reward - best).abs() > 1e-12 {
                mismatches += 1;
            }
        }
        ok &= mismatches == 0;
        parts.push(format!(
            "prefix vs exhaustive mismatches {mismatches}/{}",
            opts.property_trials
        ));

        // Co-array MUSIC vs direct MUSIC on a ULA.
        let plan = BandPlan::reference();
        let ula = GeometryPreset::Ula4.build(&plan);
        let carrier = plan.transmit_hz();
        let steer = Steering {
            carrier_hz: carrier,
            unit_spacing_m: ula.unit_spacing_m(),
        };
        let mut music_mismatch = 0;
        let music_trials = 200;
        for _ in 0..music_trials {
            let k = rng.gen_range(1..=3);
            let mut angles: Vec<f64> = Vec::new();
            while angles.len() < k {
                let a = 10.0 + 0.5 * rng.gen_range(0..=320) as f64;
                if angles.iter().all(|b: &f64| (a - b).abs() >= 15.0) {
                    angles.push(a);
                }
            }
            let src: Vec<(f64, f64, f64)> = angles
                .iter()
                .map(|&a| (a, carrier, rng.gen_range(0.5..2.0)))
                .collect();
            let r = model_covariance(&ula, &src, 0.1);
            let direct = music(&r, &steer, k)?;
            let co = music(&spatial_smooth(&coarray_extract(&r, &ula)?), &steer, k)?;
            let mut a1 = direct.angles_deg.clone();
            let mut a2 = co.angles_deg.clone();
            a1.sort_by(f64::total_cmp);
            a2.sort_by(f64::total_cmp);
            if a1 != a2 {
                music_mismatch += 1;
            }
        }
        ok &= music_mismatch == 0;
        parts.push(format!(
            "co-array vs direct MUSIC peak mismatches {music_mismatch}/{music_trials}"
        ));

        // Empirical Markov transitions.
        let mut worst_tp = 0.0f64;
        for case in [OccupancyCase::Case1, OccupancyCase::Case2] {
            let (p10, p01) = case.probabilities(8)?;
            let mut proc = OccupancyProcess::new(p10.clone(), p01.clone(), 77)?;
            let mut prev = proc.status().to_vec();
            let mut from = [[0usize; 2]; 8];
            let mut flip = [[0usize; 2]; 8];
            for _ in 0..100_000 {
                let cur = proc.step().to_vec();
                for i in 0..8 {
                    let u = prev[i] as usize;
                    from[i][u] += 1;
                    flip[i][u] += (cur[i] != prev[i]) as usize;
                }
                prev = cur;
            }
            for i in 0..8 {
                let e10 = flip[i][1] as f64 / from[i][1].max(1) as f64;
                let e01 = flip[i][0] as f64 / from[i][0].max(1) as f64;
                worst_tp = worst_tp.max((e10 - p10[i]).abs()).max((e01 - p01[i]).abs());
            }
        }
        ok &= worst_tp <= 0.02;
        parts.push(format!("Markov transition max error {worst_tp:.4}"));

        // Calibration residual at a reference-tone SNR of 10 dB and above.
        let mut worst_phase = 0.0f64;
        let prs_amplitude = 0.5;
        for snr in [10.0, 20.0] {
            let noise_power = prs_amplitude * prs_amplitude * 10f64.powf(-snr / 10.0);
            for seed in 0..100u64 {
                let g = GeometryPreset::Sparse4.build(&plan);
                let front = FrontEnd {
                    impairment: AfeImpairment::random(g.len(), noise_power, 0.0, seed),
                    geometry: g,
                    plan: plan.clone(),
                    prs: generate_prs(&plan),
                    prs_amplitude,
                    band_doa: vec![70.0; plan.n_bands() + 1],
                    seed,
                };
                let mut r = rng::stream(seed, Domain::Scenario, 9);
                let status: Vec<bool> = (0..=plan.n_bands()).map(|_| r.gen_bool(0.5)).collect();
                let cal = front.receive(seed as usize, &status, &mut SlotSync::default())?;
                for (est, truth) in cal
                    .phase_estimates
                    .iter()
                    .zip(&front.impairment.phase_offsets)
                {
                    worst_phase = worst_phase.max(wrap_phase(est - truth).abs());
                }
            }
        }
        ok &= worst_phase < 0.05;
        parts.push(format!("calibration residual max {worst_phase:.4} rad"));
        Ok((ok, parts.join("; ")))
    })
}

/// Runs every criterion in order, calling `report` as each finishes.
pub fn run_all(
    opts: &AcceptanceOptions,
    mut report: impl FnMut(&CriterionOutcome),
) -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    let mut push = |o: CriterionOutcome, out: &mut Vec<CriterionOutcome>| {
        report(&o);
        out.push(o);
    };
    push(sensing_boundary(opts), &mut out);
    push(golden_scenario(), &mut out);
    push(music_reproduction(opts), &mut out);
    let t0 = Instant::now();
    let case1 = throughput_study(opts, OccupancyCase::Case1, GeometryPreset::Sparse4);
    let case2 = throughput_study(opts, OccupancyCase::Case2, GeometryPreset::Sparse4);
    let spent = t0.elapsed().as_secs_f64();
    push(
        policy_ordering(&[("case 1", &case1), ("case 2", &case2)], spent),
        &mut out,
    );
    push(case_sparsity(&case1, &case2), &mut out);
    push(array_equivalence(opts), &mut out);
    push(error_monotonicity(opts), &mut out);
    push(deviation(opts), &mut out);
    push(property_suites(opts), &mut out);
    out
}
