//! Learning and decision making: vacancy beliefs and band selection.
//!
//! Bands are 0-based here (`0..N` stands for `U_1..U_N`). The objective for a
//! candidate set is `(1 - P(fail)) * sum psi`, where a slot fails when the
//! busy count in the set reaches the virtual aperture `L_s`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UwasError};
use crate::rng::{self, Domain};
use crate::sensing::BandStatus;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Policy {
    Imp,
    Oldm,
    Wucb,
}

impl Policy {
    pub const ALL: [Policy; 3] = [Policy::Imp, Policy::Wucb, Policy::Oldm];
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Imp => "IMP",
            Policy::Oldm => "OLDM",
            Policy::Wucb => "WUCB",
        })
    }
}

impl FromStr for Policy {
    type Err = UwasError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IMP" => Ok(Policy::Imp),
            "OLDM" => Ok(Policy::Oldm),
            "WUCB" => Ok(Policy::Wucb),
            _ => Err(UwasError::Config(format!("unknown policy '{s}'"))),
        }
    }
}

/// Per-band Markov transition probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transitions {
    pub p10: Vec<f64>,
    pub p00: Vec<f64>,
}

impl Transitions {
    pub fn from_p10_p01(p10: &[f64], p01: &[f64]) -> Self {
        Self {
            p10: p10.to_vec(),
            p00: p01.iter().map(|p| 1.0 - p).collect(),
        }
    }

    /// Stationary vacancy `p10 / (p10 + p01)`.
    pub fn stationary_vacancy(&self) -> Vec<f64> {
        self.p10
            .iter()
            .zip(&self.p00)
            .map(|(&p10, &p00)| {
                let p01 = 1.0 - p00;
                if p10 + p01 > 0.0 {
                    p10 / (p10 + p01)
                } else {
                    0.5
                }
            })
            .collect()
    }
}

/// Counts of observed consecutive transitions for one band.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TransitionCounts {
    pub from_busy: u64,
    pub busy_to_vacant: u64,
    pub from_vacant: u64,
    pub vacant_to_vacant: u64,
}

impl TransitionCounts {
    /// Add-one smoothed `p10` estimate.
    pub fn p10_hat(&self) -> f64 {
        (self.busy_to_vacant + 1) as f64 / (self.from_busy + 2) as f64
    }

    /// Add-one smoothed `p00` estimate.
    pub fn p00_hat(&self) -> f64 {
        (self.vacant_to_vacant + 1) as f64 / (self.from_vacant + 2) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub psi: Vec<f64>,
    pub counts: Vec<TransitionCounts>,
    pub selections: Vec<u64>,
    pub t_s: u64,
    /// Status observed in the previous slot (`None` when not observed).
    pub last_observed: Vec<Option<bool>>,
}

impl BeliefState {
    pub fn new(initial_psi: Vec<f64>) -> Self {
        let n = initial_psi.len();
        Self {
            psi: initial_psi,
            counts: vec![TransitionCounts::default(); n],
            selections: vec![0; n],
            t_s: 0,
            last_observed: vec![None; n],
        }
    }

    pub fn n_bands(&self) -> usize {
        self.psi.len()
    }

    pub fn estimated_transitions(&self) -> Transitions {
        Transitions {
            p10: self.counts.iter().map(|c| c.p10_hat()).collect(),
            p00: self.counts.iter().map(|c| c.p00_hat()).collect(),
        }
    }
}

/// `P(busy count >= L_s)` for independent busy probabilities `1 - psi_i`.
pub fn failure_probability(psi: &[f64], aperture: usize) -> f64 {
    if psi.len() < aperture {
        return 0.0;
    }
    // dist[b] = P(b busy among the bands processed so far), truncated at L_s.
    let mut dist = vec![0.0; aperture];
    dist[0] = 1.0;
    for &p in psi {
        let q = 1.0 - p;
        for b in (1..aperture).rev() {
            dist[b] = dist[b] * p + dist[b - 1] * q;
        }
        dist[0] *= p;
    }
    let ok: f64 = dist.iter().sum();
    (1.0 - ok).clamp(0.0, 1.0)
}

/// Expected throughput `(1 - P(fail)) * sum psi` of a band set.
pub fn objective(psi: &[f64], set: &[usize], aperture: usize) -> f64 {
    let sub: Vec<f64> = set.iter().map(|&i| psi[i]).collect();
    (1.0 - failure_probability(&sub, aperture)) * sub.iter().sum::<f64>()
}

/// Band set chosen for the next slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Sorted 0-based band indices.
    pub beta: Vec<usize>,
    pub expected_reward: f64,
    pub policy: Policy,
    pub exploring: bool,
}

fn rank(scores: &[f64], secondary: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(secondary[b].total_cmp(&secondary[a]))
            .then(a.cmp(&b))
    });
    idx
}

fn min_size(aperture: usize, n: usize) -> usize {
    aperture.saturating_sub(1).clamp(1, n.max(1))
}

/// Prefix search over bands ranked by `scores`; the objective uses `psi`.
fn prefix_search(scores: &[f64], psi: &[f64], aperture: usize) -> (Vec<usize>, f64) {
    let n = psi.len();
    let order = rank(scores, psi);
    let lo = min_size(aperture, n);
    let mut best_size = lo;
    let mut best = objective(psi, &order[..lo], aperture);
    for size in lo + 1..=n {
        let v = objective(psi, &order[..size], aperture);
        if v > best + 1e-12 {
            best = v;
            best_size = size;
        }
    }
    let mut beta = order[..best_size].to_vec();
    beta.sort_unstable();
    (beta, best)
}

/// Myopic selection: maximizes the objective over sizes `L_s - 1 ..= N`.
pub fn imp_select(psi: &[f64], aperture: usize) -> Selection {
    let (beta, expected_reward) = prefix_search(psi, psi, aperture);
    Selection {
        beta,
        expected_reward,
        policy: Policy::Imp,
        exploring: false,
    }
}

/// Exhaustive search over all subsets with `|beta| >= L_s - 1`; test oracle
/// and reference for small `N`.
pub fn exhaustive_select(psi: &[f64], aperture: usize) -> (Vec<usize>, f64) {
    let n = psi.len();
    let lo = min_size(aperture, n);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 1u32..(1u32 << n) {
        if (mask.count_ones() as usize) < lo {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let v = objective(psi, &set, aperture);
        if best.as_ref().map_or(true, |(_, b)| v > *b + 1e-12) {
            best = Some((set, v));
        }
    }
    best.unwrap_or_default()
}

/// Belief update after observing a slot.
///
/// Observed busy -> `p10`, observed vacant -> `p00`, otherwise
/// `(1 - psi) p10 + psi p00`. Transition counters advance first, so learners
/// passing their own estimates see this slot's evidence.
pub fn update_belief(
    state: &mut BeliefState,
    beta: &[usize],
    observed: &[BandStatus],
    failure: bool,
    known: Option<&Transitions>,
) {
    let n = state.n_bands();
    let mut now = vec![None; n];
    if !failure {
        for &i in beta {
            now[i] = match observed[i] {
                BandStatus::Busy => Some(true),
                BandStatus::Vacant => Some(false),
                BandStatus::Unsensed => None,
            };
        }
    }
    for i in 0..n {
        if let (Some(prev), Some(cur)) = (state.last_observed[i], now[i]) {
            let c = &mut state.counts[i];
            if prev {
                c.from_busy += 1;
                if !cur {
                    c.busy_to_vacant += 1;
                }
            } else {
                c.from_vacant += 1;
                if !cur {
                    c.vacant_to_vacant += 1;
                }
            }
        }
    }
    for &i in beta {
        state.selections[i] += 1;
    }
    let est;
    let p = match known {
        Some(p) => p,
        None => {
            est = state.estimated_transitions();
            &est
        }
    };
    for i in 0..n {
        state.psi[i] = match now[i] {
            Some(true) => p.p10[i],
            Some(false) => p.p00[i],
            None => (1.0 - state.psi[i]) * p.p10[i] + state.psi[i] * p.p00[i],
        };
    }
    state.last_observed = now;
    state.t_s += 1;
}

/// Consecutive groups of `size` bands cycling through `0..n`.
pub fn round_robin_group(cursor: usize, size: usize, n: usize) -> Vec<usize> {
    let mut g: Vec<usize> = (0..size.min(n)).map(|j| (cursor + j) % n).collect();
    g.sort_unstable();
    g
}

/// Exploration probability at slot `t` (1-based): `epsilon` until `decay_slots`,
/// then `epsilon * decay_slots / t`. `decay_slots = 0` keeps it constant.
pub fn epsilon_at(epsilon: f64, decay_slots: u64, t: u64) -> f64 {
    if decay_slots == 0 || t <= decay_slots {
        epsilon
    } else {
        epsilon * decay_slots as f64 / t as f64
    }
}

/// Epsilon-greedy selection; exploration takes the next round-robin group.
pub fn oldm_select<R: Rng + ?Sized>(
    state: &BeliefState,
    epsilon: f64,
    aperture: usize,
    cursor: &mut usize,
    rng: &mut R,
) -> Selection {
    let n = state.n_bands();
    let u: f64 = rng.gen();
    if u < epsilon {
        let size = min_size(aperture, n);
        let beta = round_robin_group(*cursor, size, n);
        *cursor = (*cursor + size) % n;
        let expected_reward = objective(&state.psi, &beta, aperture);
        Selection {
            beta,
            expected_reward,
            policy: Policy::Oldm,
            exploring: true,
        }
    } else {
        let mut s = imp_select(&state.psi, aperture);
        s.policy = Policy::Oldm;
        s
    }
}

/// Transitional quality index `psi + sqrt(delta ln t / U)`; unsampled bands are infinite.
pub fn tqi(state: &BeliefState, delta: f64) -> Vec<f64> {
    let t = state.t_s.max(1) as f64;
    state
        .psi
        .iter()
        .zip(&state.selections)
        .map(|(&p, &u)| {
            if u == 0 {
                f64::INFINITY
            } else {
                p + (delta * t.ln() / u as f64).sqrt()
            }
        })
        .collect()
}

/// Upper-confidence selection: explores with the top `L_s - 1` bands by TQI
/// unless they coincide with the top `L_s - 1` by belief, in which case the
/// objective is maximized over TQI-ranked prefixes.
pub fn wucb_select(state: &BeliefState, delta: f64, aperture: usize) -> Selection {
    let n = state.n_bands();
    let size = min_size(aperture, n);
    let q = tqi(state, delta);
    let mut alpha1 = rank(&q, &state.psi)[..size].to_vec();
    let mut alpha2 = rank(&state.psi, &state.psi)[..size].to_vec();
    alpha1.sort_unstable();
    alpha2.sort_unstable();
    if alpha1 == alpha2 {
        let capped: Vec<f64> = q.iter().map(|v| v.min(1.0)).collect();
        let (beta, expected_reward) = prefix_search(&capped, &state.psi, aperture);
        Selection {
            beta,
            expected_reward,
            policy: Policy::Wucb,
            exploring: false,
        }
    } else {
        let expected_reward = objective(&state.psi, &alpha1, aperture);
        Selection {
            beta: alpha1,
            expected_reward,
            policy: Policy::Wucb,
            exploring: true,
        }
    }
}

/// Learner hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdmParams {
    pub epsilon: f64,
    /// Slots after which the exploration probability decays as `1/t`; 0 disables decay.
    pub epsilon_decay_slots: u64,
    pub delta: f64,
}

impl Default for LdmParams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            epsilon_decay_slots: 1000,
            delta: 2.0,
        }
    }
}

/// One policy's closed-loop decision maker.
#[derive(Debug, Clone)]
pub struct DecisionMaker {
    pub policy: Policy,
    pub state: BeliefState,
    pub params: LdmParams,
    aperture: usize,
    truth: Transitions,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl DecisionMaker {
    /// `truth` is used only by IMP, which knows the spectrum statistics.
    pub fn new(
        policy: Policy,
        truth: Transitions,
        aperture: usize,
        params: LdmParams,
        seed: u64,
    ) -> Self {
        let n = truth.p10.len();
        let psi = match policy {
            Policy::Imp => truth.stationary_vacancy(),
            _ => vec![0.5; n],
        };
        Self {
            policy,
            state: BeliefState::new(psi),
            params,
            aperture,
            truth,
            cursor: 0,
            rng: rng::stream(seed, Domain::Policy, policy as u64),
        }
    }

    pub fn select(&mut self) -> Selection {
        match self.policy {
            Policy::Imp => imp_select(&self.state.psi, self.aperture),
            Policy::Oldm => {
                let eps = epsilon_at(
                    self.params.epsilon,
                    self.params.epsilon_decay_slots,
                    self.state.t_s + 1,
                );
                oldm_select(
                    &self.state,
                    eps,
                    self.aperture,
                    &mut self.cursor,
                    &mut self.rng,
                )
            }
            Policy::Wucb if self.state.selections.contains(&0) => {
                // Initialization sweep: every band once, in safe groups.
                let n = self.state.n_bands();
                let size = min_size(self.aperture, n);
                let beta = round_robin_group(self.cursor, size, n);
                self.cursor = (self.cursor + size) % n;
                Selection {
                    expected_reward: objective(&self.state.psi, &beta, self.aperture),
                    beta,
                    policy: Policy::Wucb,
                    exploring: true,
                }
            }
            Policy::Wucb => wucb_select(&self.state, self.params.delta, self.aperture),
        }
    }

    pub fn observe(&mut self, beta: &[usize], observed: &[BandStatus], failure: bool) {
        let known = match self.policy {
            Policy::Imp => Some(&self.truth),
            _ => None,
        };
        update_belief(&mut self.state, beta, observed, failure, known);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_probability_examples() {
        assert_eq!(failure_probability(&[0.3; 5], 6), 0.0);
        assert_eq!(failure_probability(&[1.0; 8], 6), 0.0);
        let p = failure_probability(&[0.5; 8], 6);
        assert!((p - 37.0 / 256.0).abs() < 1e-12);
        assert!((failure_probability(&[0.0; 6], 6) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn imp_examples() {
        let s = imp_select(&[1.0; 8], 6);
        assert_eq!(s.beta.len(), 8);
        assert!((s.expected_reward - 8.0).abs() < 1e-12);

        let s = imp_select(&[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 6);
        assert_eq!(s.beta, vec![0, 1, 2, 3, 4]);

        let s = imp_select(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 6);
        assert_eq!(s.beta, vec![0, 1, 2, 3, 4]);
        assert!((s.expected_reward - 1.0).abs() < 1e-12);
    }

    #[test]
    fn belief_update_examples() {
        let truth = Transitions {
            p10: vec![0.8, 0.8],
            p00: vec![0.9, 0.6],
        };
        let mut st = BeliefState::new(vec![0.2, 0.5]);
        update_belief(
            &mut st,
            &[0],
            &[BandStatus::Vacant, BandStatus::Unsensed],
            false,
            Some(&truth),
        );
        assert!((st.psi[0] - 0.9).abs() < 1e-15);
        assert!((st.psi[1] - 0.7).abs() < 1e-15);
        assert_eq!(st.selections, vec![1, 0]);

        let mut st = BeliefState::new(vec![0.5, 0.5]);
        update_belief(
            &mut st,
            &[0, 1],
            &[BandStatus::Busy, BandStatus::Vacant],
            true,
            Some(&truth),
        );
        assert!((st.psi[0] - 0.85).abs() < 1e-15);
        assert!((st.psi[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn transition_counting() {
        let mut st = BeliefState::new(vec![0.5]);
        let seq = [true, false, false, true, true];
        for &busy in &seq {
            let s = if busy {
                BandStatus::Busy
            } else {
                BandStatus::Vacant
            };
            update_belief(&mut st, &[0], &[s], false, None);
        }
        let c = st.counts[0];
        assert_eq!((c.from_busy, c.busy_to_vacant), (2, 1));
        assert_eq!((c.from_vacant, c.vacant_to_vacant), (2, 1));
        assert!((c.p10_hat() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn round_robin_groups() {
        assert_eq!(round_robin_group(0, 5, 8), vec![0, 1, 2, 3, 4]);
        assert_eq!(round_robin_group(5, 5, 8), vec![0, 1, 5, 6, 7]);
        let mut cursor = 0;
        let st = BeliefState::new(vec![0.5; 8]);
        let mut rng = rng::stream(0, Domain::Policy, 0);
        let a = oldm_select(&st, 1.0, 6, &mut cursor, &mut rng);
        let b = oldm_select(&st, 1.0, 6, &mut cursor, &mut rng);
        assert!(a.exploring && b.exploring);
        assert_eq!(a.beta, vec![0, 1, 2, 3, 4]);
        assert_eq!(b.beta, vec![0, 1, 5, 6, 7]);
    }

    #[test]
    fn wucb_starts_with_initialization_sweep() {
        let truth = Transitions::from_p10_p01(&[0.9; 8], &[0.1; 8]);
        let mut dm = DecisionMaker::new(Policy::Wucb, truth, 6, LdmParams::default(), 0);
        let a = dm.select();
        assert_eq!(a.beta, vec![0, 1, 2, 3, 4]);
        dm.observe(&a.beta, &[BandStatus::Vacant; 8], false);
        let b = dm.select();
        assert_eq!(b.beta, vec![0, 1, 5, 6, 7]);
        assert!(a.exploring && b.exploring);
        dm.observe(&b.beta, &[BandStatus::Vacant; 8], false);
        assert!(dm.state.selections.iter().all(|&u| u > 0));
    }

    #[test]
    fn tqi_example() {
        let mut st = BeliefState::new(vec![0.5; 2]);
        st.t_s = 100;
        st.selections = vec![10, 0];
        let q = tqi(&st, 2.0);
        assert!((q[0] - 1.4597).abs() < 1e-4);
        assert!(q[1].is_infinite());
        let s = wucb_select(&st, 2.0, 2);
        assert_eq!(s.beta, vec![1]);
        assert!(s.exploring);
    }

    #[test]
    fn wucb_exploits_with_equal_counts() {
        let mut st = BeliefState::new(vec![0.9, 0.8, 0.7, 0.2, 0.1, 0.95, 0.3, 0.6]);
        st.t_s = 50;
        st.selections = vec![20; 8];
        let s = wucb_select(&st, 2.0, 6);
        assert!(!s.exploring);
        assert!(s.beta.len() >= 5);
    }

    #[test]
    fn epsilon_schedule() {
        assert_eq!(epsilon_at(0.1, 0, 10_000), 0.1);
        assert_eq!(epsilon_at(0.1, 1000, 500), 0.1);
        assert!((epsilon_at(0.1, 1000, 4000) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn policy_names() {
        for p in Policy::ALL {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn enumerate_tail(psi: &[f64], aperture: usize) -> f64 {
        let n = psi.len();
        (0u32..1 << n)
            .filter(|m| m.count_ones() as usize >= aperture)
            .map(|m| {
                psi.iter()
                    .enumerate()
                    .map(|(i, &v)| if m & (1 << i) != 0 { 1.0 - v } else { v })
                    .product::<f64>()
            })
            .sum()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn failure_probability_matches_enumeration(
            psi in prop::collection::vec(0.0f64..=1.0, 1..=10),
            ap in 1usize..=11,
        ) {
            let aperture = ap.min(psi.len() + 1);
            let got = failure_probability(&psi, aperture);
            prop_assert!((got - enumerate_tail(&psi, aperture)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&got));
        }

        #[test]
        fn prefix_search_is_optimal(
            psi in prop::collection::vec(0.0f64..=1.0, 8),
            aperture in 2usize..=7,
        ) {
            let sel = imp_select(&psi, aperture);
            let (_, best) = exhaustive_select(&psi, aperture);
            prop_assert!((objective(&psi, &sel.beta, aperture) - best).abs() <= 1e-12);
            prop_assert!((sel.expected_reward - best).abs() <= 1e-12);
        }
    }
}
