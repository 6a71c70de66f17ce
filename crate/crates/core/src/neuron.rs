//! Single-neuron dynamics of the refractory probabilistic leaky
//! integrate-and-fire (RP-LI&F) model.
//!
//! A neuron is a small automaton over `(s, y, p, aref, rref)`:
//!
//! * `s` is the [`Phase`]: normal, absolute refractory or relative refractory;
//! * `y` is the spike emitted on the step that produced the state;
//! * `p` is the integer membrane potential, clipped to `[p_min, p_max]`;
//! * `aref` / `rref` count down the two refractory periods.
//!
//! [`neuron_branches`] returns the exact one-step distribution of a neuron
//! given the weighted input it receives. The simulator samples from it and the
//! DTMC builder enumerates it, so both see the same law.

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::rational::{self, floor_i64, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NeuronError {
    #[error("potential integration requested while in absolute refractory period")]
    IntegrateInAbsoluteRefractory,
}

/// Piecewise-constant base firing probability over `Δ = p − τ`.
///
/// With `k` boundaries `l₁ < … < l_k` and `2k` probabilities, interval
/// `l_{j−1} ≤ Δ < l_j` maps to `probs[k + j − 1]` and `−l_j ≤ Δ < −l_{j−1}`
/// maps to `probs[k − j]` (with `l₀ = 0`). Outside `[−l_k, l_k)` the
/// probability saturates at 0 below and 1 above.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpikeProbabilityTable {
    pub boundaries: Vec<i64>,
    pub probs: Vec<Rational>,
    /// Skip the monotonicity requirement during validation.
    pub allow_non_monotone: bool,
}

pub const DEFAULT_TABLE_PROBS: [(i64, i64); 10] = [
    (5, 100),
    (10, 100),
    (20, 100),
    (30, 100),
    (40, 100),
    (50, 100),
    (65, 100),
    (80, 100),
    (90, 100),
    (95, 100),
];

impl SpikeProbabilityTable {
    /// Five boundaries `i·⌈τ/5⌉` and the default probability ladder, which
    /// puts 0.5 on `0 ≤ Δ < l₁`.
    pub fn default_for(tau: i64) -> Self {
        let k = (DEFAULT_TABLE_PROBS.len() / 2) as i64;
        let step = ((tau + k - 1).div_euclid(k)).max(1);
        SpikeProbabilityTable {
            boundaries: (1..=k).map(|i| i * step).collect(),
            probs: DEFAULT_TABLE_PROBS
                .iter()
                .map(|&(n, d)| rational::ratio(n, d))
                .collect(),
            allow_non_monotone: false,
        }
    }

    pub fn k(&self) -> usize {
        self.boundaries.len()
    }

    /// Human-readable descriptions of every broken table invariant.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.boundaries.is_empty() {
            out.push("probability table needs at least one boundary".to_string());
        }
        if self.boundaries.iter().any(|&l| l <= 0) {
            out.push("probability table boundaries must be positive".to_string());
        }
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            out.push("probability table boundaries must be strictly increasing".to_string());
        }
        if self.probs.len() != 2 * self.boundaries.len() {
            out.push(format!(
                "probability table needs {} probabilities for {} boundaries, found {}",
                2 * self.boundaries.len(),
                self.boundaries.len(),
                self.probs.len()
            ));
        }
        if self.probs.iter().any(|q| !rational::is_probability(q)) {
            out.push("probability table entries must lie in [0, 1]".to_string());
        }
        if !self.allow_non_monotone && self.probs.windows(2).any(|w| w[0] > w[1]) {
            out.push("non-monotone probability table".to_string());
        }
        out
    }

    /// Base probability for a given `Δ = p − τ`.
    pub fn lookup(&self, delta: i64) -> Rational {
        let k = self.k();
        if k == 0 {
            return if delta >= 0 { Rational::one() } else { Rational::zero() };
        }
        if delta >= self.boundaries[k - 1] {
            return Rational::one();
        }
        if delta < -self.boundaries[k - 1] {
            return Rational::zero();
        }
        if delta >= 0 {
            let j = self.boundaries.iter().position(|&l| delta < l).unwrap_or(k - 1);
            self.probs[k + j].clone()
        } else {
            let j = self.boundaries.iter().position(|&l| -l <= delta).unwrap_or(k - 1);
            self.probs[k - 1 - j].clone()
        }
    }
}

/// All per-neuron constants.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NeuronParams {
    /// Firing threshold τ.
    pub tau: i64,
    /// Leak factor `r ∈ [0, 1]`.
    pub leak: Rational,
    /// Firing-probability shrink during the relative refractory period.
    pub alpha: Rational,
    pub arp: u32,
    pub rrp: u32,
    pub p_rest: i64,
    pub p_min: i64,
    pub p_max: i64,
    pub table: SpikeProbabilityTable,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau: 10,
            leak: rational::ratio(7, 10),
            alpha: rational::ratio(8, 100),
            arp: 2,
            rrp: 5,
            p_rest: 0,
            p_min: -500,
            p_max: 500,
            table: SpikeProbabilityTable::default_for(10),
        }
    }
}

impl NeuronParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = self.table.problems();
        if !(self.p_min <= self.p_rest && self.p_rest <= self.p_max) {
            out.push(format!(
                "resting potential {} outside bounds [{}, {}]",
                self.p_rest, self.p_min, self.p_max
            ));
        }
        if !(self.p_min <= self.tau && self.tau <= self.p_max) {
            out.push(format!(
                "threshold {} outside bounds [{}, {}]",
                self.tau, self.p_min, self.p_max
            ));
        }
        if !(self.p_min <= 0 && 0 <= self.p_max) {
            out.push("potential bounds must contain 0 (refractory potential)".to_string());
        }
        if !rational::is_probability(&self.leak) {
            out.push("leak must lie in [0, 1]".to_string());
        }
        if !rational::is_probability(&self.alpha) {
            out.push("alpha must lie in [0, 1]".to_string());
        }
        out
    }
}

/// Refractory phase `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    Normal = 0,
    Absolute = 1,
    Relative = 2,
}

impl Phase {
    pub fn code(self) -> i64 {
        self as i64
    }

    pub fn from_code(code: i64) -> Option<Phase> {
        match code {
            0 => Some(Phase::Normal),
            1 => Some(Phase::Absolute),
            2 => Some(Phase::Relative),
            _ => None,
        }
    }
}

/// Dynamic state `(s, y, p, aref, rref)`. The derived ordering follows that
/// field order and is the canonical tie-break everywhere states are sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NeuronState {
    pub phase: Phase,
    pub spiked: bool,
    pub potential: i64,
    pub aref: u32,
    pub rref: u32,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        NeuronState {
            phase: Phase::Normal,
            spiked: false,
            potential: params.p_rest,
            aref: 0,
            rref: 0,
        }
    }

    /// State entered on the spike branch. With `ARP = 0` the absolute period
    /// is skipped entirely.
    fn after_spike(params: &NeuronParams) -> Self {
        let (phase, aref, rref) = match (params.arp, params.rrp) {
            (0, 0) => (Phase::Normal, 0, 0),
            (0, rrp) => (Phase::Relative, 0, rrp),
            (arp, _) => (Phase::Absolute, arp, 0),
        };
        NeuronState {
            phase,
            spiked: true,
            potential: params.p_rest,
            aref,
            rref,
        }
    }

    pub fn is_valid(&self, params: &NeuronParams) -> bool {
        let bounds = params.p_min <= self.potential && self.potential <= params.p_max;
        let counters = self.aref <= params.arp && self.rref <= params.rrp;
        let phase = match self.phase {
            Phase::Absolute => {
                self.potential == 0 && !self.spiked
                    || self.spiked && self.potential == params.p_rest && self.aref == params.arp
            }
            Phase::Normal => self.aref == 0 && self.rref == 0,
            Phase::Relative => self.aref == 0,
        };
        bounds && counters && phase
    }
}

impl fmt::Display for NeuronState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "(s={}, y={}, p={}, aref={}, rref={})",
            self.phase.code(),
            u8::from(self.spiked),
            self.potential,
            self.aref,
            self.rref
        )
    }
}

/// One-step distribution of a single neuron. Branches are ordered
/// no-spike first, spike second; zero-probability branches are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchDistribution {
    pub branches: Vec<(Rational, NeuronState)>,
}

impl BranchDistribution {
    fn certain(next: NeuronState) -> Self {
        BranchDistribution {
            branches: vec![(Rational::one(), next)],
        }
    }

    /// Probability of the spike branch (0 when absent).
    pub fn spike_probability(&self) -> Rational {
        self.branches
            .iter()
            .filter(|(_, s)| s.spiked)
            .map(|(q, _)| q.clone())
            .sum()
    }
}

/// `max(min(⌊raw⌋, p_max), p_min)`.
pub fn clip_potential(raw: &Rational, params: &NeuronParams) -> i64 {
    floor_i64(raw).clamp(params.p_min, params.p_max)
}

/// Leaky integration; the leak term is dropped right after a spike.
pub fn integrate(
    prev: &NeuronState,
    weighted_input: &Rational,
    params: &NeuronParams,
) -> Result<i64, NeuronError> {
    if prev.phase == Phase::Absolute {
        return Err(NeuronError::IntegrateInAbsoluteRefractory);
    }
    if prev.spiked {
        return Ok(clip_potential(weighted_input, params));
    }
    let raw = weighted_input + &params.leak * rational::int(prev.potential);
    Ok(clip_potential(&raw, params))
}

pub fn base_spike_prob(potential: i64, params: &NeuronParams) -> Rational {
    params.table.lookup(potential - params.tau)
}

pub fn effective_spike_prob(phase: Phase, base: &Rational, params: &NeuronParams) -> Rational {
    match phase {
        Phase::Absolute => Rational::zero(),
        Phase::Relative => &params.alpha * base,
        Phase::Normal => base.clone(),
    }
}

/// Exact one-step branching of a neuron receiving `weighted_input`.
pub fn neuron_branches(
    prev: &NeuronState,
    weighted_input: &Rational,
    params: &NeuronParams,
) -> BranchDistribution {
    if prev.phase == Phase::Absolute {
        let next = if prev.aref > 0 {
            NeuronState {
                phase: Phase::Absolute,
                spiked: false,
                potential: 0,
                aref: prev.aref - 1,
                rref: prev.rref,
            }
        } else if params.rrp > 0 {
            NeuronState {
                phase: Phase::Relative,
                spiked: false,
                potential: 0,
                aref: 0,
                rref: params.rrp,
            }
        } else {
            NeuronState {
                phase: Phase::Normal,
                spiked: false,
                potential: 0,
                aref: 0,
                rref: 0,
            }
        };
        return BranchDistribution::certain(next);
    }

    let potential = integrate(prev, weighted_input, params).expect("phase checked above");
    let q = effective_spike_prob(prev.phase, &base_spike_prob(potential, params), params);
    let quiet = match prev.phase {
        Phase::Relative if prev.rref > 0 => NeuronState {
            phase: Phase::Relative,
            spiked: false,
            potential,
            aref: 0,
            rref: prev.rref - 1,
        },
        _ => NeuronState {
            phase: Phase::Normal,
            spiked: false,
            potential,
            aref: 0,
            rref: 0,
        },
    };
    let spike = NeuronState::after_spike(params);

    if q.is_zero() {
        BranchDistribution::certain(quiet)
    } else if q.is_one() {
        BranchDistribution::certain(spike)
    } else {
        BranchDistribution {
            branches: vec![(Rational::one() - &q, quiet), (q, spike)],
        }
    }
}
