//! Explicit-state DTMC construction by breadth-first reachability.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use num_traits::{One, Zero};

use crate::network::{Network, NetworkSpec, NetworkState};
use crate::rational::{self, Rational};
use crate::solve::{self, ScaledMatrix};

pub const DEFAULT_MAX_STATES: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error(
        "state space exceeds max_states={max_states}: {discovered} states discovered, \
         frontier of {frontier} states still unexplored"
    )]
    Overflow {
        max_states: usize,
        discovered: usize,
        frontier: usize,
    },
    #[error("network has no neurons")]
    Empty,
}

#[derive(Debug)]
pub struct Dtmc {
    pub network: Network,
    /// States in BFS discovery order.
    pub states: Vec<NetworkState>,
    pub initial: usize,
    pub transitions: Vec<Vec<(usize, Rational)>>,
    /// `y<id>=b` and `s<id>=v` propositions mapped to sorted state indices.
    pub labels: BTreeMap<String, Vec<usize>>,
    /// `spike<id>_count`: 1 in states where neuron `id` emits.
    pub rewards: BTreeMap<String, Vec<Rational>>,
    scaled: OnceLock<ScaledMatrix>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BsccPartition {
    pub bsccs: Vec<Vec<usize>>,
    pub transient: Vec<usize>,
}

pub fn build_dtmc(spec: &NetworkSpec, max_states: usize) -> Result<Dtmc, BuildError> {
    build_from_network(Network::new(spec), max_states)
}

pub fn build_from_network(network: Network, max_states: usize) -> Result<Dtmc, BuildError> {
    if network.is_empty() {
        return Err(BuildError::Empty);
    }
    let max_states = max_states.max(1);
    let init = network.initial_state();
    let mut index: HashMap<NetworkState, usize> = HashMap::new();
    let mut states = vec![init.clone()];
    index.insert(init, 0);
    let mut transitions: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let mut row = Vec::new();
        for (q, next) in network.branches(&states[i]) {
            let j = match index.get(&next) {
                Some(&j) => j,
                None => {
                    if states.len() >= max_states {
                        return Err(BuildError::Overflow {
                            max_states,
                            discovered: states.len() + 1,
                            frontier: queue.len() + 1,
                        });
                    }
                    let j = states.len();
                    index.insert(next.clone(), j);
                    states.push(next);
                    queue.push_back(j);
                    j
                }
            };
            row.push((j, q));
        }
        row.sort_by_key(|(j, _)| *j);
        transitions.push(row);
    }

    let mut labels = BTreeMap::new();
    let mut rewards = BTreeMap::new();
    for (k, &id) in network.ids.iter().enumerate() {
        for b in 0..=1 {
            let set = (0..states.len())
                .filter(|&s| states[s].neurons[k].spiked == (b == 1))
                .collect();
            labels.insert(format!("y{id}={b}"), set);
        }
        for v in 0..=2 {
            let set = (0..states.len())
                .filter(|&s| states[s].neurons[k].phase.code() == v)
                .collect();
            labels.insert(format!("s{id}={v}"), set);
        }
        let reward = states
            .iter()
            .map(|st| {
                if st.neurons[k].spiked {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            })
            .collect();
        rewards.insert(format!("spike{id}_count"), reward);
    }

    Ok(Dtmc {
        network,
        states,
        initial: 0,
        transitions,
        labels,
        rewards,
        scaled: OnceLock::new(),
    })
}

impl Dtmc {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Integer-scaled copy of the transition matrix, built on first use.
    pub fn scaled(&self) -> &ScaledMatrix {
        self.scaled.get_or_init(|| ScaledMatrix::new(&self.transitions))
    }

    /// Rows whose probabilities do not sum to exactly 1.
    pub fn non_stochastic_rows(&self) -> Vec<usize> {
        self.transitions
            .iter()
            .enumerate()
            .filter(|(_, row)| row.iter().map(|(_, q)| q).sum::<Rational>() != Rational::one())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn transient_distribution(&self, t: u64) -> Vec<Rational> {
        solve::transient(self.scaled(), self.initial, t)
    }

    pub fn bscc_decompose(&self) -> BsccPartition {
        let bsccs = solve::bottom_sccs(&self.transitions);
        let mut in_bscc = vec![false; self.len()];
        for b in &bsccs {
            for &s in b {
                in_bscc[s] = true;
            }
        }
        let transient = (0..self.len()).filter(|&s| !in_bscc[s]).collect();
        BsccPartition { bsccs, transient }
    }

    /// Explicit text dump: one `src dst prob` line per transition, then
    /// labels and rewards.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "states {}", self.len());
        let _ = writeln!(out, "initial {}", self.initial);
        for (i, st) in self.states.iter().enumerate() {
            let _ = writeln!(out, "state {i} {st}");
        }
        let _ = writeln!(out, "transitions {}", self.transition_count());
        for (i, row) in self.transitions.iter().enumerate() {
            for (j, q) in row {
                let _ = writeln!(out, "{i} {j} {}", rational::display(q));
            }
        }
        let _ = writeln!(out, "labels {}", self.labels.len());
        for (name, set) in &self.labels {
            let ids: Vec<String> = set.iter().map(usize::to_string).collect();
            let _ = writeln!(out, "{name}: {}", ids.join(" "));
        }
        let _ = writeln!(out, "rewards {}", self.rewards.len());
        for (name, values) in &self.rewards {
            let _ = writeln!(out, "reward {name}");
            for (i, v) in values.iter().enumerate() {
                if !v.is_zero() {
                    let _ = writeln!(out, "{i} {}", rational::display(v));
                }
            }
        }
        out
    }
}
