//! Network topology and the synchronous global step.
//!
//! Neuron-to-neuron synapses carry the presynaptic spike bit of the previous
//! global state (one-step delay); inputs contribute their current value with
//! no delay. Given the previous state every neuron branches independently, so
//! the global distribution is the product of the per-neuron ones.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_traits::One;

use crate::neuron::{neuron_branches, NeuronParams, NeuronState};
use crate::rational::{self, Rational};

/// A constant input, or a periodic pattern cycled one value per step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputSpec {
    pub id: u32,
    pub values: Vec<i64>,
}

impl InputSpec {
    pub fn constant(id: u32, value: i64) -> Self {
        InputSpec {
            id,
            values: vec![value],
        }
    }

    pub fn value_at(&self, clock: u64) -> i64 {
        if self.values.is_empty() {
            return 0;
        }
        self.values[(clock % self.values.len() as u64) as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Input(u32),
    Neuron(u32),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Input(id) => write!(f, "input {id}"),
            Endpoint::Neuron(id) => write!(f, "neuron {id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSpec {
    pub from: Endpoint,
    pub to: Endpoint,
    pub weight: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronDecl {
    pub id: u32,
    pub params: NeuronParams,
}

/// A parsed network description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub name: String,
    pub steps: u64,
    pub inputs: Vec<InputSpec>,
    pub neurons: Vec<NeuronDecl>,
    pub edges: Vec<EdgeSpec>,
    pub properties: Vec<String>,
}

impl NetworkSpec {
    pub fn neuron(&self, id: u32) -> Option<&NeuronParams> {
        self.neurons.iter().find(|n| n.id == id).map(|n| &n.params)
    }

    /// Neuron ids in canonical (ascending) order.
    pub fn neuron_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.neurons.iter().map(|n| n.id).collect();
        ids.sort_unstable();
        ids
    }
}

/// Global state: one [`NeuronState`] per neuron in ascending id order, plus
/// the input-pattern clock (always 0 when every input is constant).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetworkState {
    pub clock: u64,
    pub neurons: Vec<NeuronState>,
}

impl fmt::Display for NetworkState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, n) in self.neurons.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}")?;
        }
        write!(f, "]")
    }
}

/// A spec compiled for repeated stepping: neurons sorted by id and incoming
/// synapses resolved to indices.
#[derive(Debug, Clone)]
pub struct Network {
    pub ids: Vec<u32>,
    pub params: Vec<NeuronParams>,
    inputs: Vec<InputSpec>,
    /// Per neuron: constant-free input terms `(input index, weight)`.
    input_edges: Vec<Vec<(usize, i64)>>,
    /// Per neuron: `(presynaptic neuron index, weight)`.
    synapses: Vec<Vec<(usize, i64)>>,
    period: u64,
}

impl Network {
    /// Compiles a spec. Edges whose endpoints do not resolve are ignored;
    /// validation reports them before this point.
    pub fn new(spec: &NetworkSpec) -> Self {
        let ids = spec.neuron_ids();
        let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let params = ids
            .iter()
            .map(|&id| spec.neuron(id).cloned().unwrap_or_default())
            .collect();
        let input_index: BTreeMap<u32, usize> = spec
            .inputs
            .iter()
            .enumerate()
            .map(|(i, inp)| (inp.id, i))
            .collect();
        let mut input_edges = vec![Vec::new(); ids.len()];
        let mut synapses = vec![Vec::new(); ids.len()];
        for edge in &spec.edges {
            let Endpoint::Neuron(to) = edge.to else { continue };
            let Some(&target) = index.get(&to) else { continue };
            match edge.from {
                Endpoint::Input(id) => {
                    if let Some(&i) = input_index.get(&id) {
                        input_edges[target].push((i, edge.weight));
                    }
                }
                Endpoint::Neuron(id) => {
                    if let Some(&i) = index.get(&id) {
                        synapses[target].push((i, edge.weight));
                    }
                }
            }
        }
        let period = spec
            .inputs
            .iter()
            .map(|i| i.values.len().max(1) as u64)
            .fold(1u64, |acc, len| acc.lcm(&len));
        Network {
            ids,
            params,
            inputs: spec.inputs.clone(),
            input_edges,
            synapses,
            period,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Length of the input clock cycle.
    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn initial_state(&self) -> NetworkState {
        NetworkState {
            clock: 0,
            neurons: self.params.iter().map(NeuronState::at_rest).collect(),
        }
    }

    /// Σ weight·signal over incoming edges of the neuron at `index`.
    pub fn weighted_input(&self, index: usize, prev: &NetworkState) -> i64 {
        let from_inputs: i64 = self.input_edges[index]
            .iter()
            .map(|&(i, w)| w * self.inputs[i].value_at(prev.clock))
            .sum();
        let from_neurons: i64 = self.synapses[index]
            .iter()
            .filter(|&&(j, _)| prev.neurons[j].spiked)
            .map(|&(_, w)| w)
            .sum();
        from_inputs + from_neurons
    }

    /// Full one-step distribution, ordered lexicographically by the
    /// per-neuron outcome (no-spike before spike, lowest id most significant).
    pub fn branches(&self, prev: &NetworkState) -> Vec<(Rational, NetworkState)> {
        let clock = (prev.clock + 1) % self.period;
        let per_neuron: Vec<_> = (0..self.len())
            .map(|i| {
                let input = rational::int(self.weighted_input(i, prev));
                neuron_branches(&prev.neurons[i], &input, &self.params[i]).branches
            })
            .collect();
        let mut out = vec![(
            Rational::one(),
            NetworkState {
                clock,
                neurons: Vec::with_capacity(self.len()),
            },
        )];
        for options in per_neuron {
            let mut next = Vec::with_capacity(out.len() * options.len());
            for (q, partial) in &out {
                for (qi, state) in &options {
                    let mut extended = partial.clone();
                    extended.neurons.push(*state);
                    next.push((q * qi, extended));
                }
            }
            out = next;
        }
        out
    }

    /// Per-neuron distributions, for samplers that draw each neuron separately.
    pub fn neuron_distributions(&self, prev: &NetworkState) -> Vec<Vec<(Rational, NeuronState)>> {
        (0..self.len())
            .map(|i| {
                let input = rational::int(self.weighted_input(i, prev));
                neuron_branches(&prev.neurons[i], &input, &self.params[i]).branches
            })
            .collect()
    }

    pub fn next_clock(&self, clock: u64) -> u64 {
        (clock + 1) % self.period
    }
}

pub fn initial_state(spec: &NetworkSpec) -> NetworkState {
    Network::new(spec).initial_state()
}

/// Weighted input to neuron `neuron_id`; 0 for an unknown id.
pub fn weighted_input(neuron_id: u32, prev: &NetworkState, spec: &NetworkSpec) -> Rational {
    let net = Network::new(spec);
    let value = net.index_of(neuron_id).map_or(0, |i| net.weighted_input(i, prev));
    rational::int(value)
}

pub fn network_branches(prev: &NetworkState, spec: &NetworkSpec) -> Vec<(Rational, NetworkState)> {
    Network::new(spec).branches(prev)
}
