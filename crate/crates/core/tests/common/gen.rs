//! Random valid network specs.

use proptest::prelude::*;
use spikecheck::network::{EdgeSpec, Endpoint, InputSpec, NetworkSpec, NeuronDecl};
use spikecheck::neuron::{NeuronParams, SpikeProbabilityTable};
use spikecheck::rational::{ratio, Rational};

pub const PROPERTY_POOL: [&str; 8] = [
    "P>=1 [ G ((y1=1) -> (X (s1=1))) ]",
    "P=? [ F<=5 (y1=1) ]",
    "P=? [ F G ((y2=0) & (F (y1=1))) ]",
    "P>=1 [ G>100 (y2=0) ]",
    "R{\"spike1_count\"}=? [ C<=100 ]",
    "P<0.5 [ (y1=0) U<=3 (p1>=threshold) ]",
    "P=? [ ((s1=0) & (p1>-2) & (p1<=1)) -> (X (y1=1)) ]",
    "(P>=1 [ G (p1<=P_max) ]) & (P>0 [ F (y1=1) ])",
];

fn fraction() -> impl Strategy<Value = Rational> {
    prop::sample::select(vec![1i64, 2, 3, 4, 8, 10, 100, 1000])
        .prop_flat_map(|den| (0..=den).prop_map(move |num| ratio(num, den)))
}

fn table(small: bool) -> impl Strategy<Value = Option<SpikeProbabilityTable>> {
    let max_k: usize = if small { 3 } else { 5 };
    let custom = (1..=max_k)
        .prop_flat_map(|k| {
            (
                prop::collection::vec(1i64..=6, k),
                prop::collection::vec(fraction(), 2 * k),
                any::<bool>(),
            )
        })
        .prop_map(|(steps, mut probs, shuffle)| {
            let boundaries = steps
                .iter()
                .scan(0, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect();
            if !shuffle {
                probs.sort();
            }
            Some(SpikeProbabilityTable {
                boundaries,
                probs,
                allow_non_monotone: shuffle,
            })
        });
    prop_oneof![Just(None), custom]
}

pub fn params(small: bool) -> impl Strategy<Value = NeuronParams> {
    let (lo, hi, max_period) = if small { (-15i64, 15i64, 3u32) } else { (-600, 600, 25) };
    (lo..=0, 0..=hi)
        .prop_flat_map(move |(p_min, p_max)| {
            (
                Just(p_min),
                Just(p_max),
                p_min..=p_max,
                p_min..=p_max,
                fraction(),
                fraction(),
                0..=max_period,
                0..=max_period,
                table(small),
            )
        })
        .prop_map(|(p_min, p_max, tau, p_rest, leak, alpha, arp, rrp, table)| NeuronParams {
            tau,
            leak,
            alpha,
            arp,
            rrp,
            p_rest,
            p_min,
            p_max,
            table: table.unwrap_or_else(|| SpikeProbabilityTable::default_for(tau)),
        })
}

/// A spec that passes validation. `small` keeps state spaces tiny.
pub fn spec(small: bool) -> impl Strategy<Value = NetworkSpec> {
    let max_neurons = if small { 2 } else { 4 };
    let weight = if small { -12i64..=12 } else { -40..=40 };
    (
        prop::sample::subsequence((1u32..=40).collect::<Vec<_>>(), 1..=max_neurons).prop_shuffle(),
        prop::sample::subsequence((1u32..=9).collect::<Vec<_>>(), 0..=2),
    )
        .prop_flat_map(move |(ids, input_ids)| {
            let n = ids.len();
            let inputs = input_ids
                .iter()
                .map(|&id| {
                    prop_oneof![
                        (-3i64..=3).prop_map(|v| vec![v]),
                        prop::collection::vec(-3i64..=3, 2..=3),
                    ]
                    .prop_map(move |values| InputSpec { id, values })
                })
                .collect::<Vec<_>>();
            let mut pairs = Vec::new();
            for &i in &input_ids {
                for &j in &ids {
                    pairs.push((Endpoint::Input(i), Endpoint::Neuron(j)));
                }
            }
            for &i in &ids {
                for &j in &ids {
                    pairs.push((Endpoint::Neuron(i), Endpoint::Neuron(j)));
                }
            }
            let max_edges = pairs.len().min(6);
            let edges = prop::sample::subsequence(pairs, 0..=max_edges).prop_flat_map({
                let weight = weight.clone();
                move |chosen| {
                    let k = chosen.len();
                    prop::collection::vec(weight.clone(), k).prop_map(move |ws| {
                        chosen
                            .iter()
                            .zip(ws)
                            .map(|(&(from, to), weight)| EdgeSpec { from, to, weight })
                            .collect::<Vec<_>>()
                    })
                }
            });
            (
                Just(ids),
                prop::collection::vec(params(small), n),
                inputs,
                edges,
                "[a-zA-Z0-9 _:#'\"\\\\é-]{0,12}",
                0u64..=1000,
                prop::sample::subsequence(PROPERTY_POOL.to_vec(), 0..=3),
            )
        })
        .prop_map(|(ids, params, inputs, edges, name, steps, properties)| NetworkSpec {
            name,
            steps,
            inputs,
            neurons: ids
                .into_iter()
                .zip(params)
                .map(|(id, params)| NeuronDecl { id, params })
                .collect(),
            edges,
            properties: properties.into_iter().map(str::to_string).collect(),
        })
}
