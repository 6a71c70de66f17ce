//! Seeded Monte-Carlo simulation and statistical estimation.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). Run `i` of an ensemble
//! seeded with `s` uses the stream `ChaCha8Rng::seed_from_u64(s ^ i)`. Each
//! step draws one `u64` per neuron that has two branches, in ascending id
//! order; the neuron spikes iff `u < q·2^64` for spike probability `q`.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::network::{Network, NetworkSpec, NetworkState};
use crate::neuron::{NeuronState, Phase};
use crate::pctl::eval::ResolveError;
use crate::pctl::prefix::{PrefixError, PrefixMonitor};
use crate::pctl::PathFormula;
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("not statistically checkable; use exact checker")]
    Unbounded,
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("at least one run is required")]
    NoRuns,
    #[error("confidence must lie strictly between 0 and 1")]
    Confidence,
    #[error("trace CSV: {0}")]
    Csv(String),
}

impl From<PrefixError> for EngineError {
    fn from(e: PrefixError) -> Self {
        match e {
            PrefixError::Unbounded => EngineError::Unbounded,
            PrefixError::Resolve(r) => EngineError::Resolve(r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// Seconds per step; metadata only.
    pub dt_label: Rational,
    pub seed: u64,
    pub ids: Vec<u32>,
    /// `states[t]` is the state at time `t`; `states[0]` is the initial state.
    pub states: Vec<NetworkState>,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn spike_count(&self, index: usize) -> u64 {
        self.states.iter().filter(|s| s.neurons[index].spiked).count() as u64
    }
}

/// Default `dt` label, 1 ms.
pub fn default_dt() -> Rational {
    rational::ratio(1, 1000)
}

/// `u < q·2^64`, exactly.
fn draw_below(u: u64, q: &Rational) -> bool {
    if let (Some(num), Some(den)) = (q.numer().to_u64(), q.denom().to_u64()) {
        return (u as u128) * (den as u128) < (num as u128) << 64;
    }
    BigInt::from(u) * q.denom() < q.numer() << 64
}

fn step(network: &Network, prev: &NetworkState, rng: &mut ChaCha8Rng) -> NetworkState {
    let neurons = network
        .neuron_distributions(prev)
        .into_iter()
        .map(|branches| match branches.as_slice() {
            [(_, only)] => *only,
            [(_, stay), (q, spike)] => {
                if draw_below(rng.next_u64(), q) {
                    *spike
                } else {
                    *stay
                }
            }
            _ => unreachable!("a neuron has one or two branches"),
        })
        .collect();
    NetworkState {
        clock: network.next_clock(prev.clock),
        neurons,
    }
}

fn run(network: &Network, steps: u64, seed: u64) -> Vec<NetworkState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(steps as usize + 1);
    states.push(network.initial_state());
    for _ in 0..steps {
        let next = step(network, states.last().expect("nonempty"), &mut rng);
        states.push(next);
    }
    states
}

/// One trace of `steps` steps; identical arguments give identical traces.
pub fn simulate(spec: &NetworkSpec, steps: u64, seed: u64) -> Trace {
    let network = Network::new(spec);
    Trace {
        dt_label: default_dt(),
        seed,
        ids: network.ids.clone(),
        states: run(&network, steps, seed),
    }
}

/// Seed of run `index` in an ensemble.
pub fn run_seed(seed: u64, index: u64) -> u64 {
    seed ^ index
}

/// Per-step spike counts over an ensemble of runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ensemble {
    pub runs: u64,
    pub ids: Vec<u32>,
    /// `spikes[t][k]`: runs in which neuron `k` spiked at time `t`.
    pub spikes: Vec<Vec<u64>>,
}

impl Ensemble {
    pub fn frequency(&self, t: usize, k: usize) -> f64 {
        self.spikes[t][k] as f64 / self.runs as f64
    }

    /// Mean number of spikes of neuron `k` over times `0..=t`.
    pub fn mean_spike_count(&self, k: usize, t: usize) -> f64 {
        self.spikes[..=t].iter().map(|row| row[k]).sum::<u64>() as f64 / self.runs as f64
    }

    /// `t,n<id>.freq,...` with six decimals.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for id in &self.ids {
            let _ = write!(out, ",n{id}.freq");
        }
        out.push('\n');
        for t in 0..self.spikes.len() {
            let _ = write!(out, "{t}");
            for k in 0..self.ids.len() {
                let _ = write!(out, ",{:.6}", self.frequency(t, k));
            }
            out.push('\n');
        }
        out
    }
}

pub fn ensemble(spec: &NetworkSpec, steps: u64, runs: u64, seed: u64) -> Result<Ensemble, EngineError> {
    if runs == 0 {
        return Err(EngineError::NoRuns);
    }
    let network = Network::new(spec);
    let n = network.len();
    let per_run: Vec<Vec<Vec<bool>>> = (0..runs)
        .into_par_iter()
        .map(|i| {
            run(&network, steps, run_seed(seed, i))
                .iter()
                .map(|s| s.neurons.iter().map(|x| x.spiked).collect())
                .collect()
        })
        .collect();
    let mut spikes = vec![vec![0u64; n]; steps as usize + 1];
    for r in &per_run {
        for (t, row) in r.iter().enumerate() {
            for (k, &y) in row.iter().enumerate() {
                spikes[t][k] += y as u64;
            }
        }
    }
    Ok(Ensemble {
        runs,
        ids: network.ids.clone(),
        spikes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Estimate {
    pub point: Rational,
    pub ci_low: Rational,
    pub ci_high: Rational,
    pub runs: u64,
    pub successes: u64,
    pub confidence: Rational,
}

/// Smallest `n` with `n ≥ ln(2/δ) / (2ε²)`.
pub fn hoeffding_runs(epsilon: f64, delta: f64) -> u64 {
    ((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, confidence: f64) -> (f64, f64) {
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Fraction of `runs` sampled prefixes that satisfy a step-bounded path
/// formula, with a Wilson interval at `confidence`.
pub fn estimate_bounded(
    spec: &NetworkSpec,
    path: &PathFormula,
    runs: u64,
    confidence: f64,
    seed: u64,
) -> Result<Estimate, EngineError> {
    if runs == 0 {
        return Err(EngineError::NoRuns);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(EngineError::Confidence);
    }
    let network = Network::new(spec);
    let monitor = PrefixMonitor::new(path, &network)?;
    let h = monitor.horizon();
    let successes = (0..runs)
        .into_par_iter()
        .filter(|&i| monitor.eval(&run(&network, h, run_seed(seed, i))))
        .count() as u64;
    let (lo, hi) = wilson_interval(successes, runs, confidence);
    let point = Rational::new(successes.into(), runs.into());
    let to_q = |v: f64| rational::from_f64_decimal(v).unwrap_or_else(Rational::zero);
    let (ci_low, ci_high) = if successes == 0 {
        (Rational::zero(), to_q(hi).max(point.clone()))
    } else if successes == runs {
        (to_q(lo).min(point.clone()), Rational::one())
    } else {
        (to_q(lo).min(point.clone()), to_q(hi).max(point.clone()))
    };
    Ok(Estimate {
        point,
        ci_low,
        ci_high,
        runs,
        successes,
        confidence: rational::from_f64_decimal(confidence).unwrap_or_else(Rational::zero),
    })
}

/// Header `t,n<id>.y,n<id>.p,n<id>.s,n<id>.aref,n<id>.rref,...`, one row per
/// time step.
pub fn export_trace_csv(trace: &Trace) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for id in &trace.ids {
        for field in ["y", "p", "s", "aref", "rref"] {
            header.push(format!("n{id}.{field}"));
        }
    }
    w.write_record(&header).expect("in-memory write");
    for (t, st) in trace.states.iter().enumerate() {
        let mut row = vec![t.to_string()];
        for n in &st.neurons {
            row.push((n.spiked as u8).to_string());
            row.push(n.potential.to_string());
            row.push(n.phase.code().to_string());
            row.push(n.aref.to_string());
            row.push(n.rref.to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Neuron ids and per-step neuron states read back from a trace CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTrace {
    pub ids: Vec<u32>,
    pub rows: Vec<(u64, Vec<NeuronState>)>,
}

pub fn parse_trace_csv(text: &str) -> Result<CsvTrace, EngineError> {
    let err = |m: String| EngineError::Csv(m);
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.get(0) != Some("t") || (header.len() - 1) % 5 != 0 {
        return Err(err("header must be t followed by five columns per neuron".into()));
    }
    let mut ids = Vec::new();
    for chunk in 0..(header.len() - 1) / 5 {
        let col = &header[1 + chunk * 5];
        let id = col
            .strip_prefix('n')
            .and_then(|s| s.strip_suffix(".y"))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(format!("bad column name {col:?}")))?;
        for (k, field) in ["y", "p", "s", "aref", "rref"].iter().enumerate() {
            if header[1 + chunk * 5 + k] != format!("n{id}.{field}") {
                return Err(err(format!("bad column name {:?}", &header[1 + chunk * 5 + k])));
            }
        }
        ids.push(id);
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let num = |i: usize| -> Result<i64, EngineError> {
            rec.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err(format!("row {}: column {} is not an integer", line + 2, i + 1)))
        };
        let t = num(0)? as u64;
        let mut neurons = Vec::new();
        for k in 0..ids.len() {
            let b = 1 + k * 5;
            let phase = Phase::from_code(num(b + 2)?).ok_or_else(|| err(format!("row {}: bad phase", line + 2)))?;
            neurons.push(NeuronState {
                spiked: num(b)? != 0,
                potential: num(b + 1)?,
                phase,
                aref: num(b + 3)? as u32,
                rref: num(b + 4)? as u32,
            });
        }
        rows.push((t, neurons));
    }
    Ok(CsvTrace { ids, rows })
}

/// Spike raster: one row per neuron, one mark per spike.
pub fn raster_svg(trace: &Trace) -> String {
    const CELL: usize = 6;
    const ROW: usize = 20;
    const LEFT: usize = 40;
    let width = LEFT + CELL * trace.states.len().max(1) + 10;
    let height = ROW * trace.ids.len().max(1) + 10;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    for (k, id) in trace.ids.iter().enumerate() {
        let y = 5 + k * ROW;
        let _ = writeln!(
            out,
            r#"<text x="4" y="{}" font-family="monospace" font-size="11">n{id}</text>"#,
            y + ROW / 2 + 4
        );
        let _ = writeln!(
            out,
            r#"<line x1="{LEFT}" y1="{0}" x2="{1}" y2="{0}" stroke="lightgray"/>"#,
            y + ROW / 2,
            width - 10
        );
        for (t, st) in trace.states.iter().enumerate() {
            if st.neurons[k].spiked {
                let x = LEFT + t * CELL + CELL / 2;
                let _ = writeln!(
                    out,
                    r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black" stroke-width="2"/>"#,
                    y + 3,
                    y + ROW - 3
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
