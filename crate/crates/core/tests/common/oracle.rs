//! Brute-force reference semantics, written without the library's stepping,
//! monitor or solver code: enumerate every branch sequence up to a horizon and
//! evaluate the path formula on each finite prefix.

use num_traits::{One, Zero};
use spikecheck::network::{Endpoint, NetworkSpec};
use spikecheck::neuron::{NeuronParams, NeuronState, Phase};
use spikecheck::pctl::{Atom, Bound, NamedConst, Operand, PathFormula, VarKind};
use spikecheck::rational::Rational;

fn table_prob(p: &NeuronParams, delta: i64) -> Rational {
    let t = &p.table;
    let k = t.boundaries.len();
    if k == 0 {
        return if delta >= 0 { Rational::one() } else { Rational::zero() };
    }
    if delta >= t.boundaries[k - 1] {
        return Rational::one();
    }
    if delta < -t.boundaries[k - 1] {
        return Rational::zero();
    }
    let mut lower = 0;
    for (j, &l) in t.boundaries.iter().enumerate() {
        if delta >= 0 && delta >= lower && delta < l {
            return t.probs[k + j].clone();
        }
        if delta < 0 && delta < -lower && delta >= -l {
            return t.probs[k - 1 - j].clone();
        }
        lower = l;
    }
    unreachable!("delta {delta} not covered")
}

fn spike_state(p: &NeuronParams) -> NeuronState {
    let mut s = NeuronState {
        phase: Phase::Normal,
        spiked: true,
        potential: p.p_rest,
        aref: 0,
        rref: 0,
    };
    if p.arp > 0 {
        s.phase = Phase::Absolute;
        s.aref = p.arp;
    } else if p.rrp > 0 {
        s.phase = Phase::Relative;
        s.rref = p.rrp;
    }
    s
}

/// One neuron's one-step distribution; zero-probability branches included.
pub fn neuron_step(prev: &NeuronState, input: i64, p: &NeuronParams) -> Vec<(Rational, NeuronState)> {
    if prev.phase == Phase::Absolute {
        let mut next = NeuronState {
            phase: Phase::Absolute,
            spiked: false,
            potential: 0,
            aref: 0,
            rref: prev.rref,
        };
        if prev.aref > 0 {
            next.aref = prev.aref - 1;
        } else if p.rrp > 0 {
            next.phase = Phase::Relative;
            next.rref = p.rrp;
        } else {
            next.phase = Phase::Normal;
            next.rref = 0;
        }
        return vec![(Rational::one(), next)];
    }
    let mut raw = Rational::from_integer(input.into());
    if !prev.spiked {
        raw += &p.leak * Rational::from_integer(prev.potential.into());
    }
    let floor: i64 = raw.floor().to_integer().try_into().expect("small potential");
    let potential = floor.max(p.p_min).min(p.p_max);
    let mut q = table_prob(p, potential - p.tau);
    if prev.phase == Phase::Relative {
        q *= &p.alpha;
    }
    let quiet = if prev.phase == Phase::Relative && prev.rref > 0 {
        NeuronState {
            phase: Phase::Relative,
            spiked: false,
            potential,
            aref: 0,
            rref: prev.rref - 1,
        }
    } else {
        NeuronState {
            phase: Phase::Normal,
            spiked: false,
            potential,
            aref: 0,
            rref: 0,
        }
    };
    vec![(Rational::one() - &q, quiet), (q, spike_state(p))]
}

pub struct Oracle {
    ids: Vec<u32>,
    params: Vec<NeuronParams>,
    spec: NetworkSpec,
}

impl Oracle {
    pub fn new(spec: &NetworkSpec) -> Self {
        let mut decls = spec.neurons.clone();
        decls.sort_by_key(|d| d.id);
        Oracle {
            ids: decls.iter().map(|d| d.id).collect(),
            params: decls.into_iter().map(|d| d.params).collect(),
            spec: spec.clone(),
        }
    }

    fn input(&self, k: usize, time: u64, prev: &[NeuronState]) -> i64 {
        let id = self.ids[k];
        let mut sum = 0;
        for e in self.spec.edges.iter().filter(|e| e.to == Endpoint::Neuron(id)) {
            match e.from {
                Endpoint::Input(i) => {
                    let inp = self.spec.inputs.iter().find(|x| x.id == i).expect("input");
                    sum += e.weight * inp.values[(time % inp.values.len() as u64) as usize];
                }
                Endpoint::Neuron(j) => {
                    let jk = self.ids.iter().position(|&x| x == j).expect("neuron");
                    if prev[jk].spiked {
                        sum += e.weight;
                    }
                }
            }
        }
        sum
    }

    fn initial(&self) -> Vec<NeuronState> {
        self.params
            .iter()
            .map(|p| NeuronState {
                phase: Phase::Normal,
                spiked: false,
                potential: p.p_rest,
                aref: 0,
                rref: 0,
            })
            .collect()
    }

    /// Global one-step distribution as the product of the neuron ones.
    pub fn step(&self, time: u64, prev: &[NeuronState]) -> Vec<(Rational, Vec<NeuronState>)> {
        let mut out = vec![(Rational::one(), Vec::new())];
        for k in 0..self.ids.len() {
            let options = neuron_step(&prev[k], self.input(k, time, prev), &self.params[k]);
            let mut next = Vec::new();
            for (q, partial) in &out {
                for (qk, s) in &options {
                    if qk.is_zero() {
                        continue;
                    }
                    let mut v: Vec<NeuronState> = partial.clone();
                    v.push(*s);
                    next.push((q * qk, v));
                }
            }
            out = next;
        }
        out
    }

    /// Calls `visit` with every path of `horizon` steps and its probability.
    pub fn paths(&self, horizon: u64, visit: &mut impl FnMut(&Rational, &[Vec<NeuronState>])) {
        let mut path = vec![self.initial()];
        self.extend(&mut path, Rational::one(), horizon, visit);
    }

    fn extend(
        &self,
        path: &mut Vec<Vec<NeuronState>>,
        q: Rational,
        horizon: u64,
        visit: &mut impl FnMut(&Rational, &[Vec<NeuronState>]),
    ) {
        let time = path.len() as u64 - 1;
        if time == horizon {
            visit(&q, path);
            return;
        }
        for (qi, next) in self.step(time, path.last().expect("nonempty")) {
            path.push(next);
            self.extend(path, &q * qi, horizon, visit);
            path.pop();
        }
    }

    /// Probability that a step-bounded path formula holds.
    pub fn probability(&self, f: &PathFormula) -> Rational {
        let h = horizon(f);
        let mut total = Rational::zero();
        self.paths(h, &mut |q, path| {
            if self.holds(f, path, 0) {
                total += q;
            }
        });
        total
    }

    fn atom(&self, a: &Atom, s: &[NeuronState]) -> bool {
        let k = match a.var.neuron {
            Some(id) => self.ids.iter().position(|&x| x == id).expect("known neuron"),
            None => 0,
        };
        let p = &self.params[k];
        let n = &s[k];
        let lhs = match a.var.kind {
            VarKind::Spike => i64::from(n.spiked),
            VarKind::Phase => match n.phase {
                Phase::Normal => 0,
                Phase::Absolute => 1,
                Phase::Relative => 2,
            },
            VarKind::Potential => n.potential,
            VarKind::Aref => n.aref.into(),
            VarKind::Rref => n.rref.into(),
        };
        let rhs = match a.rhs {
            Operand::Int(v) => v,
            Operand::Const(NamedConst::Arp) => p.arp.into(),
            Operand::Const(NamedConst::Rrp) => p.rrp.into(),
            Operand::Const(NamedConst::Threshold) => p.tau,
            Operand::Const(NamedConst::PRest) => p.p_rest,
            Operand::Const(NamedConst::PMin) => p.p_min,
            Operand::Const(NamedConst::PMax) => p.p_max,
        };
        a.op.holds(&lhs, &rhs)
    }

    fn holds(&self, f: &PathFormula, path: &[Vec<NeuronState>], i: usize) -> bool {
        let bounded = |b: &Bound| match b {
            Bound::AtMost(t) => *t as usize,
            _ => panic!("oracle handles step-bounded formulas only"),
        };
        match f {
            PathFormula::Bool(b) => *b,
            PathFormula::Atom(a) => self.atom(a, &path[i]),
            PathFormula::Not(a) => !self.holds(a, path, i),
            PathFormula::And(a, b) => self.holds(a, path, i) && self.holds(b, path, i),
            PathFormula::Or(a, b) => self.holds(a, path, i) || self.holds(b, path, i),
            PathFormula::Implies(a, b) => !self.holds(a, path, i) || self.holds(b, path, i),
            PathFormula::Next(a) => self.holds(a, path, i + 1),
            PathFormula::Finally(b, a) => (i..=i + bounded(b)).any(|j| self.holds(a, path, j)),
            PathFormula::Globally(b, a) => (i..=i + bounded(b)).all(|j| self.holds(a, path, j)),
            PathFormula::Until(b, x, y) => {
                let t = bounded(b);
                (i..=i + t).any(|k| self.holds(y, path, k) && (i..k).all(|j| self.holds(x, path, j)))
            }
        }
    }
}

/// Positions after the first needed to decide `f`.
pub fn horizon(f: &PathFormula) -> u64 {
    let t = |b: &Bound| match b {
        Bound::AtMost(t) => *t,
        _ => panic!("unbounded operator"),
    };
    match f {
        PathFormula::Bool(_) | PathFormula::Atom(_) => 0,
        PathFormula::Not(a) => horizon(a),
        PathFormula::And(a, b) | PathFormula::Or(a, b) | PathFormula::Implies(a, b) => horizon(a).max(horizon(b)),
        PathFormula::Next(a) => 1 + horizon(a),
        PathFormula::Finally(b, a) | PathFormula::Globally(b, a) => t(b) + horizon(a),
        PathFormula::Until(b, x, y) => t(b) + horizon(x).max(horizon(y)),
    }
}
