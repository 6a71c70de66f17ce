//! Sparse exact linear algebra over row-stochastic matrices.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::rational::{self, Rational};

/// Sparse rows of `(column, probability)`.
pub type Rows = [Vec<(usize, Rational)>];

/// Above this many unknowns the reachability solver switches from exact
/// elimination to floating-point value iteration.
pub const EXACT_SOLVE_LIMIT: usize = 10_000;
const FLOAT_EPSILON: f64 = 1e-10;

/// A matrix scaled to integers: entry = probability · `den`.
#[derive(Debug, Clone)]
pub struct ScaledMatrix {
    pub den: BigInt,
    pub rows: Vec<Vec<(usize, BigInt)>>,
}

impl ScaledMatrix {
    pub fn new(rows: &Rows) -> Self {
        let mut den = BigInt::one();
        for row in rows {
            for (_, q) in row {
                den = den.lcm(q.denom());
            }
        }
        let rows = rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(j, q)| (*j, q.numer() * (&den / q.denom())))
                    .collect()
            })
            .collect();
        ScaledMatrix { den, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// One forward step of an integer distribution scaled by `den^k`; the
    /// result is scaled by `den^(k+1)`.
    pub fn forward(&self, v: &[BigInt]) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if v[i].is_zero() {
                continue;
            }
            for (j, m) in row {
                out[*j] += &v[i] * m;
            }
        }
        out
    }
}

/// A distribution held as integer numerators over a shared `scale`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledDist<'a> {
    pub numerators: &'a [BigInt],
    pub scale: &'a BigInt,
}

impl ScaledDist<'_> {
    pub fn get(&self, i: usize) -> Rational {
        Rational::new(self.numerators[i].clone(), self.scale.clone())
    }

    pub fn to_rationals(&self) -> Vec<Rational> {
        (0..self.numerators.len()).map(|i| self.get(i)).collect()
    }

    pub fn total(&self) -> Rational {
        Rational::new(self.numerators.iter().sum(), self.scale.clone())
    }
}

/// Calls `visit(k, dist)` with the exact distribution after `k` steps for
/// `k = 0..=t`, starting from unit mass on `init`.
pub fn for_each_transient(m: &ScaledMatrix, init: usize, t: u64, mut visit: impl FnMut(u64, ScaledDist<'_>)) {
    let mut v = vec![BigInt::zero(); m.len()];
    v[init] = BigInt::one();
    let mut scale = BigInt::one();
    for k in 0..=t {
        visit(
            k,
            ScaledDist {
                numerators: &v,
                scale: &scale,
            },
        );
        if k < t {
            v = m.forward(&v);
            scale *= &m.den;
        }
    }
}

pub fn transient(m: &ScaledMatrix, init: usize, t: u64) -> Vec<Rational> {
    let mut v = vec![BigInt::zero(); m.len()];
    v[init] = BigInt::one();
    let mut scale = BigInt::one();
    for _ in 0..t {
        v = m.forward(&v);
        scale *= &m.den;
    }
    v.into_iter().map(|x| Rational::new(x, scale.clone())).collect()
}

/// `Σ_{k=0..=t} E[reward at step k]` from `init`.
pub fn cumulative_reward(m: &ScaledMatrix, init: usize, reward: &[Rational], t: u64) -> Rational {
    let mut total = Rational::zero();
    let mut v = vec![BigInt::zero(); m.len()];
    v[init] = BigInt::one();
    let mut scale = BigInt::one();
    for k in 0..=t {
        let mut step = Rational::zero();
        for (x, r) in v.iter().zip(reward) {
            if !x.is_zero() && !r.is_zero() {
                step += r * Rational::from_integer(x.clone());
            }
        }
        total += step / Rational::from_integer(scale.clone());
        if k < t {
            v = m.forward(&v);
            scale *= &m.den;
        }
    }
    total
}

/// Probability of `allowed U<=t target` from every state, exactly.
pub fn bounded_until(m: &ScaledMatrix, allowed: &[bool], target: &[bool], t: u64) -> Vec<Rational> {
    let n = m.len();
    let mut x: Vec<BigInt> = (0..n).map(|i| BigInt::from(target[i] as u8)).collect();
    let mut scale = BigInt::one();
    for _ in 0..t {
        scale *= &m.den;
        x = (0..n)
            .map(|i| {
                if target[i] {
                    scale.clone()
                } else if allowed[i] {
                    m.rows[i].iter().map(|(j, p)| p * &x[*j]).sum()
                } else {
                    BigInt::zero()
                }
            })
            .collect();
    }
    x.into_iter().map(|v| Rational::new(v, scale.clone())).collect()
}

pub fn predecessors(rows: &Rows) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); rows.len()];
    for (i, row) in rows.iter().enumerate() {
        for (j, _) in row {
            pred[*j].push(i);
        }
    }
    pred
}

/// Backward closure of `seeds` through predecessors satisfying `through`.
fn backward_closure(pred: &[Vec<usize>], seeds: impl Iterator<Item = usize>, through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; pred.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(j) = queue.pop_front() {
        for &i in &pred[j] {
            if !seen[i] && through(i) {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    seen
}

/// Forward closure of `seeds`.
pub fn forward_closure(rows: &Rows, seeds: impl Iterator<Item = usize>) -> Vec<bool> {
    let mut seen = vec![false; rows.len()];
    let mut queue = VecDeque::new();
    for s in seeds {
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        for (j, _) in &rows[i] {
            if !seen[*j] {
                seen[*j] = true;
                queue.push_back(*j);
            }
        }
    }
    seen
}

/// Strongly connected components of the subgraph induced by `keep`, in
/// reverse topological order (every component precedes the components that
/// reach it).
pub fn sccs(rows: &Rows, keep: &[bool]) -> Vec<Vec<usize>> {
    let mut graph = DiGraph::<usize, ()>::new();
    let mut node = vec![None; rows.len()];
    for (i, k) in keep.iter().enumerate() {
        if *k {
            node[i] = Some(graph.add_node(i));
        }
    }
    for (i, row) in rows.iter().enumerate() {
        let Some(a) = node[i] else { continue };
        for (j, _) in row {
            if let Some(b) = node[*j] {
                graph.add_edge(a, b, ());
            }
        }
    }
    tarjan_scc(&graph)
        .into_iter()
        .map(|comp| {
            let mut states: Vec<usize> = comp.into_iter().map(|n: NodeIndex| graph[n]).collect();
            states.sort_unstable();
            states
        })
        .collect()
}

/// Components with no edge leaving them.
pub fn bottom_sccs(rows: &Rows) -> Vec<Vec<usize>> {
    let all = vec![true; rows.len()];
    let comps = sccs(rows, &all);
    let mut comp_of = vec![0usize; rows.len()];
    for (c, states) in comps.iter().enumerate() {
        for &s in states {
            comp_of[s] = c;
        }
    }
    let mut out: Vec<Vec<usize>> = comps
        .iter()
        .enumerate()
        .filter(|(c, states)| states.iter().all(|&s| rows[s].iter().all(|(j, _)| comp_of[*j] == *c)))
        .map(|(_, states)| states.clone())
        .collect();
    out.sort();
    out
}

#[derive(Debug, Clone)]
pub struct ReachResult {
    /// Exact probabilities, or `None` for states outside the requested region.
    pub values: Vec<Option<Rational>>,
    /// Some state needed a linear solve.
    pub solved: bool,
    /// The solve fell back to floating-point iteration.
    pub approximate: bool,
}

/// Probability of `allowed U target` for every state reachable from
/// `sources` (all states when `sources` is empty).
pub fn reach(rows: &Rows, allowed: &[bool], target: &[bool], sources: &[usize]) -> ReachResult {
    let n = rows.len();
    let pred = predecessors(rows);
    let can_reach = backward_closure(&pred, (0..n).filter(|&i| target[i]), |i| allowed[i]);
    let no: Vec<bool> = can_reach.iter().map(|c| !c).collect();
    let maybe_fail = backward_closure(&pred, (0..n).filter(|&i| no[i]), |i| allowed[i] && !target[i]);
    let region = if sources.is_empty() {
        vec![true; n]
    } else {
        forward_closure(rows, sources.iter().copied())
    };

    let mut values: Vec<Option<Rational>> = vec![None; n];
    let mut unknown = vec![false; n];
    let mut n_unknown = 0;
    for i in 0..n {
        if !region[i] {
            continue;
        }
        if no[i] {
            values[i] = Some(Rational::zero());
        } else if !maybe_fail[i] {
            values[i] = Some(Rational::one());
        } else {
            unknown[i] = true;
            n_unknown += 1;
        }
    }
    if n_unknown == 0 {
        return ReachResult {
            values,
            solved: false,
            approximate: false,
        };
    }
    let fixed: Vec<Option<Rational>> = (0..n)
        .map(|i| {
            if no[i] {
                Some(Rational::zero())
            } else if !maybe_fail[i] {
                Some(Rational::one())
            } else {
                None
            }
        })
        .collect();
    if n_unknown > EXACT_SOLVE_LIMIT {
        let approx = value_iteration(rows, &unknown, &fixed);
        for i in 0..n {
            if unknown[i] {
                values[i] = Some(approx[i].clone());
            }
        }
        return ReachResult {
            values,
            solved: true,
            approximate: true,
        };
    }
    let mut known = fixed;
    for block in sccs(rows, &unknown) {
        solve_block(rows, &block, &mut known);
    }
    for i in 0..n {
        if unknown[i] {
            values[i] = known[i].clone();
        }
    }
    ReachResult {
        values,
        solved: true,
        approximate: false,
    }
}

/// Solves `x_i = Σ_j P_ij x_j` on `block`, with every state outside the
/// block already in `known`.
fn solve_block(rows: &Rows, block: &[usize], known: &mut [Option<Rational>]) {
    let local: BTreeMap<usize, usize> = block.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let m = block.len();
    // Row k: coefficients of (I - A) and right-hand side b.
    let mut a: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); m];
    let mut b = vec![Rational::zero(); m];
    for (k, &s) in block.iter().enumerate() {
        *a[k].entry(k).or_insert_with(Rational::zero) += Rational::one();
        for (j, p) in &rows[s] {
            match local.get(j) {
                Some(&c) => *a[k].entry(c).or_insert_with(Rational::zero) -= p,
                None => {
                    let v = known[*j].as_ref().expect("successor blocks are solved first");
                    if !v.is_zero() {
                        b[k] += p * v;
                    }
                }
            }
        }
        a[k].retain(|_, v| !v.is_zero());
    }
    if m == 1 {
        known[block[0]] = Some(&b[0] / &a[0][&0]);
        return;
    }
    // Column occupancy below the diagonal drives sparse elimination.
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (k, row) in a.iter().enumerate() {
        for &c in row.keys() {
            col_rows[c].insert(k);
        }
    }
    for k in 0..m {
        let pivot_row = std::mem::take(&mut a[k]);
        let pivot = pivot_row[&k].clone();
        let below: Vec<usize> = col_rows[k].range(k + 1..).copied().collect();
        for i in below {
            let Some(factor) = a[i].remove(&k) else { continue };
            col_rows[k].remove(&i);
            let factor = factor / &pivot;
            for (&c, v) in pivot_row.range(k + 1..) {
                let entry = a[i].entry(c).or_insert_with(Rational::zero);
                *entry -= &factor * v;
                if entry.is_zero() {
                    a[i].remove(&c);
                    col_rows[c].remove(&i);
                } else {
                    col_rows[c].insert(i);
                }
            }
            let delta = &factor * &b[k];
            b[i] -= delta;
        }
        a[k] = pivot_row;
    }
    let mut x = vec![Rational::zero(); m];
    for k in (0..m).rev() {
        let mut acc = b[k].clone();
        for (&c, v) in a[k].range(k + 1..) {
            acc -= v * &x[c];
        }
        x[k] = acc / &a[k][&k];
    }
    for (k, &s) in block.iter().enumerate() {
        known[s] = Some(x[k].clone());
    }
}

fn value_iteration(rows: &Rows, unknown: &[bool], fixed: &[Option<Rational>]) -> Vec<Rational> {
    let n = rows.len();
    let float_rows: Vec<Vec<(usize, f64)>> = rows
        .iter()
        .map(|r| r.iter().map(|(j, p)| (*j, rational::to_f64(p))).collect())
        .collect();
    let mut x: Vec<f64> = (0..n)
        .map(|i| fixed[i].as_ref().map(rational::to_f64).unwrap_or(0.0))
        .collect();
    loop {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if !unknown[i] {
                continue;
            }
            let v: f64 = float_rows[i].iter().map(|(j, p)| p * x[*j]).sum();
            delta = delta.max((v - x[i]).abs());
            x[i] = v;
        }
        if delta < FLOAT_EPSILON {
            break;
        }
    }
    x.into_iter()
        .map(|v| Rational::from_float(v.clamp(0.0, 1.0)).unwrap_or_else(Rational::zero))
        .collect()
}
