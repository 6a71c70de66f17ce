//! SNN-RF: the YAML network representation file.
//!
//! ```yaml
//! network:
//!   name: "contralateral_inhibition"
//!   simulate:
//!     steps: 100
//!   inputs:
//!     - id: 1
//!       value: 1
//!   n_neurons:
//!     - id: 1
//!       threshold: 10
//!       leak: 0.7
//!       prob_table:
//!         boundaries: [2, 4, 6, 8, 10]
//!         probs: [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.65, 0.8, 0.9, 0.95]
//!   edges:
//!     - from: { type: input, id: 1 }
//!       to: { type: neuron, id: 1 }
//!       weight: 11
//!   properties:
//!     - 'P>=1 [ G ((y1=1) -> (X (s1=1))) ]'
//! ```
//!
//! Missing neuron keys take the defaults of [`NeuronParams::default`]. An
//! input may carry `pattern: [..]` instead of `value` to cycle through values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};

use serde_yaml::{Mapping, Value};
use thiserror::Error;

use crate::network::{EdgeSpec, Endpoint, InputSpec, NetworkSpec, NeuronDecl};
use crate::neuron::{NeuronParams, SpikeProbabilityTable, DEFAULT_TABLE_PROBS};
use crate::pctl;
use crate::rational::{self, Rational};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SnnrfError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: unknown key")]
    UnknownKey { path: String },
    #[error("{path}: missing required key")]
    Missing { path: String },
    #[error("{path}: expected {expected}")]
    Type { path: String, expected: &'static str },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

/// A located finding, used for both validation errors and warnings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(Finding {
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.warnings.push(Finding {
            path: path.into(),
            message: message.into(),
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject unknown keys; otherwise they become warnings.
    pub strict: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions { strict: true }
    }
}

pub const DEFAULT_STEPS: u64 = 100;

/// Strict parse with defaults applied.
pub fn parse_snnrf(text: &str) -> Result<NetworkSpec, SnnrfError> {
    parse_snnrf_with(text, ParseOptions::default()).map(|(spec, _)| spec)
}

/// Parses with explicit options; returns the spec and lax-mode warnings.
pub fn parse_snnrf_with(
    text: &str,
    options: ParseOptions,
) -> Result<(NetworkSpec, Vec<Finding>), SnnrfError> {
    let root: Value = serde_yaml::from_str(text).map_err(|e| {
        let (line, column) = e.location().map_or((0, 0), |l| (l.line(), l.column()));
        SnnrfError::Syntax {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    let mut reader = Reader {
        options,
        warnings: Vec::new(),
    };
    let spec = reader.document(&root)?;
    Ok((spec, reader.warnings))
}

struct Reader {
    options: ParseOptions,
    warnings: Vec<Finding>,
}

impl Reader {
    fn mapping<'a>(&mut self, v: &'a Value, path: &str, allowed: &[&str]) -> Result<&'a Mapping, SnnrfError> {
        let map = v.as_mapping().ok_or_else(|| SnnrfError::Type {
            path: path.to_string(),
            expected: "a mapping",
        })?;
        for key in map.keys() {
            let name = key.as_str();
            if name.is_some_and(|k| allowed.contains(&k)) {
                continue;
            }
            let shown = name.map_or_else(|| format!("{key:?}"), str::to_string);
            let key_path = format!("{path}.{shown}");
            if self.options.strict {
                return Err(SnnrfError::UnknownKey { path: key_path });
            }
            self.warnings.push(Finding {
                path: key_path,
                message: "unknown key ignored".into(),
            });
        }
        Ok(map)
    }

    fn document(&mut self, root: &Value) -> Result<NetworkSpec, SnnrfError> {
        let top = self.mapping(root, "$", &["network", "properties"])?;
        let net_value = top.get("network").ok_or_else(|| SnnrfError::Missing {
            path: "network".into(),
        })?;
        let net = self.mapping(
            net_value,
            "network",
            &["name", "simulate", "inputs", "n_neurons", "edges", "properties"],
        )?;

        let name = match net.get("name") {
            None | Some(Value::Null) => "network".to_string(),
            Some(v) => string(v, "network.name")?,
        };

        let steps = match net.get("simulate") {
            None | Some(Value::Null) => DEFAULT_STEPS,
            Some(sim) => {
                let sim = self.mapping(sim, "network.simulate", &["steps"])?;
                match sim.get("steps") {
                    None => DEFAULT_STEPS,
                    Some(v) => unsigned(v, "network.simulate.steps")?,
                }
            }
        };

        let mut inputs = Vec::new();
        for (i, item) in list(net.get("inputs"), "network.inputs")?.iter().enumerate() {
            inputs.push(self.input(item, &format!("network.inputs[{i}]"))?);
        }

        let neuron_items = net.get("n_neurons").ok_or_else(|| SnnrfError::Missing {
            path: "network.n_neurons".into(),
        })?;
        let mut neurons = Vec::new();
        for (i, item) in list(Some(neuron_items), "network.n_neurons")?.iter().enumerate() {
            neurons.push(self.neuron(item, &format!("network.n_neurons[{i}]"))?);
        }

        let mut edges = Vec::new();
        for (i, item) in list(net.get("edges"), "network.edges")?.iter().enumerate() {
            edges.push(self.edge(item, &format!("network.edges[{i}]"))?);
        }

        let mut properties = Vec::new();
        for (source, path) in [(net.get("properties"), "network.properties"), (top.get("properties"), "properties")] {
            for (i, item) in list(source, path)?.iter().enumerate() {
                properties.push(string(item, &format!("{path}[{i}]"))?);
            }
        }

        Ok(NetworkSpec {
            name,
            steps,
            inputs,
            neurons,
            edges,
            properties,
        })
    }

    fn input(&mut self, v: &Value, path: &str) -> Result<InputSpec, SnnrfError> {
        let map = self.mapping(v, path, &["id", "value", "pattern"])?;
        let id = id(map, path)?;
        let values = match (map.get("value"), map.get("pattern")) {
            (Some(_), Some(_)) => {
                return Err(SnnrfError::Invalid {
                    path: path.to_string(),
                    message: "give either value or pattern, not both".into(),
                })
            }
            (Some(v), None) => vec![integer(v, &format!("{path}.value"))?],
            (None, Some(p)) => {
                let items = list(Some(p), &format!("{path}.pattern"))?;
                items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| integer(v, &format!("{path}.pattern[{i}]")))
                    .collect::<Result<_, _>>()?
            }
            (None, None) => {
                return Err(SnnrfError::Missing {
                    path: format!("{path}.value"),
                })
            }
        };
        Ok(InputSpec { id, values })
    }

    fn neuron(&mut self, v: &Value, path: &str) -> Result<NeuronDecl, SnnrfError> {
        let map = self.mapping(
            v,
            path,
            &[
                "id", "threshold", "leak", "alpha", "arp", "rrp", "p_rest", "p_min", "p_max",
                "prob_table",
            ],
        )?;
        let id = id(map, path)?;
        let d = NeuronParams::default();
        let field = |key: &str| (map.get(key), format!("{path}.{key}"));

        let tau = opt(field("threshold"), integer)?.unwrap_or(d.tau);
        let leak = opt(field("leak"), rational_value)?.unwrap_or(d.leak);
        let alpha = opt(field("alpha"), rational_value)?.unwrap_or(d.alpha);
        let arp = opt(field("arp"), small_unsigned)?.unwrap_or(d.arp);
        let rrp = opt(field("rrp"), small_unsigned)?.unwrap_or(d.rrp);
        let p_rest = opt(field("p_rest"), integer)?.unwrap_or(d.p_rest);
        let p_min = opt(field("p_min"), integer)?.unwrap_or(d.p_min);
        let p_max = opt(field("p_max"), integer)?.unwrap_or(d.p_max);
        let table = match map.get("prob_table") {
            None | Some(Value::Null) => SpikeProbabilityTable::default_for(tau),
            Some(t) => self.table(t, &format!("{path}.prob_table"), tau)?,
        };
        Ok(NeuronDecl {
            id,
            params: NeuronParams {
                tau,
                leak,
                alpha,
                arp,
                rrp,
                p_rest,
                p_min,
                p_max,
                table,
            },
        })
    }

    fn table(&mut self, v: &Value, path: &str, tau: i64) -> Result<SpikeProbabilityTable, SnnrfError> {
        let map = self.mapping(v, path, &["boundaries", "probs", "allow_non_monotone"])?;
        let probs = match map.get("probs") {
            None => None,
            Some(p) => Some(
                list(Some(p), &format!("{path}.probs"))?
                    .iter()
                    .enumerate()
                    .map(|(i, v)| rational_value(v, &format!("{path}.probs[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let boundaries = match map.get("boundaries") {
            None => None,
            Some(b) => Some(
                list(Some(b), &format!("{path}.boundaries"))?
                    .iter()
                    .enumerate()
                    .map(|(i, v)| integer(v, &format!("{path}.boundaries[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        };
        let allow_non_monotone = match map.get("allow_non_monotone") {
            None => false,
            Some(v) => v.as_bool().ok_or_else(|| SnnrfError::Type {
                path: format!("{path}.allow_non_monotone"),
                expected: "a boolean",
            })?,
        };
        let default = SpikeProbabilityTable::default_for(tau);
        let (boundaries, probs) = match (boundaries, probs) {
            (Some(b), Some(p)) => (b, p),
            (None, None) => (default.boundaries, default.probs),
            (Some(b), None) if b.len() == DEFAULT_TABLE_PROBS.len() / 2 => (b, default.probs),
            (Some(_), None) => {
                return Err(SnnrfError::Missing {
                    path: format!("{path}.probs"),
                })
            }
            (None, Some(p)) => {
                let k = (p.len() / 2).max(1) as i64;
                let step = ((tau + k - 1).div_euclid(k)).max(1);
                ((1..=k).map(|i| i * step).collect(), p)
            }
        };
        Ok(SpikeProbabilityTable {
            boundaries,
            probs,
            allow_non_monotone,
        })
    }

    fn endpoint(&mut self, v: &Value, path: &str) -> Result<Endpoint, SnnrfError> {
        let map = self.mapping(v, path, &["type", "id"])?;
        let kind = match map.get("type") {
            None => {
                return Err(SnnrfError::Missing {
                    path: format!("{path}.type"),
                })
            }
            Some(t) => string(t, &format!("{path}.type"))?,
        };
        let id = id(map, path)?;
        match kind.as_str() {
            "input" => Ok(Endpoint::Input(id)),
            "neuron" => Ok(Endpoint::Neuron(id)),
            other => Err(SnnrfError::Invalid {
                path: format!("{path}.type"),
                message: format!("unknown endpoint type {other:?} (expected input or neuron)"),
            }),
        }
    }

    fn edge(&mut self, v: &Value, path: &str) -> Result<EdgeSpec, SnnrfError> {
        let map = self.mapping(v, path, &["from", "to", "weight"])?;
        let get = |key: &str| {
            map.get(key).ok_or_else(|| SnnrfError::Missing {
                path: format!("{path}.{key}"),
            })
        };
        let from = self.endpoint(get("from")?, &format!("{path}.from"))?;
        let to = self.endpoint(get("to")?, &format!("{path}.to"))?;
        let weight = integer(get("weight")?, &format!("{path}.weight"))?;
        Ok(EdgeSpec { from, to, weight })
    }
}

fn list<'a>(v: Option<&'a Value>, path: &str) -> Result<&'a [Value], SnnrfError> {
    match v {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Sequence(items)) => Ok(items),
        Some(_) => Err(SnnrfError::Type {
            path: path.to_string(),
            expected: "a list",
        }),
    }
}

fn opt<T>(
    (value, path): (Option<&Value>, String),
    read: fn(&Value, &str) -> Result<T, SnnrfError>,
) -> Result<Option<T>, SnnrfError> {
    match value {
        None | Some(Value::Null) => Ok(None),
        Some(v) => read(v, &path).map(Some),
    }
}

fn id(map: &Mapping, path: &str) -> Result<u32, SnnrfError> {
    let v = map.get("id").ok_or_else(|| SnnrfError::Missing {
        path: format!("{path}.id"),
    })?;
    small_unsigned(v, &format!("{path}.id"))
}

fn string(v: &Value, path: &str) -> Result<String, SnnrfError> {
    v.as_str().map(str::to_string).ok_or_else(|| SnnrfError::Type {
        path: path.to_string(),
        expected: "a string",
    })
}

fn integer(v: &Value, path: &str) -> Result<i64, SnnrfError> {
    v.as_i64().ok_or_else(|| SnnrfError::Type {
        path: path.to_string(),
        expected: "an integer",
    })
}

fn unsigned(v: &Value, path: &str) -> Result<u64, SnnrfError> {
    v.as_u64().ok_or_else(|| SnnrfError::Type {
        path: path.to_string(),
        expected: "a nonnegative integer",
    })
}

fn small_unsigned(v: &Value, path: &str) -> Result<u32, SnnrfError> {
    let n = unsigned(v, path)?;
    u32::try_from(n).map_err(|_| SnnrfError::Invalid {
        path: path.to_string(),
        message: format!("{n} is out of range"),
    })
}

fn rational_value(v: &Value, path: &str) -> Result<Rational, SnnrfError> {
    let parsed = match v {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(rational::int(i))
            } else {
                n.as_f64().and_then(rational::from_f64_decimal)
            }
        }
        Value::String(s) => rational::parse_rational(s),
        _ => None,
    };
    parsed.ok_or_else(|| SnnrfError::Type {
        path: path.to_string(),
        expected: "a number or an exact fraction string",
    })
}

/// Checks every spec invariant and collects warnings.
pub fn validate(spec: &NetworkSpec) -> ValidationReport {
    let mut report = ValidationReport::default();

    if spec.neurons.is_empty() {
        report.error("network.n_neurons", "network has no neurons");
    }

    let mut input_ids = BTreeSet::new();
    for (i, input) in spec.inputs.iter().enumerate() {
        let path = format!("network.inputs[{i}]");
        if !input_ids.insert(input.id) {
            report.error(&path, format!("duplicate input id {}", input.id));
        }
        if input.values.is_empty() {
            report.error(&path, "input pattern is empty");
        }
    }

    let mut neuron_ids = BTreeSet::new();
    for (i, n) in spec.neurons.iter().enumerate() {
        let path = format!("network.n_neurons[{i}]");
        if !neuron_ids.insert(n.id) {
            report.error(&path, format!("duplicate neuron id {}", n.id));
        }
        for problem in n.params.problems() {
            report.error(&path, problem);
        }
        if n.params.p_max - n.params.p_min > 1000 {
            report.warn(
                &path,
                format!(
                    "potential range [{}, {}] is wider than the default and may explode the state space",
                    n.params.p_min, n.params.p_max
                ),
            );
        }
    }

    let mut seen_edges = BTreeSet::new();
    let mut connected = BTreeSet::new();
    for (i, e) in spec.edges.iter().enumerate() {
        let path = format!("network.edges[{i}]");
        let exists = |ep: Endpoint| match ep {
            Endpoint::Input(id) => input_ids.contains(&id),
            Endpoint::Neuron(id) => neuron_ids.contains(&id),
        };
        if !exists(e.from) {
            report.error(format!("{path}.from"), format!("unknown endpoint {}", e.from));
        }
        match e.to {
            Endpoint::Input(_) => report.error(format!("{path}.to"), "edge target must be a neuron"),
            to if !exists(to) => report.error(format!("{path}.to"), format!("unknown endpoint {to}")),
            _ => {}
        }
        if !seen_edges.insert((e.from, e.to)) {
            report.error(&path, format!("duplicate edge from {} to {}", e.from, e.to));
        }
        for ep in [e.from, e.to] {
            if let Endpoint::Neuron(id) = ep {
                connected.insert(id);
            }
        }
    }
    for (i, n) in spec.neurons.iter().enumerate() {
        if !connected.contains(&n.id) {
            report.warn(
                format!("network.n_neurons[{i}]"),
                format!("neuron {} has no incoming or outgoing edges", n.id),
            );
        }
    }

    for (i, text) in spec.properties.iter().enumerate() {
        if let Err(e) = pctl::parse_formula(text) {
            report.error(format!("network.properties[{i}]"), e.to_string());
        }
    }
    report
}

/// Parses and validates; the spec is returned only when the report is clean.
pub fn load(text: &str, options: ParseOptions) -> Result<(NetworkSpec, ValidationReport), LoadError> {
    let (spec, warnings) = parse_snnrf_with(text, options)?;
    let mut report = validate(&spec);
    report.warnings.splice(0..0, warnings);
    if report.is_ok() {
        Ok((spec, report))
    } else {
        Err(LoadError::Invalid(report))
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Parse(#[from] SnnrfError),
    #[error("invalid network: {}", .0.errors.iter().map(|f| f.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
}

/// Canonical document with every parameter written out.
pub fn serialize(spec: &NetworkSpec) -> String {
    let mut out = String::new();
    writeln!(out, "network:").ok();
    writeln!(out, "  name: {}", quote(&spec.name)).ok();
    writeln!(out, "  simulate:").ok();
    writeln!(out, "    steps: {}", spec.steps).ok();

    if spec.inputs.is_empty() {
        writeln!(out, "  inputs: []").ok();
    } else {
        writeln!(out, "  inputs:").ok();
        for input in &spec.inputs {
            writeln!(out, "    - id: {}", input.id).ok();
            if let [value] = input.values.as_slice() {
                writeln!(out, "      value: {value}").ok();
            } else {
                writeln!(out, "      pattern: [{}]", join(input.values.iter())).ok();
            }
        }
    }

    if spec.neurons.is_empty() {
        writeln!(out, "  n_neurons: []").ok();
    } else {
        writeln!(out, "  n_neurons:").ok();
    }
    for n in &spec.neurons {
        let p = &n.params;
        writeln!(out, "    - id: {}", n.id).ok();
        writeln!(out, "      threshold: {}", p.tau).ok();
        writeln!(out, "      leak: {}", number(&p.leak)).ok();
        writeln!(out, "      alpha: {}", number(&p.alpha)).ok();
        writeln!(out, "      arp: {}", p.arp).ok();
        writeln!(out, "      rrp: {}", p.rrp).ok();
        writeln!(out, "      p_rest: {}", p.p_rest).ok();
        writeln!(out, "      p_min: {}", p.p_min).ok();
        writeln!(out, "      p_max: {}", p.p_max).ok();
        writeln!(out, "      prob_table:").ok();
        writeln!(out, "        boundaries: [{}]", join(p.table.boundaries.iter())).ok();
        writeln!(
            out,
            "        probs: [{}]",
            join(p.table.probs.iter().map(number))
        )
        .ok();
        if p.table.allow_non_monotone {
            writeln!(out, "        allow_non_monotone: true").ok();
        }
    }

    if spec.edges.is_empty() {
        writeln!(out, "  edges: []").ok();
    } else {
        writeln!(out, "  edges:").ok();
    }
    for e in &spec.edges {
        let ep = |ep: Endpoint| match ep {
            Endpoint::Input(id) => format!("{{ type: input, id: {id} }}"),
            Endpoint::Neuron(id) => format!("{{ type: neuron, id: {id} }}"),
        };
        writeln!(out, "    - from: {}", ep(e.from)).ok();
        writeln!(out, "      to: {}", ep(e.to)).ok();
        writeln!(out, "      weight: {}", e.weight).ok();
    }

    if !spec.properties.is_empty() {
        writeln!(out, "  properties:").ok();
        for prop in &spec.properties {
            writeln!(out, "    - {}", quote(prop)).ok();
        }
    }
    out
}

fn join<T: fmt::Display>(items: impl Iterator<Item = T>) -> String {
    items.map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Plain decimal when it survives an `f64` round trip, quoted exact text
/// otherwise.
fn number(q: &Rational) -> String {
    match rational::to_decimal_string(q) {
        Some(d) if rational::from_f64_decimal(d.parse::<f64>().unwrap_or(f64::NAN)).as_ref() == Some(q) => d,
        Some(d) => quote(&d),
        None => quote(&format!("{}/{}", q.numer(), q.denom())),
    }
}

/// YAML double-quoted scalar.
fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            ' '..='~' => out.push(c),
            c if c.is_control() || c.is_whitespace() || c == '\u{FEFF}' => {
                write!(out, "\\u{:04X}", c as u32).ok();
            }
            c if (c as u32) > 0xFFFF => {
                write!(out, "\\U{:08X}", c as u32).ok();
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Index of neuron declarations by id, for callers that need lookups.
pub fn neuron_index(spec: &NetworkSpec) -> BTreeMap<u32, &NeuronParams> {
    spec.neurons.iter().map(|n| (n.id, &n.params)).collect()
}
