#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod prism;

use std::path::PathBuf;

use spikecheck::network::NetworkSpec;
use spikecheck::snnrf;

pub const FIXTURES: [&str; 4] = [
    "single_neuron",
    "contralateral_inhibition",
    "cec_single_spike",
    "cec_both_required",
];

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(format!("{name}.yaml"))).expect("fixture exists")
}

pub fn fixture(name: &str) -> NetworkSpec {
    snnrf::load(&fixture_text(name), Default::default()).expect("fixture is valid").0
}

/// Step-bounded properties (bounds at most 3) checked against brute force.
pub fn bounded_properties(name: &str) -> &'static [&'static str] {
    match name {
        "single_neuron" => &[
            "P=? [ X (y1=1) ]",
            "P=? [ F<=3 (y1=1) ]",
            "P=? [ G<=3 (s1!=2) ]",
            "P=? [ (y1=0) U<=3 (s1=1) ]",
            "P=? [ F<=3 ((y1=1) & (X (s1=1))) ]",
            "P=? [ X (X (p1>5)) ]",
            "P=? [ G<=2 ((y1=1) -> (X (aref1=ARP))) ]",
            "P=? [ F<=1 (G<=2 (y1=0)) ]",
        ],
        "contralateral_inhibition" => &[
            "P=? [ F<=3 (y2=1) ]",
            "P=? [ G<=3 (y2=0) ]",
            "P=? [ (y2=0) U<=3 (y1=1) ]",
            "P=? [ F<=3 ((y1=1) & (F<=1 (p2<0))) ]",
            "P=? [ X (X (X (s1=2))) ]",
        ],
        "cec_single_spike" | "cec_both_required" => &[
            "P=? [ F<=3 (y3=1) ]",
            "P=? [ (y3=0) U<=3 ((y1=1) & (y2=1)) ]",
            "P=? [ G<=3 ((y1=0) | (y2=0)) ]",
            "P=? [ X (X (X (y3=1))) ]",
            "P=? [ F<=2 ((y1=1) & (X (p3>=6))) ]",
        ],
        _ => &[],
    }
}

/// Three bounded properties per fixture with nontrivial probabilities, for
/// the Monte-Carlo bridge.
pub fn sampled_properties(name: &str) -> [&'static str; 3] {
    match name {
        "single_neuron" => ["F<=3 (y1=1)", "G<=5 (s1!=2)", "X (X (p1>5))"],
        "contralateral_inhibition" => ["F<=4 (y2=1)", "(y2=0) U<=4 (y1=1)", "G<=4 (p1>=0)"],
        _ => ["F<=4 (y3=1)", "(y3=0) U<=4 ((y1=1) & (y2=1))", "G<=3 ((y1=0) | (y2=0))"],
    }
}
