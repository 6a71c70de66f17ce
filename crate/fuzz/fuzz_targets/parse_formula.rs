#![no_main]

use libfuzzer_sys::fuzz_target;
use spikecheck::pctl;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(f) = pctl::parse_formula(text) {
        assert_eq!(pctl::parse_formula(&f.to_string()).as_ref(), Ok(&f));
    }
});
