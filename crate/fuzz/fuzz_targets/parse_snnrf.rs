#![no_main]

use libfuzzer_sys::fuzz_target;
use spikecheck::snnrf;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(spec) = snnrf::parse_snnrf(text) else { return };
    if snnrf::validate(&spec).is_ok() {
        let again = snnrf::parse_snnrf(&snnrf::serialize(&spec)).expect("serialized spec parses");
        assert_eq!(again, spec);
    }
});
