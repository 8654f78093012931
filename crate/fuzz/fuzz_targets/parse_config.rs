#![no_main]

use gridirl::config::ExperimentConfig;
use gridirl::io::parse_key_values;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if parse_key_values(text).is_ok() {
        let _ = ExperimentConfig::parse(text);
    }
});
