#![no_main]

use gridirl::io::{format_theta, parse_theta};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(theta) = parse_theta(text) {
        assert!(theta.is_valid());
        assert_eq!(parse_theta(&format_theta(&theta)).expect("formatted output parses"), theta);
    }
});
