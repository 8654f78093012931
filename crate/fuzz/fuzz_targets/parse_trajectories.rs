#![no_main]

use gridirl::io::{format_trajectories, parse_trajectories};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trajs) = parse_trajectories(text) {
        // Whatever parses must survive a write and re-read unchanged.
        let again = parse_trajectories(&format_trajectories(&trajs)).expect("formatted output parses");
        assert_eq!(again, trajs);
    }
});
