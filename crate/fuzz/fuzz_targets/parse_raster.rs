#![no_main]

use gridirl::io::parse_raster;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&dims, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let (w, h) = (usize::from(dims & 0x0f) + 1, usize::from(dims >> 4) + 1);
    if let Ok(channels) = parse_raster(text, w, h) {
        assert!(!channels.is_empty());
        assert!(channels.iter().all(|c| c.len() == w * h));
    }
});
