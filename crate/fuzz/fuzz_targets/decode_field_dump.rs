#![no_main]

use libfuzzer_sys::fuzz_target;
use mcgraph::dump::{decode, encode};

fuzz_target!(|data: &[u8]| {
    if let Ok(raw) = decode(data) {
        assert_eq!(encode(raw.points, raw.extent, &raw.values), data);
    }
});
