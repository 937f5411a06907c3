#![no_main]

use dnbg::io::{decode_grouping, encode_grouping};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = decode_grouping(data) {
        assert_eq!(encode_grouping(&g), data);
    }
});
