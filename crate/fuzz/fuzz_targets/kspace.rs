#![no_main]

use dnbg::io::{decode_kspace, encode_kspace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(frames) = decode_kspace(data) {
        assert_eq!(encode_kspace(&frames), data);
    }
});
