#![no_main]

use dnbg::io::{decode_bitmap, decode_sidecar, encode_bitmap};
use libfuzzer_sys::fuzz_target;

// Input: sidecar length (u16 LE), sidecar JSON, then the packed bits.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let Some(json) = data.get(2..2 + n) else {
        return;
    };
    let Ok(json) = std::str::from_utf8(json) else {
        return;
    };
    let Ok(sidecar) = decode_sidecar(json) else {
        return;
    };
    if let Ok(mask) = decode_bitmap(&data[2 + n..], &sidecar) {
        assert_eq!(encode_bitmap(&mask), &data[2 + n..]);
    }
});
