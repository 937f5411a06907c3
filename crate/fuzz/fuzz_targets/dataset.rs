#![no_main]

use dnbg::io::Dataset;
use libfuzzer_sys::fuzz_target;

// Input: header length (u16 LE), JSON header, then the raw payload.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let n = u16::from_le_bytes([data[0], data[1]]) as usize;
    let Some(header) = data.get(2..2 + n) else {
        return;
    };
    let Ok(header) = std::str::from_utf8(header) else {
        return;
    };
    if let Ok(d) = Dataset::decode(header, &data[2 + n..]) {
        assert_eq!(d.encode_payload(), &data[2 + n..]);
        let _ = d.frames();
    }
});
