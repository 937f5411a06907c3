#![no_main]

use dnbg::io::{decode_pgm, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(mask) = decode_pgm(data) {
        let again = decode_pgm(&encode_pgm(&mask)).expect("re-encoded mask decodes");
        assert_eq!(again.bits(), mask.bits());
    }
});
