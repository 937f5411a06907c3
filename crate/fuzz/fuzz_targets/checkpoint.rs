#![no_main]

use dnbg::io::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(state) = decode_checkpoint(data) {
        let again = decode_checkpoint(&encode_checkpoint(&state)).expect("re-encoded state decodes");
        assert_eq!(again.num_groups(), state.num_groups());
    }
});
