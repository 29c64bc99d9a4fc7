#![no_main]

use etc_jigsaw::channel::decode_jpeg;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_jpeg(data);
});
