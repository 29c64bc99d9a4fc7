#![no_main]

use etc_jigsaw::ppm;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = ppm::decode(data) {
        let bytes = ppm::encode(&img).unwrap();
        assert_eq!(ppm::decode(&bytes).unwrap(), img);
    }
});
