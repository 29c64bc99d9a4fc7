#![no_main]

use etc_jigsaw::cipher::KeyFile;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = KeyFile::from_json(text) {
            assert_eq!(KeyFile::from_json(&file.to_json()).unwrap(), file);
        }
    }
});
