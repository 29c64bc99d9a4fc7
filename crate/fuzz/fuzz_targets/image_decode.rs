#![no_main]

use etc_jigsaw::raster::decode_image;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        assert_eq!(img.pixels().len(), img.width() * img.height() * img.channels());
    }
});
