#![no_main]

use etc_jigsaw::solver::AssemblyResult;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(result) = AssemblyResult::from_json(text) {
            let mut cells = result.cells();
            cells.sort_unstable();
            assert_eq!(cells, (0..result.len()).collect::<Vec<_>>());
        }
    }
});
