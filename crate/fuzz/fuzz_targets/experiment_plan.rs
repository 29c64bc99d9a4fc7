#![no_main]

use etc_jigsaw::harness::ExperimentPlan;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ExperimentPlan::from_json(text);
    }
});
