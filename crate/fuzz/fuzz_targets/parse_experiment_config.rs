#![no_main]

use libfuzzer_sys::fuzz_target;
use vecreduce_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = ExperimentConfig::from_json(text) {
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
});
