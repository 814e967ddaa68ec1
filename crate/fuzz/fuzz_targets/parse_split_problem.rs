#![no_main]

use libfuzzer_sys::fuzz_target;
use vecreduce::bilinear::SplitProblem;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(p) = SplitProblem::from_json(text) {
        let again = SplitProblem::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(again, p);
    }
});
