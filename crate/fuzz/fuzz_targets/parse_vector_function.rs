#![no_main]

use libfuzzer_sys::fuzz_target;
use vecreduce::spaces::VectorFunction;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = VectorFunction::from_json(text) {
        let again = VectorFunction::from_json(&x.to_json().unwrap()).unwrap();
        assert_eq!(again, x);
    }
});
