#![no_main]

use libfuzzer_sys::fuzz_target;
use vecreduce::reducing::ReducingMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(a) = ReducingMatrix::from_json(text) {
        let again = ReducingMatrix::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(again.matrix(), a.matrix());
    }
});
