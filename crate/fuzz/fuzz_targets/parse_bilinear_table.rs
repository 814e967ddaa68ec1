#![no_main]

use libfuzzer_sys::fuzz_target;
use vecreduce::bilinear::BilinearTable;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = BilinearTable::from_json(text) {
        let again = BilinearTable::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(again, t);
    }
});
