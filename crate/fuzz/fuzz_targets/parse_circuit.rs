#![no_main]

use libfuzzer_sys::fuzz_target;
use tqc_core::circuit::{parse_circuit, validate_circuit};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(c) = parse_circuit(text) {
        let _ = validate_circuit(&c);
        let again = parse_circuit(&c.render()).expect("rendered circuits parse");
        assert_eq!(again, c);
    }
});
