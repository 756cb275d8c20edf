#![no_main]

use libfuzzer_sys::fuzz_target;
use tqc_core::scene::{read_scene, write_scene};
use tqc_core::topology::compute_signature;

fuzz_target!(|data: &[u8]| {
    if let Ok(g) = read_scene(data) {
        let bytes = write_scene(&g);
        assert_eq!(read_scene(&bytes).expect("written scenes read back"), g);
        let _ = compute_signature(&g);
    }
});
