#![no_main]

use libfuzzer_sys::fuzz_target;
use tqc_core::compiler::{compile_source, CNOT_PP_SOURCE};
use tqc_core::optimizer::run_plan;
use tqc_core::scene::{read_plan, write_plan};

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = read_plan(data) {
        assert_eq!(read_plan(&write_plan(&p)).expect("written plans read back"), p);
        if p.steps.len() <= 64 {
            let g = compile_source(CNOT_PP_SOURCE).expect("template compiles");
            let _ = run_plan(&g, &p);
        }
    }
});
