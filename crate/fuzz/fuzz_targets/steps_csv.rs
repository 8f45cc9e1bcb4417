#![no_main]
use libfuzzer_sys::fuzz_target;
use symphony_sim::metrics::{read_csv, StepRow};

fuzz_target!(|data: &[u8]| {
    let _ = read_csv::<_, StepRow>(data);
});
