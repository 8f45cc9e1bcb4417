#![no_main]
use libfuzzer_sys::fuzz_target;
use symphony_sim::metrics::{read_csv, SummaryRow};

fuzz_target!(|data: &[u8]| {
    let _ = read_csv::<_, SummaryRow>(data);
});
