#![no_main]
use libfuzzer_sys::fuzz_target;
use symphony_sim::experiment::{parse_values, SweepParam};

const PARAMS: [SweepParam; 5] = [
    SweepParam::K,
    SweepParam::ChunkBytes,
    SweepParam::ImbalanceRatio,
    SweepParam::TWin,
    SweepParam::NWarmup,
];

// First byte picks the parameter, the rest is the value list.
fuzz_target!(|data: &[u8]| {
    let Some((&sel, rest)) = data.split_first() else {
        return;
    };
    let Ok(list) = std::str::from_utf8(rest) else {
        return;
    };
    if let Ok(values) = parse_values(PARAMS[sel as usize % PARAMS.len()], list) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
