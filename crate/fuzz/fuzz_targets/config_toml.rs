#![no_main]
use libfuzzer_sys::fuzz_target;
use symphony_sim::config::ScenarioConfig;

// Anything that validates must survive a serialize/parse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ScenarioConfig::from_toml_str(text) {
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).expect("re-parse");
        assert_eq!(cfg, again);
    }
});
