#![no_main]

use beliefrl::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::parse(text, &[]) {
        // A config that parses must survive its own serialisation.
        let again = RunConfig::parse(&cfg.to_toml(), &[]).expect("round trip");
        assert_eq!(again.to_toml(), cfg.to_toml());
    }
});
