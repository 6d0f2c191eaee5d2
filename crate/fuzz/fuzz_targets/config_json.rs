#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::config::RunConfig;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = RunConfig::from_json(text) {
        let again = RunConfig::from_json(&cfg.to_json()).expect("serialized config parses");
        assert_eq!(cfg.hash(), again.hash());
    }
});
