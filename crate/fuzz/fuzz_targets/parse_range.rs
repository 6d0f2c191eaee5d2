#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::io::parse_range;

fuzz_target!(|text: &str| {
    if let Ok(values) = parse_range(text) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| v.is_finite()));
    }
});
