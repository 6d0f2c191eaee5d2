#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::model::{format_word, parse_word};

fuzz_target!(|text: &str| {
    if let Ok(word) = parse_word(text) {
        assert_eq!(parse_word(&format_word(&word)).unwrap(), word);
    }
});
