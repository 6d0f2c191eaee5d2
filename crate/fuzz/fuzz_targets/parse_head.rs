#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::Head;

fuzz_target!(|text: &str| {
    if let Ok(head) = text.parse::<Head>() {
        let again: Head = head.to_string().parse().expect("display output parses");
        assert_eq!(head, again);
    }
});
