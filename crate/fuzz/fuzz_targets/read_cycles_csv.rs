#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::io::read_cycles_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_cycles_csv(data);
});
