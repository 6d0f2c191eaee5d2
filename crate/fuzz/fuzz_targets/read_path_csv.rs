#![no_main]

use libfuzzer_sys::fuzz_target;
use mtphase::io::read_path_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_path_csv(data);
});
