#![no_main]

use libfuzzer_sys::fuzz_target;
use photostamp_pas::parse_register;

fuzz_target!(|data: &[u8]| {
    let _ = parse_register(data);
});
