#![no_main]

use libfuzzer_sys::fuzz_target;
use rbmo_lab::spec::parse_function_spec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_function_spec(text);
    }
});
