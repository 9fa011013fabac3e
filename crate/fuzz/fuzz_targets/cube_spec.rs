#![no_main]

use libfuzzer_sys::fuzz_target;
use rbmo_lab::spec::parse_cube_spec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(q) = parse_cube_spec(text) {
        assert!(q.half_side > 0.0 && q.half_side.is_finite());
        assert!(q.contains_point(&q.center));
    }
});
