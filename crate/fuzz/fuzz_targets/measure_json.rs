#![no_main]

use libfuzzer_sys::fuzz_target;
use rbmo_core::measures::AtomicMeasure;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mu) = AtomicMeasure::from_json_str(text) {
        let saved = mu.to_json_string();
        let back = AtomicMeasure::from_json_str(&saved).expect("saved measure reloads");
        assert_eq!(back.to_json_string(), saved);
        assert!((mu.total_mass() - 1.0).abs() < 1e-9);
    }
});
