#![no_main]

use libfuzzer_sys::fuzz_target;
use rbmo_lab::spec::{parse_measure_spec, MeasureSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // only generators are loaded; paths would touch the filesystem
    if let Ok(spec @ (MeasureSpec::Lebesgue { .. } | MeasureSpec::Cantor { .. })) = parse_measure_spec(text) {
        let small = match &spec {
            MeasureSpec::Lebesgue { per_side, dim } => per_side.pow(*dim as u32) <= 4096,
            MeasureSpec::Cantor { depth, .. } => *depth <= 12,
            MeasureSpec::File(_) => false,
        };
        if small {
            let _ = spec.load();
        }
    }
});
