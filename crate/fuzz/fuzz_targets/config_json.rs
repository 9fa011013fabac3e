#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use rbmo_core::measures::{gen_lebesgue_grid, AtomicMeasure};
use rbmo_lab::config::{parse_config_str, RunConfig};

fn grid() -> &'static AtomicMeasure {
    static MU: OnceLock<AtomicMeasure> = OnceLock::new();
    MU.get_or_init(|| gen_lebesgue_grid(&[(0.0, 1.0)], 32).unwrap())
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(flags) = parse_config_str(text) {
        if let Ok(config) = RunConfig::resolve(&flags, grid()) {
            assert!(config.beta > config.alpha.powf(grid().growth_dim()));
            assert!(config.eps.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
