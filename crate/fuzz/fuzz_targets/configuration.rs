#![no_main]
//! Regime and configuration records are read back from result files and
//! user configs; deserialisation plus shape checks and the coordinate
//! round trip must never panic.

use libfuzzer_sys::fuzz_target;
use multibubble::reduced::{Configuration, Regime};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(text) else {
        return;
    };
    let regime: Option<Regime> = value
        .get("regime")
        .and_then(|v| serde_json::from_value(v.clone()).ok());
    let config: Option<Configuration> = value
        .get("configuration")
        .and_then(|v| serde_json::from_value(v.clone()).ok());
    if let (Some(regime), Some(config)) = (regime, config) {
        if regime.validate().is_err() || regime.kappa > 16 || regime.n > 8 {
            return;
        }
        if config.check_shape(&regime).is_ok() {
            let coords = config.to_coords();
            if coords.iter().all(|c| c.is_finite()) {
                let back = Configuration::from_coords(&regime, &coords)
                    .expect("coordinate round trip of a valid shape");
                assert_eq!(back.to_coords().len(), coords.len());
            }
        }
    }
});
