#![no_main]
//! Engine import reconstructs a least-squares solver from stored geometry;
//! malformed or hostile documents must be rejected without panicking. The
//! target gates the accepted point count so iterations stay fast.

use libfuzzer_sys::fuzz_target;
use multibubble::green::GreenEngine;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(text) else {
        return;
    };
    // keep the factorisation small inside the fuzzer
    let count = |key: &str| {
        value
            .get(key)
            .and_then(|v| v.as_array())
            .map(|a| a.len())
            .unwrap_or(0)
    };
    if count("charges") + count("colloc_points") + count("validation_points") > 256 {
        return;
    }
    if let Ok(engine) = GreenEngine::import_json(&value) {
        use multibubble::green::GreenSource;
        let n = engine.dim();
        let _ = engine.robin(&vec![0.01; n]);
    }
});
