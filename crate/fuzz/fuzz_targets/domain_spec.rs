#![no_main]
//! Domain specifications arrive as untrusted JSON documents; parsing and
//! validation must never panic.

use libfuzzer_sys::fuzz_target;
use multibubble::geometry::DomainSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(value) = serde_json::from_str::<serde_json::Value>(text) else {
        return;
    };
    if let Ok(spec) = DomainSpec::from_json_value(&value) {
        // exercise the cheap geometric queries on accepted specs
        let _ = spec.validate();
        let _ = spec.volume();
        let _ = spec.diameter();
        let _ = spec.boundary_distance(&vec![0.1; spec.dim()]);
        let round = spec.to_json_value();
        let back = DomainSpec::from_json_value(&round).expect("round trip must stay valid");
        assert_eq!(back.dim(), spec.dim());
    }
});
