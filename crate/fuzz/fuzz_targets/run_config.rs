#![no_main]
//! The full run-configuration parser, including `--set` override handling:
//! the input is split into a JSON document and override strings on newlines.

use libfuzzer_sys::fuzz_target;
use multibubble_cli::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // first line(s): config document; lines after a '\n--\n' marker become
    // --set overrides
    let (doc, overrides) = match text.split_once("\n--\n") {
        Some((d, rest)) => (
            d.to_string(),
            rest.lines().take(8).map(str::to_string).collect::<Vec<_>>(),
        ),
        None => (text.to_string(), vec![]),
    };
    if let Ok(cfg) = RunConfig::from_json_str(&doc, &overrides) {
        let _ = cfg.domain_spec();
        if let Ok(block) = cfg.regime_block() {
            let _ = block.build();
        }
    }
});
