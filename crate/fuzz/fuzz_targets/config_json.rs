#![no_main]

use libfuzzer_sys::fuzz_target;
use walkbound::config::from_json_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = from_json_str(text) {
        let _ = cfg.diagnostics();
        if let Some(group) = &cfg.group {
            let _ = group.to_spec();
        }
        // JSON cannot carry non-finite floats, so serialization may refuse;
        // when it succeeds the round trip must parse
        if let Ok(back) = serde_json::to_string(&cfg) {
            from_json_str(&back).expect("round trip of a valid config");
        }
    }
});
