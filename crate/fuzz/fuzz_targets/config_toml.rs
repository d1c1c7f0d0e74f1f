#![no_main]

use libfuzzer_sys::fuzz_target;
use walkbound::config::from_toml_str;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = from_toml_str(text) {
        let _ = cfg.diagnostics();
        if let Some(group) = &cfg.group {
            let _ = group.to_spec();
        }
        // anything that parsed must survive a serialize/parse round trip
        if let Ok(back) = toml::to_string(&cfg) {
            from_toml_str(&back).expect("round trip of a valid config");
        }
    }
});
