#![no_main]

use libfuzzer_sys::fuzz_target;
use walkbound::pipeline::{bundle_from_json_str, render_bounds_md};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(bundle) = bundle_from_json_str(text) {
        let _ = bundle.exit_ok();
        let _ = render_bounds_md(&bundle);
        if let Some(series) = &bundle.series {
            let _ = series.to_csv();
        }
        if let Some(cheb) = &bundle.chebyshev {
            let _ = cheb.to_csv();
        }
    }
});
