#![no_main]

use corrwitness_cli::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::parse(text) {
        let _ = config.tolerances();
        let _ = config.tol_det();
        let _ = config.overridden_by(RunConfig::default());
    }
});
