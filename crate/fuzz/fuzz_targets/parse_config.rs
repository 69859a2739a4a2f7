#![no_main]

use libfuzzer_sys::fuzz_target;
use mcgraph::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::parse(text) {
            let _ = cfg.solver_config();
            if let Ok(resolved) = cfg.resolved().to_toml() {
                let _ = RunConfig::parse(&resolved);
            }
        }
    }
});
