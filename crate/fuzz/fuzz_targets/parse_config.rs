#![no_main]

use dfcrb_cli::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse(text) {
        // anything accepted must build its geometry and sections
        cfg.geometry().expect("validated geometry builds");
        if let Some(s) = &cfg.sweep {
            s.modes().expect("validated modes parse");
        }
        if let Some(m) = &cfg.mc {
            m.estimators().expect("validated estimators parse");
        }
    }
});
