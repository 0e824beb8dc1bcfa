#![no_main]

use doppler_har::io::PipelineConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = PipelineConfig::from_toml(text) {
        // anything accepted must survive a write/read cycle
        PipelineConfig::from_toml(&cfg.to_toml()).unwrap();
    }
});
