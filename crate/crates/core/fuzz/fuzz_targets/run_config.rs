#![no_main]

use libfuzzer_sys::fuzz_target;
use tocq::io::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_json(text) else {
        return;
    };
    let h = cfg.hash().expect("a parsed config hashes");
    assert_eq!(h.len(), 64);
    let _ = cfg.scenario();
    let _ = cfg.catalog();
    let _ = cfg.search_options();
});
