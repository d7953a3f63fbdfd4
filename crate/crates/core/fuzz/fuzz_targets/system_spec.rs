#![no_main]

use libfuzzer_sys::fuzz_target;
use tocq::model::SystemSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<SystemSpec>(data) else {
        return;
    };
    assert!(spec.xi.is_finite() && spec.gamma >= 0.0 && spec.u_bound > 0.0);
    let text = serde_json::to_string(&spec).unwrap();
    let back: SystemSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
});
