#![no_main]

use libfuzzer_sys::fuzz_target;
use tocq::io::parse_bloch;
use tocq::model::{bloch_from_pure, PureState};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(psi) = text.parse::<PureState>() {
        assert!(psi.is_normalized());
        let r = bloch_from_pure(&psi).expect("normalized state has a Bloch vector");
        assert!((r.norm() - 1.0).abs() < 1e-6);
    }
    if let Ok(r) = parse_bloch(text) {
        assert!(r.is_physical());
    }
});
