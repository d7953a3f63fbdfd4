#![no_main]

use libfuzzer_sys::fuzz_target;
use tocq::optimize::ProtocolStructure;
use tocq::propagate::SegmentKind;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(s) = text.parse::<ProtocolStructure>() {
        let again: ProtocolStructure = s.label().parse().unwrap();
        assert_eq!(again, s);
        assert!(s.kinds().windows(2).all(|w| w[0] != w[1] || w[0] == SegmentKind::Singular));
    }
    let _ = ProtocolStructure::parse_catalog(text);
});
