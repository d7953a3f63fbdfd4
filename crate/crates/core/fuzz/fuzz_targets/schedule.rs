#![no_main]

use libfuzzer_sys::fuzz_target;
use tocq::io::parse_schedule_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(sched) = parse_schedule_json(text) else {
        return;
    };
    let tf = sched.duration();
    assert!(tf.is_finite() && tf > 0.0);
    let switches = sched.switch_times();
    assert!(switches.windows(2).all(|w| w[0] <= w[1]));
    let text = serde_json::to_string(&sched).unwrap();
    parse_schedule_json(&text).expect("serialized schedule parses");
});
