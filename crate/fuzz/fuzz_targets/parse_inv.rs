#![no_main]

use desing::invariant::InvValue;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(v) = s.parse::<InvValue>() {
        let back: InvValue = v.to_string().parse().expect("reparse");
        assert_eq!(back, v);
        assert_eq!(back.mu_final, v.mu_final);
    }
});
