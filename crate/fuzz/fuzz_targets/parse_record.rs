#![no_main]

use desing::presentations::parse_record;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok((vars, p)) = parse_record(s) {
        let (vars2, q) = parse_record(&p.record(&vars)).expect("reparse");
        assert_eq!(vars2, vars);
        assert_eq!(q, p);
    }
});
