#![no_main]

use desing::polyring::{parse_ideal_infer, parse_poly, parse_poly_infer};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok((p, vars)) = parse_poly_infer(s) {
        let shown = p.display(&vars);
        assert_eq!(parse_poly(&shown, &vars).expect("reparse"), p);
    }
    let _ = parse_ideal_infer(s);
});
