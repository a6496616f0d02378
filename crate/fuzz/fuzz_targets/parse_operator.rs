#![no_main]

use corrwitness::io::{operator_to_json, parse_operator, OperatorFile};
use corrwitness::Tolerances;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(labeled) = parse_operator(text) else {
        return;
    };
    let _ = labeled.density_violations(&Tolerances::default());
    if let Ok(rho) = labeled.clone().density() {
        // accepted states survive a write/read cycle unchanged
        let again = parse_operator(&operator_to_json(&OperatorFile::from_density(&rho))).unwrap();
        assert_eq!(&again.matrix, rho.matrix());
    }
    let _ = labeled.hermitian();
});
