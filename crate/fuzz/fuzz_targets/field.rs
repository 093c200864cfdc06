#![no_main]

use libfuzzer_sys::fuzz_target;
use nonlocal::fields::ScalarField;
use nonlocal::Point;

fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let n = 1 + (n % 3) as usize;
    if let Ok(desc) = std::str::from_utf8(rest) {
        if let Ok(u) = ScalarField::parse(desc, n) {
            let _ = u.eval(&Point::zero(n));
        }
    }
});
