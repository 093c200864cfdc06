#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = nonlocal::fields::parse_grid(text) {
            let _ = grid.coefficients();
        }
    }
});
