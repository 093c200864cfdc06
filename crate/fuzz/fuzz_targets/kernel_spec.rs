#![no_main]

use libfuzzer_sys::fuzz_target;
use nonlocal::kernels::KernelSpec;

fuzz_target!(|data: &[u8]| {
    // Anything that deserializes has been validated, so evaluation must not panic.
    if let Ok(spec) = serde_json::from_slice::<KernelSpec>(data) {
        let _ = spec.gamma_r(0.5);
        let _ = spec.alpha_r(0.5);
        let _ = serde_json::to_string(&spec);
    }
});
