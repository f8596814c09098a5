#![no_main]

use libfuzzer_sys::fuzz_target;
use sphere_ramsey::certificate::Certificate;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cert) = Certificate::decode(text) else { return };
    // Re-encoding a decoded certificate must decode to the same value.
    assert_eq!(Certificate::decode(&cert.to_json()).as_ref(), Ok(&cert));
    // Keep clique searches small enough for the fuzzer's time budget.
    if cert.points.len() <= 24 && cert.k <= 256 {
        let _ = cert.verify();
    }
});
