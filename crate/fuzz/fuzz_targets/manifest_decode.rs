#![no_main]

use libfuzzer_sys::fuzz_target;
use sphere_ramsey_cli::RunManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = RunManifest::decode(text) {
        assert_eq!(RunManifest::decode(&m.to_json()), Ok(m));
    }
});
