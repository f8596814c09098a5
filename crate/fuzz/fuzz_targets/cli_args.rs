#![no_main]

use libfuzzer_sys::fuzz_target;

// Arguments are NUL-separated. Only parsing is exercised: running arbitrary
// commands could write files or start long simulations.
fuzz_target!(|data: &[u8]| {
    let args = std::iter::once("sphere-ramsey".to_string())
        .chain(data.split(|&b| b == 0).map(|a| String::from_utf8_lossy(a).into_owned()));
    let _ = sphere_ramsey_cli::parse_args(args);
});
