//! Replays the checked-in manifest and argv fuzz corpora.

use std::path::PathBuf;

use sphere_ramsey_cli::{parse_args, RunManifest};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut seeds: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .expect("corpus directory exists")
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap())
        })
        .collect();
    seeds.sort();
    seeds
}

#[test]
fn manifest_seeds() {
    for (name, bytes) in corpus("manifest_decode") {
        let decoded = RunManifest::decode(std::str::from_utf8(&bytes).unwrap());
        if matches!(name.as_str(), "certify.json" | "constants.json") {
            let m = decoded.unwrap();
            assert_eq!(RunManifest::decode(&m.to_json()), Ok(m));
        } else {
            assert!(decoded.is_err(), "{name} should be rejected");
        }
    }
}

#[test]
fn argv_seeds() {
    for (name, bytes) in corpus("cli_args") {
        let args: Vec<String> = if bytes.is_empty() {
            Vec::new()
        } else {
            bytes.split(|&b| b == 0).map(|a| String::from_utf8_lossy(a).into_owned()).collect()
        };
        let parsed = parse_args(std::iter::once("sphere-ramsey".to_string()).chain(args));
        let should_parse = !matches!(name.as_str(), "unknown_flag" | "bad_p" | "empty");
        assert_eq!(parsed.is_ok(), should_parse, "{name}");
    }
}
