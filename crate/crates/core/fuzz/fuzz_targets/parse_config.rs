#![no_main]

use iterlil::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = parse_config(Some(text), &[]) {
        let again = parse_config(Some(&cfg.canonical_text()), &[]).expect("canonical config must parse");
        assert_eq!(again.fingerprint(), cfg.fingerprint());
    }
});
