#![no_main]

use cautious::harness::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_json(text) {
        let fp = cfg.fingerprint();
        assert_eq!(fp.len(), 12);
        // Serialized configs must parse back to the same fingerprint.
        let again = serde_json::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_json(&again).unwrap();
        assert_eq!(back.fingerprint(), fp);
    }
});
