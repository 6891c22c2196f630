#![no_main]

use cautious::{apply_mask, MaskRule};
use libfuzzer_sys::fuzz_target;

// Layout: [json_len: u8][json][f64 pairs for u and g].
fuzz_target!(|data: &[u8]| {
    let Some((&n, rest)) = data.split_first() else { return };
    let n = (n as usize).min(rest.len());
    let (json, floats) = rest.split_at(n);
    let Ok(rule) = serde_json::from_slice::<MaskRule>(json) else { return };
    if rule.validate().is_err() {
        return;
    }
    let xs: Vec<f64> = floats
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let d = xs.len() / 2;
    if d == 0 {
        return;
    }
    let (u, g) = xs.split_at(d);
    let g = &g[..d];
    if let Ok(out) = apply_mask(&rule, u, g) {
        assert_eq!(out.weights.len(), d);
        assert!(out.ratio >= 0.0 && out.ratio <= 1.0);
    }
});
