#![no_main]

use libfuzzer_sys::fuzz_target;

// NUL-separated argument list; parsed only, never executed.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let args = std::iter::once("cautious").chain(text.split('\0'));
    if let Ok(cli) = cautious_cli::parse_args(args) {
        let _ = format!("{cli:?}");
    }
});
