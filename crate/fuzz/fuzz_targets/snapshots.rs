#![no_main]

use libfuzzer_sys::fuzz_target;
use slpca::io::parse_snapshots;

// first two bytes pick the expected shape
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    if let Ok(text) = std::str::from_utf8(&data[2..]) {
        let _ = parse_snapshots(text, usize::from(data[0] % 16), usize::from(data[1] % 4));
    }
});
