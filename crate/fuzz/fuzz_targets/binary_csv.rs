#![no_main]

use libfuzzer_sys::fuzz_target;
use slpca::io::{parse_binary_csv, write_binary_csv, TimestampColumn};

fuzz_target!(|data: &[u8]| {
    for mode in [TimestampColumn::Auto, TimestampColumn::Present, TimestampColumn::Absent] {
        if let Ok(parsed) = parse_binary_csv(data, mode) {
            // whatever parses must survive a write/read cycle unchanged
            let mut buf = Vec::new();
            write_binary_csv(&mut buf, &parsed).unwrap();
            let mode = if parsed.timestamps.is_some() { TimestampColumn::Present } else { TimestampColumn::Absent };
            assert_eq!(parse_binary_csv(&buf, mode).unwrap().matrix, parsed.matrix);
        }
    }
});
