#![no_main]

use libfuzzer_sys::fuzz_target;
use memwall::io::{load_measurements, write_measurements, Format};

fuzz_target!(|data: &[u8]| {
    let Ok(table) = load_measurements(data, Format::Json, None) else { return };
    let written = write_measurements(&table, Format::Json).expect("a loaded table serializes");
    let again = load_measurements(written.as_slice(), Format::Json, None).expect("written JSON loads");
    assert_eq!(again, table);
});
