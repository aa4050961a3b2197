#![no_main]

use libfuzzer_sys::fuzz_target;
use memwall::io::{load_measurements, write_measurements, Format};
use memwall::model::speedups_from_measurements;

fuzz_target!(|data: &[u8]| {
    let Ok(table) = load_measurements(data, Format::Csv, Some(1000)) else { return };
    let written = write_measurements(&table, Format::Csv).expect("a loaded table serializes");
    let again = load_measurements(written.as_slice(), Format::Csv, Some(1000)).expect("written CSV loads");
    assert_eq!(again, table);
    let _ = speedups_from_measurements(&table);
});
