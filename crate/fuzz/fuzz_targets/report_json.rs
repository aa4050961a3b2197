#![no_main]

use libfuzzer_sys::fuzz_target;
use memwall::harness::{ComparisonReport, StudyReport};
use memwall::io::{read_report, report_kind, write_report, Format, ReportKind};

fuzz_target!(|data: &[u8]| {
    match report_kind(data) {
        Ok(ReportKind::Study) => {
            if let Ok(report) = read_report::<StudyReport>(data) {
                let written = write_report(&report, Format::Json).expect("serializes");
                assert_eq!(read_report::<StudyReport>(&written).expect("reloads"), report);
                let _ = write_report(&report, Format::Csv);
            }
        }
        Ok(ReportKind::Comparison) => {
            if let Ok(report) = read_report::<ComparisonReport>(data) {
                let written = write_report(&report, Format::Json).expect("serializes");
                assert_eq!(read_report::<ComparisonReport>(&written).expect("reloads"), report);
                let _ = write_report(&report, Format::Csv);
            }
        }
        Err(_) => {
            assert!(read_report::<StudyReport>(data).is_err());
            assert!(read_report::<ComparisonReport>(data).is_err());
        }
    }
});
