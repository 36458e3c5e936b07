#![no_main]

use libfuzzer_sys::fuzz_target;
use objmot::storage::{parse_report, write_report, ReportFormat};

fuzz_target!(|data: &[u8]| {
    if let Ok(report) = parse_report(data) {
        for format in [ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown] {
            let _ = write_report(&report, format);
        }
    }
});
