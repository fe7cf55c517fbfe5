#![no_main]

use beliefrl::metrics::{read_metrics, MetricsWriter};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_metrics(data) {
        let mut w = MetricsWriter::new(Vec::new()).expect("header");
        for r in &rows {
            w.write(r).expect("write");
        }
        let out = w.into_inner().expect("flush");
        assert_eq!(read_metrics(out.as_slice()).expect("re-read").len(), rows.len());
    }
});
