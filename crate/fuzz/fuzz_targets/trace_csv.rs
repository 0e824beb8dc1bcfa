#![no_main]

use doppler_har::doppler::read_trace_csv;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = read_trace_csv(data) {
        assert_eq!(trace.data.len(), trace.rows * trace.cols);
    }
});
