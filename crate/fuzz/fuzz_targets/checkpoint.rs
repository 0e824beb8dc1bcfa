#![no_main]

use doppler_har::classify::Model;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = Model::read(data);
});
