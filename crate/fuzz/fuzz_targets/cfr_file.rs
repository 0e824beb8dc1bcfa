#![no_main]

use doppler_har::io::read_cfr;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&flag, body)) = data.split_first() else {
        return;
    };
    if let Ok((header, packets)) = read_cfr(body, flag & 1 == 1) {
        assert!(packets.len() as u64 <= header.records);
        assert!(packets.iter().all(|p| p.values.len() == header.used_subchannels.len()));
    }
});
