#![no_main]

use libfuzzer_sys::fuzz_target;
use photostamp::imageio::{decode, encode, ImageFormat};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode(data) {
        assert_eq!(img.pixels().len(), img.width() as usize * img.height() as usize);
        // anything we can read we must be able to write back losslessly
        if let Ok(png) = encode(&img, ImageFormat::Png) {
            let again = decode(&png).expect("re-decode own PNG");
            assert_eq!(again.pixels(), img.pixels());
        }
    }
});
