#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use photostamp_pas::{handle_verify, Registry, VerifyRequest};

fn registry() -> &'static Registry {
    static REG: OnceLock<Registry> = OnceLock::new();
    REG.get_or_init(|| {
        let path = std::env::temp_dir().join(format!("photostamp-fuzz-{}.json", std::process::id()));
        let reg = Registry::open(path).expect("open fuzz register");
        reg.register("CAM-001").expect("seed camera");
        reg
    })
}

fuzz_target!(|data: &[u8]| {
    if let Ok(req) = serde_json::from_slice::<VerifyRequest>(data) {
        let _ = handle_verify(registry(), &req);
    }
});
