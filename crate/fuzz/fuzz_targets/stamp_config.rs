#![no_main]

use libfuzzer_sys::fuzz_target;
use photostamp::frequency::CoeffSelector;
use photostamp::spatial::ChannelRoles;
use photostamp::tamper::ScenarioName;
use photostamp::verifier::StampConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(cfg) = serde_json::from_slice::<StampConfig>(data) {
        let json = serde_json::to_vec(&cfg).expect("serialize config");
        let back: StampConfig = serde_json::from_slice(&json).expect("config round trip");
        assert_eq!(back, cfg);
    }
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = StampConfig::technique(s);
        let _ = ChannelRoles::parse(s);
        let _ = s.parse::<CoeffSelector>();
        let _ = s.parse::<ScenarioName>();
    }
});
