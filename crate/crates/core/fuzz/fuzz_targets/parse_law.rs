#![no_main]

use iterlil::JointStepLaw;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|spec: &str| {
    if let Ok(law) = JointStepLaw::parse(spec) {
        let canon = law.to_string();
        let again = JointStepLaw::parse(&canon).expect("canonical form must parse");
        assert_eq!(again, law);
        assert!(law.mu() > 0.0 && law.sigma2() >= 0.0);
    }
});
