#![no_main]

use iterlil::grid::GridSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|spec: &str| {
    if let Ok(grid) = GridSpec::parse(spec) {
        assert_eq!(GridSpec::parse(&grid.to_string()).as_ref(), Ok(&grid));
        // bounded range so geometric and uniform recipes stay small
        if let Ok(times) = grid.times(1.0, 1e3) {
            assert!(times.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
