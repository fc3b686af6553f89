#![no_main]

use iterlil::renewal::RenewalTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = RenewalTable::read_csv(data) {
        let mut out = Vec::new();
        table.write_csv(&mut out).unwrap();
        let again = RenewalTable::read_csv(out.as_slice()).unwrap();
        assert_eq!(again.u, table.u);
        assert_eq!(again.v, table.v);
        let _ = table.u_at(table.t_max * 0.5);
    }
});
