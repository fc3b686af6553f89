//! CSV helpers: reals are written with 17 significant digits so every f64
//! survives a write/read cycle unchanged.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::Result;

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Counts are exact integers stored in f64; written without a fraction.
pub fn fmt_count(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 9.007_199_254_740_992e15 {
        format!("{}", x as i64)
    } else {
        fmt_real(x)
    }
}

pub fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(path)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reals_round_trip(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = fmt_real(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn counts_are_integers() {
        assert_eq!(fmt_count(6.0), "6");
        assert_eq!(fmt_count(0.0), "0");
        assert_eq!(fmt_real(0.5), "5.0000000000000000e-1");
    }
}
