//! Acceptance criteria, one test each. Every test prints a single
//! `criterion N PASS|FAIL ...` line before asserting.

use std::io::Write;

use iterlil::acceptance::{self, Outcome};

fn report(o: Outcome) {
    // straight to the process stdout so the line survives output capture
    let _ = writeln!(std::io::stdout().lock(), "{o}");
    assert!(o.pass, "{o}");
}

#[test]
fn criterion_01_renewal_exactness() {
    report(acceptance::renewal_exactness());
}

#[test]
fn criterion_02_mean_count_asymptotics() {
    report(acceptance::mean_count_asymptotics());
}

#[test]
fn criterion_03_oracle_equivalence() {
    report(acceptance::oracle_equivalence());
}

#[test]
fn criterion_04_increment_bound() {
    report(acceptance::increment_bound());
}

#[test]
fn criterion_05_variance_growth() {
    report(acceptance::variance_growth());
}

#[test]
fn criterion_06_supermartingale_bound() {
    report(acceptance::supermartingale_bound());
}

#[test]
fn criterion_07_renewal_clt() {
    report(acceptance::renewal_clt());
}

#[test]
fn criterion_08_lil_envelope() {
    report(acceptance::lil_envelope());
}

#[test]
fn criterion_09_determinism() {
    report(acceptance::determinism());
}

#[test]
fn criterion_10_tail_and_increment_decay() {
    report(acceptance::tail_and_increment_decay());
}
