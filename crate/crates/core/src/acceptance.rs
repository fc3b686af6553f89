//! The acceptance suite: ten fixed-seed experiments with pass/fail verdicts.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::Rng;

use crate::branching::{simulate_generations, BranchingOptions, RunSeed};
use crate::config::McConfig;
use crate::distributions::JointStepLaw;
use crate::error::Result;
use crate::grid::GridSpec;
use crate::lil::{
    clt_check, lil_scan, nu_increment_check, supermartingale_check, tail_sum_check, variance_scan, LilScanConfig,
};
use crate::renewal::{build_tables, check_subadditivity, renewal_function, vj_monte_carlo};
use crate::rng::Stream;
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.1} s)",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn law(spec: &str) -> JointStepLaw {
    JointStepLaw::parse(spec).expect("built-in law spec")
}

/// Runs `body`, converting errors into failures and enforcing the time budget.
fn timed(id: u8, name: &'static str, budget: Option<f64>, body: impl FnOnce() -> Result<(bool, String)>) -> Outcome {
    let start = Instant::now();
    let res = body();
    let seconds = start.elapsed().as_secs_f64();
    let (mut pass, mut detail) = match res {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(b) = budget {
        if seconds > b {
            pass = false;
            detail.push_str(&format!("; over the {b} s budget"));
        }
    }
    Outcome {
        id,
        name,
        pass,
        detail,
        seconds,
    }
}

pub fn renewal_exactness() -> Outcome {
    timed(1, "renewal exactness", Some(1.0), || {
        let t = renewal_function(&law("exp_indep(1,1)"), 0.01, 50.0)?;
        let err = (t.u_at(50.0)? - 51.0).abs();
        Ok((err < 0.05, format!("|U(50) - 51| = {err:.3e}")))
    })
}

pub fn mean_count_asymptotics() -> Outcome {
    timed(2, "V_j(t) ~ t^j / (j! mu^j)", Some(30.0), || {
        let a = build_tables(&law("eta_eq_xi(exp(1))"), 0.01, 50.0, 2)?;
        let e2 = (a.v_at(2, 50.0)? / 1250.0 - 1.0).abs();
        let b = build_tables(&law("exp_indep(1,1)"), 0.01, 200.0, 3)?;
        let mut pass = e2 < 1e-2;
        let mut detail = format!("coupled V_2 rel err {e2:.2e}");
        for (j, fact) in [(2usize, 2.0), (3, 6.0)] {
            let r = (b.v_at(j, 200.0)? * fact / 200f64.powi(j as i32) - 1.0).abs();
            pass &= r < 0.05;
            detail.push_str(&format!("; exp_indep j={j} rel err {r:.2e}"));
        }
        Ok((pass, detail))
    })
}

pub fn oracle_equivalence() -> Outcome {
    timed(3, "table vs Monte Carlo V_2", Some(120.0), || {
        let l = law("exp_indep(1,1)");
        let table = build_tables(&l, 0.01, 50.0, 2)?;
        let grid: Vec<f64> = (1..=10).map(|i| 5.0 * i as f64).collect();
        let mc = vj_monte_carlo(&l, 2, &grid, 10_000, 303)?;
        let mut worst: f64 = 0.0;
        for (i, &t) in grid.iter().enumerate() {
            worst = worst.max((mc.mean[i] - table.v_at(2, t)?).abs() / mc.se[i]);
        }
        let det = simulate_generations(
            &law("det(1,0.5)"),
            3.0,
            2,
            &[3.0],
            RunSeed { master: 0, replicate: 0 },
            BranchingOptions::default(),
        )?;
        let y2 = det.counts[1].values[0];
        Ok((
            worst <= 3.0 && y2 == 6.0,
            format!("max |MC - table| / SE = {worst:.2}; det Y_2(3) = {y2}"),
        ))
    })
}

pub fn increment_bound() -> Outcome {
    timed(4, "V_k increment bound", Some(5.0), || {
        let table = build_tables(&law("exp_indep(1,1)"), 0.01, 50.0, 2)?;
        let mut rng = Stream::replicate(404, 0);
        let mut worst = f64::INFINITY;
        let mut violations = 0;
        for _ in 0..1000 {
            let x = rng.random_range(0.01..40.0);
            let h = rng.random_range(0.01..10.0);
            for k in 1..=2 {
                let c = check_subadditivity(&table, k, x, h)?;
                worst = worst.min(c.residual + c.eps_num);
                if !c.holds() {
                    violations += 1;
                }
            }
        }
        Ok((violations == 0, format!("{violations} violations in 2000; min residual + eps = {worst:.3e}")))
    })
}

pub fn variance_growth() -> Outcome {
    timed(5, "Var Y_k(t) growth exponent", Some(300.0), || {
        let t_points = [25.0, 50.0, 100.0, 200.0, 400.0];
        let s1 = variance_scan(&law("exp_indep(1,1)"), 1, &t_points, 10_000, 505)?.slope;
        let s2 = variance_scan(&law("eta_eq_xi(exp(1))"), 2, &t_points, 10_000, 506)?.slope;
        Ok((
            (s1 - 1.0).abs() <= 0.35 && (s2 - 3.0).abs() <= 0.35,
            format!("k=1 slope {s1:.3}; k=2 slope {s2:.3}"),
        ))
    })
}

pub fn supermartingale_bound() -> Outcome {
    timed(6, "exponential supermartingale bound", Some(60.0), || {
        let us = [-0.2, -0.05, 0.05, 0.2];
        let mut pass = true;
        let mut parts = Vec::new();
        for spec in ["exp_indep(1,1)", "slow_tail(1)"] {
            for c in supermartingale_check(&law(spec), 100.0, &us, 100_000, 606)? {
                pass &= c.pass();
                parts.push(format!("{spec} u={}: {:.4}+-{:.4}", c.u, c.mean, c.se));
            }
        }
        Ok((pass, parts.join(", ")))
    })
}

pub fn renewal_clt() -> Outcome {
    timed(7, "renewal CLT surrogate", Some(60.0), || {
        let l = law("exp_indep(1,1)");
        let table = renewal_function(&l, 0.01, 1e4)?;
        let c = clt_check(&l, &table, 1e4, 2000, 707)?;
        Ok((
            c.pass(),
            format!("KS = {:.4} (critical {:.4}), mean = {:.4}", c.ks, c.critical, c.mean),
        ))
    })
}

pub fn lil_envelope() -> Outcome {
    timed(8, "LIL envelope probe", Some(900.0), || {
        let first = lil_scan(
            &law("exp_indep(1,1)"),
            &LilScanConfig {
                j: 1,
                grid: GridSpec::default(),
                t_min: 20.0,
                t_max: 1e6,
                n_rep: 50,
                seed: 808,
                step: 0.05,
            },
            None,
        )?;
        let second = lil_scan(
            &law("eta_eq_xi(exp(1))"),
            &LilScanConfig {
                j: 2,
                grid: GridSpec::default(),
                t_min: 20.0,
                t_max: 1e3,
                n_rep: 30,
                seed: 809,
                step: 0.05,
            },
            None,
        )?;
        let abs_final: Vec<f64> = second.final_values().iter().map(|x| x.abs()).collect();
        let med = stats::median(&abs_final);
        let per_rep_max: Vec<f64> = first.running_max.iter().map(|m| m[m.len() - 1]).collect();
        let band = 0.55..=1.45;
        let pass = band.contains(&first.envelope_max)
            && band.contains(&-first.envelope_min)
            && med < 1.0
            && first.running_extremes_monotone()
            && second.running_extremes_monotone();
        Ok((
            pass,
            format!(
                "j=1 envelope [{:.3}, {:.3}] (median per-replicate max {:.3}); j=2 median |R_2(t_max)| = {med:.3}",
                first.envelope_min,
                first.envelope_max,
                stats::median(&per_rep_max)
            ),
        ))
    })
}

fn files_in(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            out.push((name, std::fs::read(entry.path())?));
        }
    }
    out.sort();
    Ok(out)
}

pub fn determinism() -> Outcome {
    timed(9, "worker-count determinism", None, || {
        use crate::cli::{run_subcommand, Subcommand};
        let base = std::env::temp_dir().join(format!("iterlil-determinism-{}", std::process::id()));
        let runs: [(Subcommand, &str); 5] = [
            (Subcommand::Simulate, "j = 2\nhorizon = 40\nreps = 20\n"),
            (Subcommand::Renewal, "j = 2\nhorizon = 30\nstep = 0.05\n"),
            (Subcommand::LilScan, "j = 2\nlaw = eta_eq_xi(exp(1))\nhorizon = 200\nreps = 12\nstep = 0.05\n"),
            (Subcommand::VarScan, "horizon = 400\nreps = 200\nt_points = 25,50,100,200,400\n"),
            (Subcommand::Checks, "horizon = 200\nreps = 200\nt_points = 100,1000\nstep = 0.05\n"),
        ];
        let mut compared = 0;
        let mut mismatched = Vec::new();
        for (sub, text) in runs {
            let mut outputs = Vec::new();
            for workers in [1usize, 8] {
                let dir = base.join(format!("{}-{workers}", sub.name()));
                let _ = std::fs::remove_dir_all(&dir);
                let mut cfg: McConfig = crate::config::parse_config(Some(text), &[])?;
                cfg.workers = workers;
                cfg.out = dir.clone();
                run_subcommand(sub, &cfg)?;
                outputs.push(files_in(&dir)?);
            }
            compared += outputs[0].len();
            if outputs[0].is_empty() || outputs[0] != outputs[1] {
                mismatched.push(sub.name());
            }
        }
        let _ = std::fs::remove_dir_all(&base);
        Ok((
            mismatched.is_empty(),
            format!("{compared} CSV artifacts compared across workers 1 and 8; mismatches: {mismatched:?}"),
        ))
    })
}

pub fn tail_and_increment_decay() -> Outcome {
    timed(10, "tail-sum and nu-increment decay", Some(120.0), || {
        let times = [1e3, 1e4, 1e5];
        let a = tail_sum_check(&law("exp_indep(1,1)"), &times, 100, 1010)?;
        let b = tail_sum_check(&law("slow_tail(1)"), &times, 100, 1011)?;
        let c = nu_increment_check(&law("exp_indep(1,1)"), &times, 1.0, 0.5, 100, 1012)?;
        let fmt = |m: &[f64]| m.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ");
        Ok((
            a.pass && b.pass && c.pass,
            format!(
                "tail exp [{}]; tail slow [{}]; nu incr [{}]",
                fmt(&a.medians),
                fmt(&b.medians),
                fmt(&c.medians)
            ),
        ))
    })
}

pub fn run_all() -> Vec<Outcome> {
    vec![
        renewal_exactness(),
        mean_count_asymptotics(),
        oracle_equivalence(),
        increment_bound(),
        variance_growth(),
        supermartingale_bound(),
        renewal_clt(),
        lil_envelope(),
        determinism(),
        tail_and_increment_decay(),
    ]
}
