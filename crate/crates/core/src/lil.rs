//! Normalizers and Monte Carlo experiments around the iterated-logarithm
//! behaviour of `Y_j`, plus the companion checks on the walk.

use std::f64::consts::E;
use std::io::Write;

use rayon::prelude::*;

use crate::branching::{simulate_generations, BranchingOptions, RunSeed};
use crate::csvio::{fmt_count, fmt_real};
use crate::distributions::JointStepLaw;
use crate::error::{Error, Result};
use crate::grid::{check_ascending, GridSpec};
use crate::prw::{integrated_eta_cdf, simulate_path, supermartingale_stat, tail_sum};
use crate::renewal::{build_tables, RenewalTable};
use crate::rng::Stream;
use crate::stats;

/// `sqrt(2 sigma2 mu^{-2j-1} t^{2j-1} loglog t / ((2j-1)(j-1)!))`.
pub fn lil_normalizer(j: usize, mu: f64, sigma2: f64, t: f64) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidParameter("j must be at least 1".into()));
    }
    if t.is_nan() || t <= E {
        return Err(Error::Domain(format!("normalizer needs t > e, got {t}")));
    }
    if !(mu > 0.0 && sigma2 > 0.0) {
        return Err(Error::Domain(format!("need mu > 0 and sigma2 > 0, got {mu}, {sigma2}")));
    }
    let jf = j as f64;
    let fact: f64 = (1..j).map(|i| i as f64).product();
    let coef = 2.0 * sigma2 / ((2.0 * jf - 1.0) * fact);
    let scale = mu.powf(-2.0 * jf - 1.0) * t.powf(2.0 * jf - 1.0);
    Ok((coef * scale * t.ln().ln()).sqrt())
}

/// `y - mu^{-1} int_0^t F(s) ds`.
pub fn center_y1(y: f64, t: f64, law: &JointStepLaw) -> Result<f64> {
    let integral = integrated_eta_cdf(law, &[t.max(0.0)])?[0];
    Ok(y - integral / law.mu())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LilScanConfig {
    pub j: usize,
    pub grid: GridSpec,
    pub t_min: f64,
    pub t_max: f64,
    pub n_rep: usize,
    pub seed: u64,
    /// Table step used for `V_j` when no table is supplied (`j >= 2`).
    pub step: f64,
}

impl Default for LilScanConfig {
    fn default() -> Self {
        LilScanConfig {
            j: 1,
            grid: GridSpec::default(),
            t_min: 20.0,
            t_max: 1e4,
            n_rep: 50,
            seed: 0,
            step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LilScanResult {
    pub j: usize,
    pub law: String,
    pub seed: u64,
    pub scan_times: Vec<f64>,
    /// Subtracted mean: `mu^{-1} int F` for `j = 1`, `V_j` otherwise.
    pub centering: Vec<f64>,
    pub normalizer: Vec<f64>,
    /// Per replicate, per scan time.
    pub y: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub running_max: Vec<Vec<f64>>,
    pub running_min: Vec<Vec<f64>>,
    pub envelope_max: f64,
    pub envelope_min: f64,
}

impl LilScanResult {
    /// `R_j(t_max)` for every replicate.
    pub fn final_values(&self) -> Vec<f64> {
        self.r.iter().map(|row| row[row.len() - 1]).collect()
    }

    pub fn running_extremes_monotone(&self) -> bool {
        self.running_max.iter().all(|m| m.windows(2).all(|w| w[0] <= w[1]))
            && self.running_min.iter().all(|m| m.windows(2).all(|w| w[0] >= w[1]))
    }

    /// Columns `replicate, t, Y_j, V_j, normalizer, R_j, running_max, running_min`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["replicate", "t", "Y_j", "V_j", "normalizer", "R_j", "running_max", "running_min"])?;
        for (rep, row) in self.r.iter().enumerate() {
            for (i, &t) in self.scan_times.iter().enumerate() {
                w.write_record([
                    rep.to_string(),
                    fmt_real(t),
                    fmt_count(self.y[rep][i]),
                    fmt_real(self.centering[i]),
                    fmt_real(self.normalizer[i]),
                    fmt_real(row[i]),
                    fmt_real(self.running_max[rep][i]),
                    fmt_real(self.running_min[rep][i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates `n_rep` branching runs to `t_max` and evaluates
/// `R_j(t) = (Y_j(t) - centering(t)) / normalizer(t)` on the scan grid.
pub fn lil_scan(law: &JointStepLaw, cfg: &LilScanConfig, table: Option<&RenewalTable>) -> Result<LilScanResult> {
    if cfg.n_rep == 0 {
        return Err(Error::InvalidParameter("n_rep must be at least 1".into()));
    }
    if cfg.j == 0 {
        return Err(Error::InvalidParameter("j must be at least 1".into()));
    }
    if cfg.t_min.is_nan() || cfg.t_min <= E * E {
        return Err(Error::Precondition(format!("t_min must exceed e^2, got {}", cfg.t_min)));
    }
    let times = cfg.grid.times(cfg.t_min, cfg.t_max)?;
    check_ascending(&times)?;
    if times.is_empty() || times[0] < cfg.t_min || times[times.len() - 1] > cfg.t_max {
        return Err(Error::Grid(format!("scan times must lie in [{}, {}]", cfg.t_min, cfg.t_max)));
    }
    let normalizer = times
        .iter()
        .map(|&t| lil_normalizer(cfg.j, law.mu(), law.sigma2(), t))
        .collect::<Result<Vec<f64>>>()?;
    let centering = if cfg.j == 1 {
        let integrals = integrated_eta_cdf(law, &times)?;
        integrals.iter().map(|i| i / law.mu()).collect()
    } else {
        let owned;
        let tab = match table {
            Some(t) => t,
            None => {
                owned = build_tables(law, cfg.step, cfg.t_max, cfg.j)?;
                &owned
            }
        };
        times.iter().map(|&t| tab.v_at(cfg.j, t)).collect::<Result<Vec<f64>>>()?
    };

    let horizon = times[times.len() - 1];
    let ys = (0..cfg.n_rep as u64)
        .into_par_iter()
        .map(|replicate| {
            let run = simulate_generations(
                law,
                horizon,
                cfg.j,
                &times,
                RunSeed {
                    master: cfg.seed,
                    replicate,
                },
                BranchingOptions::default(),
            )?;
            Ok(run.counts[cfg.j - 1].values.clone())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;

    let mut r = Vec::with_capacity(ys.len());
    let mut running_max = Vec::with_capacity(ys.len());
    let mut running_min = Vec::with_capacity(ys.len());
    let mut envelope_max = f64::NEG_INFINITY;
    let mut envelope_min = f64::INFINITY;
    for y in &ys {
        let row: Vec<f64> = y
            .iter()
            .zip(&centering)
            .zip(&normalizer)
            .map(|((y, c), n)| (y - c) / n)
            .collect();
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut mx = Vec::with_capacity(row.len());
        let mut mn = Vec::with_capacity(row.len());
        for &x in &row {
            hi = hi.max(x);
            lo = lo.min(x);
            mx.push(hi);
            mn.push(lo);
        }
        envelope_max = envelope_max.max(hi);
        envelope_min = envelope_min.min(lo);
        r.push(row);
        running_max.push(mx);
        running_min.push(mn);
    }
    Ok(LilScanResult {
        j: cfg.j,
        law: law.to_string(),
        seed: cfg.seed,
        scan_times: times,
        centering,
        normalizer,
        y: ys,
        r,
        running_max,
        running_min,
        envelope_max,
        envelope_min,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceScan {
    pub k: usize,
    pub t_points: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// OLS slope of `ln Var Y_k(t)` against `ln t`.
    pub slope: f64,
}

impl VarianceScan {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "mean", "variance"])?;
        for i in 0..self.t_points.len() {
            w.write_record([fmt_real(self.t_points[i]), fmt_real(self.mean[i]), fmt_real(self.variance[i])])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn variance_scan(law: &JointStepLaw, k: usize, t_points: &[f64], n_rep: usize, seed: u64) -> Result<VarianceScan> {
    law.require_nondegenerate()?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if n_rep < 2 {
        return Err(Error::InvalidParameter("need at least two replicates".into()));
    }
    check_ascending(t_points)?;
    if t_points.len() < 5 || t_points[0] <= 0.0 || t_points[t_points.len() - 1] < 10.0 * t_points[0] {
        return Err(Error::Precondition(
            "variance scan needs at least 5 positive times spanning a decade".into(),
        ));
    }
    let horizon = t_points[t_points.len() - 1];
    let samples = (0..n_rep as u64)
        .into_par_iter()
        .map(|replicate| {
            let run = simulate_generations(
                law,
                horizon,
                k,
                t_points,
                RunSeed { master: seed, replicate },
                BranchingOptions::default(),
            )?;
            Ok(run.counts[k - 1].values.clone())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut mean = Vec::with_capacity(t_points.len());
    let mut variance = Vec::with_capacity(t_points.len());
    for i in 0..t_points.len() {
        let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
        mean.push(stats::mean(&xs));
        variance.push(stats::variance(&xs));
    }
    if variance.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("sample variance vanished at some time".into()));
    }
    let lx: Vec<f64> = t_points.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = variance.iter().map(|v| v.ln()).collect();
    Ok(VarianceScan {
        k,
        t_points: t_points.to_vec(),
        mean,
        variance,
        slope: stats::ols_slope(&lx, &ly),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltCheck {
    pub ks: f64,
    pub mean: f64,
    pub critical: f64,
    pub n_rep: usize,
}

impl CltCheck {
    pub fn pass(&self) -> bool {
        self.ks < self.critical && self.mean.abs() < 5.0 / (self.n_rep as f64).sqrt()
    }
}

/// KS distance of `(nu(t) - U(t)) / sqrt(sigma2 mu^{-3} t)` from the standard normal.
pub fn clt_check(law: &JointStepLaw, table: &RenewalTable, t: f64, n_rep: usize, seed: u64) -> Result<CltCheck> {
    law.require_nondegenerate()?;
    if n_rep < 100 {
        return Err(Error::Precondition(format!("CLT check needs n_rep >= 100, got {n_rep}")));
    }
    let u = table.u_at(t)?;
    let scale = (law.sigma2() * law.mu().powi(-3) * t).sqrt();
    let z = (0..n_rep as u64)
        .into_par_iter()
        .map(|rep| {
            let p = simulate_path(law, t, &mut Stream::replicate(seed, rep))?;
            Ok((p.nu_at(t) as f64 - u) / scale)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(CltCheck {
        ks: stats::ks_statistic(&z, stats::std_normal_cdf),
        mean: stats::mean(&z),
        critical: stats::ks_critical_1pct(n_rep),
        n_rep,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermartingaleCheck {
    pub u: f64,
    pub mean: f64,
    pub se: f64,
    /// Replicates whose statistic overflowed and was clamped.
    pub saturated: usize,
}

impl SupermartingaleCheck {
    pub fn pass(&self) -> bool {
        self.mean <= 1.0 + 3.0 * self.se
    }
}

/// Monte Carlo mean of the exponential statistic for each `u`, sharing paths.
pub fn supermartingale_check(
    law: &JointStepLaw,
    t: f64,
    us: &[f64],
    n_rep: usize,
    seed: u64,
) -> Result<Vec<SupermartingaleCheck>> {
    if let Some(&u) = us.iter().find(|&&u| u == 0.0 || !u.is_finite()) {
        return Err(Error::Precondition(format!("u must be finite and nonzero, got {u}")));
    }
    if n_rep < 2 {
        return Err(Error::InvalidParameter("need at least two replicates".into()));
    }
    let rows = (0..n_rep as u64)
        .into_par_iter()
        .map(|rep| {
            let p = simulate_path(law, t, &mut Stream::replicate(seed, rep))?;
            us.iter().map(|&u| supermartingale_stat(&p, t, u, law)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(us
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let xs: Vec<f64> = rows.iter().map(|r| r[i].value).collect();
            SupermartingaleCheck {
                u,
                mean: stats::mean(&xs),
                se: stats::std_error(&xs),
                saturated: rows.iter().filter(|r| r[i].saturated).count(),
            }
        })
        .collect())
}

/// Medians over replicates of a per-path statistic at several times.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianProfile {
    pub t_points: Vec<f64>,
    pub medians: Vec<f64>,
    pub pass: bool,
}

fn path_medians<F>(law: &JointStepLaw, t_points: &[f64], horizon: f64, n_rep: usize, seed: u64, f: F) -> Result<Vec<f64>>
where
    F: Fn(&crate::prw::PrwPath, f64) -> Result<f64> + Sync,
{
    check_ascending(t_points)?;
    if t_points.is_empty() || t_points[0] <= 0.0 {
        return Err(Error::Grid("need positive check times".into()));
    }
    if n_rep == 0 {
        return Err(Error::InvalidParameter("n_rep must be at least 1".into()));
    }
    let rows = (0..n_rep as u64)
        .into_par_iter()
        .map(|rep| {
            let p = simulate_path(law, horizon, &mut Stream::replicate(seed, rep))?;
            t_points.iter().map(|&t| f(&p, t)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..t_points.len())
        .map(|i| stats::median(&rows.iter().map(|r| r[i]).collect::<Vec<_>>()))
        .collect())
}

/// Medians of `tail_sum(t) / t`. Passes when they are nonincreasing and, for
/// `E eta < inf`, the last is below half the first.
pub fn tail_sum_check(law: &JointStepLaw, t_points: &[f64], n_rep: usize, seed: u64) -> Result<MedianProfile> {
    let horizon = t_points.last().copied().unwrap_or(0.0);
    let medians = path_medians(law, t_points, horizon, n_rep, seed, |p, t| Ok(tail_sum(p, t, law)? / t))?;
    let mut pass = medians.windows(2).all(|w| w[1] <= w[0]);
    if law.eta_mean_finite() {
        pass &= medians[medians.len() - 1] < medians[0] / 2.0;
    }
    Ok(MedianProfile {
        t_points: t_points.to_vec(),
        medians,
        pass,
    })
}

/// Medians of `(nu(t + b) - nu(t)) / t^c`; passes when strictly decreasing.
pub fn nu_increment_check(
    law: &JointStepLaw,
    t_points: &[f64],
    b: f64,
    c: f64,
    n_rep: usize,
    seed: u64,
) -> Result<MedianProfile> {
    if !(b > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter(format!("need b > 0 and c > 0, got {b}, {c}")));
    }
    let horizon = t_points.last().copied().unwrap_or(0.0) + b;
    let medians = path_medians(law, t_points, horizon, n_rep, seed, |p, t| {
        Ok((p.nu_at(t + b) - p.nu_at(t)) as f64 / t.powf(c))
    })?;
    let pass = medians.windows(2).all(|w| w[1] < w[0]);
    Ok(MedianProfile {
        t_points: t_points.to_vec(),
        medians,
        pass,
    })
}
