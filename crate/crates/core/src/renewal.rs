//! Renewal function `U`, mean counts `V = F * U` and `V_j = V_{j-1} * V` on a
//! uniform grid `{0, h, 2h, ...}`.
//!
//! `U` solves `U = 1 + F_xi * U` for a lattice walk obtained by assigning the
//! mass of `xi` in `((m - 1/2)h, (m + 1/2)h]` to node `m` (the mass below
//! `3h/2` goes to node 1, so there is no atom at 0 and `U(0) = 1`). The lattice
//! walk has positive steps, hence the computed `U` is nondecreasing, and the
//! centred cells keep the drift error second order in `h`.
//!
//! `V` is the Stieltjes sum of `F(t_i - t_m)` against the lattice increments
//! of `U`; `V_j` integrates `V_{j-1}` against the increments of `V` with the
//! trapezoid rule on each cell. All weights are nonnegative, so every table
//! is nondecreasing by construction.

use std::io::{Read, Write};

use rayon::prelude::*;

use crate::branching::{replicate_runs, BranchingOptions};
use crate::csvio::fmt_real;
use crate::distributions::JointStepLaw;
use crate::error::{Error, Result};
use crate::grid::{check_ascending, GridFunction};
use crate::stats;

pub const DEFAULT_STEP: f64 = 0.01;
pub const DEFAULT_T_MAX: f64 = 500.0;
const MAX_NODES: f64 = 1e8;
/// Lattice masses below this are dropped from the kernel tail.
const KERNEL_TAIL: f64 = 1e-18;

#[derive(Debug, Clone, PartialEq)]
pub struct RenewalTable {
    pub h: f64,
    pub t_max: f64,
    pub u: Vec<f64>,
    /// `F(t_i) = P{eta <= t_i}`; empty until [`v1_table`] ran or after import.
    pub f: Vec<f64>,
    /// `v[j - 1]` holds `V_j`.
    pub v: Vec<Vec<f64>>,
}

fn node_count(h: f64, t_max: f64) -> Result<usize> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Grid(format!("step must be positive, got {h}")));
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::Grid(format!("t_max must be positive, got {t_max}")));
    }
    let cells = (t_max / h - 1e-9).ceil();
    if cells > MAX_NODES {
        return Err(Error::Grid(format!("t_max / h = {cells} exceeds 1e8 nodes")));
    }
    Ok(cells.max(1.0) as usize)
}

/// Lattice step masses: `p[m]` is the mass assigned to step `m * h`.
fn lattice_kernel(law: &JointStepLaw, h: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; 2];
    let mut prev = law.xi_survival(1.5 * h);
    p[1] = 1.0 - prev;
    for m in 2..=n {
        let next = law.xi_survival((m as f64 + 0.5) * h);
        p.push((prev - next).max(0.0));
        prev = next;
        if prev < KERNEL_TAIL {
            break;
        }
    }
    p
}

/// Solves the renewal equation on `[0, t_max]` with step `h`.
pub fn renewal_function(law: &JointStepLaw, h: f64, t_max: f64) -> Result<RenewalTable> {
    let n = node_count(h, t_max)?;
    let p = lattice_kernel(law, h, n);
    let k = p.len() - 1;
    let mut u = Vec::with_capacity(n + 1);
    u.push(1.0);
    for i in 1..=n {
        let m = i.min(k);
        let conv: f64 = p[1..=m].iter().zip(u[i - m..i].iter().rev()).map(|(a, b)| a * b).sum();
        // rounding guard; exact arithmetic is already monotone
        let prev = u[i - 1];
        u.push((1.0 + conv).max(prev));
    }
    Ok(RenewalTable {
        h,
        t_max: n as f64 * h,
        u,
        f: Vec::new(),
        v: Vec::new(),
    })
}

fn monotone_guard(mut xs: Vec<f64>) -> Vec<f64> {
    for i in 1..xs.len() {
        if xs[i] < xs[i - 1] {
            xs[i] = xs[i - 1];
        }
    }
    xs
}

/// Fills `V = V_1 = F * U`.
pub fn v1_table(mut table: RenewalTable, law: &JointStepLaw) -> Result<RenewalTable> {
    let n = table.u.len() - 1;
    let f: Vec<f64> = (0..=n).map(|l| law.eta_cdf_unchecked(l as f64 * table.h)).collect();
    let saturated_from = f.iter().position(|&x| x >= 1.0).unwrap_or(n + 1);
    let u = &table.u;
    let du: Vec<f64> = (0..=n).map(|m| if m == 0 { u[0] } else { u[m] - u[m - 1] }).collect();
    let v: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|i| {
            let l_end = i.min(saturated_from.saturating_sub(1));
            let mut acc = 0.0;
            for l in 0..=l_end {
                if l >= saturated_from {
                    break;
                }
                acc += f[l] * du[i - l];
            }
            if i >= saturated_from {
                acc += u[i - saturated_from];
            }
            acc
        })
        .collect();
    table.f = f;
    table.v = vec![monotone_guard(v)];
    Ok(table)
}

/// Fills `V_j = V_{j-1} * V`; requires `V_1 .. V_{j-1}`.
pub fn vj_table(mut table: RenewalTable, j: usize) -> Result<RenewalTable> {
    if j < 2 {
        return Err(Error::InvalidParameter("vj_table needs j >= 2".into()));
    }
    if table.v.len() < j - 1 {
        return Err(Error::Table(format!(
            "V_{} must be tabulated before V_{j}",
            table.v.len() + 1
        )));
    }
    let n = table.u.len() - 1;
    let vj = {
        let w = &table.v[j - 2];
        let v1 = &table.v[0];
        let dv: Vec<f64> = (0..=n).map(|m| if m == 0 { v1[0] } else { v1[m] - v1[m - 1] }).collect();
        let rows: Vec<f64> = (0..=n)
            .into_par_iter()
            .map(|i| {
                let mut acc = w[i] * dv[0];
                for m in 1..=i {
                    acc += 0.5 * (w[i - m] + w[i - m + 1]) * dv[m];
                }
                acc
            })
            .collect();
        monotone_guard(rows)
    };
    table.v.truncate(j - 1);
    table.v.push(vj);
    Ok(table)
}

/// `U`, then `V_1 .. V_{j_max}`.
pub fn build_tables(law: &JointStepLaw, h: f64, t_max: f64, j_max: usize) -> Result<RenewalTable> {
    let mut t = v1_table(renewal_function(law, h, t_max)?, law)?;
    for j in 2..=j_max {
        t = vj_table(t, j)?;
    }
    Ok(t)
}

impl RenewalTable {
    pub fn nodes(&self) -> usize {
        self.u.len()
    }

    pub fn j_max(&self) -> usize {
        self.v.len()
    }

    fn interp(&self, vals: &[f64], t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        if t > self.t_max * (1.0 + 1e-12) || t.is_nan() {
            return Err(Error::TableRange { t, t_max: self.t_max });
        }
        let x = t / self.h;
        let i = (x.floor() as usize).min(vals.len() - 1);
        if i + 1 >= vals.len() {
            return Ok(vals[vals.len() - 1]);
        }
        let w = x - i as f64;
        if w <= 0.0 {
            return Ok(vals[i]);
        }
        Ok(vals[i] + w * (vals[i + 1] - vals[i]))
    }

    pub fn u_at(&self, t: f64) -> Result<f64> {
        self.interp(&self.u, t)
    }

    pub fn v_at(&self, j: usize, t: f64) -> Result<f64> {
        let vals = self.v_vals(j)?;
        self.interp(vals, t)
    }

    pub fn v_vals(&self, j: usize) -> Result<&[f64]> {
        if j == 0 || j > self.v.len() {
            return Err(Error::Table(format!("V_{j} is not tabulated")));
        }
        Ok(&self.v[j - 1])
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// `V_j` as a [`GridFunction`] over all table nodes.
    pub fn v_function(&self, j: usize) -> Result<GridFunction> {
        let vals = self.v_vals(j)?;
        Ok(GridFunction {
            grid: (0..vals.len()).map(|i| self.time(i)).collect(),
            values: vals.to_vec(),
        })
    }

    /// CSV with columns `t, U, V1, ..., Vjmax`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "U".to_string()];
        header.extend((1..=self.v.len()).map(|j| format!("V{j}")));
        w.write_record(&header)?;
        for i in 0..self.u.len() {
            let mut row = vec![fmt_real(self.time(i)), fmt_real(self.u[i])];
            row.extend(self.v.iter().map(|v| fmt_real(v[i])));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`RenewalTable::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[0] != "t" || &header[1] != "U" {
            return Err(Error::Table("header must start with `t,U`".into()));
        }
        let j_max = header.len() - 2;
        for (j, name) in header.iter().skip(2).enumerate() {
            if name != format!("V{}", j + 1) {
                return Err(Error::Table(format!("unexpected column `{name}`")));
            }
        }
        let mut times = Vec::new();
        let mut u = Vec::new();
        let mut v = vec![Vec::new(); j_max];
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != header.len() {
                return Err(Error::Table(format!("row {} has {} fields", times.len() + 1, rec.len())));
            }
            let mut vals = Vec::with_capacity(rec.len());
            for field in rec.iter() {
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Table(format!("malformed number `{field}`")))?;
                if !x.is_finite() {
                    return Err(Error::Table(format!("non-finite value `{field}`")));
                }
                vals.push(x);
            }
            times.push(vals[0]);
            u.push(vals[1]);
            for (col, x) in v.iter_mut().zip(&vals[2..]) {
                col.push(*x);
            }
        }
        if times.len() < 2 {
            return Err(Error::Table("a table needs at least two rows".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::Table("first node must be t = 0".into()));
        }
        check_ascending(&times)?;
        let h = times[1];
        for (i, &t) in times.iter().enumerate() {
            if (t - i as f64 * h).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(Error::Table(format!("row {} breaks the uniform step", i + 1)));
            }
        }
        let nondecreasing = |xs: &[f64]| xs.windows(2).all(|w| w[0] <= w[1]);
        if !nondecreasing(&u) || v.iter().any(|c| !nondecreasing(c)) {
            return Err(Error::Table("tabulated functions must be nondecreasing".into()));
        }
        let t_max = (times.len() - 1) as f64 * h;
        Ok(RenewalTable {
            h,
            t_max,
            u,
            f: Vec::new(),
            v,
        })
    }
}

/// Outcome of one increment-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubadditivityCheck {
    /// `U(hh) V(x+hh)^{k-1} - (V_k(x+hh) - V_k(x))`.
    pub residual: f64,
    /// `10 h L` with `L` the largest local slope of the tables involved.
    pub eps_num: f64,
}

impl SubadditivityCheck {
    pub fn holds(&self) -> bool {
        self.residual >= -self.eps_num
    }
}

/// Evaluates the increment bound `V_k(x+hh) - V_k(x) <= U(hh) V(x+hh)^{k-1}`.
pub fn check_subadditivity(table: &RenewalTable, k: usize, x: f64, hh: f64) -> Result<SubadditivityCheck> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if !(x > 0.0 && hh > 0.0) {
        return Err(Error::InvalidParameter(format!("x and h must be positive, got {x}, {hh}")));
    }
    if x + hh > table.t_max * (1.0 + 1e-12) {
        return Err(Error::TableRange {
            t: x + hh,
            t_max: table.t_max,
        });
    }
    let vk = table.v_vals(k)?;
    let lhs = table.v_at(k, x + hh)? - table.v_at(k, x)?;
    let rhs = table.u_at(hh)? * table.v_at(1, x + hh)?.powi(k as i32 - 1);

    let lo = ((x / table.h).floor() as usize).saturating_sub(1);
    let hi = (((x + hh) / table.h).ceil() as usize + 1).min(vk.len() - 1);
    let slope = |vals: &[f64], a: usize, b: usize| {
        (a..b).map(|i| (vals[i + 1] - vals[i]) / table.h).fold(0.0, f64::max)
    };
    let hh_hi = ((hh / table.h).ceil() as usize + 1).min(table.u.len() - 1);
    let lipschitz = slope(vk, lo, hi).max(slope(&table.u, 0, hh_hi));
    Ok(SubadditivityCheck {
        residual: rhs - lhs,
        eps_num: 10.0 * table.h * lipschitz,
    })
}

/// Monte Carlo mean of `Y_j` with per-point standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Independent estimate of `V_j` on `grid` from `n_rep` branching runs.
pub fn vj_monte_carlo(law: &JointStepLaw, j: usize, grid: &[f64], n_rep: usize, seed: u64) -> Result<McEstimate> {
    if n_rep < 2 {
        return Err(Error::InvalidParameter("need at least two replicates".into()));
    }
    check_ascending(grid)?;
    let horizon = *grid.last().ok_or_else(|| Error::Grid("empty grid".into()))?;
    let runs = replicate_runs(law, horizon, j, grid, seed, n_rep, BranchingOptions::default())?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut se = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let xs: Vec<f64> = runs.iter().map(|r| r.counts[j - 1].values[i]).collect();
        mean.push(stats::mean(&xs));
        se.push(stats::std_error(&xs));
    }
    Ok(McEstimate {
        grid: grid.to_vec(),
        mean,
        se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(s: &str) -> JointStepLaw {
        JointStepLaw::parse(s).unwrap()
    }

    #[test]
    fn poisson_renewal_function() {
        let t = renewal_function(&law("exp_indep(1,1)"), 0.01, 50.0).unwrap();
        assert_eq!(t.u[0], 1.0);
        assert!((t.u_at(50.0).unwrap() - 51.0).abs() < 0.05);
        assert!(t.u.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn deterministic_staircase() {
        let t = renewal_function(&law("det(1,0.5)"), 0.01, 10.0).unwrap();
        for &x in &[0.0, 0.37, 0.5, 1.0, 2.5, 3.0, 4.25, 9.99] {
            assert_eq!(t.u_at(x).unwrap(), x.floor() + 1.0, "U({x})");
        }
    }

    #[test]
    fn grid_errors() {
        let l = law("exp_indep(1,1)");
        assert!(matches!(renewal_function(&l, 0.0, 1.0), Err(Error::Grid(_))));
        assert!(matches!(renewal_function(&l, 1e-9, 1.0), Err(Error::Grid(_))));
        let t = renewal_function(&l, 0.1, 5.0).unwrap();
        assert!(matches!(t.u_at(6.0), Err(Error::TableRange { .. })));
        assert!(vj_table(t, 2).is_err());
    }

    #[test]
    fn v_bounded_by_u_and_zero_at_origin() {
        for spec in ["exp_indep(1,1)", "slow_tail(1)", "det(1,0.5)", "lognormal_indep(0,0.5,2)"] {
            let t = build_tables(&law(spec), 0.05, 40.0, 3).unwrap();
            for j in 1..=3 {
                assert_eq!(t.v_at(j, 0.0).unwrap(), 0.0, "{spec} V_{j}(0)");
                assert!(t.v[j - 1].windows(2).all(|w| w[0] <= w[1]));
            }
            for (v, u) in t.v[0].iter().zip(&t.u) {
                assert!(v <= u);
            }
        }
    }

    #[test]
    fn coupled_walk_mean_counts() {
        let t = build_tables(&law("eta_eq_xi(exp(1))"), 0.01, 50.0, 2).unwrap();
        assert!((t.v_at(1, 50.0).unwrap() - 50.0).abs() < 0.05);
        assert!((t.v_at(2, 50.0).unwrap() / 1250.0 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn increment_bound_k1_reduces_to_u() {
        let t = build_tables(&law("exp_indep(1,1)"), 0.01, 30.0, 2).unwrap();
        let c = check_subadditivity(&t, 1, 5.0, 2.0).unwrap();
        let direct = t.u_at(2.0).unwrap() - (t.v_at(1, 7.0).unwrap() - t.v_at(1, 5.0).unwrap());
        assert_eq!(c.residual, direct);
        assert!(c.holds());
        let edge = check_subadditivity(&t, 2, 1e-9, t.t_max - 1e-9).unwrap();
        assert!(edge.holds());
        assert!(matches!(check_subadditivity(&t, 2, 20.0, 20.0), Err(Error::TableRange { .. })));
        assert!(matches!(check_subadditivity(&t, 3, 1.0, 1.0), Err(Error::Table(_))));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let t = build_tables(&law("exp_indep(1,2)"), 0.1, 5.0, 2).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = RenewalTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.u, t.u);
        assert_eq!(back.v, t.v);
        assert_eq!(back.h, t.h);
        assert!(RenewalTable::read_csv("t,U\n0,1\n".as_bytes()).is_err());
        assert!(RenewalTable::read_csv("t,U\n0,1\n1,0.5\n".as_bytes()).is_err());
        assert!(RenewalTable::read_csv("t,U,V2\n0,1,0\n1,2,1\n".as_bytes()).is_err());
    }

    #[test]
    fn hand_enumerated_branching_mean() {
        let est = vj_monte_carlo(&law("det(1,0.5)"), 2, &[1.0, 2.0, 3.0], 5, 1).unwrap();
        assert_eq!(est.mean, vec![1.0, 3.0, 6.0]);
        assert_eq!(est.se, vec![0.0, 0.0, 0.0]);
    }
}
