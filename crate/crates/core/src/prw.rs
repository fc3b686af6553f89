//! Single perturbed-random-walk trajectories and their per-path statistics.

use std::io::Write;

use crate::distributions::JointStepLaw;
use crate::error::{Error, Result};
use crate::grid::{check_ascending, GridFunction};
use crate::rng::Stream;

pub const DEFAULT_PATH_CAP: u64 = 100_000_000;

/// One trajectory truncated at a horizon.
///
/// Index `k` (0-based) holds step `k + 1`: `t_birth[k] = s[k] + eta[k]`.
/// `s` has one more entry than `xi`: `s[0] = 0` and `s[k + 1] = s[k] + xi[k]`.
/// Every step with `s[k] <= horizon` is kept, plus the first partial sum
/// exceeding the horizon, so `nu` and `Y` are exact on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrwPath {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub s: Vec<f64>,
    pub t_birth: Vec<f64>,
    pub horizon: f64,
}

pub fn simulate_path(law: &JointStepLaw, horizon: f64, stream: &mut Stream) -> Result<PrwPath> {
    simulate_path_with_cap(law, horizon, stream, DEFAULT_PATH_CAP)
}

pub fn simulate_path_with_cap(
    law: &JointStepLaw,
    horizon: f64,
    stream: &mut Stream,
    cap: u64,
) -> Result<PrwPath> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let expected = (horizon / law.mu()).min(cap as f64) as usize + 2;
    let mut path = PrwPath {
        xi: Vec::with_capacity(expected),
        eta: Vec::with_capacity(expected),
        s: Vec::with_capacity(expected + 1),
        t_birth: Vec::with_capacity(expected),
        horizon,
    };
    let mut s = 0.0;
    path.s.push(s);
    while s <= horizon {
        if path.xi.len() as u64 >= cap {
            return Err(Error::PopulationCap { cap, generation: 1 });
        }
        let (x, e) = law.sample_pair(stream);
        path.xi.push(x);
        path.eta.push(e);
        path.t_birth.push(s + e);
        s += x;
        path.s.push(s);
    }
    Ok(path)
}

impl PrwPath {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn check_grid(&self, grid: &[f64]) -> Result<()> {
        check_ascending(grid)?;
        match grid.last() {
            Some(&last) if last > self.horizon => Err(Error::OutOfHorizon {
                t: last,
                horizon: self.horizon,
            }),
            _ => Ok(()),
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.horizon || t.is_nan() {
            Err(Error::OutOfHorizon { t, horizon: self.horizon })
        } else {
            Ok(())
        }
    }

    /// `nu(t) = #{k >= 0 : S_k <= t}` at a single time.
    pub fn nu_at(&self, t: f64) -> usize {
        self.s.partition_point(|&s| s <= t)
    }

    /// Partial sums `S_k <= t`.
    fn sums_up_to(&self, t: f64) -> &[f64] {
        &self.s[..self.nu_at(t)]
    }

    pub fn y_at(&self, t: f64) -> usize {
        self.t_birth.iter().filter(|&&b| b <= t).count()
    }

    /// Writes the debug dump: `k, xi, eta, s, t_birth` with `s = S_k`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "xi", "eta", "s", "t_birth"])?;
        for k in 0..self.len() {
            w.write_record([
                (k + 1).to_string(),
                crate::csvio::fmt_real(self.xi[k]),
                crate::csvio::fmt_real(self.eta[k]),
                crate::csvio::fmt_real(self.s[k + 1]),
                crate::csvio::fmt_real(self.t_birth[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts of `times` falling at or below each grid point.
pub(crate) fn cumulative_counts(times: impl Iterator<Item = f64>, grid: &[f64]) -> Vec<f64> {
    let mut hist = vec![0u64; grid.len()];
    for b in times {
        let i = grid.partition_point(|&g| g < b);
        if i < grid.len() {
            hist[i] += 1;
        }
    }
    let mut acc = 0u64;
    hist.iter()
        .map(|&c| {
            acc += c;
            acc as f64
        })
        .collect()
}

/// `Y(t) = #{k >= 1 : T_k <= t}` on a grid.
pub fn count_y(path: &PrwPath, grid: &[f64]) -> Result<GridFunction> {
    path.check_grid(grid)?;
    let values = cumulative_counts(path.t_birth.iter().copied(), grid);
    GridFunction::new(grid.to_vec(), values)
}

/// `nu(t) = #{k >= 0 : S_k <= t}` on a grid.
pub fn count_nu(path: &PrwPath, grid: &[f64]) -> Result<GridFunction> {
    path.check_grid(grid)?;
    let values = grid.iter().map(|&t| path.nu_at(t) as f64).collect();
    GridFunction::new(grid.to_vec(), values)
}

/// `sum_{k >= 0} (1 - F(t - S_k)) 1{S_k <= t}`.
pub fn tail_sum(path: &PrwPath, t: f64, law: &JointStepLaw) -> Result<f64> {
    path.check_time(t)?;
    let mut acc = 0.0;
    for &s in path.sums_up_to(t) {
        acc += 1.0 - law.eta_cdf(t - s)?;
    }
    Ok(acc)
}

/// `sum_{k >= 0} F(t - S_k) 1{S_k <= t}`, the conditional mean of `Y(t)` given `S`.
pub fn compensator(path: &PrwPath, t: f64, law: &JointStepLaw) -> Result<f64> {
    path.check_time(t)?;
    let mut acc = 0.0;
    for &s in path.sums_up_to(t) {
        acc += law.eta_cdf(t - s)?;
    }
    Ok(acc)
}

/// Composite midpoint rule for `int_0^t F(y) dy` with step `min(0.01, t / 1e5)`.
pub fn midpoint_eta_integral(law: &JointStepLaw, t: f64) -> f64 {
    integrate_eta_cdf_midpoint(law, &[t])[0]
}

fn integrate_eta_cdf_midpoint(law: &JointStepLaw, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    let mut from = 0.0;
    for &t in times {
        if t <= from {
            out.push(if t <= 0.0 { 0.0 } else { acc });
            continue;
        }
        let h_max = (0.01f64).min(t / 1e5);
        let n = ((t - from) / h_max).ceil().max(1.0) as u64;
        let h = (t - from) / n as f64;
        let mut seg = 0.0;
        for i in 0..n {
            seg += law.eta_cdf_unchecked(from + (i as f64 + 0.5) * h);
        }
        acc += seg * h;
        from = t;
        out.push(acc);
    }
    out
}

/// `int_0^t F(y) dy` at ascending times; closed form when elementary,
/// composite midpoint quadrature otherwise.
pub fn integrated_eta_cdf(law: &JointStepLaw, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Grid("integration times must be ascending".into()));
    }
    if law.integrated_eta_cdf_closed(1.0).is_some() {
        return Ok(times
            .iter()
            .map(|&t| law.integrated_eta_cdf_closed(t).unwrap_or(0.0))
            .collect());
    }
    Ok(integrate_eta_cdf_midpoint(law, times))
}

/// Martingale part `X(t)` and renewal part `Z(t)` of the centred count:
/// `X(t) + Z(t) = Y(t) - mu^{-1} int_0^t F(y) dy`.
pub fn decompose_xz(path: &PrwPath, t: f64, law: &JointStepLaw) -> Result<(f64, f64)> {
    let comp = compensator(path, t, law)?;
    let y = path.y_at(t) as f64;
    let integral = integrated_eta_cdf(law, &[t])?[0];
    Ok((y - comp, comp - integral / law.mu()))
}

/// `exp(u X(t) - (u^2 e^{|u|} / 2) * tail_sum)`, saturated at `f64::MAX`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupermartingaleStat {
    pub value: f64,
    /// Set when the exponent left the f64 range and `value` was clamped.
    pub saturated: bool,
}

pub fn supermartingale_stat(
    path: &PrwPath,
    t: f64,
    u: f64,
    law: &JointStepLaw,
) -> Result<SupermartingaleStat> {
    if u == 0.0 || !u.is_finite() {
        return Err(Error::Precondition(format!("u must be finite and nonzero, got {u}")));
    }
    let comp = compensator(path, t, law)?;
    let tail = tail_sum(path, t, law)?;
    let x = path.y_at(t) as f64 - comp;
    let exponent = u * x - 0.5 * u * u * u.abs().exp() * tail;
    let value = exponent.exp();
    if value.is_finite() {
        Ok(SupermartingaleStat { value, saturated: false })
    } else {
        Ok(SupermartingaleStat {
            value: f64::MAX,
            saturated: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn law(s: &str) -> JointStepLaw {
        JointStepLaw::parse(s).unwrap()
    }

    #[test]
    fn deterministic_walk_truncation() {
        let p = simulate_path(&law("det(1,0.5)"), 3.2, &mut Stream::replicate(0, 0)).unwrap();
        assert_eq!(p.s, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.t_birth, vec![0.5, 1.5, 2.5, 3.5]);
        assert!(p.s[p.s.len() - 1] > p.horizon && p.horizon >= p.s[p.s.len() - 2]);
    }

    #[test]
    fn cap_is_enforced() {
        let err = simulate_path_with_cap(&law("exp_indep(1,1)"), 1e3, &mut Stream::replicate(0, 0), 10);
        assert!(matches!(err, Err(Error::PopulationCap { cap: 10, .. })));
        assert!(simulate_path(&law("exp_indep(1,1)"), 0.0, &mut Stream::replicate(0, 0)).is_err());
    }

    #[test]
    fn deterministic_counts() {
        let p = simulate_path(&law("det(1,0.5)"), 10.0, &mut Stream::replicate(0, 0)).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.25).collect();
        let y = count_y(&p, &grid).unwrap();
        let nu = count_nu(&p, &grid).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            let y_expect = if t < 0.5 { 0.0 } else { (t + 0.5).floor() };
            assert_eq!(y.values[i], y_expect, "Y({t})");
            assert_eq!(nu.values[i], t.floor() + 1.0, "nu({t})");
        }
        assert!(matches!(count_y(&p, &[11.0]), Err(Error::OutOfHorizon { .. })));
    }

    #[test]
    fn coupled_walk_has_y_equal_nu_minus_one() {
        let p = simulate_path(&law("eta_eq_xi(exp(1))"), 200.0, &mut Stream::replicate(5, 1)).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| i as f64).collect();
        let y = count_y(&p, &grid).unwrap();
        let nu = count_nu(&p, &grid).unwrap();
        for (a, b) in y.values.iter().zip(&nu.values) {
            assert_eq!(*a, b - 1.0);
        }
    }

    #[test]
    fn tail_sum_by_enumeration() {
        let d = law("det(1,0.5)");
        let p = simulate_path(&d, 10.0, &mut Stream::replicate(0, 0)).unwrap();
        assert_eq!(tail_sum(&p, 3.0, &d).unwrap(), 1.0);
        // F(t - S_k) = 1 for all S_k <= 2.4 when eta = 0.5
        assert_eq!(tail_sum(&p, 2.6, &d).unwrap(), 0.0);
        for n in 1..10 {
            assert_eq!(tail_sum(&p, n as f64, &d).unwrap(), 1.0);
        }
    }

    #[test]
    fn decomposition_below_eta_support() {
        let st = law("slow_tail(1)");
        let p = simulate_path(&st, 50.0, &mut Stream::replicate(2, 0)).unwrap();
        let (x, z) = decompose_xz(&p, 2.0, &st).unwrap();
        assert_eq!(x, 0.0);
        assert_eq!(z, 0.0);
        for &u in &[0.3, -1.5] {
            let v = supermartingale_stat(&p, 2.0, u, &st).unwrap();
            let tail = tail_sum(&p, 2.0, &st).unwrap();
            assert_eq!(tail, p.nu_at(2.0) as f64);
            assert!((v.value - (-0.5 * u * u * u.abs().exp() * tail).exp()).abs() < 1e-15);
            assert!(v.value <= 1.0);
        }
        assert!(matches!(supermartingale_stat(&p, 2.0, 0.0, &st), Err(Error::Precondition(_))));
    }

    #[test]
    fn decomposition_identity() {
        let l = law("eta_eq_xi(exp(1))");
        let p = simulate_path(&l, 100.0, &mut Stream::replicate(11, 4)).unwrap();
        for &t in &[1.0, 10.0, 55.5, 100.0] {
            let (x, z) = decompose_xz(&p, t, &l).unwrap();
            let centering = t - (1.0 - (-t).exp());
            let y = p.y_at(t) as f64;
            assert!((x + z + centering - y).abs() < 1e-9, "t={t}");
            assert_eq!(x + compensator(&p, t, &l).unwrap(), y);
        }
    }

    #[test]
    fn midpoint_integral_accuracy() {
        let l = law("exp_indep(1,1)");
        for &t in &[0.5, 3.0, 100.0, 2000.0] {
            let exact = l.integrated_eta_cdf_closed(t).unwrap();
            let quad = midpoint_eta_integral(&l, t);
            assert!(((quad - exact) / exact).abs() <= 1e-6, "t={t}: {quad} vs {exact}");
        }
        let st = law("slow_tail(1)");
        let many = integrated_eta_cdf(&st, &[1.0, 10.0, 100.0]).unwrap();
        assert_eq!(many[0], 0.0);
        assert!((many[2] - midpoint_eta_integral(&st, 100.0)).abs() < 1e-9);
    }
}
