//! Time grids and functions tabulated on them.

use std::fmt;

use crate::error::{Error, Result};
use crate::syntax::{fmt_number, parse_call};

/// Values of a function on an ascending time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::Grid(format!(
                "grid has {} points but {} values",
                grid.len(),
                values.len()
            )));
        }
        check_ascending(&grid)?;
        Ok(GridFunction { grid, values })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[0] <= w[1])
    }

    /// Linear interpolation; zero for `t < 0`, error beyond the last node.
    ///
    /// Between 0 and the first node the function is interpolated from 0.
    pub fn interpolate(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        let last = *self.grid.last().ok_or_else(|| Error::Grid("empty grid".into()))?;
        if t > last {
            return Err(Error::TableRange { t, t_max: last });
        }
        let i = self.grid.partition_point(|&g| g < t);
        if self.grid[i] == t {
            return Ok(self.values[i]);
        }
        let (g0, v0) = if i == 0 { (0.0, 0.0) } else { (self.grid[i - 1], self.values[i - 1]) };
        let (g1, v1) = (self.grid[i], self.values[i]);
        Ok(v0 + (v1 - v0) * (t - g0) / (g1 - g0))
    }
}

pub fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::Grid("grid contains a non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Grid("grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Named recipes for scan grids.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// `t_min, t_min*r, t_min*r^2, ...`, closed by `t_max`.
    Geometric { ratio: f64 },
    /// `exp(n^{3/4})`, n = 1, 2, ...
    ProofGrid,
    /// `n^{3/2}`, n = 1, 2, ...
    ThreeHalves,
    /// `count` equally spaced points from `t_min` to `t_max`.
    Uniform { count: usize },
    /// Explicit times; `t_min`/`t_max` are ignored.
    Points(Vec<f64>),
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Geometric { ratio: 1.2 }
    }
}

const MAX_GRID_POINTS: usize = 10_000_000;

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let call = parse_call(spec)?;
        let nums = call.numbers()?;
        let bad = |msg: &str| Error::Parse {
            pos: call.pos,
            msg: msg.to_string(),
        };
        let g = match (call.name.as_str(), nums.as_slice()) {
            ("geometric", [r]) if *r > 1.0 => GridSpec::Geometric { ratio: *r },
            ("geometric", _) => return Err(bad("geometric(ratio) needs one ratio > 1")),
            ("proof_grid", []) => GridSpec::ProofGrid,
            ("three_halves", []) => GridSpec::ThreeHalves,
            ("uniform", [n]) if *n >= 2.0 && n.fract() == 0.0 && *n <= MAX_GRID_POINTS as f64 => {
                GridSpec::Uniform { count: *n as usize }
            }
            ("uniform", _) => return Err(bad("uniform(count) needs an integer count >= 2")),
            ("points", pts) if !pts.is_empty() => {
                check_ascending(pts).map_err(|e| bad(&e.to_string()))?;
                if pts[0] < 0.0 {
                    return Err(bad("points must be nonnegative"));
                }
                GridSpec::Points(pts.to_vec())
            }
            (other, _) => return Err(bad(&format!("unknown or malformed grid `{other}`"))),
        };
        Ok(g)
    }

    /// Resolves the recipe to concrete ascending times in `[t_min, t_max]`.
    pub fn times(&self, t_min: f64, t_max: f64) -> Result<Vec<f64>> {
        if let GridSpec::Points(p) = self {
            return Ok(p.clone());
        }
        if !(t_min.is_finite() && t_max.is_finite() && 0.0 <= t_min && t_min < t_max) {
            return Err(Error::Grid(format!("need 0 <= t_min < t_max, got [{t_min}, {t_max}]")));
        }
        let mut out = Vec::new();
        let push = |t: f64, out: &mut Vec<f64>| -> Result<()> {
            if out.len() >= MAX_GRID_POINTS {
                return Err(Error::Grid("grid too large".into()));
            }
            if t >= t_min && t <= t_max && out.last().is_none_or(|&l| t > l) {
                out.push(t);
            }
            Ok(())
        };
        match self {
            GridSpec::Geometric { ratio } => {
                if t_min <= 0.0 {
                    return Err(Error::Grid("geometric grid needs t_min > 0".into()));
                }
                let mut t = t_min;
                while t < t_max {
                    push(t, &mut out)?;
                    t *= ratio;
                }
            }
            GridSpec::ProofGrid => {
                let mut n = 1u64;
                loop {
                    let t = (n as f64).powf(0.75).exp();
                    if t > t_max {
                        break;
                    }
                    push(t, &mut out)?;
                    n += 1;
                }
            }
            GridSpec::ThreeHalves => {
                let mut n = 1u64;
                loop {
                    let t = (n as f64).powf(1.5);
                    if t > t_max {
                        break;
                    }
                    push(t, &mut out)?;
                    n += 1;
                }
            }
            GridSpec::Uniform { count } => {
                let step = (t_max - t_min) / (*count as f64 - 1.0);
                for i in 0..*count - 1 {
                    push(t_min + i as f64 * step, &mut out)?;
                }
            }
            GridSpec::Points(_) => unreachable!(),
        }
        push(t_max, &mut out)?;
        Ok(out)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Geometric { ratio } => write!(f, "geometric({})", fmt_number(*ratio)),
            GridSpec::ProofGrid => write!(f, "proof_grid"),
            GridSpec::ThreeHalves => write!(f, "three_halves"),
            GridSpec::Uniform { count } => write!(f, "uniform({count})"),
            GridSpec::Points(p) => {
                let parts: Vec<String> = p.iter().map(|x| fmt_number(*x)).collect();
                write!(f, "points({})", parts.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_grid_is_closed_by_t_max() {
        let t = GridSpec::Geometric { ratio: 2.0 }.times(20.0, 100.0).unwrap();
        assert_eq!(t, vec![20.0, 40.0, 80.0, 100.0]);
    }

    #[test]
    fn proof_grid_follows_exp_n_three_quarters() {
        let t = GridSpec::ProofGrid.times(20.0, 1e4).unwrap();
        for w in t.windows(2) {
            assert!(w[0] < w[1]);
        }
        // n = 5: exp(5^{3/4}) = exp(3.3437) ~ 28.3
        assert!((t[0] - 5f64.powf(0.75).exp()).abs() < 1e-12);
        assert_eq!(*t.last().unwrap(), 1e4);
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["geometric(1.2)", "proof_grid", "three_halves", "uniform(11)", "points(25.0,50.0,100.0)"] {
            let g = GridSpec::parse(s).unwrap();
            assert_eq!(g.to_string(), s);
        }
        for s in ["geometric(1)", "uniform(1.5)", "points(3,2)", "points(-1,2)", "spiral(2)"] {
            assert!(GridSpec::parse(s).is_err(), "{s}");
        }
    }

    #[test]
    fn interpolation() {
        let f = GridFunction::new(vec![1.0, 2.0, 4.0], vec![1.0, 3.0, 3.0]).unwrap();
        assert_eq!(f.interpolate(-1.0).unwrap(), 0.0);
        assert_eq!(f.interpolate(0.5).unwrap(), 0.5);
        assert_eq!(f.interpolate(1.5).unwrap(), 2.0);
        assert_eq!(f.interpolate(4.0).unwrap(), 3.0);
        assert!(matches!(f.interpolate(4.5), Err(Error::TableRange { .. })));
        assert!(GridFunction::new(vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
