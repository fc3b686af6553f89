//! Subcommand drivers behind the `iterlil` binary.
//!
//! Every artifact is written under `cfg.out` as `<subcommand>-<fingerprint>-<part>`.

use std::fs;
use std::io::BufWriter;
use std::path::PathBuf;

use rand::Rng;
use serde_json::{json, Value};

use crate::acceptance;
use crate::branching::{replicate_runs, BranchingOptions};
use crate::config::McConfig;
use crate::csvio::{fmt_count, fmt_real, writer};
use crate::error::{Error, Result};
use crate::lil::{
    clt_check, lil_scan, nu_increment_check, supermartingale_check, tail_sum_check, variance_scan, LilScanConfig,
};
use crate::prw::simulate_path;
use crate::renewal::{build_tables, check_subadditivity};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Renewal,
    LilScan,
    VarScan,
    Checks,
    All,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Renewal => "renewal",
            Subcommand::LilScan => "lil-scan",
            Subcommand::VarScan => "var-scan",
            Subcommand::Checks => "checks",
            Subcommand::All => "all",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub pass: bool,
    pub artifacts: Vec<PathBuf>,
    /// One human-readable line per result.
    pub lines: Vec<String>,
}

struct Sink<'a> {
    cfg: &'a McConfig,
    prefix: String,
    artifacts: Vec<PathBuf>,
}

impl Sink<'_> {
    fn path(&mut self, part: &str) -> PathBuf {
        let p = self.cfg.out.join(format!("{}-{part}", self.prefix));
        self.artifacts.push(p.clone());
        p
    }

    fn summary(&mut self, pass: bool, results: Value) -> Result<()> {
        let doc = json!({
            "fingerprint": self.cfg.fingerprint(),
            "config": self.cfg.canonical_text(),
            "pass": pass,
            "results": results,
        });
        let path = self.path("summary.json");
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
        fs::write(path, text + "\n")?;
        Ok(())
    }
}

/// Runs `sub` on a pool of `cfg.workers` threads.
pub fn run_subcommand(sub: Subcommand, cfg: &McConfig) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start {} workers: {e}", cfg.workers)))?;
    fs::create_dir_all(&cfg.out)?;
    let mut sink = Sink {
        cfg,
        prefix: format!("{}-{}", sub.name(), cfg.fingerprint()),
        artifacts: Vec::new(),
    };
    let (pass, lines) = pool.install(|| match sub {
        Subcommand::Simulate => simulate(&mut sink),
        Subcommand::Renewal => renewal(&mut sink),
        Subcommand::LilScan => scan(&mut sink),
        Subcommand::VarScan => var_scan(&mut sink),
        Subcommand::Checks => checks(&mut sink),
        Subcommand::All => all(&mut sink),
    })?;
    Ok(RunReport {
        pass,
        artifacts: sink.artifacts,
        lines,
    })
}

type Verdict = Result<(bool, Vec<String>)>;

fn simulate(sink: &mut Sink) -> Verdict {
    let cfg = sink.cfg;
    let times = cfg.grid.times(cfg.t_min, cfg.horizon)?;
    // the founder of replicate 0 uses this stream, so the dump matches its Y_1 column
    let path = simulate_path(&cfg.law, cfg.horizon, &mut Stream::lineage(cfg.seed, 0, 1, 0))?;
    path.write_csv(BufWriter::new(fs::File::create(sink.path("path.csv"))?))?;

    let runs = replicate_runs(&cfg.law, cfg.horizon, cfg.j, &times, cfg.seed, cfg.reps, BranchingOptions::default())?;
    let mut w = writer(&sink.path("counts.csv"))?;
    let mut header = vec!["replicate".to_string(), "t".to_string()];
    header.extend((1..=cfg.j).map(|j| format!("Y_{j}")));
    w.write_record(&header)?;
    for (rep, run) in runs.iter().enumerate() {
        for (i, &t) in times.iter().enumerate() {
            let mut row = vec![rep.to_string(), fmt_real(t)];
            row.extend(run.counts.iter().map(|c| fmt_count(c.values[i])));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    let births: u64 = runs.iter().map(|r| r.births_processed).sum();
    sink.summary(true, json!({ "replicates": cfg.reps, "births": births, "path_steps": path.len() }))?;
    Ok((true, vec![format!("simulated {} replicates, {births} births", cfg.reps)]))
}

fn renewal(sink: &mut Sink) -> Verdict {
    let cfg = sink.cfg;
    let table = build_tables(&cfg.law, cfg.step, cfg.horizon, cfg.j)?;
    table.write_csv(BufWriter::new(fs::File::create(sink.path("table.csv"))?))?;
    let mono = |xs: &[f64]| xs.windows(2).all(|w| w[0] <= w[1]);
    let pass = mono(&table.u)
        && table.v.iter().all(|v| mono(v))
        && table.v[0].iter().zip(&table.u).all(|(v, u)| v <= u);
    let t = table.t_max;
    let u = table.u_at(t)?;
    let vs: Vec<f64> = (1..=cfg.j).map(|j| table.v_at(j, t)).collect::<Result<_>>()?;
    sink.summary(pass, json!({ "t_max": t, "U": u, "V": vs }))?;
    let mut lines = vec![format!("U({t}) = {u}")];
    lines.extend(vs.iter().enumerate().map(|(j, v)| format!("V_{}({t}) = {v}", j + 1)));
    Ok((pass, lines))
}

fn scan(sink: &mut Sink) -> Verdict {
    let cfg = sink.cfg;
    let res = lil_scan(
        &cfg.law,
        &LilScanConfig {
            j: cfg.j,
            grid: cfg.grid.clone(),
            t_min: cfg.t_min,
            t_max: cfg.horizon,
            n_rep: cfg.reps,
            seed: cfg.seed,
            step: cfg.step,
        },
        None,
    )?;
    res.write_csv(BufWriter::new(fs::File::create(sink.path("scan.csv"))?))?;
    let pass = res.running_extremes_monotone() && res.r.iter().flatten().all(|x| x.is_finite());
    sink.summary(
        pass,
        json!({ "envelope_max": res.envelope_max, "envelope_min": res.envelope_min, "final": res.final_values() }),
    )?;
    Ok((pass, vec![format!("envelope [{}, {}]", res.envelope_min, res.envelope_max)]))
}

const VAR_SCAN_TIMES: [f64; 5] = [25.0, 50.0, 100.0, 200.0, 400.0];
const CHECK_TIMES: [f64; 3] = [1e3, 1e4, 1e5];

fn var_scan(sink: &mut Sink) -> Verdict {
    let cfg = sink.cfg;
    let points = cfg.t_points.clone().unwrap_or_else(|| VAR_SCAN_TIMES.to_vec());
    let res = variance_scan(&cfg.law, cfg.j, &points, cfg.reps, cfg.seed)?;
    res.write_csv(BufWriter::new(fs::File::create(sink.path("variance.csv"))?))?;
    let target = 2.0 * cfg.j as f64 - 1.0;
    let pass = (res.slope - target).abs() <= 0.35;
    sink.summary(pass, json!({ "slope": res.slope, "target": target }))?;
    Ok((pass, vec![format!("log-log slope {} (target {target} +- 0.35)", res.slope)]))
}

fn checks(sink: &mut Sink) -> Verdict {
    let cfg = sink.cfg;
    let law = &cfg.law;
    let points = cfg.t_points.clone().unwrap_or_else(|| CHECK_TIMES.to_vec());
    let mut rows: Vec<[String; 5]> = Vec::new();
    let mut pass = true;
    let mut results = serde_json::Map::new();

    let sm = supermartingale_check(law, cfg.horizon, &cfg.u, cfg.reps, cfg.seed)?;
    for c in &sm {
        pass &= c.pass();
        rows.push([
            "supermartingale".into(),
            format!("u={}", c.u),
            fmt_real(c.mean),
            fmt_real(c.se),
            c.pass().to_string(),
        ]);
    }
    results.insert(
        "supermartingale".into(),
        json!(sm.iter().map(|c| json!({"u": c.u, "mean": c.mean, "se": c.se, "saturated": c.saturated})).collect::<Vec<_>>()),
    );

    let tail = tail_sum_check(law, &points, cfg.reps, cfg.seed)?;
    let incr = nu_increment_check(law, &points, 1.0, 0.5, cfg.reps, cfg.seed)?;
    for (name, prof) in [("tail_sum", &tail), ("nu_increment", &incr)] {
        pass &= prof.pass;
        for (t, m) in prof.t_points.iter().zip(&prof.medians) {
            rows.push([name.into(), format!("t={t}"), fmt_real(*m), String::new(), prof.pass.to_string()]);
        }
        results.insert(name.into(), json!({ "medians": prof.medians, "pass": prof.pass }));
    }

    let table = build_tables(law, cfg.step, cfg.horizon, 2)?;
    if law.is_degenerate() {
        results.insert("clt".into(), json!("skipped: degenerate law"));
    } else {
        let clt = clt_check(law, &table, cfg.horizon, cfg.reps, cfg.seed)?;
        pass &= clt.pass();
        rows.push([
            "clt".into(),
            format!("t={}", cfg.horizon),
            fmt_real(clt.ks),
            fmt_real(clt.critical),
            clt.pass().to_string(),
        ]);
        results.insert("clt".into(), json!({ "ks": clt.ks, "critical": clt.critical, "mean": clt.mean }));
    }

    let mut rng = Stream::replicate(cfg.seed, u64::MAX);
    let mut violations = 0usize;
    for _ in 0..1000 {
        let x = rng.random_range(0.0..0.8 * table.t_max).max(f64::MIN_POSITIVE);
        let h = rng.random_range(0.0..0.2 * table.t_max).max(f64::MIN_POSITIVE);
        for k in 1..=2 {
            if !check_subadditivity(&table, k, x, h)?.holds() {
                violations += 1;
            }
        }
    }
    pass &= violations == 0;
    rows.push([
        "increment_bound".into(),
        "pairs=1000,k=1..2".into(),
        violations.to_string(),
        String::new(),
        (violations == 0).to_string(),
    ]);
    results.insert("increment_bound_violations".into(), json!(violations));

    let mut w = writer(&sink.path("checks.csv"))?;
    w.write_record(["check", "parameter", "value", "scale", "pass"])?;
    for r in &rows {
        w.write_record(r)?;
    }
    w.flush()?;
    sink.summary(pass, Value::Object(results))?;
    Ok((pass, rows.iter().map(|r| r.join(" ")).collect()))
}

fn all(sink: &mut Sink) -> Verdict {
    let outcomes = acceptance::run_all();
    let pass = outcomes.iter().all(|o| o.pass);
    let mut w = writer(&sink.path("criteria.csv"))?;
    w.write_record(["criterion", "name", "pass"])?;
    for o in &outcomes {
        w.write_record([o.id.to_string(), o.name.to_string(), o.pass.to_string()])?;
    }
    w.flush()?;
    sink.summary(
        pass,
        json!(outcomes
            .iter()
            .map(|o| json!({"id": o.id, "name": o.name, "pass": o.pass, "detail": o.detail, "seconds": o.seconds}))
            .collect::<Vec<_>>()),
    )?;
    Ok((pass, outcomes.iter().map(|o| o.to_string()).collect()))
}
