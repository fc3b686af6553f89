//! General branching process generated by a perturbed random walk.
//!
//! The founder is born at time 0 and its children are born at `T_1, T_2, ...`.
//! Every individual born at `b` reproduces at `b + T'_1, b + T'_2, ...` with an
//! independent copy `T'` of the walk. Generations are processed one at a time;
//! only the frontier of the current generation is kept in memory and the last
//! requested generation is streamed straight into the grid histogram.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::distributions::JointStepLaw;
use crate::error::{Error, Result};
use crate::grid::{check_ascending, GridFunction};
use crate::rng::Stream;

pub const DEFAULT_BIRTH_CAP: u64 = 100_000_000;

/// Mothers handed to one task.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapPolicy {
    /// Return [`Error::PopulationCap`].
    Fail,
    /// Keep the generations completed so far and flag the run as capped.
    Truncate,
}

#[derive(Debug, Clone, Copy)]
pub struct BranchingOptions {
    pub cap: u64,
    pub policy: CapPolicy,
}

impl Default for BranchingOptions {
    fn default() -> Self {
        BranchingOptions {
            cap: DEFAULT_BIRTH_CAP,
            policy: CapPolicy::Fail,
        }
    }
}

/// Identifies the family of random streams of one branching run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeed {
    pub master: u64,
    pub replicate: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRun {
    pub j_max: usize,
    pub grid: Vec<f64>,
    /// `counts[j - 1]` holds `Y_j` on the grid.
    pub counts: Vec<GridFunction>,
    /// First-generation birth times `T_k <= horizon`, in walk order.
    /// Only retained when `j_max >= 2`.
    pub first_generation: Vec<f64>,
    pub births_processed: u64,
    pub capped: bool,
}

struct ChunkOut {
    hist: Vec<u64>,
    children: Vec<(f64, u64)>,
    births: u64,
}

#[allow(clippy::too_many_arguments)]
fn spawn_chunk(
    law: &JointStepLaw,
    horizon: f64,
    grid: &[f64],
    seed: RunSeed,
    generation: usize,
    first_ordinal: usize,
    mothers: &[(f64, u64)],
    store: bool,
    cap: u64,
    used: &AtomicU64,
) -> ChunkOut {
    let mut out = ChunkOut {
        hist: vec![0; grid.len()],
        children: Vec::new(),
        births: 0,
    };
    for (offset, &(b, tag)) in mothers.iter().enumerate() {
        let ordinal = (first_ordinal + offset) as u64;
        let mut stream = Stream::lineage(seed.master, seed.replicate, generation as u64, ordinal);
        let mut mother_births = 0u64;
        let mut s = 0.0;
        let mut k = 0u64;
        loop {
            let (x, e) = law.sample_pair(&mut stream);
            let birth = b + s + e;
            if birth <= horizon {
                let i = grid.partition_point(|&t| t < birth);
                if i < out.hist.len() {
                    out.hist[i] += 1;
                }
                if store {
                    out.children.push((birth, if generation == 1 { k } else { tag }));
                }
                mother_births += 1;
                if mother_births > cap {
                    break;
                }
            }
            k += 1;
            s += x;
            if b + s > horizon {
                break;
            }
        }
        out.births += mother_births;
        if used.fetch_add(mother_births, Ordering::Relaxed) + mother_births > cap {
            break;
        }
    }
    out
}

/// Simulates generations `1..=j_max` up to `horizon` and tabulates
/// `Y_j(t)` on `grid`. Results depend only on `(law, horizon, j_max, grid, seed)`.
pub fn simulate_generations(
    law: &JointStepLaw,
    horizon: f64,
    j_max: usize,
    grid: &[f64],
    seed: RunSeed,
    opts: BranchingOptions,
) -> Result<GenerationRun> {
    if j_max == 0 {
        return Err(Error::InvalidParameter("j_max must be at least 1".into()));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    check_ascending(grid)?;
    if let Some(&last) = grid.last() {
        if last > horizon {
            return Err(Error::OutOfHorizon { t: last, horizon });
        }
    }

    let mut frontier: Vec<(f64, u64)> = vec![(0.0, 0)];
    let mut counts = Vec::with_capacity(j_max);
    let mut first_generation = Vec::new();
    let mut births_total = 0u64;
    let mut capped = false;

    for generation in 1..=j_max {
        let store = generation < j_max;
        let used = AtomicU64::new(births_total);
        let parts: Vec<ChunkOut> = frontier
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(ci, mothers)| {
                spawn_chunk(
                    law,
                    horizon,
                    grid,
                    seed,
                    generation,
                    ci * CHUNK,
                    mothers,
                    store,
                    opts.cap,
                    &used,
                )
            })
            .collect();

        let generation_births: u64 = parts.iter().map(|p| p.births).sum();
        births_total = births_total.saturating_add(generation_births);
        if births_total > opts.cap {
            match opts.policy {
                CapPolicy::Fail => {
                    return Err(Error::PopulationCap {
                        cap: opts.cap,
                        generation,
                    })
                }
                CapPolicy::Truncate => {
                    births_total -= generation_births;
                    capped = true;
                    break;
                }
            }
        }

        let mut hist = vec![0u64; grid.len()];
        let mut next = Vec::with_capacity(if store { generation_births as usize } else { 0 });
        for part in parts {
            for (h, c) in hist.iter_mut().zip(&part.hist) {
                *h += c;
            }
            next.extend(part.children);
        }
        let mut acc = 0u64;
        let values = hist
            .iter()
            .map(|&c| {
                acc += c;
                acc as f64
            })
            .collect();
        counts.push(GridFunction {
            grid: grid.to_vec(),
            values,
        });
        if generation == 1 && store {
            first_generation = next.iter().map(|&(b, _)| b).collect();
        }
        frontier = next;
    }

    Ok(GenerationRun {
        j_max,
        grid: grid.to_vec(),
        counts,
        first_generation,
        births_processed: births_total,
        capped,
    })
}

/// `Z_j(t) = sum_k (Y_{j-1}^{(k)}(t - T_k) - V_{j-1}(t - T_k)) 1{T_k <= t}`.
///
/// Each generation-j individual descends from exactly one first-generation
/// ancestor `k` with `T_k <= t`, so the tagged counts sum to `Y_j(t)` and only
/// the compensating sum over first-generation births needs the ancestor list.
pub fn zj_term(
    law: &JointStepLaw,
    horizon: f64,
    j: usize,
    grid: &[f64],
    seed: RunSeed,
    v_prev: &GridFunction,
    opts: BranchingOptions,
) -> Result<GridFunction> {
    if j < 2 {
        return Err(Error::InvalidParameter("Z_j is defined for j >= 2".into()));
    }
    let run = simulate_generations(law, horizon, j, grid, seed, opts)?;
    if run.capped {
        return Err(Error::PopulationCap {
            cap: opts.cap,
            generation: run.counts.len() + 1,
        });
    }
    let y = &run.counts[j - 1];
    let mut values = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let mut comp = 0.0;
        for &b in &run.first_generation {
            if b <= t {
                comp += v_prev.interpolate(t - b)?;
            }
        }
        values.push(y.values[i] - comp);
    }
    Ok(GridFunction {
        grid: grid.to_vec(),
        values,
    })
}

/// Runs `n_rep` independent replicates (replicate indices `0..n_rep`) in parallel.
pub fn replicate_runs(
    law: &JointStepLaw,
    horizon: f64,
    j_max: usize,
    grid: &[f64],
    master: u64,
    n_rep: usize,
    opts: BranchingOptions,
) -> Result<Vec<GenerationRun>> {
    (0..n_rep as u64)
        .into_par_iter()
        .map(|replicate| simulate_generations(law, horizon, j_max, grid, RunSeed { master, replicate }, opts))
        .collect()
}
