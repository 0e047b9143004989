//! Tile-size optimization over declared grids: exhaustive tuning, super-tuning
//! across strategies, and pruning by the closed-form overhead.
//!
//! Every ranking is by objective value and then by [`TileConfig::sort_key`],
//! so results do not depend on grid declaration order or on how many threads
//! evaluate the candidates.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::read_json;
use crate::energy::{energy_from, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::geometry::schedule;
use crate::memory::feasible;
use crate::model::{ArchConfig, CalibrationSet, StencilKernel, Strategy, TileConfig};
use crate::time::{overhead_closed_form, t_alg_scheduled, t_prism, TimeBreakdown};

/// One tunable parameter: an inclusive stepped range or an explicit list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ParamRange {
    Values { values: Vec<u64> },
    Range { min: u64, max: u64, step: u64 },
}

impl ParamRange {
    pub fn values(values: impl Into<Vec<u64>>) -> Self {
        ParamRange::Values {
            values: values.into(),
        }
    }

    /// Sorted, de-duplicated values.
    pub fn expand(&self, name: &str) -> Result<Vec<u64>> {
        let mut v = match self {
            ParamRange::Values { values } => values.clone(),
            ParamRange::Range { min, max, step } => {
                if *step == 0 || min > max {
                    return Err(Error::validation(
                        name,
                        "range needs step > 0 and min <= max",
                    ));
                }
                (*min..=*max).step_by(*step as usize).collect()
            }
        };
        v.sort_unstable();
        v.dedup();
        if v.is_empty() || v[0] == 0 {
            return Err(Error::validation(
                name,
                "needs at least one value, all >= 1",
            ));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileGridSpec {
    pub strategy: Strategy,
    pub t_s1: ParamRange,
    pub t_t: ParamRange,
    pub t_s2: ParamRange,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s3: Option<ParamRange>,
    #[serde(default = "default_k")]
    pub k: ParamRange,
}

fn default_k() -> ParamRange {
    ParamRange::values([1])
}

fn powers_of_two(lo: u64, hi: u64) -> Vec<u64> {
    std::iter::successors(Some(lo), |v| Some(v * 2))
        .take_while(|&v| v <= hi)
        .collect()
}

impl TileGridSpec {
    /// Powers of two for the leading extents and time, warp multiples for the
    /// innermost (thread-mapped) extent.
    pub fn default_for(strategy: Strategy, kernel: &StencilKernel) -> Self {
        let inner = ParamRange::Range {
            min: 32,
            max: 256,
            step: 32,
        };
        let three_d = kernel.space_dims() == 3;
        TileGridSpec {
            strategy,
            t_s1: ParamRange::values(powers_of_two(1, 128)),
            t_t: ParamRange::values(powers_of_two(2, 64)),
            t_s2: if three_d {
                ParamRange::values(powers_of_two(1, 64))
            } else {
                inner.clone()
            },
            t_s3: three_d.then_some(inner),
            k: ParamRange::values([1, 2, 3, 4]),
        }
    }

    fn axes(&self, kernel: &StencilKernel) -> Result<Axes> {
        let t_s3 = match (kernel.space_dims(), &self.t_s3) {
            (2, _) => vec![0],
            (_, Some(r)) => r.expand("t_s3")?,
            (_, None) => {
                return Err(Error::Domain(format!(
                    "kernel `{}` is 3D but the grid has no t_s3 range",
                    kernel.name
                )))
            }
        };
        Ok(Axes {
            strategy: self.strategy,
            t_t: self.t_t.expand("t_t")?,
            t_s1: self.t_s1.expand("t_s1")?,
            t_s2: self.t_s2.expand("t_s2")?,
            t_s3,
            k: self.k.expand("k")?,
        })
    }
}

/// Reads one grid object or an array of them.
pub fn load_grids(path: impl AsRef<Path>) -> Result<Vec<TileGridSpec>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum GridFile {
        One(TileGridSpec),
        Many(Vec<TileGridSpec>),
    }
    Ok(match read_json::<GridFile>(path.as_ref())? {
        GridFile::One(g) => vec![g],
        GridFile::Many(v) => v,
    })
}

#[derive(Debug, Clone)]
struct Axes {
    strategy: Strategy,
    t_t: Vec<u64>,
    t_s1: Vec<u64>,
    t_s2: Vec<u64>,
    t_s3: Vec<u64>,
    k: Vec<u64>,
}

impl Axes {
    fn len(&self) -> usize {
        self.t_t.len() * self.t_s1.len() * self.t_s2.len() * self.t_s3.len() * self.k.len()
    }

    /// Candidate `i` in `(t_t, t_s1, t_s2, t_s3, k)` lexicographic order.
    fn get(&self, mut i: usize) -> TileConfig {
        let mut pick = |v: &Vec<u64>| {
            let x = v[i % v.len()];
            i /= v.len();
            x
        };
        let k = pick(&self.k);
        let t_s3 = pick(&self.t_s3);
        let t_s2 = pick(&self.t_s2);
        let t_s1 = pick(&self.t_s1);
        let t_t = pick(&self.t_t);
        TileConfig {
            strategy: self.strategy,
            t_s1,
            t_s2,
            t_s3: (t_s3 != 0).then_some(t_s3),
            t_t,
            k,
        }
    }
}

/// Lazy walk over the feasible part of a tile grid.
#[derive(Debug, Clone)]
pub struct FeasibleTiles<'a> {
    kernel: &'a StencilKernel,
    arch: &'a ArchConfig,
    axes: Axes,
    next: usize,
}

impl FeasibleTiles<'_> {
    /// Size of the full Cartesian grid, infeasible points included.
    pub fn candidate_count(&self) -> usize {
        self.axes.len()
    }
}

impl Iterator for FeasibleTiles<'_> {
    type Item = TileConfig;

    fn next(&mut self) -> Option<TileConfig> {
        while self.next < self.axes.len() {
            let tile = self.axes.get(self.next);
            self.next += 1;
            if tile.validate().is_ok() && feasible(self.kernel, self.arch, &tile).feasible {
                return Some(tile);
            }
        }
        None
    }
}

pub fn enumerate_tiles<'a>(
    kernel: &'a StencilKernel,
    arch: &'a ArchConfig,
    grid: &TileGridSpec,
) -> Result<FeasibleTiles<'a>> {
    let tiles = FeasibleTiles {
        kernel,
        arch,
        axes: grid.axes(kernel)?,
        next: 0,
    };
    if tiles.clone().next().is_none() {
        return Err(Error::EmptyFeasibleSpace);
    }
    Ok(tiles)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Time,
    Energy,
    Edp,
}

impl Objective {
    pub fn value(self, time: &TimeBreakdown, energy: &EnergyBreakdown) -> f64 {
        match self {
            Objective::Time => time.t_alg,
            Objective::Energy => energy.e_total,
            Objective::Edp => energy.edp,
        }
    }
}

/// One fully evaluated tile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub tile: TileConfig,
    pub time: TimeBreakdown,
    pub energy: EnergyBreakdown,
    pub objective_value: f64,
}

impl Evaluation {
    /// Total order: objective value, then the tile's lexicographic key.
    pub fn rank_cmp(&self, other: &Self) -> Ordering {
        self.objective_value
            .total_cmp(&other.objective_value)
            .then_with(|| self.tile.sort_key().cmp(&other.tile.sort_key()))
    }
}

pub fn evaluate(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
    objective: Objective,
) -> Result<Evaluation> {
    let sched = schedule(kernel, tile)?;
    let report = feasible(kernel, arch, tile);
    if !report.feasible {
        return Err(Error::Infeasible(format!(
            "{:?} bound on a {} B footprint",
            report.binding_constraint, report.bytes_per_tile
        )));
    }
    let time = t_alg_scheduled(kernel, arch, calib, tile, &sched);
    let energy = energy_from(kernel, calib, tile, &sched, &time);
    Ok(Evaluation {
        objective_value: objective.value(&time, &energy),
        tile: tile.clone(),
        time,
        energy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub objective: Objective,
    pub best: Evaluation,
    /// Best points in ascending rank order; `top_k[0] == best`.
    pub top_k: Vec<Evaluation>,
    /// Size of the Cartesian grid.
    pub evaluated_count: usize,
    pub feasible_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuneOptions {
    pub top_k: usize,
    /// Evaluate candidates on the rayon pool.
    pub parallel: bool,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            top_k: 10,
            parallel: true,
        }
    }
}

pub fn tune(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    grid: &TileGridSpec,
    objective: Objective,
) -> Result<TuneResult> {
    tune_with(kernel, arch, calib, grid, objective, TuneOptions::default())
}

pub fn tune_with(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    grid: &TileGridSpec,
    objective: Objective,
    options: TuneOptions,
) -> Result<TuneResult> {
    let tiles = enumerate_tiles(kernel, arch, grid)?;
    let evaluated_count = tiles.candidate_count();
    let candidates: Vec<TileConfig> = tiles.collect();
    let eval = |t: &TileConfig| evaluate(kernel, arch, calib, t, objective);
    let mut evals: Vec<Evaluation> = if options.parallel {
        candidates.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        candidates.iter().map(eval).collect::<Result<_>>()?
    };
    evals.sort_by(Evaluation::rank_cmp);
    let feasible_count = evals.len();
    evals.truncate(options.top_k.max(1));
    Ok(TuneResult {
        objective,
        best: evals[0].clone(),
        top_k: evals,
        evaluated_count,
        feasible_count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyMinimum {
    pub strategy: Strategy,
    /// `None` when the strategy's grid has no feasible tile.
    pub best: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperTuneResult {
    pub winner: Strategy,
    /// Tuning result of the winning grid.
    pub result: TuneResult,
    pub per_strategy: Vec<StrategyMinimum>,
}

/// Tunes every grid separately and keeps the best (minimum of minima).
pub fn supertune(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    grids: &[TileGridSpec],
    objective: Objective,
    options: TuneOptions,
) -> Result<SuperTuneResult> {
    let mut per_strategy = Vec::with_capacity(grids.len());
    let mut winner: Option<TuneResult> = None;
    for grid in grids {
        match tune_with(kernel, arch, calib, grid, objective, options) {
            Ok(res) => {
                per_strategy.push(StrategyMinimum {
                    strategy: grid.strategy,
                    best: Some(res.best.clone()),
                });
                let better = winner
                    .as_ref()
                    .map_or(true, |w| res.best.rank_cmp(&w.best) == Ordering::Less);
                if better {
                    winner = Some(res);
                }
            }
            Err(Error::EmptyFeasibleSpace) => per_strategy.push(StrategyMinimum {
                strategy: grid.strategy,
                best: None,
            }),
            Err(e) => return Err(e),
        }
    }
    let result = winner.ok_or(Error::EmptyFeasibleSpace)?;
    Ok(SuperTuneResult {
        winner: result.best.tile.strategy,
        result,
        per_strategy,
    })
}

/// Keeps the `keep` compute-bound feasible tiles with the smallest closed-form
/// overhead, i.e. the widest hexagonal faces.
pub fn prune_by_closed_form(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    grid: &TileGridSpec,
    keep: usize,
) -> Result<Vec<TileConfig>> {
    if grid.strategy != Strategy::HexHybrid {
        return Err(Error::Domain(
            "closed-form pruning needs a hex_hybrid grid".into(),
        ));
    }
    let mut ranked: Vec<(f64, TileConfig)> = Vec::new();
    for tile in enumerate_tiles(kernel, arch, grid)? {
        if t_prism(kernel, arch, calib, &tile)?.compute_bound {
            ranked.push((overhead_closed_form(kernel, calib, &tile)?, tile));
        }
    }
    if ranked.is_empty() {
        return Err(Error::EmptyFeasibleSpace);
    }
    ranked.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| a.1.sort_key().cmp(&b.1.sort_key()))
    });
    Ok(ranked.into_iter().take(keep).map(|(_, t)| t).collect())
}
