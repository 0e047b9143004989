//! Architecture search under an area budget with nested per-kernel tuning,
//! Pareto-frontier extraction and area breakdowns.

use std::cmp::Ordering;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::area::area;
use crate::config::read_json;
use crate::error::{Error, Result};
use crate::model::{
    ArchConfig, AreaCoeffs, CalibrationSet, StencilKernel, Strategy, TileConfig, WorkloadSuite, KIB,
};
use crate::tuner::{
    evaluate, prune_by_closed_form, supertune, Evaluation, Objective, ParamRange, TileGridSpec,
    TuneOptions,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchGridSpec {
    pub n_sm: ParamRange,
    pub n_v: ParamRange,
    pub m_sm_kib: ParamRange,
    #[serde(default = "zero_range")]
    pub l2_kib: ParamRange,
    #[serde(default = "one_range")]
    pub mem_ctrl_count: ParamRange,
    pub bw_global_gb_s: f64,
    /// Area budget in mm²; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_mm2: Option<f64>,
}

fn zero_range() -> ParamRange {
    ParamRange::values([0])
}

fn one_range() -> ParamRange {
    ParamRange::values([1])
}

/// Like [`ParamRange::expand`] but allows zero (an L2-less design).
fn expand_allow_zero(r: &ParamRange, name: &str) -> Result<Vec<u64>> {
    match r {
        ParamRange::Values { values } if values.contains(&0) => {
            let mut v = values.clone();
            v.sort_unstable();
            v.dedup();
            Ok(v)
        }
        ParamRange::Range { min: 0, max, step } => {
            let mut v = vec![0];
            if *max > 0 {
                v.extend(
                    ParamRange::Range {
                        min: *step,
                        max: *max,
                        step: *step,
                    }
                    .expand(name)?,
                );
            }
            Ok(v)
        }
        _ => r.expand(name),
    }
}

pub fn load_arch_space(path: impl AsRef<Path>) -> Result<ArchGridSpec> {
    read_json(path.as_ref())
}

/// Grid points with `area <= budget`, ordered by [`ArchConfig::sort_key`].
pub fn enumerate_archs(
    space: &ArchGridSpec,
    coeffs: &AreaCoeffs,
    budget: f64,
) -> Result<Vec<(ArchConfig, f64)>> {
    let n_sm = space.n_sm.expand("n_sm")?;
    let n_v = space.n_v.expand("n_v")?;
    let m_sm = space.m_sm_kib.expand("m_sm_kib")?;
    let l2 = expand_allow_zero(&space.l2_kib, "l2_kib")?;
    let mc = space.mem_ctrl_count.expand("mem_ctrl_count")?;
    let mut out = Vec::new();
    for &n_sm in &n_sm {
        for &n_v in &n_v {
            for &m in &m_sm {
                for &l2 in &l2 {
                    for &mc in &mc {
                        let arch = ArchConfig {
                            n_sm,
                            n_v,
                            m_sm: m * KIB,
                            bw_global: space.bw_global_gb_s,
                            l2_bytes: l2 * KIB,
                            mem_ctrl_count: mc,
                        };
                        arch.validate()?;
                        let a = area(&arch, coeffs);
                        if a <= budget {
                            out.push((arch, a));
                        }
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyDesignSpace);
    }
    Ok(out)
}

/// Best tile of one kernel on one architecture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelResult {
    pub kernel: String,
    pub weight: f64,
    /// `None` when no tile fits; the kernel then scores 0 GFLOP/s.
    pub tile: Option<TileConfig>,
    pub gflops: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignPoint {
    #[serde(serialize_with = "crate::config::serialize_arch")]
    pub arch: ArchConfig,
    pub area: f64,
    pub per_kernel: Vec<KernelResult>,
    pub weighted_gflops: f64,
}

impl DesignPoint {
    pub fn dominates(&self, other: &Self) -> bool {
        self.area <= other.area
            && self.weighted_gflops >= other.weighted_gflops
            && (self.area < other.area || self.weighted_gflops > other.weighted_gflops)
    }
}

#[derive(Debug, Clone)]
pub struct CodesignOptions {
    pub objective: Objective,
    /// Tile grids, super-tuned per kernel. Grids with a `t_s3` range apply to
    /// 3D kernels, the others to 2D kernels; a kernel with no applicable grid
    /// gets the default grid of each strategy.
    pub grids: Vec<TileGridSpec>,
    /// Restrict each inner tuning to this many closed-form-ranked hex tiles.
    /// Falls back to the full grid when no tile is compute-bound.
    pub prune_keep: Option<usize>,
}

impl Default for CodesignOptions {
    fn default() -> Self {
        CodesignOptions {
            objective: Objective::Time,
            grids: Vec::new(),
            prune_keep: None,
        }
    }
}

fn best_tile(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    options: &CodesignOptions,
) -> Result<Option<Evaluation>> {
    let three_d = kernel.space_dims() == 3;
    let mut grids: Vec<TileGridSpec> = options
        .grids
        .iter()
        .filter(|g| g.t_s3.is_some() == three_d)
        .cloned()
        .collect();
    if grids.is_empty() {
        grids = [Strategy::HexHybrid, Strategy::RectWavefront]
            .into_iter()
            .map(|s| TileGridSpec::default_for(s, kernel))
            .collect();
    }
    if let Some(keep) = options.prune_keep {
        let mut best: Option<Evaluation> = None;
        for grid in grids.iter().filter(|g| g.strategy == Strategy::HexHybrid) {
            let tiles = match prune_by_closed_form(kernel, arch, calib, grid, keep) {
                Ok(t) => t,
                Err(Error::EmptyFeasibleSpace) => continue,
                Err(e) => return Err(e),
            };
            for tile in &tiles {
                let e = evaluate(kernel, arch, calib, tile, options.objective)?;
                if best
                    .as_ref()
                    .map_or(true, |b| e.rank_cmp(b) == Ordering::Less)
                {
                    best = Some(e);
                }
            }
        }
        if best.is_some() {
            return Ok(best);
        }
    }
    let sequential = TuneOptions {
        top_k: 1,
        parallel: false,
    };
    match supertune(kernel, arch, calib, &grids, options.objective, sequential) {
        Ok(r) => Ok(Some(r.result.best)),
        Err(Error::EmptyFeasibleSpace) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Tunes every kernel of the suite on one architecture.
pub fn evaluate_design(
    suite: &WorkloadSuite,
    arch: &ArchConfig,
    area_mm2: f64,
    calib: &CalibrationSet,
    options: &CodesignOptions,
) -> Result<DesignPoint> {
    let mut per_kernel = Vec::with_capacity(suite.entries.len());
    let mut weighted_gflops = 0.0;
    for entry in &suite.entries {
        let best = best_tile(&entry.kernel, arch, calib, options)?;
        let gflops = best.as_ref().map_or(0.0, |e| e.time.gflops);
        weighted_gflops += entry.weight * gflops;
        per_kernel.push(KernelResult {
            kernel: entry.kernel.name.clone(),
            weight: entry.weight,
            tile: best.map(|e| e.tile),
            gflops,
        });
    }
    Ok(DesignPoint {
        arch: arch.clone(),
        area: area_mm2,
        per_kernel,
        weighted_gflops,
    })
}

/// Every in-budget architecture with its tuned suite performance, in
/// [`ArchConfig::sort_key`] order.
pub fn codesign(
    suite: &WorkloadSuite,
    space: &ArchGridSpec,
    coeffs: &AreaCoeffs,
    calib: &CalibrationSet,
    budget: f64,
    options: &CodesignOptions,
) -> Result<Vec<DesignPoint>> {
    let archs = enumerate_archs(space, coeffs, budget)?;
    archs
        .par_iter()
        .map(|(arch, a)| evaluate_design(suite, arch, *a, calib, options))
        .collect()
}

/// Non-dominated points sorted by area; weighted GFLOP/s strictly increases.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ParetoSet {
    pub points: Vec<DesignPoint>,
}

fn frontier_order(a: &DesignPoint, b: &DesignPoint) -> Ordering {
    a.area
        .total_cmp(&b.area)
        .then_with(|| b.weighted_gflops.total_cmp(&a.weighted_gflops))
        .then_with(|| a.arch.sort_key().cmp(&b.arch.sort_key()))
}

impl ParetoSet {
    /// Adds one point, keeping the set a frontier. Returns whether the point
    /// is on the frontier afterwards.
    pub fn insert(&mut self, p: DesignPoint) -> bool {
        // Best-performing point at or below p's area.
        let upto = self.points.partition_point(|q| q.area <= p.area);
        if let Some(q) = upto.checked_sub(1).map(|i| &self.points[i]) {
            if q.weighted_gflops >= p.weighted_gflops {
                let duplicate = q.area == p.area && q.weighted_gflops == p.weighted_gflops;
                if duplicate && p.arch.sort_key() < q.arch.sort_key() {
                    self.points[upto - 1] = p;
                    return true;
                }
                return false;
            }
        }
        // Points p now dominates form a contiguous run starting at p's area.
        let start = self.points.partition_point(|q| q.area < p.area);
        let end = start
            + self.points[start..]
                .iter()
                .take_while(|q| q.weighted_gflops <= p.weighted_gflops)
                .count();
        self.points.splice(start..end, [p]);
        true
    }
}

/// Exact dominance filter on (area minimized, weighted GFLOP/s maximized).
/// Equal pairs keep the lexicographically smallest architecture.
pub fn pareto(points: &[DesignPoint]) -> ParetoSet {
    let mut sorted: Vec<&DesignPoint> = points.iter().collect();
    sorted.sort_by(|a, b| frontier_order(a, b));
    let mut out: Vec<DesignPoint> = Vec::new();
    for p in sorted {
        if out
            .last()
            .map_or(true, |q| p.weighted_gflops > q.weighted_gflops)
        {
            out.push(p.clone());
        }
    }
    ParetoSet { points: out }
}

/// Indices of the frontier of `(area, value)` pairs; ties keep the lowest index.
pub fn pareto_indices(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i]
            .0
            .total_cmp(&points[j].0)
            .then_with(|| points[j].1.total_cmp(&points[i].1))
            .then(i.cmp(&j))
    });
    let mut out: Vec<usize> = Vec::new();
    for i in order {
        if out.last().map_or(true, |&j| points[i].1 > points[j].1) {
            out.push(i);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResourceAllocation {
    /// Shared memory plus L2.
    pub frac_memory: f64,
    pub frac_vector: f64,
    pub frac_other: f64,
}

pub fn resource_allocation(arch: &ArchConfig, coeffs: &AreaCoeffs) -> Result<ResourceAllocation> {
    let total = area(arch, coeffs);
    if !(total > 0.0) {
        return Err(Error::Domain(
            "resource allocation needs a positive area".into(),
        ));
    }
    let n_sm = arch.n_sm as f64;
    let memory = n_sm * coeffs.a_shmem_kib * arch.m_sm_kib() + coeffs.a_l2_kib * arch.l2_kib();
    let vector = n_sm * coeffs.a_lane * arch.n_v as f64;
    let frac_memory = memory / total;
    let frac_vector = vector / total;
    Ok(ResourceAllocation {
        frac_memory,
        frac_vector,
        frac_other: 1.0 - frac_memory - frac_vector,
    })
}
