//! Where the time goes: overhead decomposition, per-resource slack and
//! hyperthreading-factor sweeps.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::schedule;
use crate::memory::{feasible, BindingConstraint};
use crate::model::{ArchConfig, CalibrationSet, StencilKernel, TileConfig};
use crate::time::{t_alg_scheduled, wavefront_times, TimeBreakdown};

/// Slack at or below this counts as saturated.
const SATURATED: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resource {
    SharedMemory,
    Occupancy,
    Bandwidth,
    AreaBudget,
    None,
}

/// Overhead components in ns; they sum to `t_alg - t_ideal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverheadComponents {
    pub sync: f64,
    pub transfer_excess: f64,
    pub quantization: f64,
    pub padding: f64,
}

impl OverheadComponents {
    pub fn sum(&self) -> f64 {
        self.sync + self.transfer_excess + self.quantization + self.padding
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckReport {
    pub components: OverheadComponents,
    pub binding_resources: Vec<Resource>,
    pub slack: BTreeMap<Resource, f64>,
    pub overhead_total: f64,
    pub time: TimeBreakdown,
}

fn require_feasible(kernel: &StencilKernel, arch: &ArchConfig, tile: &TileConfig) -> Result<()> {
    let report = feasible(kernel, arch, tile);
    if report.feasible {
        Ok(())
    } else {
        Err(Error::Infeasible(format!(
            "footprint {} B violates {:?}",
            report.bytes_per_tile, report.binding_constraint
        )))
    }
}

/// Per-resource slack in `[0, 1]`; 0 means saturated.
///
/// Occupancy is the mean over wavefronts of `1 - (w mod n_SM·k) / (n_SM·k)`.
pub fn saturation(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<BTreeMap<Resource, f64>> {
    let sched = schedule(kernel, tile)?;
    require_feasible(kernel, arch, tile)?;
    let report = feasible(kernel, arch, tile);
    let shared = 1.0 - report.bytes_with_k as f64 / arch.m_sm as f64;

    let slots = arch.n_sm * tile.k;
    let occupancy = sched
        .tiles_per_wavefront
        .iter()
        .map(|&w| 1.0 - (w % slots) as f64 / slots as f64)
        .sum::<f64>()
        / sched.tiles_per_wavefront.len() as f64;

    let time = t_alg_scheduled(kernel, arch, calib, tile, &sched);
    let rounds: f64 = wavefront_times(kernel, arch, calib, tile, &sched)
        .iter()
        .map(|w| w.rounds as f64)
        .sum();
    let (compute, transfer) = (
        time.t_compute_total / rounds,
        time.t_transfer_total / rounds,
    );
    let bandwidth = if compute > 0.0 {
        (1.0 - transfer / compute).clamp(0.0, 1.0)
    } else if transfer > 0.0 {
        0.0
    } else {
        1.0
    };

    Ok(BTreeMap::from([
        (Resource::SharedMemory, shared.clamp(0.0, 1.0)),
        (Resource::Occupancy, occupancy),
        (Resource::Bandwidth, bandwidth),
    ]))
}

/// Fraction of the area budget left unused.
pub fn area_slack(area_mm2: f64, budget_mm2: f64) -> f64 {
    (1.0 - area_mm2 / budget_mm2).clamp(0.0, 1.0)
}

pub fn decompose(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<BottleneckReport> {
    let sched = schedule(kernel, tile)?;
    require_feasible(kernel, arch, tile)?;
    let time = t_alg_scheduled(kernel, arch, calib, tile, &sched);

    let sync = time.t_sync_total;
    let t_compute = time.t_compute_total
        / wavefront_times(kernel, arch, calib, tile, &sched)
            .iter()
            .map(|w| w.rounds as f64)
            .sum::<f64>();
    let transfer_excess: f64 = wavefront_times(kernel, arch, calib, tile, &sched)
        .iter()
        .map(|w| (w.t_prism - t_compute).max(0.0) * w.rounds as f64)
        .sum();
    let padding = (sched.total_points_enumerated - kernel.iteration_points()) as f64
        * calib.c_iter_for(kernel)
        / (arch.n_sm * arch.n_v) as f64;
    let overhead_total = time.t_overhead;
    let quantization = overhead_total - sync - transfer_excess - padding;
    if quantization < -1e-9 * time.t_alg.max(1.0) {
        log::warn!(
            "negative quantization overhead {quantization} ns for {}: model terms are inconsistent",
            kernel.name
        );
    }

    let slack = saturation(kernel, arch, calib, tile)?;
    let mut binding_resources: Vec<Resource> = slack
        .iter()
        .filter(|(r, &s)| **r != Resource::Occupancy && s <= SATURATED)
        .map(|(r, _)| *r)
        .collect();
    if quantization > SATURATED * time.t_alg.max(1.0) {
        binding_resources.push(Resource::Occupancy);
        binding_resources.sort();
    }
    if binding_resources.is_empty() {
        binding_resources.push(Resource::None);
    }

    Ok(BottleneckReport {
        components: OverheadComponents {
            sync,
            transfer_excess,
            quantization,
            padding,
        },
        binding_resources,
        slack,
        overhead_total,
        time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub k: u64,
    pub feasible: bool,
    pub binding_constraint: BindingConstraint,
    /// `None` when infeasible.
    pub time: Option<TimeBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HyperthreadingSweep {
    pub entries: Vec<SweepEntry>,
    /// Fastest feasible `k`; the smaller `k` wins ties.
    pub best_k: Option<u64>,
}

pub fn hyperthreading_sweep(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile_base: &TileConfig,
    ks: impl IntoIterator<Item = u64>,
) -> Result<HyperthreadingSweep> {
    let mut entries = Vec::new();
    let mut best: Option<(f64, u64)> = None;
    for k in ks {
        if k == 0 {
            return Err(Error::validation("k", "must be at least 1"));
        }
        let tile = tile_base.clone().with_k(k);
        let report = feasible(kernel, arch, &tile);
        let time = if report.feasible {
            let sched = schedule(kernel, &tile)?;
            Some(t_alg_scheduled(kernel, arch, calib, &tile, &sched))
        } else {
            None
        };
        if let Some(t) = &time {
            let better = best.map_or(true, |(b, bk)| {
                t.t_alg.total_cmp(&b).then(k.cmp(&bk)).is_lt()
            });
            if better {
                best = Some((t.t_alg, k));
            }
        }
        entries.push(SweepEntry {
            k,
            feasible: report.feasible,
            binding_constraint: report.binding_constraint,
            time,
        });
    }
    Ok(HyperthreadingSweep {
        entries,
        best_k: best.map(|(_, k)| k),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KIB;
    use crate::time::fixtures::*;
    use crate::time::t_alg;

    #[test]
    fn toy_split() {
        let r = decompose(&toy_kernel(), &toy_arch(2), &toy_calib(100.0), &toy_tile()).unwrap();
        assert_eq!(r.overhead_total, 356.0);
        assert_eq!(r.components.sync, 300.0);
        assert_eq!(r.components.transfer_excess, 0.0);
        // (3·4·80 − 512) / 8
        assert_eq!(r.components.padding, 56.0);
        assert_eq!(r.components.quantization, 0.0);
        assert_eq!(r.slack[&Resource::Occupancy], 1.0);
        assert_eq!(r.slack[&Resource::Bandwidth], 1.0);
    }

    #[test]
    fn ideal_case_is_zero() {
        // r = 0 rectangles dividing the grid, one tile per SM per wavefront.
        let kernel = StencilKernel {
            stencil_order: 0,
            sizes: vec![16, 8],
            ..toy_kernel()
        };
        let tile = TileConfig::rect(16, 4, 8, 1);
        let r = decompose(&kernel, &toy_arch(1), &toy_calib(0.0), &tile).unwrap();
        assert_eq!(r.components.sum(), 0.0);
        assert_eq!(r.overhead_total, 0.0);
        assert_eq!(r.binding_resources, vec![Resource::None]);
    }

    #[test]
    fn transfer_bound_fixture() {
        let arch = ArchConfig {
            bw_global: 0.5,
            ..toy_arch(2)
        };
        let r = decompose(&toy_kernel(), &arch, &toy_calib(100.0), &toy_tile()).unwrap();
        assert!(r.components.transfer_excess > 0.0);
        assert!(!r.time.compute_bound);
        assert_eq!(r.slack[&Resource::Bandwidth], 0.0);
        assert!(r.binding_resources.contains(&Resource::Bandwidth));
        let rel = (r.components.sum() - r.overhead_total).abs() / r.overhead_total;
        assert!(rel <= 1e-9);
    }

    #[test]
    fn shared_memory_saturation() {
        // fp(4, 2) = 2·4·8·10 = 640 B; k = 2 fills 1280 B exactly.
        let arch = ArchConfig {
            m_sm: 1280,
            ..toy_arch(2)
        };
        let tile = toy_tile().with_k(2);
        let s = saturation(&toy_kernel(), &arch, &toy_calib(0.0), &tile).unwrap();
        assert_eq!(s[&Resource::SharedMemory], 0.0);
    }

    #[test]
    fn sweep_flags_capacity() {
        let arch = ArchConfig {
            m_sm: 2 * KIB,
            ..toy_arch(2)
        };
        let sweep =
            hyperthreading_sweep(&toy_kernel(), &arch, &toy_calib(100.0), &toy_tile(), 1..=4)
                .unwrap();
        // 640 B per tile: k = 4 needs 2560 B.
        assert!(sweep.entries[2].feasible);
        assert!(!sweep.entries[3].feasible);
        assert_eq!(
            sweep.entries[3].binding_constraint,
            BindingConstraint::KCapacity
        );
    }

    #[test]
    fn sweep_at_one_is_plain_t_alg() {
        let (k, a, c, t) = (toy_kernel(), toy_arch(2), toy_calib(100.0), toy_tile());
        let sweep = hyperthreading_sweep(&k, &a, &c, &t, [1]).unwrap();
        assert_eq!(sweep.entries.len(), 1);
        assert_eq!(
            sweep.entries[0].time.as_ref(),
            Some(&t_alg(&k, &a, &c, &t).unwrap())
        );
        assert_eq!(sweep.best_k, Some(1));
    }

    #[test]
    fn area_budget_slack() {
        assert_eq!(area_slack(250.0, 500.0), 0.5);
        assert_eq!(area_slack(600.0, 500.0), 0.0);
    }
}
