//! Analytical execution-time model.
//!
//! ```text
//! T_alg   = Σ_wavefronts ( T_sync + T_prism · ⌈ ⌈w/k⌉ / n_SM ⌉ )
//! T_ideal = S1·S2·(S3)·T · C_iter / (n_SM · n_V)
//! ```
//!
//! A prism costs `max(compute, transfer)`: computation and data movement are
//! assumed to overlap. Compute time is `volume · C_iter · k / n_V` (the `k`
//! resident tiles share the lanes). Transfer time is the tile's traffic at the
//! per-SM share of the global bandwidth. The standalone [`t_prism`] assumes
//! every SM is streaming; inside [`t_alg`] a wavefront whose `⌈w/k⌉` tile
//! groups do not fill its rounds shares the bandwidth among the mean number of
//! busy SMs, `⌈w/k⌉ / rounds`, which equals `n_SM` when the wavefront divides
//! evenly. Without that, adding SMs could slow a bandwidth-bound wavefront down.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{schedule, WavefrontSchedule};
use crate::memory::{feasible, tile_traffic};
use crate::model::{ArchConfig, CalibrationSet, StencilKernel, Strategy, TileConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrismTime {
    pub t_compute: f64,
    pub t_transfer: f64,
    pub t_prism: f64,
    /// Ties count as compute-bound.
    pub compute_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeBreakdown {
    pub t_alg: f64,
    pub t_ideal: f64,
    pub t_overhead: f64,
    pub t_sync_total: f64,
    /// `Σ prism_i · rounds_i`; `t_alg = t_sync_total + t_prism_total`.
    pub t_prism_total: f64,
    pub t_compute_total: f64,
    pub t_transfer_total: f64,
    /// Prism time at full SM occupancy.
    pub t_prism: f64,
    pub compute_bound: bool,
    pub gflops: f64,
    pub n_w: u64,
    pub total_points_enumerated: u64,
}

/// Per-wavefront terms of `T_alg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavefrontTime {
    pub tiles: u64,
    pub rounds: u64,
    pub t_transfer: f64,
    pub t_prism: f64,
}

pub fn t_ideal(kernel: &StencilKernel, arch: &ArchConfig, calib: &CalibrationSet) -> f64 {
    kernel.iteration_points() as f64 * calib.c_iter_for(kernel) / (arch.n_sm * arch.n_v) as f64
}

fn compute_time(
    volume: u64,
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    k: u64,
) -> f64 {
    volume as f64 * calib.c_iter_for(kernel) * k as f64 / arch.n_v as f64
}

fn ensure_feasible(kernel: &StencilKernel, arch: &ArchConfig, tile: &TileConfig) -> Result<()> {
    let report = feasible(kernel, arch, tile);
    if report.feasible {
        Ok(())
    } else {
        Err(Error::Infeasible(format!(
            "footprint {} B (k·fp {} B) violates {:?} on m_sm = {} B",
            report.bytes_per_tile, report.bytes_with_k, report.binding_constraint, arch.m_sm
        )))
    }
}

fn prism_from(t_compute: f64, t_transfer: f64) -> PrismTime {
    PrismTime {
        t_compute,
        t_transfer,
        t_prism: t_compute.max(t_transfer),
        compute_bound: t_compute >= t_transfer,
    }
}

pub fn t_prism(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<PrismTime> {
    let sched = schedule(kernel, tile)?;
    ensure_feasible(kernel, arch, tile)?;
    Ok(prism_at_share(
        kernel,
        arch,
        calib,
        tile,
        &sched,
        arch.n_sm as f64,
    ))
}

fn prism_at_share(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
    sched: &WavefrontSchedule,
    sharing_sms: f64,
) -> PrismTime {
    let t_compute = compute_time(sched.tile_volume, kernel, arch, calib, tile.k);
    let t_transfer = tile_traffic(kernel, tile) as f64 * sharing_sms / arch.bw_global;
    prism_from(t_compute, t_transfer)
}

/// Per-wavefront rounds and prism times.
pub fn wavefront_times(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
    sched: &WavefrontSchedule,
) -> Vec<WavefrontTime> {
    sched
        .tiles_per_wavefront
        .iter()
        .map(|&w| {
            let groups = w.div_ceil(tile.k);
            let rounds = groups.div_ceil(arch.n_sm);
            let busy = groups as f64 / rounds as f64;
            let p = prism_at_share(kernel, arch, calib, tile, sched, busy);
            WavefrontTime {
                tiles: w,
                rounds,
                t_transfer: p.t_transfer,
                t_prism: p.t_prism,
            }
        })
        .collect()
}

pub fn t_alg(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<TimeBreakdown> {
    let sched = schedule(kernel, tile)?;
    ensure_feasible(kernel, arch, tile)?;
    Ok(t_alg_scheduled(kernel, arch, calib, tile, &sched))
}

/// [`t_alg`] for a tile already known to be feasible.
pub(crate) fn t_alg_scheduled(
    kernel: &StencilKernel,
    arch: &ArchConfig,
    calib: &CalibrationSet,
    tile: &TileConfig,
    sched: &WavefrontSchedule,
) -> TimeBreakdown {
    let full = prism_at_share(kernel, arch, calib, tile, sched, arch.n_sm as f64);
    let mut t_alg = 0.0;
    let mut t_prism_total = 0.0;
    let mut t_compute_total = 0.0;
    let mut t_transfer_total = 0.0;
    for wf in wavefront_times(kernel, arch, calib, tile, sched) {
        let rounds = wf.rounds as f64;
        t_alg += calib.t_sync + wf.t_prism * rounds;
        t_prism_total += wf.t_prism * rounds;
        t_compute_total += full.t_compute * rounds;
        t_transfer_total += wf.t_transfer * rounds;
    }
    let t_ideal = t_ideal(kernel, arch, calib);
    TimeBreakdown {
        t_alg,
        t_ideal,
        t_overhead: t_alg - t_ideal,
        t_sync_total: sched.n_w as f64 * calib.t_sync,
        t_prism_total,
        t_compute_total,
        t_transfer_total,
        t_prism: full.t_prism,
        compute_bound: full.compute_bound,
        gflops: kernel.total_ops() as f64 / t_alg,
        n_w: sched.n_w,
        total_points_enumerated: sched.total_points_enumerated,
    }
}

/// Closed-form overhead `C_iter · S1 · T / (t_s1 + t_t/2)` of a compute-bound
/// hexagonal tiling; only its ranking is meaningful.
pub fn overhead_closed_form(
    kernel: &StencilKernel,
    calib: &CalibrationSet,
    tile: &TileConfig,
) -> Result<f64> {
    if tile.strategy != Strategy::HexHybrid {
        return Err(Error::Domain(
            "closed-form overhead is defined for hex_hybrid tilings only".into(),
        ));
    }
    Ok(calib.c_iter_for(kernel) * kernel.s1() as f64 * kernel.time_steps as f64 / hex_face(tile))
}

/// `t_s1 + t_t/2`, the mean width of the hexagonal face.
pub fn hex_face(tile: &TileConfig) -> f64 {
    tile.t_s1 as f64 + tile.t_t as f64 / 2.0
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use crate::model::KIB;

    #[test]
    fn ideal_time() {
        let unit = StencilKernel {
            sizes: vec![1, 1],
            time_steps: 1,
            stencil_order: 0,
            ..toy_kernel()
        };
        assert_eq!(
            t_ideal(
                &unit,
                &ArchConfig {
                    n_v: 1,
                    ..toy_arch(1)
                },
                &toy_calib(0.0)
            ),
            1.0
        );

        let jacobi = StencilKernel {
            sizes: vec![1024, 1024],
            time_steps: 64,
            ..toy_kernel()
        };
        let arch = ArchConfig {
            n_sm: 16,
            n_v: 128,
            ..toy_arch(16)
        };
        let calib = CalibrationSet::timing(2.0, 0.0);
        assert_eq!(t_ideal(&jacobi, &arch, &calib), 65_536.0);
        let doubled = ArchConfig { n_sm: 32, ..arch };
        assert_eq!(t_ideal(&jacobi, &doubled, &calib), 32_768.0);
    }

    #[test]
    fn toy_prism() {
        let p = t_prism(&toy_kernel(), &toy_arch(2), &toy_calib(100.0), &toy_tile()).unwrap();
        assert_eq!(p.t_prism, 20.0);
        assert_eq!(p.t_compute, 20.0);
        assert_eq!(p.t_transfer, 0.0);
        assert!(p.compute_bound);
    }

    #[test]
    fn tie_is_compute_bound() {
        // traffic 512 B · 2 SMs / bw = 20 ns  →  bw = 51.2 B/ns
        let arch = ArchConfig {
            bw_global: 51.2,
            ..toy_arch(2)
        };
        let p = t_prism(&toy_kernel(), &arch, &toy_calib(0.0), &toy_tile()).unwrap();
        assert_eq!(p.t_transfer, 20.0);
        assert!(p.compute_bound);
    }

    #[test]
    fn toy_t_alg() {
        let tb = t_alg(&toy_kernel(), &toy_arch(2), &toy_calib(100.0), &toy_tile()).unwrap();
        assert_eq!(tb.t_alg, 420.0);
        assert_eq!(tb.t_ideal, 64.0);
        assert_eq!(tb.t_overhead, 356.0);
        assert_eq!(tb.t_sync_total, 300.0);
        assert_eq!(tb.t_sync_total + tb.t_prism_total, tb.t_alg);
        assert_eq!(tb.gflops * tb.t_alg, 512.0);

        let tb = t_alg(&toy_kernel(), &toy_arch(4), &toy_calib(0.0), &toy_tile()).unwrap();
        assert_eq!(tb.t_alg, 60.0);
    }

    #[test]
    fn infeasible_tile_is_rejected() {
        let arch = ArchConfig {
            m_sm: KIB,
            ..toy_arch(2)
        };
        let err = t_alg(
            &toy_kernel(),
            &arch,
            &toy_calib(0.0),
            &TileConfig::hex(64, 8, 8, 1),
        );
        assert!(matches!(err, Err(Error::Infeasible(_))));
    }

    #[test]
    fn closed_form() {
        let v = overhead_closed_form(&toy_kernel(), &toy_calib(0.0), &toy_tile()).unwrap();
        assert!((v - 12.8).abs() < 1e-12);
        assert!(matches!(
            overhead_closed_form(
                &toy_kernel(),
                &toy_calib(0.0),
                &TileConfig::rect(4, 2, 8, 1)
            ),
            Err(Error::Domain(_))
        ));
    }
}
