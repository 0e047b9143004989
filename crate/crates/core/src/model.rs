//! Domain values shared by every model: the stencil program, the accelerator,
//! the tiling instance and the calibration constants.
//!
//! All of these are plain data with public fields. Values that come from
//! configuration files always pass through `validate` before they are handed
//! out (see [`crate::config`]); code that builds them by hand is expected to
//! call it too.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WARP_WIDTH: u64 = 32;
pub const KIB: u64 = 1024;

/// Shape of a stencil program: grid extents, time steps and per-point work.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StencilKernel {
    pub name: String,
    /// Space extents `S1, S2[, S3]` in grid points.
    pub sizes: Vec<u64>,
    pub time_steps: u64,
    /// Halo width `r` in points.
    pub stencil_order: u64,
    pub ops_per_point: u64,
    pub bytes_per_element: u64,
    /// Concurrently resident copies of the grid (2 for double buffering).
    pub live_buffers: u64,
}

impl StencilKernel {
    pub fn space_dims(&self) -> usize {
        self.sizes.len()
    }

    pub fn s1(&self) -> u64 {
        self.sizes[0]
    }

    pub fn s2(&self) -> u64 {
        self.sizes[1]
    }

    pub fn s3(&self) -> Option<u64> {
        self.sizes.get(2).copied()
    }

    /// Grid points of one time step.
    pub fn grid_points(&self) -> u64 {
        self.sizes.iter().product()
    }

    /// Points of the full `(t, s1, s2[, s3])` iteration space.
    pub fn iteration_points(&self) -> u64 {
        self.grid_points() * self.time_steps
    }

    /// Floating-point operations of the whole run.
    pub fn total_ops(&self) -> u64 {
        self.iteration_points() * self.ops_per_point
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if !(2..=3).contains(&self.sizes.len()) {
            return Err(Error::validation("space_dims", "must be 2 or 3"));
        }
        if self.sizes.iter().any(|&s| s == 0) {
            return Err(Error::validation("sizes", "every size must be at least 1"));
        }
        if self.time_steps == 0 {
            return Err(Error::validation("time_steps", "must be at least 1"));
        }
        if self.ops_per_point == 0 {
            return Err(Error::validation("ops_per_point", "must be at least 1"));
        }
        if !matches!(self.bytes_per_element, 4 | 8) {
            return Err(Error::validation("bytes_per_element", "must be 4 or 8"));
        }
        if self.live_buffers == 0 {
            return Err(Error::validation("live_buffers", "must be at least 1"));
        }
        let halo = 2 * self.stencil_order;
        if self.sizes.iter().any(|&s| s <= halo) {
            return Err(Error::validation("sizes", "sizes must exceed 2·r"));
        }
        Ok(())
    }
}

/// One accelerator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub n_sm: u64,
    /// Vector lanes per SM.
    pub n_v: u64,
    /// Shared memory per SM in bytes.
    pub m_sm: u64,
    /// Aggregate global-memory bandwidth in bytes per nanosecond (== GB/s).
    pub bw_global: f64,
    pub l2_bytes: u64,
    pub mem_ctrl_count: u64,
}

impl ArchConfig {
    pub fn m_sm_kib(&self) -> f64 {
        self.m_sm as f64 / KIB as f64
    }

    pub fn l2_kib(&self) -> f64 {
        self.l2_bytes as f64 / KIB as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sm == 0 {
            return Err(Error::validation("n_sm", "must be at least 1"));
        }
        if self.n_v == 0 || self.n_v % WARP_WIDTH != 0 {
            return Err(Error::validation("n_v", "n_v must be multiple of 32"));
        }
        if self.m_sm == 0 || self.m_sm % KIB != 0 {
            return Err(Error::validation(
                "m_sm",
                "must be a positive multiple of 1024 bytes",
            ));
        }
        if !(self.bw_global > 0.0) {
            return Err(Error::validation("bw_global", "must be positive"));
        }
        if self.mem_ctrl_count == 0 {
            return Err(Error::validation("mem_ctrl_count", "must be at least 1"));
        }
        Ok(())
    }

    /// Canonical ordering key used for deterministic tie-breaks.
    pub fn sort_key(&self) -> (u64, u64, u64, u64, u64, u64) {
        (
            self.n_sm,
            self.n_v,
            self.m_sm,
            self.l2_bytes,
            self.mem_ctrl_count,
            self.bw_global.to_bits(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Hexagonal tiles in `(t, s1)`, classic tiles in the remaining dimensions.
    HexHybrid,
    /// Skewed rectangular tiles executed along diagonal wavefronts.
    RectWavefront,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::HexHybrid => "hex_hybrid",
            Strategy::RectWavefront => "rect_wavefront",
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A tiling instance: strategy, tile extents and hyperthreading factor `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileConfig {
    pub strategy: Strategy,
    pub t_s1: u64,
    pub t_s2: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_s3: Option<u64>,
    pub t_t: u64,
    /// Tiles resident on one SM at the same time.
    pub k: u64,
}

pub type TileKey = (Strategy, u64, u64, u64, u64, u64);

impl TileConfig {
    pub fn hex(t_s1: u64, t_t: u64, t_s2: u64, k: u64) -> Self {
        TileConfig {
            strategy: Strategy::HexHybrid,
            t_s1,
            t_s2,
            t_s3: None,
            t_t,
            k,
        }
    }

    pub fn rect(t_s1: u64, t_t: u64, t_s2: u64, k: u64) -> Self {
        TileConfig {
            strategy: Strategy::RectWavefront,
            ..Self::hex(t_s1, t_t, t_s2, k)
        }
    }

    pub fn with_t_s3(mut self, t_s3: u64) -> Self {
        self.t_s3 = Some(t_s3);
        self
    }

    pub fn with_k(mut self, k: u64) -> Self {
        self.k = k;
        self
    }

    /// Lexicographic tie-break key `(strategy, t_t, t_s1, t_s2, t_s3, k)`.
    pub fn sort_key(&self) -> TileKey {
        (
            self.strategy,
            self.t_t,
            self.t_s1,
            self.t_s2,
            self.t_s3.unwrap_or(0),
            self.k,
        )
    }

    /// Space tile extents in dimension order.
    pub fn space_extents(&self) -> Vec<u64> {
        let mut v = vec![self.t_s1, self.t_s2];
        v.extend(self.t_s3);
        v
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("t_s1", self.t_s1), ("t_s2", self.t_s2), ("t_t", self.t_t)] {
            if v == 0 {
                return Err(Error::validation(field, "tile extents must be at least 1"));
            }
        }
        if self.t_s3 == Some(0) {
            return Err(Error::validation("t_s3", "tile extents must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::validation("k", "must be at least 1"));
        }
        if self.strategy == Strategy::HexHybrid && self.t_t % 2 != 0 {
            return Err(Error::validation("t_t", "hex_hybrid requires an even t_t"));
        }
        Ok(())
    }

    /// Checks the tile against the kernel's dimensionality.
    pub fn check_dims(&self, kernel: &StencilKernel) -> Result<()> {
        match (kernel.space_dims(), self.t_s3) {
            (2, None) | (3, Some(_)) => Ok(()),
            (d, _) => Err(Error::Domain(format!(
                "tile has {} space extents but kernel `{}` is {}D",
                self.space_extents().len(),
                kernel.name,
                d
            ))),
        }
    }
}

/// Parametric silicon-area coefficients (mm², mm² per unit).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaCoeffs {
    pub a_fixed: f64,
    pub a_sm_fixed: f64,
    pub a_lane: f64,
    pub a_shmem_kib: f64,
    pub a_l2_kib: f64,
    pub a_mc: f64,
}

impl AreaCoeffs {
    pub const NAMES: [&'static str; 6] = [
        "a_fixed",
        "a_sm_fixed",
        "a_lane",
        "a_shmem_kib",
        "a_l2_kib",
        "a_mc",
    ];

    pub fn to_array(&self) -> [f64; 6] {
        [
            self.a_fixed,
            self.a_sm_fixed,
            self.a_lane,
            self.a_shmem_kib,
            self.a_l2_kib,
            self.a_mc,
        ]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        AreaCoeffs {
            a_fixed: a[0],
            a_sm_fixed: a[1],
            a_lane: a[2],
            a_shmem_kib: a[3],
            a_l2_kib: a[4],
            a_mc: a[5],
        }
    }

    /// Index of a coefficient in [`Self::NAMES`]; accepts the short aliases
    /// `a_shmem` and `a_l2` as well.
    pub fn index_of(name: &str) -> Option<usize> {
        match name {
            "a_shmem" => Some(3),
            "a_l2" => Some(4),
            _ => Self::NAMES.iter().position(|&n| n == name),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in Self::NAMES.iter().zip(self.to_array()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(
                    format!("area_coeffs.{name}"),
                    "must be finite and non-negative",
                ));
            }
        }
        if self.a_fixed + self.a_sm_fixed + self.a_lane <= 0.0 {
            return Err(Error::validation(
                "area_coeffs",
                "a_fixed + a_sm_fixed + a_lane must be positive",
            ));
        }
        Ok(())
    }
}

/// Machine/model constants obtained from micro-benchmarks.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    /// Nanoseconds for one loop-body iteration per vector lane, data in shared memory.
    pub c_iter: f64,
    /// Per-kernel overrides of `c_iter`, keyed by kernel name.
    pub c_iter_per_kernel: BTreeMap<String, f64>,
    /// Nanoseconds per wavefront synchronization.
    pub t_sync: f64,
    pub e_op_pj: f64,
    pub e_glob_pj_per_byte: f64,
    pub e_sh_pj_per_byte: f64,
    pub p_static_w: f64,
    pub area_coeffs: AreaCoeffs,
}

impl CalibrationSet {
    /// Calibration with only `c_iter` and `t_sync` set; everything else zero.
    pub fn timing(c_iter: f64, t_sync: f64) -> Self {
        CalibrationSet {
            c_iter,
            c_iter_per_kernel: BTreeMap::new(),
            t_sync,
            e_op_pj: 0.0,
            e_glob_pj_per_byte: 0.0,
            e_sh_pj_per_byte: 0.0,
            p_static_w: 0.0,
            area_coeffs: AreaCoeffs {
                a_fixed: 1.0,
                ..AreaCoeffs::default()
            },
        }
    }

    pub fn c_iter_for(&self, kernel: &StencilKernel) -> f64 {
        self.c_iter_per_kernel
            .get(&kernel.name)
            .copied()
            .unwrap_or(self.c_iter)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_iter > 0.0 && self.c_iter.is_finite()) {
            return Err(Error::validation("c_iter", "must be positive"));
        }
        for (name, &v) in &self.c_iter_per_kernel {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(
                    format!("c_iter_ns_per_kernel.{name}"),
                    "must be positive",
                ));
            }
        }
        for (field, v) in [
            ("t_sync", self.t_sync),
            ("e_op", self.e_op_pj),
            ("e_glob", self.e_glob_pj_per_byte),
            ("e_sh", self.e_sh_pj_per_byte),
            ("p_static", self.p_static_w),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::validation(field, "must be finite and non-negative"));
            }
        }
        self.area_coeffs.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadEntry {
    pub kernel: StencilKernel,
    pub weight: f64,
}

/// Weighted set of kernels; weights sum to one once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSuite {
    pub entries: Vec<WorkloadEntry>,
}

impl WorkloadSuite {
    /// Validates every kernel and normalizes the weights.
    pub fn new(entries: Vec<(StencilKernel, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("suite", "needs at least one entry"));
        }
        for (kernel, weight) in &entries {
            kernel.validate()?;
            if !(*weight > 0.0 && weight.is_finite()) {
                return Err(Error::validation(
                    format!("suite.{}.weight", kernel.name),
                    "must be positive",
                ));
            }
        }
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        Ok(WorkloadSuite {
            entries: entries
                .into_iter()
                .map(|(kernel, weight)| WorkloadEntry {
                    kernel,
                    weight: weight / total,
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn jacobi2d() -> StencilKernel {
        StencilKernel {
            name: "jacobi2d".into(),
            sizes: vec![1024, 1024],
            time_steps: 64,
            stencil_order: 1,
            ops_per_point: 5,
            bytes_per_element: 4,
            live_buffers: 2,
        }
    }

    #[test]
    fn halo_must_fit_in_grid() {
        let k = StencilKernel {
            sizes: vec![1, 16],
            ..jacobi2d()
        };
        let err = k.validate().unwrap_err();
        assert_eq!(err, Error::validation("sizes", "sizes must exceed 2·r"));
    }

    #[test]
    fn lanes_must_be_warp_multiples() {
        let arch = ArchConfig {
            n_sm: 16,
            n_v: 100,
            m_sm: 96 * KIB,
            bw_global: 224.0,
            l2_bytes: 0,
            mem_ctrl_count: 4,
        };
        match arch.validate() {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "n_v");
                assert_eq!(message, "n_v must be multiple of 32");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hex_tiles_need_even_time_extent() {
        assert!(TileConfig::hex(4, 3, 8, 1).validate().is_err());
        assert!(TileConfig::rect(4, 3, 8, 1).validate().is_ok());
        assert!(TileConfig::hex(4, 2, 8, 0).validate().is_err());
    }

    #[test]
    fn tile_dims_must_match_kernel() {
        let k = jacobi2d();
        assert!(TileConfig::hex(4, 2, 8, 1).check_dims(&k).is_ok());
        assert!(matches!(
            TileConfig::hex(4, 2, 8, 1).with_t_s3(4).check_dims(&k),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn suite_weights_are_normalized() {
        let h3d = StencilKernel {
            name: "heat3d".into(),
            sizes: vec![256, 256, 256],
            ..jacobi2d()
        };
        let suite = WorkloadSuite::new(vec![(jacobi2d(), 2.0), (h3d, 2.0)]).unwrap();
        let w: Vec<f64> = suite.entries.iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![0.5, 0.5]);
    }

    #[test]
    fn degenerate_die_is_rejected() {
        let c = AreaCoeffs {
            a_mc: 2.0,
            ..AreaCoeffs::default()
        };
        assert!(c.validate().is_err());
    }
}
