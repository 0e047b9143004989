//! Concrete tiling geometry: wavefront schedules, the point-to-tile map and
//! a brute-force dependence checker.
//!
//! # Hexagonal hybrid tiling
//!
//! In the `(t, s1)` plane the iteration space is tessellated with slope-±1
//! hexagons of height `t_t` (even). Every hexagon owns a column `c` whose
//! narrow rows start at `c·m` with `m = t_s1 + t_t/2`. Row `σ` of a tile
//! (counted from its bottom) spans
//!
//! ```text
//! [c·m − e, c·m + t_s1 + e],   e = σ        for σ <  t_t/2
//!                              e = t_t−1−σ  for σ >= t_t/2
//! ```
//!
//! Even columns start at times `j·t_t`, odd columns half a tile earlier at
//! `j·t_t − t_t/2`; both belong to wavefront `j`. Inside a wavefront the odd
//! (phase 0) tiles run before the even (phase 1) ones, since the even tile's
//! lower half leans on its odd neighbours. The schedule counts one
//! synchronization per wavefront, i.e. per phase pair.
//!
//! Remaining space dimensions use classic blocks of extent `t_s2`/`t_s3`,
//! skewed by `r·t` so that dependences inside one hexagon prism only point
//! to the same or a lower block.
//!
//! # Rectangular wavefront tiling
//!
//! Time skewing: tile `(bt, b1)` holds the points with `t / t_t = bt` and
//! `(s1 + r·t) / t_s1 = b1`; wavefront `bt + b1`. Inner dimensions are
//! blocked like the hexagonal case.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{StencilKernel, Strategy, TileConfig};

/// Largest iteration space the brute-force routines accept.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

/// Number of iteration points of one hexagon with narrow width `t_s1` and
/// height `t_t`.
pub fn points_per_hex(t_s1: u64, t_t: u64) -> Result<u64> {
    if t_t < 2 || t_t % 2 != 0 {
        return Err(Error::Domain(format!(
            "hexagon height must be even and at least 2, got {t_t}"
        )));
    }
    if t_s1 == 0 {
        return Err(Error::Domain("hexagon width must be at least 1".into()));
    }
    Ok(t_t * (t_s1 + t_t / 2))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WavefrontSchedule {
    pub n_w: u64,
    pub tiles_per_wavefront: Vec<u64>,
    /// Iteration points of one full tile.
    pub tile_volume: u64,
    /// Tiles counted at full volume, boundary tiles included.
    pub total_points_enumerated: u64,
}

impl WavefrontSchedule {
    pub fn tile_count(&self) -> u64 {
        self.tiles_per_wavefront.iter().sum()
    }
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Classic blocks across the non-leading space dimensions.
fn inner_block_count(kernel: &StencilKernel, tile: &TileConfig) -> u64 {
    let mut n = ceil_div(kernel.s2(), tile.t_s2);
    if let (Some(s3), Some(t3)) = (kernel.s3(), tile.t_s3) {
        n *= ceil_div(s3, t3);
    }
    n
}

fn inner_extent(tile: &TileConfig) -> u64 {
    tile.t_s2 * tile.t_s3.unwrap_or(1)
}

/// Hexagon columns that intersect `[0, S1)`.
pub fn hex_columns(s1: u64, t_s1: u64, t_t: u64) -> u64 {
    let half = t_t / 2;
    ceil_div(s1 + half - 1, t_s1 + half)
}

/// Occupied `b1` range `[lo, hi]` of rectangular time tile `bt`.
fn rect_block_range(kernel: &StencilKernel, tile: &TileConfig, bt: u64) -> (u64, u64) {
    let r = kernel.stencil_order;
    let t_lo = bt * tile.t_t;
    let t_hi = ((bt + 1) * tile.t_t).min(kernel.time_steps) - 1;
    let lo = r * t_lo / tile.t_s1;
    let hi = (kernel.s1() - 1 + r * t_hi) / tile.t_s1;
    (lo, hi)
}

pub fn schedule(kernel: &StencilKernel, tile: &TileConfig) -> Result<WavefrontSchedule> {
    tile.validate()?;
    tile.check_dims(kernel)?;
    let inner = inner_block_count(kernel, tile);
    let (tiles_per_wavefront, tile_volume) = match tile.strategy {
        Strategy::HexHybrid => {
            let n_w = ceil_div(kernel.time_steps, tile.t_t) + 1;
            let w = hex_columns(kernel.s1(), tile.t_s1, tile.t_t) * inner;
            let volume = points_per_hex(tile.t_s1, tile.t_t)? * inner_extent(tile);
            (vec![w; n_w as usize], volume)
        }
        Strategy::RectWavefront => {
            let c_t = ceil_div(kernel.time_steps, tile.t_t);
            let mut diagonals: Vec<u64> = Vec::new();
            for bt in 0..c_t {
                let (lo, hi) = rect_block_range(kernel, tile, bt);
                for b1 in lo..=hi {
                    let d = (bt + b1) as usize;
                    if diagonals.len() <= d {
                        diagonals.resize(d + 1, 0);
                    }
                    diagonals[d] += inner;
                }
            }
            let volume = tile.t_t * tile.t_s1 * inner_extent(tile);
            (diagonals, volume)
        }
    };
    debug_assert!(tiles_per_wavefront.iter().all(|&w| w > 0));
    let total = tiles_per_wavefront.iter().sum::<u64>() * tile_volume;
    Ok(WavefrontSchedule {
        n_w: tiles_per_wavefront.len() as u64,
        tiles_per_wavefront,
        tile_volume,
        total_points_enumerated: total,
    })
}

/// Identity of one tile plus its position in the execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TileId {
    pub wavefront: u64,
    /// Sub-step inside the wavefront (hexagonal tiling only; 0 otherwise).
    pub phase: u8,
    /// Hexagon column, or the skewed `s1` block for rectangular tiles.
    pub column: i64,
    /// Skewed blocks along `s2` and `s3` (0 when absent).
    pub inner: [i64; 2],
}

impl TileId {
    /// Tiles with equal keys run concurrently; smaller keys run earlier.
    pub fn exec_key(&self) -> (u64, u8, i64, i64) {
        (self.wavefront, self.phase, self.inner[0], self.inner[1])
    }
}

fn check_point(point: &[u64], kernel: &StencilKernel) -> Result<()> {
    if point.len() != kernel.space_dims() + 1 {
        return Err(Error::Domain(format!(
            "point has {} coordinates, expected {}",
            point.len(),
            kernel.space_dims() + 1
        )));
    }
    let inside =
        point[0] < kernel.time_steps && point[1..].iter().zip(&kernel.sizes).all(|(p, s)| p < s);
    if !inside {
        return Err(Error::Domain(format!(
            "point {point:?} is outside the iteration space"
        )));
    }
    Ok(())
}

/// Maps an iteration point `(t, s1, s2[, s3])` to its tile.
pub fn assign_tile(point: &[u64], tile: &TileConfig, kernel: &StencilKernel) -> Result<TileId> {
    tile.validate()?;
    tile.check_dims(kernel)?;
    check_point(point, kernel)?;
    Ok(assign_unchecked(point, tile, kernel.stencil_order))
}

fn skewed_block(s: u64, t: u64, r: u64, extent: u64) -> i64 {
    ((s + r * t) / extent) as i64
}

fn assign_unchecked(point: &[u64], tile: &TileConfig, r: u64) -> TileId {
    let t = point[0];
    let inner = [
        skewed_block(point[2], t, r, tile.t_s2),
        match (point.get(3), tile.t_s3) {
            (Some(&s3), Some(t3)) => skewed_block(s3, t, r, t3),
            _ => 0,
        },
    ];
    match tile.strategy {
        Strategy::HexHybrid => {
            let (wavefront, phase, column) = hex_cell(t as i64, point[1] as i64, tile);
            TileId {
                wavefront,
                phase,
                column,
                inner,
            }
        }
        Strategy::RectWavefront => {
            let bt = t / tile.t_t;
            let b1 = (point[1] + r * t) / tile.t_s1;
            TileId {
                wavefront: bt + b1,
                phase: 0,
                column: b1 as i64,
                inner,
            }
        }
    }
}

/// Finds the hexagon owning `(t, x)`; returns (wavefront, phase, column).
fn hex_cell(t: i64, x: i64, tile: &TileConfig) -> (u64, u8, i64) {
    let t_t = tile.t_t as i64;
    let half = t_t / 2;
    let t_s1 = tile.t_s1 as i64;
    let m = t_s1 + half;
    let guess = x.div_euclid(m);
    for c in [guess - 1, guess, guess + 1] {
        let odd = c.rem_euclid(2) == 1;
        let (j, t0) = if odd {
            let j = (t + half).div_euclid(t_t);
            (j, j * t_t - half)
        } else {
            let j = t.div_euclid(t_t);
            (j, j * t_t)
        };
        let row = t - t0;
        let e = if row < half { row } else { t_t - 1 - row };
        if c * m - e <= x && x <= c * m + t_s1 + e {
            return (j as u64, if odd { 0 } else { 1 }, c);
        }
    }
    unreachable!("hexagonal tessellation left ({t}, {x}) uncovered")
}

/// Visits every iteration point in `(t, s1, s2[, s3])` row-major order.
fn for_each_point(kernel: &StencilKernel, mut f: impl FnMut(&[u64])) {
    let dims = kernel.space_dims();
    let mut p = vec![0u64; dims + 1];
    let extents: Vec<u64> = std::iter::once(kernel.time_steps)
        .chain(kernel.sizes.iter().copied())
        .collect();
    loop {
        f(&p);
        let mut axis = dims;
        loop {
            p[axis] += 1;
            if p[axis] < extents[axis] {
                break;
            }
            p[axis] = 0;
            if axis == 0 {
                return;
            }
            axis -= 1;
        }
    }
}

fn check_brute_force_size(kernel: &StencilKernel) -> Result<()> {
    let points = kernel.iteration_points();
    if points > BRUTE_FORCE_LIMIT {
        return Err(Error::Size {
            points,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    Ok(())
}

/// Brute-force point count of every tile touched by the iteration space.
pub fn tile_point_counts(
    kernel: &StencilKernel,
    tile: &TileConfig,
) -> Result<BTreeMap<TileId, u64>> {
    tile.validate()?;
    tile.check_dims(kernel)?;
    check_brute_force_size(kernel)?;
    let mut counts = BTreeMap::new();
    for_each_point(kernel, |p| {
        *counts
            .entry(assign_unchecked(p, tile, kernel.stencil_order))
            .or_insert(0) += 1;
    });
    Ok(counts)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub point: Vec<u64>,
    pub source: Vec<u64>,
    pub point_tile: TileId,
    pub source_tile: TileId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LegalityReport {
    pub dependences_checked: u64,
    pub violation_count: u64,
    /// The first few violations in iteration order.
    pub violations: Vec<Violation>,
}

impl LegalityReport {
    pub const MAX_LISTED: usize = 64;

    pub fn is_legal(&self) -> bool {
        self.violation_count == 0
    }
}

/// Checks every dependence `(t−1, s+δ) → (t, s)` with `|δ_i| ≤ r` against the
/// tile map: the source must lie in the same tile or in one that executes
/// strictly earlier.
pub fn check_legality(kernel: &StencilKernel, tile: &TileConfig) -> Result<LegalityReport> {
    tile.validate()?;
    tile.check_dims(kernel)?;
    check_brute_force_size(kernel)?;
    let r = kernel.stencil_order;
    let dims = kernel.space_dims();

    // Tile ids of one time step are reused as the sources of the next.
    let plane = kernel.grid_points() as usize;
    let index = |s: &[u64]| -> usize {
        s.iter()
            .zip(&kernel.sizes)
            .fold(0u64, |acc, (&x, &n)| acc * n + x) as usize
    };
    let mut previous: Vec<TileId> = Vec::with_capacity(plane);
    let mut current: Vec<TileId> = Vec::with_capacity(plane);
    let offsets = box_offsets(dims, r as i64);

    let mut report = LegalityReport {
        dependences_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
    };
    let mut src = vec![0u64; dims];
    let mut point = vec![0u64; dims + 1];
    let grid = StencilKernel {
        time_steps: 1,
        ..kernel.clone()
    };
    for t in 0..kernel.time_steps {
        current.clear();
        for_each_point(&grid, |p| {
            point[0] = t;
            point[1..].copy_from_slice(&p[1..]);
            current.push(assign_unchecked(&point, tile, r));
        });
        if t > 0 {
            for_each_point(&grid, |p| {
                let s = &p[1..];
                let here = current[index(s)];
                for off in &offsets {
                    let mut inside = true;
                    for d in 0..dims {
                        let v = s[d] as i64 + off[d];
                        if v < 0 || v >= kernel.sizes[d] as i64 {
                            inside = false;
                            break;
                        }
                        src[d] = v as u64;
                    }
                    if !inside {
                        continue;
                    }
                    report.dependences_checked += 1;
                    let there = previous[index(&src)];
                    if there != here && there.exec_key() >= here.exec_key() {
                        report.violation_count += 1;
                        if report.violations.len() < LegalityReport::MAX_LISTED {
                            let mut pt = vec![t];
                            pt.extend_from_slice(s);
                            let mut sp = vec![t - 1];
                            sp.extend_from_slice(&src);
                            report.violations.push(Violation {
                                point: pt,
                                source: sp,
                                point_tile: here,
                                source_tile: there,
                            });
                        }
                    }
                }
            });
        }
        std::mem::swap(&mut previous, &mut current);
    }
    Ok(report)
}

fn box_offsets(dims: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dims {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-r..=r).map(move |d| {
                    let mut w = v.clone();
                    w.push(d);
                    w
                })
            })
            .collect();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(r: u64) -> StencilKernel {
        StencilKernel {
            name: "toy".into(),
            sizes: vec![16, 8],
            time_steps: 4,
            stencil_order: r,
            ops_per_point: 1,
            bytes_per_element: 4,
            live_buffers: 2,
        }
    }

    #[test]
    fn hex_sizes() {
        assert_eq!(points_per_hex(32, 8).unwrap(), 288);
        assert_eq!(points_per_hex(1, 2).unwrap(), 4);
        assert_eq!(points_per_hex(4, 2).unwrap(), 10);
        assert!(points_per_hex(4, 3).is_err());
        assert!(points_per_hex(4, 0).is_err());
    }

    #[test]
    fn toy_hex_schedule() {
        let s = schedule(&toy(1), &TileConfig::hex(4, 2, 8, 1)).unwrap();
        assert_eq!(s.n_w, 3);
        assert_eq!(s.tiles_per_wavefront, vec![4, 4, 4]);
        assert_eq!(s.tile_volume, 80);
        assert_eq!(s.total_points_enumerated, 960);
    }

    #[test]
    fn whole_domain_hex_tile() {
        let k = toy(1);
        let s = schedule(&k, &TileConfig::hex(16, 4, 8, 1)).unwrap();
        assert!(s.n_w <= 2);
        assert!(s.tiles_per_wavefront.iter().all(|&w| w >= 1));
    }

    #[test]
    fn rect_diagonals() {
        // r = 0 needs no skew, so the tile grid is exactly c_t x c_1 = 2 x 3.
        let k = StencilKernel {
            sizes: vec![12, 8],
            ..toy(0)
        };
        let s = schedule(&k, &TileConfig::rect(4, 2, 8, 1)).unwrap();
        assert_eq!(s.n_w, 4);
        assert_eq!(s.tiles_per_wavefront, vec![1, 2, 2, 1]);
    }

    #[test]
    fn dimension_mismatch_is_domain_error() {
        let tile = TileConfig::hex(4, 2, 8, 1).with_t_s3(2);
        assert!(matches!(schedule(&toy(1), &tile), Err(Error::Domain(_))));
    }

    #[test]
    fn origin_is_in_first_wavefront() {
        let id = assign_tile(&[0, 0, 0], &TileConfig::hex(4, 2, 8, 1), &toy(1)).unwrap();
        assert_eq!(id.wavefront, 0);
        assert_eq!(id.inner, [0, 0]);
        assert!(assign_tile(&[4, 0, 0], &TileConfig::hex(4, 2, 8, 1), &toy(1)).is_err());
    }

    #[test]
    fn toy_partition_counts() {
        let counts = tile_point_counts(&toy(1), &TileConfig::hex(4, 2, 8, 1)).unwrap();
        assert_eq!(counts.values().sum::<u64>(), 512);
        assert!(counts.values().all(|&c| c <= 80));
        assert!(counts.keys().all(|id| id.wavefront < 3));
    }

    #[test]
    fn toy_is_legal_for_first_order() {
        let report = check_legality(&toy(1), &TileConfig::hex(4, 2, 8, 1)).unwrap();
        assert!(report.is_legal(), "{:?}", report.violations.first());
        assert!(report.dependences_checked > 0);
    }

    #[test]
    fn second_order_breaks_slope_one_hexagons() {
        let k = StencilKernel {
            sizes: vec![16, 8],
            ..toy(2)
        };
        // With t_t = 2 the hexagons degenerate into staggered bricks, which stay
        // legal for r = 2; sloped sides only appear from t_t = 4 on.
        let bricks = check_legality(&k, &TileConfig::hex(4, 2, 8, 1)).unwrap();
        assert!(bricks.is_legal());
        let report = check_legality(&k, &TileConfig::hex(4, 4, 8, 1)).unwrap();
        assert!(report.violation_count > 0);
        assert!(!report.violations.is_empty());
    }

    #[test]
    fn skewed_rect_is_legal() {
        let report = check_legality(&toy(1), &TileConfig::rect(4, 2, 4, 1)).unwrap();
        assert!(report.is_legal());
    }

    #[test]
    fn oversized_space_is_refused() {
        let k = StencilKernel {
            sizes: vec![1024, 1024],
            ..toy(1)
        };
        assert!(matches!(
            check_legality(&k, &TileConfig::hex(4, 2, 8, 1)),
            Err(Error::Size { .. })
        ));
    }
}
