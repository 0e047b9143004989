//! JSON configuration files for kernels, architectures, calibrations,
//! workload suites and tiles.
//!
//! Each file format has its own serde struct mirroring the on-disk keys; the
//! in-memory types use internal units (bytes, nanoseconds) and are only
//! produced after validation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ArchConfig, AreaCoeffs, CalibrationSet, StencilKernel, TileConfig, WorkloadSuite, KIB,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub name: String,
    pub space_dims: u64,
    pub sizes: Vec<u64>,
    pub time_steps: u64,
    pub stencil_order: u64,
    pub ops_per_point: u64,
    pub bytes_per_element: u64,
    pub live_buffers: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchFile {
    pub n_sm: u64,
    pub n_v: u64,
    pub m_sm_kib: u64,
    pub bw_global_gb_s: f64,
    #[serde(default)]
    pub l2_kib: u64,
    #[serde(default = "one")]
    pub mem_ctrl_count: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub c_iter_ns: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub c_iter_ns_per_kernel: BTreeMap<String, f64>,
    pub t_sync_ns: f64,
    #[serde(default)]
    pub e_op_pj: f64,
    #[serde(default)]
    pub e_glob_pj_b: f64,
    #[serde(default)]
    pub e_sh_pj_b: f64,
    #[serde(default)]
    pub p_static_w: f64,
    pub area_coeffs: AreaCoeffs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntryFile {
    pub kernel: PathBuf,
    pub weight: f64,
}

impl From<&StencilKernel> for KernelFile {
    fn from(k: &StencilKernel) -> Self {
        KernelFile {
            name: k.name.clone(),
            space_dims: k.space_dims() as u64,
            sizes: k.sizes.clone(),
            time_steps: k.time_steps,
            stencil_order: k.stencil_order,
            ops_per_point: k.ops_per_point,
            bytes_per_element: k.bytes_per_element,
            live_buffers: k.live_buffers,
        }
    }
}

impl TryFrom<KernelFile> for StencilKernel {
    type Error = Error;

    fn try_from(f: KernelFile) -> Result<Self> {
        if f.space_dims as usize != f.sizes.len() {
            return Err(Error::validation(
                "space_dims",
                format!(
                    "says {} but sizes has {} entries",
                    f.space_dims,
                    f.sizes.len()
                ),
            ));
        }
        let k = StencilKernel {
            name: f.name,
            sizes: f.sizes,
            time_steps: f.time_steps,
            stencil_order: f.stencil_order,
            ops_per_point: f.ops_per_point,
            bytes_per_element: f.bytes_per_element,
            live_buffers: f.live_buffers,
        };
        k.validate()?;
        Ok(k)
    }
}

impl From<&ArchConfig> for ArchFile {
    fn from(a: &ArchConfig) -> Self {
        ArchFile {
            n_sm: a.n_sm,
            n_v: a.n_v,
            m_sm_kib: a.m_sm / KIB,
            bw_global_gb_s: a.bw_global,
            l2_kib: a.l2_bytes / KIB,
            mem_ctrl_count: a.mem_ctrl_count,
        }
    }
}

impl TryFrom<ArchFile> for ArchConfig {
    type Error = Error;

    fn try_from(f: ArchFile) -> Result<Self> {
        let a = ArchConfig {
            n_sm: f.n_sm,
            n_v: f.n_v,
            m_sm: f.m_sm_kib * KIB,
            bw_global: f.bw_global_gb_s,
            l2_bytes: f.l2_kib * KIB,
            mem_ctrl_count: f.mem_ctrl_count,
        };
        a.validate()?;
        Ok(a)
    }
}

impl From<&CalibrationSet> for CalibrationFile {
    fn from(c: &CalibrationSet) -> Self {
        CalibrationFile {
            c_iter_ns: c.c_iter,
            c_iter_ns_per_kernel: c.c_iter_per_kernel.clone(),
            t_sync_ns: c.t_sync,
            e_op_pj: c.e_op_pj,
            e_glob_pj_b: c.e_glob_pj_per_byte,
            e_sh_pj_b: c.e_sh_pj_per_byte,
            p_static_w: c.p_static_w,
            area_coeffs: c.area_coeffs,
        }
    }
}

impl TryFrom<CalibrationFile> for CalibrationSet {
    type Error = Error;

    fn try_from(f: CalibrationFile) -> Result<Self> {
        let c = CalibrationSet {
            c_iter: f.c_iter_ns,
            c_iter_per_kernel: f.c_iter_ns_per_kernel,
            t_sync: f.t_sync_ns,
            e_op_pj: f.e_op_pj,
            e_glob_pj_per_byte: f.e_glob_pj_b,
            e_sh_pj_per_byte: f.e_sh_pj_b,
            p_static_w: f.p_static_w,
            area_coeffs: f.area_coeffs,
        };
        c.validate()?;
        Ok(c)
    }
}

/// Serializes an architecture in its file layout (KiB, GB/s).
pub fn serialize_arch<S: serde::Serializer>(
    arch: &ArchConfig,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    ArchFile::from(arch).serialize(s)
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Parses JSON text; `origin` only labels the error.
pub fn parse_json<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    parse_json(&read_to_string(path)?, path)
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    // Serializing these plain structs cannot fail.
    serde_json::to_string_pretty(value).expect("serializable value")
}

pub fn kernel_from_str(text: &str) -> Result<StencilKernel> {
    parse_json::<KernelFile>(text, Path::new("<memory>"))?.try_into()
}

pub fn arch_from_str(text: &str) -> Result<ArchConfig> {
    parse_json::<ArchFile>(text, Path::new("<memory>"))?.try_into()
}

pub fn calibration_from_str(text: &str) -> Result<CalibrationSet> {
    parse_json::<CalibrationFile>(text, Path::new("<memory>"))?.try_into()
}

pub fn kernel_to_json(kernel: &StencilKernel) -> String {
    to_json_pretty(&KernelFile::from(kernel))
}

pub fn arch_to_json(arch: &ArchConfig) -> String {
    to_json_pretty(&ArchFile::from(arch))
}

pub fn calibration_to_json(calib: &CalibrationSet) -> String {
    to_json_pretty(&CalibrationFile::from(calib))
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<StencilKernel> {
    read_json::<KernelFile>(path.as_ref())?.try_into()
}

pub fn load_arch(path: impl AsRef<Path>) -> Result<ArchConfig> {
    read_json::<ArchFile>(path.as_ref())?.try_into()
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CalibrationSet> {
    read_json::<CalibrationFile>(path.as_ref())?.try_into()
}

pub fn load_tile(path: impl AsRef<Path>) -> Result<TileConfig> {
    let tile: TileConfig = read_json(path.as_ref())?;
    tile.validate()?;
    Ok(tile)
}

/// Reads a suite file; kernel paths are resolved relative to the suite file.
pub fn load_suite(path: impl AsRef<Path>) -> Result<WorkloadSuite> {
    let path = path.as_ref();
    let entries: Vec<SuiteEntryFile> = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let kernels = entries
        .into_iter()
        .map(|e| Ok((load_kernel(base.join(&e.kernel))?, e.weight)))
        .collect::<Result<Vec<_>>>()?;
    WorkloadSuite::new(kernels)
}

#[cfg(test)]
mod tests {
    use super::*;

    const JACOBI: &str = r#"{"name":"jacobi2d","space_dims":2,"sizes":[1024,1024],"time_steps":64,
        "stencil_order":1,"ops_per_point":5,"bytes_per_element":4,"live_buffers":2}"#;

    #[test]
    fn kernel_fixture_loads() {
        let k = kernel_from_str(JACOBI).unwrap();
        assert_eq!(k.sizes, vec![1024, 1024]);
        assert_eq!(k.time_steps, 64);
        assert_eq!(k.ops_per_point, 5);
        assert_eq!(kernel_from_str(&kernel_to_json(&k)).unwrap(), k);
    }

    #[test]
    fn three_d_kernel_loads() {
        let text = r#"{"name":"heat3d","space_dims":3,"sizes":[256,256,256],"time_steps":32,
            "stencil_order":1,"ops_per_point":11,"bytes_per_element":4,"live_buffers":2}"#;
        let k = kernel_from_str(text).unwrap();
        assert_eq!(k.s3(), Some(256));
    }

    #[test]
    fn narrow_grid_is_a_validation_error() {
        let text = JACOBI.replace("[1024,1024]", "[1,1024]");
        match kernel_from_str(&text) {
            Err(Error::Validation { field, message }) => {
                assert_eq!(field, "sizes");
                assert_eq!(message, "sizes must exceed 2·r");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(kernel_from_str("{"), Err(Error::Parse { .. })));
        let extra = JACOBI.replace("\"name\"", "\"colour\":1,\"name\"");
        assert!(matches!(kernel_from_str(&extra), Err(Error::Parse { .. })));
    }

    #[test]
    fn arch_fixture_loads_in_bytes() {
        let a =
            arch_from_str(r#"{"n_sm":16,"n_v":128,"m_sm_kib":96,"bw_global_gb_s":224}"#).unwrap();
        assert_eq!(a.m_sm, 98304);
        assert_eq!(a.bw_global, 224.0);
        assert_eq!(arch_from_str(&arch_to_json(&a)).unwrap(), a);
        let bad = arch_from_str(r#"{"n_sm":16,"n_v":100,"m_sm_kib":96,"bw_global_gb_s":224}"#);
        assert!(matches!(bad, Err(Error::Validation { ref field, .. }) if field == "n_v"));
    }

    #[test]
    fn calibration_rejects_nonpositive_c_iter() {
        let text = r#"{"c_iter_ns":0,"t_sync_ns":10,"area_coeffs":{"a_fixed":1,"a_sm_fixed":0,
            "a_lane":0,"a_shmem_kib":0,"a_l2_kib":0,"a_mc":0}}"#;
        assert!(matches!(
            calibration_from_str(text),
            Err(Error::Validation { ref field, .. }) if field == "c_iter"
        ));
    }
}
