use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::json;
use stencil_dse::area::{area, calibrate, load_anchors};
use stencil_dse::bottleneck::{area_slack, decompose, hyperthreading_sweep};
use stencil_dse::codesign::{self as cd, load_arch_space, pareto_indices, CodesignOptions};
use stencil_dse::config::{
    load_arch, load_calibration, load_kernel, load_suite, load_tile, read_json, to_json_pretty,
};
use stencil_dse::energy::energy;
use stencil_dse::memory::feasible;
use stencil_dse::report::{design_points_csv, resource_allocation_csv, top_k_csv};
use stencil_dse::time::t_alg;
use stencil_dse::tuner::{load_grids, TileGridSpec, TuneOptions};
use stencil_dse::{ArchConfig, AreaCoeffs, CalibrationSet, Error, StencilKernel, Strategy};

use crate::{
    BottleneckArgs, CalibrateArgs, CodesignArgs, Failure, ModelArgs, ParetoArgs, PredictArgs,
    SupertuneArgs, TuneArgs,
};

type Outcome = Result<(), Failure>;

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text)
        .map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => write_file(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure {
                code: 4,
                kind: "internal",
                message: e.to_string(),
            })
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Outcome {
    emit(out, &(to_json_pretty(value) + "\n"))
}

fn load_model(m: &ModelArgs) -> Result<(StencilKernel, ArchConfig, CalibrationSet), Failure> {
    Ok((
        load_kernel(&m.kernel)?,
        load_arch(&m.arch)?,
        load_calibration(&m.calib)?,
    ))
}

fn applies_to(grid: &TileGridSpec, kernel: &StencilKernel) -> bool {
    grid.t_s3.is_some() == (kernel.space_dims() == 3)
}

fn default_grids(kernel: &StencilKernel) -> Vec<TileGridSpec> {
    [Strategy::HexHybrid, Strategy::RectWavefront]
        .into_iter()
        .map(|s| TileGridSpec::default_for(s, kernel))
        .collect()
}

pub fn predict(a: PredictArgs) -> Outcome {
    let (kernel, arch, calib) = load_model(&a.model)?;
    let tile = load_tile(&a.tile)?;
    tile.check_dims(&kernel)?;
    let footprint = feasible(&kernel, &arch, &tile);
    let time = t_alg(&kernel, &arch, &calib, &tile)?;
    let energy = energy(&kernel, &arch, &calib, &tile)?;
    let out = json!({
        "kernel": kernel.name,
        "tile": tile,
        "t_alg_ns": time.t_alg,
        "t_ideal_ns": time.t_ideal,
        "gflops": time.gflops,
        "time": time,
        "energy": energy,
        "footprint": footprint,
    });
    emit_json(a.out.as_deref(), &out)
}

pub fn tune(a: TuneArgs) -> Outcome {
    let (kernel, arch, calib) = load_model(&a.model)?;
    let wanted: Option<Strategy> = a.strategy.map(Into::into);
    let grid = match &a.grid {
        None => TileGridSpec::default_for(wanted.unwrap_or(Strategy::HexHybrid), &kernel),
        Some(path) => {
            let mut grids: Vec<TileGridSpec> = load_grids(path)?;
            if grids.len() > 1 {
                grids
                    .retain(|g| applies_to(g, &kernel) && wanted.map_or(true, |s| g.strategy == s));
            } else if let Some(s) = wanted {
                grids.retain(|g| g.strategy == s);
            }
            match grids.len() {
                1 => grids.remove(0),
                0 => {
                    return Err(Failure::input(
                        "no grid in the file matches the kernel and --strategy",
                    ))
                }
                n => {
                    return Err(Failure::input(format!(
                        "{n} grids match; choose one with --strategy"
                    )))
                }
            }
        }
    };
    let options = TuneOptions {
        top_k: a.top_k.max(1),
        parallel: true,
    };
    let result =
        stencil_dse::tuner::tune_with(&kernel, &arch, &calib, &grid, a.objective.into(), options)?;
    if let Some(path) = &a.csv {
        write_file(path, &top_k_csv(&result.top_k)?)?;
    }
    emit_json(a.out.as_deref(), &result)
}

pub fn supertune(a: SupertuneArgs) -> Outcome {
    let (kernel, arch, calib) = load_model(&a.model)?;
    let grids = match &a.grid {
        None => default_grids(&kernel),
        Some(path) => {
            let mut grids = load_grids(path)?;
            grids.retain(|g| applies_to(g, &kernel));
            if grids.is_empty() {
                return Err(Failure::input(
                    "no grid in the file matches the kernel's dimensionality",
                ));
            }
            grids
        }
    };
    let options = TuneOptions {
        top_k: a.top_k.max(1),
        parallel: true,
    };
    let result =
        stencil_dse::tuner::supertune(&kernel, &arch, &calib, &grids, a.objective.into(), options)?;
    emit_json(a.out.as_deref(), &result)
}

pub fn codesign(a: CodesignArgs) -> Outcome {
    let suite = load_suite(&a.suite)?;
    let space = load_arch_space(&a.space)?;
    let calib = load_calibration(&a.calib)?;
    let coeffs = match &a.coeffs {
        Some(path) => {
            let c: AreaCoeffs = read_json(path)?;
            c.validate()?;
            c
        }
        None => calib.area_coeffs,
    };
    let budget = a.budget.or(space.budget_mm2).ok_or_else(|| {
        Failure::input("no area budget: pass --budget or set budget_mm2 in the space file")
    })?;
    if !(budget > 0.0) {
        return Err(Failure::input("budget must be positive"));
    }
    let grids = match &a.grid {
        Some(path) => load_grids(path)?,
        None => Vec::new(),
    };
    let options = CodesignOptions {
        objective: a.objective.into(),
        grids,
        prune_keep: a.prune_keep,
    };
    let points = cd::codesign(&suite, &space, &coeffs, &calib, budget, &options)?;
    let frontier = cd::pareto(&points);

    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::input(format!("cannot create {}: {e}", a.out_dir.display())))?;
    let files = [
        ("design_points.csv", design_points_csv(&points)?),
        ("pareto.csv", design_points_csv(&frontier.points)?),
        ("pareto.json", to_json_pretty(&frontier) + "\n"),
        (
            "resource_allocation.csv",
            resource_allocation_csv(&frontier.points, &coeffs)?,
        ),
    ];
    for (name, text) in &files {
        write_file(&a.out_dir.join(name), text)?;
    }
    let summary = json!({
        "budget_mm2": budget,
        "design_points": points.len(),
        "pareto_points": frontier.points.len(),
        "files": files.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
    });
    emit_json(None, &summary)
}

pub fn pareto(a: ParetoArgs) -> Outcome {
    let bad = |e: csv::Error| Failure::input(format!("{}: {e}", a.input.display()));
    let mut reader = csv::Reader::from_path(&a.input).map_err(bad)?;
    let headers = reader.headers().map_err(bad)?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Failure::input(format!("{}: missing column `{name}`", a.input.display()))
        })
    };
    let (ai, gi) = (column("area_mm2")?, column("weighted_gflops")?);
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(bad)?;
        let number = |i: usize| -> Result<f64, Failure> {
            let v: f64 = record[i].trim().parse().map_err(|_| {
                Failure::input(format!(
                    "row {}: `{}` is not a number",
                    line + 2,
                    &record[i]
                ))
            })?;
            if v.is_nan() {
                return Err(Failure::input(format!("row {}: NaN", line + 2)));
            }
            Ok(v)
        };
        pairs.push((number(ai)?, number(gi)?));
        rows.push(record);
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&headers).map_err(bad)?;
    for i in pareto_indices(&pairs) {
        writer.write_record(&rows[i]).map_err(bad)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Failure::input(e.to_string()))?;
    emit(a.out.as_deref(), &String::from_utf8_lossy(&bytes))
}

pub fn bottleneck(a: BottleneckArgs) -> Outcome {
    let (kernel, arch, calib) = load_model(&a.model)?;
    let tile = load_tile(&a.tile)?;
    tile.check_dims(&kernel)?;
    let report = decompose(&kernel, &arch, &calib, &tile)?;
    let area_mm2 = area(&arch, &calib.area_coeffs);
    let mut out = json!({
        "kernel": kernel.name,
        "tile": tile,
        "area_mm2": area_mm2,
        "report": report,
    });
    if let Some(budget) = a.budget {
        if !(budget > 0.0) {
            return Err(Failure::input("budget must be positive"));
        }
        out["area_slack"] = json!(area_slack(area_mm2, budget));
    }
    if let Some(ks) = a.sweep_k {
        let sweep = hyperthreading_sweep(&kernel, &arch, &calib, &tile, ks)?;
        out["sweep"] = serde_json::to_value(&sweep).map_err(|e| Failure::input(e.to_string()))?;
    }
    emit_json(a.out.as_deref(), &out)
}

pub fn calibrate_area(a: CalibrateArgs) -> Outcome {
    let anchors = load_anchors(&a.anchors)?;
    let fixed = match &a.fixed {
        Some(path) => read_json(path)?,
        None => AreaCoeffs::default(),
    };
    let free: Vec<&str> = a.free.iter().map(|s| s.trim()).collect();
    let fit = calibrate(&anchors, &free, &fixed)?;
    for anchor in &anchors {
        log::info!(
            "anchor {}x{}: measured {} mm², fitted {} mm²",
            anchor.arch.n_sm,
            anchor.arch.n_v,
            anchor.area_mm2,
            area(&anchor.arch, &fit)
        );
    }
    if fit.validate().is_err() {
        return Err(
            Error::Domain("fitted coefficients do not form a usable area model".into()).into(),
        );
    }
    emit_json(a.out.as_deref(), &fit)
}
