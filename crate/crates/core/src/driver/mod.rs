//! Time loop, scenarios, postprocessing and file output.
//!
//! Per mechanics step of length Δt the displacement is moved to the
//! electrophysiology mesh once, then `N_sub` substeps of ionic update,
//! potential solve, calcium transfer, activation update and circulation RK4
//! are taken with `τ = Δt/N_sub`. Sarcomere length, active tension and the
//! volume-constrained mechanics step close the step.

mod check;
mod config;
mod export;
mod postprocess;
mod scenario;
mod series;
mod sim;

pub use check::{run_checks, Check};
pub use config::{EpConfig, DEFAULT_R_MIN, GeometryConfig, InitConfig, OutputConfig, RunConfig, TimeConfig};
pub use export::{csv_header, format_vtk, read_series_csv, write_json, write_series_csv, write_vtk, FieldData};
pub use postprocess::{stress_indicator, Direction};
pub use scenario::{
    run_scenario, run_variant, with_afterload, with_contractility, with_preload, Scenario, ScenarioReport, Variant,
    VariantResult,
};
pub use series::{BeatSummary, BeatTracker, Sample, TimeSeries};
pub use sim::{run_heartbeat, RunCounters, Simulation};

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Model choices that stand in for unpublished or unavailable components.
pub const SUBSTITUTIONS: [&str; 4] = [
    "ionic: reduced two-current excitable model with one gate and calcium",
    "activation: first-order Hill-type kinetics with linear length dependence",
    "circulation: diode valves and raised-cosine chamber activation",
    "geometry: idealized truncated ellipsoid with rule-based fibers",
];

/// Contents of the run report written next to the time series.
#[derive(Debug, Serialize)]
pub struct RunReport<'a> {
    pub config: &'a RunConfig,
    pub tau_s: f64,
    pub substitutions: &'a [&'a str],
    pub counters: RunCounters,
    pub coarse_cells: usize,
    pub fine_cells: usize,
    pub mech_dofs: usize,
    pub ep_dofs: usize,
    pub beats: &'a [BeatSummary],
    /// Solid volume is reported as `∫ J dΩ₀`.
    pub solid_volume_definition: &'static str,
}

pub fn run_report<'a>(sim: &'a Simulation, series: &'a TimeSeries) -> RunReport<'a> {
    RunReport {
        config: &sim.config,
        tau_s: sim.config.time.tau_s(),
        substitutions: &SUBSTITUTIONS,
        counters: sim.counters,
        coarse_cells: sim.mech.space().n_cells(),
        fine_cells: sim.ep.space.n_cells(),
        mech_dofs: sim.mech.n_dofs(),
        ep_dofs: sim.ep.space.n_dofs(),
        beats: &series.beats,
        solid_volume_definition: "integral of det F over the reference domain",
    }
}

/// Writes the coarse (mechanics) and fine (electrophysiology) field files
/// of the current state.
pub fn write_fields(sim: &Simulation, dir: &Path, index: usize) -> Result<Vec<PathBuf>> {
    let mech_space = sim.mech.space();
    let d = &sim.mech_state.d_n;
    let s_ff = stress_indicator(&sim.mech, d, Some(&sim.ta), Direction::Fiber, Direction::Fiber)?;
    let s_fs = stress_indicator(&sim.mech, d, Some(&sim.ta), Direction::Fiber, Direction::Sheet)?;
    let coarse_mesh = mech_space.mesh().as_ref();
    let coarse = dir.join(format!("mechanics_{index:05}.vtk"));
    write_vtk(
        &coarse,
        &format!("mechanics t={}", sim.t),
        coarse_mesh,
        &[
            FieldData::Vector("displacement_m".into(), d.clone()),
            FieldData::Scalar("active_tension_pa".into(), sim.ta.clone()),
            FieldData::Scalar("activation".into(), sim.s.clone()),
            FieldData::Scalar("sarcomere_length_um".into(), sim.sl.clone()),
        ],
        &[
            FieldData::Scalar("stress_ff_pa".into(), s_ff),
            FieldData::Scalar("stress_fs_pa".into(), s_fs),
        ],
    )?;

    let fine = &sim.ep.space;
    let fine_mesh = fine.mesh().as_ref();
    let mut corner = vec![(0usize, [0.0; 3]); fine_mesh.n_vertices()];
    for (c, cell) in fine_mesh.cells.iter().enumerate() {
        for (k, &v) in cell.iter().enumerate() {
            corner[v] = (c, [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64]);
        }
    }
    let at_vertices = |f: &[f64]| -> Vec<f64> { corner.iter().map(|&(c, xi)| fine.eval_scalar(c, xi, f)).collect() };
    let ca = sim.ep_state.calcium(sim.ep.model.as_ref());
    let ep_path = dir.join(format!("electrophysiology_{index:05}.vtk"));
    write_vtk(
        &ep_path,
        &format!("electrophysiology t={}", sim.t),
        fine_mesh,
        &[
            FieldData::Scalar("potential_v".into(), at_vertices(&sim.ep_state.u)),
            FieldData::Scalar("calcium".into(), at_vertices(&ca)),
        ],
        &[],
    )?;
    Ok(vec![coarse, ep_path])
}

/// Runs `config` and writes `series.csv`, `report.json` and, if requested,
/// field files into `dir`.
pub fn run_to_dir(config: RunConfig, dir: &Path) -> Result<TimeSeries> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sim = Simulation::new(config)?;
    let mut index = 0;
    let series = sim.run_with(|s| {
        write_fields(s, dir, index)?;
        index += 1;
        Ok(())
    })?;
    write_series_csv(&series, dir.join("series.csv"))?;
    write_json(&run_report(&sim, &series), dir.join("report.json"))?;
    Ok(series)
}
