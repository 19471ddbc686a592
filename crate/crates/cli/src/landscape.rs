use std::f64::consts::FRAC_PI_4;
use std::io::Write;

use serde::Serialize;
use simon_learn::optimize::landscape_scan;
use simon_learn::Pipeline;

use crate::output::{out_dir, write_csv, write_json, Meta};
use crate::{CliError, LayoutChoice, RunConfig};

/// Cells whose cost is this far below the Simon point count as beating it.
const BELOW_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LandscapeSummary {
    pub resolution: usize,
    /// First cell, row-major, within 1e-9 of the grid minimum.
    pub argmin: (usize, usize),
    pub argmin_theta: (f64, f64),
    pub min_cost: f64,
    pub simon_point_cost: f64,
    /// Cell containing `(pi/4, pi/4)`, if the grid covers it.
    pub simon_cell: Option<(usize, usize)>,
    pub simon_cell_cost: Option<f64>,
    pub simon_is_grid_min: bool,
    pub any_cell_below_simon: bool,
}

/// Scans a two-parameter layout and writes `landscape.csv` and `landscape.json`.
pub fn cmd_landscape(cfg: &RunConfig, w: &mut dyn Write) -> Result<LandscapeSummary, CliError> {
    let layout = cfg.layout_with_default(LayoutChoice::Fig5)?;
    let training = cfg.training_set(&cfg.secrets())?;
    let pipeline = Pipeline::new(layout, training, &cfg.initial_post()?)?;
    let land = landscape_scan(&pipeline, &cfg.grid)?;

    let simon_point_cost = pipeline.total(&[FRAC_PI_4, FRAC_PI_4])?;
    let argmin = land.argmin(BELOW_TOL);
    let simon_cell = land.cell_containing(FRAC_PI_4, FRAC_PI_4);
    let any_cell_below_simon = land.costs.iter().any(|&c| c < simon_point_cost - BELOW_TOL);
    let summary = LandscapeSummary {
        resolution: cfg.grid.resolution,
        argmin,
        argmin_theta: (land.theta1[argmin.0], land.theta2[argmin.1]),
        min_cost: land.min_cost(),
        simon_point_cost,
        simon_cell,
        simon_cell_cost: simon_cell.map(|(i, j)| land.cost_at(i, j)),
        simon_is_grid_min: !any_cell_below_simon,
        any_cell_below_simon,
    };

    let dir = out_dir(cfg)?;
    let meta = Meta::new("landscape", cfg, &pipeline.layout().name);
    write_csv(&dir, "landscape.csv", &meta, &land.to_csv())?;
    write_json(&dir, "landscape.json", &meta, &summary)?;
    writeln!(
        w,
        "landscape {}x{}: min {} at cell {:?}, simon point cost {}, simon_is_grid_min={}",
        summary.resolution,
        summary.resolution,
        summary.min_cost,
        summary.argmin,
        summary.simon_point_cost,
        summary.simon_is_grid_min
    )?;
    Ok(summary)
}
