//! Simulation driver and the batch `run` entry point.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::adaptivity::{error_indicator, mark, AdaptConfig, AdaptReport, AdaptiveMesh};
use crate::error::{Error, Result};
use crate::mesh::{generate_box_mesh, TriMesh};
use crate::reconstruction::{reconstruct, CellGradient};
use crate::scenarios::{CellTerrain, ScenarioSpec};
use crate::state::ConservedState;
use crate::timestepper::{step, Model, SolutionField, StepConfig, StepRecord};

use super::config::RunConfig;
use super::profile::{sample_profile, write_profile_csv};
use super::vtk::{write_vtk, Frame};
use super::fmt9;

#[derive(Clone, Debug)]
enum Grid {
    Fixed(TriMesh),
    Adaptive(AdaptiveMesh),
}

impl Grid {
    fn mesh(&self) -> &TriMesh {
        match self {
            Grid::Fixed(m) => m,
            Grid::Adaptive(a) => a.mesh(),
        }
    }
}

/// A scenario being advanced in time, with its step and adaptation
/// history.
#[derive(Clone, Debug)]
pub struct Simulation {
    model: Model,
    grid: Grid,
    terrain: Vec<CellTerrain>,
    field: SolutionField,
    step_cfg: StepConfig,
    adapt: Option<AdaptConfig>,
    since_adapt: usize,
    history: Vec<StepRecord>,
    adapt_reports: Vec<AdaptReport>,
    cell_steps: usize,
}

impl Simulation {
    /// Structured `nx x ny` box mesh over the scenario domain.
    pub fn new(spec: ScenarioSpec, nx: usize, ny: usize, step_cfg: StepConfig, adapt: Option<AdaptConfig>) -> Result<Simulation> {
        let d = spec.domain;
        let mesh = generate_box_mesh(d.x, d.y, nx, ny)?;
        Self::on_mesh(spec, mesh, step_cfg, adapt)
    }

    /// With adaptivity on, the initial state is refined up to `max_level`
    /// where the indicator asks for it, resampling the exact initial data
    /// after each round.
    pub fn on_mesh(spec: ScenarioSpec, mesh: TriMesh, step_cfg: StepConfig, adapt: Option<AdaptConfig>) -> Result<Simulation> {
        step_cfg.validate()?;
        let model = Model::new(spec)?;
        let initial = model.spec().initial;
        let grid = match adapt {
            None => Grid::Fixed(mesh),
            Some(cfg) => {
                cfg.validate()?;
                let mut am = AdaptiveMesh::new(&mesh, cfg.max_level)?;
                for _ in 0..cfg.max_level {
                    let field = SolutionField::sample(am.mesh(), &initial);
                    let grads = reconstruct(am.mesh(), &field.cells, step_cfg.exec);
                    let ind = error_indicator(am.mesh(), &field.cells, &grads, step_cfg.exec);
                    let marks = mark(&ind, &am.levels(), &cfg);
                    if marks.refine.is_empty() {
                        break;
                    }
                    am.refine(&field.cells, &marks.refine)?;
                }
                Grid::Adaptive(am)
            }
        };
        let field = SolutionField::sample(grid.mesh(), &initial);
        let terrain = model.terrain(grid.mesh());
        Ok(Simulation {
            model,
            grid,
            terrain,
            field,
            step_cfg,
            adapt,
            since_adapt: 0,
            history: Vec::new(),
            adapt_reports: Vec::new(),
            cell_steps: 0,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.grid.mesh()
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn spec(&self) -> &ScenarioSpec {
        self.model.spec()
    }

    pub fn field(&self) -> &SolutionField {
        &self.field
    }

    pub fn t(&self) -> f64 {
        self.field.t
    }

    pub fn mass(&self) -> f64 {
        self.field.mass(self.mesh())
    }

    pub fn history(&self) -> &[StepRecord] {
        &self.history
    }

    pub fn adapt_reports(&self) -> &[AdaptReport] {
        &self.adapt_reports
    }

    /// Sum over steps of the number of cells advanced.
    pub fn cell_steps(&self) -> usize {
        self.cell_steps
    }

    pub fn total_clamps(&self) -> usize {
        self.history.iter().map(|r| r.clamps).sum()
    }

    pub fn gradients(&self) -> Vec<CellGradient> {
        reconstruct(self.mesh(), &self.field.cells, self.step_cfg.exec)
    }

    pub fn indicator(&self) -> Vec<f64> {
        error_indicator(self.mesh(), &self.field.cells, &self.gradients(), self.step_cfg.exec)
    }

    /// One step, not passing `target`, followed by an adaptation event
    /// when one is due.
    pub fn step_once(&mut self, target: f64) -> Result<StepRecord> {
        let cfg = StepConfig {
            t_end: target,
            ..self.step_cfg
        };
        let n = self.mesh().num_cells();
        let rec = step(self.grid.mesh(), &mut self.field, &self.model, &self.terrain, &cfg)?;
        self.cell_steps += n;
        self.history.push(rec);
        self.since_adapt += 1;
        if let Some(a) = self.adapt {
            if self.since_adapt >= a.adapt_interval {
                self.adapt_now()?;
            }
        }
        Ok(rec)
    }

    /// Steps until `t == target`.
    pub fn advance_to(&mut self, target: f64) -> Result<()> {
        while self.field.t < target {
            self.step_once(target)?;
        }
        Ok(())
    }

    /// One adaptation event. Does nothing on a fixed mesh.
    pub fn adapt_now(&mut self) -> Result<Option<AdaptReport>> {
        let (Some(cfg), Grid::Adaptive(am)) = (self.adapt, &mut self.grid) else {
            return Ok(None);
        };
        self.since_adapt = 0;
        let exec = self.step_cfg.exec;
        let grads = reconstruct(am.mesh(), &self.field.cells, exec);
        let ind = error_indicator(am.mesh(), &self.field.cells, &grads, exec);
        let (cells, report) = am.adapt(&self.field.cells, &ind, &cfg)?;
        if report.cells_after != report.cells_before || report.refined + report.coarsened > 0 {
            self.field.cells = cells;
            self.field.k_branches.clear();
            self.terrain = self.model.terrain(am.mesh());
        }
        self.adapt_reports.push(report.clone());
        Ok(Some(report))
    }

    /// Replaces the cell averages (same mesh).
    pub fn set_cells(&mut self, cells: Vec<ConservedState>) -> Result<()> {
        if cells.len() != self.mesh().num_cells() {
            return Err(Error::Config("cell count does not match the mesh".into()));
        }
        self.field.cells = cells;
        self.field.k_branches.clear();
        Ok(())
    }
}

/// Relative L1 depth error against the exact dam-break solution, sampled
/// at barycentres: `sum |h - h_exact| |tau| / sum h_exact |tau|`.
pub fn l1_error(spec: &ScenarioSpec, mesh: &TriMesh, cells: &[ConservedState], t: f64) -> Result<f64> {
    let exact = spec.exact().ok_or_else(|| Error::NoOracle(spec.name.clone()))?;
    let (mut num, mut den) = (0.0, 0.0);
    for (c, u) in mesh.cells().iter().zip(cells) {
        let (he, _) = exact.eval(c.barycenter.x, t);
        num += (u.h - he).abs() * c.area;
        den += he * c.area;
    }
    Ok(num / den)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameInfo {
    pub index: usize,
    pub t: f64,
    pub cells: usize,
    pub mass: f64,
    pub l1: Option<f64>,
}

/// What a batch run did.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub frames: Vec<FrameInfo>,
    pub steps: usize,
    pub t_final: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub outflow: f64,
    pub clamps: usize,
    pub cell_steps: usize,
    pub adapt_events: usize,
    /// Largest relative mass change over adaptation events.
    pub adapt_mass_change: f64,
    pub wall_time: Duration,
    pub aborted: Option<String>,
}

impl RunSummary {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "steps {}", self.steps);
        let _ = writeln!(s, "t_final {}", fmt9(self.t_final));
        let _ = writeln!(s, "frames {}", self.frames.len());
        let _ = writeln!(s, "mass_initial {}", fmt9(self.mass_initial));
        let _ = writeln!(s, "mass_final {}", fmt9(self.mass_final));
        let _ = writeln!(s, "boundary_outflow {}", fmt9(self.outflow));
        let _ = writeln!(s, "clamps {} of {} cell-steps", self.clamps, self.cell_steps);
        let _ = writeln!(s, "adapt_events {}", self.adapt_events);
        let _ = writeln!(s, "adapt_max_relative_mass_change {}", fmt9(self.adapt_mass_change));
        for f in &self.frames {
            let l1 = f.l1.map_or_else(|| "-".to_string(), fmt9);
            let _ = writeln!(s, "frame {} t {} cells {} mass {} l1 {}", f.index, fmt9(f.t), f.cells, fmt9(f.mass), l1);
        }
        let _ = writeln!(s, "wall_time_s {:.3}", self.wall_time.as_secs_f64());
        if let Some(e) = &self.aborted {
            let _ = writeln!(s, "aborted {e}");
        }
        s
    }
}

/// Output times `0, dt, 2 dt, ...`, ending exactly at `t_end`.
fn frame_times(t_end: f64, interval: f64) -> Vec<f64> {
    let n = (t_end / interval - 1e-9).ceil().max(0.0) as usize;
    (0..=n).map(|k| (k as f64 * interval).min(t_end)).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn history_csv(history: &[StepRecord]) -> String {
    let mut s = String::from("step,t,dt,mass,boundary_outflow,max_velocity,clamps,k_switches\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.step,
            fmt9(r.t),
            fmt9(r.dt),
            fmt9(r.mass),
            fmt9(r.boundary_outflow),
            fmt9(r.max_velocity),
            r.clamps,
            r.k_switches
        );
    }
    s
}

fn write_frame(sim: &Simulation, cfg: &RunConfig, index: usize) -> Result<FrameInfo> {
    let mesh = sim.mesh();
    let cells = &sim.field().cells;
    let h_dry = sim.spec().params.h_dry;
    let grads = sim.gradients();
    let dir = &cfg.output_dir;
    if cfg.formats.vtk {
        let indicator = error_indicator(mesh, cells, &grads, cfg.step.exec);
        let frame = Frame {
            t: sim.t(),
            mesh,
            cells,
            indicator: &indicator,
            h_dry,
        };
        write_vtk(&frame, &dir.join(format!("frame_{index:04}.vtk")))?;
    }
    if let (true, Some(line)) = (cfg.formats.csv, cfg.profile) {
        let rows = sample_profile(mesh, cells, &grads, line.endpoints(&sim.spec().domain), cfg.profile_samples, h_dry);
        write_profile_csv(&rows, &dir.join(format!("profile_{index:04}.csv")))?;
    }
    Ok(FrameInfo {
        index,
        t: sim.t(),
        cells: mesh.num_cells(),
        mass: sim.mass(),
        l1: l1_error(sim.spec(), mesh, cells, sim.t()).ok(),
    })
}

/// Runs `cfg` to completion, writing frames, `history.csv`, `log.txt` and
/// `summary.txt` into the output directory. A solver abort still writes
/// the history and summary before the error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let start = Instant::now();
    let mut sim = Simulation::new(cfg.scenario.clone(), cfg.nx, cfg.ny, cfg.step, cfg.adapt)?;
    let dir: &PathBuf = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mass_initial = sim.mass();
    let mut frames = Vec::new();
    let mut outcome = Ok(());
    for (k, &t) in frame_times(cfg.step.t_end, cfg.output_interval).iter().enumerate() {
        outcome = sim.advance_to(t).and_then(|()| write_frame(&sim, cfg, k).map(|f| frames.push(f)));
        if outcome.is_err() {
            break;
        }
    }
    let reports = sim.adapt_reports();
    let summary = RunSummary {
        frames,
        steps: sim.history().len(),
        t_final: sim.t(),
        mass_initial,
        mass_final: sim.mass(),
        outflow: sim.history().iter().map(|r| r.boundary_outflow).sum(),
        clamps: sim.total_clamps(),
        cell_steps: sim.cell_steps(),
        adapt_events: reports.len(),
        adapt_mass_change: reports.iter().map(AdaptReport::relative_mass_change).fold(0.0, f64::max),
        wall_time: start.elapsed(),
        aborted: outcome.as_ref().err().map(ToString::to_string),
    };
    let mut log = String::new();
    let mut events = reports.iter();
    let interval = cfg.adapt.map_or(usize::MAX, |a| a.adapt_interval);
    for r in sim.history() {
        let _ = writeln!(log, "{}", r.log_line());
        if r.step % interval == 0 {
            if let Some(e) = events.next() {
                let _ = writeln!(log, "{}", e.log_line());
            }
        }
    }
    write_text(&dir.join("history.csv"), &history_csv(sim.history()))?;
    write_text(&dir.join("log.txt"), &log)?;
    write_text(&dir.join("summary.txt"), &summary.render())?;
    outcome.map(|()| summary)
}
