//! MUSCL-Hancock predictor/corrector stepping under a CFL limit.
//!
//! One step runs, with a barrier between stages: pressure coefficients and
//! `beta` at `t^n` (frozen for the step), limited gradients, the time step,
//! the predictor (own-trace physical fluxes, half step), and the corrector
//! (HLL fluxes on half-step traces, full step). Edge fluxes are computed
//! once per edge and gathered by each cell, so the update is conservative
//! and independent of thread scheduling.

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::par::{map_indexed, try_map_indexed, Execution};
use crate::physics::{
    beta, flux_normal, primitive_from_conserved, source, BetaPair, EarthPressure, MaterialParams, PressureModel,
};
use crate::reconstruction::{evaluate_trace, reconstruct, velocity_divergence_parts, CellGradient};
use crate::riemann::{hll_flux, RiemannStates};
use crate::scenarios::{ghost_state, Boundaries, CellTerrain, InitialCondition, ScenarioSpec};
use crate::state::{sum3, ConservedState, Vec2};

/// Cell averages on a mesh at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    pub cells: Vec<ConservedState>,
    pub t: f64,
    pub step: usize,
    /// Earth-pressure branch code per cell from the previous step, used to
    /// count branch switches. Empty after the mesh changes.
    pub k_branches: Vec<u8>,
}

impl SolutionField {
    pub fn new(cells: Vec<ConservedState>) -> Self {
        SolutionField {
            cells,
            t: 0.0,
            step: 0,
            k_branches: Vec::new(),
        }
    }

    /// Initial data sampled at cell barycentres.
    pub fn sample(mesh: &TriMesh, initial: &InitialCondition) -> Self {
        Self::new(mesh.cells().iter().map(|c| initial.eval(c.barycenter)).collect())
    }

    /// `sum h_i |tau_i|`.
    pub fn mass(&self, mesh: &TriMesh) -> f64 {
        total_mass(mesh, &self.cells)
    }

    /// Largest `|(u, v)|` over wet cells.
    pub fn max_velocity(&self, h_dry: f64) -> f64 {
        self.cells
            .iter()
            .map(|u| primitive_from_conserved(u, h_dry).speed())
            .fold(0.0, f64::max)
    }
}

pub fn total_mass(mesh: &TriMesh, cells: &[ConservedState]) -> f64 {
    cells.iter().zip(mesh.cells()).map(|(u, c)| u.h * c.area).sum()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepConfig {
    /// Courant number in `(0, 1]`.
    pub cr: f64,
    pub t_end: f64,
    pub max_steps: usize,
    pub dt_floor: f64,
    pub exec: Execution,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            cr: 0.5,
            t_end: 1.0,
            max_steps: 1_000_000,
            dt_floor: 1e-10,
            exec: Execution::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cr > 0.0 && self.cr <= 1.0) {
            return Err(Error::Config(format!("courant number must lie in (0, 1], got {}", self.cr)));
        }
        if !(self.dt_floor > 0.0) {
            return Err(Error::Config(format!("dt_floor must be positive, got {}", self.dt_floor)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be finite and >= 0, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// Scenario plus the derived pressure model.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ScenarioSpec,
    pressure: PressureModel,
}

impl Model {
    pub fn new(spec: ScenarioSpec) -> Result<Model> {
        spec.validate()?;
        let pressure = PressureModel::new(spec.pressure, &spec.params)?;
        Ok(Model { spec, pressure })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn params(&self) -> &MaterialParams {
        &self.spec.params
    }

    pub fn terrain(&self, mesh: &TriMesh) -> Vec<CellTerrain> {
        mesh.cells().iter().map(|c| CellTerrain::at(&self.spec, c.barycenter)).collect()
    }

    /// Earth pressure coefficients per cell for the current velocities,
    /// with a branch code (`2 * passive_x + passive_y`).
    ///
    /// A velocity gradient whose change across the cell is below `u_reg`
    /// counts as zero (active branch), so roundoff velocities in material
    /// at rest do not toggle the branch.
    pub fn pressure_coefficients(
        &self,
        mesh: &TriMesh,
        cells: &[ConservedState],
        exec: Execution,
    ) -> (Vec<EarthPressure>, Vec<u8>) {
        match self.pressure {
            PressureModel::Constant(_) => (
                vec![self.pressure.coefficients(0.0, 0.0); cells.len()],
                vec![0; cells.len()],
            ),
            PressureModel::MohrCoulomb(_) => velocity_divergence_parts(mesh, cells, self.spec.params.h_dry, exec)
                .into_iter()
                .zip(mesh.cells())
                .map(|((dudx, dvdy), c)| {
                    let floor = self.spec.params.u_reg / c.size;
                    let dudx = if dudx.abs() < floor { 0.0 } else { dudx };
                    let dvdy = if dvdy.abs() < floor { 0.0 } else { dvdy };
                    let code = 2 * u8::from(!(dudx >= 0.0)) + u8::from(!(dvdy >= 0.0));
                    (self.pressure.coefficients(dudx, dvdy), code)
                })
                .unzip(),
        }
    }

    pub fn betas(&self, terrain: &[CellTerrain], ks: &[EarthPressure]) -> Result<Vec<BetaPair>> {
        terrain
            .iter()
            .zip(ks)
            .map(|(t, &k)| beta(&self.spec.params, t.zeta, k))
            .collect()
    }
}

/// Stable step for one cell, or `None` when its signal speed is zero.
pub fn cfl_candidate(size: f64, u: &ConservedState, beta: BetaPair, h_dry: f64) -> Option<f64> {
    let speed = (beta.magnitude() * u.h.max(0.0)).sqrt() + primitive_from_conserved(u, h_dry).speed();
    (speed > 0.0).then(|| size / speed)
}

/// `cr * min_i dx_i / (sqrt(|beta_i| h_i) + |u_i|)`; `None` for a field
/// with no signal speed anywhere.
pub fn cfl_dt(mesh: &TriMesh, cells: &[ConservedState], betas: &[BetaPair], cr: f64, h_dry: f64) -> Option<f64> {
    cells
        .iter()
        .zip(betas)
        .zip(mesh.cells())
        .filter_map(|((u, &b), c)| cfl_candidate(c.size, u, b, h_dry))
        .reduce(f64::min)
        .map(|dt| cr * dt)
}

/// Momentum source `(0, h s_x, h s_y)` at the cell average.
fn cell_source(u: &ConservedState, terrain: &CellTerrain, params: &MaterialParams) -> ConservedState {
    let p = primitive_from_conserved(u, params.h_dry);
    if u.h <= 0.0 {
        return ConservedState::ZERO;
    }
    let s = source(&p, terrain.zeta, terrain.dzeta_dx, terrain.grad_zb, params);
    ConservedState::new(0.0, u.h * s.x, u.h * s.y)
}

fn sum_contributions(terms: [ConservedState; 3]) -> ConservedState {
    let [a, b, c] = terms;
    ConservedState::new(sum3(a.h, b.h, c.h), sum3(a.hu, b.hu, c.hu), sum3(a.hv, b.hv, c.hv))
}

/// Clamp a negative depth to a dry state and drop the momentum of cells
/// below `h_dry`. Returns whether the depth clamp fired.
fn settle(u: &mut ConservedState, h_dry: f64) -> bool {
    if u.h < 0.0 {
        *u = ConservedState::ZERO;
        true
    } else {
        if u.h < h_dry {
            u.hu = 0.0;
            u.hv = 0.0;
        }
        false
    }
}

/// Range of velocity components over a cell and its wet neighbours.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityBounds {
    pub u: (f64, f64),
    pub v: (f64, f64),
}

impl VelocityBounds {
    fn clamp(&self, u: f64, v: f64) -> (f64, f64) {
        (u.clamp(self.u.0, self.u.1), v.clamp(self.v.0, self.v.1))
    }
}

/// Local velocity ranges used to bound trace velocities. Dry cells only
/// contribute when the cell itself is dry, which gives the range `[0, 0]`.
pub fn velocity_bounds(mesh: &TriMesh, cells: &[ConservedState], h_dry: f64, exec: Execution) -> Vec<VelocityBounds> {
    map_indexed(exec, mesh.num_cells(), |i| {
        let mut b = VelocityBounds {
            u: (0.0, 0.0),
            v: (0.0, 0.0),
        };
        let mut first = true;
        let own = std::iter::once(i);
        let nbrs = mesh.cell(i).neighbors.into_iter().flatten();
        for j in own.chain(nbrs) {
            if j != i && cells[j].h < h_dry {
                continue;
            }
            let p = primitive_from_conserved(&cells[j], h_dry);
            if first {
                b.u = (p.u, p.u);
                b.v = (p.v, p.v);
                first = false;
            } else {
                b.u = (b.u.0.min(p.u), b.u.1.max(p.u));
                b.v = (b.v.0.min(p.v), b.v.1.max(p.v));
            }
        }
        b
    })
}

/// Edge trace with the velocity held inside the local range. A trace
/// below `h_dry` carries no momentum.
fn bounded_trace(
    u: &ConservedState,
    g: &CellGradient,
    dx: Vec2,
    bounds: &VelocityBounds,
    h_dry: f64,
) -> ConservedState {
    let t = evaluate_trace(u, g, dx);
    if t.h < h_dry {
        return ConservedState::new(t.h, 0.0, 0.0);
    }
    let (vx, vy) = bounds.clamp(t.hu / t.h, t.hv / t.h);
    ConservedState::new(t.h, t.h * vx, t.h * vy)
}

fn check_finite(u: &ConservedState, stage: &'static str, cell: usize) -> Result<()> {
    if u.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            stage,
            location: format!("cell {cell}: {u:?}"),
        })
    }
}

/// Half-step averages from each cell's own edge-midpoint traces.
/// Returns the states and the number of depth clamps.
#[allow(clippy::too_many_arguments)]
pub fn predictor(
    mesh: &TriMesh,
    cells: &[ConservedState],
    grads: &[CellGradient],
    betas: &[BetaPair],
    terrain: &[CellTerrain],
    params: &MaterialParams,
    dt: f64,
    exec: Execution,
) -> Result<(Vec<ConservedState>, usize)> {
    let bounds = velocity_bounds(mesh, cells, params.h_dry, exec);
    let out = try_map_indexed(exec, mesh.num_cells(), |i| {
        let cell = mesh.cell(i);
        let u = cells[i];
        let terms = std::array::from_fn(|k| {
            let e = mesh.edge(cell.edges[k]);
            let trace = bounded_trace(&u, &grads[i], e.midpoint - cell.barycenter, &bounds[i], params.h_dry);
            flux_normal(&trace, betas[i], mesh.outward_normal(i, k), params.h_dry) * e.length
        });
        let mut half = u - sum_contributions(terms) * (0.5 * dt / cell.area)
            + cell_source(&u, &terrain[i], params) * (0.5 * dt);
        check_finite(&half, "predictor", i)?;
        let clamped = settle(&mut half, params.h_dry);
        Ok((half, clamped))
    })?;
    let clamps = out.iter().filter(|(_, c)| *c).count();
    Ok((out.into_iter().map(|(u, _)| u).collect(), clamps))
}

/// Result of the corrector stage.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorOutput {
    pub cells: Vec<ConservedState>,
    pub clamps: usize,
    /// Net mass leaving through the domain boundary during the step.
    pub boundary_outflow: f64,
}

/// Full step from `t^n` averages using HLL fluxes of half-step traces.
#[allow(clippy::too_many_arguments)]
pub fn corrector(
    mesh: &TriMesh,
    cells: &[ConservedState],
    half: &[ConservedState],
    grads: &[CellGradient],
    betas: &[BetaPair],
    terrain: &[CellTerrain],
    params: &MaterialParams,
    boundaries: &Boundaries,
    dt: f64,
    exec: Execution,
) -> Result<CorrectorOutput> {
    let h_dry = params.h_dry;
    let bounds = velocity_bounds(mesh, half, h_dry, exec);
    let trace = |i: usize, p: Vec2| {
        let c = mesh.cell(i);
        bounded_trace(&half[i], &grads[i], p - c.barycenter, &bounds[i], h_dry)
    };
    let fluxes = try_map_indexed(exec, mesh.edges().len(), |id| {
        let e = mesh.edge(id);
        let left = trace(e.left, e.midpoint);
        let (right, beta_right) = match e.right {
            Some(r) => (trace(r, e.midpoint), betas[r]),
            None => (ghost_state(boundaries.rule_for(e.normal), &left, e.normal), betas[e.left]),
        };
        let states = RiemannStates {
            left,
            right,
            beta_left: betas[e.left],
            beta_right,
            normal: e.normal,
        };
        let f = hll_flux(&states, h_dry).map_err(|err| match err {
            Error::NonFinite { stage, .. } => Error::NonFinite {
                stage,
                location: format!("edge {id}"),
            },
            other => other,
        })?;
        Ok::<_, Error>(f * e.length)
    })?;

    let out = try_map_indexed(exec, mesh.num_cells(), |i| {
        let cell = mesh.cell(i);
        let terms = std::array::from_fn(|k| {
            let id = cell.edges[k];
            if mesh.edge(id).left == i {
                fluxes[id]
            } else {
                -fluxes[id]
            }
        });
        let mut next = cells[i] - sum_contributions(terms) * (dt / cell.area)
            + cell_source(&half[i], &terrain[i], params) * dt;
        check_finite(&next, "corrector", i)?;
        let clamped = settle(&mut next, h_dry);
        Ok::<_, Error>((next, clamped))
    })?;

    let boundary_outflow = mesh
        .edges()
        .iter()
        .zip(&fluxes)
        .filter(|(e, _)| e.is_boundary())
        .map(|(_, f)| f.h * dt)
        .sum();
    let clamps = out.iter().filter(|(_, c)| *c).count();
    Ok(CorrectorOutput {
        cells: out.into_iter().map(|(u, _)| u).collect(),
        clamps,
        boundary_outflow,
    })
}

/// Summary of one completed step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Time after the step.
    pub t: f64,
    pub dt: f64,
    /// Mass after the step.
    pub mass: f64,
    /// Largest `sqrt(|beta| h) + |u|` at the start of the step.
    pub max_wave_speed: f64,
    /// Largest `|u|` after the step.
    pub max_velocity: f64,
    /// Depth clamps in predictor and corrector.
    pub clamps: usize,
    /// Cells whose earth-pressure branch changed since the last step.
    pub k_switches: usize,
    pub boundary_outflow: f64,
}

impl StepRecord {
    /// Plain-text log line.
    pub fn log_line(&self) -> String {
        format!(
            "step {} t {:.8e} dt {:.8e} mass {:.8e} max_speed {:.8e} clamps {} k_switches {}",
            self.step, self.t, self.dt, self.mass, self.max_wave_speed, self.clamps, self.k_switches
        )
    }
}

/// Advance `field` by one CFL-limited step, clipped so that `t` does not
/// pass `cfg.t_end`.
pub fn step(
    mesh: &TriMesh,
    field: &mut SolutionField,
    model: &Model,
    terrain: &[CellTerrain],
    cfg: &StepConfig,
) -> Result<StepRecord> {
    if field.step >= cfg.max_steps {
        return Err(Error::StepLimit(cfg.max_steps));
    }
    let params = model.params();
    let exec = cfg.exec;
    let (ks, codes) = model.pressure_coefficients(mesh, &field.cells, exec);
    let betas = model.betas(terrain, &ks)?;
    let k_switches = if field.k_branches.len() == codes.len() {
        codes.iter().zip(&field.k_branches).filter(|(a, b)| a != b).count()
    } else {
        0
    };
    let grads = reconstruct(mesh, &field.cells, exec);

    let max_wave_speed = cell_wave_speeds(&field.cells, &betas, params.h_dry, exec)
        .into_iter()
        .fold(0.0, f64::max);
    let mut dt = match cfl_dt(mesh, &field.cells, &betas, cfg.cr, params.h_dry) {
        None => cfg.dt_floor,
        Some(dt) if dt < cfg.dt_floor => {
            return Err(Error::DtBelowFloor {
                dt,
                floor: cfg.dt_floor,
                t: field.t,
            })
        }
        Some(dt) => dt,
    };
    let remaining = cfg.t_end - field.t;
    let hits_end = dt >= remaining;
    if hits_end {
        dt = remaining.max(0.0);
    }

    let (half, c1) = predictor(mesh, &field.cells, &grads, &betas, terrain, params, dt, exec)?;
    let out = corrector(
        mesh,
        &field.cells,
        &half,
        &grads,
        &betas,
        terrain,
        params,
        &model.spec.boundaries,
        dt,
        exec,
    )?;

    field.cells = out.cells;
    field.t = if hits_end { cfg.t_end } else { field.t + dt };
    field.step += 1;
    field.k_branches = codes;
    Ok(StepRecord {
        step: field.step,
        t: field.t,
        dt,
        mass: field.mass(mesh),
        max_wave_speed,
        max_velocity: field.max_velocity(params.h_dry),
        clamps: c1 + out.clamps,
        k_switches,
        boundary_outflow: out.boundary_outflow,
    })
}

/// `sqrt(|beta| h) + |u|` per cell.
pub fn cell_wave_speeds(cells: &[ConservedState], betas: &[BetaPair], h_dry: f64, exec: Execution) -> Vec<f64> {
    map_indexed(exec, cells.len(), |i| {
        (betas[i].magnitude() * cells[i].h.max(0.0)).sqrt() + primitive_from_conserved(&cells[i], h_dry).speed()
    })
}
