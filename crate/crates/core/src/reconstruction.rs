//! ENO-type piecewise linear reconstruction.
//!
//! For a cell `i` with edge neighbours `A, B, C`, each pair of neighbours
//! defines a plane through the three barycentre values; the candidate
//! gradient with the smallest Euclidean norm is kept. The gradient is then
//! zeroed at local extrema, and the depth gradient is zeroed whenever it
//! would make a depth trace negative at an edge midpoint.

use arrayvec::ArrayVec;

use crate::mesh::TriMesh;
use crate::par::{map_indexed, Execution};
use crate::physics::primitive_from_conserved;
use crate::state::{ConservedState, PrimitiveState, Vec2};

/// Slopes of `(h, hu, hv)` on one cell.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CellGradient {
    pub h: Vec2,
    pub hu: Vec2,
    pub hv: Vec2,
}

impl CellGradient {
    pub const ZERO: CellGradient = CellGradient {
        h: Vec2::ZERO,
        hu: Vec2::ZERO,
        hv: Vec2::ZERO,
    };

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.hu.is_finite() && self.hv.is_finite()
    }
}

pub type Candidates = ArrayVec<Vec2, 3>;

/// Gradient of the plane through three `(point, value)` pairs, or `None`
/// when the points are (numerically) collinear.
pub fn plane_gradient(p0: Vec2, v0: f64, p1: Vec2, v1: f64, p2: Vec2, v2: f64) -> Option<Vec2> {
    let (d1, d2) = (p1 - p0, p2 - p0);
    let det = d1.cross(d2);
    if !(det.abs() > 1e-12 * d1.norm() * d2.norm()) {
        return None;
    }
    let (f1, f2) = (v1 - v0, v2 - v0);
    Some(Vec2::new((f1 * d2.y - f2 * d1.y) / det, (d1.x * f2 - d2.x * f1) / det))
}

/// Candidate gradients of `values` on cell `i`, one per pair of
/// consecutive neighbours (`AiB`, `BiC`, `CiA`). Missing neighbours drop
/// the pairs they belong to.
pub fn candidate_gradients(mesh: &TriMesh, i: usize, values: &[f64]) -> Candidates {
    let cell = mesh.cell(i);
    let x0 = cell.barycenter;
    let mut out = Candidates::new();
    let nbrs = cell.neighbors;
    for k in 0..3 {
        let (Some(a), Some(b)) = (nbrs[k], nbrs[(k + 1) % 3]) else {
            continue;
        };
        let g = plane_gradient(
            x0,
            values[i],
            mesh.cell(a).barycenter,
            values[a],
            mesh.cell(b).barycenter,
            values[b],
        );
        if let Some(g) = g {
            out.push(g);
        }
    }
    out
}

/// Smallest-norm candidate. Exact norm ties go to the larger `|g_x|`,
/// then the larger `|g_y|`, then the earlier candidate. Empty gives zero.
///
/// The magnitude rule makes the choice commute with reflections in either
/// axis, so mirror-image cells (whose neighbours are listed in a different
/// order) pick mirror-image gradients.
pub fn eno_select(candidates: &[Vec2]) -> Vec2 {
    let mut best = match candidates.first() {
        Some(&g) => g,
        None => return Vec2::ZERO,
    };
    for &g in &candidates[1..] {
        let (n, nb) = (g.norm_sq(), best.norm_sq());
        let better = n < nb
            || (n == nb && (g.x.abs() > best.x.abs() || (g.x.abs() == best.x.abs() && g.y.abs() > best.y.abs())));
        if better {
            best = g;
        }
    }
    best
}

/// Zero the gradient when `value` is a local extremum of its neighbours.
pub fn limit_extremum(value: f64, neighbors: &[f64], grad: Vec2) -> Vec2 {
    if neighbors.is_empty() {
        return Vec2::ZERO;
    }
    let max = neighbors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = neighbors.iter().copied().fold(f64::INFINITY, f64::min);
    if value >= max || value <= min {
        Vec2::ZERO
    } else {
        grad
    }
}

/// Zero the depth gradient if any trace `h + grad . (x_q - x_i)` is negative.
pub fn positivity_guard(h: f64, grad: Vec2, center: Vec2, points: &[Vec2]) -> Vec2 {
    if points.iter().any(|&q| h + grad.dot(q - center) < 0.0) {
        Vec2::ZERO
    } else {
        grad
    }
}

/// Linear extrapolation to offset `dx` from the barycentre; the depth is
/// clamped at zero.
pub fn evaluate_trace(u: &ConservedState, g: &CellGradient, dx: Vec2) -> ConservedState {
    ConservedState::new(
        (u.h + g.h.dot(dx)).max(0.0),
        u.hu + g.hu.dot(dx),
        u.hv + g.hv.dot(dx),
    )
}

/// Edge-midpoint quadrature points of cell `i`.
pub fn quadrature_points(mesh: &TriMesh, i: usize) -> [Vec2; 3] {
    mesh.cell(i).edges.map(|e| mesh.edge(e).midpoint)
}

fn neighbor_values(mesh: &TriMesh, i: usize, values: &[f64]) -> ArrayVec<f64, 3> {
    mesh.cell(i).neighbors.iter().flatten().map(|&j| values[j]).collect()
}

/// ENO selection followed by the extremum limiter.
pub fn limited_gradient(mesh: &TriMesh, i: usize, values: &[f64]) -> Vec2 {
    let g = eno_select(&candidate_gradients(mesh, i, values));
    limit_extremum(values[i], &neighbor_values(mesh, i, values), g)
}

/// Limited, positivity-guarded gradients of the conserved variables on
/// every cell.
pub fn reconstruct(mesh: &TriMesh, field: &[ConservedState], exec: Execution) -> Vec<CellGradient> {
    let h: Vec<f64> = field.iter().map(|u| u.h).collect();
    let hu: Vec<f64> = field.iter().map(|u| u.hu).collect();
    let hv: Vec<f64> = field.iter().map(|u| u.hv).collect();
    map_indexed(exec, mesh.num_cells(), |i| {
        let gh = limited_gradient(mesh, i, &h);
        let gh = positivity_guard(h[i], gh, mesh.cell(i).barycenter, &quadrature_points(mesh, i));
        CellGradient {
            h: gh,
            hu: limited_gradient(mesh, i, &hu),
            hv: limited_gradient(mesh, i, &hv),
        }
    })
}

/// `(du/dx, dv/dy)` per cell from ENO-selected gradients of the
/// desingularised velocities. Only the signs are used downstream.
pub fn velocity_divergence_parts(
    mesh: &TriMesh,
    field: &[ConservedState],
    h_dry: f64,
    exec: Execution,
) -> Vec<(f64, f64)> {
    let prims: Vec<PrimitiveState> = field.iter().map(|u| primitive_from_conserved(u, h_dry)).collect();
    let u: Vec<f64> = prims.iter().map(|p| p.u).collect();
    let v: Vec<f64> = prims.iter().map(|p| p.v).collect();
    map_indexed(exec, mesh.num_cells(), |i| {
        let gu = eno_select(&candidate_gradients(mesh, i, &u));
        let gv = eno_select(&candidate_gradients(mesh, i, &v));
        (gu.x, gv.y)
    })
}
