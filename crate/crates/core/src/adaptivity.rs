//! Jump-based error indicator and conservative h-adaptation by
//! newest-vertex bisection.
//!
//! Every element stores its vertices with the newest vertex first, so its
//! refinement edge is `(v1, v2)`. Bisecting `(a, b, c)` at the midpoint `m`
//! of `(b, c)` gives the children `(m, a, b)` and `(m, c, a)`, both
//! counterclockwise with `m` as their newest vertex. Closure refines a
//! neighbour first whenever it does not share the refinement edge, which
//! keeps the mesh conforming.
//!
//! Refinement copies the parent average into both children; coarsening
//! replaces a complete patch around a midpoint vertex by its parents with
//! area-weighted averages. Both preserve `sum h |tau|` up to roundoff.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::par::{map_indexed, Execution};
use crate::reconstruction::CellGradient;
use crate::state::{ConservedState, Vec2};
use crate::timestepper::total_mass;

/// Per-cell `E = sum over h, hu, hv` of
/// `|tau| * sum_edges len * (|value jump| / sqrt|tau| + |gradient jump|)`.
///
/// Jumps are taken between the two cells' linear reconstructions at edge
/// midpoints. Boundary edges contribute nothing.
pub fn error_indicator(
    mesh: &TriMesh,
    field: &[ConservedState],
    grads: &[CellGradient],
    exec: Execution,
) -> Vec<f64> {
    // (value jump, gradient jump) per edge, shared by both cells.
    let jumps: Vec<(f64, f64)> = map_indexed(exec, mesh.edges().len(), |id| {
        let e = mesh.edge(id);
        let Some(r) = e.right else { return (0.0, 0.0) };
        let l = e.left;
        let (dl, dr) = (
            e.midpoint - mesh.cell(l).barycenter,
            e.midpoint - mesh.cell(r).barycenter,
        );
        let (ul, ur) = (field[l].as_array(), field[r].as_array());
        let (gl, gr) = (grad_array(&grads[l]), grad_array(&grads[r]));
        let mut value = 0.0;
        let mut slope = 0.0;
        for k in 0..3 {
            value += ((ul[k] + gl[k].dot(dl)) - (ur[k] + gr[k].dot(dr))).abs();
            slope += (gl[k] - gr[k]).norm();
        }
        (value, slope)
    });
    map_indexed(exec, mesh.num_cells(), |i| {
        let c = mesh.cell(i);
        let root = c.area.sqrt();
        let sum: f64 = c
            .edges
            .iter()
            .map(|&id| {
                let (value, slope) = jumps[id];
                mesh.edge(id).length * (value / root + slope)
            })
            .sum();
        c.area * sum
    })
}

fn grad_array(g: &CellGradient) -> [Vec2; 3] {
    [g.h, g.hu, g.hv]
}

/// Marking thresholds, level limits and cadence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptConfig {
    /// Refine cells with `E > refine_fraction * max E`.
    pub refine_fraction: f64,
    /// Coarsen patches whose cells all have `E < coarsen_fraction * max E`.
    pub coarsen_fraction: f64,
    pub max_level: u32,
    pub min_level: u32,
    /// Steps between adaptation events.
    pub adapt_interval: usize,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        AdaptConfig {
            refine_fraction: 0.1,
            coarsen_fraction: 0.01,
            max_level: 2,
            min_level: 0,
            adapt_interval: 5,
        }
    }
}

impl AdaptConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.refine_fraction) || !unit(self.coarsen_fraction) {
            return Err(Error::Config(format!(
                "adapt fractions must lie in (0, 1): refine = {}, coarsen = {}",
                self.refine_fraction, self.coarsen_fraction
            )));
        }
        if self.coarsen_fraction >= self.refine_fraction {
            return Err(Error::Config("coarsen_fraction must be below refine_fraction".into()));
        }
        if self.min_level > self.max_level {
            return Err(Error::Config("min_level exceeds max_level".into()));
        }
        if self.adapt_interval == 0 {
            return Err(Error::Config("adapt_interval must be positive".into()));
        }
        Ok(())
    }
}

/// Cells flagged for refinement and coarsening (disjoint, ascending).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Marks {
    pub refine: Vec<usize>,
    pub coarsen: Vec<usize>,
}

/// Threshold marking against the largest indicator value. `levels` gives
/// each cell's bisection depth.
pub fn mark(indicator: &[f64], levels: &[u32], config: &AdaptConfig) -> Marks {
    let max = indicator.iter().copied().fold(0.0, f64::max);
    let mut marks = Marks::default();
    if !(max > 0.0) {
        return marks;
    }
    let (hi, lo) = (config.refine_fraction * max, config.coarsen_fraction * max);
    for (i, (&e, &level)) in indicator.iter().zip(levels).enumerate() {
        if e > hi && level < config.max_level {
            marks.refine.push(i);
        } else if e < lo && level > config.min_level {
            marks.coarsen.push(i);
        }
    }
    marks
}

#[derive(Clone, Debug)]
struct Element {
    /// Newest vertex first; the refinement edge is `(verts[1], verts[2])`.
    verts: [usize; 3],
    parent: Option<usize>,
    children: Option<[usize; 2]>,
    level: u32,
    active: bool,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Outcome of one adaptation operation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdaptReport {
    pub cells_before: usize,
    pub cells_after: usize,
    /// Bisections performed, closure included.
    pub refined: usize,
    /// Parent elements restored.
    pub coarsened: usize,
    /// Marked cells left alone (level limits or incomplete patches).
    pub skipped: usize,
    pub mass_before: f64,
    pub mass_after: f64,
}

impl AdaptReport {
    pub fn relative_mass_change(&self) -> f64 {
        let scale = self.mass_before.abs().max(f64::MIN_POSITIVE);
        (self.mass_after - self.mass_before).abs() / scale
    }

    pub fn log_line(&self) -> String {
        format!(
            "adapt cells {} -> {} refined {} coarsened {} skipped {} mass {:.8e} -> {:.8e}",
            self.cells_before,
            self.cells_after,
            self.refined,
            self.coarsened,
            self.skipped,
            self.mass_before,
            self.mass_after
        )
    }
}

/// Bisection forest over a base mesh. Active elements, in ascending id
/// order, are the cells of [`AdaptiveMesh::mesh`].
#[derive(Clone, Debug)]
pub struct AdaptiveMesh {
    vertices: Vec<Vec2>,
    elements: Vec<Element>,
    /// Active elements incident to each edge.
    edge_map: HashMap<(usize, usize), [Option<usize>; 2]>,
    /// Midpoint vertex created on each bisected edge.
    midpoints: HashMap<(usize, usize), usize>,
    max_level: u32,
    active: Vec<usize>,
    mesh: TriMesh,
}

impl AdaptiveMesh {
    /// Wraps `mesh` as level 0. Each cell's refinement edge is its longest
    /// edge (the first one on ties), which makes the structured box mesh
    /// compatibly divisible along its diagonals.
    pub fn new(mesh: &TriMesh, max_level: u32) -> Result<AdaptiveMesh> {
        let pts = mesh.vertices();
        let elements = mesh
            .cells()
            .iter()
            .map(|cell| {
                let v = cell.vertices;
                let [a, b, c] = v;
                let lens = [pts[b].dist(pts[c]), pts[c].dist(pts[a]), pts[a].dist(pts[b])];
                let k = (0..3).fold(0, |k, j| if lens[j] > lens[k] { j } else { k });
                let verts = [v[k], v[(k + 1) % 3], v[(k + 2) % 3]];
                Element {
                    verts,
                    parent: None,
                    children: None,
                    level: 0,
                    active: true,
                }
            })
            .collect();
        let mut adaptive = AdaptiveMesh {
            vertices: pts.to_vec(),
            elements,
            edge_map: HashMap::new(),
            midpoints: HashMap::new(),
            max_level,
            active: Vec::new(),
            mesh: mesh.clone(),
        };
        for id in 0..adaptive.elements.len() {
            adaptive.link(id);
        }
        adaptive.active = (0..adaptive.elements.len()).collect();
        Ok(adaptive)
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    /// Bisection depth of every cell.
    pub fn levels(&self) -> Vec<u32> {
        self.active.iter().map(|&id| self.elements[id].level).collect()
    }

    fn link(&mut self, id: usize) {
        let v = self.elements[id].verts;
        for k in 0..3 {
            let slot = self.edge_map.entry(edge_key(v[k], v[(k + 1) % 3])).or_insert([None, None]);
            if slot[0].is_none() {
                slot[0] = Some(id);
            } else {
                slot[1] = Some(id);
            }
        }
    }

    fn unlink(&mut self, id: usize) {
        let v = self.elements[id].verts;
        for k in 0..3 {
            let key = edge_key(v[k], v[(k + 1) % 3]);
            if let Some(slot) = self.edge_map.get_mut(&key) {
                for s in slot.iter_mut() {
                    if *s == Some(id) {
                        *s = None;
                    }
                }
                if slot.iter().all(Option::is_none) {
                    self.edge_map.remove(&key);
                }
            }
        }
    }

    fn neighbor_across(&self, id: usize, a: usize, b: usize) -> Option<usize> {
        let slot = self.edge_map.get(&edge_key(a, b))?;
        slot.iter().flatten().copied().find(|&n| n != id)
    }

    fn bisect(&mut self, id: usize) {
        let [a, b, c] = self.elements[id].verts;
        let key = edge_key(b, c);
        let m = match self.midpoints.get(&key) {
            Some(&m) => m,
            None => {
                let (pb, pc) = (self.vertices[b], self.vertices[c]);
                self.vertices.push(Vec2::new(0.5 * (pb.x + pc.x), 0.5 * (pb.y + pc.y)));
                let m = self.vertices.len() - 1;
                self.midpoints.insert(key, m);
                m
            }
        };
        self.unlink(id);
        let level = self.elements[id].level + 1;
        let first = self.elements.len();
        for verts in [[m, a, b], [m, c, a]] {
            self.elements.push(Element {
                verts,
                parent: Some(id),
                children: None,
                level,
                active: true,
            });
        }
        self.link(first);
        self.link(first + 1);
        let e = &mut self.elements[id];
        e.active = false;
        e.children = Some([first, first + 1]);
    }

    /// Bisects `id` together with whatever closure requires. Returns the
    /// number of bisections, or `None` if closure would exceed `max_level`.
    fn refine_element(&mut self, id: usize) -> Option<usize> {
        let mut count = 0;
        while self.elements[id].active {
            if self.elements[id].level >= self.max_level {
                return None;
            }
            let [_, b, c] = self.elements[id].verts;
            match self.neighbor_across(id, b, c) {
                None => {
                    self.bisect(id);
                    count += 1;
                }
                Some(n) => {
                    let [_, nb, nc] = self.elements[n].verts;
                    if edge_key(nb, nc) == edge_key(b, c) {
                        self.bisect(id);
                        self.bisect(n);
                        count += 2;
                    } else {
                        count += self.refine_element(n)?;
                    }
                }
            }
        }
        Some(count)
    }

    /// Rebuilds the cell mesh from the active elements, dropping vertices
    /// no longer referenced. Surviving vertices keep their relative order.
    fn rebuild(&mut self) -> Result<()> {
        self.active = (0..self.elements.len()).filter(|&id| self.elements[id].active).collect();
        let mut used = vec![false; self.vertices.len()];
        for &id in &self.active {
            for &v in &self.elements[id].verts {
                used[v] = true;
            }
        }
        let mut index = vec![usize::MAX; self.vertices.len()];
        let mut points = Vec::new();
        for (v, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            index[v] = points.len();
            points.push(self.vertices[v]);
        }
        let triangles: Vec<[usize; 3]> = self
            .active
            .iter()
            .map(|&id| self.elements[id].verts.map(|v| index[v]))
            .collect();
        self.mesh = TriMesh::new(points, &triangles)?;
        Ok(())
    }

    fn element_states(&self, cells: &[ConservedState]) -> HashMap<usize, ConservedState> {
        self.active.iter().copied().zip(cells.iter().copied()).collect()
    }

    fn check_len(&self, cells: &[ConservedState]) -> Result<()> {
        if cells.len() != self.active.len() {
            return Err(Error::Config(format!(
                "field has {} cells, mesh has {}",
                cells.len(),
                self.active.len()
            )));
        }
        Ok(())
    }

    /// Bisects the marked cells (with closure) and prolongs the field by
    /// copying parent averages.
    pub fn refine(&mut self, cells: &[ConservedState], marked: &[usize]) -> Result<(Vec<ConservedState>, AdaptReport)> {
        self.check_len(cells)?;
        let mut report = AdaptReport {
            cells_before: cells.len(),
            mass_before: total_mass(&self.mesh, cells),
            ..AdaptReport::default()
        };
        let mut states = self.element_states(cells);
        let targets: Vec<usize> = marked.iter().filter_map(|&i| self.active.get(i).copied()).collect();
        for id in targets {
            if !self.elements[id].active {
                continue;
            }
            // Closure only bisects coarser neighbours, so it cannot overflow
            // when the marked cell itself is below the limit.
            match self.refine_element(id) {
                Some(n) => report.refined += n,
                None => report.skipped += 1,
            }
        }
        if report.refined > 0 {
            // Children inherit their parent's state, resolved top-down.
            for id in 0..self.elements.len() {
                if let (None, Some(p)) = (states.get(&id), self.elements[id].parent) {
                    if let Some(&s) = states.get(&p) {
                        states.insert(id, s);
                    }
                }
            }
            self.rebuild()?;
        }
        let out = self.collect(&states)?;
        report.cells_after = out.len();
        report.mass_after = total_mass(&self.mesh, &out);
        Ok((out, report))
    }

    /// Merges complete patches of marked cells back into their parents with
    /// area-weighted averages. A patch is every active element around one
    /// bisection midpoint: two children of a boundary parent, or four of an
    /// interior pair. Marked cells outside a complete patch are skipped.
    pub fn coarsen(&mut self, cells: &[ConservedState], marked: &[usize]) -> Result<(Vec<ConservedState>, AdaptReport)> {
        self.check_len(cells)?;
        let mut report = AdaptReport {
            cells_before: cells.len(),
            mass_before: total_mass(&self.mesh, cells),
            ..AdaptReport::default()
        };
        let mut states = self.element_states(cells);
        let mut is_marked = vec![false; self.elements.len()];
        for &i in marked {
            if let Some(&id) = self.active.get(i) {
                is_marked[id] = true;
            }
        }
        // Active elements around each vertex, in ascending id order.
        let mut around: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &id in &self.active {
            for &v in &self.elements[id].verts {
                around.entry(v).or_default().push(id);
            }
        }
        let mut merged = vec![false; self.elements.len()];
        for (&m, patch) in &around {
            let Some(parents) = self.patch_parents(m, patch) else { continue };
            if !patch.iter().all(|&id| is_marked[id] && !merged[id]) {
                continue;
            }
            for &id in patch {
                merged[id] = true;
            }
            for &p in &parents {
                let kids = self.elements[p].children.expect("patch parent has children");
                let (a0, a1) = (self.area(kids[0]), self.area(kids[1]));
                let (s0, s1) = (states[&kids[0]], states[&kids[1]]);
                let total = a0 + a1;
                let avg = (s0 * a0 + s1 * a1) * (1.0 / total);
                for k in kids {
                    self.unlink(k);
                    self.elements[k].active = false;
                    states.remove(&k);
                }
                let e = &mut self.elements[p];
                e.active = true;
                e.children = None;
                let [_, b, c] = e.verts;
                self.midpoints.remove(&edge_key(b, c));
                self.link(p);
                states.insert(p, avg);
                report.coarsened += 1;
            }
        }
        report.skipped = marked.iter().filter(|&&i| self.active.get(i).is_some_and(|&id| !merged[id])).count();
        if report.coarsened > 0 {
            self.rebuild()?;
        }
        let out = self.collect(&states)?;
        report.cells_after = out.len();
        report.mass_after = total_mass(&self.mesh, &out);
        Ok((out, report))
    }

    /// Parents whose bisection created `m`, if `patch` (all active
    /// elements around `m`) is exactly their children.
    fn patch_parents(&self, m: usize, patch: &[usize]) -> Option<Vec<usize>> {
        if patch.len() != 2 && patch.len() != 4 {
            return None;
        }
        let mut parents: Vec<usize> = Vec::with_capacity(2);
        for &id in patch {
            let e = &self.elements[id];
            if e.verts[0] != m {
                return None;
            }
            let p = e.parent?;
            if !parents.contains(&p) {
                parents.push(p);
            }
        }
        if parents.len() * 2 != patch.len() {
            return None;
        }
        for &p in &parents {
            let kids = self.elements[p].children?;
            if !kids.iter().all(|k| patch.contains(k)) {
                return None;
            }
        }
        Some(parents)
    }

    fn area(&self, id: usize) -> f64 {
        let [a, b, c] = self.elements[id].verts.map(|v| self.vertices[v]);
        0.5 * (b - a).cross(c - a)
    }

    fn collect(&self, states: &HashMap<usize, ConservedState>) -> Result<Vec<ConservedState>> {
        self.active
            .iter()
            .map(|id| {
                states
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::Config(format!("no state for element {id}")))
            })
            .collect()
    }

    /// One adaptation event: mark, coarsen, then refine. Refinement marks
    /// survive coarsening because the two sets are disjoint.
    pub fn adapt(
        &mut self,
        cells: &[ConservedState],
        indicator: &[f64],
        config: &AdaptConfig,
    ) -> Result<(Vec<ConservedState>, AdaptReport)> {
        self.check_len(cells)?;
        let marks = mark(indicator, &self.levels(), config);
        let refine_ids: Vec<usize> = marks.refine.iter().map(|&i| self.active[i]).collect();
        let (coarse, c) = self.coarsen(cells, &marks.coarsen)?;
        let refine_cells: Vec<usize> = refine_ids
            .iter()
            .filter_map(|id| self.active.binary_search(id).ok())
            .collect();
        let (fine, r) = self.refine(&coarse, &refine_cells)?;
        let report = AdaptReport {
            cells_before: c.cells_before,
            cells_after: r.cells_after,
            refined: r.refined,
            coarsened: c.coarsened,
            skipped: c.skipped + r.skipped,
            mass_before: c.mass_before,
            mass_after: r.mass_after,
        };
        Ok((fine, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;
    use approx::assert_relative_eq;

    fn two_cells() -> TriMesh {
        let v = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        TriMesh::new(v, &[[0, 1, 2], [0, 2, 3]]).unwrap()
    }

    fn zero_grads(n: usize) -> Vec<CellGradient> {
        vec![CellGradient::ZERO; n]
    }

    fn boundary_length(mesh: &TriMesh) -> f64 {
        mesh.edges().iter().filter(|e| e.is_boundary()).map(|e| e.length).sum()
    }

    fn h_field(n: usize, f: impl Fn(usize) -> f64) -> Vec<ConservedState> {
        (0..n).map(|i| ConservedState::new(f(i), 0.0, 0.0)).collect()
    }

    #[test]
    fn indicator_vanishes_on_constant_field() {
        let mesh = generate_box_mesh((0.0, 2.0), (0.0, 1.0), 4, 2).unwrap();
        let n = mesh.num_cells();
        let field = vec![ConservedState::new(1.3, 0.2, -0.4); n];
        let e = error_indicator(&mesh, &field, &zero_grads(n), Execution::Sequential);
        assert!(e.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn indicator_vanishes_on_affine_field() {
        let mesh = generate_box_mesh((0.0, 2.0), (0.0, 1.0), 4, 2).unwrap();
        let g = Vec2::new(0.5, -0.25);
        let field: Vec<_> = mesh
            .cells()
            .iter()
            .map(|c| ConservedState::new(1.0 + g.dot(c.barycenter), 0.0, 0.0))
            .collect();
        let grads = vec![
            CellGradient {
                h: g,
                hu: Vec2::ZERO,
                hv: Vec2::ZERO
            };
            mesh.num_cells()
        ];
        let e = error_indicator(&mesh, &field, &grads, Execution::Sequential);
        assert!(e.iter().all(|&x| x.abs() < 1e-14), "{e:?}");
    }

    #[test]
    fn indicator_single_edge_jump() {
        let mesh = two_cells();
        let field = h_field(2, |i| if i == 0 { 1.0 } else { 0.0 });
        let e = error_indicator(&mesh, &field, &zero_grads(2), Execution::Sequential);
        let (area, ds) = (0.5, 2f64.sqrt());
        for x in e {
            assert_relative_eq!(x, area * ds / area.sqrt(), max_relative = 1e-14);
        }
    }

    #[test]
    fn mark_examples() {
        let config = AdaptConfig {
            refine_fraction: 0.5,
            ..AdaptConfig::default()
        };
        let levels = [1u32; 4];
        assert_eq!(mark(&[0.0; 4], &levels, &config), Marks::default());
        let m = mark(&[0.1, 5.0, 0.2, 0.3], &levels, &config);
        assert_eq!(m.refine, vec![1]);
        let m = mark(&[2.0; 4], &levels, &config);
        assert_eq!(m.refine, vec![0, 1, 2, 3]);
        assert!(m.coarsen.is_empty());
    }

    #[test]
    fn mark_respects_levels() {
        let config = AdaptConfig {
            max_level: 2,
            min_level: 1,
            ..AdaptConfig::default()
        };
        let m = mark(&[1.0, 1.0, 0.0, 0.0], &[2, 1, 1, 2], &config);
        assert_eq!(m.refine, vec![1]);
        assert_eq!(m.coarsen, vec![3]);
    }

    #[test]
    fn config_validation() {
        assert!(AdaptConfig::default().validate().is_ok());
        let bad = AdaptConfig {
            coarsen_fraction: 0.5,
            refine_fraction: 0.4,
            ..AdaptConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AdaptConfig {
            min_level: 3,
            max_level: 2,
            ..AdaptConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn refine_single_triangle() {
        let mesh = TriMesh::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)], &[[0, 1, 2]]).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 3).unwrap();
        let cells = [ConservedState::new(0.7, 0.1, 0.2)];
        let (out, report) = am.refine(&cells, &[0]).unwrap();
        assert_eq!(out, vec![cells[0]; 2]);
        assert_eq!(report.refined, 1);
        assert_eq!(am.levels(), vec![1, 1]);
        // The longest edge is split, so both children have area 1/2.
        for c in am.mesh().cells() {
            assert_relative_eq!(c.area, 0.5, max_relative = 1e-15);
        }
        assert!((report.mass_after - report.mass_before).abs() <= 1e-15 * report.mass_before);
    }

    #[test]
    fn closure_bisects_neighbor() {
        let mesh = generate_box_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 4).unwrap();
        let cells = h_field(8, |_| 1.0);
        // Refine one cell twice; the second round needs closure across its
        // new refinement edge.
        let (cells, first) = am.refine(&cells, &[0]).unwrap();
        assert_eq!(first.refined, 2);
        let (_, second) = am.refine(&cells, &[0]).unwrap();
        assert!(second.refined > 1, "{second:?}");
        assert_relative_eq!(boundary_length(am.mesh()), 4.0, max_relative = 1e-14);
        assert_relative_eq!(am.mesh().total_area(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn empty_marks_change_nothing() {
        let mesh = generate_box_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 2).unwrap();
        let cells = h_field(8, |i| i as f64);
        let (out, r) = am.refine(&cells, &[]).unwrap();
        assert_eq!(out, cells);
        assert_eq!(r.cells_after, 8);
        let (out, r) = am.coarsen(&cells, &[]).unwrap();
        assert_eq!(out, cells);
        assert_eq!(r.coarsened, 0);
        assert_eq!(am.mesh().vertices(), mesh.vertices());
    }

    #[test]
    fn coarsen_averages_by_area() {
        let mesh = TriMesh::new(vec![Vec2::new(0.0, 0.0), Vec2::new(2.0, 0.0), Vec2::new(0.0, 1.0)], &[[0, 1, 2]]).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 1).unwrap();
        let (_, _) = am.refine(&[ConservedState::ZERO], &[0]).unwrap();
        let kids = [ConservedState::new(1.0, 0.0, 0.0), ConservedState::new(3.0, 0.0, 0.0)];
        let (out, r) = am.coarsen(&kids, &[0, 1]).unwrap();
        assert_eq!(r.coarsened, 1);
        assert_eq!(out, vec![ConservedState::new(2.0, 0.0, 0.0)]);
        assert_eq!(am.levels(), vec![0]);
    }

    #[test]
    fn coarsen_skips_incomplete_patch() {
        let mesh = generate_box_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 2).unwrap();
        let (cells, _) = am.refine(&h_field(8, |_| 1.0), &[0]).unwrap();
        let kids: Vec<usize> = (0..cells.len()).filter(|&i| am.levels()[i] == 1).collect();
        assert_eq!(kids.len(), 4);
        let (out, r) = am.coarsen(&cells, &kids[..3]).unwrap();
        assert_eq!(r.coarsened, 0);
        assert_eq!(r.skipped, 3);
        assert_eq!(out, cells);
    }

    #[test]
    fn coarsen_after_refine_restores_field() {
        let mesh = generate_box_mesh((0.0, 3.0), (-1.0, 1.0), 3, 2).unwrap();
        let mut am = AdaptiveMesh::new(&mesh, 2).unwrap();
        let cells: Vec<_> = (0..mesh.num_cells())
            .map(|i| ConservedState::new(1.0 + i as f64 * 0.1, 0.3 - i as f64 * 0.05, 0.0))
            .collect();
        let (fine, _) = am.refine(&cells, &[1, 4, 7]).unwrap();
        let all: Vec<usize> = (0..fine.len()).collect();
        let (back, _) = am.coarsen(&fine, &all).unwrap();
        assert_eq!(back.len(), cells.len());
        for (a, b) in back.iter().zip(&cells) {
            assert!(a.max_abs_diff(b) <= 1e-15 * (1.0 + b.h.abs()), "{a:?} vs {b:?}");
        }
        assert_eq!(am.levels(), vec![0; cells.len()]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn adaptation_conserves_mass_and_conformity(
                seeds in proptest::collection::vec((0usize..1000, any::<bool>()), 1..40),
                depths in proptest::collection::vec(0.0f64..3.0, 48),
            ) {
                let mesh = generate_box_mesh((0.0, 4.0), (-1.5, 1.5), 4, 6).unwrap();
                let mut am = AdaptiveMesh::new(&mesh, 3).unwrap();
                let mut cells: Vec<_> = depths.iter().map(|&h| ConservedState::new(h, 0.5 * h, -h)).collect();
                for (seed, refine) in seeds {
                    let n = cells.len();
                    let marked: Vec<usize> = (0..n).filter(|i| (i * 7 + seed) % 5 == 0).collect();
                    let (next, report) = if refine {
                        let levels = am.levels();
                        let below: Vec<usize> = marked.into_iter().filter(|&i| levels[i] < 3).collect();
                        am.refine(&cells, &below).unwrap()
                    } else {
                        am.coarsen(&cells, &marked).unwrap()
                    };
                    prop_assert!(report.relative_mass_change() <= 1e-13, "{report:?}");
                    cells = next;
                    prop_assert_eq!(cells.len(), am.mesh().num_cells());
                    prop_assert!((boundary_length(am.mesh()) - 14.0).abs() < 1e-12);
                    prop_assert!((am.mesh().total_area() - 12.0).abs() < 1e-12);
                }
            }

            #[test]
            fn indicator_is_local(cell in 0usize..48, bump in 0.1f64..2.0) {
                let mesh = generate_box_mesh((0.0, 4.0), (-1.5, 1.5), 4, 6).unwrap();
                let n = mesh.num_cells();
                let base = h_field(n, |i| 1.0 + (i % 5) as f64 * 0.1);
                let mut changed = base.clone();
                changed[cell].h += bump;
                let a = error_indicator(&mesh, &base, &zero_grads(n), Execution::Sequential);
                let b = error_indicator(&mesh, &changed, &zero_grads(n), Execution::Sequential);
                let near: Vec<usize> = std::iter::once(cell).chain(mesh.cell(cell).neighbors.iter().flatten().copied()).collect();
                for i in 0..n {
                    if !near.contains(&i) {
                        prop_assert_eq!(a[i], b[i]);
                    }
                }
            }

            #[test]
            fn indicator_is_homogeneous(scale in 0.1f64..10.0) {
                let mesh = generate_box_mesh((0.0, 4.0), (-1.5, 1.5), 4, 6).unwrap();
                let n = mesh.num_cells();
                let base = h_field(n, |i| (i % 3) as f64);
                let scaled = h_field(n, |i| scale * (i % 3) as f64);
                let a = error_indicator(&mesh, &base, &zero_grads(n), Execution::Sequential);
                let b = error_indicator(&mesh, &scaled, &zero_grads(n), Execution::Sequential);
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!((y - scale * x).abs() <= 1e-12 * (1.0 + y.abs()));
                }
            }
        }
    }
}
