//! Unstructured triangular meshes with the derived geometry used by the
//! finite-volume scheme.
//!
//! Local edge `k` of a cell joins its vertices `k` and `k + 1` (mod 3) and
//! `neighbors[k]` is the cell across that edge. Every edge is stored once;
//! its `left` cell is the lower cell id and its normal points out of `left`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::state::{sum3, Vec2};

/// Vertices closer than this are rejected as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Counterclockwise.
    pub vertices: [usize; 3],
    pub neighbors: [Option<usize>; 3],
    pub edges: [usize; 3],
    pub area: f64,
    pub barycenter: Vec2,
    /// Minimum barycenter-to-barycenter distance to edge neighbours.
    pub size: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// Ordered counterclockwise as seen from `left`.
    pub vertices: [usize; 2],
    pub left: usize,
    /// `None` on the domain boundary.
    pub right: Option<usize>,
    /// Unit normal pointing out of `left`.
    pub normal: Vec2,
    pub length: f64,
    pub midpoint: Vec2,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Immutable triangular mesh. Construct with [`TriMesh::new`],
/// [`load_mesh`] or [`generate_box_mesh`].
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec2>,
    cells: Vec<Cell>,
    edges: Vec<Edge>,
}

impl TriMesh {
    /// Build the full topology and geometry from vertex coordinates and
    /// counterclockwise triangles.
    pub fn new(vertices: Vec<Vec2>, triangles: &[[usize; 3]]) -> Result<TriMesh> {
        if triangles.is_empty() {
            return Err(Error::MeshParse {
                line: 0,
                msg: "mesh has no cells".into(),
            });
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MeshParse {
                    line: 0,
                    msg: format!("vertex {i} has non-finite coordinates"),
                });
            }
        }
        check_duplicates(&vertices)?;

        let mut cells = Vec::with_capacity(triangles.len());
        for (id, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::MeshParse {
                    line: 0,
                    msg: format!("cell {id} references missing vertex {bad}"),
                });
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let signed = 0.5 * sum3(a.x * (b.y - c.y), b.x * (c.y - a.y), c.x * (a.y - b.y));
            if !(signed > 0.0) {
                return Err(Error::InvertedCell {
                    cell: id,
                    signed_area: signed,
                });
            }
            cells.push(Cell {
                vertices: *tri,
                neighbors: [None; 3],
                edges: [usize::MAX; 3],
                area: signed,
                barycenter: Vec2::new(sum3(a.x, b.x, c.x), sum3(a.y, b.y, c.y)) * (1.0 / 3.0),
                size: 0.0,
            });
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(3 * cells.len() / 2 + 2);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(edges.capacity());
        for id in 0..cells.len() {
            for k in 0..3 {
                let a = cells[id].vertices[k];
                let b = cells[id].vertices[(k + 1) % 3];
                let key = (a.min(b), a.max(b));
                match lookup.get(&key) {
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let d = pb - pa;
                        let length = d.norm();
                        lookup.insert(key, edges.len());
                        cells[id].edges[k] = edges.len();
                        edges.push(Edge {
                            vertices: [a, b],
                            left: id,
                            right: None,
                            normal: Vec2::new(d.y / length, -d.x / length),
                            length,
                            midpoint: (pa + pb) * 0.5,
                        });
                    }
                    Some(&e) => {
                        let edge = &mut edges[e];
                        // A consistently oriented neighbour traverses the edge backwards.
                        if edge.right.is_some() || edge.vertices != [b, a] {
                            return Err(Error::NonManifoldEdge { a: key.0, b: key.1 });
                        }
                        edge.right = Some(id);
                        let left = edge.left;
                        cells[id].edges[k] = e;
                        cells[id].neighbors[k] = Some(left);
                        let lk = cells[left].edges.iter().position(|&x| x == e).unwrap();
                        cells[left].neighbors[lk] = Some(id);
                    }
                }
            }
        }

        let sizes: Vec<f64> = (0..cells.len())
            .map(|i| compute_cell_size(&vertices, &cells, i))
            .collect();
        for (c, s) in cells.iter_mut().zip(sizes) {
            c.size = s;
        }

        Ok(TriMesh {
            vertices,
            cells,
            edges,
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, i: usize) -> &Cell {
        &self.cells[i]
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    pub fn cell_points(&self, i: usize) -> [Vec2; 3] {
        self.cells[i].vertices.map(|v| self.vertices[v])
    }

    /// Outward unit normal of local edge `k` of cell `i`.
    pub fn outward_normal(&self, i: usize, k: usize) -> Vec2 {
        let e = &self.edges[self.cells[i].edges[k]];
        if e.left == i {
            e.normal
        } else {
            -e.normal
        }
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Point-in-triangle test with a small relative tolerance so points on
    /// edges count as inside.
    pub fn contains(&self, i: usize, p: Vec2) -> bool {
        let [a, b, c] = self.cell_points(i);
        let scale = self.cells[i].area;
        let tol = -1e-12 * scale;
        (b - a).cross(p - a) >= tol && (c - b).cross(p - b) >= tol && (a - c).cross(p - c) >= tol
    }

    /// Lowest-id cell containing `p`.
    pub fn locate(&self, p: Vec2) -> Option<usize> {
        (0..self.cells.len()).find(|&i| self.contains(i, p))
    }

    /// Serialize in the text format read by [`load_mesh`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.vertices.len(), self.cells.len());
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "{i} {:e} {:e}", v.x, v.y);
        }
        for (i, c) in self.cells.iter().enumerate() {
            let [a, b, d] = c.vertices;
            let _ = writeln!(s, "{i} {a} {b} {d}");
        }
        s
    }
}

/// Size of cell `i` (its `size` field).
pub fn cell_size(mesh: &TriMesh, i: usize) -> f64 {
    mesh.cells[i].size
}

fn compute_cell_size(vertices: &[Vec2], cells: &[Cell], i: usize) -> f64 {
    let c = &cells[i];
    let nearest = c
        .neighbors
        .iter()
        .flatten()
        .map(|&j| c.barycenter.dist(cells[j].barycenter))
        .fold(f64::INFINITY, f64::min);
    if nearest.is_finite() {
        return nearest;
    }
    // Isolated cell: inradius diameter 4A/P.
    let [a, b, d] = c.vertices.map(|v| vertices[v]);
    let perimeter = a.dist(b) + b.dist(d) + d.dist(a);
    4.0 * c.area / perimeter
}

fn check_duplicates(vertices: &[Vec2]) -> Result<()> {
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a].x.total_cmp(&vertices[b].x));
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if vertices[j].x - vertices[i].x > DUPLICATE_TOL {
                break;
            }
            if vertices[i].dist(vertices[j]) <= DUPLICATE_TOL {
                return Err(Error::DuplicateVertex {
                    first: i.min(j),
                    second: i.max(j),
                });
            }
        }
    }
    Ok(())
}

/// Parse the node/element text format:
///
/// ```text
/// NV NC
/// id x y        (NV lines)
/// id v0 v1 v2   (NC lines, counterclockwise)
/// ```
///
/// Indices are 0-based; `#` starts a comment.
pub fn load_mesh(text: &str) -> Result<TriMesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let err = |line: usize, msg: String| Error::MeshParse { line, msg };

    let (hline, header) = lines.next().ok_or_else(|| err(0, "empty document".into()))?;
    let counts = parse_fields::<usize>(header, 2).map_err(|m| err(hline, m))?;
    let (nv, nc) = (counts[0], counts[1]);
    if nc == 0 {
        return Err(err(hline, "mesh has no cells".into()));
    }

    let mut vertices = vec![None; nv];
    for _ in 0..nv {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("expected {nv} vertex lines")))?;
        let f = parse_fields::<f64>(l, 3).map_err(|m| err(n, m))?;
        let id = index_field(f[0], nv).map_err(|m| err(n, m))?;
        if vertices[id].replace(Vec2::new(f[1], f[2])).is_some() {
            return Err(err(n, format!("vertex id {id} repeated")));
        }
    }

    let mut triangles = vec![None; nc];
    for _ in 0..nc {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("expected {nc} cell lines")))?;
        let f = parse_fields::<usize>(l, 4).map_err(|m| err(n, m))?;
        if f[0] >= nc {
            return Err(err(n, format!("cell id {} out of range", f[0])));
        }
        if let Some(&v) = f[1..].iter().find(|&&v| v >= nv) {
            return Err(err(n, format!("vertex index {v} out of range")));
        }
        if triangles[f[0]].replace([f[1], f[2], f[3]]).is_some() {
            return Err(err(n, format!("cell id {} repeated", f[0])));
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(err(n, "trailing data".into()));
    }

    let vertices: Vec<Vec2> = vertices.into_iter().map(Option::unwrap).collect();
    let triangles: Vec<[usize; 3]> = triangles.into_iter().map(Option::unwrap).collect();
    TriMesh::new(vertices, &triangles)
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(format!("expected {n} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`")))
        .collect()
}

fn index_field(v: f64, n: usize) -> std::result::Result<usize, String> {
    if v >= 0.0 && v.fract() == 0.0 && (v as usize) < n {
        Ok(v as usize)
    } else {
        Err(format!("index {v} out of range"))
    }
}

/// Structured triangulation of a rectangle with `2 * nx * ny` cells.
///
/// Diagonals alternate in a checkerboard; the pattern in the upper half is
/// the mirror of the lower half, so a range symmetric about `y = 0` gives a
/// mesh that maps onto itself under `y -> -y` (exactly when `ny` is even).
/// Coordinates are computed from the range centre so mirrored vertices are
/// bitwise negations.
pub fn generate_box_mesh(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Result<TriMesh> {
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    if nx == 0 || ny == 0 {
        return Err(Error::DegenerateRange(format!("nx = {nx}, ny = {ny}")));
    }
    if !(x1 > x0) || !(y1 > y0) || !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
        return Err(Error::DegenerateRange(format!("[{x0}, {x1}] x [{y0}, {y1}]")));
    }
    let coord = |lo: f64, hi: f64, k: usize, n: usize| {
        let centre = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let t = (2 * k as i64 - n as i64) as f64 / n as f64;
        match k {
            0 => lo,
            k if k == n => hi,
            _ => centre + half * t,
        }
    };
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = coord(y0, y1, j, ny);
        for i in 0..=nx {
            vertices.push(Vec2::new(coord(x0, x1, i, nx), y));
        }
    }
    let v = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let slash = if 2 * j < ny {
                (i + j) % 2 == 0
            } else {
                !(i + ny - 1 - j).is_multiple_of(2)
            };
            if slash {
                triangles.push([v(i, j), v(i + 1, j), v(i + 1, j + 1)]);
                triangles.push([v(i, j), v(i + 1, j + 1), v(i, j + 1)]);
            } else {
                triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
                triangles.push([v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)]);
            }
        }
    }
    TriMesh::new(vertices, &triangles)
}
