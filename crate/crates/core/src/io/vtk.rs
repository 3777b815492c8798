//! Legacy ASCII VTK unstructured-grid frames.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::physics::primitive_from_conserved;
use crate::state::ConservedState;

use super::fmt9;

/// VTK cell type code for a linear triangle.
const VTK_TRIANGLE: u8 = 5;

/// One output snapshot.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub t: f64,
    pub mesh: &'a TriMesh,
    pub cells: &'a [ConservedState],
    /// Error indicator per cell.
    pub indicator: &'a [f64],
    pub h_dry: f64,
}

impl Frame<'_> {
    pub fn validate(&self) -> Result<()> {
        let n = self.mesh.num_cells();
        if self.cells.len() != n || self.indicator.len() != n {
            return Err(Error::Config(format!(
                "frame arrays have lengths {} and {} for {n} cells",
                self.cells.len(),
                self.indicator.len()
            )));
        }
        Ok(())
    }
}

fn scalars(out: &mut String, name: &str, values: impl Iterator<Item = f64>) {
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        out.push_str(&fmt9(v));
        out.push('\n');
    }
}

/// Renders a frame with cell arrays `h`, `u`, `v` and `E_tau`.
pub fn render_vtk(frame: &Frame) -> Result<String> {
    frame.validate()?;
    let mesh = frame.mesh;
    let n = mesh.num_cells();
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "granular avalanche t = {}", fmt9(frame.t));
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.vertices().len());
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} 0", fmt9(p.x), fmt9(p.y));
    }
    let _ = writeln!(out, "CELLS {n} {}", 4 * n);
    for c in mesh.cells() {
        let [a, b, d] = c.vertices;
        let _ = writeln!(out, "3 {a} {b} {d}");
    }
    let _ = writeln!(out, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(out, "{VTK_TRIANGLE}");
    }
    let _ = writeln!(out, "CELL_DATA {n}");
    let prim: Vec<_> = frame.cells.iter().map(|u| primitive_from_conserved(u, frame.h_dry)).collect();
    scalars(&mut out, "h", frame.cells.iter().map(|u| u.h));
    scalars(&mut out, "u", prim.iter().map(|p| p.u));
    scalars(&mut out, "v", prim.iter().map(|p| p.v));
    scalars(&mut out, "E_tau", frame.indicator.iter().copied());
    Ok(out)
}

pub fn write_vtk(frame: &Frame, path: &Path) -> Result<()> {
    std::fs::write(path, render_vtk(frame)?).map_err(|e| Error::io(path, e))
}

/// Contents of a legacy VTK file as written by [`write_vtk`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<u8>,
    pub cell_data: BTreeMap<String, Vec<f64>>,
}

fn parse_err(msg: impl Into<String>) -> Error {
    Error::VtkParse(msg.into())
}

/// Reads the ASCII unstructured-grid subset produced by [`write_vtk`].
pub fn parse_vtk(text: &str) -> Result<VtkData> {
    let mut tokens = text.lines().skip(2).flat_map(str::split_whitespace);
    let mut next = |what: &str| tokens.next().ok_or_else(|| parse_err(format!("unexpected end of file reading {what}")));
    fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
        s.parse().map_err(|_| parse_err(format!("bad number `{s}`")))
    }
    let mut data = VtkData::default();
    let mut n_cells = 0;
    while let Ok(word) = next("section") {
        match word {
            "ASCII" => {}
            "DATASET" => {
                let kind = next("dataset type")?;
                if kind != "UNSTRUCTURED_GRID" {
                    return Err(parse_err(format!("unsupported dataset `{kind}`")));
                }
            }
            "POINTS" => {
                let n: usize = num(next("point count")?)?;
                next("point type")?;
                for _ in 0..n {
                    data.points.push([num(next("x")?)?, num(next("y")?)?, num(next("z")?)?]);
                }
            }
            "CELLS" => {
                n_cells = num(next("cell count")?)?;
                next("cell list size")?;
                for _ in 0..n_cells {
                    let k: usize = num(next("cell size")?)?;
                    let ids = (0..k).map(|_| num(next("cell vertex")?)).collect::<Result<_>>()?;
                    data.cells.push(ids);
                }
            }
            "CELL_TYPES" => {
                let n: usize = num(next("type count")?)?;
                for _ in 0..n {
                    data.cell_types.push(num(next("cell type")?)?);
                }
            }
            "CELL_DATA" => {
                n_cells = num(next("cell data count")?)?;
            }
            "SCALARS" => {
                let name = next("array name")?.to_string();
                next("array type")?;
                let mut word = next("lookup table")?;
                if word == "1" {
                    word = next("lookup table")?;
                }
                if word != "LOOKUP_TABLE" {
                    return Err(parse_err(format!("expected LOOKUP_TABLE, found `{word}`")));
                }
                next("lookup table name")?;
                let values = (0..n_cells).map(|_| num(next("value")?)).collect::<Result<_>>()?;
                data.cell_data.insert(name, values);
            }
            other => return Err(parse_err(format!("unexpected token `{other}`"))),
        }
    }
    Ok(data)
}
