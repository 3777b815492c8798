//! Axis-aligned line sampling of the reconstructed solution.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::physics::primitive_from_conserved;
use crate::reconstruction::{evaluate_trace, CellGradient};
use crate::scenarios::Domain;
use crate::state::{ConservedState, Vec2};

use super::fmt9;

/// A sampling line spanning the domain. Written `y = c` (along x) or
/// `x = c` (along y) in configuration files.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProfileLine {
    AlongX { y: f64 },
    AlongY { x: f64 },
}

impl FromStr for ProfileLine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("profile must be `y = c` or `x = c`, got `{s}`"));
        let (axis, c) = s.split_once(['=', ':']).ok_or_else(bad)?;
        let c: f64 = c.trim().parse().map_err(|_| bad())?;
        match axis.trim() {
            "y" => Ok(ProfileLine::AlongX { y: c }),
            "x" => Ok(ProfileLine::AlongY { x: c }),
            _ => Err(bad()),
        }
    }
}

impl ProfileLine {
    /// Start and end points across `domain`.
    pub fn endpoints(&self, domain: &Domain) -> (Vec2, Vec2) {
        match *self {
            ProfileLine::AlongX { y } => (Vec2::new(domain.x.0, y), Vec2::new(domain.x.1, y)),
            ProfileLine::AlongY { x } => (Vec2::new(x, domain.y.0), Vec2::new(x, domain.y.1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    /// Distance from the start of the line.
    pub s: f64,
    pub point: Vec2,
    pub h: f64,
    pub u: f64,
    pub v: f64,
}

/// `n` equally spaced samples from `start` to `end`. Each takes the linear
/// trace of the lowest-id cell containing it; points outside the mesh give
/// a dry row.
pub fn sample_profile(
    mesh: &TriMesh,
    cells: &[ConservedState],
    grads: &[CellGradient],
    (start, end): (Vec2, Vec2),
    n: usize,
    h_dry: f64,
) -> Vec<ProfileRow> {
    let len = start.dist(end);
    (0..n)
        .map(|k| {
            let f = if n > 1 { k as f64 / (n - 1) as f64 } else { 0.0 };
            let p = start + (end - start) * f;
            let (h, u, v) = match mesh.locate(p) {
                Some(i) => {
                    let tr = evaluate_trace(&cells[i], &grads[i], p - mesh.cell(i).barycenter);
                    let q = primitive_from_conserved(&tr, h_dry);
                    (q.h, q.u, q.v)
                }
                None => (0.0, 0.0, 0.0),
            };
            ProfileRow { s: f * len, point: p, h, u, v }
        })
        .collect()
}

pub fn render_profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("s,x,y,h,u,v\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt9(r.s),
            fmt9(r.point.x),
            fmt9(r.point.y),
            fmt9(r.h),
            fmt9(r.u),
            fmt9(r.v)
        );
    }
    out
}

pub fn write_profile_csv(rows: &[ProfileRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_profile_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;

    #[test]
    fn line_spec_parses() {
        assert_eq!("y = 0".parse::<ProfileLine>().unwrap(), ProfileLine::AlongX { y: 0.0 });
        assert_eq!("x=13.5".parse::<ProfileLine>().unwrap(), ProfileLine::AlongY { x: 13.5 });
        assert!("z = 1".parse::<ProfileLine>().is_err());
        assert!("y = up".parse::<ProfileLine>().is_err());
    }

    #[test]
    fn constant_field_gives_constant_column() {
        let mesh = generate_box_mesh((0.0, 2.0), (-1.0, 1.0), 4, 4).unwrap();
        let cells = vec![ConservedState::new(0.5, 0.25, 0.0); mesh.num_cells()];
        let grads = vec![CellGradient::ZERO; mesh.num_cells()];
        let rows = sample_profile(&mesh, &cells, &grads, (Vec2::new(0.0, 0.1), Vec2::new(2.0, 0.1)), 11, 1e-6);
        assert_eq!(rows.len(), 11);
        assert!(rows.iter().all(|r| r.h == 0.5 && r.u == 0.5 && r.v == 0.0));
        assert_eq!(rows[10].s, 2.0);
    }

    #[test]
    fn outside_points_are_dry() {
        let mesh = generate_box_mesh((0.0, 1.0), (0.0, 1.0), 2, 2).unwrap();
        let cells = vec![ConservedState::new(1.0, 0.0, 0.0); 8];
        let grads = vec![CellGradient::ZERO; 8];
        let rows = sample_profile(&mesh, &cells, &grads, (Vec2::new(0.5, 0.5), Vec2::new(1.5, 0.5)), 3, 1e-6);
        assert_eq!(rows[0].h, 1.0);
        assert_eq!(rows[2].h, 0.0);
    }

    #[test]
    fn edge_points_use_lowest_cell() {
        let mesh = generate_box_mesh((0.0, 1.0), (0.0, 1.0), 1, 1).unwrap();
        let cells = vec![ConservedState::new(1.0, 0.0, 0.0), ConservedState::new(2.0, 0.0, 0.0)];
        let grads = vec![CellGradient::ZERO; 2];
        // The centre lies on the shared diagonal.
        let rows = sample_profile(&mesh, &cells, &grads, (Vec2::new(0.5, 0.5), Vec2::new(0.5, 0.5)), 1, 1e-6);
        assert_eq!(rows[0].h, 1.0);
    }

    #[test]
    fn csv_layout() {
        let row = ProfileRow {
            s: 0.0,
            point: Vec2::new(1.0, 2.0),
            h: 0.123456789123,
            u: 0.0,
            v: -1.0,
        };
        let csv = render_profile_csv(&[row]);
        assert_eq!(
            csv,
            "s,x,y,h,u,v\n0.00000000e0,1.00000000e0,2.00000000e0,1.23456789e-1,0.00000000e0,-1.00000000e0\n"
        );
    }
}
