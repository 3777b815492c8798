//! Batch front end: configuration files, the simulation driver, VTK and
//! CSV output, and error norms against the dam-break solution.
//!
//! All floating-point text is written with nine significant digits.

mod config;
mod profile;
mod run;
mod vtk;

pub use config::{load_config, parse_config, Formats, RunConfig};
pub use profile::{sample_profile, write_profile_csv, ProfileLine, ProfileRow};
pub use run::{l1_error, run, FrameInfo, RunSummary, Simulation};
pub use vtk::{parse_vtk, write_vtk, Frame, VtkData};

/// Nine significant digits in scientific notation.
pub(crate) fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}
