//! `key = value` run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptivity::AdaptConfig;
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::physics::PressureMode;
use crate::scenarios::{Boundaries, InitialCondition, Inclination, ScenarioSpec, Topography};
use crate::state::Vec2;
use crate::timestepper::StepConfig;

use super::profile::ProfileLine;

/// Which artifacts a run writes per frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub vtk: bool,
    pub csv: bool,
}

impl FromStr for Formats {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut f = Formats { vtk: false, csv: false };
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "vtk" => f.vtk = true,
                "csv" => f.csv = true,
                "none" => {}
                _ => return Err(Error::Config(format!("unknown output format `{part}`"))),
            }
        }
        Ok(f)
    }
}

/// Everything one batch run needs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub nx: usize,
    pub ny: usize,
    pub step: StepConfig,
    pub output_dir: PathBuf,
    /// Simulated time between frames.
    pub output_interval: f64,
    pub formats: Formats,
    pub profile: Option<ProfileLine>,
    pub profile_samples: usize,
    /// `None` runs on the fixed base mesh.
    pub adapt: Option<AdaptConfig>,
}

impl RunConfig {
    /// Defaults for a preset: 64 x 16 cells, t_end 1, one frame per 0.1.
    pub fn for_scenario(scenario: ScenarioSpec) -> RunConfig {
        RunConfig {
            scenario,
            nx: 64,
            ny: 16,
            step: StepConfig::default(),
            output_dir: PathBuf::from("out"),
            output_interval: 0.1,
            formats: Formats { vtk: true, csv: true },
            profile: Some(ProfileLine::AlongX { y: 0.0 }),
            profile_samples: 200,
            adapt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.step.validate()?;
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Config(format!("resolution must be positive, got {} x {}", self.nx, self.ny)));
        }
        if !(self.output_interval > 0.0 && self.output_interval.is_finite()) {
            return Err(Error::Config(format!("output_interval must be positive, got {}", self.output_interval)));
        }
        if self.profile.is_some() && self.profile_samples < 2 {
            return Err(Error::Config("profile_samples must be at least 2".into()));
        }
        if let Some(a) = &self.adapt {
            a.validate()?;
        }
        Ok(())
    }
}

fn value<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
}

fn pair(key: &str, v: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok((value(key, a)?, value(key, b)?)),
        _ => Err(Error::Config(format!("`{key}` expects two comma-separated numbers, got `{v}`"))),
    }
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn degrees(key: &str, v: &str) -> Result<f64> {
    Ok(value::<f64>(key, v)?.to_radians())
}

/// Parses a configuration. `scenario` must come first; every later key
/// overrides a field of that preset or of the run defaults. Blank lines
/// and `#` comments are ignored.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        entries.push((k.trim().to_string(), v.trim().to_string()));
    }
    let Some((first, name)) = entries.first() else {
        return Err(Error::Config("empty configuration".into()));
    };
    if first != "scenario" {
        return Err(Error::Config("the first key must be `scenario`".into()));
    }
    let mut cfg = RunConfig::for_scenario(ScenarioSpec::preset(name)?);
    let mut adapt_on = false;
    let mut adapt = AdaptConfig::default();
    for (k, v) in &entries[1..] {
        let (k, v) = (k.as_str(), v.as_str());
        let s = &mut cfg.scenario;
        match k {
            "nx" => cfg.nx = value(k, v)?,
            "ny" => cfg.ny = value(k, v)?,
            "t_end" => cfg.step.t_end = value(k, v)?,
            "cfl" => cfg.step.cr = value(k, v)?,
            "max_steps" => cfg.step.max_steps = value(k, v)?,
            "dt_floor" => cfg.step.dt_floor = value(k, v)?,
            "execution" => {
                cfg.step.exec = match v {
                    "parallel" => Execution::Parallel,
                    "sequential" => Execution::Sequential,
                    _ => return Err(Error::Config(format!("unknown execution `{v}`"))),
                }
            }
            "output_dir" => cfg.output_dir = PathBuf::from(v),
            "output_interval" => cfg.output_interval = value(k, v)?,
            "formats" => cfg.formats = v.parse()?,
            "profile" => cfg.profile = if v == "none" { None } else { Some(v.parse()?) },
            "profile_samples" => cfg.profile_samples = value(k, v)?,
            "domain_x" => s.domain.x = pair(k, v)?,
            "domain_y" => s.domain.y = pair(k, v)?,
            "boundary" => s.boundaries = Boundaries::uniform(v.parse()?),
            "boundary_x" => s.boundaries.x = v.parse()?,
            "boundary_y" => s.boundaries.y = v.parse()?,
            "phi_deg" => s.params.phi = degrees(k, v)?,
            "delta_deg" => s.params.delta = degrees(k, v)?,
            "epsilon" => s.params.epsilon = value(k, v)?,
            "lambda" => s.params.lambda = value(k, v)?,
            "gravity" => s.params.gravity = value(k, v)?,
            "h_dry" => s.params.h_dry = value(k, v)?,
            "u_reg" => s.params.u_reg = value(k, v)?,
            "pressure" => {
                s.pressure = match v {
                    "mohr_coulomb" => PressureMode::MohrCoulomb,
                    _ => match v.strip_prefix("constant:") {
                        Some(kc) => PressureMode::Constant(value(k, kc)?),
                        None => return Err(Error::Config(format!("unknown pressure mode `{v}`"))),
                    },
                }
            }
            "zeta_deg" => s.inclination = Inclination::Constant(degrees(k, v)?),
            "h0" => match &mut s.initial {
                InitialCondition::DamBreak { h0 } => *h0 = value(k, v)?,
                _ => return Err(Error::Config("`h0` applies to the dam-break initial state".into())),
            },
            "cap_center" | "cap_radius" => match &mut s.initial {
                InitialCondition::Cap { center, radius } => {
                    if k == "cap_radius" {
                        *radius = value(k, v)?;
                    } else {
                        let (x, y) = pair(k, v)?;
                        *center = Vec2::new(x, y);
                    }
                }
                _ => return Err(Error::Config(format!("`{k}` applies to the cap initial state"))),
            },
            "cone" if v == "none" => s.topography = Topography::Flat,
            "cone" => {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|p| value(k, p.trim()))
                    .collect::<Result<_>>()?;
                s.topography = match parts.as_slice() {
                    [x, y, r, h] => Topography::Cone {
                        center: Vec2::new(*x, *y),
                        radius: *r,
                        height: *h,
                    },
                    _ => return Err(Error::Config("`cone` expects x, y, radius, height".into())),
                };
            }
            "adapt" => adapt_on = flag(k, v)?,
            "refine_fraction" => adapt.refine_fraction = value(k, v)?,
            "coarsen_fraction" => adapt.coarsen_fraction = value(k, v)?,
            "max_level" => adapt.max_level = value(k, v)?,
            "min_level" => adapt.min_level = value(k, v)?,
            "adapt_interval" => adapt.adapt_interval = value(k, v)?,
            "scenario" => return Err(Error::Config("`scenario` given twice".into())),
            _ => return Err(Error::Config(format!("unknown key `{k}`"))),
        }
    }
    cfg.adapt = adapt_on.then_some(adapt);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::BoundaryRule;

    #[test]
    fn preset_with_overrides() {
        let cfg = parse_config(
            "scenario = chute  # cap on the chute\n\
             nx = 30\nny = 14\nt_end = 24\noutput_interval = 3\n\
             boundary = wall\ndomain_x = -2, 32\nadapt = on\nmax_level = 3\n",
        )
        .unwrap();
        assert_eq!((cfg.nx, cfg.ny), (30, 14));
        assert_eq!(cfg.step.t_end, 24.0);
        assert_eq!(cfg.scenario.boundaries, Boundaries::uniform(BoundaryRule::Wall));
        assert_eq!(cfg.scenario.domain.x, (-2.0, 32.0));
        assert_eq!(cfg.adapt.unwrap().max_level, 3);
    }

    #[test]
    fn rejects_bad_input() {
        for text in [
            "",
            "nx = 3\nscenario = chute",
            "scenario = avalanche",
            "scenario = chute\nnx = -1",
            "scenario = chute\ncolour = red",
            "scenario = chute\nh0 = 3",
            "scenario = chute\noutput_interval = 0",
            "scenario = chute\ndelta_deg = 40",
            "scenario = chute\nno equals sign",
        ] {
            assert!(matches!(parse_config(text), Err(Error::Config(_)) | Err(Error::InvalidFriction { .. })), "{text}");
        }
    }

    #[test]
    fn formats_parse() {
        assert_eq!("vtk".parse::<Formats>().unwrap(), Formats { vtk: true, csv: false });
        assert_eq!("csv, vtk".parse::<Formats>().unwrap(), Formats { vtk: true, csv: true });
        assert!("png".parse::<Formats>().is_err());
    }
}
