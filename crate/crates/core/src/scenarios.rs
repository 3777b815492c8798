//! Experiment setups: reference-surface inclination, basal topography,
//! initial data, boundary rules, and the exact granular dam-break solution.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::physics::{MaterialParams, PressureMode};
use crate::state::{ConservedState, Vec2};

/// Inclination of the reference surface as a function of downslope `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inclination {
    Constant(f64),
    /// `zeta0` up to `incline_end`, linear ramp to zero at
    /// `horizontal_start`, horizontal beyond.
    Chute {
        zeta0: f64,
        incline_end: f64,
        horizontal_start: f64,
    },
}

impl Inclination {
    /// `(zeta, d zeta / dx)`.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Inclination::Constant(z) => (z, 0.0),
            Inclination::Chute {
                zeta0,
                incline_end,
                horizontal_start,
            } => chute_zeta_with(x, zeta0, incline_end, horizontal_start),
        }
    }
}

fn chute_zeta_with(x: f64, zeta0: f64, a: f64, b: f64) -> (f64, f64) {
    if x <= a {
        (zeta0, 0.0)
    } else if x < b {
        let w = b - a;
        (zeta0 * (1.0 - (x - a) / w), -zeta0 / w)
    } else {
        (0.0, 0.0)
    }
}

pub const CHUTE_ZETA0_DEG: f64 = 35.0;
pub const CHUTE_INCLINE_END: f64 = 17.5;
pub const CHUTE_HORIZONTAL_START: f64 = 21.5;

/// Chute inclination profile with the standard breakpoints.
pub fn chute_zeta(x: f64) -> (f64, f64) {
    chute_zeta_with(
        x,
        CHUTE_ZETA0_DEG.to_radians(),
        CHUTE_INCLINE_END,
        CHUTE_HORIZONTAL_START,
    )
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Topography {
    Flat,
    /// Linear cone `H max(0, 1 - r/R)`.
    Cone { center: Vec2, radius: f64, height: f64 },
}

impl Topography {
    /// `(z_b, grad z_b)`.
    pub fn eval(&self, p: Vec2) -> (f64, Vec2) {
        match *self {
            Topography::Flat => (0.0, Vec2::ZERO),
            Topography::Cone {
                center,
                radius,
                height,
            } => cone_zb(p, center, radius, height),
        }
    }
}

/// Cone elevation and gradient. The gradient is zero at the apex and
/// outside the rim.
pub fn cone_zb(p: Vec2, center: Vec2, radius: f64, height: f64) -> (f64, Vec2) {
    let d = p - center;
    let r = d.norm();
    if r >= radius {
        (0.0, Vec2::ZERO)
    } else if r == 0.0 {
        (height, Vec2::ZERO)
    } else {
        let slope = -height / radius;
        (height * (1.0 - r / radius), d * (slope / r))
    }
}

/// Spherical-cap depth `sqrt(max(0, r0^2 - r^2))`.
pub fn cap_initial(p: Vec2, center: Vec2, r0: f64) -> f64 {
    let r2 = (p - center).norm_sq();
    (r0 * r0 - r2).max(0.0).sqrt()
}

/// Material at rest for `x < 0`, dry for `x >= 0`.
pub fn dam_initial(p: Vec2, h0: f64) -> ConservedState {
    if p.x < 0.0 {
        ConservedState::new(h0, 0.0, 0.0)
    } else {
        ConservedState::ZERO
    }
}

/// Parameters of the one-dimensional granular dam break on a uniform
/// slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DamBreakExact {
    pub h0: f64,
    pub zeta: f64,
    pub delta: f64,
    pub g: f64,
}

impl DamBreakExact {
    /// Net acceleration term `g cos(zeta) (tan(delta) - tan(zeta))`.
    fn drag(&self) -> f64 {
        self.g * self.zeta.cos() * (self.delta.tan() - self.zeta.tan())
    }

    pub fn c0(&self) -> f64 {
        (self.g * self.h0 * self.zeta.cos()).sqrt()
    }

    /// Depth and velocity `(h, u)` at `x`, time `t`. Dry points report
    /// `u = 0`.
    pub fn eval(&self, x: f64, t: f64) -> (f64, f64) {
        let a = self.drag();
        let chi = x + 0.5 * a * t * t;
        let c0 = self.c0();
        if t <= 0.0 {
            return if x < 0.0 { (self.h0, 0.0) } else { (0.0, 0.0) };
        }
        let (h, shifted_u) = if chi < -c0 * t {
            (self.h0, 0.0)
        } else if chi <= 2.0 * c0 * t {
            let s = 2.0 - chi / (c0 * t);
            (self.h0 / 9.0 * s * s, 2.0 / 3.0 * (chi / t + c0))
        } else {
            (0.0, 0.0)
        };
        if h > 0.0 {
            (h, shifted_u - a * t)
        } else {
            (0.0, 0.0)
        }
    }
}

/// Exact dam-break depth and velocity.
pub fn exact_dambreak(x: f64, t: f64, h0: f64, zeta: f64, delta: f64, g: f64) -> (f64, f64) {
    DamBreakExact { h0, zeta, delta, g }.eval(x, t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    DamBreak { h0: f64 },
    Cap { center: Vec2, radius: f64 },
    Uniform { h: f64 },
}

impl InitialCondition {
    pub fn eval(&self, p: Vec2) -> ConservedState {
        match *self {
            InitialCondition::DamBreak { h0 } => dam_initial(p, h0),
            InitialCondition::Cap { center, radius } => ConservedState::new(cap_initial(p, center, radius), 0.0, 0.0),
            InitialCondition::Uniform { h } => ConservedState::new(h, 0.0, 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Zero-gradient: the ghost copies the interior trace.
    Outflow,
    /// Reflecting: normal momentum negated.
    Wall,
}

impl FromStr for BoundaryRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "outflow" => Ok(BoundaryRule::Outflow),
            "wall" => Ok(BoundaryRule::Wall),
            _ => Err(Error::Config(format!("unknown boundary rule `{s}`"))),
        }
    }
}

impl fmt::Display for BoundaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryRule::Outflow => "outflow",
            BoundaryRule::Wall => "wall",
        })
    }
}

/// Exterior state for a boundary edge with outward normal `n`.
pub fn ghost_state(rule: BoundaryRule, interior: &ConservedState, n: Vec2) -> ConservedState {
    match rule {
        BoundaryRule::Outflow => *interior,
        BoundaryRule::Wall => {
            let mn = interior.hu * n.x + interior.hv * n.y;
            ConservedState::new(interior.h, interior.hu - 2.0 * mn * n.x, interior.hv - 2.0 * mn * n.y)
        }
    }
}

/// Boundary rules for edges facing the x and y directions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Boundaries {
    pub x: BoundaryRule,
    pub y: BoundaryRule,
}

impl Boundaries {
    pub fn uniform(rule: BoundaryRule) -> Self {
        Boundaries { x: rule, y: rule }
    }

    pub fn rule_for(&self, n: Vec2) -> BoundaryRule {
        if n.x.abs() >= n.y.abs() {
            self.x
        } else {
            self.y
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

/// A complete physical setup.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub domain: Domain,
    pub inclination: Inclination,
    pub topography: Topography,
    pub initial: InitialCondition,
    pub boundaries: Boundaries,
    pub params: MaterialParams,
    pub pressure: PressureMode,
}

/// Names accepted by [`ScenarioSpec::preset`].
pub const PRESETS: [&str; 4] = ["dam_break", "chute", "obstacle", "rest"];

impl ScenarioSpec {
    pub fn preset(name: &str) -> Result<ScenarioSpec> {
        match name {
            "dam_break" => Ok(Self::dam_break()),
            "chute" => Ok(Self::chute()),
            "obstacle" => Ok(Self::obstacle()),
            "rest" => Ok(Self::rest()),
            _ => Err(Error::Config(format!(
                "unknown scenario `{name}` (expected one of {})",
                PRESETS.join(", ")
            ))),
        }
    }

    /// Granular dam break on a 40 degree slope in dimensional units.
    pub fn dam_break() -> ScenarioSpec {
        ScenarioSpec {
            name: "dam_break".into(),
            domain: Domain {
                x: (-12.8, 12.8),
                y: (-1.6, 1.6),
            },
            inclination: Inclination::Constant(40f64.to_radians()),
            topography: Topography::Flat,
            initial: InitialCondition::DamBreak { h0: 10.0 },
            boundaries: Boundaries {
                x: BoundaryRule::Outflow,
                y: BoundaryRule::Wall,
            },
            params: MaterialParams {
                phi: 30f64.to_radians(),
                delta: 24.5f64.to_radians(),
                epsilon: 1.0,
                lambda: 1.0,
                gravity: 9.81,
                h_dry: 1e-6,
                u_reg: 1e-8,
            },
            pressure: PressureMode::Constant(1.0),
        }
    }

    /// Cap released on an incline that bends into a horizontal run-out.
    pub fn chute() -> ScenarioSpec {
        ScenarioSpec {
            name: "chute".into(),
            domain: Domain {
                x: (0.0, 30.0),
                y: (-7.0, 7.0),
            },
            inclination: Inclination::Chute {
                zeta0: CHUTE_ZETA0_DEG.to_radians(),
                incline_end: CHUTE_INCLINE_END,
                horizontal_start: CHUTE_HORIZONTAL_START,
            },
            topography: Topography::Flat,
            initial: InitialCondition::Cap {
                center: Vec2::new(4.0, 0.0),
                radius: 1.85,
            },
            boundaries: Boundaries::uniform(BoundaryRule::Outflow),
            params: MaterialParams {
                phi: 30f64.to_radians(),
                delta: 30f64.to_radians(),
                epsilon: 1.0,
                lambda: 1.0,
                gravity: 1.0,
                h_dry: 1e-6,
                u_reg: 1e-8,
            },
            pressure: PressureMode::MohrCoulomb,
        }
    }

    /// The chute with a conical obstacle on the incline.
    pub fn obstacle() -> ScenarioSpec {
        ScenarioSpec {
            name: "obstacle".into(),
            topography: Topography::Cone {
                center: Vec2::new(13.0, 0.0),
                radius: 1.0,
                height: 1.0,
            },
            ..Self::chute()
        }
    }

    /// Uniform layer at rest on a horizontal plane inside walls.
    pub fn rest() -> ScenarioSpec {
        ScenarioSpec {
            name: "rest".into(),
            domain: Domain {
                x: (0.0, 1.0),
                y: (0.0, 1.0),
            },
            inclination: Inclination::Constant(0.0),
            topography: Topography::Flat,
            initial: InitialCondition::Uniform { h: 1.0 },
            boundaries: Boundaries::uniform(BoundaryRule::Wall),
            params: MaterialParams::default(),
            pressure: PressureMode::MohrCoulomb,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if let Inclination::Chute {
            incline_end,
            horizontal_start,
            ..
        } = self.inclination
        {
            if !(incline_end < horizontal_start) {
                return bad(format!("chute breakpoints out of order: {incline_end} >= {horizontal_start}"));
            }
        }
        if let Topography::Cone { radius, height, .. } = self.topography {
            if !(radius > 0.0 && height > 0.0) {
                return bad(format!("cone needs positive radius and height, got {radius}, {height}"));
            }
        }
        match self.initial {
            InitialCondition::DamBreak { h0 } if !(h0 > 0.0) => bad(format!("h0 must be positive, got {h0}")),
            InitialCondition::Cap { radius, .. } if !(radius > 0.0) => bad(format!("cap radius must be positive, got {radius}")),
            InitialCondition::Uniform { h } if !(h >= 0.0) => bad(format!("uniform depth must be >= 0, got {h}")),
            _ => Ok(()),
        }
    }

    /// The analytic dam-break solution, when this setup has one.
    pub fn exact(&self) -> Option<DamBreakExact> {
        match (self.initial, self.inclination, self.topography, self.pressure) {
            (InitialCondition::DamBreak { h0 }, Inclination::Constant(zeta), Topography::Flat, PressureMode::Constant(k))
                if k == 1.0 && self.params.epsilon == 1.0 =>
            {
                Some(DamBreakExact {
                    h0,
                    zeta,
                    delta: self.params.delta,
                    g: self.params.gravity,
                })
            }
            _ => None,
        }
    }
}

/// Inclination and bed slope sampled at a cell barycentre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellTerrain {
    pub zeta: f64,
    pub dzeta_dx: f64,
    pub grad_zb: Vec2,
}

impl CellTerrain {
    pub fn at(spec: &ScenarioSpec, p: Vec2) -> CellTerrain {
        let (zeta, dzeta_dx) = spec.inclination.eval(p.x);
        let (_, grad_zb) = spec.topography.eval(p);
        CellTerrain {
            zeta,
            dzeta_dx,
            grad_zb,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn chute_profile_examples() {
        let (z, d) = chute_zeta(10.0);
        assert_relative_eq!(z, 0.610865, max_relative = 1e-6);
        assert_eq!(d, 0.0);
        let (z, d) = chute_zeta(19.5);
        assert_relative_eq!(z, 17.5f64.to_radians(), max_relative = 1e-12);
        // Quoted constant is rounded to six digits.
        assert!((z - 0.305433).abs() < 5e-7);
        assert_relative_eq!(d, -35f64.to_radians() / 4.0, max_relative = 1e-12);
        assert_relative_eq!(d, -0.152716, max_relative = 1e-5);
        assert_eq!(chute_zeta(25.0), (0.0, 0.0));
    }

    #[test]
    fn chute_profile_continuous() {
        let z0 = 35f64.to_radians();
        assert_eq!(chute_zeta(17.5).0, z0);
        assert!((chute_zeta(17.5 + 1e-12).0 - z0).abs() < 1e-12);
        assert_eq!(chute_zeta(21.5).0, 0.0);
        assert!(chute_zeta(21.5 - 1e-12).0.abs() < 1e-12);
        // Derivative matches finite differences inside each branch.
        for x in [3.0, 18.0, 19.9, 21.0, 27.0] {
            let fd = (chute_zeta(x + 1e-6).0 - chute_zeta(x - 1e-6).0) / 2e-6;
            assert!((fd - chute_zeta(x).1).abs() < 1e-8);
        }
    }

    #[test]
    fn cone_examples() {
        let c = Vec2::new(13.0, 0.0);
        assert_eq!(cone_zb(c, c, 1.0, 1.0), (1.0, Vec2::ZERO));
        assert_eq!(cone_zb(Vec2::new(14.0, 0.0), c, 1.0, 1.0), (0.0, Vec2::ZERO));
        assert_eq!(cone_zb(Vec2::new(13.0, 3.0), c, 1.0, 1.0), (0.0, Vec2::ZERO));
        let (z, g) = cone_zb(Vec2::new(13.5, 0.0), c, 1.0, 1.0);
        assert_relative_eq!(z, 0.5, max_relative = 1e-15);
        assert_eq!(g, Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn cap_examples() {
        let c = Vec2::new(4.0, 0.0);
        assert_eq!(cap_initial(c, c, 1.85), 1.85);
        // 5.85 - 4 is not exactly 1.85 in binary, so the rim is only near zero.
        assert!(cap_initial(Vec2::new(5.85, 0.0), c, 1.85) < 1e-7);
        assert_eq!(cap_initial(Vec2::new(7.0, 1.0), c, 1.85), 0.0);
    }

    #[test]
    fn cap_volume_matches_hemisphere() {
        // Midpoint rule on a fine grid over the support.
        let (r0, n) = (1.85, 2000);
        let h = 2.0 * r0 / n as f64;
        let mut vol = 0.0;
        for i in 0..n {
            for j in 0..n {
                let p = Vec2::new(-r0 + (i as f64 + 0.5) * h, -r0 + (j as f64 + 0.5) * h);
                vol += cap_initial(p, Vec2::ZERO, r0) * h * h;
            }
        }
        let exact = 2.0 / 3.0 * std::f64::consts::PI * r0.powi(3);
        assert!((vol - exact).abs() / exact < 1e-6, "{vol} vs {exact}");
    }

    #[test]
    fn dam_initial_examples() {
        assert_eq!(dam_initial(Vec2::new(-1.0, 0.0), 10.0), ConservedState::new(10.0, 0.0, 0.0));
        assert_eq!(dam_initial(Vec2::new(1.0, 0.0), 10.0), ConservedState::ZERO);
        assert_eq!(dam_initial(Vec2::new(0.0, 0.0), 10.0), ConservedState::ZERO);
    }

    fn dam() -> DamBreakExact {
        DamBreakExact {
            h0: 10.0,
            zeta: 40f64.to_radians(),
            delta: 24.5f64.to_radians(),
            g: 9.81,
        }
    }

    #[test]
    fn exact_dambreak_branches() {
        let d = dam();
        let a = d.drag();
        let t = 0.5;
        let c0 = d.c0();
        assert_relative_eq!(c0, 8.6689, max_relative = 1e-4);
        // chi = 0
        let x = -0.5 * a * t * t;
        let (h, u) = d.eval(x, t);
        assert_relative_eq!(h, 40.0 / 9.0, max_relative = 1e-12);
        assert_relative_eq!(u + a * t, 2.0 / 3.0 * c0, max_relative = 1e-12);
        assert_relative_eq!(u + a * t, 5.7793, max_relative = 1e-4);
        // Behind the rarefaction the slab slides at -a t.
        let (h, u) = d.eval(-10.0, t);
        assert_eq!(h, 10.0);
        assert_relative_eq!(u, -a * t, max_relative = 1e-12);
        assert_eq!(d.eval(12.0, t), (0.0, 0.0));
        assert_eq!(d.eval(-1.0, 0.0), (10.0, 0.0));
        assert_eq!(d.eval(0.0, 0.0), (0.0, 0.0));
    }

    #[test]
    fn exact_dambreak_continuous_at_fan_edges() {
        let d = dam();
        let (a, c0) = (d.drag(), d.c0());
        for t in [0.1, 0.3, 0.5] {
            for chi_edge in [-c0 * t, 2.0 * c0 * t] {
                let x = chi_edge - 0.5 * a * t * t;
                let lo = d.eval(x - 1e-9, t);
                let hi = d.eval(x + 1e-9, t);
                assert!((lo.0 - hi.0).abs() < 1e-6, "h jump at t={t}");
                if lo.0 > 1e-6 && hi.0 > 1e-6 {
                    assert!((lo.1 - hi.1).abs() < 1e-6, "u jump at t={t}");
                }
            }
        }
    }

    #[test]
    fn ghost_examples() {
        let n = Vec2::new(1.0, 0.0);
        assert_eq!(ghost_state(BoundaryRule::Wall, &ConservedState::new(1.0, 1.0, 0.0), n), ConservedState::new(1.0, -1.0, 0.0));
        assert_eq!(ghost_state(BoundaryRule::Wall, &ConservedState::new(1.0, 0.0, 1.0), n), ConservedState::new(1.0, 0.0, 1.0));
        let u = ConservedState::new(0.3, -2.0, 5.0);
        assert_eq!(ghost_state(BoundaryRule::Outflow, &u, Vec2::new(0.6, 0.8)), u);
    }

    #[test]
    fn wall_reflection_is_involution() {
        let n = Vec2::new(0.6, -0.8);
        let u = ConservedState::new(0.7, 1.3, -0.4);
        let g = ghost_state(BoundaryRule::Wall, &u, n);
        assert_eq!(g.h, u.h);
        let tangential = |s: &ConservedState| -s.hu * n.y + s.hv * n.x;
        assert!((tangential(&g) - tangential(&u)).abs() < 1e-15);
        assert!(ghost_state(BoundaryRule::Wall, &g, n).max_abs_diff(&u) < 1e-15);
    }

    #[test]
    fn presets_validate() {
        for name in PRESETS {
            ScenarioSpec::preset(name).unwrap().validate().unwrap();
        }
        assert!(ScenarioSpec::preset("avalanche").is_err());
        assert!(ScenarioSpec::dam_break().exact().is_some());
        assert!(ScenarioSpec::chute().exact().is_none());
    }
}
