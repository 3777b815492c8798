//! Continuous-model formulas: state conversion, earth pressure
//! coefficients, effective gravity factors, physical fluxes, flux Jacobian
//! eigenvalues and the driving/friction source terms.

use crate::error::{Error, Result};
use crate::state::{ConservedState, PrimitiveState, Vec2};

/// Material and model constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaterialParams {
    /// Internal friction angle, radians.
    pub phi: f64,
    /// Basal friction angle, radians.
    pub delta: f64,
    /// Aspect ratio.
    pub epsilon: f64,
    /// Curvature stretching factor.
    pub lambda: f64,
    /// Scale applied to both the pressure factors and the source
    /// accelerations: 1 in nondimensional runs, `g` in dimensional ones.
    pub gravity: f64,
    /// Depth below which a state is treated as dry.
    pub h_dry: f64,
    /// Speed below which Coulomb friction has no direction and is dropped.
    pub u_reg: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams {
            phi: 30f64.to_radians(),
            delta: 30f64.to_radians(),
            epsilon: 1.0,
            lambda: 1.0,
            gravity: 1.0,
            h_dry: 1e-6,
            u_reg: 1e-8,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let (phi, delta) = (self.phi, self.delta);
        if !(0.0 <= delta && delta <= phi && phi < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidFriction { phi, delta });
        }
        let positive = [
            ("epsilon", self.epsilon),
            ("gravity", self.gravity),
            ("h_dry", self.h_dry),
            ("u_reg", self.u_reg),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.lambda.is_finite() {
            return Err(Error::Config("lambda must be finite".into()));
        }
        Ok(())
    }
}

/// Desingularised velocities: zero below `h_dry`.
pub fn primitive_from_conserved(u: &ConservedState, h_dry: f64) -> PrimitiveState {
    if u.h >= h_dry {
        PrimitiveState::new(u.h, u.hu / u.h, u.hv / u.h)
    } else {
        PrimitiveState::new(u.h, 0.0, 0.0)
    }
}

/// How the earth pressure coefficients are obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PressureMode {
    /// Active/passive Mohr-Coulomb coefficients selected by the signs of
    /// the velocity divergence components.
    MohrCoulomb,
    /// Same fixed value for both directions.
    Constant(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarthPressure {
    pub kx: f64,
    pub ky: f64,
}

/// The six Mohr-Coulomb coefficients for one pair of friction angles.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarthPressureTable {
    kx_act: f64,
    kx_pass: f64,
    /// Indexed `[x branch][y branch]`, 0 = active, 1 = passive.
    ky: [[f64; 2]; 2],
}

impl EarthPressureTable {
    pub fn new(phi: f64, delta: f64) -> Result<Self> {
        let ratio = (phi.cos() / delta.cos()).powi(2);
        if !(ratio <= 1.0) || !(phi.cos() > 0.0) {
            return Err(Error::InvalidFriction { phi, delta });
        }
        let root = (1.0 - ratio).sqrt();
        let sec2 = 1.0 / phi.cos().powi(2);
        let kx_act = 2.0 * (1.0 - root) * sec2 - 1.0;
        let kx_pass = 2.0 * (1.0 + root) * sec2 - 1.0;
        let tan2 = delta.tan().powi(2);
        let ky_pair = |kx: f64| {
            let r = ((kx - 1.0).powi(2) + 4.0 * tan2).sqrt();
            [0.5 * (kx + 1.0 - r), 0.5 * (kx + 1.0 + r)]
        };
        Ok(EarthPressureTable {
            kx_act,
            kx_pass,
            ky: [ky_pair(kx_act), ky_pair(kx_pass)],
        })
    }

    /// Ties (`>= 0`) select the active branch.
    pub fn select(&self, dudx: f64, dvdy: f64) -> EarthPressure {
        let xb = usize::from(!(dudx >= 0.0));
        let yb = usize::from(!(dvdy >= 0.0));
        EarthPressure {
            kx: if xb == 0 { self.kx_act } else { self.kx_pass },
            ky: self.ky[xb][yb],
        }
    }
}

/// Mohr-Coulomb earth pressure coefficients for the given velocity
/// gradient components.
pub fn earth_pressure(params: &MaterialParams, dudx: f64, dvdy: f64) -> Result<EarthPressure> {
    Ok(EarthPressureTable::new(params.phi, params.delta)?.select(dudx, dvdy))
}

/// Per-run coefficient lookup combining [`PressureMode`] and the table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PressureModel {
    MohrCoulomb(EarthPressureTable),
    Constant(f64),
}

impl PressureModel {
    pub fn new(mode: PressureMode, params: &MaterialParams) -> Result<Self> {
        match mode {
            PressureMode::MohrCoulomb => Ok(PressureModel::MohrCoulomb(EarthPressureTable::new(
                params.phi,
                params.delta,
            )?)),
            PressureMode::Constant(k) if k > 0.0 && k.is_finite() => Ok(PressureModel::Constant(k)),
            PressureMode::Constant(k) => Err(Error::Config(format!("constant K must be positive, got {k}"))),
        }
    }

    pub fn coefficients(&self, dudx: f64, dvdy: f64) -> EarthPressure {
        match self {
            PressureModel::MohrCoulomb(t) => t.select(dudx, dvdy),
            PressureModel::Constant(k) => EarthPressure { kx: *k, ky: *k },
        }
    }
}

/// Effective gravity factors `(beta_x, beta_y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaPair {
    pub bx: f64,
    pub by: f64,
}

impl BetaPair {
    pub const fn new(bx: f64, by: f64) -> Self {
        BetaPair { bx, by }
    }

    /// `beta_x n_x^2 + beta_y n_y^2`.
    pub fn along(&self, n: Vec2) -> f64 {
        self.bx * n.x * n.x + self.by * n.y * n.y
    }

    pub fn magnitude(&self) -> f64 {
        self.bx.hypot(self.by)
    }
}

pub fn beta(params: &MaterialParams, zeta: f64, k: EarthPressure) -> Result<BetaPair> {
    let scale = params.gravity * params.epsilon * zeta.cos();
    let b = BetaPair::new(scale * k.kx, scale * k.ky);
    if !(b.bx > 0.0 && b.by > 0.0) {
        return Err(Error::HyperbolicityLoss(format!(
            "beta = ({}, {}) at zeta = {zeta}",
            b.bx, b.by
        )));
    }
    Ok(b)
}

/// x-direction physical flux `F(U)`.
pub fn flux_x(u: &ConservedState, beta: BetaPair, h_dry: f64) -> ConservedState {
    let p = primitive_from_conserved(u, h_dry);
    let pressure = beta.bx * (0.5 * u.h * u.h);
    if u.h >= h_dry {
        ConservedState::new(u.hu, u.hu * p.u + pressure, u.hu * p.v)
    } else {
        ConservedState::new(0.0, pressure, 0.0)
    }
}

/// y-direction physical flux `G(U)`.
pub fn flux_y(u: &ConservedState, beta: BetaPair, h_dry: f64) -> ConservedState {
    let p = primitive_from_conserved(u, h_dry);
    let pressure = beta.by * (0.5 * u.h * u.h);
    if u.h >= h_dry {
        ConservedState::new(u.hv, u.hv * p.u, u.hv * p.v + pressure)
    } else {
        ConservedState::new(0.0, 0.0, pressure)
    }
}

/// `F(U) n_x + G(U) n_y`.
pub fn flux_normal(u: &ConservedState, beta: BetaPair, n: Vec2, h_dry: f64) -> ConservedState {
    let p = primitive_from_conserved(u, h_dry);
    let (hu, hv) = if u.h >= h_dry { (u.hu, u.hv) } else { (0.0, 0.0) };
    let hun = hu * n.x + hv * n.y;
    let half_h2 = 0.5 * u.h * u.h;
    ConservedState::new(
        hun,
        hun * p.u + beta.bx * half_h2 * n.x,
        hun * p.v + beta.by * half_h2 * n.y,
    )
}

/// Eigenvalues of the normal flux Jacobian, ascending.
pub fn eigenvalues(u: &ConservedState, beta: BetaPair, n: Vec2, h_dry: f64) -> Result<[f64; 3]> {
    let c = beta.along(n);
    if c < 0.0 || u.h < 0.0 {
        return Err(Error::HyperbolicityLoss(format!("h = {}, beta.n = {c}", u.h)));
    }
    let un = primitive_from_conserved(u, h_dry).velocity().dot(n);
    let a = (u.h * c).sqrt();
    Ok([un - a, un, un + a])
}

/// Driving minus resisting accelerations `(s_x, s_y)`, already scaled by
/// the gravity factor. Multiply by `h` for the momentum source.
pub fn source(
    prim: &PrimitiveState,
    zeta: f64,
    dzeta_dx: f64,
    grad_zb: Vec2,
    params: &MaterialParams,
) -> Vec2 {
    let (sin_z, cos_z) = zeta.sin_cos();
    let kappa = -dzeta_dx;
    let speed = prim.speed();
    let (dir_x, dir_y) = if speed >= params.u_reg {
        (prim.u / speed, prim.v / speed)
    } else {
        (0.0, 0.0)
    };
    let normal_load = params.delta.tan() * (cos_z + params.lambda * kappa * prim.u * prim.u);
    let bed = params.epsilon * cos_z;
    let sx = sin_z - dir_x * normal_load - bed * grad_zb.x;
    let sy = -dir_y * normal_load - bed * grad_zb.y;
    Vec2::new(params.gravity * sx, params.gravity * sy)
}

/// `cos(t) F(U) + sin(t) G(U) - T^{-1} F(T U)` for the rotation `T` by
/// angle `t`. Vanishes for every state only when `beta_x == beta_y`.
pub fn rotation_defect(u: &ConservedState, beta: BetaPair, theta: f64) -> ConservedState {
    let (s, c) = theta.sin_cos();
    let lhs = flux_x(u, beta, f64::MIN_POSITIVE) * c + flux_y(u, beta, f64::MIN_POSITIVE) * s;
    let rotated = ConservedState::new(u.h, c * u.hu + s * u.hv, -s * u.hu + c * u.hv);
    let f = flux_x(&rotated, beta, f64::MIN_POSITIVE);
    let back = ConservedState::new(f.h, c * f.hu - s * f.hv, s * f.hu + c * f.hv);
    lhs - back
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    fn params(phi: f64, delta: f64) -> MaterialParams {
        MaterialParams {
            phi: deg(phi),
            delta: deg(delta),
            ..MaterialParams::default()
        }
    }

    #[test]
    fn primitive_conversion() {
        assert_eq!(
            primitive_from_conserved(&ConservedState::new(1.0, 2.0, -1.0), 1e-8),
            PrimitiveState::new(1.0, 2.0, -1.0)
        );
        assert_eq!(
            primitive_from_conserved(&ConservedState::ZERO, 1e-8),
            PrimitiveState::new(0.0, 0.0, 0.0)
        );
        assert_eq!(
            primitive_from_conserved(&ConservedState::new(1e-12, 1e-6, 0.0), 1e-8),
            PrimitiveState::new(1e-12, 0.0, 0.0)
        );
    }

    #[test]
    fn earth_pressure_equal_angles() {
        let p = params(30.0, 30.0);
        for (dudx, dvdy) in [(1.0, 1.0), (-1.0, 1.0), (1.0, -1.0), (-1.0, -1.0)] {
            let k = earth_pressure(&p, dudx, dvdy).unwrap();
            assert_relative_eq!(k.kx, 5.0 / 3.0, max_relative = 1e-12);
        }
        let k = earth_pressure(&p, 0.0, 0.0).unwrap();
        assert_relative_eq!(k.ky, 2.0 / 3.0, max_relative = 1e-12);
        let k = earth_pressure(&p, 1.0, -1e-9).unwrap();
        assert_relative_eq!(k.ky, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn earth_pressure_smooth_bed() {
        let p = params(30.0, 0.0);
        assert_relative_eq!(earth_pressure(&p, 0.5, 0.0).unwrap().kx, 1.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(earth_pressure(&p, -0.5, 0.0).unwrap().kx, 3.0, max_relative = 1e-12);
    }

    #[test]
    fn earth_pressure_rejects_delta_above_phi() {
        let p = params(20.0, 30.0);
        assert!(matches!(earth_pressure(&p, 1.0, 1.0), Err(Error::InvalidFriction { .. })));
        assert!(p.validate().is_err());
    }

    #[test]
    fn beta_examples() {
        let mut p = MaterialParams::default();
        let b = beta(&p, 0.0, EarthPressure { kx: 1.0, ky: 1.0 }).unwrap();
        assert_eq!(b, BetaPair::new(1.0, 1.0));
        let b = beta(&p, deg(60.0), EarthPressure { kx: 2.0, ky: 1.0 }).unwrap();
        assert_relative_eq!(b.bx, 1.0, max_relative = 1e-12);
        assert_relative_eq!(b.by, 0.5, max_relative = 1e-12);
        p.gravity = 9.81;
        let b = beta(&p, deg(40.0), EarthPressure { kx: 1.0, ky: 1.0 }).unwrap();
        assert_relative_eq!(b.bx, 7.5149, max_relative = 1e-5);
        assert!(beta(&p, deg(90.0) + 0.1, EarthPressure { kx: 1.0, ky: 1.0 }).is_err());
    }

    #[test]
    fn flux_examples() {
        let b = BetaPair::new(1.0, 1.0);
        let f = flux_normal(&ConservedState::new(1.0, 1.0, 0.0), b, Vec2::new(1.0, 0.0), 1e-8);
        assert_eq!(f, ConservedState::new(1.0, 1.5, 0.0));
        let f = flux_normal(&ConservedState::ZERO, b, Vec2::new(0.6, 0.8), 1e-8);
        assert_eq!(f, ConservedState::ZERO);
        let f = flux_normal(
            &ConservedState::new(1.0, 0.0, 2.0),
            BetaPair::new(1.0, 4.0),
            Vec2::new(0.0, 1.0),
            1e-8,
        );
        assert_eq!(f, ConservedState::new(2.0, 0.0, 6.0));
    }

    #[test]
    fn flux_normal_matches_directional_fluxes() {
        let b = BetaPair::new(0.7, 1.9);
        let u = ConservedState::new(1.3, -0.4, 2.2);
        assert_eq!(flux_normal(&u, b, Vec2::new(1.0, 0.0), 1e-8), flux_x(&u, b, 1e-8));
        assert_eq!(flux_normal(&u, b, Vec2::new(0.0, 1.0), 1e-8), flux_y(&u, b, 1e-8));
    }

    #[test]
    fn eigenvalue_examples() {
        let l = eigenvalues(&ConservedState::new(1.0, 2.0, 0.0), BetaPair::new(1.0, 1.0), Vec2::new(1.0, 0.0), 1e-8)
            .unwrap();
        assert_eq!(l, [1.0, 2.0, 3.0]);
        let l = eigenvalues(&ConservedState::new(1.0, 0.0, 0.0), BetaPair::new(1.0, 4.0), Vec2::new(0.0, 1.0), 1e-8)
            .unwrap();
        assert_eq!(l, [-2.0, 0.0, 2.0]);
        let l = eigenvalues(&ConservedState::ZERO, BetaPair::new(1.0, 4.0), Vec2::new(0.0, 1.0), 1e-8).unwrap();
        assert_eq!(l, [0.0; 3]);
        assert!(eigenvalues(&ConservedState::new(1.0, 0.0, 0.0), BetaPair::new(-1.0, -1.0), Vec2::new(1.0, 0.0), 1e-8)
            .is_err());
    }

    #[test]
    fn source_examples() {
        let p = MaterialParams::default();
        let s = source(&PrimitiveState::new(1.0, 0.0, 0.0), 0.0, 0.0, Vec2::ZERO, &p);
        assert_eq!(s, Vec2::ZERO);

        let p = MaterialParams {
            delta: deg(24.5),
            phi: deg(30.0),
            gravity: 9.81,
            ..MaterialParams::default()
        };
        let s = source(&PrimitiveState::new(1.0, 0.3, 0.0), deg(40.0), 0.0, Vec2::ZERO, &p);
        let expected = 9.81 * (deg(40.0).sin() - deg(24.5).tan() * deg(40.0).cos());
        assert_relative_eq!(s.x, expected, max_relative = 1e-12);
        assert_relative_eq!(s.x, 2.8810, max_relative = 1e-4);
        assert_eq!(s.y, 0.0);

        let p = MaterialParams {
            delta: deg(30.0),
            lambda: 1.0,
            ..MaterialParams::default()
        };
        let s = source(&PrimitiveState::new(1.0, 1.0, 0.0), 0.0, -0.1, Vec2::ZERO, &p);
        assert_relative_eq!(s.x, -deg(30.0).tan() * 1.1, max_relative = 1e-12);
        assert_relative_eq!(s.x, -0.63509, max_relative = 1e-5);
    }

    #[test]
    fn rotation_defect_examples() {
        let u = ConservedState::new(2.0, 0.7, -0.3);
        let d = rotation_defect(&u, BetaPair::new(1.0, 2.0), std::f64::consts::FRAC_PI_2);
        assert!(d.h.abs() < 1e-14 && d.hu.abs() < 1e-14);
        assert_relative_eq!(d.hv, 2.0, max_relative = 1e-13);
        let d = rotation_defect(&u, BetaPair::new(1.5, 1.5), 0.9);
        assert!(d.max_abs_diff(&ConservedState::ZERO) < 1e-14);
        let d = rotation_defect(&u, BetaPair::new(0.3, 2.5), 0.0);
        assert_eq!(d, ConservedState::ZERO);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rotation_defect_closed_form(
                h in 0.01f64..2.0, u in -2.0f64..2.0, v in -2.0f64..2.0,
                bx in 0.1f64..2.0, by in 0.1f64..2.0, theta in -3.2f64..3.2,
            ) {
                let d = rotation_defect(&ConservedState::new(h, h * u, h * v), BetaPair::new(bx, by), theta);
                prop_assert!(d.h.abs() < 1e-13);
                prop_assert!(d.hu.abs() < 1e-13);
                prop_assert!((d.hv - 0.5 * (by - bx) * h * h * theta.sin()).abs() < 1e-13);
            }

            #[test]
            fn eigenvalues_real_ascending(
                h in 1e-3f64..5.0, u in -5.0f64..5.0, v in -5.0f64..5.0,
                bx in 0.01f64..5.0, by in 0.01f64..5.0, a in 0.0f64..6.3,
            ) {
                let n = Vec2::new(a.cos(), a.sin());
                let l = eigenvalues(&ConservedState::new(h, h * u, h * v), BetaPair::new(bx, by), n, 1e-8).unwrap();
                prop_assert!(l.iter().all(|x| x.is_finite()));
                prop_assert!(l[0] < l[1] && l[1] < l[2]);
            }

            #[test]
            fn pressure_piecewise_constant(a in 1e-9f64..10.0, b in 1e-9f64..10.0, sx in any::<bool>(), sy in any::<bool>()) {
                let t = EarthPressureTable::new(35f64.to_radians(), 25f64.to_radians()).unwrap();
                let sgn = |s: bool| if s { 1.0 } else { -1.0 };
                prop_assert_eq!(t.select(sgn(sx) * a, sgn(sy) * b), t.select(sgn(sx), sgn(sy)));
            }

            #[test]
            fn friction_opposes_motion(
                u in -3.0f64..3.0, v in -3.0f64..3.0, kappa in 0.0f64..1.0, zeta in 0.0f64..1.2,
            ) {
                let p = MaterialParams { delta: 0.5, phi: 0.6, ..MaterialParams::default() };
                let prim = PrimitiveState::new(1.0, u, v);
                let s = source(&prim, zeta, -kappa, Vec2::ZERO, &p);
                let driving = Vec2::new(zeta.sin(), 0.0);
                let friction = s - driving;
                if prim.speed() >= p.u_reg {
                    prop_assert!(friction.dot(prim.velocity()) < 0.0);
                } else {
                    prop_assert_eq!(friction, Vec2::ZERO);
                }
            }
        }
    }
}
