//! HLL interface flux with wet/dry wave-speed estimates.
//!
//! The pressure factor differs across an interface (each side has its own
//! earth pressure branch), so the left and right physical fluxes and
//! celerities use `beta_left` and `beta_right` respectively. No rotation to
//! edge-aligned coordinates is made: with `beta_x != beta_y` the system is
//! not rotationally invariant and the flux is evaluated directly along `n`.
//!
//! Expressions are ordered so that swapping the two sides and flipping the
//! normal negates the flux bit-for-bit.

use crate::error::{Error, Result};
use crate::physics::{flux_normal, primitive_from_conserved, BetaPair};
use crate::state::{ConservedState, Vec2};

/// Traces on both sides of an interface, with `normal` pointing from left
/// to right.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannStates {
    pub left: ConservedState,
    pub right: ConservedState,
    pub beta_left: BetaPair,
    pub beta_right: BetaPair,
    pub normal: Vec2,
}

impl RiemannStates {
    /// Same problem seen from the other side.
    pub fn swapped(&self) -> RiemannStates {
        RiemannStates {
            left: self.right,
            right: self.left,
            beta_left: self.beta_right,
            beta_right: self.beta_left,
            normal: -self.normal,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveSpeeds {
    pub left: f64,
    pub right: f64,
}

/// `beta_x n_x^2 + beta_y n_y^2`.
pub fn gravity_coeff(beta: BetaPair, n: Vec2) -> Result<f64> {
    let c = beta.along(n);
    if c < 0.0 || !c.is_finite() {
        return Err(Error::HyperbolicityLoss(format!("beta.n = {c}")));
    }
    Ok(c)
}

struct Side {
    h: f64,
    un: f64,
    c: f64,
    /// `sqrt(c h)`.
    celerity: f64,
}

fn side(u: &ConservedState, beta: BetaPair, n: Vec2, h_dry: f64) -> Result<Side> {
    let c = gravity_coeff(beta, n)?;
    let p = primitive_from_conserved(u, h_dry);
    let h = u.h.max(0.0);
    Ok(Side {
        h,
        un: p.u * n.x + p.v * n.y,
        c,
        celerity: (c * h).sqrt(),
    })
}

fn star(l: &Side, r: &Side) -> (f64, f64) {
    let u_star = 0.5 * (l.un + r.un) + (l.celerity - r.celerity);
    let c_bar = 0.5 * (l.c + r.c);
    let bracket = 0.5 * (l.celerity + r.celerity) + 0.25 * (l.un - r.un);
    (u_star, bracket * bracket / c_bar)
}

/// Intermediate velocity and depth `(u_*, h_*)` of the two-rarefaction
/// estimate. The depth divisor is the mean of the two sides' `beta.n`.
pub fn star_estimates(states: &RiemannStates, h_dry: f64) -> Result<(f64, f64)> {
    let l = side(&states.left, states.beta_left, states.normal, h_dry)?;
    let r = side(&states.right, states.beta_right, states.normal, h_dry)?;
    if l.h < h_dry || r.h < h_dry {
        return Err(Error::HyperbolicityLoss(
            "star estimates need both sides wet".into(),
        ));
    }
    Ok(star(&l, &r))
}

fn speeds(l: &Side, r: &Side, h_dry: f64) -> WaveSpeeds {
    if r.h < h_dry {
        WaveSpeeds {
            left: l.un - l.celerity,
            right: l.un + 2.0 * l.celerity,
        }
    } else if l.h < h_dry {
        WaveSpeeds {
            left: r.un - 2.0 * r.celerity,
            right: r.un + r.celerity,
        }
    } else {
        let (u_star, h_star) = star(l, r);
        WaveSpeeds {
            left: (l.un - l.celerity).min(u_star - (l.c * h_star).sqrt()),
            right: (r.un + r.celerity).max(u_star + (r.c * h_star).sqrt()),
        }
    }
}

/// Left and right signal speeds. Expects at least one wet side.
pub fn wave_speeds(states: &RiemannStates, h_dry: f64) -> Result<WaveSpeeds> {
    let l = side(&states.left, states.beta_left, states.normal, h_dry)?;
    let r = side(&states.right, states.beta_right, states.normal, h_dry)?;
    Ok(speeds(&l, &r, h_dry))
}

/// HLL numerical flux along `states.normal`. Both sides dry gives zero.
pub fn hll_flux(states: &RiemannStates, h_dry: f64) -> Result<ConservedState> {
    let (ul, ur, n) = (&states.left, &states.right, states.normal);
    if ul.h < h_dry && ur.h < h_dry {
        return Ok(ConservedState::ZERO);
    }
    let l = side(ul, states.beta_left, n, h_dry)?;
    let r = side(ur, states.beta_right, n, h_dry)?;
    let s = speeds(&l, &r, h_dry);
    let flux = if s.left >= 0.0 {
        flux_normal(ul, states.beta_left, n, h_dry)
    } else if s.right <= 0.0 {
        flux_normal(ur, states.beta_right, n, h_dry)
    } else {
        let fl = flux_normal(ul, states.beta_left, n, h_dry);
        let fr = flux_normal(ur, states.beta_right, n, h_dry);
        let (sl, sr) = (s.left, s.right);
        let prod = sr * sl;
        let inv = 1.0 / (sr - sl);
        let avg = |a: f64, b: f64, qa: f64, qb: f64| ((sr * a - sl * b) + prod * (qb - qa)) * inv;
        ConservedState::new(
            avg(fl.h, fr.h, ul.h, ur.h),
            avg(fl.hu, fr.hu, ul.hu, ur.hu),
            avg(fl.hv, fr.hv, ul.hv, ur.hv),
        )
    };
    if !flux.is_finite() {
        return Err(Error::NonFinite {
            stage: "hll flux",
            location: format!("{states:?}"),
        });
    }
    Ok(flux)
}
