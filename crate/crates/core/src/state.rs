//! Small value types shared by every module.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Conserved unknowns `(h, hu, hv)`.
///
/// Also used for flux vectors and source terms, which share the layout.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ConservedState {
    pub h: f64,
    pub hu: f64,
    pub hv: f64,
}

impl ConservedState {
    pub const ZERO: ConservedState = ConservedState {
        h: 0.0,
        hu: 0.0,
        hv: 0.0,
    };

    pub const fn new(h: f64, hu: f64, hv: f64) -> Self {
        ConservedState { h, hu, hv }
    }

    pub fn is_finite(&self) -> bool {
        self.h.is_finite() && self.hu.is_finite() && self.hv.is_finite()
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.h, self.hu, self.hv]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ConservedState::new(a[0], a[1], a[2])
    }

    pub fn max_abs_diff(&self, o: &ConservedState) -> f64 {
        (self.h - o.h)
            .abs()
            .max((self.hu - o.hu).abs())
            .max((self.hv - o.hv).abs())
    }
}

impl Add for ConservedState {
    type Output = ConservedState;
    fn add(self, o: Self) -> Self {
        ConservedState::new(self.h + o.h, self.hu + o.hu, self.hv + o.hv)
    }
}

impl AddAssign for ConservedState {
    fn add_assign(&mut self, o: Self) {
        self.h += o.h;
        self.hu += o.hu;
        self.hv += o.hv;
    }
}

impl Sub for ConservedState {
    type Output = ConservedState;
    fn sub(self, o: Self) -> Self {
        ConservedState::new(self.h - o.h, self.hu - o.hu, self.hv - o.hv)
    }
}

impl Mul<f64> for ConservedState {
    type Output = ConservedState;
    fn mul(self, s: f64) -> Self {
        ConservedState::new(self.h * s, self.hu * s, self.hv * s)
    }
}

impl Neg for ConservedState {
    type Output = ConservedState;
    fn neg(self) -> Self {
        ConservedState::new(-self.h, -self.hu, -self.hv)
    }
}

/// Depth and depth-averaged velocity `(h, u, v)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrimitiveState {
    pub h: f64,
    pub u: f64,
    pub v: f64,
}

impl PrimitiveState {
    pub const fn new(h: f64, u: f64, v: f64) -> Self {
        PrimitiveState { h, u, v }
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.u, self.v)
    }

    pub fn speed(&self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// Sum of three terms, added in order of increasing magnitude.
///
/// The result depends only on the multiset of magnitudes and signs, not on
/// argument order, and negating every term negates the result exactly.
/// Mirror-image cells list their edges in a different order; this keeps
/// their updates bitwise mirrored.
pub fn sum3(a: f64, b: f64, c: f64) -> f64 {
    let mut t = [a, b, c];
    t.sort_unstable_by(|x, y| x.abs().total_cmp(&y.abs()).then(x.total_cmp(y)));
    // Equal magnitudes with opposite signs cancel exactly whichever comes first.
    (t[0] + t[1]) + t[2]
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sum3_is_order_independent() {
        let (a, b, c) = (0.1, 1e16, -0.30000000000000004);
        let s = sum3(a, b, c);
        for (x, y, z) in [(a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
            assert_eq!(sum3(x, y, z).to_bits(), s.to_bits());
        }
        assert_eq!(sum3(-a, -b, -c).to_bits(), (-s).to_bits());
        assert_eq!(sum3(1.5, -1.5, 2.0), 2.0);
    }
}
