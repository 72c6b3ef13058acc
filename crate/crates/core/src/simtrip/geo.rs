use serde::{Deserialize, Serialize};

use crate::sensorlog::GeoPoint;

/// Mean Earth radius in metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// East-north plane tangent at `origin`, adequate over a campus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalFrame {
    pub origin: GeoPoint,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        Self { origin }
    }

    pub fn to_geo(&self, p: [f64; 2]) -> GeoPoint {
        let lat0 = self.origin.lat.to_radians();
        GeoPoint::new(
            self.origin.lat + (p[1] / EARTH_RADIUS_M).to_degrees(),
            self.origin.lon + (p[0] / (EARTH_RADIUS_M * lat0.cos())).to_degrees(),
        )
    }

    pub fn to_local(&self, g: GeoPoint) -> [f64; 2] {
        let lat0 = self.origin.lat.to_radians();
        [
            (g.lon - self.origin.lon).to_radians() * EARTH_RADIUS_M * lat0.cos(),
            (g.lat - self.origin.lat).to_radians() * EARTH_RADIUS_M,
        ]
    }
}

pub(crate) fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

pub(crate) fn scale(a: [f64; 2], k: f64) -> [f64; 2] {
    [a[0] * k, a[1] * k]
}

pub(crate) fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    norm(sub(a, b))
}

pub(crate) fn lerp(a: [f64; 2], b: [f64; 2], u: f64) -> [f64; 2] {
    add(a, scale(sub(b, a), u))
}

pub(crate) fn unit(angle: f64) -> [f64; 2] {
    [angle.cos(), angle.sin()]
}

/// Point `w` with `|a w| + |w b| = length`, on the perpendicular bisector of
/// `ab`, on the side given by the sign of `side`. Falls back to the midpoint
/// when `length <= |ab|`.
pub(crate) fn detour_point(a: [f64; 2], b: [f64; 2], length: f64, side: f64) -> [f64; 2] {
    let mid = lerp(a, b, 0.5);
    let d = dist(a, b);
    if length <= d || d == 0.0 {
        return mid;
    }
    let h = ((length / 2.0).powi(2) - (d / 2.0).powi(2)).sqrt();
    let ab = sub(b, a);
    let perp = [-ab[1] / d, ab[0] / d];
    add(mid, scale(perp, h * side.signum()))
}
