//! Points on the sphere and great-circle distance.

use std::fmt;

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Returns `None` if either coordinate is non-finite or out of range.
    pub fn new(lat: f64, lon: f64) -> Option<Self> {
        let valid = lat.is_finite()
            && lon.is_finite()
            && (-90.0..=90.0).contains(&lat)
            && (-180.0..=180.0).contains(&lon);
        valid.then_some(GeoPoint { lat, lon })
    }

    /// Midpoint of two nearby points, taking the short way around the antimeridian.
    pub fn midpoint(self, other: GeoPoint) -> GeoPoint {
        let lat = (self.lat + other.lat) / 2.0;
        let mut dlon = other.lon - self.lon;
        if dlon > 180.0 {
            dlon -= 360.0;
        } else if dlon < -180.0 {
            dlon += 360.0;
        }
        let mut lon = self.lon + dlon / 2.0;
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Haversine great-circle distance in meters.
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Lower bound on the distance between two points given only their latitudes.
pub(crate) fn lat_gap_m(a: f64, b: f64) -> f64 {
    (a - b).abs().to_radians() * EARTH_RADIUS_M
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn identity_is_zero() {
        assert_eq!(haversine_m(p(12.5, -40.0), p(12.5, -40.0)), 0.0);
    }

    #[test]
    fn antipodal_on_equator() {
        let expected = PI * EARTH_RADIUS_M;
        assert!((expected - 20_015_086.796).abs() < 1e-2);
        assert!((haversine_m(p(0.0, 0.0), p(0.0, 180.0)) - expected).abs() < 1e-6);
    }

    #[test]
    fn small_arc() {
        let expected = EARTH_RADIUS_M * (0.001f64 * PI / 180.0);
        let d = haversine_m(p(0.0, 0.0), p(0.0, 0.001));
        assert!((d - expected).abs() < 1e-6, "{d} vs {expected}");
        assert!((d - 111.19).abs() < 0.01);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_none());
        assert!(GeoPoint::new(0.0, -180.5).is_none());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_none());
    }

    #[test]
    fn midpoint_wraps() {
        let m = p(0.0, 179.9).midpoint(p(0.0, -179.9));
        assert!((m.lon.abs() - 180.0).abs() < 1e-9);
    }

    fn point() -> impl Strategy<Value = GeoPoint> {
        (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(lat, lon)| p(lat, lon))
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(a in point(), b in point(), c in point()) {
            let ab = haversine_m(a, b);
            let ba = haversine_m(b, a);
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-6 * ab.max(1.0));
            let ac = haversine_m(a, c);
            let cb = haversine_m(c, b);
            prop_assert!(ab <= (ac + cb) * (1.0 + 1e-6) + 1e-6);
        }

        #[test]
        fn latitude_gap_is_lower_bound(a in point(), b in point()) {
            prop_assert!(lat_gap_m(a.lat, b.lat) <= haversine_m(a, b) * (1.0 + 1e-9) + 1e-6);
        }
    }
}
