//! Vehicle routes over geographic waypoints and position interpolation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::event::SimTime;
use crate::model::GeoPoint;

/// Mean Earth radius used for great-circle distances.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RouteError {
    #[error("a route needs at least two waypoints")]
    TooFewWaypoints,
    #[error("waypoints {0} and {1} coincide")]
    RepeatedWaypoint(usize, usize),
    #[error("speed must be positive")]
    NonPositiveSpeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    waypoints: Vec<GeoPoint>,
    segment_km: Vec<f64>,
    length_km: f64,
    speed_kmh: f64,
}

impl Route {
    pub fn new(waypoints: Vec<GeoPoint>, speed_kmh: f64) -> Result<Self, RouteError> {
        if waypoints.len() < 2 {
            return Err(RouteError::TooFewWaypoints);
        }
        if !(speed_kmh > 0.0 && speed_kmh.is_finite()) {
            return Err(RouteError::NonPositiveSpeed);
        }
        let mut segment_km = Vec::with_capacity(waypoints.len() - 1);
        for (i, pair) in waypoints.windows(2).enumerate() {
            let d = haversine_km(pair[0], pair[1]);
            if d <= 0.0 {
                return Err(RouteError::RepeatedWaypoint(i, i + 1));
            }
            segment_km.push(d);
        }
        let length_km = segment_km.iter().sum();
        Ok(Route {
            waypoints,
            segment_km,
            length_km,
            speed_kmh,
        })
    }

    pub fn waypoints(&self) -> &[GeoPoint] {
        &self.waypoints
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn speed_kmh(&self) -> f64 {
        self.speed_kmh
    }

    /// Time to cover the full route, rounded up to the millisecond.
    pub fn duration(&self) -> SimTime {
        travel_time(self.length_km, self.speed_kmh)
    }

    /// Point at `distance_km` along the polyline, interpolating linearly
    /// within the segment that contains it.
    pub fn point_at(&self, distance_km: f64) -> GeoPoint {
        let mut remaining = distance_km.clamp(0.0, self.length_km);
        for (i, seg) in self.segment_km.iter().enumerate() {
            if remaining <= *seg {
                let f = remaining / seg;
                let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
                return GeoPoint::new(a.lat + f * (b.lat - a.lat), a.lon + f * (b.lon - a.lon));
            }
            remaining -= seg;
        }
        *self.waypoints.last().expect("at least two waypoints")
    }
}

pub fn travel_time(length_km: f64, speed_kmh: f64) -> SimTime {
    SimTime::from_secs_f64_ceil(length_km / speed_kmh * 3600.0)
}

/// Position and progress after `elapsed` on the road. Progress is clamped
/// to 1 once the route is covered.
pub fn vehicle_position(route: &Route, elapsed: SimTime) -> (GeoPoint, f64) {
    let hours = elapsed.as_secs_f64() / 3600.0;
    let distance = (route.speed_kmh * hours).min(route.length_km);
    if distance >= route.length_km {
        return (*route.waypoints.last().expect("non-empty"), 1.0);
    }
    (route.point_at(distance), distance / route.length_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleStatus {
    EnRoute,
    Arrived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub tracking_number: String,
    pub shipment_id: String,
    pub position: GeoPoint,
    pub progress: f64,
    pub status: VehicleStatus,
}

pub fn tracking_number(counter: u64) -> String {
    format!("TRK-{counter:08}")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two points on one meridian exactly `km` apart.
    fn meridian_route(km: f64, speed: f64) -> Route {
        let dlat = (km / EARTH_RADIUS_KM).to_degrees();
        Route::new(vec![GeoPoint::new(0.0, 10.0), GeoPoint::new(dlat, 10.0)], speed).unwrap()
    }

    #[test]
    fn haversine_matches_arc_length() {
        // A degree of latitude is R * pi / 180.
        let d = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(1.0, 0.0));
        assert!((d - EARTH_RADIUS_KM * std::f64::consts::PI / 180.0).abs() < 1e-9);
        assert_eq!(haversine_km(GeoPoint::new(5.0, 5.0), GeoPoint::new(5.0, 5.0)), 0.0);
    }

    #[test]
    fn halfway_after_six_minutes() {
        let r = meridian_route(10.0, 50.0);
        assert!((r.length_km() - 10.0).abs() < 1e-9);
        // 50 km/h * 0.1 h = 5 km
        let (pos, progress) = vehicle_position(&r, SimTime::from_secs(360));
        assert!((progress - 0.5).abs() < 1e-9);
        let mid = r.waypoints()[1].lat / 2.0;
        assert!((pos.lat - mid).abs() < 1e-12);
    }

    #[test]
    fn start_and_clamp() {
        let r = meridian_route(10.0, 50.0);
        let (pos, progress) = vehicle_position(&r, SimTime::ZERO);
        assert_eq!(progress, 0.0);
        assert_eq!(pos, r.waypoints()[0]);
        let (pos, progress) = vehicle_position(&r, SimTime::from_secs(100_000));
        assert_eq!(progress, 1.0);
        assert_eq!(pos, r.waypoints()[1]);
        let (_, at_duration) = vehicle_position(&r, r.duration());
        assert_eq!(at_duration, 1.0);
    }

    #[test]
    fn multi_segment_interpolation() {
        let r = Route::new(
            vec![
                GeoPoint::new(0.0, 0.0),
                GeoPoint::new(0.0, 0.1),
                GeoPoint::new(0.1, 0.1),
            ],
            40.0,
        )
        .unwrap();
        let seg = haversine_km(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.1));
        let p = r.point_at(seg);
        assert!((p.lon - 0.1).abs() < 1e-12 && p.lat.abs() < 1e-12);
        let p = r.point_at(seg + r.length_km() - seg);
        assert_eq!(p, GeoPoint::new(0.1, 0.1));
    }

    #[test]
    fn rejects_degenerate_routes() {
        let a = GeoPoint::new(1.0, 1.0);
        assert_eq!(Route::new(vec![a], 10.0), Err(RouteError::TooFewWaypoints));
        assert_eq!(
            Route::new(vec![a, a], 10.0),
            Err(RouteError::RepeatedWaypoint(0, 1))
        );
        assert_eq!(
            Route::new(vec![a, GeoPoint::new(2.0, 2.0)], 0.0),
            Err(RouteError::NonPositiveSpeed)
        );
    }

    #[test]
    fn tracking_numbers_are_padded() {
        assert_eq!(tracking_number(1), "TRK-00000001");
        assert_eq!(tracking_number(12_345_678), "TRK-12345678");
    }
}
