//! Reference ellipsoid, normal gravity and frame-rate helpers for an
//! east-north-up local-level navigation frame.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// WGS-84 semi-major axis [m].
pub const WGS84_EQUATORIAL_RADIUS: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_FLATTENING: f64 = 1.0 / 298.257_223_563;
/// Sidereal rotation rate of the earth [rad/s].
pub const EARTH_ROTATION_RATE: f64 = 7.292_115e-5;

/// How the gravity vector in the navigation frame is produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GravityModel {
    /// Somigliana normal gravity with a free-air height correction.
    Normal,
    /// A fixed magnitude [m/s^2], independent of position.
    Constant { magnitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    pub equatorial_radius: f64,
    pub flattening: f64,
    /// Earth rotation rate [rad/s]. Zero gives a non-rotating earth.
    pub rotation_rate: f64,
    pub gravity: GravityModel,
    /// Whether the navigation frame rotates as the vehicle moves over the
    /// curved earth (transport rate). Disabling it together with
    /// `rotation_rate = 0` yields an inertial navigation frame.
    pub transport_rate: bool,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self::wgs84()
    }
}

impl EarthModel {
    pub fn wgs84() -> Self {
        EarthModel {
            equatorial_radius: WGS84_EQUATORIAL_RADIUS,
            flattening: WGS84_FLATTENING,
            rotation_rate: EARTH_ROTATION_RATE,
            gravity: GravityModel::Normal,
            transport_rate: true,
        }
    }

    /// WGS-84 geometry with a non-rotating, non-transporting navigation frame
    /// and the given constant gravity. Handy for closed-form checks.
    pub fn inertial(gravity: f64) -> Self {
        EarthModel {
            rotation_rate: 0.0,
            gravity: GravityModel::Constant { magnitude: gravity },
            transport_rate: false,
            ..Self::wgs84()
        }
    }

    pub fn eccentricity_sq(&self) -> f64 {
        self.flattening * (2.0 - self.flattening)
    }

    /// Meridian (north-south) and prime-vertical (east-west) radii of
    /// curvature at latitude `lat`.
    pub fn radii(&self, lat: f64) -> (f64, f64) {
        let e2 = self.eccentricity_sq();
        let s2 = lat.sin().powi(2);
        let w = (1.0 - e2 * s2).sqrt();
        let meridian = self.equatorial_radius * (1.0 - e2) / (w * w * w);
        let prime_vertical = self.equatorial_radius / w;
        (meridian, prime_vertical)
    }

    pub fn gravity_magnitude(&self, lat: f64, height: f64) -> f64 {
        match self.gravity {
            GravityModel::Constant { magnitude } => magnitude,
            GravityModel::Normal => {
                let s2 = lat.sin().powi(2);
                let surface =
                    9.780_325_335_9 * (1.0 + 0.001_931_852_652_41 * s2) / (1.0 - 0.006_694_379_990_13 * s2).sqrt();
                surface - 3.086e-6 * height
            }
        }
    }

    /// Gravity vector in ENU coordinates.
    pub fn gravity_enu(&self, lat: f64, height: f64) -> Vector3<f64> {
        Vector3::new(0.0, 0.0, -self.gravity_magnitude(lat, height))
    }

    /// Earth rate resolved in the local-level frame.
    pub fn earth_rate_enu(&self, lat: f64) -> Vector3<f64> {
        Vector3::new(0.0, self.rotation_rate * lat.cos(), self.rotation_rate * lat.sin())
    }

    /// Transport rate of the local-level frame for ENU velocity `v`.
    pub fn transport_rate_enu(&self, v: &Vector3<f64>, lat: f64, height: f64) -> Vector3<f64> {
        if !self.transport_rate {
            return Vector3::zeros();
        }
        let (rm, rn) = self.radii(lat);
        Vector3::new(-v.y / (rm + height), v.x / (rn + height), v.x * lat.tan() / (rn + height))
    }

    /// Maps ENU velocity to geodetic rates `[lat_dot, lon_dot, h_dot]`.
    ///
    /// Columns follow the ENU velocity components, so the latitude row picks
    /// up `V_N`, the longitude row `V_E` and the height row `V_U`.
    pub fn geodetic_rates(&self, v: &Vector3<f64>, lat: f64, height: f64) -> Vector3<f64> {
        let (rm, rn) = self.radii(lat);
        Vector3::new(v.y / (rm + height), v.x / ((rn + height) * lat.cos()), v.z)
    }

    pub fn geodetic_to_ecef(&self, geo: &Geodetic) -> Vector3<f64> {
        let (_, rn) = self.radii(geo.lat);
        let e2 = self.eccentricity_sq();
        let (sl, cl) = geo.lat.sin_cos();
        let (so, co) = geo.lon.sin_cos();
        Vector3::new((rn + geo.height) * cl * co, (rn + geo.height) * cl * so, (rn * (1.0 - e2) + geo.height) * sl)
    }

    /// ENU coordinates of `geo` relative to the tangent frame at `origin`.
    pub fn geodetic_to_enu(&self, geo: &Geodetic, origin: &Geodetic) -> Vector3<f64> {
        let d = self.geodetic_to_ecef(geo) - self.geodetic_to_ecef(origin);
        let (sl, cl) = origin.lat.sin_cos();
        let (so, co) = origin.lon.sin_cos();
        Vector3::new(
            -so * d.x + co * d.y,
            -sl * co * d.x - sl * so * d.y + cl * d.z,
            cl * co * d.x + cl * so * d.y + sl * d.z,
        )
    }

    /// Inverse of [`EarthModel::geodetic_to_enu`] for small offsets: places a
    /// point `enu` metres from `origin` using the local radii of curvature.
    pub fn offset_geodetic(&self, origin: &Geodetic, enu: &Vector3<f64>) -> Geodetic {
        let (rm, rn) = self.radii(origin.lat);
        Geodetic {
            lat: origin.lat + enu.y / (rm + origin.height),
            lon: origin.lon + enu.x / ((rn + origin.height) * origin.lat.cos()),
            height: origin.height + enu.z,
        }
    }
}

/// Geodetic position: latitude and longitude in radians, height in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geodetic {
    pub lat: f64,
    pub lon: f64,
    pub height: f64,
}

impl Geodetic {
    pub fn new(lat: f64, lon: f64, height: f64) -> Self {
        Geodetic { lat, lon, height }
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, height: f64) -> Self {
        Geodetic::new(lat_deg.to_radians(), lon_deg.to_radians(), height)
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.lat, self.lon, self.height)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Geodetic::new(v.x, v.y, v.z)
    }
}
