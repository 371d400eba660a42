//! Two-sample strapdown mechanization in an east-north-up frame.
//!
//! Body axes are right-forward-up. Yaw is the heading measured clockwise
//! from north, so a positive rate about the body z axis decreases yaw.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::earth::{EarthModel, Geodetic};
use super::SinsError;

/// Largest tolerated `|C C^T - I|` entry for an attitude matrix.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Latitudes closer than this to a pole are rejected by the position update.
pub const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    /// Rotation about the body x axis, in `[-pi/2, pi/2]`.
    pub pitch: f64,
    /// Rotation about the body y axis.
    pub roll: f64,
    /// Heading, clockwise from north.
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(pitch: f64, roll: f64, yaw: f64) -> Self {
        EulerAngles { pitch, roll, yaw }
    }

    /// Recovers the angles from a body-to-navigation matrix.
    pub fn from_matrix(c: &Matrix3<f64>) -> Self {
        let pitch = c[(2, 1)].clamp(-1.0, 1.0).asin();
        let roll = (-c[(2, 0)]).atan2(c[(2, 2)]);
        let yaw = c[(0, 1)].atan2(c[(1, 1)]);
        EulerAngles { pitch, roll, yaw }
    }
}

/// Body-to-navigation attitude matrix for the given Euler angles.
pub fn attitude_matrix(a: &EulerAngles) -> Matrix3<f64> {
    let (st, ct) = a.pitch.sin_cos();
    let (sg, cg) = a.roll.sin_cos();
    let (sp, cp) = a.yaw.sin_cos();
    Matrix3::new(
        cg * cp + sg * sp * st,
        sp * ct,
        sg * cp - cg * sp * st,
        -cg * sp + sg * cp * st,
        cp * ct,
        -sg * sp - cg * cp * st,
        -sg * ct,
        st,
        cg * ct,
    )
}

/// Attitude, velocity and position of one vehicle at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    /// Body-to-navigation direction cosine matrix.
    pub attitude: Matrix3<f64>,
    /// `[V_E, V_N, V_U]` in m/s.
    pub velocity: Vector3<f64>,
    pub position: Geodetic,
    pub time: f64,
}

impl NavState {
    pub fn new(euler: EulerAngles, velocity: Vector3<f64>, position: Geodetic, time: f64) -> Self {
        NavState { attitude: attitude_matrix(&euler), velocity, position, time }
    }

    pub fn euler(&self) -> EulerAngles {
        EulerAngles::from_matrix(&self.attitude)
    }
}

/// Gyro and accelerometer increments over one update interval, split into
/// two equal sub-intervals.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImuSample {
    pub t_start: f64,
    pub t_end: f64,
    pub dtheta1: Vector3<f64>,
    pub dtheta2: Vector3<f64>,
    pub dv1: Vector3<f64>,
    pub dv2: Vector3<f64>,
}

impl ImuSample {
    pub fn interval(&self) -> f64 {
        self.t_end - self.t_start
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn orthonormality_error(c: &Matrix3<f64>) -> f64 {
    (c * c.transpose() - Matrix3::identity()).abs().max()
}

fn reorthonormalize(c: Matrix3<f64>) -> Matrix3<f64> {
    // one Newton step of the polar decomposition
    let mut c = 1.5 * c - 0.5 * c * c.transpose() * c;
    if orthonormality_error(&c) > 1e-14 {
        c = 1.5 * c - 0.5 * c * c.transpose() * c;
    }
    c
}

/// Two-sample coning-compensated rotation vector.
pub fn coning_rotation_vector(s: &ImuSample) -> Vector3<f64> {
    s.dtheta1 + s.dtheta2 + (2.0 / 3.0) * s.dtheta1.cross(&s.dtheta2)
}

/// Navigation-frame angular rate (earth rate plus transport rate).
fn nav_frame_rate(state: &NavState, earth: &EarthModel) -> Vector3<f64> {
    let p = &state.position;
    earth.earth_rate_enu(p.lat) + earth.transport_rate_enu(&state.velocity, p.lat, p.height)
}

pub fn propagate_attitude(prev: &NavState, s: &ImuSample, earth: &EarthModel) -> Result<Matrix3<f64>, SinsError> {
    let err = orthonormality_error(&prev.attitude);
    if !(err <= ORTHONORMAL_TOL) {
        return Err(SinsError::NonOrthonormalAttitude(err));
    }
    let body = Rotation3::new(coning_rotation_vector(s)).into_inner();
    let nav_turn = nav_frame_rate(prev, earth) * s.interval();
    let nav = Rotation3::new(-nav_turn).into_inner();
    Ok(reorthonormalize(nav * prev.attitude * body))
}

/// Velocity update. `c` is the attitude at the start of the interval; the
/// half-interval rotation of the navigation frame is compensated here.
pub fn update_velocity(prev: &NavState, s: &ImuSample, c: &Matrix3<f64>, earth: &EarthModel) -> Vector3<f64> {
    let t = s.interval();
    let dtheta = s.dtheta1 + s.dtheta2;
    let dv = s.dv1 + s.dv2;
    let rotation = 0.5 * dtheta.cross(&dv);
    let sculling = (2.0 / 3.0) * (s.dtheta1.cross(&s.dv2) + s.dv1.cross(&s.dtheta2));
    let win = nav_frame_rate(prev, earth);
    let half_turn = Matrix3::identity() - 0.5 * t * skew(&win);
    let dv_sf = half_turn * c * (dv + rotation + sculling);

    let p = &prev.position;
    let wie = earth.earth_rate_enu(p.lat);
    let wen = earth.transport_rate_enu(&prev.velocity, p.lat, p.height);
    let coriolis = (2.0 * wie + wen).cross(&prev.velocity);
    let dv_cor_g = (earth.gravity_enu(p.lat, p.height) - coriolis) * t;

    prev.velocity + dv_sf + dv_cor_g
}

/// Trapezoidal position update with the velocity-to-geodetic-rate map
/// evaluated at the mid-interval position.
pub fn update_position(
    prev: &Geodetic,
    v_prev: &Vector3<f64>,
    v_new: &Vector3<f64>,
    t: f64,
    earth: &EarthModel,
) -> Result<Geodetic, SinsError> {
    if !(t > 0.0) {
        return Err(SinsError::NonPositiveInterval(t));
    }
    if std::f64::consts::FRAC_PI_2 - prev.lat.abs() < POLE_GUARD {
        return Err(SinsError::PolarSingularity(prev.lat));
    }
    let v_mean = 0.5 * (v_prev + v_new);
    let half = earth.geodetic_rates(v_prev, prev.lat, prev.height) * (0.5 * t);
    let mid = prev.as_vector() + half;
    if std::f64::consts::FRAC_PI_2 - mid.x.abs() < POLE_GUARD {
        return Err(SinsError::PolarSingularity(mid.x));
    }
    let step = earth.geodetic_rates(&v_mean, mid.x, mid.z) * t;
    Ok(Geodetic::from_vector(&(prev.as_vector() + step)))
}

/// Runs the full attitude/velocity/position loop over a trace. The returned
/// vector starts with `init` and holds one state per update epoch.
pub fn dead_reckon(init: &NavState, trace: &[ImuSample], earth: &EarthModel) -> Result<Vec<NavState>, SinsError> {
    let mut out = Vec::with_capacity(trace.len() + 1);
    out.push(*init);
    let mut state = *init;
    for (i, s) in trace.iter().enumerate() {
        let gap = (s.t_start - state.time).abs();
        if gap > 1e-9 * (1.0 + state.time.abs()) || !(s.t_end > s.t_start) {
            return Err(SinsError::TraceGap { index: i, time: s.t_start });
        }
        let attitude = propagate_attitude(&state, s, earth)?;
        let velocity = update_velocity(&state, s, &state.attitude, earth);
        let position = update_position(&state.position, &state.velocity, &velocity, s.interval(), earth)?;
        state = NavState { attitude, velocity, position, time: s.t_end };
        out.push(state);
    }
    Ok(out)
}
