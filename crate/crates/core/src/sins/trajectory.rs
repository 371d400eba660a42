//! Piecewise ground-truth flight paths and the IMU trace they induce.
//!
//! Vehicles fly with a level attitude (multirotor style): the body forward
//! axis follows the horizontal course, pitch and roll stay at zero, and the
//! climb rate is independent of attitude.

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::earth::{EarthModel, Geodetic};
use super::mechanization::{attitude_matrix, EulerAngles, ImuSample, NavState};
use super::SinsError;

/// Integration sub-steps per IMU sub-sample for the truth generator.
const RK4_STEPS: usize = 8;

/// One flight segment. `speed` and `climb_rate`, when set, must equal the
/// values in force when the segment starts; velocity never jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    /// Heading rate [rad/s], clockwise positive.
    #[serde(default)]
    pub turn_rate: f64,
    #[serde(default)]
    pub speed: Option<f64>,
    #[serde(default)]
    pub climb_rate: Option<f64>,
}

impl Segment {
    pub fn straight(duration: f64) -> Self {
        Segment { duration, turn_rate: 0.0, speed: None, climb_rate: None }
    }

    pub fn turn(duration: f64, turn_rate: f64) -> Self {
        Segment { duration, turn_rate, speed: None, climb_rate: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: Geodetic,
    pub speed: f64,
    /// Initial heading [rad], clockwise from north.
    pub heading: f64,
    #[serde(default)]
    pub climb_rate: f64,
    pub segments: Vec<Segment>,
}

/// Kinematic truth at one instant, excluding position.
#[derive(Debug, Clone, Copy)]
struct Kinematics {
    heading: f64,
    heading_rate: f64,
    velocity: Vector3<f64>,
    acceleration: Vector3<f64>,
}

impl Trajectory {
    /// A hover at `start` for `duration` seconds.
    pub fn stationary(start: Geodetic, duration: f64) -> Self {
        Trajectory { start, speed: 0.0, heading: 0.0, climb_rate: 0.0, segments: vec![Segment::straight(duration)] }
    }

    /// The 240 s survey track used for prediction-accuracy studies: starts
    /// at 29N 106E, 450 m, heads north, jogs west and resumes north. Net
    /// displacement is about 1316 m north and 110 m west at constant height.
    pub fn survey_track() -> Self {
        let jog = 0.96_f64.to_radians();
        Trajectory {
            start: Geodetic::from_degrees(29.0, 106.0, 450.0),
            speed: 5.55,
            heading: 0.0,
            climb_rate: 0.0,
            segments: vec![
                Segment::straight(80.0),
                Segment::turn(20.0, -jog),
                Segment::straight(40.0),
                Segment::turn(20.0, jog),
                Segment::straight(80.0),
            ],
        }
    }

    pub fn duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    pub fn validate(&self) -> Result<(), SinsError> {
        let mut speed = self.speed;
        let mut climb = self.climb_rate;
        let mut t = 0.0;
        for seg in &self.segments {
            if !(seg.duration > 0.0) || !seg.turn_rate.is_finite() {
                return Err(SinsError::InvalidSegment(t));
            }
            if let Some(s) = seg.speed {
                if (s - speed).abs() > 1e-12 {
                    return Err(SinsError::NonSmoothTrajectory(t));
                }
                speed = s;
            }
            if let Some(c) = seg.climb_rate {
                if (c - climb).abs() > 1e-12 {
                    return Err(SinsError::NonSmoothTrajectory(t));
                }
                climb = c;
            }
            t += seg.duration;
        }
        if !(self.speed >= 0.0) || !self.climb_rate.is_finite() {
            return Err(SinsError::InvalidSegment(0.0));
        }
        Ok(())
    }

    /// Segment boundaries strictly inside `(0, duration)`.
    fn breakpoints(&self) -> Vec<f64> {
        let mut t = 0.0;
        let mut out = Vec::new();
        for seg in &self.segments[..self.segments.len().saturating_sub(1)] {
            t += seg.duration;
            out.push(t);
        }
        out
    }

    fn kinematics(&self, t: f64) -> Kinematics {
        let mut heading = self.heading;
        let mut t0 = 0.0;
        let mut rate = 0.0;
        for seg in &self.segments {
            rate = seg.turn_rate;
            if t <= t0 + seg.duration {
                heading += rate * (t - t0);
                t0 = f64::NAN;
                break;
            }
            heading += rate * seg.duration;
            t0 += seg.duration;
        }
        if !t0.is_nan() {
            // past the end: hold the final segment's motion
            heading += rate * (t - t0);
        }
        let (s, c) = heading.sin_cos();
        Kinematics {
            heading,
            heading_rate: rate,
            velocity: Vector3::new(self.speed * s, self.speed * c, self.climb_rate),
            acceleration: Vector3::new(self.speed * c * rate, -self.speed * s * rate, 0.0),
        }
    }

    fn attitude_at(&self, heading: f64) -> Matrix3<f64> {
        attitude_matrix(&EulerAngles::new(0.0, 0.0, heading))
    }

    /// Truth states every `step` seconds from 0 to `duration` inclusive.
    pub fn states(&self, step: f64, duration: f64, earth: &EarthModel) -> Result<Vec<NavState>, SinsError> {
        self.validate()?;
        let n = epochs(step, duration)?;
        let mut pos = self.start.as_vector();
        let mut out = Vec::with_capacity(n + 1);
        for m in 0..=n {
            let t = m as f64 * step;
            if m > 0 {
                let (p, _, _) = self.integrate(pos, t - step, t, earth);
                pos = p;
            }
            let k = self.kinematics(t);
            out.push(NavState {
                attitude: self.attitude_at(k.heading),
                velocity: k.velocity,
                position: Geodetic::from_vector(&pos),
                time: t,
            });
        }
        Ok(out)
    }

    /// RK4 integration of position, angular increment and velocity increment
    /// over `[a, b]`, split at segment boundaries. Returns the end position
    /// and the two body-frame increments.
    fn integrate(
        &self,
        mut pos: Vector3<f64>,
        a: f64,
        b: f64,
        earth: &EarthModel,
    ) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        let mut cuts = vec![a];
        cuts.extend(self.breakpoints().into_iter().filter(|&t| t > a && t < b));
        cuts.push(b);
        let mut dtheta = Vector3::zeros();
        let mut dv = Vector3::zeros();
        // derivative of (position, dtheta, dv); kinematics sampled on the
        // side of the sub-interval so breakpoints are respected
        let deriv = |t: f64, p: &Vector3<f64>, lo: f64, hi: f64| {
            let k = self.kinematics(t.clamp(lo + 1e-12 * (hi - lo), hi - 1e-12 * (hi - lo)));
            let (lat, h) = (p.x, p.z);
            let wie = earth.earth_rate_enu(lat);
            let wen = earth.transport_rate_enu(&k.velocity, lat, h);
            let cnb = self.attitude_at(k.heading).transpose();
            let body_rate = Vector3::new(0.0, 0.0, -k.heading_rate);
            let omega_ib = body_rate + cnb * (wie + wen);
            let f_n = k.acceleration + (2.0 * wie + wen).cross(&k.velocity) - earth.gravity_enu(lat, h);
            (earth.geodetic_rates(&k.velocity, lat, h), omega_ib, cnb * f_n)
        };
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = (hi - lo) / RK4_STEPS as f64;
            for i in 0..RK4_STEPS {
                let t = lo + i as f64 * h;
                let (p1, w1, f1) = deriv(t, &pos, lo, hi);
                let (p2, w2, f2) = deriv(t + 0.5 * h, &(pos + 0.5 * h * p1), lo, hi);
                let (p3, w3, f3) = deriv(t + 0.5 * h, &(pos + 0.5 * h * p2), lo, hi);
                let (p4, w4, f4) = deriv(t + h, &(pos + h * p3), lo, hi);
                pos += h / 6.0 * (p1 + 2.0 * p2 + 2.0 * p3 + p4);
                dtheta += h / 6.0 * (w1 + 2.0 * w2 + 2.0 * w3 + w4);
                dv += h / 6.0 * (f1 + 2.0 * f2 + 2.0 * f3 + f4);
            }
        }
        (pos, dtheta, dv)
    }
}

fn epochs(step: f64, duration: f64) -> Result<usize, SinsError> {
    if !(step > 0.0) || !(duration >= 0.0) {
        return Err(SinsError::NonPositiveInterval(step));
    }
    let n = (duration / step).round();
    if (n * step - duration).abs() > 1e-9 * duration.max(1.0) {
        return Err(SinsError::DurationNotMultiple { duration, step });
    }
    Ok(n as usize)
}

/// Deterministic sensor errors added to simulated increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuErrorModel {
    /// Gyro bias per axis [rad/s].
    pub gyro_bias: [f64; 3],
    /// Accelerometer bias per axis [m/s^2].
    pub accel_bias: [f64; 3],
    /// Angle random walk [rad/sqrt(s)].
    pub gyro_noise: f64,
    /// Velocity random walk [m/s/sqrt(s)].
    pub accel_noise: f64,
    pub seed: u64,
}

impl ImuErrorModel {
    pub fn ideal() -> Self {
        ImuErrorModel { gyro_bias: [0.0; 3], accel_bias: [0.0; 3], gyro_noise: 0.0, accel_noise: 0.0, seed: 0 }
    }

    /// Calibrated low-cost unit: on the survey track the position error
    /// stays near 13 m at 100 s and reaches 8-9% of the distance flown by
    /// 240 s.
    pub fn consumer_grade(seed: u64) -> Self {
        ImuErrorModel {
            gyro_bias: [4.0e-6, -4.0e-6, 5.0e-6],
            accel_bias: [1.0e-3, 1.5e-3, 2.6e-3],
            gyro_noise: 5.0e-6,
            accel_noise: 1.0e-4,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        ImuErrorModel { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), SinsError> {
        let finite = self.gyro_bias.iter().chain(&self.accel_bias).all(|b| b.is_finite());
        if !finite || !(self.gyro_noise >= 0.0) || !(self.accel_noise >= 0.0) {
            return Err(SinsError::InvalidErrorModel);
        }
        Ok(())
    }
}

impl Default for ImuErrorModel {
    fn default() -> Self {
        Self::consumer_grade(0)
    }
}

/// Generates a two-sub-sample IMU trace along `truth`. Each `ImuSample`
/// spans `2 * sample_dt`.
pub fn simulate_imu(
    truth: &Trajectory,
    err: &ImuErrorModel,
    sample_dt: f64,
    duration: f64,
    earth: &EarthModel,
) -> Result<Vec<ImuSample>, SinsError> {
    truth.validate()?;
    err.validate()?;
    let updates = epochs(2.0 * sample_dt, duration)?;
    let mut rng = ChaCha8Rng::seed_from_u64(err.seed);
    let gyro_sd = err.gyro_noise * sample_dt.sqrt();
    let accel_sd = err.accel_noise * sample_dt.sqrt();
    let gyro_noise = Normal::new(0.0, gyro_sd).map_err(|_| SinsError::InvalidErrorModel)?;
    let accel_noise = Normal::new(0.0, accel_sd).map_err(|_| SinsError::InvalidErrorModel)?;
    let gyro_bias = Vector3::from(err.gyro_bias) * sample_dt;
    let accel_bias = Vector3::from(err.accel_bias) * sample_dt;
    let mut noisy = |bias: &Vector3<f64>, dist: &Normal<f64>, sd: f64| -> Vector3<f64> {
        if sd == 0.0 {
            *bias
        } else {
            bias + Vector3::new(dist.sample(&mut rng), dist.sample(&mut rng), dist.sample(&mut rng))
        }
    };

    let mut pos = truth.start.as_vector();
    let mut out = Vec::with_capacity(updates);
    for m in 0..updates {
        let t0 = 2.0 * m as f64 * sample_dt;
        let tm = t0 + sample_dt;
        let t1 = t0 + 2.0 * sample_dt;
        let (p_mid, th1, v1) = truth.integrate(pos, t0, tm, earth);
        let (p_end, th2, v2) = truth.integrate(p_mid, tm, t1, earth);
        pos = p_end;
        out.push(ImuSample {
            t_start: t0,
            t_end: t1,
            dtheta1: th1 + noisy(&gyro_bias, &gyro_noise, gyro_sd),
            dv1: v1 + noisy(&accel_bias, &accel_noise, accel_sd),
            dtheta2: th2 + noisy(&gyro_bias, &gyro_noise, gyro_sd),
            dv2: v2 + noisy(&accel_bias, &accel_noise, accel_sd),
        });
    }
    Ok(out)
}
