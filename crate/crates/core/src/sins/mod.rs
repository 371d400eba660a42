//! Strapdown inertial navigation: IMU trace synthesis, dead reckoning and
//! per-slot position prediction.

// Input checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod earth;
pub mod mechanization;
pub mod trajectory;

use std::io::{Read, Write};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use earth::{EarthModel, Geodetic, GravityModel};
pub use mechanization::{
    attitude_matrix, coning_rotation_vector, dead_reckon, propagate_attitude, update_position, update_velocity,
    EulerAngles, ImuSample, NavState,
};
pub use trajectory::{simulate_imu, ImuErrorModel, Segment, Trajectory};

#[derive(Debug, Error)]
pub enum SinsError {
    #[error("attitude matrix is not orthonormal (max deviation {0:e})")]
    NonOrthonormalAttitude(f64),
    #[error("update interval must be positive, got {0}")]
    NonPositiveInterval(f64),
    #[error("latitude {0} rad is too close to a pole")]
    PolarSingularity(f64),
    #[error("IMU trace is not contiguous at sample {index} (t = {time})")]
    TraceGap { index: usize, time: f64 },
    #[error("velocity discontinuity in truth trajectory at t = {0} s")]
    NonSmoothTrajectory(f64),
    #[error("invalid trajectory segment starting at t = {0} s")]
    InvalidSegment(f64),
    #[error("duration {duration} s is not a multiple of {step} s")]
    DurationNotMultiple { duration: f64, step: f64 },
    #[error("IMU error model has negative or non-finite parameters")]
    InvalidErrorModel,
    #[error("trace for UAV {uav} ends at {available} s, {required} s required")]
    InsufficientTrace { uav: usize, available: f64, required: f64 },
    #[error("trace CSV: {0}")]
    Csv(#[from] csv::Error),
}

/// Dead-reckons every UAV and returns the slot-start position of each one
/// in ENU metres relative to `origin`, indexed `[slot][uav]`.
pub fn predict_slot_positions(
    fleet: &[(NavState, Vec<ImuSample>)],
    slot_duration: f64,
    n_slots: usize,
    earth: &EarthModel,
    origin: &Geodetic,
) -> Result<Vec<Vec<Vector3<f64>>>, SinsError> {
    if !(slot_duration > 0.0) {
        return Err(SinsError::NonPositiveInterval(slot_duration));
    }
    let mut out = vec![Vec::with_capacity(fleet.len()); n_slots];
    for (uav, (init, trace)) in fleet.iter().enumerate() {
        let required = init.time + n_slots as f64 * slot_duration;
        let available = trace.last().map_or(init.time, |s| s.t_end);
        if available + 1e-9 < required {
            return Err(SinsError::InsufficientTrace { uav, available, required });
        }
        let states = dead_reckon(init, trace, earth)?;
        for (k, slot) in out.iter_mut().enumerate() {
            let t = init.time + k as f64 * slot_duration;
            let idx = states.partition_point(|s| s.time < t - 1e-9);
            let state = states.get(idx).ok_or(SinsError::InsufficientTrace { uav, available, required })?;
            slot.push(earth.geodetic_to_enu(&state.position, origin));
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    t_start: f64,
    t_end: f64,
    dthx1: f64,
    dthy1: f64,
    dthz1: f64,
    dthx2: f64,
    dthy2: f64,
    dthz2: f64,
    dvx1: f64,
    dvy1: f64,
    dvz1: f64,
    dvx2: f64,
    dvy2: f64,
    dvz2: f64,
}

pub fn write_trace_csv<W: Write>(trace: &[ImuSample], w: W) -> Result<(), SinsError> {
    let mut wr = csv::Writer::from_writer(w);
    for s in trace {
        wr.serialize(TraceRow {
            t_start: s.t_start,
            t_end: s.t_end,
            dthx1: s.dtheta1.x,
            dthy1: s.dtheta1.y,
            dthz1: s.dtheta1.z,
            dthx2: s.dtheta2.x,
            dthy2: s.dtheta2.y,
            dthz2: s.dtheta2.z,
            dvx1: s.dv1.x,
            dvy1: s.dv1.y,
            dvz1: s.dv1.z,
            dvx2: s.dv2.x,
            dvy2: s.dv2.y,
            dvz2: s.dv2.z,
        })?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<ImuSample>, SinsError> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize::<TraceRow>()
        .map(|row| {
            let r = row?;
            Ok(ImuSample {
                t_start: r.t_start,
                t_end: r.t_end,
                dtheta1: Vector3::new(r.dthx1, r.dthy1, r.dthz1),
                dtheta2: Vector3::new(r.dthx2, r.dthy2, r.dthz2),
                dv1: Vector3::new(r.dvx1, r.dvy1, r.dvz1),
                dv2: Vector3::new(r.dvx2, r.dvy2, r.dvz2),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fleet_member(truth: &Trajectory, earth: &EarthModel, err: &ImuErrorModel) -> (NavState, Vec<ImuSample>) {
        let init = truth.states(0.2, 0.0, earth).unwrap()[0];
        let trace = simulate_imu(truth, err, 0.1, 8.0, earth).unwrap();
        (init, trace)
    }

    #[test]
    fn stationary_fleet_does_not_move_between_slots() {
        let earth = EarthModel::wgs84();
        let origin = Geodetic::from_degrees(29.0, 106.0, 450.0);
        let fleet: Vec<_> = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(1500.0, -300.0, 20.0)]
            .iter()
            .map(|off| {
                let truth = Trajectory::stationary(earth.offset_geodetic(&origin, off), 8.0);
                fleet_member(&truth, &earth, &ImuErrorModel::ideal())
            })
            .collect();
        let pos = predict_slot_positions(&fleet, 4.0, 2, &earth, &origin).unwrap();
        for uav in 0..2 {
            assert!((pos[0][uav] - pos[1][uav]).norm() < 1e-6);
        }
    }

    #[test]
    fn slot_two_matches_truth_after_four_seconds() {
        let earth = EarthModel::wgs84();
        let truth = Trajectory::survey_track();
        let fleet = vec![fleet_member(&truth, &earth, &ImuErrorModel::ideal())];
        let pos = predict_slot_positions(&fleet, 4.0, 2, &earth, &truth.start).unwrap();
        let true_state = truth.states(4.0, 4.0, &earth).unwrap()[1];
        let expected = earth.geodetic_to_enu(&true_state.position, &truth.start);
        assert!((pos[1][0] - expected).norm() < 0.1, "{}", (pos[1][0] - expected).norm());
    }

    #[test]
    fn short_trace_is_rejected() {
        let earth = EarthModel::wgs84();
        let truth = Trajectory::survey_track();
        let init = truth.states(0.2, 0.0, &earth).unwrap()[0];
        let trace = simulate_imu(&truth, &ImuErrorModel::ideal(), 0.1, 6.0, &earth).unwrap();
        let err = predict_slot_positions(&[(init, trace)], 4.0, 2, &earth, &truth.start).unwrap_err();
        assert!(matches!(err, SinsError::InsufficientTrace { uav: 0, .. }));
    }

    #[test]
    fn trace_csv_round_trip() {
        let earth = EarthModel::wgs84();
        let trace =
            simulate_imu(&Trajectory::survey_track(), &ImuErrorModel::consumer_grade(3), 0.1, 2.0, &earth).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let header = String::from_utf8(buf.clone()).unwrap();
        assert!(header.starts_with("t_start,t_end,dthx1,dthy1,dthz1,dthx2,dthy2,dthz2,dvx1,dvy1,dvz1,dvx2,dvy2,dvz2\n"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace);
    }
}
