//! Line-of-sight link budget between UAVs and per-slot delay topologies.

pub mod wteg;

use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use wteg::{assemble_two_step, cache_delay, shortest_path, Edge, Node, PathResult, Route, Slot, WtegGraph};

/// Speed of light [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("consumed time {consumed} s exceeds the slot duration {slot} s")]
    InfeasibleConsumption { consumed: f64, slot: f64 },
    #[error("slot topologies disagree on fleet size ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("a topology needs at least two UAVs, got {0}")]
    TooFewUavs(usize),
    #[error("channel parameter `{0}` must be positive and finite")]
    InvalidParameter(&'static str),
    #[error("slot duration must be positive, got {0}")]
    InvalidSlotDuration(f64),
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Link budget parameters, all in linear units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub tx_power_w: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_w: f64,
    /// Extra line-of-sight attenuation on top of free-space loss (>= 1).
    pub los_attenuation: f64,
    pub max_range_m: f64,
}

impl Default for ChannelParams {
    /// 0.05 W, 3 dB antennas, 2.4 GHz, 20 MHz, -100 dBm noise, 6 km range.
    fn default() -> Self {
        ChannelParams {
            tx_power_w: 0.05,
            tx_gain: db_to_linear(3.0),
            rx_gain: db_to_linear(3.0),
            carrier_hz: 2.4e9,
            bandwidth_hz: 20e6,
            noise_w: dbm_to_watts(-100.0),
            los_attenuation: 1.0,
            max_range_m: 6000.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let checks = [
            ("tx_power_w", self.tx_power_w),
            ("tx_gain", self.tx_gain),
            ("rx_gain", self.rx_gain),
            ("carrier_hz", self.carrier_hz),
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_w", self.noise_w),
            ("los_attenuation", self.los_attenuation),
            ("max_range_m", self.max_range_m),
        ];
        for (name, v) in checks {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ChannelError::InvalidParameter(name));
            }
        }
        Ok(())
    }

    fn snr(&self, d: f64) -> f64 {
        let loss = (4.0 * std::f64::consts::PI * d * self.carrier_hz / SPEED_OF_LIGHT).powi(2) * self.los_attenuation;
        let received = self.tx_power_w * self.tx_gain * self.rx_gain / loss;
        received / self.noise_w
    }
}

pub fn distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a - b).norm()
}

pub fn link_exists(d: f64, params: &ChannelParams) -> bool {
    d <= params.max_range_m
}

/// Shannon capacity of the link at distance `d` [bit/s], zero beyond range.
/// Co-located UAVs (`d < 1 m`) get the 1 m capacity.
pub fn capacity(d: f64, params: &ChannelParams) -> f64 {
    if !link_exists(d, params) {
        return 0.0;
    }
    params.bandwidth_hz * (1.0 + params.snr(d.max(1.0))).log2()
}

/// Seconds per bit over a link of length `d`, or `None` when out of range.
pub fn per_bit_delay(d: f64, params: &ChannelParams) -> Option<f64> {
    let r = capacity(d, params);
    (r > 0.0).then(|| 1.0 / r)
}

/// Link and delay matrices of one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTopology {
    pub slot: Slot,
    pub positions: Vec<Vector3<f64>>,
    pub link: Vec<Vec<bool>>,
    /// Seconds per bit; `None` where no link exists. Diagonal is `Some(0)`.
    pub delay: Vec<Vec<Option<f64>>>,
}

impl SlotTopology {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Copy of this topology with only the links for which `keep(i, j)`
    /// holds (called once per unordered pair, `i < j`).
    pub fn retain_links(&self, mut keep: impl FnMut(usize, usize) -> bool) -> SlotTopology {
        let mut out = self.clone();
        let n = self.len();
        for i in 0..n {
            for j in i + 1..n {
                if out.link[i][j] && !keep(i, j) {
                    out.link[i][j] = false;
                    out.link[j][i] = false;
                    out.delay[i][j] = None;
                    out.delay[j][i] = None;
                }
            }
        }
        out
    }

    /// Writes `i,j,k,d_m,pi_s_per_bit` rows for every linked ordered pair.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["i", "j", "k", "d_m", "pi_s_per_bit"])?;
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                if let (true, Some(pi)) = (i != j, self.delay[i][j]) {
                    let d = distance(&self.positions[i], &self.positions[j]);
                    wr.write_record([
                        (i + 1).to_string(),
                        (j + 1).to_string(),
                        self.slot.number().to_string(),
                        d.to_string(),
                        pi.to_string(),
                    ])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn build_slot_topology(
    positions: &[Vector3<f64>],
    params: &ChannelParams,
    slot: Slot,
) -> Result<SlotTopology, ChannelError> {
    params.validate()?;
    let n = positions.len();
    if n < 2 {
        return Err(ChannelError::TooFewUavs(n));
    }
    let mut link = vec![vec![false; n]; n];
    let mut delay = vec![vec![None; n]; n];
    for i in 0..n {
        delay[i][i] = Some(0.0);
        for j in i + 1..n {
            let d = distance(&positions[i], &positions[j]);
            if let Some(pi) = per_bit_delay(d, params) {
                link[i][j] = true;
                link[j][i] = true;
                delay[i][j] = Some(pi);
                delay[j][i] = Some(pi);
            }
        }
    }
    Ok(SlotTopology { slot, positions: positions.to_vec(), link, delay })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Link budget worked entirely in decibels, independent of the linear
    /// implementation above.
    fn db_domain_per_bit_delay(d: f64) -> f64 {
        let tx_dbm = 10.0 * (0.05f64 * 1000.0).log10();
        let fspl_db =
            20.0 * d.log10() + 20.0 * 2.4e9f64.log10() + 20.0 * (4.0 * std::f64::consts::PI / SPEED_OF_LIGHT).log10();
        let rx_dbm = tx_dbm + 3.0 + 3.0 - fspl_db;
        let snr_db = rx_dbm - (-100.0);
        1.0 / (20e6 * (1.0 + 10f64.powf(snr_db / 10.0)).log2())
    }

    #[test]
    fn distance_examples() {
        let o = Vector3::zeros();
        assert_eq!(distance(&o, &o), 0.0);
        assert_eq!(distance(&o, &Vector3::new(3.0, 4.0, 0.0)), 5.0);
        let d = distance(&o, &Vector3::new(3000.0, 4000.0, 0.0));
        assert_eq!(d, 5000.0);
        assert!(link_exists(d, &ChannelParams::default()));
    }

    #[test]
    fn range_boundary_is_inclusive() {
        let p = ChannelParams::default();
        assert!(link_exists(6000.0, &p));
        assert!(!link_exists(6000.001, &p));
        assert!(link_exists(0.0, &p));
        assert!(per_bit_delay(6000.001, &p).is_none());
    }

    #[test]
    fn thousand_metre_link_budget() {
        let pi = per_bit_delay(1000.0, &ChannelParams::default()).unwrap();
        let oracle = db_domain_per_bit_delay(1000.0);
        assert!(((pi - oracle) / oracle).abs() < 1e-9, "{pi} vs {oracle}");
        assert!((pi - 6.55e-9).abs() < 0.01e-9, "{pi}");
    }

    #[test]
    fn delay_grows_with_distance_and_halving_bandwidth_doubles_it() {
        let p = ChannelParams::default();
        let a = per_bit_delay(800.0, &p).unwrap();
        let b = per_bit_delay(801.0, &p).unwrap();
        assert!(b > a);
        let half = ChannelParams { bandwidth_hz: 10e6, ..p };
        let c = per_bit_delay(800.0, &half).unwrap();
        assert!((c / a - 2.0).abs() < 1e-12);
    }

    #[test]
    fn colocated_uavs_use_one_metre_capacity() {
        let p = ChannelParams::default();
        assert_eq!(per_bit_delay(0.0, &p), per_bit_delay(1.0, &p));
        assert!(per_bit_delay(0.0, &p).unwrap().is_finite());
    }

    #[test]
    fn two_uav_topology() {
        let pos = [Vector3::zeros(), Vector3::new(1000.0, 0.0, 0.0)];
        let t = build_slot_topology(&pos, &ChannelParams::default(), Slot::First).unwrap();
        let pi = per_bit_delay(1000.0, &ChannelParams::default());
        assert_eq!(t.delay, vec![vec![Some(0.0), pi], vec![pi, Some(0.0)]]);
        assert_eq!(t.link, vec![vec![false, true], vec![true, false]]);
    }

    #[test]
    fn far_apart_fleet_has_no_links() {
        let pos = [Vector3::zeros(), Vector3::new(7000.0, 0.0, 0.0), Vector3::new(0.0, 7000.0, 0.0)];
        let t = build_slot_topology(&pos, &ChannelParams::default(), Slot::Second).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.delay[i][j].is_some(), i == j);
            }
        }
    }

    #[test]
    fn rejects_single_uav_and_bad_params() {
        let p = ChannelParams::default();
        assert_eq!(build_slot_topology(&[Vector3::zeros()], &p, Slot::First), Err(ChannelError::TooFewUavs(1)));
        let bad = ChannelParams { bandwidth_hz: 0.0, ..p };
        assert_eq!(bad.validate(), Err(ChannelError::InvalidParameter("bandwidth_hz")));
    }

    #[test]
    fn csv_export_lists_linked_pairs() {
        let pos = [Vector3::zeros(), Vector3::new(1000.0, 0.0, 0.0), Vector3::new(9000.0, 0.0, 0.0)];
        let t = build_slot_topology(&pos, &ChannelParams::default(), Slot::First).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "i,j,k,d_m,pi_s_per_bit");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,2,1,1000,"));
    }
}
