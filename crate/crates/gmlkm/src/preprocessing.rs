//! Time-axis projection. A measurement taken at a known sensor position is
//! shifted to the time the target (assumed at constant velocity) passed a
//! reference point: within a segment the reference is a chosen position on
//! the segment, at an intersection it is the virtual center of the
//! intersection circle.

use crate::error::{Error, Result};
use crate::network::{HitRef, Measurement, RoadSegment, SensorId};

/// A measurement with its timestamp re-referenced; velocity is untouched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedMeasurement {
    pub velocity: f64,
    pub projected_time: f64,
    pub origin: HitRef,
}

/// Whether an intersection measurement flows into the circle (last sensor of
/// a feeding segment) or out of it (first sensor of a draining segment).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectionRole {
    Incoming,
    Outgoing,
}

/// Project a segment measurement from `sensor_pos` to `reference`:
/// `t_hat = t - (sensor_pos - reference) / v`.
pub fn project_segment(
    m: Measurement,
    sensor_pos: f64,
    reference: f64,
    origin: HitRef,
) -> ProjectedMeasurement {
    assert!(m.velocity > 0.0, "zero velocity must be rejected at load");
    ProjectedMeasurement {
        velocity: m.velocity,
        projected_time: m.time - (sensor_pos - reference) / m.velocity,
        origin,
    }
}

/// Project an intersection measurement onto the virtual center of the
/// intersection circle of radius `r`. Incoming hits (last sensor) are pushed
/// forward across the remaining segment plus `r`; outgoing hits (first
/// sensor) are pulled back across `r` plus the lead-in distance.
pub fn project_intersection(
    m: Measurement,
    role: IntersectionRole,
    seg: &RoadSegment,
    sensor: SensorId,
    r: f64,
    origin: HitRef,
) -> Result<ProjectedMeasurement> {
    assert!(m.velocity > 0.0, "zero velocity must be rejected at load");
    let projected_time = match role {
        IntersectionRole::Incoming => {
            if sensor.rank != seg.last_rank() {
                return Err(Error::Measurement(format!(
                    "incoming projection requires the last sensor of segment {}, got rank {}",
                    seg.id + 1,
                    sensor.rank + 1
                )));
            }
            let d_last = seg.sensor_positions[sensor.rank];
            m.time + (seg.length - d_last + r) / m.velocity
        }
        IntersectionRole::Outgoing => {
            if sensor.rank != 0 {
                return Err(Error::Measurement(format!(
                    "outgoing projection requires the first sensor of segment {}, got rank {}",
                    seg.id + 1,
                    sensor.rank + 1
                )));
            }
            let d_first = seg.sensor_positions[0];
            m.time - (r + d_first) / m.velocity
        }
    };
    Ok(ProjectedMeasurement {
        velocity: m.velocity,
        projected_time,
        origin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn origin() -> HitRef {
        HitRef {
            sensor: SensorId { segment: 0, rank: 0 },
            hit: 0,
        }
    }

    fn seg(length: f64, positions: Vec<f64>) -> RoadSegment {
        RoadSegment {
            id: 0,
            length,
            sensor_positions: positions,
        }
    }

    #[test]
    fn segment_projection_formula() {
        let m = Measurement { velocity: 5.0, time: 10.0 };
        let p = project_segment(m, 30.0, 0.0, origin());
        assert_eq!(p.projected_time, 4.0);
        assert_eq!(p.velocity, 5.0);
    }

    #[test]
    fn segment_projection_identity_at_reference() {
        let m = Measurement { velocity: 3.0, time: 7.5 };
        let p = project_segment(m, 4.0, 4.0, origin());
        assert_eq!(p.projected_time, 7.5);
    }

    #[test]
    fn segment_projection_backward_reference() {
        let m = Measurement { velocity: 4.0, time: 3.0 };
        let p = project_segment(m, 0.0, 8.0, origin());
        assert_eq!(p.projected_time, 5.0);
    }

    #[test]
    fn intersection_projection_matched_pair() {
        let incoming_seg = seg(100.0, vec![10.0, 90.0]);
        let m_in = Measurement { velocity: 5.0, time: 100.0 };
        let p_in = project_intersection(
            m_in,
            IntersectionRole::Incoming,
            &incoming_seg,
            SensorId { segment: 0, rank: 1 },
            5.0,
            origin(),
        )
        .unwrap();
        assert_eq!(p_in.projected_time, 103.0);

        let outgoing_seg = seg(100.0, vec![10.0, 90.0]);
        let m_out = Measurement { velocity: 5.0, time: 106.0 };
        let p_out = project_intersection(
            m_out,
            IntersectionRole::Outgoing,
            &outgoing_seg,
            SensorId { segment: 0, rank: 0 },
            5.0,
            origin(),
        )
        .unwrap();
        assert_eq!(p_out.projected_time, 103.0);
    }

    #[test]
    fn incoming_identity_when_sensor_at_end_and_zero_radius() {
        let s = seg(50.0, vec![25.0, 50.0]);
        let m = Measurement { velocity: 2.0, time: 9.0 };
        let p = project_intersection(
            m,
            IntersectionRole::Incoming,
            &s,
            SensorId { segment: 0, rank: 1 },
            0.0,
            origin(),
        )
        .unwrap();
        assert_eq!(p.projected_time, 9.0);
    }

    #[test]
    fn wrong_rank_for_role_is_rejected() {
        let s = seg(50.0, vec![25.0, 50.0]);
        let m = Measurement { velocity: 2.0, time: 9.0 };
        let bad_in = project_intersection(
            m,
            IntersectionRole::Incoming,
            &s,
            SensorId { segment: 0, rank: 0 },
            1.0,
            origin(),
        );
        assert!(bad_in.is_err());
        let bad_out = project_intersection(
            m,
            IntersectionRole::Outgoing,
            &s,
            SensorId { segment: 0, rank: 1 },
            1.0,
            origin(),
        );
        assert!(bad_out.is_err());
    }

    proptest! {
        #[test]
        fn projection_is_inverse_shiftable(
            v in 0.1f64..100.0,
            t in -1e3f64..1e3,
            d in 0.0f64..1e3,
            d_star in 0.0f64..1e3,
        ) {
            let m = Measurement { velocity: v, time: t };
            let p = project_segment(m, d, d_star, origin());
            let back = project_segment(
                Measurement { velocity: v, time: p.projected_time },
                d_star,
                d,
                origin(),
            );
            prop_assert!((back.projected_time - t).abs() < 1e-9 * t.abs().max(1.0));
        }

        #[test]
        fn constant_velocity_target_projects_to_common_time(
            v in 1.0f64..50.0,
            t0 in 0.0f64..40.0,
            d1 in 1.0f64..100.0,
            gap in 1.0f64..100.0,
        ) {
            // hits at two sensors on one segment, constant velocity
            let d2 = d1 + gap;
            let m1 = Measurement { velocity: v, time: t0 + d1 / v };
            let m2 = Measurement { velocity: v, time: t0 + d2 / v };
            let p1 = project_segment(m1, d1, 0.0, origin());
            let p2 = project_segment(m2, d2, 0.0, origin());
            prop_assert!((p1.projected_time - p2.projected_time).abs() < 1e-9);
            prop_assert!((p1.projected_time - t0).abs() < 1e-9);
        }
    }
}
