//! Static road-network description and the per-segment measurement store.
//!
//! A network is a set of one-way road segments, each instrumented with
//! sensors ordered by distance from the segment start. Sensors record
//! anonymous `(velocity, time)` hits. Absent measurements are represented by
//! simply not storing them; zero-padding exists only in external formats.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Identifies one sensor: segment index and position rank, both 0-based
/// internally. External formats are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SensorId {
    pub segment: usize,
    pub rank: usize,
}

impl fmt::Display for SensorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}{}", self.segment + 1, self.rank + 1)
    }
}

/// One road segment: total length and ordered sensor positions measured from
/// the segment start.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSegment {
    pub id: usize,
    pub length: f64,
    pub sensor_positions: Vec<f64>,
}

impl RoadSegment {
    pub fn sensor_count(&self) -> usize {
        self.sensor_positions.len()
    }

    pub fn last_rank(&self) -> usize {
        self.sensor_positions.len() - 1
    }
}

/// A directed road network: segments, the segment-to-segment adjacency
/// matrix, and the common intersection radius.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    pub segments: Vec<RoadSegment>,
    /// `adjacency[i][j] == 1` iff traffic flows from segment `i` into `j`.
    pub adjacency: Vec<Vec<u8>>,
    pub intersection_radius: f64,
}

impl RoadNetwork {
    pub fn new(
        segments: Vec<RoadSegment>,
        edges: &[(usize, usize)],
        intersection_radius: f64,
    ) -> Result<Self> {
        let l = segments.len();
        if l == 0 {
            return Err(Error::Topology("network has no segments".into()));
        }
        if intersection_radius <= 0.0 {
            return Err(Error::Topology("intersection radius must be positive".into()));
        }
        for (idx, seg) in segments.iter().enumerate() {
            if seg.id != idx {
                return Err(Error::Topology(format!(
                    "segment ids must be 1..L in order; got id {} at position {}",
                    seg.id + 1,
                    idx + 1
                )));
            }
            if seg.sensor_positions.is_empty() {
                return Err(Error::Topology(format!("segment {} has no sensors", idx + 1)));
            }
            if seg.length <= 0.0 {
                return Err(Error::Topology(format!("segment {} has non-positive length", idx + 1)));
            }
            let mut prev = -f64::INFINITY;
            for &d in &seg.sensor_positions {
                if !(d >= 0.0 && d <= seg.length) {
                    return Err(Error::Topology(format!(
                        "segment {}: sensor position {} outside [0, {}]",
                        idx + 1,
                        d,
                        seg.length
                    )));
                }
                if d <= prev {
                    return Err(Error::Topology(format!(
                        "segment {}: non-increasing positions",
                        idx + 1
                    )));
                }
                prev = d;
            }
        }
        let mut adjacency = vec![vec![0u8; l]; l];
        for &(from, to) in edges {
            if from >= l || to >= l {
                return Err(Error::Topology(format!(
                    "edge ({}, {}) references a segment outside 1..{}",
                    from + 1,
                    to + 1,
                    l
                )));
            }
            if from == to {
                return Err(Error::Topology(format!(
                    "self-loop on segment {}",
                    from + 1
                )));
            }
            adjacency[from][to] = 1;
        }
        Ok(RoadNetwork {
            segments,
            adjacency,
            intersection_radius,
        })
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Directed edges as (from, to) pairs, row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.adjacency.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if a != 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

}

/// One sensor hit: measured velocity and timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub velocity: f64,
    pub time: f64,
}

/// Points at one stored hit: the sensor and the hit's chronological index
/// within that sensor's record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HitRef {
    pub sensor: SensorId,
    pub hit: usize,
}

/// All hits captured by one sensor, in strictly increasing time order.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorRecord {
    pub sensor: SensorId,
    pub hits: Vec<Measurement>,
}

/// Measurements of every sensor on one segment. `max_hits` is the paper's
/// m_i; shorter records stay short rather than being zero-padded.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDataset {
    pub segment: usize,
    pub records: Vec<SensorRecord>,
    pub max_hits: usize,
}

impl SegmentDataset {
    pub fn new(segment: usize, records: Vec<SensorRecord>) -> Self {
        let max_hits = records.iter().map(|r| r.hits.len()).max().unwrap_or(0);
        SegmentDataset {
            segment,
            records,
            max_hits,
        }
    }

    pub fn hit(&self, r: HitRef) -> Measurement {
        debug_assert_eq!(r.sensor.segment, self.segment);
        self.records[r.sensor.rank].hits[r.hit]
    }

    pub fn total_hits(&self) -> usize {
        self.records.iter().map(|r| r.hits.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// Topology document (JSON tree)
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SegmentDoc {
    id: usize,
    length: f64,
    sensor_positions: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TopologyDoc {
    segments: Vec<SegmentDoc>,
    edges: Vec<[usize; 2]>,
    intersection_radius: f64,
}

/// Parse a topology document (JSON; 1-based segment ids) into a validated
/// `RoadNetwork`.
pub fn load_network(text: &str) -> Result<RoadNetwork> {
    let doc: TopologyDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("topology: {e}")))?;
    let mut segments = Vec::with_capacity(doc.segments.len());
    for (idx, s) in doc.segments.iter().enumerate() {
        if s.id != idx + 1 {
            return Err(Error::Topology(format!(
                "segment ids must be 1..L in order; got id {} at position {}",
                s.id,
                idx + 1
            )));
        }
        segments.push(RoadSegment {
            id: idx,
            length: s.length,
            sensor_positions: s.sensor_positions.clone(),
        });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for &[from, to] in &doc.edges {
        if from == 0 || to == 0 {
            return Err(Error::Topology("edge references segment 0; ids are 1-based".into()));
        }
        edges.push((from - 1, to - 1));
    }
    RoadNetwork::new(segments, &edges, doc.intersection_radius)
}

/// Serialize a network back into the topology document format.
pub fn network_to_document(net: &RoadNetwork) -> String {
    let doc = TopologyDoc {
        segments: net
            .segments
            .iter()
            .map(|s| SegmentDoc {
                id: s.id + 1,
                length: s.length,
                sensor_positions: s.sensor_positions.clone(),
            })
            .collect(),
        edges: net.edges().iter().map(|&(f, t)| [f + 1, t + 1]).collect(),
        intersection_radius: net.intersection_radius,
    };
    serde_json::to_string_pretty(&doc).expect("topology serialization cannot fail")
}

// ---------------------------------------------------------------------------
// Measurement table (CSV)
// ---------------------------------------------------------------------------

/// Parse a measurement table (`segment,sensor,time,velocity`, 1-based ids)
/// into per-segment datasets. Records are sorted chronologically; duplicate
/// `(sensor, time)` rows are rejected.
pub fn load_measurements(text: &str, net: &RoadNetwork) -> Result<Vec<SegmentDataset>> {
    let mut by_sensor: BTreeMap<SensorId, Vec<Measurement>> = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "segment,sensor,time,velocity" => {}
        _ => {
            return Err(Error::Parse(
                "measurement table must start with header 'segment,sensor,time,velocity'".into(),
            ))
        }
    }
    for (lineno, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_usize = |s: &str, what: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("line {}: bad {what} '{s}'", lineno + 1)))
        };
        let parse_f64 = |s: &str, what: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad {what} '{s}'", lineno + 1)))
        };
        let segment = parse_usize(fields[0], "segment")?;
        let sensor = parse_usize(fields[1], "sensor")?;
        let time = parse_f64(fields[2], "time")?;
        let velocity = parse_f64(fields[3], "velocity")?;
        if segment == 0 || segment > net.segment_count() {
            return Err(Error::Measurement(format!(
                "line {}: unknown segment {} (network has {})",
                lineno + 1,
                segment,
                net.segment_count()
            )));
        }
        let seg = &net.segments[segment - 1];
        if sensor == 0 || sensor > seg.sensor_count() {
            return Err(Error::Measurement(format!(
                "line {}: unknown sensor {} on segment {} ({} sensors)",
                lineno + 1,
                sensor,
                segment,
                seg.sensor_count()
            )));
        }
        if !(velocity > 0.0) {
            return Err(Error::Measurement(format!(
                "line {}: velocity must be positive, got {velocity}",
                lineno + 1
            )));
        }
        if !time.is_finite() {
            return Err(Error::Measurement(format!("line {}: non-finite time", lineno + 1)));
        }
        by_sensor
            .entry(SensorId {
                segment: segment - 1,
                rank: sensor - 1,
            })
            .or_default()
            .push(Measurement { velocity, time });
    }

    let mut datasets = Vec::with_capacity(net.segment_count());
    for (si, seg) in net.segments.iter().enumerate() {
        let mut records = Vec::with_capacity(seg.sensor_count());
        for rank in 0..seg.sensor_count() {
            let id = SensorId { segment: si, rank };
            let mut hits = by_sensor.remove(&id).unwrap_or_default();
            hits.sort_by(|a, b| a.time.total_cmp(&b.time));
            for w in hits.windows(2) {
                if w[0].time == w[1].time {
                    return Err(Error::Measurement(format!(
                        "duplicate (sensor, time) row: {} at t={}",
                        id, w[0].time
                    )));
                }
            }
            records.push(SensorRecord { sensor: id, hits });
        }
        datasets.push(SegmentDataset::new(si, records));
    }
    Ok(datasets)
}

/// Serialize datasets into the measurement table format.
pub fn measurements_to_document(datasets: &[SegmentDataset]) -> String {
    let mut out = String::from("segment,sensor,time,velocity\n");
    for ds in datasets {
        for rec in &ds.records {
            for m in &rec.hits {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    rec.sensor.segment + 1,
                    rec.sensor.rank + 1,
                    m.time,
                    m.velocity
                ));
            }
        }
    }
    out
}

/// The Fig-style six-segment demo network used throughout the docs and tests:
/// edges R1->R2, R2->R3, R2->R5, R5->R4, R4->R2, R6->R4.
pub fn demo_edges() -> Vec<(usize, usize)> {
    vec![(0, 1), (1, 2), (1, 4), (4, 3), (3, 1), (5, 3)]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_segment_doc() -> String {
        let segments: Vec<String> = (1..=6)
            .map(|id| {
                format!(
                    r#"{{"id": {id}, "length": 30.0, "sensor_positions": [10.0, 20.0, 30.0]}}"#
                )
            })
            .collect();
        format!(
            r#"{{"segments": [{}], "edges": [[1,2],[2,3],[2,5],[5,4],[4,2],[6,4]], "intersection_radius": 5.0}}"#,
            segments.join(",")
        )
    }

    #[test]
    fn loads_six_segment_network() {
        let net = load_network(&six_segment_doc()).unwrap();
        assert_eq!(net.segment_count(), 6);
        assert_eq!(net.edges().len(), 6);
        assert_eq!(net.adjacency[0][1], 1);
        assert_eq!(net.adjacency[1][0], 0);
        assert_eq!(net.adjacency[5][3], 1);
    }

    #[test]
    fn loads_single_segment_network() {
        let doc = r#"{"segments": [{"id": 1, "length": 10.0,
            "sensor_positions": [1,2,3,4,5,6,7,8,9]}],
            "edges": [], "intersection_radius": 0.5}"#;
        let net = load_network(doc).unwrap();
        assert_eq!(net.segment_count(), 1);
        assert!(net.edges().is_empty());
        assert_eq!(net.segments[0].sensor_count(), 9);
    }

    #[test]
    fn rejects_non_increasing_positions() {
        let doc = r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [5.0, 3.0]}],
            "edges": [], "intersection_radius": 1.0}"#;
        let err = load_network(doc).unwrap_err();
        assert!(err.to_string().contains("non-increasing positions"), "{err}");
    }

    #[test]
    fn rejects_self_loop() {
        let doc = r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [5.0]}],
            "edges": [[1,1]], "intersection_radius": 1.0}"#;
        assert!(load_network(doc).is_err());
    }

    #[test]
    fn topology_round_trip() {
        let net = load_network(&six_segment_doc()).unwrap();
        let reparsed = load_network(&network_to_document(&net)).unwrap();
        assert_eq!(net, reparsed);
    }

    #[test]
    fn adjacency_has_zero_diagonal() {
        let net = load_network(&six_segment_doc()).unwrap();
        for i in 0..6 {
            assert_eq!(net.adjacency[i][i], 0);
        }
    }

    #[test]
    fn load_measurements_sorts_and_counts() {
        let net = load_network(
            r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [2.0, 8.0]}],
            "edges": [], "intersection_radius": 1.0}"#,
        )
        .unwrap();
        let csv = "segment,sensor,time,velocity\n1,1,3.0,5.0\n1,1,1.0,4.0\n1,1,2.0,4.5\n";
        let ds = load_measurements(csv, &net).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].max_hits, 3);
        let times: Vec<f64> = ds[0].records[0].hits.iter().map(|m| m.time).collect();
        assert_eq!(times, vec![1.0, 2.0, 3.0]);
        assert!(ds[0].records[1].hits.is_empty());
    }

    #[test]
    fn load_measurements_rejects_unknown_sensor() {
        let net = load_network(
            r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [2.0]}],
            "edges": [], "intersection_radius": 1.0}"#,
        )
        .unwrap();
        let csv = "segment,sensor,time,velocity\n7,1,3.0,5.0\n";
        assert!(load_measurements(csv, &net).is_err());
        let csv = "segment,sensor,time,velocity\n1,2,3.0,5.0\n";
        assert!(load_measurements(csv, &net).is_err());
    }

    #[test]
    fn load_measurements_rejects_duplicate_time() {
        let net = load_network(
            r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [2.0]}],
            "edges": [], "intersection_radius": 1.0}"#,
        )
        .unwrap();
        let csv = "segment,sensor,time,velocity\n1,1,3.0,5.0\n1,1,3.0,6.0\n";
        assert!(load_measurements(csv, &net).is_err());
    }

    #[test]
    fn measurement_round_trip() {
        let net = load_network(
            r#"{"segments": [{"id": 1, "length": 10.0, "sensor_positions": [2.0, 8.0]}],
            "edges": [], "intersection_radius": 1.0}"#,
        )
        .unwrap();
        let csv = "segment,sensor,time,velocity\n1,1,1.0,4.0\n1,1,2.5,4.5\n1,2,3.25,4.0\n";
        let ds = load_measurements(csv, &net).unwrap();
        let ds2 = load_measurements(&measurements_to_document(&ds), &net).unwrap();
        assert_eq!(ds, ds2);
    }

}
