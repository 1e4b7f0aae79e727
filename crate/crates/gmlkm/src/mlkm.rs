//! Multi-layer k-means++ for one road segment. Layer 1 partitions the
//! sensors into blocks of `K` consecutive sensors and clusters each block's
//! projected measurements. Layer 2 flags clusters that break physical rules
//! (too many members, duplicate sensor, non-monotone times) and re-associates
//! the pooled offenders by global nearest neighbor on predicted arrival
//! times. Layer 3 projects block centroids onto a common reference and
//! clusters them to stitch block-level tracks into full-segment tracks.

use crate::clustering::{kmeanspp, Point2};
use crate::error::Result;
use crate::network::{HitRef, RoadSegment, SegmentDataset, SensorId};
use crate::preprocessing::project_segment;
use crate::seeds::derive_seed;
use crate::assignment::{min_cost_assignment, FORBIDDEN};
use std::collections::BTreeMap;
use std::ops::Range;

/// A block of consecutive sensors clustered together in Layer 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataSegment {
    pub index: usize,
    /// Sensor ranks covered by this block (half-open).
    pub ranks: Range<usize>,
}

/// Measurements attributed to one target on one road segment, ordered by
/// sensor rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub segment: usize,
    pub members: Vec<HitRef>,
}

impl Track {
    pub fn new(segment: usize, mut members: Vec<HitRef>) -> Self {
        members.sort_by_key(|m| (m.sensor.rank, m.hit));
        Track { segment, members }
    }

    pub fn first_time(&self, ds: &SegmentDataset) -> f64 {
        self.members
            .iter()
            .map(|&m| ds.hit(m).time)
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean raw (velocity, time) over members.
    pub fn centroid(&self, ds: &SegmentDataset) -> (f64, f64) {
        let n = self.members.len() as f64;
        let (sv, st) = self.members.iter().fold((0.0, 0.0), |(sv, st), &m| {
            let x = ds.hit(m);
            (sv + x.velocity, st + x.time)
        });
        (sv / n, st / n)
    }

    pub fn member_at_rank(&self, rank: usize) -> Option<HitRef> {
        self.members.iter().copied().find(|m| m.sensor.rank == rank)
    }
}

/// Centroids of one data segment after Layers 1-2, positioned at the mean
/// sensor position of the block.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    pub segment_index: usize,
    pub centroids: Vec<(f64, f64)>,
    pub position: f64,
}

/// Layer-1 output for one data segment.
#[derive(Debug, Clone)]
pub struct BlockClusters {
    pub block: DataSegment,
    pub tracks: Vec<Track>,
}

/// Full MLKM result: one track per recovered target plus any diagnostics
/// from the correction layers.
#[derive(Debug, Clone)]
pub struct MlkmOutput {
    pub tracks: Vec<Track>,
    pub diagnostics: Vec<String>,
}

/// Number of data segments: `ceil(sensor_count / k_sensors)`; the last block
/// may cover fewer sensors.
pub fn block_count(sensor_count: usize, k_sensors: usize) -> usize {
    sensor_count.div_ceil(k_sensors)
}

/// Mean sensor position of a block (the position of its centroid set).
fn block_position(seg: &RoadSegment, ranks: &Range<usize>) -> f64 {
    let n = (ranks.end - ranks.start) as f64;
    seg.sensor_positions[ranks.clone()].iter().sum::<f64>() / n
}

/// Layer 1: project each block's measurements to the segment start and
/// cluster with k = the block's maximum per-sensor hit count.
pub fn layer1_cluster(
    ds: &SegmentDataset,
    seg: &RoadSegment,
    k_sensors: usize,
    seed: u64,
) -> Result<Vec<BlockClusters>> {
    assert!(k_sensors >= 1, "k_sensors must be at least 1");
    let n_sensors = seg.sensor_count();
    let blocks = block_count(n_sensors, k_sensors);
    let mut out = Vec::with_capacity(blocks);
    for e in 0..blocks {
        let ranks = e * k_sensors..((e + 1) * k_sensors).min(n_sensors);
        let block = DataSegment { index: e, ranks: ranks.clone() };

        let mut points = Vec::new();
        let mut origins = Vec::new();
        let mut k = 0usize;
        for rank in ranks {
            let record = &ds.records[rank];
            k = k.max(record.hits.len());
            for (hit, m) in record.hits.iter().enumerate() {
                let origin = HitRef {
                    sensor: SensorId { segment: ds.segment, rank },
                    hit,
                };
                let p = project_segment(*m, seg.sensor_positions[rank], 0.0, origin);
                points.push(Point2::new(p.velocity, p.projected_time));
                origins.push(origin);
            }
        }

        let tracks = if k == 0 {
            Vec::new()
        } else {
            let clustering = kmeanspp(&points, k, derive_seed(seed, e as u64))?;
            let mut members: Vec<Vec<HitRef>> = vec![Vec::new(); k];
            for (p, &c) in clustering.assignment.iter().enumerate() {
                members[c].push(origins[p]);
            }
            members
                .into_iter()
                .filter(|m| !m.is_empty())
                .map(|m| Track::new(ds.segment, m))
                .collect()
        };
        out.push(BlockClusters { block, tracks });
    }
    Ok(out)
}

/// True when the track violates any of the three layer-2 rules:
/// more members than `member_cap` (R1), two members from one sensor (R2),
/// or a later sensor recording a time not later than an earlier one (R3).
pub fn violates_rules(track: &Track, ds: &SegmentDataset, member_cap: usize) -> bool {
    if track.members.len() > member_cap {
        return true;
    }
    for pair in track.members.windows(2) {
        if pair[0].sensor.rank == pair[1].sensor.rank {
            return true;
        }
    }
    for i in 0..track.members.len() {
        for j in (i + 1)..track.members.len() {
            let (a, b) = (track.members[i], track.members[j]);
            if a.sensor.rank < b.sensor.rank && ds.hit(b).time <= ds.hit(a).time {
                return true;
            }
        }
    }
    false
}

/// Layer-2 detection: indices of the tracks that violate any rule.
pub fn detect_errors(tracks: &[Track], ds: &SegmentDataset, member_cap: usize) -> Vec<usize> {
    tracks
        .iter()
        .enumerate()
        .filter(|(_, t)| violates_rules(t, ds, member_cap))
        .map(|(i, _)| i)
        .collect()
}

/// Layer-2 correction: pool every member of the flagged tracks and rebuild
/// tracks sensor rank by sensor rank. Each rank is resolved with an exact
/// one-to-one assignment between open tracks and the rank's measurements,
/// costed by |observed - predicted| arrival time from the track's last
/// member. Pairings that would run time backwards are forbidden; their
/// measurements open new tracks instead. Every pooled measurement lands in
/// exactly one output track.
pub fn correct_errors(flagged: &[Track], ds: &SegmentDataset, seg: &RoadSegment) -> Vec<Track> {
    let mut pool: BTreeMap<usize, Vec<HitRef>> = BTreeMap::new();
    for track in flagged {
        for &m in &track.members {
            pool.entry(m.sensor.rank).or_default().push(m);
        }
    }
    for hits in pool.values_mut() {
        hits.sort_by_key(|m| m.hit);
    }

    let mut tracks: Vec<Vec<HitRef>> = Vec::new();
    for (&rank, hits) in &pool {
        if tracks.is_empty() {
            tracks.extend(hits.iter().map(|&h| vec![h]));
            continue;
        }
        let pair_cost = |track: &Vec<HitRef>, hit: &HitRef| -> f64 {
            let last = *track.last().expect("open tracks are never empty");
            let prev = ds.hit(last);
            let cur = ds.hit(*hit);
            if cur.time <= prev.time {
                return FORBIDDEN;
            }
            let gap = seg.sensor_positions[rank] - seg.sensor_positions[last.sensor.rank];
            let predicted = prev.time + gap / prev.velocity;
            (cur.time - predicted).abs()
        };

        if hits.len() <= tracks.len() {
            // rows = measurements, columns = open tracks
            let cost: Vec<Vec<f64>> = hits
                .iter()
                .map(|h| tracks.iter().map(|t| pair_cost(t, h)).collect())
                .collect();
            let assignment = min_cost_assignment(&cost);
            for (hi, &ti) in assignment.iter().enumerate() {
                if cost[hi][ti] >= FORBIDDEN {
                    tracks.push(vec![hits[hi]]);
                } else {
                    tracks[ti].push(hits[hi]);
                }
            }
        } else {
            // rows = open tracks, columns = measurements; leftovers start
            // new tracks
            let cost: Vec<Vec<f64>> = tracks
                .iter()
                .map(|t| hits.iter().map(|h| pair_cost(t, h)).collect())
                .collect();
            let assignment = min_cost_assignment(&cost);
            let mut consumed = vec![false; hits.len()];
            for (ti, &hi) in assignment.iter().enumerate() {
                if cost[ti][hi] < FORBIDDEN {
                    tracks[ti].push(hits[hi]);
                    consumed[hi] = true;
                }
            }
            for (hi, used) in consumed.iter().enumerate() {
                if !used {
                    tracks.push(vec![hits[hi]]);
                }
            }
        }
    }

    tracks
        .into_iter()
        .map(|members| Track::new(ds.segment, members))
        .collect()
}

/// Run detection and correction over one block's tracks.
fn correct_block(tracks: Vec<Track>, ds: &SegmentDataset, seg: &RoadSegment, cap: usize) -> Vec<Track> {
    let flagged_idx = detect_errors(&tracks, ds, cap);
    if flagged_idx.is_empty() {
        return tracks;
    }
    let mut keep = Vec::new();
    let mut flagged = Vec::new();
    for (i, t) in tracks.into_iter().enumerate() {
        if flagged_idx.contains(&i) {
            flagged.push(t);
        } else {
            keep.push(t);
        }
    }
    keep.extend(correct_errors(&flagged, ds, seg));
    keep
}

/// Layer 3: project every block's track centroids onto the first block's
/// position and cluster with `k = track_count` to stitch block tracks into
/// full-segment tracks. Clusters that pull two tracks from the same block,
/// or produce rule-violating merged tracks, are routed through
/// detection/correction once more when `error_correction` is set.
pub fn layer3_match(
    blocks: &[BlockClusters],
    ds: &SegmentDataset,
    seg: &RoadSegment,
    track_count: usize,
    seed: u64,
    error_correction: bool,
) -> Result<MlkmOutput> {
    let mut diagnostics = Vec::new();
    let non_empty: Vec<&BlockClusters> = blocks.iter().filter(|b| !b.tracks.is_empty()).collect();
    if non_empty.len() <= 1 {
        let tracks = non_empty
            .first()
            .map(|b| b.tracks.clone())
            .unwrap_or_default();
        return Ok(MlkmOutput { tracks, diagnostics });
    }

    let reference = block_position(seg, &non_empty[0].block.ranks);
    let mut points = Vec::new();
    let mut refs: Vec<(usize, usize)> = Vec::new(); // (block slot, track index)
    for (slot, bc) in non_empty.iter().enumerate() {
        let position = block_position(seg, &bc.block.ranks);
        for (ti, track) in bc.tracks.iter().enumerate() {
            let (v, t) = track.centroid(ds);
            let t_hat = t - (position - reference) / v;
            points.push(Point2::new(v, t_hat));
            refs.push((slot, ti));
        }
    }

    let k = track_count.min(points.len()).max(1);
    let clustering = kmeanspp(&points, k, derive_seed(seed, 0x4C33))?;

    let mut merged: Vec<Vec<HitRef>> = vec![Vec::new(); k];
    let mut slots_seen: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, &c) in clustering.assignment.iter().enumerate() {
        let (slot, ti) = refs[p];
        merged[c].extend(non_empty[slot].tracks[ti].members.iter().copied());
        slots_seen[c].push(slot);
    }
    for (c, slots) in slots_seen.iter().enumerate() {
        let mut sorted = slots.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != slots.len() {
            diagnostics.push(format!(
                "segment {}: cluster-matching group {} drew multiple tracks from one data segment",
                ds.segment + 1,
                c + 1
            ));
        }
    }

    let mut tracks: Vec<Track> = merged
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| Track::new(ds.segment, m))
        .collect();
    if error_correction {
        tracks = correct_block(tracks, ds, seg, seg.sensor_count());
    }
    Ok(MlkmOutput { tracks, diagnostics })
}

/// The full three-layer pipeline for one road segment. Output tracks are
/// ordered by first hit time; every stored hit appears in exactly one track.
pub fn mlkm(
    ds: &SegmentDataset,
    seg: &RoadSegment,
    sensors_per_block: usize,
    seed: u64,
    error_correction: bool,
) -> Result<MlkmOutput> {
    if ds.total_hits() == 0 {
        return Ok(MlkmOutput {
            tracks: Vec::new(),
            diagnostics: Vec::new(),
        });
    }
    let mut blocks = layer1_cluster(ds, seg, sensors_per_block, seed)?;
    if error_correction {
        for bc in &mut blocks {
            let cap = bc.block.ranks.end - bc.block.ranks.start;
            let tracks = std::mem::take(&mut bc.tracks);
            bc.tracks = correct_block(tracks, ds, seg, cap);
        }
    }
    let mut output = layer3_match(&blocks, ds, seg, ds.max_hits, seed, error_correction)?;
    sort_tracks(&mut output.tracks, ds);
    Ok(output)
}

/// Baseline used for comparison runs: one k-means++ pass over the whole
/// segment, optionally on projected data, k = max per-sensor hit count.
pub fn cluster_whole_segment(
    ds: &SegmentDataset,
    seg: &RoadSegment,
    preprocess: bool,
    seed: u64,
) -> Result<Vec<Track>> {
    if ds.total_hits() == 0 {
        return Ok(Vec::new());
    }
    let mut points = Vec::new();
    let mut origins = Vec::new();
    for record in &ds.records {
        for (hit, m) in record.hits.iter().enumerate() {
            let origin = HitRef { sensor: record.sensor, hit };
            let y = if preprocess {
                project_segment(*m, seg.sensor_positions[record.sensor.rank], 0.0, origin)
                    .projected_time
            } else {
                m.time
            };
            points.push(Point2::new(m.velocity, y));
            origins.push(origin);
        }
    }
    let clustering = kmeanspp(&points, ds.max_hits, seed)?;
    let mut members: Vec<Vec<HitRef>> = vec![Vec::new(); ds.max_hits];
    for (p, &c) in clustering.assignment.iter().enumerate() {
        members[c].push(origins[p]);
    }
    let mut tracks: Vec<Track> = members
        .into_iter()
        .filter(|m| !m.is_empty())
        .map(|m| Track::new(ds.segment, m))
        .collect();
    sort_tracks(&mut tracks, ds);
    Ok(tracks)
}

/// Order tracks by first hit time (stable labels across runs).
pub fn sort_tracks(tracks: &mut [Track], ds: &SegmentDataset) {
    tracks.sort_by(|a, b| {
        a.first_time(ds)
            .total_cmp(&b.first_time(ds))
            .then_with(|| a.members.cmp(&b.members))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Measurement, SensorRecord};

    /// Constant-velocity targets on one segment with equally spaced sensors;
    /// returns the dataset plus the true target of every hit.
    fn synthetic_segment(
        targets: &[(f64, f64)], // (velocity, start time)
        n_sensors: usize,
        spacing: f64,
    ) -> (SegmentDataset, RoadSegment, BTreeMap<HitRef, usize>) {
        let seg = RoadSegment {
            id: 0,
            length: spacing * n_sensors as f64,
            sensor_positions: (1..=n_sensors).map(|j| spacing * j as f64).collect(),
        };
        let mut truth = BTreeMap::new();
        let mut records = Vec::new();
        for rank in 0..n_sensors {
            let d = seg.sensor_positions[rank];
            let mut hits: Vec<(f64, f64, usize)> = targets
                .iter()
                .enumerate()
                .map(|(id, &(v, t0))| (t0 + d / v, v, id))
                .collect();
            hits.sort_by(|a, b| a.0.total_cmp(&b.0));
            let sensor = SensorId { segment: 0, rank };
            for (hit, &(t, v, id)) in hits.iter().enumerate() {
                truth.insert(HitRef { sensor, hit }, id);
            }
            records.push(SensorRecord {
                sensor,
                hits: hits
                    .iter()
                    .map(|&(t, v, _)| Measurement { velocity: v, time: t })
                    .collect(),
            });
        }
        (SegmentDataset::new(0, records), seg, truth)
    }

    fn ten_targets() -> Vec<(f64, f64)> {
        (0..10)
            .map(|i| (10.0 + 3.0 * i as f64, 2.5 * i as f64))
            .collect()
    }

    #[test]
    fn block_count_formula() {
        assert_eq!(block_count(20, 5), 4);
        assert_eq!(block_count(22, 5), 5);
        assert_eq!(block_count(9, 3), 3);
        assert_eq!(block_count(1, 3), 1);
    }

    #[test]
    fn layer1_blocks_partition_sensors() {
        let (ds, seg, _) = synthetic_segment(&ten_targets(), 22, 5.0);
        let blocks = layer1_cluster(&ds, &seg, 5, 1).unwrap();
        assert_eq!(blocks.len(), 5);
        assert_eq!(blocks[4].block.ranks, 20..22);
        let covered: usize = blocks
            .iter()
            .map(|b| b.block.ranks.end - b.block.ranks.start)
            .sum();
        assert_eq!(covered, 22);
    }

    #[test]
    fn layer1_recovers_pure_tracks_noise_free() {
        let (ds, seg, truth) = synthetic_segment(&ten_targets(), 9, 5.0);
        let blocks = layer1_cluster(&ds, &seg, 3, 42).unwrap();
        assert_eq!(blocks.len(), 3);
        for bc in &blocks {
            assert_eq!(bc.tracks.len(), 10);
            for track in &bc.tracks {
                assert_eq!(track.members.len(), 3);
                let ids: Vec<usize> =
                    track.members.iter().map(|m| truth[m]).collect();
                assert!(ids.windows(2).all(|w| w[0] == w[1]), "impure track {ids:?}");
            }
        }
    }

    #[test]
    fn rule_one_flags_oversized_track() {
        let (ds, _, _) = synthetic_segment(&ten_targets(), 4, 5.0);
        let members: Vec<HitRef> = (0..4)
            .map(|rank| HitRef { sensor: SensorId { segment: 0, rank }, hit: 0 })
            .collect();
        let track = Track::new(0, members);
        assert!(violates_rules(&track, &ds, 3));
        assert!(!violates_rules(&track, &ds, 4));
    }

    #[test]
    fn rule_two_flags_duplicate_sensor() {
        let (ds, _, _) = synthetic_segment(&ten_targets(), 2, 5.0);
        let sensor = SensorId { segment: 0, rank: 1 };
        let track = Track::new(
            0,
            vec![HitRef { sensor, hit: 0 }, HitRef { sensor, hit: 1 }],
        );
        assert!(violates_rules(&track, &ds, 3));
    }

    #[test]
    fn rule_three_flags_backwards_time() {
        // two targets; pair the slow target's early hit with the fast
        // target's hit that arrives earlier downstream
        let (ds, _, _) = synthetic_segment(&[(10.0, 0.0), (40.0, 2.0)], 2, 40.0);
        // target 0: s1 at t=4, s2 at t=8; target 1: s1 at t=3, s2 at t=4
        let bad = Track::new(
            0,
            vec![
                HitRef { sensor: SensorId { segment: 0, rank: 0 }, hit: 1 }, // t=4
                HitRef { sensor: SensorId { segment: 0, rank: 1 }, hit: 0 }, // t=4
            ],
        );
        assert!(violates_rules(&bad, &ds, 3));
        let good = Track::new(
            0,
            vec![
                HitRef { sensor: SensorId { segment: 0, rank: 0 }, hit: 0 }, // t=3
                HitRef { sensor: SensorId { segment: 0, rank: 1 }, hit: 0 }, // t=4
            ],
        );
        assert!(!violates_rules(&good, &ds, 3));
    }

    #[test]
    fn detect_errors_returns_only_violators() {
        let (ds, _, _) = synthetic_segment(&ten_targets(), 3, 5.0);
        let fine = Track::new(
            0,
            vec![
                HitRef { sensor: SensorId { segment: 0, rank: 0 }, hit: 0 },
                HitRef { sensor: SensorId { segment: 0, rank: 1 }, hit: 0 },
            ],
        );
        let dup_sensor = Track::new(
            0,
            vec![
                HitRef { sensor: SensorId { segment: 0, rank: 2 }, hit: 0 },
                HitRef { sensor: SensorId { segment: 0, rank: 2 }, hit: 1 },
            ],
        );
        let flagged = detect_errors(&[fine, dup_sensor], &ds, 3);
        assert_eq!(flagged, vec![1]);
    }

    #[test]
    fn correct_errors_restores_crossing_targets() {
        // two targets whose hits were swapped at the second sensor
        let (ds, seg, truth) = synthetic_segment(&[(10.0, 0.0), (20.0, 1.0)], 3, 10.0);
        let s = |rank: usize, hit: usize| HitRef {
            sensor: SensorId { segment: 0, rank },
            hit,
        };
        // true tracks per sensor-time order; swap rank-1 members
        let t0: Vec<HitRef> = (0..3)
            .map(|rank| {
                let hit = (0..2)
                    .find(|&h| truth[&s(rank, h)] == 0)
                    .unwrap();
                s(rank, hit)
            })
            .collect();
        let t1: Vec<HitRef> = (0..3)
            .map(|rank| {
                let hit = (0..2)
                    .find(|&h| truth[&s(rank, h)] == 1)
                    .unwrap();
                s(rank, hit)
            })
            .collect();
        let swapped = vec![
            Track::new(0, vec![t0[0], t1[1], t0[2]]),
            Track::new(0, vec![t1[0], t0[1], t1[2]]),
        ];
        assert!(!detect_errors(&swapped, &ds, 3).is_empty());
        let corrected = correct_errors(&swapped, &ds, &seg);
        assert_eq!(corrected.len(), 2);
        for track in &corrected {
            assert!(!violates_rules(track, &ds, 3));
            let ids: Vec<usize> = track.members.iter().map(|m| truth[&m]).collect();
            assert!(ids.windows(2).all(|w| w[0] == w[1]), "mixed track {ids:?}");
        }
    }

    #[test]
    fn correct_errors_empty_input() {
        let (ds, seg, _) = synthetic_segment(&ten_targets(), 3, 5.0);
        assert!(correct_errors(&[], &ds, &seg).is_empty());
    }

    #[test]
    fn correction_matches_exhaustive_assignment() {
        // pool of 3 + 3 measurements across two sensors; compare the per-rank
        // assignment against brute force over all 3! pairings
        let targets = [(12.0, 0.0), (18.0, 1.0), (25.0, 2.0)];
        let (ds, seg, _) = synthetic_segment(&targets, 2, 15.0);
        let s = |rank: usize, hit: usize| HitRef {
            sensor: SensorId { segment: 0, rank },
            hit,
        };
        // deliberately scrambled tracks so everything lands in the pool
        let flagged = vec![
            Track::new(0, vec![s(0, 0), s(1, 2)]),
            Track::new(0, vec![s(0, 1), s(1, 0)]),
            Track::new(0, vec![s(0, 2), s(1, 1)]),
        ];
        let corrected = correct_errors(&flagged, &ds, &seg);

        // exhaustive oracle over permutations
        let perms = [
            [0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0],
        ];
        let cost_of = |first: HitRef, second: HitRef| -> f64 {
            let a = ds.hit(first);
            let b = ds.hit(second);
            let gap = seg.sensor_positions[1] - seg.sensor_positions[0];
            if b.time <= a.time {
                return FORBIDDEN;
            }
            (b.time - (a.time + gap / a.velocity)).abs()
        };
        let best = perms
            .iter()
            .map(|p| {
                (0..3)
                    .map(|i| cost_of(s(0, i), s(1, p[i])))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        let achieved: f64 = corrected
            .iter()
            .map(|t| {
                if t.members.len() == 2 {
                    cost_of(t.members[0], t.members[1])
                } else {
                    0.0
                }
            })
            .sum();
        assert!(
            (achieved - best).abs() < 1e-9,
            "correction cost {achieved} vs exhaustive {best}"
        );
    }

    #[test]
    fn layer3_is_identity_for_single_block() {
        let (ds, seg, _) = synthetic_segment(&ten_targets(), 3, 5.0);
        let blocks = layer1_cluster(&ds, &seg, 3, 9).unwrap();
        assert_eq!(blocks.len(), 1);
        let expected = blocks[0].tracks.clone();
        let out = layer3_match(&blocks, &ds, &seg, ds.max_hits, 9, true).unwrap();
        assert_eq!(out.tracks, expected);
    }

    #[test]
    fn layer3_pairs_coincident_projections_exactly() {
        let (ds, seg, truth) = synthetic_segment(&ten_targets(), 6, 5.0);
        let blocks = layer1_cluster(&ds, &seg, 3, 11).unwrap();
        assert_eq!(blocks.len(), 2);
        let out = layer3_match(&blocks, &ds, &seg, ds.max_hits, 11, true).unwrap();
        assert_eq!(out.tracks.len(), 10);
        for track in &out.tracks {
            assert_eq!(track.members.len(), 6);
            let ids: Vec<usize> = track.members.iter().map(|m| truth[m]).collect();
            assert!(ids.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn full_pipeline_on_noise_free_segment() {
        let (ds, seg, truth) = synthetic_segment(&ten_targets(), 9, 5.0);
        let out = mlkm(&ds, &seg, 3, 5, true).unwrap();
        assert_eq!(out.tracks.len(), 10);
        for track in &out.tracks {
            assert_eq!(track.members.len(), 9);
            let ids: Vec<usize> = track.members.iter().map(|m| truth[m]).collect();
            assert!(ids.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn pipeline_partitions_hits_and_obeys_rules() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        for trial in 0..8u64 {
            // noisy constant-velocity-ish data straight from raw records
            let n_sensors = 12;
            let spacing = 4.0;
            let n_targets = 6;
            let seg = RoadSegment {
                id: 0,
                length: spacing * n_sensors as f64,
                sensor_positions: (1..=n_sensors).map(|j| spacing * j as f64).collect(),
            };
            let mut per_sensor: Vec<Vec<Measurement>> = vec![Vec::new(); n_sensors];
            for _ in 0..n_targets {
                let mut v = rng.random_range(10.0..50.0);
                let mut t = rng.random_range(0.0..40.0);
                let mut prev_pos = 0.0;
                for (rank, slot) in per_sensor.iter_mut().enumerate() {
                    v = (v + rng.random_range(-1.5..1.5)).max(2.5);
                    t += (seg.sensor_positions[rank] - prev_pos) / v;
                    prev_pos = seg.sensor_positions[rank];
                    slot.push(Measurement { velocity: v, time: t });
                }
            }
            let records: Vec<SensorRecord> = per_sensor
                .into_iter()
                .enumerate()
                .map(|(rank, mut hits)| {
                    hits.sort_by(|a, b| a.time.total_cmp(&b.time));
                    SensorRecord {
                        sensor: SensorId { segment: 0, rank },
                        hits,
                    }
                })
                .collect();
            let ds = SegmentDataset::new(0, records);
            let total = ds.total_hits();
            let out = mlkm(&ds, &seg, 4, trial, true).unwrap();

            let mut seen = BTreeMap::new();
            for track in &out.tracks {
                assert!(
                    !violates_rules(track, &ds, seg.sensor_count()),
                    "rule violation survived correction"
                );
                for &m in &track.members {
                    *seen.entry(m).or_insert(0usize) += 1;
                }
            }
            assert_eq!(seen.len(), total, "hits lost");
            assert!(seen.values().all(|&c| c == 1), "hit duplicated");
        }
    }

    #[test]
    fn correction_never_increases_violations() {
        let (ds, seg, _) = synthetic_segment(&[(10.0, 0.0), (20.0, 1.0), (15.0, 3.0)], 4, 10.0);
        let blocks = layer1_cluster(&ds, &seg, 4, 77).unwrap();
        let before = detect_errors(&blocks[0].tracks, &ds, 4).len();
        let corrected = correct_block(blocks[0].tracks.clone(), &ds, &seg, 4);
        let after = detect_errors(&corrected, &ds, 4).len();
        assert!(after <= before);
        assert_eq!(after, 0);
    }

    #[test]
    fn whole_segment_baseline_recovers_noise_free_targets() {
        let (ds, seg, truth) = synthetic_segment(&ten_targets(), 9, 5.0);
        let tracks = cluster_whole_segment(&ds, &seg, true, 3).unwrap();
        assert_eq!(tracks.len(), 10);
        for track in &tracks {
            let ids: Vec<usize> = track.members.iter().map(|m| truth[m]).collect();
            assert!(ids.windows(2).all(|w| w[0] == w[1]));
        }
    }
}
