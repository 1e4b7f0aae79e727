//! Network-wide trajectory reconstruction. Tracks recovered per segment are
//! chained through the intersection pairing matrices, starting from source
//! segments; per-segment merge matrices record which tracks belong to one
//! target when loops let a target revisit a segment.

use crate::error::{Error, Result};
use crate::graph::{has_cycle, IntersectionSpec};
use crate::intersection::PairingMatrix;
use crate::mlkm::Track;
use crate::network::{HitRef, RoadNetwork};
use std::collections::BTreeMap;

/// Symmetric 0/1 matrix linking tracks of one segment that belong to the
/// same target. Identity when no target revisits the segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeMatrix {
    pub segment: usize,
    pub matrix: Vec<Vec<u8>>,
}

impl MergeMatrix {
    pub fn identity(segment: usize, size: usize) -> Self {
        let mut matrix = vec![vec![0u8; size]; size];
        for (i, row) in matrix.iter_mut().enumerate() {
            row[i] = 1;
        }
        MergeMatrix { segment, matrix }
    }

    pub fn is_symmetric_with_unit_diagonal(&self) -> bool {
        let n = self.matrix.len();
        (0..n).all(|i| {
            self.matrix[i].len() == n
                && self.matrix[i][i] == 1
                && (0..n).all(|j| self.matrix[i][j] == self.matrix[j][i])
        })
    }

    /// Boolean transitive closure check: G squared must keep the same
    /// zero pattern as G.
    pub fn is_transitively_closed(&self) -> bool {
        let n = self.matrix.len();
        for i in 0..n {
            for j in 0..n {
                let mut reach = false;
                for k in 0..n {
                    if self.matrix[i][k] == 1 && self.matrix[k][j] == 1 {
                        reach = true;
                        break;
                    }
                }
                if reach != (self.matrix[i][j] == 1) {
                    return false;
                }
            }
        }
        true
    }
}

/// One hop of a reconstructed trajectory: a track (by label index) on a
/// segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrajectoryHop {
    pub segment: usize,
    pub track: usize,
}

/// A reconstructed per-target path. `complete` is true when the target
/// exited the network through a sink segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub id: usize,
    pub hops: Vec<TrajectoryHop>,
    pub complete: bool,
}

#[derive(Debug, Clone)]
pub struct TraceOutput {
    pub trajectories: Vec<Trajectory>,
    pub merge_matrices: Vec<MergeMatrix>,
    pub diagnostics: Vec<String>,
}

/// Chain per-segment tracks through the pairing matrices. One trajectory is
/// opened per track of each source segment, then per remaining unclaimed
/// track (targets already inside the network when collection started).
///
/// In strict mode two trajectories claiming one downstream track is an
/// integrity error; otherwise the first claim wins, the loser's walk ends,
/// and a diagnostic records the conflict. A pairing referencing a hit that
/// belongs to no track is always an integrity error.
pub fn trace(
    net: &RoadNetwork,
    tracks: &[Vec<Track>],
    specs: &[IntersectionSpec],
    pairings: &[PairingMatrix],
    strict: bool,
) -> Result<TraceOutput> {
    let mut diagnostics = Vec::new();

    // hit -> (segment, track index)
    let mut track_of_hit: BTreeMap<HitRef, (usize, usize)> = BTreeMap::new();
    for (seg, segment_tracks) in tracks.iter().enumerate() {
        for (ti, track) in segment_tracks.iter().enumerate() {
            for &m in &track.members {
                track_of_hit.insert(m, (seg, ti));
            }
        }
    }
    // incoming hit -> (intersection index, row)
    let mut row_of_hit: BTreeMap<HitRef, (usize, usize)> = BTreeMap::new();
    for (xi, pm) in pairings.iter().enumerate() {
        for (row, &hit) in pm.rows.iter().enumerate() {
            row_of_hit.insert(hit, (xi, row));
        }
    }
    let _ = specs;

    let mut used: Vec<Vec<bool>> = tracks.iter().map(|t| vec![false; t.len()]).collect();
    let mut trajectories: Vec<Trajectory> = Vec::new();

    let mut walk = |start_seg: usize,
                    start_track: usize,
                    used: &mut Vec<Vec<bool>>,
                    diagnostics: &mut Vec<String>|
     -> Result<Trajectory> {
        let mut hops = vec![TrajectoryHop { segment: start_seg, track: start_track }];
        used[start_seg][start_track] = true;
        let (mut seg, mut ti) = (start_seg, start_track);
        let complete;
        loop {
            let track = &tracks[seg][ti];
            let last_rank = net.segments[seg].last_rank();
            let Some(end_hit) = track.member_at_rank(last_rank) else {
                // no end-sensor hit: stopped in-segment or collection ended
                complete = false;
                break;
            };
            let Some(&(xi, row)) = row_of_hit.get(&end_hit) else {
                // the end sensor feeds no intersection: the target left
                complete = true;
                break;
            };
            let pm = &pairings[xi];
            let col = pm.pair_of(row).ok_or_else(|| {
                Error::Integrity(format!(
                    "intersection {}: row {} has no pairing",
                    pm.name,
                    row + 1
                ))
            })?;
            if col >= pm.n_outgoing() {
                // stop slot: never left the intersection
                complete = false;
                break;
            }
            let out_hit = pm.cols[col];
            let Some(&(next_seg, next_ti)) = track_of_hit.get(&out_hit) else {
                return Err(Error::Integrity(format!(
                    "intersection {}: pairing references hit {}#{} absent from any track",
                    pm.name,
                    out_hit.sensor,
                    out_hit.hit + 1
                )));
            };
            if used[next_seg][next_ti] {
                let message = format!(
                    "intersection {}: track {} of segment {} claimed by two trajectories",
                    pm.name,
                    next_ti + 1,
                    next_seg + 1
                );
                if strict {
                    return Err(Error::Integrity(message));
                }
                diagnostics.push(message);
                complete = false;
                break;
            }
            used[next_seg][next_ti] = true;
            hops.push(TrajectoryHop { segment: next_seg, track: next_ti });
            seg = next_seg;
            ti = next_ti;
        }
        Ok(Trajectory { id: 0, hops, complete })
    };

    for seg in crate::graph::source_segments(net) {
        for ti in 0..tracks[seg].len() {
            if !used[seg][ti] {
                trajectories.push(walk(seg, ti, &mut used, &mut diagnostics)?);
            }
        }
    }
    // orphans: tracks first appearing mid-network
    for seg in 0..tracks.len() {
        for ti in 0..tracks[seg].len() {
            if !used[seg][ti] {
                trajectories.push(walk(seg, ti, &mut used, &mut diagnostics)?);
            }
        }
    }
    for (id, t) in trajectories.iter_mut().enumerate() {
        t.id = id;
    }

    let merge_matrices = build_merge_matrices(net, tracks, &trajectories);
    Ok(TraceOutput {
        trajectories,
        merge_matrices,
        diagnostics,
    })
}

/// Per-segment merge matrices: identity unless the network admits cycles, in
/// which case every pair of same-segment hops within one trajectory is
/// linked. Trajectories never share tracks, so the linked groups are
/// disjoint cliques and the result is transitively closed by construction.
fn build_merge_matrices(
    net: &RoadNetwork,
    tracks: &[Vec<Track>],
    trajectories: &[Trajectory],
) -> Vec<MergeMatrix> {
    let mut matrices: Vec<MergeMatrix> = tracks
        .iter()
        .enumerate()
        .map(|(seg, t)| MergeMatrix::identity(seg, t.len()))
        .collect();
    if !has_cycle(net) {
        return matrices;
    }
    for trajectory in trajectories {
        let mut per_segment: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for hop in &trajectory.hops {
            per_segment.entry(hop.segment).or_default().push(hop.track);
        }
        for (seg, labels) in per_segment {
            for (i, &a) in labels.iter().enumerate() {
                for &b in labels.iter().skip(i + 1) {
                    matrices[seg].matrix[a][b] = 1;
                    matrices[seg].matrix[b][a] = 1;
                }
            }
        }
    }
    matrices
}

/// Hits of a trajectory, gathered from its hop tracks.
pub fn trajectory_hits(trajectory: &Trajectory, tracks: &[Vec<Track>]) -> Vec<HitRef> {
    trajectory
        .hops
        .iter()
        .flat_map(|hop| tracks[hop.segment][hop.track].members.iter().copied())
        .collect()
}
