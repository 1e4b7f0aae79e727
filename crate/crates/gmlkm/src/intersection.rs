//! Data pairing at intersections. Hits leaving the feeding segments (last
//! sensors) and hits entering the draining segments (first sensors) are
//! projected onto the intersection center, clustered, checked against the
//! pairing rules, and resolved into a permutation matrix that maps every
//! incoming hit to an outgoing hit or to a stop slot.

use crate::assignment::{min_cost_assignment, FORBIDDEN};
use crate::clustering::{kmeanspp, Point2};
use crate::error::{Error, Result};
use crate::graph::IntersectionSpec;
use crate::network::{HitRef, RoadNetwork, SegmentDataset, SensorId};
use crate::preprocessing::{project_intersection, IntersectionRole};
use crate::seeds::derive_seed;

/// One projected hit taking part in the pairing at an intersection.
#[derive(Debug, Clone, Copy)]
pub struct IntersectionHit {
    pub origin: HitRef,
    pub velocity: f64,
    /// Raw measurement time.
    pub time: f64,
    /// Time projected onto the intersection center.
    pub projected_time: f64,
}

/// The gathered pairing problem for one intersection: incoming and outgoing
/// hits in canonical order (segment index, then hit time).
#[derive(Debug, Clone)]
pub struct IntersectionDataset {
    pub name: String,
    pub incoming: Vec<IntersectionHit>,
    pub outgoing: Vec<IntersectionHit>,
}

impl IntersectionDataset {
    pub fn n_incoming(&self) -> usize {
        self.incoming.len()
    }

    pub fn n_outgoing(&self) -> usize {
        self.outgoing.len()
    }
}

/// Permutation matrix over an intersection. Rows follow the canonical
/// incoming order; the first `n_outgoing` columns follow the canonical
/// outgoing order and the remaining columns are stop slots.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingMatrix {
    pub name: String,
    pub matrix: Vec<Vec<u8>>,
    pub rows: Vec<HitRef>,
    pub cols: Vec<HitRef>,
    pub diagnostics: Vec<String>,
}

impl PairingMatrix {
    pub fn n_incoming(&self) -> usize {
        self.rows.len()
    }

    pub fn n_outgoing(&self) -> usize {
        self.cols.len()
    }

    /// Column paired with incoming row `row`; `None` when the matrix is
    /// empty for that row (cannot happen for a valid permutation).
    pub fn pair_of(&self, row: usize) -> Option<usize> {
        self.matrix[row].iter().position(|&x| x == 1)
    }

    pub fn is_permutation(&self) -> bool {
        let n = self.matrix.len();
        self.matrix.iter().all(|r| {
            r.len() == n && r.iter().map(|&x| x as usize).sum::<usize>() == 1
        }) && (0..n).all(|j| {
            self.matrix.iter().map(|r| r[j] as usize).sum::<usize>() == 1
        })
    }
}

/// Collect the incoming and outgoing hits of one intersection from the
/// per-segment datasets, projected onto the intersection center.
pub fn gather(
    spec: &IntersectionSpec,
    net: &RoadNetwork,
    data: &[SegmentDataset],
) -> Result<IntersectionDataset> {
    let r = net.intersection_radius;
    let mut incoming = Vec::new();
    for &i in &spec.out_segments {
        let seg = &net.segments[i];
        let rank = seg.last_rank();
        let sensor = SensorId { segment: i, rank };
        for (hit, m) in data[i].records[rank].hits.iter().enumerate() {
            let origin = HitRef { sensor, hit };
            let p = project_intersection(*m, IntersectionRole::Incoming, seg, sensor, r, origin)?;
            incoming.push(IntersectionHit {
                origin,
                velocity: m.velocity,
                time: m.time,
                projected_time: p.projected_time,
            });
        }
    }
    let mut outgoing = Vec::new();
    for &l in &spec.in_segments {
        let seg = &net.segments[l];
        let sensor = SensorId { segment: l, rank: 0 };
        for (hit, m) in data[l].records[0].hits.iter().enumerate() {
            let origin = HitRef { sensor, hit };
            let p = project_intersection(*m, IntersectionRole::Outgoing, seg, sensor, r, origin)?;
            outgoing.push(IntersectionHit {
                origin,
                velocity: m.velocity,
                time: m.time,
                projected_time: p.projected_time,
            });
        }
    }
    // canonical order: segment index, then hit time (hit indices are already
    // chronological per sensor)
    incoming.sort_by(|a, b| {
        (a.origin.sensor.segment, a.origin.hit).cmp(&(b.origin.sensor.segment, b.origin.hit))
    });
    outgoing.sort_by(|a, b| {
        (a.origin.sensor.segment, a.origin.hit).cmp(&(b.origin.sensor.segment, b.origin.hit))
    });
    if incoming.len() < outgoing.len() {
        return Err(Error::Intersection {
            name: spec.name.clone(),
            message: format!(
                "{} outgoing hits exceed {} incoming hits; inconsistent with one-way flow",
                outgoing.len(),
                incoming.len()
            ),
        });
    }
    Ok(IntersectionDataset {
        name: spec.name.clone(),
        incoming,
        outgoing,
    })
}

enum Resolution {
    Paired(usize, usize), // incoming row, outgoing col
    Stopped(usize),       // incoming row
}

fn euclidean_cost(a: &IntersectionHit, b: &IntersectionHit) -> f64 {
    let dv = a.velocity - b.velocity;
    let dt = a.projected_time - b.projected_time;
    (dv * dv + dt * dt).sqrt()
}

/// Pair incoming with outgoing hits. `error_correction` enables the rule
/// checks (at most two members per cluster, exactly one incoming, no
/// backwards time) and the optimal re-assignment of flagged hits; without it
/// clusters are read off greedily. Either way the result is a permutation.
pub fn pair(
    ds: &IntersectionDataset,
    seed: u64,
    error_correction: bool,
) -> Result<PairingMatrix> {
    let n_in = ds.n_incoming();
    let n_out = ds.n_outgoing();
    let name = ds.name.clone();
    let mut diagnostics = Vec::new();

    if n_in == 0 {
        return Ok(PairingMatrix {
            name,
            matrix: Vec::new(),
            rows: Vec::new(),
            cols: Vec::new(),
            diagnostics,
        });
    }

    // cluster the joint projected dataset with k = n_incoming
    let mut points = Vec::with_capacity(n_in + n_out);
    for h in ds.incoming.iter().chain(ds.outgoing.iter()) {
        points.push(Point2::new(h.velocity, h.projected_time));
    }
    let clustering = kmeanspp(&points, n_in, derive_seed(seed, 0x1297))?;

    let mut cluster_in: Vec<Vec<usize>> = vec![Vec::new(); n_in];
    let mut cluster_out: Vec<Vec<usize>> = vec![Vec::new(); n_in];
    for (p, &c) in clustering.assignment.iter().enumerate() {
        if p < n_in {
            cluster_in[c].push(p);
        } else {
            cluster_out[c].push(p - n_in);
        }
    }

    let mut resolutions: Vec<Resolution> = Vec::new();
    let mut flagged_in: Vec<usize> = Vec::new();
    let mut flagged_out: Vec<usize> = Vec::new();

    if error_correction {
        let mut clean_stops: Vec<usize> = Vec::new();
        for c in 0..n_in {
            let ins = &cluster_in[c];
            let outs = &cluster_out[c];
            let size = ins.len() + outs.len();
            if size == 0 {
                continue;
            }
            let time_ok = |ki: usize, ko: usize| ds.outgoing[ko].time > ds.incoming[ki].time;
            let clean = size <= 2
                && ins.len() == 1
                && (outs.is_empty() || time_ok(ins[0], outs[0]));
            if clean {
                if outs.is_empty() {
                    clean_stops.push(ins[0]);
                } else {
                    resolutions.push(Resolution::Paired(ins[0], outs[0]));
                }
            } else {
                flagged_in.extend(ins.iter().copied());
                flagged_out.extend(outs.iter().copied());
            }
        }
        // keep only as many stop resolutions as stop slots exist; demote the
        // rest into the re-assignment pool so every outgoing hit gets a row
        clean_stops.sort_unstable();
        let excess = clean_stops.len().saturating_sub(n_in - n_out);
        for ki in clean_stops.drain(..excess) {
            flagged_in.push(ki);
        }
        for &ki in &clean_stops {
            resolutions.push(Resolution::Stopped(ki));
        }
        flagged_in.sort_unstable();
        flagged_out.sort_unstable();

        if !flagged_in.is_empty() || !flagged_out.is_empty() {
            // remaining stop slots keep the residual problem square
            let stop_slots = (n_in - n_out) - clean_stops.len();
            debug_assert_eq!(flagged_in.len(), flagged_out.len() + stop_slots);

            let mut finite_costs: Vec<f64> = Vec::new();
            for &ki in &flagged_in {
                for &ko in &flagged_out {
                    if ds.outgoing[ko].time > ds.incoming[ki].time {
                        finite_costs.push(euclidean_cost(&ds.incoming[ki], &ds.outgoing[ko]));
                    }
                }
            }
            let stop_penalty = percentile95(&mut finite_costs).unwrap_or(1.0);

            let rows = flagged_in.len();
            let cols = flagged_out.len() + stop_slots;
            let mut cost = vec![vec![0.0f64; cols]; rows];
            for (ri, &ki) in flagged_in.iter().enumerate() {
                for (cj, &ko) in flagged_out.iter().enumerate() {
                    cost[ri][cj] = if ds.outgoing[ko].time > ds.incoming[ki].time {
                        euclidean_cost(&ds.incoming[ki], &ds.outgoing[ko])
                    } else {
                        FORBIDDEN
                    };
                }
                for cj in flagged_out.len()..cols {
                    cost[ri][cj] = stop_penalty;
                }
            }
            let assignment = min_cost_assignment(&cost);
            for (ri, &cj) in assignment.iter().enumerate() {
                let ki = flagged_in[ri];
                if cj < flagged_out.len() {
                    if cost[ri][cj] >= FORBIDDEN {
                        diagnostics.push(format!(
                            "intersection {name}: forced time-reversed pairing for incoming hit {}",
                            ki + 1
                        ));
                    }
                    resolutions.push(Resolution::Paired(ki, flagged_out[cj]));
                } else {
                    resolutions.push(Resolution::Stopped(ki));
                }
            }
        }
    } else {
        // no error correction: read clusters off greedily, then pair any
        // leftovers in projected-time order
        let mut spare_in: Vec<usize> = Vec::new();
        let mut spare_out: Vec<usize> = Vec::new();
        for c in 0..n_in {
            let ins = &cluster_in[c];
            let outs = &cluster_out[c];
            let paired = ins.len().min(outs.len());
            for i in 0..paired {
                resolutions.push(Resolution::Paired(ins[i], outs[i]));
            }
            spare_in.extend(ins.iter().skip(paired));
            spare_out.extend(outs.iter().skip(paired));
        }
        let by_projected_time = |hits: &[IntersectionHit], a: &usize, b: &usize| {
            hits[*a]
                .projected_time
                .total_cmp(&hits[*b].projected_time)
                .then(a.cmp(b))
        };
        spare_in.sort_by(|a, b| by_projected_time(&ds.incoming, a, b));
        spare_out.sort_by(|a, b| by_projected_time(&ds.outgoing, a, b));
        let paired = spare_in.len().min(spare_out.len());
        for i in 0..paired {
            resolutions.push(Resolution::Paired(spare_in[i], spare_out[i]));
        }
        for &ki in spare_in.iter().skip(paired) {
            resolutions.push(Resolution::Stopped(ki));
        }
        debug_assert!(spare_out.len() <= spare_in.len());
    }

    // assemble the permutation; stopped rows take stop columns in row order
    let mut matrix = vec![vec![0u8; n_in]; n_in];
    let mut stopped: Vec<usize> = Vec::new();
    for r in &resolutions {
        match *r {
            Resolution::Paired(ki, ko) => matrix[ki][ko] = 1,
            Resolution::Stopped(ki) => stopped.push(ki),
        }
    }
    stopped.sort_unstable();
    for (slot, &ki) in stopped.iter().enumerate() {
        matrix[ki][n_out + slot] = 1;
    }

    let pm = PairingMatrix {
        name,
        matrix,
        rows: ds.incoming.iter().map(|h| h.origin).collect(),
        cols: ds.outgoing.iter().map(|h| h.origin).collect(),
        diagnostics,
    };
    debug_assert!(pm.is_permutation(), "pairing must be a permutation");
    Ok(pm)
}

/// 95th percentile (nearest-rank) of the given costs.
fn percentile95(costs: &mut Vec<f64>) -> Option<f64> {
    if costs.is_empty() {
        return None;
    }
    costs.sort_by(f64::total_cmp);
    let rank = ((costs.len() as f64) * 0.95).ceil() as usize;
    Some(costs[rank.saturating_sub(1).min(costs.len() - 1)])
}
