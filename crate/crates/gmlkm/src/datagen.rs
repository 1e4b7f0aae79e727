//! Labeled synthetic scenarios: targets enter the network at source
//! segments, hold a velocity perturbed by Gaussian noise at each sensor, and
//! turn uniformly at random at intersections. Ground-truth labels tie every
//! generated hit back to its target.

use crate::error::{Error, Result};
use crate::network::{
    HitRef, Measurement, RoadNetwork, RoadSegment, SegmentDataset, SensorId, SensorRecord,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Scenario parameters. Initial velocity and entry time are drawn uniformly
/// from `v_range` / `t_range`; at every sensor the velocity is re-drawn as
/// `v_prev + Normal(noise_mu, noise_sigma)` with a floor at `v_range.0 / 4`.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub net: RoadNetwork,
    pub n_targets: usize,
    pub v_range: (f64, f64),
    pub t_range: (f64, f64),
    pub noise_mu: f64,
    pub noise_sigma: f64,
    pub entry_segments: Vec<usize>,
    pub rng_seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_range.0 <= 0.0 || self.v_range.1 < self.v_range.0 {
            return Err(Error::Config(format!(
                "velocity range ({}, {}) must be positive and ordered",
                self.v_range.0, self.v_range.1
            )));
        }
        if self.t_range.1 < self.t_range.0 {
            return Err(Error::Config("entry time range must be ordered".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config("noise sigma must be non-negative".into()));
        }
        let sources = crate::graph::source_segments(&self.net);
        for &e in &self.entry_segments {
            if !sources.contains(&e) {
                return Err(Error::Config(format!(
                    "entry segment {} is not a source segment",
                    e + 1
                )));
            }
        }
        if self.entry_segments.is_empty() && self.n_targets > 0 {
            return Err(Error::Config("no entry segments available".into()));
        }
        Ok(())
    }
}

/// Ground truth for one generated scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    /// Target id of every stored hit.
    pub labels: BTreeMap<HitRef, usize>,
    /// True segment sequence walked by each target.
    pub trajectories: Vec<Vec<usize>>,
}

/// A target with a fixed route and entry state, for reproducing worked
/// examples exactly.
#[derive(Debug, Clone)]
pub struct ScriptedTarget {
    pub route: Vec<usize>,
    pub velocity: f64,
    pub start_time: f64,
}

struct Event {
    sensor: SensorId,
    time: f64,
    velocity: f64,
    target: usize,
}

/// Walk one target along `route`, drawing a velocity at each sensor and
/// advancing time by distance/velocity over each leg. The first segment is
/// entered at its start; later segments are entered through the intersection
/// circle (radius `r` before the segment start).
fn walk_route(
    net: &RoadNetwork,
    route: &[usize],
    target: usize,
    v0: f64,
    t0: f64,
    v_floor: f64,
    mut next_velocity: impl FnMut(f64) -> f64,
    events: &mut Vec<Event>,
) {
    let r = net.intersection_radius;
    let mut v = v0;
    let mut t = t0;
    for (hop, &seg_idx) in route.iter().enumerate() {
        let seg = &net.segments[seg_idx];
        let mut prev = if hop == 0 { 0.0 } else { -r };
        for (rank, &d) in seg.sensor_positions.iter().enumerate() {
            let v_new = next_velocity(v).max(v_floor);
            t += (d - prev) / v_new;
            events.push(Event {
                sensor: SensorId { segment: seg_idx, rank },
                time: t,
                velocity: v_new,
                target,
            });
            prev = d;
            v = v_new;
        }
        // travel on to the next intersection center at the last measured
        // velocity
        t += (seg.length - prev + r) / v;
    }
}

fn events_to_datasets(net: &RoadNetwork, mut events: Vec<Event>) -> (Vec<SegmentDataset>, GroundTruth, Vec<Vec<usize>>) {
    events.sort_by(|a, b| {
        a.sensor
            .cmp(&b.sensor)
            .then(a.time.total_cmp(&b.time))
            .then(a.target.cmp(&b.target))
    });
    let mut labels = BTreeMap::new();
    let mut per_sensor: BTreeMap<SensorId, Vec<Measurement>> = BTreeMap::new();
    let mut counters: BTreeMap<SensorId, usize> = BTreeMap::new();
    for e in &events {
        let hit = {
            let c = counters.entry(e.sensor).or_insert(0);
            let hit = *c;
            *c += 1;
            hit
        };
        labels.insert(HitRef { sensor: e.sensor, hit }, e.target);
        per_sensor.entry(e.sensor).or_default().push(Measurement {
            velocity: e.velocity,
            time: e.time,
        });
    }
    let datasets = net
        .segments
        .iter()
        .enumerate()
        .map(|(seg, s)| {
            let records = (0..s.sensor_count())
                .map(|rank| {
                    let sensor = SensorId { segment: seg, rank };
                    SensorRecord {
                        sensor,
                        hits: per_sensor.remove(&sensor).unwrap_or_default(),
                    }
                })
                .collect();
            SegmentDataset::new(seg, records)
        })
        .collect();
    let truth = GroundTruth {
        labels,
        trajectories: Vec::new(),
    };
    (datasets, truth, Vec::new())
}

/// Generate a random labeled scenario. Targets enter until all have left the
/// network; turning choices at each intersection are uniform over the
/// adjacent outgoing segments.
pub fn generate(cfg: &ScenarioConfig) -> Result<(Vec<SegmentDataset>, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let normal = Normal::new(cfg.noise_mu, cfg.noise_sigma)
        .map_err(|e| Error::Config(format!("bad noise parameters: {e}")))?;
    let v_floor = cfg.v_range.0 / 4.0;

    let mut events = Vec::new();
    let mut routes = Vec::with_capacity(cfg.n_targets);
    for target in 0..cfg.n_targets {
        let entry = cfg.entry_segments[rng.random_range(0..cfg.entry_segments.len())];
        let v0 = rng.random_range(cfg.v_range.0..=cfg.v_range.1);
        let t0 = rng.random_range(cfg.t_range.0..=cfg.t_range.1);

        // draw the route first so velocity sampling stays per-sensor ordered
        let mut route = vec![entry];
        loop {
            let here = *route.last().unwrap();
            let nexts: Vec<usize> = (0..cfg.net.segment_count())
                .filter(|&j| cfg.net.adjacency[here][j] != 0)
                .collect();
            if nexts.is_empty() {
                break;
            }
            route.push(nexts[rng.random_range(0..nexts.len())]);
        }
        walk_route(
            &cfg.net,
            &route,
            target,
            v0,
            t0,
            v_floor,
            |v| v + normal.sample(&mut rng),
            &mut events,
        );
        routes.push(route);
    }
    let (datasets, mut truth, _) = events_to_datasets(&cfg.net, events);
    truth.trajectories = routes;
    Ok((datasets, truth))
}

/// Generate a scenario from fully scripted targets (exact entry state and
/// route), with the same noise model as `generate`.
pub fn generate_scripted(
    net: &RoadNetwork,
    targets: &[ScriptedTarget],
    noise: (f64, f64),
    v_floor: f64,
    seed: u64,
) -> Result<(Vec<SegmentDataset>, GroundTruth)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(noise.0, noise.1)
        .map_err(|e| Error::Config(format!("bad noise parameters: {e}")))?;
    let mut events = Vec::new();
    for (target, spec) in targets.iter().enumerate() {
        if spec.route.is_empty() {
            return Err(Error::Config(format!("target {} has an empty route", target + 1)));
        }
        for w in spec.route.windows(2) {
            if net.adjacency[w[0]][w[1]] == 0 {
                return Err(Error::Config(format!(
                    "target {}: no edge from segment {} to {}",
                    target + 1,
                    w[0] + 1,
                    w[1] + 1
                )));
            }
        }
        if !(spec.velocity > 0.0) {
            return Err(Error::Config(format!("target {} has non-positive velocity", target + 1)));
        }
        walk_route(
            net,
            &spec.route,
            target,
            spec.velocity,
            spec.start_time,
            v_floor,
            |v| v + normal.sample(&mut rng),
            &mut events,
        );
    }
    let (datasets, mut truth, _) = events_to_datasets(net, events);
    truth.trajectories = targets.iter().map(|t| t.route.clone()).collect();
    Ok((datasets, truth))
}

// ---------------------------------------------------------------------------
// Label sidecar table
// ---------------------------------------------------------------------------

/// Serialize ground-truth labels: `segment,sensor,hit_index,target_id`
/// (all 1-based).
pub fn labels_to_document(truth: &GroundTruth) -> String {
    let mut out = String::from("segment,sensor,hit_index,target_id\n");
    for (r, &target) in &truth.labels {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sensor.segment + 1,
            r.sensor.rank + 1,
            r.hit + 1,
            target + 1
        ));
    }
    out
}

/// Parse a label sidecar table back into per-hit labels.
pub fn load_labels(text: &str) -> Result<BTreeMap<HitRef, usize>> {
    let mut labels = BTreeMap::new();
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "segment,sensor,hit_index,target_id" => {}
        _ => {
            return Err(Error::Parse(
                "label table must start with header 'segment,sensor,hit_index,target_id'".into(),
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
        let mut parsed = [0usize; 4];
        for (slot, f) in parsed.iter_mut().zip(&fields) {
            *slot = f.trim().parse::<usize>().map_err(|_| {
                Error::Parse(format!("line {}: bad integer '{}'", lineno + 1, f))
            })?;
        }
        let [segment, sensor, hit, target] = parsed;
        if segment == 0 || sensor == 0 || hit == 0 || target == 0 {
            return Err(Error::Parse(format!(
                "line {}: label table fields are 1-based",
                lineno + 1
            )));
        }
        labels.insert(
            HitRef {
                sensor: SensorId { segment: segment - 1, rank: sensor - 1 },
                hit: hit - 1,
            },
            target - 1,
        );
    }
    Ok(labels)
}

// ---------------------------------------------------------------------------
// Scenario document (JSON tree, parametric network as in the simulations)
// ---------------------------------------------------------------------------

/// On-disk scenario description. The network is parametric: `num_segments`
/// segments of `sensors_per_segment` equally spaced sensors at spacing `d`
/// (positions d..N_S*d, segment length N_S*d, intersection radius d/2).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub num_segments: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    pub sensors_per_segment: usize,
    pub sensor_spacing: f64,
    pub n_targets: usize,
    pub v_range: [f64; 2],
    pub t_range: [f64; 2],
    #[serde(default)]
    pub noise_mu: f64,
    /// Defaults to 5% of the mean of `v_range` when omitted.
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    /// Defaults to all source segments (1-based).
    #[serde(default)]
    pub entry_segments: Option<Vec<usize>>,
    #[serde(default)]
    pub rng_seed: u64,
}

/// Build the equally spaced sensor network the simulations use.
pub fn parametric_network(
    num_segments: usize,
    edges: &[(usize, usize)],
    sensors_per_segment: usize,
    spacing: f64,
) -> Result<RoadNetwork> {
    if sensors_per_segment == 0 {
        return Err(Error::Config("sensors_per_segment must be at least 1".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::Config("sensor_spacing must be positive".into()));
    }
    let segments = (0..num_segments)
        .map(|id| RoadSegment {
            id,
            length: spacing * sensors_per_segment as f64,
            sensor_positions: (1..=sensors_per_segment)
                .map(|j| spacing * j as f64)
                .collect(),
        })
        .collect();
    RoadNetwork::new(segments, edges, spacing / 2.0)
}

/// Parse a scenario document into a runnable config.
pub fn scenario_from_document(text: &str) -> Result<ScenarioConfig> {
    let doc: ScenarioDoc =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
    scenario_from_doc(&doc)
}

pub fn scenario_from_doc(doc: &ScenarioDoc) -> Result<ScenarioConfig> {
    let mut edges = Vec::with_capacity(doc.edges.len());
    for &[from, to] in &doc.edges {
        if from == 0 || to == 0 {
            return Err(Error::Config("edges are 1-based".into()));
        }
        edges.push((from - 1, to - 1));
    }
    let net = parametric_network(
        doc.num_segments,
        &edges,
        doc.sensors_per_segment,
        doc.sensor_spacing,
    )?;
    let entry_segments = match &doc.entry_segments {
        Some(list) => {
            let mut out = Vec::with_capacity(list.len());
            for &e in list {
                if e == 0 || e > doc.num_segments {
                    return Err(Error::Config(format!("entry segment {e} out of range")));
                }
                out.push(e - 1);
            }
            out
        }
        None => crate::graph::source_segments(&net),
    };
    let noise_sigma = doc
        .noise_sigma
        .unwrap_or(0.05 * (doc.v_range[0] + doc.v_range[1]) / 2.0);
    let cfg = ScenarioConfig {
        net,
        n_targets: doc.n_targets,
        v_range: (doc.v_range[0], doc.v_range[1]),
        t_range: (doc.t_range[0], doc.t_range[1]),
        noise_mu: doc.noise_mu,
        noise_sigma,
        entry_segments,
        rng_seed: doc.rng_seed,
    };
    cfg.validate()?;
    Ok(cfg)
}
