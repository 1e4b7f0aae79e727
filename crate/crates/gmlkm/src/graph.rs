//! Graph machinery over the road network: the p-dual graph (each segment
//! split into its first- and last-sensor agents), intersection extraction
//! from its adjacency structure, source-segment identification, and cycle
//! detection.

use crate::network::RoadNetwork;

/// The p-dual graph. Node `2i` is the start-sensor agent of segment `i`,
/// node `2i + 1` its end-sensor agent. The only edges run from an
/// end-sensor agent to a start-sensor agent of an adjacent segment.
#[derive(Debug, Clone, PartialEq)]
pub struct PDualGraph {
    pub node_count: usize,
    /// `adjacency_star[a][b] == 1` iff agent `a` feeds agent `b`.
    pub adjacency_star: Vec<Vec<u8>>,
}

impl PDualGraph {
    pub fn start_node(segment: usize) -> usize {
        2 * segment
    }

    pub fn end_node(segment: usize) -> usize {
        2 * segment + 1
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency_star
            .iter()
            .map(|row| row.iter().filter(|&&a| a != 0).count())
            .sum()
    }
}

/// One intersection: the segments feeding it (targets leave them through
/// their last sensor) and the segments draining it (targets enter them
/// through their first sensor).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntersectionSpec {
    pub name: String,
    /// Feeding segments, ascending (the set O_T).
    pub out_segments: Vec<usize>,
    /// Draining segments, ascending (the set I_T).
    pub in_segments: Vec<usize>,
}

/// Expand the segment adjacency into the 2L x 2L p-dual adjacency.
pub fn build_pdual(net: &RoadNetwork) -> PDualGraph {
    let l = net.segment_count();
    let n = 2 * l;
    let mut adjacency_star = vec![vec![0u8; n]; n];
    for i in 0..l {
        for j in 0..l {
            if net.adjacency[i][j] != 0 {
                adjacency_star[PDualGraph::end_node(i)][PDualGraph::start_node(j)] = 1;
            }
        }
    }
    PDualGraph {
        node_count: n,
        adjacency_star,
    }
}

/// Extract one `IntersectionSpec` per connected component of the p-dual
/// cross-segment edges. Each component couples end-sensor agents (rows) with
/// start-sensor agents (columns); union-find over the bipartite incidence
/// gives the same fixed point as repeated row/column scanning, independent
/// of scan order. Components are named `a`, `b`, `c`, ... in descending
/// order of their highest feeding segment, matching the conventional
/// presentation of the six-segment example network.
pub fn extract_subgraphs(g: &PDualGraph) -> Vec<IntersectionSpec> {
    let n = g.node_count;
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    let mut has_edge = vec![false; n];
    for a in 0..n {
        for b in 0..n {
            if g.adjacency_star[a][b] != 0 {
                has_edge[a] = true;
                has_edge[b] = true;
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }

    let mut components: Vec<(usize, Vec<usize>, Vec<usize>)> = Vec::new();
    for node in 0..n {
        if !has_edge[node] {
            continue;
        }
        let root = find(&mut parent, node);
        let entry = match components.iter_mut().find(|(r, _, _)| *r == root) {
            Some(e) => e,
            None => {
                components.push((root, Vec::new(), Vec::new()));
                components.last_mut().unwrap()
            }
        };
        let segment = node / 2;
        if node % 2 == 1 {
            entry.1.push(segment); // end-sensor agent: feeding segment
        } else {
            entry.2.push(segment); // start-sensor agent: draining segment
        }
    }

    components.sort_by_key(|(_, out_segments, _)| {
        std::cmp::Reverse(out_segments.iter().copied().max().unwrap_or(0))
    });
    components
        .into_iter()
        .enumerate()
        .map(|(idx, (_, out_segments, in_segments))| IntersectionSpec {
            name: intersection_name(idx),
            out_segments,
            in_segments,
        })
        .collect()
}

/// `a`, `b`, ..., `z`, `aa`, `ab`, ... in discovery order.
pub fn intersection_name(index: usize) -> String {
    let mut n = index + 1;
    let mut name = String::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        name.insert(0, (b'a' + rem as u8) as char);
        n = (n - 1) / 26;
    }
    name
}

/// Segments whose adjacency column is all zero: traffic only leaves them.
pub fn source_segments(net: &RoadNetwork) -> Vec<usize> {
    (0..net.segment_count())
        .filter(|&j| (0..net.segment_count()).all(|i| net.adjacency[i][j] == 0))
        .collect()
}

/// True iff the segment adjacency contains a directed cycle (three-color
/// depth-first search).
pub fn has_cycle(net: &RoadNetwork) -> bool {
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let l = net.segment_count();
    let mut color = vec![WHITE; l];
    for start in 0..l {
        if color[start] != WHITE {
            continue;
        }
        // stack of (node, next neighbor to inspect)
        let mut stack = vec![(start, 0usize)];
        color[start] = GRAY;
        while let Some(&mut (node, ref mut cursor)) = stack.last_mut() {
            let mut descended = false;
            while *cursor < l {
                let next = *cursor;
                *cursor += 1;
                if net.adjacency[node][next] == 0 {
                    continue;
                }
                match color[next] {
                    GRAY => return true,
                    WHITE => {
                        color[next] = GRAY;
                        stack.push((next, 0));
                        descended = true;
                        break;
                    }
                    _ => {}
                }
            }
            if !descended {
                color[node] = BLACK;
                stack.pop();
            }
        }
    }
    false
}
