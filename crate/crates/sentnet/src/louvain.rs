//! Community detection by greedy modularity maximization (the Louvain
//! method), plus an exhaustive oracle for small graphs.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::simgraph::SentenceGraph;

#[derive(Debug, Error)]
pub enum LouvainError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("brute force supports at most 10 nodes, got {0}")]
    TooLargeForBruteForce(usize),
    #[error("partition file malformed at line {line}: {reason}")]
    MalformedPartition { line: usize, reason: String },
}

/// Total assignment of nodes to dense community ids 0..k-1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<u32>,
    k: usize,
}

impl Partition {
    /// Builds from any assignment vector, relabeling ids densely in
    /// first-appearance order.
    pub fn from_assignment(raw: &[u32]) -> Self {
        let mut relabel: BTreeMap<u32, u32> = BTreeMap::new();
        let mut next = 0u32;
        let assignment = raw
            .iter()
            .map(|&c| {
                *relabel.entry(c).or_insert_with(|| {
                    let id = next;
                    next += 1;
                    id
                })
            })
            .collect();
        Partition {
            assignment,
            k: next as usize,
        }
    }

    /// Every node its own community.
    pub fn singletons(n: usize) -> Self {
        Partition {
            assignment: (0..n as u32).collect(),
            k: n,
        }
    }

    /// All nodes in one community.
    pub fn all_in_one(n: usize) -> Self {
        Partition {
            assignment: vec![0; n],
            k: usize::from(n > 0),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    /// Number of communities.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn community_of(&self, node: usize) -> u32 {
        self.assignment[node]
    }

    pub fn assignment(&self) -> &[u32] {
        &self.assignment
    }

    /// Member node ids per community.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut members = vec![Vec::new(); self.k];
        for (node, &c) in self.assignment.iter().enumerate() {
            members[c as usize].push(node as u32);
        }
        members
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c as usize] += 1;
        }
        sizes
    }

    pub fn n_singletons(&self) -> usize {
        self.sizes().iter().filter(|&&s| s == 1).count()
    }

    /// Relabels communities by (size descending, smallest member id
    /// ascending) so reports are stable across runs.
    pub fn canonicalized(&self) -> Partition {
        let members = self.members();
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by_key(|&c| (usize::MAX - members[c].len(), members[c][0]));
        let mut relabel = vec![0u32; self.k];
        for (new_id, &old_id) in order.iter().enumerate() {
            relabel[old_id] = new_id as u32;
        }
        Partition {
            assignment: self.assignment.iter().map(|&c| relabel[c as usize]).collect(),
            k: self.k,
        }
    }

    /// Writes CSV `node_id,community_id` in node order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LouvainError> {
        let mut writer = csv::Writer::from_path(path.as_ref()).map_err(io_of_csv)?;
        writer
            .write_record(["node_id", "community_id"])
            .map_err(io_of_csv)?;
        for (node, &c) in self.assignment.iter().enumerate() {
            writer
                .write_record([node.to_string(), c.to_string()])
                .map_err(io_of_csv)?;
        }
        writer.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LouvainError> {
        let mut reader = csv::Reader::from_path(path.as_ref()).map_err(io_of_csv)?;
        let mut raw = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| LouvainError::MalformedPartition {
                line,
                reason: e.to_string(),
            })?;
            let node: usize = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LouvainError::MalformedPartition {
                    line,
                    reason: "bad node id".into(),
                })?;
            if node != i {
                return Err(LouvainError::MalformedPartition {
                    line,
                    reason: format!("expected node {i}, found {node}"),
                });
            }
            let community: u32 = record
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| LouvainError::MalformedPartition {
                    line,
                    reason: "bad community id".into(),
                })?;
            raw.push(community);
        }
        Ok(Partition::from_assignment(&raw))
    }
}

fn io_of_csv(e: csv::Error) -> LouvainError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => LouvainError::Io(io),
        other => LouvainError::MalformedPartition {
            line: 0,
            reason: format!("{other:?}"),
        },
    }
}

/// Louvain parameters. Defaults: seed 0, min_gain 1e-9, max_passes 50.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LouvainConfig {
    pub seed: u64,
    pub min_gain: f64,
    pub max_passes: usize,
}

impl Default for LouvainConfig {
    fn default() -> Self {
        LouvainConfig {
            seed: 0,
            min_gain: 1e-9,
            max_passes: 50,
        }
    }
}

/// Newman–Girvan modularity
/// `Q = (1/2W) Σ_ij [w_ij − s_i s_j / 2W] δ(c_i, c_j)`
/// with W the total edge weight and s_i the weighted degree. A graph with
/// zero total weight has Q defined as 0.
pub fn modularity(g: &SentenceGraph, p: &Partition) -> f64 {
    assert_eq!(p.n_nodes(), g.n_nodes(), "partition must cover the graph");
    let two_w = 2.0 * g.total_weight();
    if two_w == 0.0 {
        return 0.0;
    }
    let mut internal = vec![0.0; p.k()];
    let mut strength = vec![0.0; p.k()];
    for &(i, j, w) in g.edges() {
        let ci = p.community_of(i as usize) as usize;
        let cj = p.community_of(j as usize) as usize;
        strength[ci] += w;
        strength[cj] += w;
        if ci == cj {
            internal[ci] += w;
        }
    }
    (0..p.k())
        .map(|c| 2.0 * internal[c] / two_w - (strength[c] / two_w).powi(2))
        .sum()
}

/// Working graph for the aggregation phase. `diag` holds adjacency-matrix
/// diagonal entries (twice the collapsed internal weight), so strengths and
/// the total 2W are preserved exactly across aggregation and Q computed at
/// any level equals Q of the composed partition on the original graph.
struct WorkGraph {
    adj: Vec<Vec<(u32, f64)>>,
    diag: Vec<f64>,
    strength: Vec<f64>,
    two_w: f64,
}

impl WorkGraph {
    fn from_graph(g: &SentenceGraph) -> Self {
        let adj = g.adjacency();
        let diag = vec![0.0; g.n_nodes()];
        let strength: Vec<f64> = adj
            .iter()
            .map(|nbrs| nbrs.iter().map(|&(_, w)| w).sum())
            .collect();
        let two_w = strength.iter().sum();
        WorkGraph {
            adj,
            diag,
            strength,
            two_w,
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Collapses communities into super-nodes. Returns the new graph and
    /// the old-node → new-node map (dense ids in ascending old-community
    /// order).
    fn aggregate(&self, node_comm: &[u32]) -> (WorkGraph, Vec<u32>) {
        let mut dense: BTreeMap<u32, u32> = BTreeMap::new();
        for &c in node_comm {
            let next = dense.len() as u32;
            dense.entry(c).or_insert(next);
        }
        let k = dense.len();
        let comp: Vec<u32> = node_comm.iter().map(|c| dense[c]).collect();

        let mut diag = vec![0.0; k];
        let mut cross: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for i in 0..self.n() {
            let ci = comp[i];
            diag[ci as usize] += self.diag[i];
            for &(j, w) in &self.adj[i] {
                if (j as usize) <= i {
                    continue; // visit each undirected edge once
                }
                let cj = comp[j as usize];
                if ci == cj {
                    diag[ci as usize] += 2.0 * w;
                } else {
                    let key = (ci.min(cj), ci.max(cj));
                    *cross.entry(key).or_insert(0.0) += w;
                }
            }
        }

        let mut adj = vec![Vec::new(); k];
        for (&(a, b), &w) in &cross {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        let strength: Vec<f64> = (0..k)
            .map(|c| diag[c] + adj[c].iter().map(|&(_, w)| w).sum::<f64>())
            .collect();
        let two_w = strength.iter().sum();
        (
            WorkGraph {
                adj,
                diag,
                strength,
                two_w,
            },
            comp,
        )
    }
}

/// Runs Louvain and also returns the modularity trace: Q on the original
/// graph for the singleton start and after every local-move sweep that
/// changed something. The trace is non-decreasing — each accepted move
/// gains at least `min_gain`.
pub fn louvain_detect_traced(g: &SentenceGraph, config: &LouvainConfig) -> (Partition, Vec<f64>) {
    assert!(config.min_gain > 0.0, "min_gain must be positive");
    assert!(config.max_passes >= 1, "max_passes must be at least 1");
    let n = g.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // global[v] = super-node of v in the current working graph
    let mut global: Vec<u32> = (0..n as u32).collect();
    let mut trace = vec![modularity(g, &Partition::singletons(n))];

    let mut wg = WorkGraph::from_graph(g);
    if wg.two_w == 0.0 {
        return (Partition::singletons(n), trace);
    }

    for _pass in 0..config.max_passes {
        let mut order: Vec<usize> = (0..wg.n()).collect();
        order.shuffle(&mut rng);

        let mut node_comm: Vec<u32> = (0..wg.n() as u32).collect();
        let mut comm_strength = wg.strength.clone();
        let mut level_improved = false;

        loop {
            let mut moved = false;
            for &i in &order {
                let b = node_comm[i];
                let s_i = wg.strength[i];

                let mut k_to: BTreeMap<u32, f64> = BTreeMap::new();
                k_to.insert(b, 0.0);
                for &(j, w) in &wg.adj[i] {
                    *k_to.entry(node_comm[j as usize]).or_insert(0.0) += w;
                }

                comm_strength[b as usize] -= s_i;
                let mut best_c = b;
                let mut best_score = f64::NEG_INFINITY;
                let mut stay_score = 0.0;
                for (&c, &k_ic) in &k_to {
                    // ΔQ of joining c (relative, up to the shared 1/W factor)
                    let score = k_ic - s_i * comm_strength[c as usize] / wg.two_w;
                    if c == b {
                        stay_score = score;
                    }
                    if score > best_score {
                        best_score = score;
                        best_c = c;
                    }
                }
                let gain = (best_score - stay_score) / (wg.two_w / 2.0);
                if best_c != b && gain >= config.min_gain {
                    node_comm[i] = best_c;
                    comm_strength[best_c as usize] += s_i;
                    moved = true;
                } else {
                    comm_strength[b as usize] += s_i;
                }
            }
            if !moved {
                break;
            }
            level_improved = true;
            let composed: Vec<u32> = global.iter().map(|&v| node_comm[v as usize]).collect();
            trace.push(modularity(g, &Partition::from_assignment(&composed)));
        }

        if !level_improved {
            break;
        }
        let before = wg.n();
        let (aggregated, comp) = wg.aggregate(&node_comm);
        for v in &mut global {
            *v = comp[*v as usize];
        }
        if aggregated.n() == before {
            break;
        }
        wg = aggregated;
    }

    (Partition::from_assignment(&global).canonicalized(), trace)
}

/// Seeded, deterministic Louvain community detection.
pub fn louvain_detect(g: &SentenceGraph, config: &LouvainConfig) -> Partition {
    louvain_detect_traced(g, config).0
}

/// Exhaustive modularity maximization over all set partitions (restricted
/// growth strings). Only feasible for n ≤ 10; ties resolve to the first
/// partition in enumeration order.
pub fn brute_force_partition(g: &SentenceGraph) -> Result<(Partition, f64), LouvainError> {
    let n = g.n_nodes();
    if n > 10 {
        return Err(LouvainError::TooLargeForBruteForce(n));
    }
    if n == 0 {
        return Ok((Partition::singletons(0), 0.0));
    }

    let mut assignment = vec![0u32; n];
    let mut best_assignment = assignment.clone();
    let mut best_q = f64::NEG_INFINITY;

    fn recurse(
        g: &SentenceGraph,
        assignment: &mut Vec<u32>,
        position: usize,
        max_used: u32,
        best_q: &mut f64,
        best_assignment: &mut Vec<u32>,
    ) {
        let n = assignment.len();
        if position == n {
            let q = modularity(g, &Partition::from_assignment(assignment));
            if q > *best_q {
                *best_q = q;
                best_assignment.clone_from(assignment);
            }
            return;
        }
        for c in 0..=max_used + 1 {
            assignment[position] = c;
            let next_max = max_used.max(c);
            recurse(g, assignment, position + 1, next_max, best_q, best_assignment);
        }
    }

    // First node is always community 0; remaining nodes enumerate.
    recurse(g, &mut assignment, 1, 0, &mut best_q, &mut best_assignment);
    Ok((
        Partition::from_assignment(&best_assignment).canonicalized(),
        best_q,
    ))
}
