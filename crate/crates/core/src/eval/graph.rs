//! Binary-graph properties: density, characteristic path length, global
//! efficiency and greedy (Clauset–Newman–Moore) modularity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::connectome::BinaryGraph;
use crate::error::{Error, Result};

pub fn density(g: &BinaryGraph) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("density needs at least 2 nodes, got {n}")));
    }
    Ok(2.0 * g.edge_count() as f64 / (n * (n - 1)) as f64)
}

/// Hop distances from `source`; `None` for unreachable nodes.
pub fn bfs_distances(g: &BinaryGraph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes are reached");
        for v in g.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Distances over unordered pairs i < j in row-major order.
fn pair_distances(g: &BinaryGraph) -> Vec<Option<usize>> {
    let n = g.n();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let d = bfs_distances(g, i);
        out.extend_from_slice(&d[i + 1..]);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLength {
    pub cpl: f64,
    pub reachable_pairs: usize,
    /// Pairs left out of the mean because no path joins them.
    pub unreachable_pairs: usize,
}

pub fn characteristic_path_length(g: &BinaryGraph) -> Result<PathLength> {
    let (mut total, mut reachable, mut unreachable) = (0usize, 0usize, 0usize);
    for d in pair_distances(g) {
        match d {
            Some(d) => {
                total += d;
                reachable += 1;
            }
            None => unreachable += 1,
        }
    }
    if reachable == 0 {
        return Err(Error::InvalidArgument(
            "characteristic path length is undefined without a connected pair".into(),
        ));
    }
    Ok(PathLength {
        cpl: total as f64 / reachable as f64,
        reachable_pairs: reachable,
        unreachable_pairs: unreachable,
    })
}

pub fn global_efficiency(g: &BinaryGraph) -> Result<f64> {
    let n = g.n();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("efficiency needs at least 2 nodes, got {n}")));
    }
    let pairs = pair_distances(g);
    let sum: f64 = pairs.iter().map(|d| d.map_or(0.0, |d| 1.0 / d as f64)).sum();
    Ok(sum / pairs.len() as f64)
}

/// Community label per node, numbered 0.. in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub labels: Vec<usize>,
}

impl Partition {
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = labels
            .iter()
            .map(|&l| {
                let next = map.len();
                *map.entry(l).or_insert(next)
            })
            .collect();
        Partition { labels }
    }

    pub fn community_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |&m| m + 1)
    }
}

/// Q = Σ_c [e_c/m − (d_c/2m)²] with e_c the edges inside c and d_c its total
/// degree. Accumulated in integers and divided once.
pub fn modularity_of(g: &BinaryGraph, p: &Partition) -> Result<f64> {
    if p.labels.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: p.labels.len(),
        });
    }
    let m = g.edge_count() as i64;
    if m == 0 {
        return Err(Error::InvalidArgument("modularity is undefined for an edgeless graph".into()));
    }
    let k = p.community_count();
    let mut inner = vec![0i64; k];
    let mut degree = vec![0i64; k];
    for (i, j) in g.edges() {
        let (a, b) = (p.labels[i], p.labels[j]);
        degree[a] += 1;
        degree[b] += 1;
        if a == b {
            inner[a] += 1;
        }
    }
    let num: i64 = inner.iter().zip(&degree).map(|(&e, &d)| 4 * m * e - d * d).sum();
    Ok(num as f64 / (4 * m * m) as f64)
}

/// Greedy agglomeration from singletons: repeatedly merge the pair of
/// communities with the largest ΔQ while it is positive. Equal ΔQ prefers the
/// pair sharing more links to third communities, then the smallest ids.
/// Plain merging can still lock in poor early merges, so each merge phase is
/// followed by single-node moves and a refinement (Kernighan–Lin passes and
/// trial merges of linked communities), repeating until the refinement finds
/// no improvement.
pub fn modularity(g: &BinaryGraph) -> Result<(f64, Partition)> {
    let m = g.edge_count() as i64;
    if m == 0 {
        return Err(Error::InvalidArgument("modularity is undefined for an edgeless graph".into()));
    }
    let mut labels: Vec<usize> = (0..g.n()).collect();
    loop {
        merge_communities(g, m, &mut labels);
        move_nodes(g, m, &mut labels);
        if !refine(g, m, &mut labels) {
            break;
        }
    }
    let p = Partition::from_labels(&labels);
    Ok((modularity_of(g, &p)?, p))
}

/// Merge phase. A community's id is the smallest node id it ever held.
/// ΔQ(a, b) = 2(e_ab/2m − d_a·d_b/4m²) is proportional to 2m·e_ab − d_a·d_b,
/// with e_ab the edges between a and b; integers keep ties exact.
fn merge_communities(g: &BinaryGraph, m: i64, labels: &mut [usize]) {
    let n = g.n();
    let mut between = vec![vec![0i64; n]; n];
    let mut degree = vec![0i64; n];
    for (i, j) in g.edges() {
        let (a, b) = (labels[i], labels[j]);
        degree[a] += 1;
        degree[b] += 1;
        if a != b {
            between[a][b] += 1;
            between[b][a] += 1;
        }
    }
    let mut alive: Vec<usize> = labels.to_vec();
    alive.sort_unstable();
    alive.dedup();
    loop {
        let mut best: Option<(i64, i64, usize, usize)> = None;
        for (ia, &a) in alive.iter().enumerate() {
            for &b in &alive[ia + 1..] {
                if between[a][b] == 0 {
                    continue;
                }
                let gain = 2 * m * between[a][b] - degree[a] * degree[b];
                if gain <= 0 || best.is_some_and(|(g, _, _, _)| gain < g) {
                    continue;
                }
                let shared: i64 = alive.iter().map(|&c| between[a][c].min(between[b][c])).sum();
                if best.is_none_or(|(g, s, _, _)| gain > g || shared > s) {
                    best = Some((gain, shared, a, b));
                }
            }
        }
        let Some((_, _, a, b)) = best else { break };
        for &c in &alive {
            if c != a && c != b {
                between[a][c] += between[b][c];
                between[c][a] = between[a][c];
            }
        }
        between[a][b] = 0;
        between[b][a] = 0;
        degree[a] += degree[b];
        alive.retain(|&c| c != b);
        for l in labels.iter_mut() {
            if *l == b {
                *l = a;
            }
        }
    }
}

/// Move phase: visit nodes in order and move each to the community (or a
/// fresh singleton) with the largest positive ΔQ, ties to the smallest id.
fn move_nodes(g: &BinaryGraph, m: i64, labels: &mut [usize]) {
    let mut state = MoveState::new(g, labels);
    loop {
        let mut moved = false;
        for v in 0..g.n() {
            if let Some((d, to)) = state.best_move(g, m, v) {
                if d > 0 {
                    state.apply(v, to);
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    labels.copy_from_slice(&state.labels);
}

/// Refinement, returning whether Q strictly improved. Besides Kernighan–Lin
/// steps, every pair of linked communities is tried merged and then polished
/// by moves and KL steps; this lets e.g. three communities regroup into two.
/// The largest improvement wins.
fn refine(g: &BinaryGraph, m: i64, labels: &mut [usize]) -> bool {
    let base = score(g, m, labels);
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut trial = labels.to_vec();
    if kl_step(g, m, &mut trial) {
        best = Some((score(g, m, &trial) - base, trial));
    }
    let mut linked: Vec<(usize, usize)> = g
        .edges()
        .map(|(i, j)| (labels[i].min(labels[j]), labels[i].max(labels[j])))
        .filter(|(a, b)| a != b)
        .collect();
    linked.sort_unstable();
    linked.dedup();
    for (a, b) in linked {
        let mut trial: Vec<usize> = labels.iter().map(|&l| if l == b { a } else { l }).collect();
        loop {
            move_nodes(g, m, &mut trial);
            if !kl_step(g, m, &mut trial) {
                break;
            }
        }
        let gain = score(g, m, &trial) - base;
        if gain > 0 && best.as_ref().is_none_or(|(b, _)| gain > *b) {
            best = Some((gain, trial));
        }
    }
    match best {
        Some((_, l)) => {
            labels.copy_from_slice(&l);
            true
        }
        None => false,
    }
}

/// Kernighan–Lin style step. A pass moves every node once, each to its best
/// community even when that lowers Q, and keeps the best prefix of the
/// sequence; this escapes optima where no single move helps (e.g. pairs
/// straddling two triangles). One pass is started from each node's best first
/// move and the largest gain is applied. Returns whether Q strictly improved.
fn kl_step(g: &BinaryGraph, m: i64, labels: &mut [usize]) -> bool {
    let state = MoveState::new(g, labels);
    let mut best: Option<(i64, Vec<usize>)> = None;
    for v in 0..g.n() {
        let Some((first, to)) = state.best_move(g, m, v) else { continue };
        let mut trial = state.clone();
        trial.apply(v, to);
        let gain = trial.pass(g, m, v, first);
        if gain > 0 && best.as_ref().is_none_or(|(b, _)| gain > *b) {
            best = Some((gain, trial.labels));
        }
    }
    match best {
        Some((_, l)) => {
            labels.copy_from_slice(&l);
            true
        }
        None => false,
    }
}

/// 4m²·Q for labels below n.
fn score(g: &BinaryGraph, m: i64, labels: &[usize]) -> i64 {
    let n = g.n();
    let (mut inner, mut degree) = (vec![0i64; n], vec![0i64; n]);
    for (i, j) in g.edges() {
        degree[labels[i]] += 1;
        degree[labels[j]] += 1;
        if labels[i] == labels[j] {
            inner[labels[i]] += 1;
        }
    }
    inner.iter().zip(&degree).map(|(&e, &d)| 4 * m * e - d * d).sum()
}

#[derive(Clone)]
struct MoveState {
    labels: Vec<usize>,
    degree: Vec<i64>,
    total: Vec<i64>,
    size: Vec<usize>,
}

impl MoveState {
    fn new(g: &BinaryGraph, labels: &[usize]) -> Self {
        let n = g.n();
        let degree: Vec<i64> = (0..n).map(|i| g.degree(i) as i64).collect();
        let (mut total, mut size) = (vec![0i64; n], vec![0usize; n]);
        for (i, &d) in degree.iter().enumerate() {
            total[labels[i]] += d;
            size[labels[i]] += 1;
        }
        MoveState {
            labels: labels.to_vec(),
            degree,
            total,
            size,
        }
    }

    /// Best move for v among neighbouring communities and one empty label,
    /// scored as 2m²·ΔQ; ties go to the smaller community id.
    fn best_move(&self, g: &BinaryGraph, m: i64, v: usize) -> Option<(i64, usize)> {
        let from = self.labels[v];
        let mut around: Vec<usize> = g.neighbors(v).map(|u| self.labels[u]).collect();
        around.sort_unstable();
        let mut links: Vec<(usize, i64)> = Vec::new();
        for c in around {
            match links.last_mut() {
                Some((last, count)) if *last == c => *count += 1,
                _ => links.push((c, 1)),
            }
        }
        let l_from = links.iter().find(|(c, _)| *c == from).map_or(0, |&(_, l)| l);
        if self.size[from] > 1 {
            if let Some(empty) = (0..self.size.len()).find(|&c| self.size[c] == 0) {
                links.push((empty, 0));
            }
        }
        let k = self.degree[v];
        let rest = self.total[from] - k;
        let mut best: Option<(i64, usize)> = None;
        for (to, l_to) in links {
            if to == from {
                continue;
            }
            let d = 2 * m * (l_to - l_from) - k * (self.total[to] - rest);
            if best.is_none_or(|(b, c)| d > b || (d == b && to < c)) {
                best = Some((d, to));
            }
        }
        best
    }

    fn apply(&mut self, v: usize, to: usize) {
        let from = self.labels[v];
        self.labels[v] = to;
        self.total[from] -= self.degree[v];
        self.total[to] += self.degree[v];
        self.size[from] -= 1;
        self.size[to] += 1;
    }

    /// Continues a pass whose first move (of node `first`, worth `sum`) has
    /// been applied; leaves the best prefix in place and returns its gain.
    fn pass(&mut self, g: &BinaryGraph, m: i64, first: usize, mut sum: i64) -> i64 {
        let n = g.n();
        let mut locked = vec![false; n];
        locked[first] = true;
        let mut history = Vec::with_capacity(n);
        let (mut best_sum, mut best_len) = (sum, 0);
        for _ in 1..n {
            let mut best: Option<(i64, usize, usize)> = None;
            for v in (0..n).filter(|&v| !locked[v]) {
                if let Some((d, to)) = self.best_move(g, m, v) {
                    if best.is_none_or(|(b, _, _)| d > b) {
                        best = Some((d, v, to));
                    }
                }
            }
            let Some((d, v, to)) = best else { break };
            history.push((v, self.labels[v]));
            self.apply(v, to);
            locked[v] = true;
            sum += d;
            if sum > best_sum {
                best_sum = sum;
                best_len = history.len();
            }
        }
        for &(v, from) in history[best_len..].iter().rev() {
            self.apply(v, from);
        }
        best_sum
    }
}

/// The four properties compared between translated and true graphs; a
/// property undefined on this graph is `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphProperties {
    pub density: f64,
    pub cpl: Option<f64>,
    pub efficiency: f64,
    pub modularity: Option<f64>,
}

impl GraphProperties {
    pub fn values(&self) -> [Option<f64>; 4] {
        [Some(self.density), self.cpl, Some(self.efficiency), self.modularity]
    }
}

pub const PROPERTY_NAMES: [&str; 4] = ["density", "cpl", "efficiency", "modularity"];

pub fn graph_properties(g: &BinaryGraph) -> Result<GraphProperties> {
    Ok(GraphProperties {
        density: density(g)?,
        cpl: characteristic_path_length(g).ok().map(|p| p.cpl),
        efficiency: global_efficiency(g)?,
        modularity: if g.edge_count() == 0 { None } else { Some(modularity(g)?.0) },
    })
}

/// Absolute percentage difference; `None` when the true value is zero.
pub fn apd(translated: f64, truth: f64) -> Option<f64> {
    if truth == 0.0 {
        None
    } else {
        Some((translated - truth).abs() / truth.abs() * 100.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> BinaryGraph {
        BinaryGraph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn small_graphs() {
        let k3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let path = graph(3, &[(0, 1), (1, 2)]);
        let edge = graph(3, &[(0, 1)]);
        assert_eq!(density(&k3).unwrap(), 1.0);
        assert_eq!(density(&path).unwrap(), 2.0 / 3.0);
        assert_eq!(density(&BinaryGraph::empty(4)).unwrap(), 0.0);
        assert!(density(&BinaryGraph::empty(1)).is_err());

        assert_eq!(characteristic_path_length(&path).unwrap().cpl, 4.0 / 3.0);
        assert_eq!(characteristic_path_length(&k3).unwrap().cpl, 1.0);
        let e = characteristic_path_length(&edge).unwrap();
        assert_eq!((e.cpl, e.reachable_pairs, e.unreachable_pairs), (1.0, 1, 2));
        assert!(characteristic_path_length(&BinaryGraph::empty(3)).is_err());

        assert_eq!(global_efficiency(&k3).unwrap(), 1.0);
        assert_eq!(global_efficiency(&edge).unwrap(), 1.0 / 3.0);
        assert_eq!(global_efficiency(&path).unwrap(), 5.0 / 6.0);
    }

    #[test]
    fn modularity_examples() {
        let two = graph(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]);
        let (q, p) = modularity(&two).unwrap();
        assert_eq!(q, 0.5);
        assert_eq!(p.labels, vec![0, 0, 0, 1, 1, 1]);

        let k3 = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let one = Partition { labels: vec![0, 0, 0] };
        assert_eq!(modularity_of(&k3, &one).unwrap(), 0.0);
        assert!(modularity(&BinaryGraph::empty(3)).is_err());
    }

    #[test]
    fn apd_examples() {
        assert_eq!(apd(50.0, 100.0), Some(50.0));
        assert_eq!(apd(0.3, 0.3), Some(0.0));
        assert_eq!(apd(0.0, 100.0), Some(100.0));
        assert_eq!(apd(1.0, 0.0), None);
        for k in [0.5, 3.0, 1e4] {
            let (a, b) = (apd(k * 0.7, k * 0.5).unwrap(), apd(0.7, 0.5).unwrap());
            assert!((a - b).abs() <= 1e-12 * b, "{k}: {a} vs {b}");
        }
    }
}
