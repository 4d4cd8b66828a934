//! Small-graph enumeration: every labeled graph for tiny n, one
//! representative per isomorphism class beyond that.

use std::collections::HashSet;

/// Undirected simple graph on at most 8 nodes as adjacency bitsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmallGraph {
    pub n: usize,
    pub adj: Vec<u8>,
}

impl SmallGraph {
    pub fn from_mask(n: usize, mask: u64) -> Self {
        let mut adj = vec![0u8; n];
        for (k, (i, j)) in pairs(n).enumerate() {
            if mask >> k & 1 == 1 {
                adj[i] |= 1 << j;
                adj[j] |= 1 << i;
            }
        }
        SmallGraph { n, adj }
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.n).filter(|&(i, j)| self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].count_ones() as usize
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = 1u8;
        let mut frontier = 1u8;
        while frontier != 0 {
            let mut next = 0u8;
            for v in 0..self.n {
                if frontier >> v & 1 == 1 {
                    next |= self.adj[v];
                }
            }
            frontier = next & !seen;
            seen |= next;
        }
        seen.count_ones() as usize == self.n
    }

    /// The graph with node `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut adj = vec![0u8; self.n];
        for (i, j) in self.edges() {
            adj[perm[i]] |= 1 << perm[j];
            adj[perm[j]] |= 1 << perm[i];
        }
        SmallGraph { n: self.n, adj }
    }

    /// Pair-indexed edge code under the ordering `order` (new position k
    /// holds old node `order[k]`).
    fn code(&self, order: &[usize]) -> u64 {
        let mut code = 0u64;
        for (k, (a, b)) in pairs(self.n).enumerate() {
            if self.has_edge(order[a], order[b]) {
                code |= 1 << k;
            }
        }
        code
    }

    /// Largest code over all orderings compatible with the stable colour
    /// refinement; equal for isomorphic graphs.
    pub fn canonical_code(&self) -> u64 {
        let colors = refine(self);
        let mut order: Vec<usize> = (0..self.n).collect();
        order.sort_by_key(|&v| colors[v]);
        let mut cells = Vec::new();
        let mut start = 0;
        for k in 1..=self.n {
            if k == self.n || colors[order[k]] != colors[order[start]] {
                cells.push(start..k);
                start = k;
            }
        }
        let mut best = 0u64;
        permute_cells(&mut order, &cells, 0, &mut |o| best = best.max(self.code(o)));
        best
    }
}

pub fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// Colour refinement started from degrees; colours are ranks of sorted
/// signatures, so they do not depend on node names.
fn refine(g: &SmallGraph) -> Vec<usize> {
    let mut colors: Vec<usize> = (0..g.n).map(|v| g.degree(v)).collect();
    loop {
        let sigs: Vec<(usize, Vec<usize>)> = (0..g.n)
            .map(|v| {
                let mut around: Vec<usize> = (0..g.n).filter(|&u| g.has_edge(v, u)).map(|u| colors[u]).collect();
                around.sort_unstable();
                (colors[v], around)
            })
            .collect();
        let mut distinct = sigs.clone();
        distinct.sort();
        distinct.dedup();
        let next: Vec<usize> = sigs.iter().map(|s| distinct.binary_search(s).unwrap()).collect();
        let before = colors.iter().collect::<HashSet<_>>().len();
        if distinct.len() == before {
            return next;
        }
        colors = next;
    }
}

fn permute_cells(order: &mut [usize], cells: &[std::ops::Range<usize>], c: usize, visit: &mut impl FnMut(&[usize])) {
    if c == cells.len() {
        visit(order);
        return;
    }
    let cell = cells[c].clone();
    heap_permutations(order, cell.start, cell.end - cell.start, &mut |o| permute_cells(o, cells, c + 1, visit));
}

/// Heap's algorithm over `order[start..start + k]`.
fn heap_permutations(order: &mut [usize], start: usize, k: usize, visit: &mut dyn FnMut(&mut [usize])) {
    if k <= 1 {
        visit(order);
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(order, start, k - 1, visit);
        if k % 2 == 0 {
            order.swap(start + i, start + k - 1);
        } else {
            order.swap(start, start + k - 1);
        }
    }
    heap_permutations(order, start, k - 1, visit);
}

/// One representative per isomorphism class on `n` nodes, built by adding a
/// node with every neighbourhood to the classes on `n − 1` nodes.
pub fn nonisomorphic(n: usize) -> Vec<SmallGraph> {
    let mut classes = vec![SmallGraph { n: 1, adj: vec![0] }];
    for size in 2..=n {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for g in &classes {
            for mask in 0..1u8 << (size - 1) {
                let mut adj = g.adj.clone();
                adj.push(mask);
                for (v, a) in adj.iter_mut().enumerate().take(size - 1) {
                    *a |= (mask >> v & 1) << (size - 1);
                }
                let h = SmallGraph { n: size, adj };
                if seen.insert(h.canonical_code()) {
                    next.push(h);
                }
            }
        }
        classes = next;
    }
    classes
}

/// Every partition of `n` nodes as a restricted-growth label vector.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(labels: &mut Vec<usize>, n: usize, blocks: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == n {
            out.push(labels.clone());
            return;
        }
        for b in 0..=blocks {
            labels.push(b);
            extend(labels, n, blocks.max(b + 1), out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), n, 0, &mut out);
    out
}
