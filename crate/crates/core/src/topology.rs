//! Directed network model and the neighborhood families used for relaying
//! and neighbor planning.
//!
//! Nodes are indexed `0..n` internally; the file formats in [`crate::io`] use
//! 1-based indices.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub type NodeSet = BTreeSet<usize>;

/// Immutable directed network with per-node broadcast cost.
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    broadcast_cost: Vec<f64>,
    coordinates: Option<Vec<[f64; 2]>>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    index: NeighborhoodIndex,
    simple: bool,
}

/// Cached neighborhood families, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodIndex {
    /// `{k}` plus every node with an edge into `k`.
    pub physical: Vec<NodeSet>,
    /// `{k}` plus every node with a directed path into `k`.
    pub multi_hop: Vec<NodeSet>,
    /// Nodes at most two hops upstream of `k`, plus `k`.
    pub two_hop: Vec<NodeSet>,
    /// Out-neighbors of `k`.
    pub direct: Vec<NodeSet>,
    /// Nodes other than `k` reachable from `k`.
    pub reachable: Vec<NodeSet>,
    /// Physical neighbors whose information `k` may need to forward.
    pub relay_customers: Vec<NodeSet>,
    /// Out-neighbors that may forward `k`'s information further.
    pub relay_servers: Vec<NodeSet>,
}

impl NeighborhoodIndex {
    pub fn h_hop(&self, net: &Network, k: usize, h: usize) -> NodeSet {
        h_hop_neighbors(net, k, h)
    }
}

impl Network {
    /// Builds a network from directed edges `(from, to)`.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, broadcast_cost: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidNetwork("node count must be positive".into()));
        }
        if broadcast_cost.len() != n {
            return Err(Error::InvalidNetwork(format!("expected {n} broadcast costs, got {}", broadcast_cost.len())));
        }
        if let Some(k) = broadcast_cost.iter().position(|c| !(*c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidNetwork(format!(
                "broadcast cost of node {} must be finite and nonnegative",
                k + 1
            )));
        }
        let mut set = BTreeSet::new();
        for (l, k) in edges {
            if l >= n || k >= n {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({}, {}) references a node outside 1..={n}",
                    l + 1,
                    k + 1
                )));
            }
            if l == k {
                return Err(Error::InvalidNetwork(format!("self-loop at node {}", l + 1)));
            }
            set.insert((l, k));
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for &(l, k) in &set {
            out_adj[l].push(k);
            in_adj[k].push(l);
        }
        let mut net = Network {
            n,
            edges: set,
            broadcast_cost,
            coordinates: None,
            out_adj,
            in_adj,
            index: NeighborhoodIndex::empty(),
            simple: false,
        };
        net.index = build_index(&net);
        net.simple = compute_simple(&net);
        Ok(net)
    }

    /// Builds a network from undirected edges, each expanded to two directed
    /// edges.
    pub fn undirected(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        broadcast_cost: Vec<f64>,
    ) -> Result<Self> {
        let directed: Vec<_> = edges.into_iter().flat_map(|(a, b)| [(a, b), (b, a)]).collect();
        Self::new(n, directed, broadcast_cost)
    }

    /// Same network with unit broadcast costs.
    pub fn unit_cost(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, undirected: bool) -> Result<Self> {
        if undirected {
            Self::undirected(n, edges, vec![1.0; n])
        } else {
            Self::new(n, edges, vec![1.0; n])
        }
    }

    /// Attaches planar coordinates, keeping the existing costs.
    pub fn with_coordinates(mut self, coords: Vec<[f64; 2]>) -> Result<Self> {
        if coords.len() != self.n {
            return Err(Error::InvalidNetwork(format!("expected {} coordinates, got {}", self.n, coords.len())));
        }
        self.coordinates = Some(coords);
        Ok(self)
    }

    /// Replaces broadcast costs by `scale · (distance to the farthest
    /// directly reachable neighbor)²`. Requires coordinates.
    pub fn with_squared_distance_costs(mut self, scale: f64) -> Result<Self> {
        let coords = self
            .coordinates
            .as_ref()
            .ok_or_else(|| Error::InvalidNetwork("squared-distance costs need coordinates".into()))?;
        let costs = squared_distance_costs(coords, &self.out_adj, scale);
        self.broadcast_cost = costs;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn broadcast_cost(&self, k: usize) -> f64 {
        self.broadcast_cost[k]
    }

    pub fn broadcast_costs(&self) -> &[f64] {
        &self.broadcast_cost
    }

    pub fn coordinates(&self) -> Option<&[[f64; 2]]> {
        self.coordinates.as_deref()
    }

    pub fn out_neighbors(&self, k: usize) -> &[usize] {
        &self.out_adj[k]
    }

    pub fn in_neighbors(&self, k: usize) -> &[usize] {
        &self.in_adj[k]
    }

    pub fn index(&self) -> &NeighborhoodIndex {
        &self.index
    }

    /// At most one directed simple path between every ordered pair.
    pub fn is_simple(&self) -> bool {
        self.simple
    }

    /// Hop distances from `src` along directed edges; `None` if unreachable.
    pub fn hop_distances(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.out_adj[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// The unique directed path `l → … → j` of a simple topology, endpoints
    /// included.
    pub fn unique_path(&self, l: usize, j: usize) -> Result<Vec<usize>> {
        if !self.simple {
            return Err(Error::NotSimple("multiple directed paths exist".into()));
        }
        bfs_path(self, l, j).ok_or(Error::Unreachable { from: l, to: j })
    }
}

impl NeighborhoodIndex {
    fn empty() -> Self {
        NeighborhoodIndex {
            physical: Vec::new(),
            multi_hop: Vec::new(),
            two_hop: Vec::new(),
            direct: Vec::new(),
            reachable: Vec::new(),
            relay_customers: Vec::new(),
            relay_servers: Vec::new(),
        }
    }
}

/// Computes every neighborhood family of `net`.
pub fn build_index(net: &Network) -> NeighborhoodIndex {
    let n = net.n;
    let physical: Vec<NodeSet> =
        (0..n).map(|k| std::iter::once(k).chain(net.in_adj[k].iter().copied()).collect()).collect();
    let direct: Vec<NodeSet> = (0..n).map(|k| net.out_adj[k].iter().copied().collect()).collect();
    let reachable: Vec<NodeSet> = (0..n)
        .map(|k| {
            let mut seen = NodeSet::new();
            let mut queue: VecDeque<usize> = net.out_adj[k].iter().copied().collect();
            while let Some(u) = queue.pop_front() {
                if seen.insert(u) {
                    queue.extend(net.out_adj[u].iter().copied());
                }
            }
            seen.remove(&k);
            seen
        })
        .collect();
    let mut multi_hop: Vec<NodeSet> = (0..n).map(|k| NodeSet::from([k])).collect();
    for (l, reach) in reachable.iter().enumerate() {
        for &k in reach {
            multi_hop[k].insert(l);
        }
    }
    let two_hop = (0..n).map(|k| h_hop_neighbors(net, k, 2)).collect();

    // A node never needs help to reach itself or the node it heard from, so
    // both are left out of the subset tests.
    let relay_customers = (0..n)
        .map(|k| {
            physical[k]
                .iter()
                .copied()
                .filter(|&l| l == k || direct[k].iter().any(|&m| m != l && !direct[l].contains(&m)))
                .collect()
        })
        .collect();
    let relay_servers = (0..n)
        .map(|k| {
            direct[k]
                .iter()
                .copied()
                .filter(|&l| direct[l].iter().any(|&m| m != k && !direct[k].contains(&m)))
                .collect()
        })
        .collect();

    NeighborhoodIndex { physical, multi_hop, two_hop, direct, reachable, relay_customers, relay_servers }
}

/// `{k}` plus every node with a directed path of length at most `h` into `k`.
pub fn h_hop_neighbors(net: &Network, k: usize, h: usize) -> NodeSet {
    let mut seen = NodeSet::from([k]);
    let mut frontier = vec![k];
    for _ in 0..h {
        let mut next = Vec::new();
        for u in frontier {
            for &l in &net.in_adj[u] {
                if seen.insert(l) {
                    next.push(l);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    seen
}

/// True iff every ordered node pair has at most one directed simple path.
pub fn is_simple_topology(net: &Network) -> bool {
    net.simple
}

fn compute_simple(net: &Network) -> bool {
    // DFS over simple paths from each source; stops at the second path to
    // any target. With at most one path per target the search visits each
    // node once per source.
    fn dfs(net: &Network, u: usize, on_path: &mut [bool], count: &mut [u8]) -> bool {
        for &v in &net.out_adj[u] {
            if on_path[v] {
                continue;
            }
            count[v] += 1;
            if count[v] >= 2 {
                return false;
            }
            on_path[v] = true;
            let ok = dfs(net, v, on_path, count);
            on_path[v] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    (0..net.n).all(|s| {
        let mut on_path = vec![false; net.n];
        let mut count = vec![0u8; net.n];
        on_path[s] = true;
        dfs(net, s, &mut on_path, &mut count)
    })
}

fn bfs_path(net: &Network, from: usize, to: usize) -> Option<Vec<usize>> {
    if from == to {
        return Some(vec![from]);
    }
    let mut parent = vec![usize::MAX; net.n];
    parent[from] = from;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &net.out_adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                if v == to {
                    let mut path = vec![to];
                    let mut cur = to;
                    while cur != from {
                        cur = parent[cur];
                        path.push(cur);
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(v);
            }
        }
    }
    None
}

/// Nodes strictly between `l` and `j` on the unique path from `l` to `j`.
pub fn path_indicator(net: &Network, l: usize, j: usize) -> Result<NodeSet> {
    let path = net.unique_path(l, j)?;
    if path.len() <= 2 {
        return Ok(NodeSet::new());
    }
    Ok(path[1..path.len() - 1].iter().copied().collect())
}

pub fn squared_distance_costs(coords: &[[f64; 2]], out_adj: &[Vec<usize>], scale: f64) -> Vec<f64> {
    out_adj
        .iter()
        .enumerate()
        .map(|(k, outs)| {
            let far = outs
                .iter()
                .map(|&l| {
                    let dx = coords[k][0] - coords[l][0];
                    let dy = coords[k][1] - coords[l][1];
                    dx * dx + dy * dy
                })
                .fold(0.0, f64::max);
            scale * far
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> Network {
        Network::unit_cost(n, (0..n - 1).map(|i| (i, i + 1)), false).unwrap()
    }

    fn set(v: &[usize]) -> NodeSet {
        v.iter().copied().collect()
    }

    #[test]
    fn directed_chain_neighborhoods() {
        let net = chain(3);
        let ix = net.index();
        assert_eq!(ix.physical[2], set(&[1, 2]));
        assert_eq!(ix.multi_hop[2], set(&[0, 1, 2]));
        assert_eq!(ix.reachable[0], set(&[1, 2]));
        assert_eq!(ix.direct[0], set(&[1]));
        assert!(ix.direct[2].is_empty());
    }

    #[test]
    fn complete_graph_has_no_relay_roles() {
        let edges = [(0, 1), (0, 2), (1, 2)];
        let net = Network::unit_cost(3, edges, true).unwrap();
        for k in 0..3 {
            assert_eq!(net.index().relay_customers[k], set(&[k]));
            assert!(net.index().relay_servers[k].is_empty());
        }
    }

    #[test]
    fn relay_roles_on_undirected_path() {
        let net = Network::unit_cost(3, [(0, 1), (1, 2)], true).unwrap();
        let ix = net.index();
        assert_eq!(ix.relay_customers[1], set(&[0, 1, 2]));
        assert_eq!(ix.relay_customers[0], set(&[0]));
        assert_eq!(ix.relay_servers[0], set(&[1]));
        assert!(ix.relay_servers[1].is_empty());
    }

    #[test]
    fn relay_roles_with_redundant_coverage() {
        // Node 5 already reaches every out-neighbor of node 2 by itself, and
        // node 3 reaches nothing node 2 cannot reach directly.
        let edges = [(1, 2), (2, 3), (2, 4), (2, 5), (5, 1), (5, 4), (5, 3), (1, 6)];
        let edges = edges.map(|(a, b)| (a - 1, b - 1));
        let net = Network::unit_cost(6, edges, true).unwrap();
        let ix = net.index();
        assert!(!ix.relay_customers[1].contains(&4));
        assert!(!ix.relay_servers[1].contains(&2));
        // node 1 is needed to reach node 6 from node 2's side
        assert!(ix.relay_servers[1].contains(&0));
        assert!(ix.relay_customers[0].contains(&1));
    }

    #[test]
    fn index_containments() {
        let net = Network::unit_cost(5, [(0, 1), (1, 2), (2, 3), (3, 1), (4, 0)], false).unwrap();
        let ix = net.index();
        for k in 0..5 {
            assert!(ix.physical[k].contains(&k));
            assert!(ix.physical[k].is_subset(&ix.two_hop[k]));
            assert!(ix.two_hop[k].is_subset(&ix.multi_hop[k]));
            assert!(ix.direct[k].is_subset(&ix.reachable[k]));
            assert!(ix.relay_customers[k].is_subset(&ix.physical[k]));
            assert!(ix.relay_servers[k].is_subset(&ix.direct[k]));
        }
    }

    #[test]
    fn simple_topology_detection() {
        let tree = Network::unit_cost(4, [(0, 1), (1, 2), (1, 3)], true).unwrap();
        assert!(tree.is_simple());
        let chord = Network::unit_cost(3, [(0, 1), (1, 2), (2, 0), (0, 2)], false).unwrap();
        assert!(!is_simple_topology(&chord));
        let single = Network::unit_cost(1, [], false).unwrap();
        assert!(single.is_simple());
        let cycle = Network::unit_cost(3, [(0, 1), (1, 2), (2, 0)], false).unwrap();
        assert!(cycle.is_simple());
    }

    #[test]
    fn path_indicator_examples() {
        assert_eq!(path_indicator(&chain(3), 0, 2).unwrap(), set(&[1]));
        assert_eq!(path_indicator(&chain(4), 0, 3).unwrap(), set(&[1, 2]));
        let star = Network::unit_cost(3, [(0, 1), (0, 2)], true).unwrap();
        assert_eq!(path_indicator(&star, 1, 2).unwrap(), set(&[0]));
        assert!(path_indicator(&chain(3), 0, 1).unwrap().is_empty());
    }

    #[test]
    fn path_indicator_errors() {
        assert!(matches!(path_indicator(&chain(3), 2, 0), Err(Error::Unreachable { .. })));
        let chord = Network::unit_cost(3, [(0, 1), (1, 2), (0, 2)], false).unwrap();
        assert!(matches!(path_indicator(&chord, 0, 2), Err(Error::NotSimple(_))));
    }

    #[test]
    fn h_hop_examples() {
        let net = chain(3);
        assert_eq!(h_hop_neighbors(&net, 2, 1), set(&[1, 2]));
        assert_eq!(h_hop_neighbors(&net, 2, 2), set(&[0, 1, 2]));
        let pair = Network::unit_cost(2, [], false).unwrap();
        assert_eq!(h_hop_neighbors(&pair, 1, 5), set(&[1]));
    }

    #[test]
    fn invalid_networks_rejected() {
        assert!(Network::unit_cost(2, [(0, 0)], false).is_err());
        assert!(Network::unit_cost(2, [(0, 2)], false).is_err());
        assert!(Network::new(2, [(0, 1)], vec![1.0, -1.0]).is_err());
        assert!(Network::new(0, [], vec![]).is_err());
    }

    #[test]
    fn squared_distance_cost_uses_farthest_out_neighbor() {
        let net = Network::unit_cost(3, [(0, 1), (0, 2)], true)
            .unwrap()
            .with_coordinates(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 3.0]])
            .unwrap()
            .with_squared_distance_costs(1.0)
            .unwrap();
        assert_eq!(net.broadcast_costs(), &[9.0, 1.0, 9.0]);
    }
}
