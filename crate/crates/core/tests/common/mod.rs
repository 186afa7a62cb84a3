//! Instance generators and brute-force oracles shared by the integration
//! tests and the acceptance harness.

#![allow(dead_code)]

use std::collections::VecDeque;

use mhdiff_core::optimizer::simplex::{LinearRow, LpProblem, Sense};
use mhdiff_core::optimizer::{Budgets, Variant};
use mhdiff_core::topology::Network;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random spanning tree on `n` nodes with costs in [0.5, 2].
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> Network {
    let edges: Vec<(usize, usize)> = (1..n).map(|k| (rng.random_range(0..k), k)).collect();
    let costs = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Network::undirected(n, edges, costs).unwrap()
}

/// Erdős–Rényi graph with edge probability `p` and costs in [0.5, 2].
pub fn random_graph<R: Rng>(n: usize, p: f64, rng: &mut R) -> Network {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                edges.push((a, b));
            }
        }
    }
    let costs = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    Network::undirected(n, edges, costs).unwrap()
}

pub fn random_gammas<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.05..3.0)).collect()
}

/// Budgets that bind often: local ones are infinite or a few broadcasts.
pub fn random_budgets<R: Rng>(net: &Network, rng: &mut R) -> Budgets {
    let n = net.node_count();
    let local =
        (0..n)
            .map(|k| {
                if rng.random_bool(0.5) {
                    f64::INFINITY
                } else {
                    net.broadcast_cost(k) * rng.random_range(0..4) as f64
                }
            })
            .collect();
    let total: f64 = net.broadcast_costs().iter().sum();
    Budgets { local, network: rng.random_range(0.0..total * 2.0) }
}

fn adjacency(net: &Network) -> Vec<Vec<usize>> {
    let n = net.node_count();
    (0..n).map(|a| (0..n).filter(|&b| b != a && net.has_edge(a, b)).collect()).collect()
}

/// Nodes on the walk from `l` to `k` through BFS parents, `k` excluded.
fn bfs_path(adj: &[Vec<usize>], l: usize, k: usize) -> Option<Vec<usize>> {
    let mut parent = vec![usize::MAX; adj.len()];
    parent[l] = l;
    let mut queue = VecDeque::from([l]);
    while let Some(a) = queue.pop_front() {
        for &b in &adj[a] {
            if parent[b] == usize::MAX {
                parent[b] = a;
                queue.push_back(b);
            }
        }
    }
    if parent[k] == usize::MAX {
        return None;
    }
    let mut path = Vec::new();
    let mut at = k;
    while at != l {
        at = parent[at];
        path.push(at);
    }
    Some(path)
}

/// Minimum of `Σ_k (Σ_{l delivered to k} 1/γ_l)⁻¹` over every relay
/// assignment within budget, where each node always consults itself.
///
/// Tree delivery needs every node on the path from the origin, the origin
/// included, to rebroadcast it. Two-hop delivery needs the origin's own
/// broadcast plus, for a receiver two hops away, a common neighbor
/// rebroadcasting it.
pub fn enumerate_optimum(net: &Network, gammas: &[f64], budgets: &Budgets, variant: Variant) -> f64 {
    let n = net.node_count();
    let adj = adjacency(net);
    // relay slots (origin, broadcaster) and, per (origin, receiver), the
    // alternative slot sets that deliver
    let mut slots: Vec<(usize, usize)> = Vec::new();
    fn slot(l: usize, i: usize, slots: &mut Vec<(usize, usize)>) -> usize {
        slots.iter().position(|&s| s == (l, i)).unwrap_or_else(|| {
            slots.push((l, i));
            slots.len() - 1
        })
    }
    let mut routes: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); n]; n];
    for l in 0..n {
        for k in 0..n {
            if k == l {
                continue;
            }
            match variant {
                Variant::P2 => {
                    if let Some(path) = bfs_path(&adj, l, k) {
                        let mask = path.iter().fold(0u64, |m, &i| m | 1 << slot(l, i, &mut slots));
                        routes[l][k].push(mask);
                    }
                }
                Variant::P3 => {
                    if adj[l].contains(&k) {
                        routes[l][k].push(1 << slot(l, l, &mut slots));
                    } else {
                        for &j in adj[l].iter().filter(|j| adj[**j].contains(&k)) {
                            let own = slot(l, l, &mut slots);
                            routes[l][k].push(1 << own | 1 << slot(l, j, &mut slots));
                        }
                    }
                }
            }
        }
    }
    assert!(slots.len() <= 24, "instance too large to enumerate");
    let cost: Vec<f64> = slots.iter().map(|&(_, i)| net.broadcast_cost(i)).collect();
    let mut best = f64::INFINITY;
    for mask in 0u64..1 << slots.len() {
        let mut spent = vec![0.0; n];
        for (s, &(_, i)) in slots.iter().enumerate() {
            if mask >> s & 1 == 1 {
                spent[i] += cost[s];
            }
        }
        let over = |spent: f64, limit: f64| spent > limit + 1e-9 * limit.abs().max(1.0);
        if over(spent.iter().sum(), budgets.network) || (0..n).any(|i| over(spent[i], budgets.local[i])) {
            continue;
        }
        let mut total = 0.0;
        for k in 0..n {
            let mut precision = 1.0 / gammas[k];
            for l in 0..n {
                if routes[l][k].iter().any(|&r| mask & r == r) {
                    precision += 1.0 / gammas[l];
                }
            }
            total += 1.0 / precision;
        }
        best = best.min(total);
    }
    best
}

/// Optimum of a small bounded LP by enumerating every vertex, or `None`
/// when the feasible set is empty.
pub fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let n = p.cost.len();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower[j]));
        planes.push((e, p.upper[j]));
    }
    for r in &p.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        planes.push((a, r.rhs));
    }
    let feasible = |x: &[f64]| {
        (0..n).all(|j| x[j] >= p.lower[j] - 1e-7 && x[j] <= p.upper[j] + 1e-7)
            && p.rows.iter().all(|r| row_holds(r, x, 1e-7))
    };
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; n];
    fn next(pick: &mut [usize], total: usize) -> bool {
        let n = pick.len();
        for i in (0..n).rev() {
            if pick[i] < total - (n - i) {
                pick[i] += 1;
                for j in i + 1..n {
                    pick[j] = pick[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, p) in pick.iter_mut().enumerate() {
        *p = i;
    }
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| planes[pick[i]].0[j]);
        let b = DVector::from_fn(n, |i, _| planes[pick[i]].1);
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && feasible(&x) {
                let obj: f64 = x.iter().zip(&p.cost).map(|(a, b)| a * b).sum();
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
        if !next(&mut pick, planes.len()) {
            break;
        }
    }
    best
}

fn row_holds(r: &LinearRow, x: &[f64], tol: f64) -> bool {
    let act: f64 = r.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
    match r.sense {
        Sense::Le => act <= r.rhs + tol,
        Sense::Ge => act >= r.rhs - tol,
        Sense::Eq => (act - r.rhs).abs() <= tol,
    }
}
