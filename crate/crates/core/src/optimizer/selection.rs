use std::collections::VecDeque;

use crate::topology::{Network, NodeSet};

use super::{Budgets, Variant};

/// Feasibility slack on energy budgets.
pub const BUDGET_TOL: f64 = 1e-9;

/// Binary consultation and relay decisions with their energy ledger.
///
/// `consults[k]` holds every `l` with `δ_lk = 1`; `relays[k]` holds every
/// origin `l` whose estimate node `k` broadcasts (`π_lk = 1`), including `k`
/// itself when it broadcasts its own estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSelection {
    pub consults: Vec<NodeSet>,
    pub relays: Vec<NodeSet>,
    pub per_node_cost: Vec<f64>,
    pub total_cost: f64,
    pub objective: f64,
}

impl NeighborSelection {
    pub fn new(consults: Vec<NodeSet>, relays: Vec<NodeSet>, net: &Network, gammas: &[f64]) -> Self {
        let per_node_cost: Vec<f64> =
            relays.iter().enumerate().map(|(k, r)| net.broadcast_cost(k) * r.len() as f64).collect();
        let total_cost = per_node_cost.iter().sum();
        let objective = objective_of(&consults, gammas);
        NeighborSelection { consults, relays, per_node_cost, total_cost, objective }
    }

    /// Every node consults only itself and nothing is broadcast.
    pub fn non_cooperative(net: &Network, gammas: &[f64]) -> Self {
        let n = net.node_count();
        Self::new((0..n).map(|k| NodeSet::from([k])).collect(), vec![NodeSet::new(); n], net, gammas)
    }

    /// Consultation sets served by the cheapest relays found along BFS trees.
    pub fn from_consults(consults: Vec<NodeSet>, net: &Network, gammas: &[f64]) -> Self {
        let relays = relays_for(net, &consults);
        Self::new(consults, relays, net, gammas)
    }

    pub fn node_count(&self) -> usize {
        self.consults.len()
    }

    pub fn broadcasts(&self) -> usize {
        self.relays.iter().map(NodeSet::len).sum()
    }

    pub fn delta(&self, l: usize, k: usize) -> bool {
        self.consults[k].contains(&l)
    }

    pub fn pi(&self, l: usize, k: usize) -> bool {
        self.relays[k].contains(&l)
    }
}

fn objective_of(consults: &[NodeSet], gammas: &[f64]) -> f64 {
    consults.iter().map(|set| 1.0 / set.iter().map(|&l| 1.0 / gammas[l]).sum::<f64>()).sum()
}

/// `Σ_k (Σ_{l: δ_lk = 1} γ_l⁻²)⁻¹`.
pub fn selection_objective(sel: &NeighborSelection, gammas: &[f64]) -> f64 {
    objective_of(&sel.consults, gammas)
}

/// Nodes that receive origin `l`'s estimate under the relay decisions,
/// together with the hop count of first reception. `l` itself has hop 0.
pub fn delivery_hops(net: &Network, relays: &[NodeSet], l: usize) -> Vec<Option<usize>> {
    let mut hops = vec![None; net.node_count()];
    hops[l] = Some(0);
    let mut queue = VecDeque::from([l]);
    while let Some(r) = queue.pop_front() {
        if !relays[r].contains(&l) {
            continue;
        }
        let h = hops[r].unwrap();
        for &v in net.out_neighbors(r) {
            if hops[v].is_none() {
                hops[v] = Some(h + 1);
                queue.push_back(v);
            }
        }
    }
    hops
}

/// Largest consultation sets within `candidates` served by `relays`.
pub fn served_consults(net: &Network, relays: &[NodeSet], candidates: &[NodeSet]) -> Vec<NodeSet> {
    let n = net.node_count();
    let mut consults: Vec<NodeSet> = (0..n).map(|k| NodeSet::from([k])).collect();
    for l in 0..n {
        let hops = delivery_hops(net, relays, l);
        for k in 0..n {
            if k != l && hops[k].is_some() && candidates[k].contains(&l) {
                consults[k].insert(l);
            }
        }
    }
    consults
}

/// Relays needed to serve `consults`: each consulted origin broadcasts and
/// the interior nodes of its BFS tree toward each consumer forward it. On a
/// simple topology this is exactly the unique-path relay set.
pub fn relays_for(net: &Network, consults: &[NodeSet]) -> Vec<NodeSet> {
    let n = net.node_count();
    let mut relays = vec![NodeSet::new(); n];
    for l in 0..n {
        let consumers: Vec<usize> = (0..n).filter(|&k| k != l && consults[k].contains(&l)).collect();
        if consumers.is_empty() {
            continue;
        }
        let mut parent = vec![usize::MAX; n];
        parent[l] = l;
        let mut queue = VecDeque::from([l]);
        while let Some(u) = queue.pop_front() {
            for &v in net.out_neighbors(u) {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        relays[l].insert(l);
        for k in consumers {
            if parent[k] == usize::MAX {
                continue;
            }
            let mut cur = parent[k];
            while cur != l {
                relays[cur].insert(l);
                cur = parent[cur];
            }
        }
    }
    relays
}

/// Result of [`verify_feasible`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub violations: Vec<String>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks budgets, self-consultation, variable domains and that every
/// consultation is delivered by a complete chain of relays.
pub fn verify_feasible(
    sel: &NeighborSelection,
    net: &Network,
    budgets: &Budgets,
    variant: Variant,
) -> FeasibilityReport {
    let n = net.node_count();
    let ix = net.index();
    let mut violations = Vec::new();
    if sel.consults.len() != n || sel.relays.len() != n {
        violations.push(format!("selection covers {} nodes, network has {n}", sel.consults.len()));
        return FeasibilityReport { violations };
    }
    let candidates = match variant {
        Variant::P2 => &ix.multi_hop,
        Variant::P3 => &ix.two_hop,
    };
    for k in 0..n {
        if !sel.consults[k].contains(&k) {
            violations.push(format!("node {} does not consult itself", k + 1));
        }
        for &l in &sel.consults[k] {
            if !candidates[k].contains(&l) {
                violations.push(format!("node {} consults {} outside its candidate set", k + 1, l + 1));
            }
        }
        for &l in &sel.relays[k] {
            let allowed = match variant {
                Variant::P2 => ix.multi_hop[k].contains(&l),
                Variant::P3 => ix.relay_customers[k].contains(&l),
            };
            if !allowed {
                violations.push(format!("node {} cannot relay node {}", k + 1, l + 1));
            }
        }
        let cost = net.broadcast_cost(k) * sel.relays[k].len() as f64;
        let limit = budgets.local[k];
        if cost > limit + BUDGET_TOL * limit.abs().max(1.0) {
            violations.push(format!("node {} spends {cost} over its budget {limit}", k + 1));
        }
    }
    let total: f64 = (0..n).map(|k| net.broadcast_cost(k) * sel.relays[k].len() as f64).sum();
    if total > budgets.network + BUDGET_TOL * budgets.network.abs().max(1.0) {
        violations.push(format!("network spends {total} over its budget {}", budgets.network));
    }
    for l in 0..n {
        let hops = delivery_hops(net, &sel.relays, l);
        for k in 0..n {
            if k != l && sel.consults[k].contains(&l) && hops[k].is_none() {
                violations.push(format!("node {} consults {} but no relay chain delivers it", k + 1, l + 1));
            }
        }
    }
    FeasibilityReport { violations }
}
