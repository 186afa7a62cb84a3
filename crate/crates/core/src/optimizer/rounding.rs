use crate::topology::{Network, NodeSet};

use super::model::MilpModel;
use super::selection::{served_consults, BUDGET_TOL};
use super::{Budgets, NeighborSelection, Variant};

/// Relaxed values closer than this are one threshold step.
const SAME_LEVEL: f64 = 1e-9;

struct Relay {
    l: usize,
    k: usize,
    value: f64,
    /// Hop distance from the origin, used to drop downstream relays first.
    depth: usize,
}

fn over(spent: f64, limit: f64) -> bool {
    spent > limit + BUDGET_TOL * limit.abs().max(1.0)
}

/// Threshold rounding of a relaxed solution `x` of `model` into a feasible
/// selection.
pub fn round_algorithm1(x: &[f64], model: &MilpModel, net: &Network, budgets: &Budgets) -> NeighborSelection {
    let n = net.node_count();
    let cost = |k: usize| net.broadcast_cost(k);
    let mut relays: Vec<Relay> = model
        .relay_values(x)
        .into_iter()
        .map(|((l, k), value)| Relay { l, k, value, depth: net.hop_distances(l)[k].unwrap_or(0) })
        .collect();
    relays.sort_by_key(|a| (a.l, a.k));

    let mut levels: Vec<f64> = relays.iter().map(|r| r.value).filter(|&v| v > SAME_LEVEL).collect();
    levels.sort_by(|a, b| b.total_cmp(a));
    levels.dedup_by(|a, b| (*b - *a).abs() <= SAME_LEVEL);
    if levels.first().is_none_or(|&v| v < 1.0 - SAME_LEVEL) {
        levels.insert(0, 1.0);
    }

    let mut on = vec![false; relays.len()];
    for &t in &levels {
        for (i, r) in relays.iter().enumerate() {
            on[i] = r.value >= t - SAME_LEVEL;
        }
        let mut spent: f64 = relays.iter().zip(&on).filter(|(_, &o)| o).map(|(r, _)| cost(r.k)).sum();
        if !over(spent, budgets.network) {
            continue;
        }
        while over(spent, budgets.network) {
            let Some(i) = weakest(&relays, &on, |_| true) else { break };
            on[i] = false;
            spent -= cost(relays[i].k);
        }
        break;
    }

    let mut active: Vec<NodeSet> = vec![NodeSet::new(); n];
    for (r, &o) in relays.iter().zip(&on) {
        if o {
            active[r.k].insert(r.l);
        }
    }
    for k in 0..n {
        while over(cost(k) * active[k].len() as f64, budgets.local[k]) {
            let Some(i) = weakest(&relays, &on, |r| r.k == k) else { break };
            let l = relays[i].l;
            on[i] = false;
            active[k].remove(&l);
            let downstream: Vec<usize> = match model.variant {
                Variant::P2 => downstream_of(net, l, k),
                Variant::P3 if l == k => net.out_neighbors(k).to_vec(),
                Variant::P3 => Vec::new(),
            };
            for j in downstream {
                if let Some(idx) = relays.iter().position(|r| r.l == l && r.k == j) {
                    on[idx] = false;
                    active[j].remove(&l);
                }
            }
        }
    }

    let consults = served_consults(net, &active, &model.candidates);
    // Relays whose removal serves the same consultations are dropped,
    // weakest first.
    let mut order: Vec<usize> =
        (0..relays.len()).filter(|&i| on[i] && active[relays[i].k].contains(&relays[i].l)).collect();
    order.sort_by(|&a, &b| {
        relays[a].value.total_cmp(&relays[b].value).then(relays[b].depth.cmp(&relays[a].depth)).then(a.cmp(&b))
    });
    for i in order {
        let (l, k) = (relays[i].l, relays[i].k);
        active[k].remove(&l);
        if served_consults(net, &active, &model.candidates) != consults {
            active[k].insert(l);
        }
    }
    NeighborSelection::new(consults, active, net, &model.gammas)
}

fn weakest(relays: &[Relay], on: &[bool], filter: impl Fn(&Relay) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in relays.iter().enumerate() {
        if !on[i] || !filter(r) {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cur = &relays[b];
                let smaller = r.value < cur.value - SAME_LEVEL;
                let tie = (r.value - cur.value).abs() <= SAME_LEVEL;
                if smaller || (tie && r.depth > cur.depth) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Nodes that receive `l`'s estimate over the unique path through `k`.
fn downstream_of(net: &Network, l: usize, k: usize) -> Vec<usize> {
    net.index().reachable[l]
        .iter()
        .copied()
        .filter(|&j| j != k && j != l)
        .filter(|&j| k == l || net.unique_path(l, j).is_ok_and(|p| p[1..p.len() - 1].contains(&k)))
        .collect()
}
