use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::topology::{path_indicator, Network, NodeSet};

use super::simplex::{LinearRow, LpProblem, Sense};
use super::{Budgets, NeighborSelection, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VarRole {
    /// Node `k` consults node `l`.
    Delta {
        l: usize,
        k: usize,
    },
    /// Node `k` broadcasts node `l`'s estimate.
    Pi {
        l: usize,
        k: usize,
    },
    /// Product of `Delta { l, k }` and `Z { k }`.
    P {
        l: usize,
        k: usize,
    },
    Z {
        k: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub role: VarRole,
    pub lower: f64,
    pub upper: f64,
    pub binary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    Normalization,
    McCormick,
    RelayCoupling,
    LocalBudget,
    NetworkBudget,
    SelfConsult,
    RelayImpliesConsult,
    PredecessorRelay,
    OriginBroadcast,
    RelayServer,
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub variant: Variant,
    pub vars: Vec<Variable>,
    pub rows: Vec<LinearRow>,
    pub row_kinds: Vec<RowKind>,
    pub cost: Vec<f64>,
    /// Candidate consultation set per node.
    pub candidates: Vec<NodeSet>,
    pub gammas: Vec<f64>,
    lookup: HashMap<VarRole, usize>,
}

impl MilpModel {
    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn index_of(&self, role: VarRole) -> Option<usize> {
        self.lookup.get(&role).copied()
    }

    pub fn count_rows(&self, kind: RowKind) -> usize {
        self.row_kinds.iter().filter(|&&k| k == kind).count()
    }

    pub fn binaries(&self) -> impl Iterator<Item = usize> + '_ {
        self.vars.iter().enumerate().filter(|(_, v)| v.binary).map(|(j, _)| j)
    }

    /// Bounds of every binary fixed to the given selection.
    pub fn fix_binaries(&self, sel: &NeighborSelection) -> MilpModel {
        let mut fixed = self.clone();
        for v in &mut fixed.vars {
            let on = match v.role {
                VarRole::Delta { l, k } => sel.delta(l, k),
                VarRole::Pi { l, k } => sel.pi(l, k),
                _ => continue,
            };
            let x = if on { 1.0 } else { 0.0 };
            v.lower = x;
            v.upper = x;
        }
        fixed
    }

    /// LP view. Binaries keep their bounds, so without fixing they relax to
    /// `[0, 1]`.
    pub fn lp(&self) -> LpProblem {
        LpProblem {
            cost: self.cost.clone(),
            lower: self.vars.iter().map(|v| v.lower).collect(),
            upper: self.vars.iter().map(|v| v.upper).collect(),
            rows: self.rows.clone(),
        }
    }

    /// Decodes rounded binaries of `x` into a selection.
    pub fn selection_from(&self, x: &[f64], net: &Network) -> NeighborSelection {
        let n = net.node_count();
        let mut consults = vec![NodeSet::new(); n];
        let mut relays = vec![NodeSet::new(); n];
        for (j, v) in self.vars.iter().enumerate() {
            if x[j] < 0.5 {
                continue;
            }
            match v.role {
                VarRole::Delta { l, k } => {
                    consults[k].insert(l);
                }
                VarRole::Pi { l, k } => {
                    relays[k].insert(l);
                }
                _ => {}
            }
        }
        NeighborSelection::new(consults, relays, net, &self.gammas)
    }

    /// The model point of a selection: binaries from its sets,
    /// `z_k = 1/Σ_{l∈consults} γ_l⁻¹` and `p_lk = δ_lk·z_k`. `None` when
    /// the selection uses a pair the model has no variable for.
    pub fn point_of(&self, sel: &NeighborSelection) -> Option<Vec<f64>> {
        let n = self.candidates.len();
        if sel.consults.len() != n || sel.relays.len() != n {
            return None;
        }
        for k in 0..n {
            let known = sel.consults[k].iter().all(|&l| self.index_of(VarRole::Delta { l, k }).is_some())
                && sel.relays[k].iter().all(|&l| self.index_of(VarRole::Pi { l, k }).is_some());
            if !known {
                return None;
            }
        }
        let z: Vec<f64> =
            sel.consults.iter().map(|c| 1.0 / c.iter().map(|&l| 1.0 / self.gammas[l]).sum::<f64>()).collect();
        let x = self
            .vars
            .iter()
            .map(|v| match v.role {
                VarRole::Delta { l, k } => f64::from(u8::from(sel.delta(l, k))),
                VarRole::Pi { l, k } => f64::from(u8::from(sel.pi(l, k))),
                VarRole::P { l, k } => {
                    if sel.delta(l, k) {
                        z[k]
                    } else {
                        0.0
                    }
                }
                VarRole::Z { k } => z[k],
            })
            .collect();
        Some(x)
    }

    /// Whether `x` meets every bound and row to relative tolerance `tol`.
    pub fn satisfies(&self, x: &[f64], tol: f64) -> bool {
        let bounds = self.vars.iter().zip(x).all(|(v, &xj)| {
            let slack = tol * xj.abs().max(1.0);
            xj >= v.lower - slack && xj <= v.upper + slack
        });
        bounds && self.rows.iter().all(|r| r.is_satisfied(x, tol))
    }

    /// Relaxed relay values `π̃_lk` keyed by `(l, k)`.
    pub fn relay_values(&self, x: &[f64]) -> Vec<((usize, usize), f64)> {
        self.vars
            .iter()
            .enumerate()
            .filter_map(|(j, v)| match v.role {
                VarRole::Pi { l, k } => Some(((l, k), x[j])),
                _ => None,
            })
            .collect()
    }
}

struct Builder {
    vars: Vec<Variable>,
    rows: Vec<LinearRow>,
    kinds: Vec<RowKind>,
    lookup: HashMap<VarRole, usize>,
}

impl Builder {
    fn var(&mut self, role: VarRole, lower: f64, upper: f64, binary: bool) -> usize {
        let j = self.vars.len();
        self.vars.push(Variable { role, lower, upper, binary });
        self.lookup.insert(role, j);
        j
    }

    fn id(&self, role: VarRole) -> usize {
        self.lookup[&role]
    }

    fn get(&self, role: VarRole) -> Option<usize> {
        self.lookup.get(&role).copied()
    }

    fn row(&mut self, kind: RowKind, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(LinearRow::new(coeffs, sense, rhs));
        self.kinds.push(kind);
    }
}

fn check_gammas(net: &Network, gammas: &[f64]) -> Result<()> {
    if gammas.len() != net.node_count() {
        return Err(Error::Dimension(format!("{} composite variances for {} nodes", gammas.len(), net.node_count())));
    }
    for (k, &g) in gammas.iter().enumerate() {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::NonPositiveVariance { node: k + 1, value: g });
        }
    }
    Ok(())
}

/// Shared part of both variants: δ, π, p, z variables, objective,
/// normalization, McCormick, budget and self-consultation rows.
fn common(
    net: &Network,
    gammas: &[f64],
    budgets: &Budgets,
    candidates: &[NodeSet],
    relay_domain: &[NodeSet],
) -> Result<Builder> {
    check_gammas(net, gammas)?;
    budgets.check(net.node_count())?;
    let n = net.node_count();
    let mut b = Builder { vars: Vec::new(), rows: Vec::new(), kinds: Vec::new(), lookup: HashMap::new() };
    let inv: Vec<f64> = gammas.iter().map(|g| 1.0 / g).collect();
    let mut z_bounds = Vec::with_capacity(n);
    for k in 0..n {
        let lo = 1.0 / candidates[k].iter().map(|&l| inv[l]).sum::<f64>();
        let hi = 1.0 / candidates[k].iter().map(|&l| inv[l]).fold(f64::INFINITY, f64::min);
        z_bounds.push((lo, hi));
    }
    for k in 0..n {
        for &l in &candidates[k] {
            b.var(VarRole::Delta { l, k }, 0.0, 1.0, true);
        }
    }
    for k in 0..n {
        for &l in &relay_domain[k] {
            b.var(VarRole::Pi { l, k }, 0.0, 1.0, true);
        }
    }
    for k in 0..n {
        for &l in &candidates[k] {
            b.var(VarRole::P { l, k }, 0.0, z_bounds[k].1, false);
        }
    }
    for (k, &(lo, hi)) in z_bounds.iter().enumerate() {
        b.var(VarRole::Z { k }, lo, hi, false);
    }

    for k in 0..n {
        let coeffs = candidates[k].iter().map(|&l| (b.id(VarRole::P { l, k }), inv[l])).collect();
        b.row(RowKind::Normalization, coeffs, Sense::Eq, 1.0);
    }
    for k in 0..n {
        let (lo, hi) = z_bounds[k];
        let z = b.id(VarRole::Z { k });
        for &l in &candidates[k] {
            let d = b.id(VarRole::Delta { l, k });
            let p = b.id(VarRole::P { l, k });
            b.row(RowKind::McCormick, vec![(d, lo), (p, -1.0)], Sense::Le, 0.0);
            b.row(RowKind::McCormick, vec![(z, 1.0), (d, hi), (p, -1.0)], Sense::Le, hi);
            b.row(RowKind::McCormick, vec![(p, 1.0), (d, -hi)], Sense::Le, 0.0);
            b.row(RowKind::McCormick, vec![(p, 1.0), (z, -1.0), (d, -lo)], Sense::Le, -lo);
        }
    }
    for k in 0..n {
        if budgets.local[k].is_finite() && !relay_domain[k].is_empty() {
            let c = net.broadcast_cost(k);
            let coeffs = relay_domain[k].iter().map(|&l| (b.id(VarRole::Pi { l, k }), c)).collect();
            b.row(RowKind::LocalBudget, coeffs, Sense::Le, budgets.local[k]);
        }
    }
    if budgets.network.is_finite() {
        let mut coeffs = Vec::new();
        for k in 0..n {
            for &l in &relay_domain[k] {
                coeffs.push((b.id(VarRole::Pi { l, k }), net.broadcast_cost(k)));
            }
        }
        b.row(RowKind::NetworkBudget, coeffs, Sense::Le, budgets.network);
    }
    for k in 0..n {
        let d = b.id(VarRole::Delta { l: k, k });
        b.row(RowKind::SelfConsult, vec![(d, 1.0)], Sense::Eq, 1.0);
    }
    Ok(b)
}

/// `π_lk ≤ Σ_j η_{lj,k} δ_lj ≤ |𝓡_l| π_lk`, with `k = l` standing for the
/// origin's own broadcast. Only `j` with a declared `δ_lj` enter the sum.
fn relay_coupling(b: &mut Builder, net: &Network, relay_domain: &[NodeSet]) -> Result<()> {
    let ix = net.index();
    for k in 0..net.node_count() {
        for &l in &relay_domain[k] {
            let pi = b.id(VarRole::Pi { l, k });
            let mut served = Vec::new();
            for &j in &ix.reachable[l] {
                if j == k {
                    continue;
                }
                let Some(d) = b.get(VarRole::Delta { l, k: j }) else { continue };
                if k == l || path_indicator(net, l, j)?.contains(&k) {
                    served.push(d);
                }
            }
            let reach = ix.reachable[l].len() as f64;
            let mut lower = vec![(pi, 1.0)];
            lower.extend(served.iter().map(|&d| (d, -1.0)));
            b.row(RowKind::RelayCoupling, lower, Sense::Le, 0.0);
            let mut upper: Vec<(usize, f64)> = served.iter().map(|&d| (d, 1.0)).collect();
            upper.push((pi, -reach));
            b.row(RowKind::RelayCoupling, upper, Sense::Le, 0.0);
        }
    }
    Ok(())
}

/// `π_lk ≤ δ_lj` for every `j` with `k ∈ 𝓝_j` and `l ≠ j`: whatever `k`
/// broadcasts, its direct listeners consult.
fn relay_implies_consult(b: &mut Builder, net: &Network, relay_domain: &[NodeSet]) {
    let ix = net.index();
    for j in 0..net.node_count() {
        for &k in &ix.physical[j] {
            for &l in &relay_domain[k] {
                if l == j {
                    continue;
                }
                let pi = b.id(VarRole::Pi { l, k });
                if let Some(d) = b.get(VarRole::Delta { l, k: j }) {
                    b.row(RowKind::RelayImpliesConsult, vec![(pi, 1.0), (d, -1.0)], Sense::Le, 0.0);
                }
            }
        }
    }
}

/// Multi-hop planning model for simple topologies.
pub fn build_p2(net: &Network, gammas: &[f64], budgets: &Budgets) -> Result<MilpModel> {
    if !net.is_simple() {
        return Err(Error::NotSimple("multi-hop planning needs at most one path between any two nodes".into()));
    }
    let ix = net.index();
    let candidates = ix.multi_hop.clone();
    let relay_domain = ix.multi_hop.clone();
    let mut b = common(net, gammas, budgets, &candidates, &relay_domain)?;
    relay_coupling(&mut b, net, &relay_domain)?;
    relay_implies_consult(&mut b, net, &relay_domain);
    for k in 0..net.node_count() {
        for &l in &relay_domain[k] {
            if l == k {
                continue;
            }
            let pi = b.id(VarRole::Pi { l, k });
            let path = net.unique_path(l, k)?;
            for &pred in &path[..path.len() - 1] {
                let prev = b.id(VarRole::Pi { l, k: pred });
                b.row(RowKind::PredecessorRelay, vec![(pi, 1.0), (prev, -1.0)], Sense::Le, 0.0);
            }
        }
    }
    Ok(finish(b, Variant::P2, candidates, gammas, net.node_count()))
}

/// Two-hop planning model for arbitrary topologies.
pub fn build_p3(net: &Network, gammas: &[f64], budgets: &Budgets) -> Result<MilpModel> {
    let ix = net.index();
    let n = net.node_count();
    let candidates = ix.two_hop.clone();
    let relay_domain = ix.relay_customers.clone();
    let mut b = common(net, gammas, budgets, &candidates, &relay_domain)?;
    for k in 0..n {
        for &l in &candidates[k] {
            if l == k {
                continue;
            }
            let d = b.id(VarRole::Delta { l, k });
            let own = b.id(VarRole::Pi { l, k: l });
            b.row(RowKind::OriginBroadcast, vec![(d, 1.0), (own, -1.0)], Sense::Le, 0.0);
            if ix.physical[k].contains(&l) {
                continue;
            }
            let mut coeffs = vec![(d, 1.0)];
            for &j in ix.relay_servers[l].intersection(&ix.physical[k]) {
                if j != k {
                    coeffs.push((b.id(VarRole::Pi { l, k: j }), -1.0));
                }
            }
            b.row(RowKind::RelayServer, coeffs, Sense::Le, 0.0);
        }
    }
    relay_implies_consult(&mut b, net, &relay_domain);
    if net.is_simple() {
        relay_coupling(&mut b, net, &relay_domain)?;
    }
    Ok(finish(b, Variant::P3, candidates, gammas, n))
}

fn finish(b: Builder, variant: Variant, candidates: Vec<NodeSet>, gammas: &[f64], n: usize) -> MilpModel {
    let mut cost = vec![0.0; b.vars.len()];
    for k in 0..n {
        cost[b.id(VarRole::Z { k })] = 1.0;
    }
    MilpModel {
        variant,
        vars: b.vars,
        rows: b.rows,
        row_kinds: b.kinds,
        cost,
        candidates,
        gammas: gammas.to_vec(),
        lookup: b.lookup,
    }
}

pub fn build(variant: Variant, net: &Network, gammas: &[f64], budgets: &Budgets) -> Result<MilpModel> {
    match variant {
        Variant::P2 => build_p2(net, gammas, budgets),
        Variant::P3 => build_p3(net, gammas, budgets),
    }
}
