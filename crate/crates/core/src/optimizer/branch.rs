use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};

use crate::error::{Error, Result};
use crate::topology::Network;

use super::model::MilpModel;
use super::model::{RowKind, VarRole};
use super::rounding::round_algorithm1;
use super::simplex::{self, LinearRow, LpProblem, LpSolution, Sense, WarmStart};
use super::{served_consults, NeighborSelection};
use super::{Budgets, Variant};
use crate::topology::path_indicator;

/// Binaries closer than this to an integer count as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
const NODE_LIMIT: usize = 1_000_000;
const ROUNDING_INTERVAL: usize = 25;
/// Memory allowed for tableaux kept on open nodes.
const WARM_BUDGET_BYTES: usize = 256 << 20;
const FEASIBILITY_TOL: f64 = 1e-9;
const RESTART_TOL: f64 = 1e-6;
/// Separation rounds of consultation cuts at the root and at other nodes.
const ROOT_CUT_ROUNDS: usize = 30;
const NODE_CUT_ROUNDS: usize = 3;
const CUT_VIOLATION: f64 = 1e-7;

/// Solves the LP view of `model`. With `relax` unset every binary must
/// already be fixed by its bounds.
pub fn solve_lp(model: &MilpModel, relax: bool) -> Result<LpSolution> {
    if !relax {
        if let Some(j) = model.binaries().find(|&j| model.vars[j].lower != model.vars[j].upper) {
            return Err(Error::InvalidModel(format!("binary variable {j} is not fixed")));
        }
    }
    simplex::solve(&model.lp())
}

#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub selection: NeighborSelection,
    /// Root relaxation objective.
    pub lp_bound: f64,
    pub nodes_explored: usize,
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Reversed so the max-heap pops the smallest bound, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

fn most_fractional(model: &MilpModel, x: &[f64], relays_only: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in model.binaries() {
        if relays_only && !matches!(model.vars[j].role, VarRole::Pi { .. }) {
            continue;
        }
        let frac = x[j].min(1.0 - x[j]);
        if frac > INTEGRALITY_TOL && best.is_none_or(|(_, f)| frac > f + 1e-12) {
            best = Some((j, frac));
        }
    }
    best.map(|(j, _)| j)
}

/// The relaxation searched by branch and bound, or `None` when some node
/// may skip consulting itself. Every node consults itself, so the product
/// rows can be dropped: `z_k` is bounded below by consultation cuts added
/// during the search and above by `γ_k`. On simple topologies the
/// aggregated relay coupling is also split into `δ_lj ≤ π_li` for the
/// origin and every node on the path. Integral points are unaffected.
fn cut_relaxation(model: &MilpModel, net: &Network) -> Option<LpProblem> {
    let n = model.candidates.len();
    let self_consult = (0..n).all(|k| {
        model.index_of(VarRole::Delta { l: k, k }).is_some_and(|j| model.vars[j].lower == 1.0)
            || model.count_rows(RowKind::SelfConsult) == n
    });
    if !self_consult {
        return None;
    }
    let mut lp = model.lp();
    let mut kinds = model.row_kinds.iter();
    lp.rows.retain(|_| !matches!(kinds.next(), Some(RowKind::McCormick | RowKind::Normalization)));
    for (j, v) in model.vars.iter().enumerate() {
        match v.role {
            VarRole::Z { k } => lp.upper[j] = lp.upper[j].min(model.gammas[k]).max(lp.lower[j]),
            VarRole::P { .. } => lp.upper[j] = 0.0,
            _ => {}
        }
    }
    if model.variant == Variant::P2 {
        for (d, v) in model.vars.iter().enumerate() {
            let VarRole::Delta { l, k: j } = v.role else { continue };
            if l == j {
                continue;
            }
            let Ok(mid) = path_indicator(net, l, j) else { continue };
            for i in std::iter::once(l).chain(mid) {
                if let Some(pi) = model.index_of(VarRole::Pi { l, k: i }) {
                    lp.rows.push(LinearRow::new(vec![(d, 1.0), (pi, -1.0)], Sense::Le, 0.0));
                }
            }
        }
    }
    Some(lp)
}

/// Lower cuts on `z_k` that are exact at the consultation set `chosen`.
///
/// `F(S) = (γ_k⁻¹ + Σ_{l∈S} γ_l⁻¹)⁻¹` is supermodular, so with `ρ_j(A)` the
/// change from adding `j` to `A` and `C` the full candidate set, every `T`
/// satisfies both
/// `F(T) ≥ F(S) + Σ_{j∈T∖S} ρ_j(S) − Σ_{j∈S∖T} ρ_j(C∖j)` and
/// `F(T) ≥ F(S) + Σ_{j∈T∖S} ρ_j(∅) − Σ_{j∈S∖T} ρ_j(S∖j)`.
fn consult_cuts(model: &MilpModel, k: usize, z: usize, others: &[(usize, usize)], chosen: &[bool]) -> [LinearRow; 2] {
    let g = &model.gammas;
    let f = |s: f64| 1.0 / s;
    let inv = |l: usize| 1.0 / g[l];
    let empty = inv(k);
    let s = empty + others.iter().zip(chosen).filter(|(_, &c)| c).map(|(&(l, _), _)| inv(l)).sum::<f64>();
    let full = empty + others.iter().map(|&(l, _)| inv(l)).sum::<f64>();
    let base = f(s);
    [(s, full), (empty, s)].map(|(add_at, drop_at)| {
        let mut coeffs = vec![(z, 1.0)];
        let mut rhs = base;
        for (&(l, d), &c) in others.iter().zip(chosen) {
            if c {
                // z ≥ … + (F(A∖j) − F(A))·(1 − δ_j)
                let gain = f(drop_at - inv(l)) - f(drop_at);
                coeffs.push((d, gain));
                rhs += gain;
            } else {
                coeffs.push((d, f(add_at) - f(add_at + inv(l))));
            }
        }
        LinearRow::new(coeffs, Sense::Ge, rhs)
    })
}

/// Most violated consultation cut of each node among the threshold sets
/// of the fractional selection.
fn separate_consult_cuts(model: &MilpModel, x: &[f64]) -> Vec<LinearRow> {
    let mut cuts = Vec::new();
    for (k, cand) in model.candidates.iter().enumerate() {
        let Some(z) = model.index_of(VarRole::Z { k }) else { continue };
        let others: Vec<(usize, usize)> = cand
            .iter()
            .filter(|&&l| l != k)
            .filter_map(|&l| model.index_of(VarRole::Delta { l, k }).map(|d| (l, d)))
            .collect();
        let mut levels: Vec<f64> = others.iter().map(|&(_, d)| x[d]).collect();
        levels.push(f64::INFINITY);
        levels.sort_by(|a, b| b.total_cmp(a));
        levels.dedup();
        let mut best: Option<(f64, LinearRow)> = None;
        for t in levels {
            let chosen: Vec<bool> = others.iter().map(|&(_, d)| x[d] >= t).collect();
            for cut in consult_cuts(model, k, z, &others, &chosen) {
                let violation = cut.rhs - cut.activity(x);
                if violation > CUT_VIOLATION * cut.rhs && best.as_ref().is_none_or(|(v, _)| violation > *v) {
                    best = Some((violation, cut));
                }
            }
        }
        cuts.extend(best.map(|(_, c)| c));
    }
    cuts
}

/// Adds violated consultation cuts for up to `rounds` rounds. `None` when
/// the node turns out infeasible.
fn with_cuts(model: &MilpModel, mut warm: WarmStart, rounds: usize) -> Result<Option<WarmStart>> {
    for _ in 0..rounds {
        let cuts = separate_consult_cuts(model, &warm.solution().x);
        if cuts.is_empty() {
            break;
        }
        warm = match warm.add_rows(&cuts) {
            Ok(w) => w,
            Err(Error::Infeasible) => return Ok(None),
            Err(e) => return Err(e),
        };
    }
    Ok(Some(warm))
}

/// Tableaux of the most recently created open nodes.
struct WarmCache {
    cap: usize,
    order: VecDeque<usize>,
    map: HashMap<usize, WarmStart>,
}

impl WarmCache {
    fn new(cap: usize) -> Self {
        WarmCache { cap, order: VecDeque::new(), map: HashMap::new() }
    }

    fn insert(&mut self, seq: usize, warm: WarmStart) {
        while self.map.len() >= self.cap {
            match self.order.pop_front() {
                Some(old) => {
                    self.map.remove(&old);
                }
                None => break,
            }
        }
        self.order.push_back(seq);
        self.map.insert(seq, warm);
    }

    fn take(&mut self, seq: usize) -> Option<WarmStart> {
        self.map.remove(&seq)
    }
}

/// Warm restart from `from`, confirmed by a cold solve when the restart
/// claims infeasibility or drifts off the rows. `None` when infeasible.
fn restart(from: &WarmStart, base: &LpProblem, lower: &[f64], upper: &[f64]) -> Result<Option<WarmStart>> {
    match from.resolve(lower, upper) {
        Ok(w) => {
            let x = w.solution().x;
            if base.rows.iter().all(|r| r.is_satisfied(&x, RESTART_TOL)) {
                return Ok(Some(w));
            }
        }
        Err(Error::Infeasible) | Err(Error::IterationLimit(_)) => {}
        Err(e) => return Err(e),
    }
    let mut lp = base.clone();
    lp.lower.copy_from_slice(lower);
    lp.upper.copy_from_slice(upper);
    match simplex::solve_warm(&lp) {
        Ok(w) => Ok(Some(w)),
        Err(Error::Infeasible) => Ok(None),
        Err(e) => Err(e),
    }
}

fn relay_completion(model: &MilpModel, x: &[f64], net: &Network) -> NeighborSelection {
    let mut relays = vec![crate::topology::NodeSet::new(); net.node_count()];
    for ((l, k), v) in model.relay_values(x) {
        if v >= 0.5 {
            relays[k].insert(l);
        }
    }
    let consults = served_consults(net, &relays, &model.candidates);
    NeighborSelection::new(consults, relays, net, &model.gammas)
}

fn offer(incumbent: &mut Option<NeighborSelection>, sel: NeighborSelection) {
    if incumbent.as_ref().is_none_or(|inc| sel.objective < inc.objective) {
        *incumbent = Some(sel);
    }
}

/// Best-first branch-and-bound on fractional binaries with LP bounding,
/// seeded and periodically refreshed by rounding node relaxations.
pub fn solve_milp(model: &MilpModel, net: &Network, budgets: &Budgets) -> Result<MilpSolution> {
    let lp_bound = simplex::solve(&model.lp())?.objective;
    log::debug!("relaxation bound {lp_bound} with {} columns and {} rows", model.var_count(), model.rows.len());
    let (base, root_rounds, node_rounds) = match cut_relaxation(model, net) {
        Some(lp) => (lp, ROOT_CUT_ROUNDS, NODE_CUT_ROUNDS),
        None => (model.lp(), 0, 0),
    };
    let root = with_cuts(model, simplex::solve_warm(&base)?, root_rounds)?.ok_or(Error::Infeasible)?;
    let first = root.solution();
    log::debug!("root bound {} over {} rows", first.objective, root.rows());
    let mut cache = WarmCache::new((WARM_BUDGET_BYTES / root.memory_bytes().max(1)).max(1));
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    let (lower, upper) = (root.lower().to_vec(), root.upper().to_vec());
    let mut incumbent: Option<NeighborSelection> = None;
    let round = |x: &[f64], incumbent: &mut Option<NeighborSelection>| {
        let sel = round_algorithm1(x, model, net, budgets);
        if model.point_of(&sel).is_some_and(|p| model.satisfies(&p, FEASIBILITY_TOL)) {
            offer(incumbent, sel);
        }
    };
    round(&first.x, &mut incumbent);
    heap.push(Node { bound: first.objective, seq, lower, upper, x: first.x });
    let mut explored = 0usize;
    let prune = |bound: f64, inc: &Option<NeighborSelection>| match inc {
        Some(s) => bound >= s.objective - 1e-9 * s.objective.abs().max(1.0),
        None => false,
    };
    while let Some(node) = heap.pop() {
        let warm = cache.take(node.seq);
        if prune(node.bound, &incumbent) {
            continue;
        }
        explored += 1;
        if explored.is_multiple_of(ROUNDING_INTERVAL) {
            round(&node.x, &mut incumbent);
        }
        if explored.is_multiple_of(1000) {
            log::debug!(
                "{explored} nodes, bound {}, incumbent {:?}, open {}",
                node.bound,
                incumbent.as_ref().map(|s| s.objective),
                heap.len()
            );
        }
        if explored > NODE_LIMIT {
            return Err(Error::IterationLimit(NODE_LIMIT));
        }
        // With the relays integral, consulting every delivered candidate is
        // optimal, so the node closes unless that point breaks a row.
        let j = match most_fractional(model, &node.x, true) {
            Some(j) => Some(j),
            None => {
                let sel = relay_completion(model, &node.x, net);
                if model.point_of(&sel).is_some_and(|p| model.satisfies(&p, FEASIBILITY_TOL)) {
                    offer(&mut incumbent, sel);
                    None
                } else {
                    most_fractional(model, &node.x, false)
                }
            }
        };
        let Some(j) = j else {
            if !model.binaries().any(|j| node.x[j].min(1.0 - node.x[j]) > INTEGRALITY_TOL) {
                offer(&mut incumbent, model.selection_from(&node.x, net));
            }
            continue;
        };
        let parent = match warm {
            Some(w) => w,
            None if node.seq == 0 => root.clone(),
            None => match restart(&root, &base, &node.lower, &node.upper)? {
                Some(w) => w,
                None => continue,
            },
        };
        for value in [0.0, 1.0] {
            let mut lower = node.lower.clone();
            let mut upper = node.upper.clone();
            lower[j] = value;
            upper[j] = value;
            let Some(child) = restart(&parent, &base, &lower, &upper)? else { continue };
            let Some(child) = with_cuts(model, child, node_rounds)? else { continue };
            let sol = child.solution();
            if prune(sol.objective, &incumbent) {
                continue;
            }
            seq += 1;
            cache.insert(seq, child);
            heap.push(Node { bound: sol.objective, seq, lower, upper, x: sol.x });
        }
    }
    let selection = incumbent.ok_or(Error::Infeasible)?;
    Ok(MilpSolution { selection, lp_bound, nodes_explored: explored })
}

/// Relative weight of the index tie-break in [`cheapest_relays`].
const TIE_BREAK: f64 = 1e-7;

/// The least-energy relays serving `sel`'s consultation sets, ties broken by
/// variable order. Returns `sel` unchanged if the search exceeds its node
/// limit.
pub fn cheapest_relays(model: &MilpModel, sel: &NeighborSelection, net: &Network) -> Result<NeighborSelection> {
    let mut lp = model.fix_binaries(sel).lp();
    let count = model.var_count() as f64;
    let mut continuous = vec![false; model.var_count()];
    for (j, v) in model.vars.iter().enumerate() {
        lp.cost[j] = match v.role {
            VarRole::Pi { k, .. } => net.broadcast_cost(k) * (1.0 + TIE_BREAK * (j + 1) as f64 / count),
            VarRole::Delta { .. } => 0.0,
            VarRole::P { .. } | VarRole::Z { .. } => {
                continuous[j] = true;
                0.0
            }
        };
        if let VarRole::Pi { .. } = v.role {
            lp.lower[j] = v.lower;
            lp.upper[j] = v.upper;
        }
    }
    lp.rows.retain(|r| r.coeffs.iter().all(|&(j, _)| !continuous[j]));
    for j in (0..lp.cost.len()).filter(|&j| continuous[j]) {
        lp.upper[j] = lp.lower[j];
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stack = vec![(lp.lower.clone(), lp.upper.clone())];
    let mut explored = 0usize;
    while let Some((lower, upper)) = stack.pop() {
        explored += 1;
        if explored > NODE_LIMIT {
            return Ok(sel.clone());
        }
        let node = LpProblem { lower, upper, ..lp.clone() };
        let sol = match simplex::solve(&node) {
            Ok(s) => s,
            Err(Error::Infeasible) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_some_and(|(b, _)| sol.objective >= *b - 1e-12 * b.abs().max(1.0)) {
            continue;
        }
        let fractional = model
            .binaries()
            .filter(|&j| sol.x[j].min(1.0 - sol.x[j]) > INTEGRALITY_TOL)
            .max_by(|&a, &b| (0.5 - (sol.x[a] - 0.5).abs()).total_cmp(&(0.5 - (sol.x[b] - 0.5).abs())));
        match fractional {
            None => best = Some((sol.objective, sol.x)),
            Some(j) => {
                for value in [0.0, 1.0] {
                    let (mut lo, mut up) = (node.lower.clone(), node.upper.clone());
                    lo[j] = value;
                    up[j] = value;
                    stack.push((lo, up));
                }
            }
        }
    }
    Ok(match best {
        Some((_, x)) => {
            let relays = model.selection_from(&x, net).relays;
            NeighborSelection::new(sel.consults.clone(), relays, net, &model.gammas)
        }
        None => sel.clone(),
    })
}
