//! Monte Carlo diffusion simulator.

pub mod adaptive;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datamodel::{GlobalModel, SampleGenerator};
use crate::error::{Error, Result};
use crate::msd::stability_check;
use crate::optimizer::{delivery_hops, relays_for, NeighborSelection, BUDGET_TOL};
use crate::topology::{Network, NodeSet};
use crate::trace::{MsdTrace, STEADY_TAIL_FRACTION};
use crate::weights::{balancing_weights, uniform_weights, AdaptiveVarState, BalanceCoefficient, WeightMatrix};

use adaptive::{broadcast_capacity, flood, plan_delivery, relay_decision, RelayDecision};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    Atc,
    Matc,
    MatcAsync,
    Catc,
    Noncoop,
    Centralized,
    AdaptiveMatc,
    AdaptiveMatcAsync,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 8] = [
        StrategyKind::Atc,
        StrategyKind::Matc,
        StrategyKind::MatcAsync,
        StrategyKind::Catc,
        StrategyKind::Noncoop,
        StrategyKind::Centralized,
        StrategyKind::AdaptiveMatc,
        StrategyKind::AdaptiveMatcAsync,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Atc => "atc",
            StrategyKind::Matc => "matc",
            StrategyKind::MatcAsync => "matc_async",
            StrategyKind::Catc => "catc",
            StrategyKind::Noncoop => "noncoop",
            StrategyKind::Centralized => "centralized",
            StrategyKind::AdaptiveMatc => "adaptive_matc",
            StrategyKind::AdaptiveMatcAsync => "adaptive_matc_async",
        }
    }

    pub fn needs_plan(self) -> bool {
        matches!(self, StrategyKind::Matc | StrategyKind::MatcAsync)
    }

    fn is_async(self) -> bool {
        matches!(self, StrategyKind::MatcAsync | StrategyKind::AdaptiveMatcAsync)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightRule {
    Balancing,
    AdaptiveBalancing,
    Uniform,
}

impl fmt::Display for WeightRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightRule::Balancing => "balancing",
            WeightRule::AdaptiveBalancing => "adaptive_balancing",
            WeightRule::Uniform => "uniform",
        })
    }
}

impl FromStr for WeightRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balancing" => Ok(WeightRule::Balancing),
            "adaptive_balancing" => Ok(WeightRule::AdaptiveBalancing),
            "uniform" => Ok(WeightRule::Uniform),
            _ => Err(Error::Parse(format!("unknown weight rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Consultation and relay plan for `matc` and `matc_async`.
    pub plan: Option<NeighborSelection>,
    /// Maximum consultation hops for the adaptive kinds.
    pub h: usize,
    pub weight_rule: WeightRule,
    /// Balancing coefficient; also the blend used by adaptive estimates.
    pub alpha: f64,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        let weight_rule = match kind {
            StrategyKind::Catc | StrategyKind::AdaptiveMatc | StrategyKind::AdaptiveMatcAsync => {
                WeightRule::AdaptiveBalancing
            }
            _ => WeightRule::Balancing,
        };
        StrategyConfig { kind, plan: None, h: 2, weight_rule, alpha: 0.95 }
    }

    pub fn with_plan(mut self, plan: NeighborSelection) -> Self {
        self.plan = Some(plan);
        self
    }

    pub fn with_weights(mut self, rule: WeightRule) -> Self {
        self.weight_rule = rule;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_balance(self, coef: BalanceCoefficient) -> Self {
        self.with_alpha(coef.alpha)
    }

    pub fn with_hops(mut self, h: usize) -> Self {
        self.h = h;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChangeAction {
    SetOmega(Vec<f64>),
    /// Multiplies every node's noise variance.
    ScaleNoise(f64),
    /// `(node, budget)` pairs, 0-based nodes.
    SetBudgets(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChangeEvent {
    pub at_iteration: usize,
    pub action: ChangeAction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub iters: usize,
    pub runs: usize,
    pub seed: u64,
    pub events: Vec<ChangeEvent>,
}

impl RunOptions {
    pub fn new(iters: usize, runs: usize, seed: u64) -> Self {
        RunOptions { iters, runs, seed, events: Vec::new() }
    }

    pub fn with_events(mut self, events: Vec<ChangeEvent>) -> Self {
        self.events = events;
        self
    }
}

/// Averaged outcome of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub trace: MsdTrace,
    /// Per-node MSD averaged over the last 20% of iterations.
    pub node_steady: Vec<f64>,
    /// Per-node energy summed over iterations.
    pub node_energy: Vec<f64>,
}

/// Per-node energy of one iteration, `c_k·(broadcasts of k)`.
pub fn energy_ledger(broadcasts: &[usize], net: &Network) -> Vec<f64> {
    broadcasts.iter().enumerate().map(|(k, &b)| net.broadcast_cost(k) * b as f64).collect()
}

/// Per-node energy of one iteration under a static relay plan.
pub fn plan_energy(relays: &[NodeSet], net: &Network) -> Vec<f64> {
    let counts: Vec<usize> = relays.iter().map(NodeSet::len).collect();
    energy_ledger(&counts, net)
}

/// Fixed combination matrix of a strategy, or `None` when its weights or
/// deliveries change from one iteration to the next.
pub fn static_weights(model: &GlobalModel, net: &Network, strategy: &StrategyConfig) -> Result<Option<WeightMatrix>> {
    let n = net.node_count();
    let sets: Vec<NodeSet> = match strategy.kind {
        StrategyKind::Noncoop => (0..n).map(|k| NodeSet::from([k])).collect(),
        StrategyKind::Atc => net.index().physical.clone(),
        StrategyKind::Centralized => (0..n).map(|_| (0..n).collect()).collect(),
        StrategyKind::Matc => {
            let plan = strategy
                .plan
                .as_ref()
                .ok_or_else(|| Error::InfeasiblePlan("strategy `matc` requires a plan".into()))?;
            check_plan(plan, model, net)?;
            plan.consults.clone()
        }
        _ => return Ok(None),
    };
    match strategy.weight_rule {
        WeightRule::Balancing => Ok(Some(balancing_weights(&sets, &model.composite_variances(strategy.alpha))?)),
        WeightRule::Uniform => Ok(Some(uniform_weights(&sets)?)),
        WeightRule::AdaptiveBalancing => Ok(None),
    }
}

enum Routing {
    Static { consults: Vec<NodeSet>, hops: Vec<u8>, broadcasts: Vec<usize> },
    Catc,
    Adaptive { h: usize },
}

struct Setup<'a> {
    model: &'a GlobalModel,
    net: &'a Network,
    kind: StrategyKind,
    rule: WeightRule,
    alpha: f64,
    routing: Routing,
    inv_gamma: Vec<f64>,
    generators: Vec<SampleGenerator>,
    /// Largest delivery delay kept in the buffers.
    max_delay: usize,
    track_gamma: bool,
}

fn check_plan(plan: &NeighborSelection, model: &GlobalModel, net: &Network) -> Result<()> {
    let n = net.node_count();
    if plan.node_count() != n || plan.relays.len() != n {
        return Err(Error::InfeasiblePlan(format!("plan covers {} nodes, network has {n}", plan.node_count())));
    }
    for k in 0..n {
        if !plan.consults[k].contains(&k) {
            return Err(Error::InfeasiblePlan(format!("node {} does not consult itself", k + 1)));
        }
        let cost = net.broadcast_cost(k) * plan.relays[k].len() as f64;
        let limit = model.profiles[k].energy_budget;
        if cost > limit + BUDGET_TOL * limit.abs().max(1.0) {
            return Err(Error::InfeasiblePlan(format!("node {} spends {cost} over its budget {limit}", k + 1)));
        }
    }
    for l in 0..n {
        let hops = delivery_hops(net, &plan.relays, l);
        for k in 0..n {
            if k != l && plan.consults[k].contains(&l) && hops[k].is_none() {
                return Err(Error::InfeasiblePlan(format!("no relay chain delivers node {} to node {}", l + 1, k + 1)));
            }
        }
    }
    Ok(())
}

fn static_routing(consults: Vec<NodeSet>, relays: &[NodeSet], net: &Network) -> Routing {
    let n = net.node_count();
    let mut hops = vec![0u8; n * n];
    let mut broadcasts = vec![0; n];
    plan_delivery(net, relays, &mut hops, &mut broadcasts);
    Routing::Static { consults, hops, broadcasts }
}

fn prepare<'a>(model: &'a GlobalModel, net: &'a Network, strategy: &StrategyConfig) -> Result<Setup<'a>> {
    model.validate()?;
    let n = model.node_count();
    if net.node_count() != n {
        return Err(Error::Dimension(format!("network has {} nodes, model has {n}", net.node_count())));
    }
    if !(0.0..=1.0).contains(&strategy.alpha) {
        return Err(Error::InvalidModel(format!("balancing coefficient {} outside [0, 1]", strategy.alpha)));
    }
    let unstable: Vec<usize> =
        stability_check(&model.profiles).iter().enumerate().filter(|(_, &ok)| !ok).map(|(k, _)| k + 1).collect();
    if !unstable.is_empty() {
        log::warn!("step sizes violate the mean-square stability condition at nodes {unstable:?}");
    }
    let ix = net.index();
    let kind = strategy.kind;
    let routing = match kind {
        StrategyKind::Noncoop => {
            let sets: Vec<NodeSet> = (0..n).map(|k| NodeSet::from([k])).collect();
            static_routing(sets, &vec![NodeSet::new(); n], net)
        }
        StrategyKind::Atc | StrategyKind::Centralized => {
            let sets: Vec<NodeSet> = if kind == StrategyKind::Atc {
                ix.physical.clone()
            } else {
                (0..n).map(|_| (0..n).collect()).collect()
            };
            let relays = relays_for(net, &sets);
            static_routing(sets, &relays, net)
        }
        StrategyKind::Matc | StrategyKind::MatcAsync => {
            let plan = strategy
                .plan
                .as_ref()
                .ok_or_else(|| Error::InfeasiblePlan(format!("strategy `{kind}` requires a plan")))?;
            check_plan(plan, model, net)?;
            static_routing(plan.consults.clone(), &plan.relays, net)
        }
        StrategyKind::Catc => Routing::Catc,
        StrategyKind::AdaptiveMatc | StrategyKind::AdaptiveMatcAsync => {
            if strategy.h == 0 {
                return Err(Error::InvalidModel("adaptive relaying needs at least one hop".into()));
            }
            Routing::Adaptive { h: strategy.h }
        }
    };
    let max_delay = if kind.is_async() {
        match &routing {
            Routing::Static { hops, .. } => hops.iter().map(|&h| h as usize).max().unwrap_or(1).saturating_sub(1),
            Routing::Adaptive { h } => h - 1,
            Routing::Catc => 0,
        }
    } else {
        0
    };
    let inv_gamma = model.composite_variances(strategy.alpha).iter().map(|g| 1.0 / g).collect();
    let generators = model.profiles.iter().map(SampleGenerator::new).collect::<Result<Vec<_>>>()?;
    Ok(Setup {
        model,
        net,
        kind,
        rule: strategy.weight_rule,
        alpha: strategy.alpha,
        routing,
        inv_gamma,
        generators,
        max_delay,
        track_gamma: strategy.weight_rule == WeightRule::AdaptiveBalancing
            || matches!(kind, StrategyKind::AdaptiveMatc | StrategyKind::AdaptiveMatcAsync),
    })
}

/// Sums of one or more runs.
struct Accum {
    msd: Vec<f64>,
    energy: Vec<f64>,
    node_tail: Vec<f64>,
    node_energy: Vec<f64>,
}

impl Accum {
    fn zeros(iters: usize, n: usize) -> Self {
        Accum { msd: vec![0.0; iters], energy: vec![0.0; iters], node_tail: vec![0.0; n], node_energy: vec![0.0; n] }
    }

    fn add(&mut self, other: &Accum) {
        for (a, b) in [
            (&mut self.msd, &other.msd),
            (&mut self.energy, &other.energy),
            (&mut self.node_tail, &other.node_tail),
            (&mut self.node_energy, &other.node_energy),
        ] {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

/// Simulates `opts.runs` independent runs and averages them.
///
/// Each `(run, node)` pair draws from its own ChaCha8 stream, and runs are
/// summed in a fixed order, so results do not depend on the thread count.
pub fn run_detailed(
    model: &GlobalModel,
    net: &Network,
    strategy: &StrategyConfig,
    opts: &RunOptions,
) -> Result<SimResult> {
    let setup = prepare(model, net, strategy)?;
    let n = model.node_count();
    let m = model.dim();
    for ev in &opts.events {
        match &ev.action {
            ChangeAction::SetOmega(w) if w.len() != m => {
                return Err(Error::Dimension(format!("new parameter has {} entries, expected {m}", w.len())));
            }
            ChangeAction::ScaleNoise(s) if !(*s > 0.0) => {
                return Err(Error::InvalidModel(format!("noise scale {s} must be positive")));
            }
            ChangeAction::SetBudgets(b) if b.iter().any(|&(k, c)| k >= n || !(c >= 0.0)) => {
                return Err(Error::InvalidModel("budget change names an unknown node or a negative budget".into()));
            }
            _ => {}
        }
    }
    const CHUNK: usize = 16;
    let chunks: Vec<usize> = (0..opts.runs.div_ceil(CHUNK)).collect();
    let partial: Vec<Accum> = chunks
        .par_iter()
        .map(|&c| {
            let mut acc = Accum::zeros(opts.iters, n);
            for r in c * CHUNK..((c + 1) * CHUNK).min(opts.runs) {
                acc.add(&single_run(&setup, opts, r as u64));
            }
            acc
        })
        .collect();
    let mut total = Accum::zeros(opts.iters, n);
    for p in &partial {
        total.add(p);
    }
    let runs = opts.runs.max(1) as f64;
    let tail = ((opts.iters as f64 * STEADY_TAIL_FRACTION).ceil() as usize).clamp(1, opts.iters.max(1)) as f64;
    Ok(SimResult {
        trace: MsdTrace::with_energy(
            total.msd.iter().map(|x| x / runs).collect(),
            total.energy.iter().map(|x| x / runs).collect(),
        ),
        node_steady: total.node_tail.iter().map(|x| x / (runs * tail)).collect(),
        node_energy: total.node_energy.iter().map(|x| x / runs).collect(),
    })
}

/// Network MSD learning curve with its energy ledger.
pub fn run(model: &GlobalModel, net: &Network, strategy: &StrategyConfig, opts: &RunOptions) -> Result<MsdTrace> {
    Ok(run_detailed(model, net, strategy, opts)?.trace)
}

/// Non-cooperative special case, `A = I`.
pub fn noncoop_run(model: &GlobalModel, net: &Network, opts: &RunOptions) -> Result<MsdTrace> {
    run(model, net, &StrategyConfig::new(StrategyKind::Noncoop), opts)
}

/// Every node combines every intermediate estimate with balancing weights.
pub fn centralized_run(model: &GlobalModel, net: &Network, alpha: f64, opts: &RunOptions) -> Result<MsdTrace> {
    run(model, net, &StrategyConfig::new(StrategyKind::Centralized).with_alpha(alpha), opts)
}

/// Combination weight of a message under the configured rule.
fn raw_weight(setup: &Setup<'_>, origin: usize, gamma: f64) -> f64 {
    match setup.rule {
        WeightRule::Balancing => setup.inv_gamma[origin],
        WeightRule::Uniform => 1.0,
        WeightRule::AdaptiveBalancing => gamma,
    }
}

fn single_run(setup: &Setup<'_>, opts: &RunOptions, run: u64) -> Accum {
    let n = setup.model.node_count();
    let m = setup.model.dim();
    let iters = opts.iters;
    let net = setup.net;
    let slots = setup.max_delay + 1;
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream((run << 20) | k as u64);
            rng
        })
        .collect();
    let mut gens = setup.generators.clone();
    let mut sigma: Vec<f64> = setup.model.profiles.iter().map(|p| p.sigma_v2).collect();
    let mut budgets: Vec<f64> = setup.model.local_budgets();
    let mut w_true: DVector<f64> = setup.model.w_true.clone();
    let mut omega = vec![0.0; n * m];
    let mut psi_ring = vec![0.0; slots * n * m];
    let mut gamma_ring = vec![0.0; slots * n];
    let mut hops_ring = vec![0u8; slots * n * n];
    let mut states: Vec<AdaptiveVarState> = (0..n).map(|_| AdaptiveVarState::new(m)).collect();
    let mut decisions = vec![RelayDecision::default(); n];
    let mut previous: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    let mut broadcasts = vec![0usize; n];
    let mut z = vec![0.0; m];
    let mut u = vec![0.0; m];
    let mut acc = Accum::zeros(iters, n);
    let tail_start = iters - ((iters as f64 * STEADY_TAIL_FRACTION).ceil() as usize).clamp(1, iters.max(1)).min(iters);
    let mut inbox: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut weights: Vec<f64> = Vec::with_capacity(n);

    for i in 0..iters {
        for ev in opts.events.iter().filter(|e| e.at_iteration == i) {
            match &ev.action {
                ChangeAction::SetOmega(w) => w_true = DVector::from_column_slice(w),
                ChangeAction::ScaleNoise(s) => {
                    for (k, g) in gens.iter_mut().enumerate() {
                        sigma[k] *= s;
                        g.set_noise_variance(sigma[k]);
                    }
                }
                ChangeAction::SetBudgets(b) => {
                    for &(k, c) in b {
                        budgets[k] = c;
                    }
                }
            }
        }

        let slot = i % slots;
        // Adapt.
        for k in 0..n {
            let p = &setup.model.profiles[k];
            let d = gens[k].draw_into(&mut rngs[k], &w_true, &mut z, &mut u);
            let w = &omega[k * m..(k + 1) * m];
            let err = d - u.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
            let psi = &mut psi_ring[(slot * n + k) * m..(slot * n + k + 1) * m];
            for j in 0..m {
                psi[j] = w[j] + p.mu * u[j] * err;
            }
            if setup.track_gamma {
                states[k].update(psi, w, &u, p.mu, p.nu, setup.alpha);
                gamma_ring[slot * n + k] = states[k].gamma;
            }
        }

        // Exchange.
        let hops_now = &mut hops_ring[slot * n * n..(slot + 1) * n * n];
        match &setup.routing {
            Routing::Static { hops, broadcasts: b, .. } => {
                hops_now.copy_from_slice(hops);
                broadcasts.copy_from_slice(b);
            }
            Routing::Catc => {
                hops_now.fill(0);
                for k in 0..n {
                    let on = broadcast_capacity(budgets[k], net.broadcast_cost(k), n) >= 1;
                    broadcasts[k] = on as usize;
                    if on {
                        for &v in net.out_neighbors(k) {
                            hops_now[k * n + v] = 1;
                        }
                    }
                }
            }
            Routing::Adaptive { h } => {
                for k in 0..n {
                    let cap = broadcast_capacity(budgets[k], net.broadcast_cost(k), n);
                    decisions[k] = relay_decision(k, &previous[k], cap, *h);
                }
                flood(net, &decisions, *h, hops_now, &mut broadcasts);
                for k in 0..n {
                    previous[k].clear();
                    for l in 0..n {
                        let hop = hops_now[l * n + k] as usize;
                        if l != k && hop >= 1 {
                            previous[k].push((l, hop, gamma_ring[slot * n + l]));
                        }
                    }
                }
            }
        }
        let energy = energy_ledger(&broadcasts, net);
        acc.energy[i] = energy.iter().sum();
        for (a, e) in acc.node_energy.iter_mut().zip(&energy) {
            *a += e;
        }

        // Combine.
        let mut msd = 0.0;
        for k in 0..n {
            inbox.clear();
            for l in 0..n {
                if l == k {
                    inbox.push((l, slot));
                    continue;
                }
                if let Routing::Static { consults, .. } = &setup.routing {
                    if !consults[k].contains(&l) {
                        continue;
                    }
                }
                for d in 0..=setup.max_delay.min(i) {
                    let s = (i - d) % slots;
                    let hop = hops_ring[s * n * n + l * n + k] as usize;
                    let delay = if setup.kind.is_async() { hop.saturating_sub(1) } else { 0 };
                    if hop >= 1 && delay == d {
                        inbox.push((l, s));
                        break;
                    }
                }
            }
            weights.clear();
            let adaptive = setup.rule == WeightRule::AdaptiveBalancing;
            let warm = !adaptive || inbox.iter().all(|&(l, s)| gamma_ring[s * n + l] > 0.0);
            for &(l, s) in &inbox {
                let g = gamma_ring[s * n + l];
                weights.push(if !warm {
                    1.0
                } else if adaptive {
                    1.0 / g
                } else {
                    raw_weight(setup, l, g)
                });
            }
            let total: f64 = weights.iter().sum();
            let w_out = &mut omega[k * m..(k + 1) * m];
            w_out.fill(0.0);
            for (&(l, s), &wl) in inbox.iter().zip(&weights) {
                let a = wl / total;
                let src = &psi_ring[(s * n + l) * m..(s * n + l + 1) * m];
                for (o, p) in w_out.iter_mut().zip(src) {
                    *o += a * p;
                }
            }
            let dev: f64 = w_out.iter().zip(w_true.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            msd += dev;
            if i >= tail_start {
                acc.node_tail[k] += dev;
            }
        }
        acc.msd[i] = msd / n as f64;
    }
    acc
}
