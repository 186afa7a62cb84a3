//! TOML file formats for networks, node profiles and plans.
//!
//! Node indices in files are 1-based.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::datamodel::{GlobalModel, NodeProfile};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::optimizer::{Method, NeighborSelection, Plan, Variant};
use crate::topology::{Network, NodeSet};

/// Largest network accepted from a file.
pub const MAX_NODES: usize = 1024;
/// Largest parameter dimension accepted from a file.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: usize,
    #[serde(default = "yes")]
    pub undirected: bool,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broadcast_cost: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Vec<[f64; 2]>>,
    /// With coordinates, costs become `cost_scale · (farthest reach)²`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost_scale: Option<f64>,
}

fn yes() -> bool {
    true
}

fn check_node(id: usize, n: usize, what: &str) -> Result<usize> {
    if id == 0 || id > n {
        return Err(Error::Parse(format!("{what}: node {id} is outside 1..={n}")));
    }
    Ok(id - 1)
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let n = self.nodes;
        if n == 0 || n > MAX_NODES {
            return Err(Error::Parse(format!("nodes must lie in 1..={MAX_NODES}, got {n}")));
        }
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| Ok((check_node(a, n, "edge")?, check_node(b, n, "edge")?)))
            .collect::<Result<Vec<_>>>()?;
        let costs = self.broadcast_cost.unwrap_or_else(|| vec![1.0; n]);
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Parse("broadcast costs must be finite".into()));
        }
        let mut net =
            if self.undirected { Network::undirected(n, edges, costs)? } else { Network::new(n, edges, costs)? };
        if let Some(coords) = self.coordinates {
            if coords.iter().flatten().any(|c| !c.is_finite()) {
                return Err(Error::Parse("coordinates must be finite".into()));
            }
            net = net.with_coordinates(coords)?;
            if let Some(scale) = self.cost_scale {
                if !(scale >= 0.0) || !scale.is_finite() {
                    return Err(Error::Parse(format!("cost_scale must be nonnegative, got {scale}")));
                }
                net = net.with_squared_distance_costs(scale)?;
            }
        } else if self.cost_scale.is_some() {
            return Err(Error::Parse("cost_scale needs coordinates".into()));
        }
        Ok(net)
    }

    /// Directed form of `net`.
    pub fn from_network(net: &Network) -> Self {
        NetworkFile {
            nodes: net.node_count(),
            undirected: false,
            edges: net.edges().map(|(a, b)| [a + 1, b + 1]).collect(),
            broadcast_cost: Some(net.broadcast_costs().to_vec()),
            coordinates: net.coordinates().map(<[_]>::to_vec),
            cost_scale: None,
        }
    }
}

pub fn parse_network(text: &str) -> Result<Network> {
    toml::from_str::<NetworkFile>(text)?.into_network()
}

pub fn write_network(net: &Network) -> String {
    toml::to_string(&NetworkFile::from_network(net)).expect("network file serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub sigma_v2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_u_diag: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_u: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_mu")]
    pub mu: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "infinite")]
    pub budget: f64,
}

fn default_mu() -> f64 {
    0.08
}

fn default_nu() -> f64 {
    0.05
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilesFile {
    pub w_true: Vec<f64>,
    #[serde(default = "infinite")]
    pub network_budget: f64,
    pub node: Vec<NodeEntry>,
}

impl ProfilesFile {
    pub fn into_model(self) -> Result<GlobalModel> {
        let m = self.w_true.len();
        if m == 0 || m > MAX_DIM {
            return Err(Error::Parse(format!("w_true must have 1..={MAX_DIM} entries, got {m}")));
        }
        if self.node.is_empty() || self.node.len() > MAX_NODES {
            return Err(Error::Parse(format!("expected 1..={MAX_NODES} [[node]] tables, got {}", self.node.len())));
        }
        if self.w_true.iter().any(|w| !w.is_finite()) {
            return Err(Error::Parse("w_true must be finite".into()));
        }
        let mut profiles = Vec::with_capacity(self.node.len());
        for (k, e) in self.node.into_iter().enumerate() {
            let r_u = match (e.r_u_diag, e.r_u) {
                (Some(d), None) => {
                    if d.len() != m {
                        return Err(Error::Parse(format!(
                            "node {}: r_u_diag has {} entries, expected {m}",
                            k + 1,
                            d.len()
                        )));
                    }
                    Mat::from_diagonal(&DVector::from_vec(d))
                }
                (None, Some(rows)) => {
                    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
                        return Err(Error::Parse(format!("node {}: r_u must be {m}x{m}", k + 1)));
                    }
                    Mat::from_fn(m, m, |i, j| rows[i][j])
                }
                _ => return Err(Error::Parse(format!("node {}: give exactly one of r_u_diag or r_u", k + 1))),
            };
            if r_u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Parse(format!("node {}: r_u must be finite", k + 1)));
            }
            profiles.push(NodeProfile { sigma_v2: e.sigma_v2, r_u, mu: e.mu, nu: e.nu, energy_budget: e.budget });
        }
        let mut model = GlobalModel::new(DVector::from_vec(self.w_true), profiles)?;
        model.network_budget = self.network_budget;
        model.validate()?;
        Ok(model)
    }

    pub fn from_model(model: &GlobalModel) -> Self {
        ProfilesFile {
            w_true: model.w_true.iter().copied().collect(),
            network_budget: model.network_budget,
            node: model
                .profiles
                .iter()
                .map(|p| {
                    let m = p.dim();
                    let diagonal = (0..m).all(|i| (0..m).all(|j| i == j || p.r_u[(i, j)] == 0.0));
                    NodeEntry {
                        sigma_v2: p.sigma_v2,
                        r_u_diag: diagonal.then(|| p.r_u.diagonal().iter().copied().collect()),
                        r_u: (!diagonal).then(|| (0..m).map(|i| (0..m).map(|j| p.r_u[(i, j)]).collect()).collect()),
                        mu: p.mu,
                        nu: p.nu,
                        budget: p.energy_budget,
                    }
                })
                .collect(),
        }
    }
}

pub fn parse_profiles(text: &str) -> Result<GlobalModel> {
    toml::from_str::<ProfilesFile>(text)?.into_model()
}

pub fn write_profiles(model: &GlobalModel) -> String {
    toml::to_string(&ProfilesFile::from_model(model)).expect("profiles file serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanNode {
    pub id: usize,
    pub consults: Vec<usize>,
    #[serde(default)]
    pub relays: Vec<usize>,
    #[serde(default)]
    pub cost: f64,
}

/// Plan listing with its energy ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    pub variant: String,
    pub method: String,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes_explored: Option<usize>,
    pub total_cost: f64,
    pub node: Vec<PlanNode>,
}

impl PlanFile {
    pub fn from_plan(plan: &Plan) -> Self {
        let sel = &plan.selection;
        let exact = plan.method == Method::Exact;
        PlanFile {
            variant: plan.variant.to_string(),
            method: plan.method.to_string(),
            objective: sel.objective,
            lp_bound: Some(plan.lp_bound),
            nodes_explored: exact.then_some(plan.nodes_explored),
            total_cost: sel.total_cost,
            node: (0..sel.node_count())
                .map(|k| PlanNode {
                    id: k + 1,
                    consults: sel.consults[k].iter().map(|l| l + 1).collect(),
                    relays: sel.relays[k].iter().map(|l| l + 1).collect(),
                    cost: sel.per_node_cost[k],
                })
                .collect(),
        }
    }

    pub fn variant(&self) -> Result<Variant> {
        self.variant.parse()
    }

    pub fn method(&self) -> Result<Method> {
        self.method.parse()
    }

    /// Consultation and relay sets, 0-based, one entry per node.
    pub fn sets(&self) -> Result<(Vec<NodeSet>, Vec<NodeSet>)> {
        let n = self.node.len();
        if n == 0 || n > MAX_NODES {
            return Err(Error::Parse(format!("expected 1..={MAX_NODES} [[node]] tables, got {n}")));
        }
        let mut consults = vec![None; n];
        let mut relays = vec![NodeSet::new(); n];
        for entry in &self.node {
            let k = check_node(entry.id, n, "plan node")?;
            if consults[k].is_some() {
                return Err(Error::Parse(format!("plan lists node {} twice", entry.id)));
            }
            let c = entry.consults.iter().map(|&l| check_node(l, n, "consults")).collect::<Result<NodeSet>>()?;
            relays[k] = entry.relays.iter().map(|&l| check_node(l, n, "relays")).collect::<Result<NodeSet>>()?;
            consults[k] = Some(c);
        }
        Ok((consults.into_iter().map(Option::unwrap).collect(), relays))
    }

    /// Selection on `net`, with costs and objective recomputed.
    pub fn to_selection(&self, net: &Network, gammas: &[f64]) -> Result<NeighborSelection> {
        let (consults, relays) = self.sets()?;
        if consults.len() != net.node_count() {
            return Err(Error::Dimension(format!(
                "plan has {} nodes, network has {}",
                consults.len(),
                net.node_count()
            )));
        }
        Ok(NeighborSelection::new(consults, relays, net, gammas))
    }
}

pub fn parse_plan(text: &str) -> Result<PlanFile> {
    let plan: PlanFile = toml::from_str(text)?;
    plan.variant()?;
    plan.method()?;
    plan.sets()?;
    Ok(plan)
}

pub fn write_plan(plan: &Plan) -> String {
    toml::to_string(&PlanFile::from_plan(plan)).expect("plan file serializes")
}
