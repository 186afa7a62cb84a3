//! Information-neighbor planning under energy budgets.

mod branch;
pub mod model;
mod rounding;
mod selection;
pub mod simplex;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::topology::Network;

pub use branch::{cheapest_relays, solve_lp, solve_milp, MilpSolution, INTEGRALITY_TOL};
pub use model::{build, build_p2, build_p3, MilpModel, RowKind, VarRole, Variable};
pub use rounding::round_algorithm1;
pub use selection::{
    delivery_hops, relays_for, selection_objective, served_consults, verify_feasible, FeasibilityReport,
    NeighborSelection, BUDGET_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Multi-hop consultation on simple topologies.
    P2,
    /// Consultation within two hops on any topology.
    P3,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::P2 => "p2",
            Variant::P3 => "p3",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p2" => Ok(Variant::P2),
            "p3" => Ok(Variant::P3),
            _ => Err(Error::Parse(format!("unknown variant `{s}` (expected p2 or p3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    Algorithm1,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Exact => "exact",
            Method::Algorithm1 => "algorithm1",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(Method::Exact),
            "algorithm1" => Ok(Method::Algorithm1),
            _ => Err(Error::Parse(format!("unknown method `{s}` (expected exact or algorithm1)"))),
        }
    }
}

/// Per-node and network-wide energy per iteration; `+∞` means unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct Budgets {
    pub local: Vec<f64>,
    pub network: f64,
}

impl Budgets {
    pub fn unlimited(n: usize) -> Self {
        Budgets { local: vec![f64::INFINITY; n], network: f64::INFINITY }
    }

    pub fn network_only(n: usize, network: f64) -> Self {
        Budgets { local: vec![f64::INFINITY; n], network }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.local.len() != n {
            return Err(Error::Dimension(format!("{} local budgets for {n} nodes", self.local.len())));
        }
        for (k, &c) in self.local.iter().enumerate() {
            if c.is_nan() || c < 0.0 {
                return Err(Error::InvalidModel(format!("node {} has budget {c}", k + 1)));
            }
        }
        if self.network.is_nan() || self.network < 0.0 {
            return Err(Error::InvalidModel(format!("network budget {}", self.network)));
        }
        Ok(())
    }
}

/// A solved planning problem.
#[derive(Debug, Clone)]
pub struct Plan {
    pub variant: Variant,
    pub method: Method,
    pub selection: NeighborSelection,
    pub lp_bound: f64,
    pub nodes_explored: usize,
}

/// Builds the model for `variant` and solves it exactly or by rounding.
pub fn plan(variant: Variant, method: Method, net: &Network, gammas: &[f64], budgets: &Budgets) -> Result<Plan> {
    let model = build(variant, net, gammas, budgets)?;
    match method {
        Method::Exact => {
            let s = solve_milp(&model, net, budgets)?;
            let selection = cheapest_relays(&model, &s.selection, net)?;
            Ok(Plan { variant, method, selection, lp_bound: s.lp_bound, nodes_explored: s.nodes_explored })
        }
        Method::Algorithm1 => {
            let lp = solve_lp(&model, true)?;
            let selection = round_algorithm1(&lp.x, &model, net, budgets);
            Ok(Plan { variant, method, selection, lp_bound: lp.objective, nodes_explored: 0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::NodeSet;

    #[test]
    fn complete_graph_one_broadcast_each() {
        let net = Network::unit_cost(3, [(0, 1), (1, 2), (0, 2)], true).unwrap();
        let b = Budgets::network_only(3, 3.0);
        let p = plan(Variant::P3, Method::Exact, &net, &[1.0; 3], &b).unwrap();
        assert_eq!(p.selection.relays, (0..3).map(|k| NodeSet::from([k])).collect::<Vec<_>>());
        assert_eq!(p.selection.consults, vec![NodeSet::from([0, 1, 2]); 3]);
    }

    #[test]
    fn one_broadcast_per_node_excludes_two_hop() {
        let net = Network::unit_cost(3, [(0, 1), (1, 2)], true).unwrap();
        let b = Budgets { local: vec![1.0; 3], network: f64::INFINITY };
        let p = plan(Variant::P3, Method::Exact, &net, &[1.0; 3], &b).unwrap();
        assert!(!p.selection.delta(2, 0) && !p.selection.delta(0, 2));
        for k in 0..3 {
            assert_eq!(p.selection.consults[k], net.index().physical[k]);
        }
    }

    #[test]
    fn path_consult_forces_relays() {
        // node 1 may only be served node 3's estimate through node 2
        let net = Network::unit_cost(3, [(0, 1), (1, 2)], true).unwrap();
        let g = [100.0, 100.0, 0.01];
        let b = Budgets { local: vec![0.0, 1.0, 1.0], network: f64::INFINITY };
        let p = plan(Variant::P3, Method::Exact, &net, &g, &b).unwrap();
        assert!(p.selection.delta(2, 0));
        assert!(p.selection.pi(2, 1) && p.selection.pi(2, 2));
    }

    #[test]
    fn parse_names() {
        assert_eq!("P3".parse::<Variant>().unwrap(), Variant::P3);
        assert_eq!("algorithm1".parse::<Method>().unwrap(), Method::Algorithm1);
        assert!("p4".parse::<Variant>().is_err());
    }
}
