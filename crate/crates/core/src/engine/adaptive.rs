//! Distributed relay selection with adaptive balancing weights.

use crate::topology::{Network, NodeSet};
use crate::weights::adaptive_weights;

/// An intermediate estimate as seen by a receiving node.
#[derive(Debug, Clone, Copy)]
pub struct Message<'a> {
    pub origin: usize,
    /// Hops travelled; 0 for the node's own estimate.
    pub hop: usize,
    pub psi: &'a [f64],
    /// Composite variance estimate carried with `psi`.
    pub gamma: f64,
}

/// What a node transmits in one iteration.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelayDecision {
    pub own: bool,
    /// Origins the node will forward, best first.
    pub relay: Vec<usize>,
}

impl RelayDecision {
    pub fn relays(&self, origin: usize) -> bool {
        self.relay.contains(&origin)
    }
}

/// Number of broadcasts a budget pays for; unbounded capacity is capped at
/// `cap`.
pub fn broadcast_capacity(budget: f64, cost: f64, cap: usize) -> usize {
    if cost <= 0.0 || budget.is_infinite() {
        return cap;
    }
    ((budget / cost + 1e-9).floor().max(0.0) as usize).min(cap)
}

/// Own broadcast first, then the remaining capacity goes to the origins
/// with the smallest variance received last iteration. Only messages that
/// arrived with fewer than `h` hops may be forwarded. Ties go to the lowest
/// origin index.
pub fn relay_decision(node: usize, previous: &[(usize, usize, f64)], capacity: usize, h: usize) -> RelayDecision {
    if capacity == 0 {
        return RelayDecision::default();
    }
    let mut cands: Vec<(usize, f64)> =
        previous.iter().filter(|&&(l, hop, _)| l != node && hop < h).map(|&(l, _, g)| (l, g)).collect();
    cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    cands.dedup_by_key(|c| c.0);
    let relay = cands.into_iter().take(capacity - 1).map(|(l, _)| l).collect();
    RelayDecision { own: true, relay }
}

/// Adaptive balancing combination of the node's own estimate and its inbox.
pub fn combine(own: Message<'_>, inbox: &[Message<'_>], out: &mut [f64]) {
    let gammas: Vec<f64> = std::iter::once(own.gamma).chain(inbox.iter().map(|m| m.gamma)).collect();
    let w = adaptive_weights(&gammas);
    out.fill(0.0);
    for (msg, wl) in std::iter::once(&own).chain(inbox).zip(w) {
        for (o, p) in out.iter_mut().zip(msg.psi) {
            *o += wl * p;
        }
    }
}

/// One node's step: broadcast decisions from last iteration's inbox, and
/// the combined estimate from this iteration's messages within `h` hops.
pub fn algorithm2_step(
    own: Message<'_>,
    received: &[Message<'_>],
    previous: &[(usize, usize, f64)],
    capacity: usize,
    h: usize,
) -> (RelayDecision, Vec<f64>) {
    let decision = relay_decision(own.origin, previous, capacity, h);
    let inbox: Vec<Message<'_>> = received.iter().copied().filter(|m| m.hop >= 1 && m.hop <= h).collect();
    let mut out = vec![0.0; own.psi.len()];
    combine(own, &inbox, &mut out);
    (decision, out)
}

/// Floods every origin's estimate through the nodes whose decisions carry
/// it. Returns `hops[l * n + k]` (0 = not delivered, `l == k` excluded) and
/// the number of broadcasts each node performs.
pub fn flood(net: &Network, decisions: &[RelayDecision], h: usize, hops: &mut [u8], broadcasts: &mut [usize]) {
    let n = net.node_count();
    hops.fill(0);
    broadcasts.fill(0);
    let mut queue = std::collections::VecDeque::new();
    let mut seen = vec![false; n];
    for l in 0..n {
        if !decisions[l].own {
            continue;
        }
        seen.fill(false);
        seen[l] = true;
        queue.clear();
        queue.push_back((l, 0usize));
        while let Some((r, hop)) = queue.pop_front() {
            let sends = r == l || (hop < h && decisions[r].relays(l));
            if !sends {
                continue;
            }
            broadcasts[r] += 1;
            for &v in net.out_neighbors(r) {
                if !seen[v] {
                    seen[v] = true;
                    hops[l * n + v] = (hop + 1) as u8;
                    queue.push_back((v, hop + 1));
                }
            }
        }
    }
}

/// Static delivery of a relay plan in the same layout as [`flood`].
pub fn plan_delivery(net: &Network, relays: &[NodeSet], hops: &mut [u8], broadcasts: &mut [usize]) {
    let n = net.node_count();
    hops.fill(0);
    for l in 0..n {
        for (k, d) in crate::optimizer::delivery_hops(net, relays, l).into_iter().enumerate() {
            if k != l {
                if let Some(d) = d {
                    hops[l * n + k] = d.min(u8::MAX as usize) as u8;
                }
            }
        }
    }
    for (b, r) in broadcasts.iter_mut().zip(relays) {
        *b = r.len();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_budget_stays_silent() {
        let d = relay_decision(0, &[(1, 1, 0.1)], 0, 2);
        assert!(!d.own && d.relay.is_empty());
    }

    #[test]
    fn smallest_variances_relayed_first() {
        let prev = [(3, 1, 0.5), (1, 1, 0.2), (2, 1, 0.2), (4, 2, 0.01)];
        let d = relay_decision(0, &prev, 3, 2);
        // origin 4 arrived at the hop limit and cannot be forwarded
        assert_eq!(d, RelayDecision { own: true, relay: vec![1, 2] });
        let all = relay_decision(0, &prev, 10, 3);
        assert_eq!(all.relay, vec![4, 1, 2, 3]);
    }

    #[test]
    fn capacity_rounding() {
        assert_eq!(broadcast_capacity(2.0, 1.0, 10), 2);
        assert_eq!(broadcast_capacity(1.999_999_999_9, 1.0, 10), 2);
        assert_eq!(broadcast_capacity(0.5, 1.0, 10), 0);
        assert_eq!(broadcast_capacity(f64::INFINITY, 1.0, 10), 10);
        assert_eq!(broadcast_capacity(3.0, 0.0, 10), 10);
    }

    #[test]
    fn flood_respects_hop_limit() {
        let net = Network::unit_cost(4, [(0, 1), (1, 2), (2, 3)], true).unwrap();
        let mut dec = vec![RelayDecision { own: true, relay: vec![] }; 4];
        dec[1].relay = vec![0];
        dec[2].relay = vec![0];
        let mut hops = vec![0u8; 16];
        let mut b = vec![0; 4];
        flood(&net, &dec, 2, &mut hops, &mut b);
        assert_eq!(&hops[0..4], &[0, 1, 2, 0]);
        // node 3 received origin 1 at the hop limit, so it does not forward
        assert_eq!(b, vec![1, 2, 1, 1]);
    }

    #[test]
    fn combine_uniform_before_warm_up() {
        let a = [1.0, 0.0];
        let b = [0.0, 1.0];
        let own = Message { origin: 0, hop: 0, psi: &a, gamma: 0.0 };
        let (dec, w) = algorithm2_step(own, &[Message { origin: 1, hop: 1, psi: &b, gamma: 0.3 }], &[], 1, 1);
        assert!(dec.own);
        assert_eq!(w, vec![0.5, 0.5]);
    }
}
