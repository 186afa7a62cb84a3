//! Regenerated experiment networks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datamodel::{synth_profiles, GlobalModel, SynthKind, SynthParams};
use crate::error::{Error, Result};
use crate::topology::Network;

/// Undirected 8-node tree with three internal nodes: one-hop diffusion
/// costs 8 broadcasts and full consultation 29, with unit costs.
pub fn tree8_network() -> Network {
    let edges = [(0, 1), (1, 2), (2, 3), (2, 4), (4, 5), (4, 6), (1, 7)];
    Network::unit_cost(8, edges, true).expect("static tree is valid")
}

/// Connected random geometric graph: `n` nodes uniform in a `side × side`
/// square, linked when closer than `radius`, with squared-distance costs
/// scaled by `cost_scale`. Redraws until connected.
pub fn random_geometric_network<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    side: f64,
    radius: f64,
    cost_scale: f64,
) -> Result<Network> {
    if n == 0 || !(side > 0.0) || !(radius > 0.0) {
        return Err(Error::InvalidNetwork("random geometric graph needs n > 0, side > 0, radius > 0".into()));
    }
    for _ in 0..10_000 {
        let coords: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side]).collect();
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let d2 = (coords[a][0] - coords[b][0]).powi(2) + (coords[a][1] - coords[b][1]).powi(2);
                if d2 < radius * radius {
                    edges.push((a, b));
                }
            }
        }
        let net = Network::unit_cost(n, edges, true)?;
        if net.hop_distances(0).iter().all(Option::is_some) {
            return net.with_coordinates(coords)?.with_squared_distance_costs(cost_scale);
        }
    }
    Err(Error::InvalidNetwork(format!("no connected graph found for n = {n}, radius = {radius}")))
}

/// Tree network with regenerated profiles (`M = 3`, `ω^o = 1/√3`).
pub fn tree_scenario(seed: u64) -> (Network, GlobalModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = tree8_network();
    let model = synth_profiles(SynthKind::Tree, &mut rng, &SynthParams::new(8));
    (net, model)
}

/// 20-node random network in a 10 × 10 area with regenerated profiles
/// (`M = 2`, `ω^o = 1/√2`).
pub fn random_scenario(seed: u64) -> (Network, GlobalModel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = random_geometric_network(&mut rng, 20, 10.0, 3.5, 1.0).expect("radius 3.5 connects 20 nodes quickly");
    let model = synth_profiles(SynthKind::Random, &mut rng, &SynthParams::new(20));
    (net, model)
}
