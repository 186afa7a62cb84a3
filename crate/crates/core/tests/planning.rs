mod common;

use common::{enumerate_optimum, random_budgets, random_gammas, random_graph, random_tree};
use mhdiff_core::optimizer::{
    build, plan, round_algorithm1, solve_lp, verify_feasible, Budgets, Method, NeighborSelection, Variant,
};
use mhdiff_core::topology::Network;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, variant: Variant) -> (Network, Vec<f64>, Budgets) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=5);
    let net = match variant {
        Variant::P2 => random_tree(n, &mut rng),
        Variant::P3 => random_graph(n, 0.5, &mut rng),
    };
    let gammas = random_gammas(n, &mut rng);
    let budgets = random_budgets(&net, &mut rng);
    (net, gammas, budgets)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

#[test]
fn exact_matches_enumeration() {
    for variant in [Variant::P2, Variant::P3] {
        for seed in 0..40 {
            let (net, gammas, budgets) = instance(seed, variant);
            let exact = plan(variant, Method::Exact, &net, &gammas, &budgets).unwrap();
            let oracle = enumerate_optimum(&net, &gammas, &budgets, variant);
            assert!(
                close(exact.selection.objective, oracle),
                "{variant} seed {seed}: {} vs {oracle}",
                exact.selection.objective
            );
            assert!(verify_feasible(&exact.selection, &net, &budgets, variant).is_feasible());
        }
    }
}

#[test]
fn unlimited_budgets_consult_every_candidate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for variant in [Variant::P2, Variant::P3] {
        let net = match variant {
            Variant::P2 => random_tree(6, &mut rng),
            Variant::P3 => random_graph(6, 0.4, &mut rng),
        };
        let gammas = random_gammas(6, &mut rng);
        let p = plan(variant, Method::Exact, &net, &gammas, &Budgets::unlimited(6)).unwrap();
        let candidates = match variant {
            Variant::P2 => &net.index().multi_hop,
            Variant::P3 => &net.index().two_hop,
        };
        assert_eq!(&p.selection.consults, candidates);
    }
}

#[test]
fn objective_scales_with_variances_and_selection_is_unchanged() {
    for seed in 0..20 {
        let variant = if seed % 2 == 0 { Variant::P2 } else { Variant::P3 };
        let (net, gammas, budgets) = instance(100 + seed, variant);
        let base = plan(variant, Method::Exact, &net, &gammas, &budgets).unwrap().selection;
        for alpha in [0.5f64, 2.0, 10.0] {
            let scaled: Vec<f64> = gammas.iter().map(|g| g * alpha * alpha).collect();
            let s = plan(variant, Method::Exact, &net, &scaled, &budgets).unwrap().selection;
            assert_eq!(s.consults, base.consults, "seed {seed} alpha {alpha}");
            assert_eq!(s.relays, base.relays, "seed {seed} alpha {alpha}");
            assert!(close(s.objective, base.objective * alpha * alpha));
        }
    }
}

#[test]
fn budget_sweep_is_monotone_between_diagonal_and_full() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = random_tree(6, &mut rng);
    let gammas = random_gammas(6, &mut rng);
    let total: f64 = net.broadcast_costs().iter().sum::<f64>() * 6.0;
    let mut last = f64::INFINITY;
    let steps = 24;
    for i in 0..=steps {
        let b = total * i as f64 / steps as f64;
        let s = plan(Variant::P2, Method::Exact, &net, &gammas, &Budgets::network_only(6, b)).unwrap().selection;
        assert!(s.objective <= last * (1.0 + 1e-12), "budget {b}");
        if i == 0 {
            assert!(close(s.objective, NeighborSelection::non_cooperative(&net, &gammas).objective));
        }
        last = s.objective;
    }
    let full = NeighborSelection::from_consults(net.index().multi_hop.clone(), &net, &gammas);
    assert!(close(last, full.objective));
}

#[test]
fn local_budgets_are_respected_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = random_graph(5, 0.6, &mut rng);
    let gammas = random_gammas(5, &mut rng);
    let mut last = f64::INFINITY;
    for units in 0..5 {
        let local: Vec<f64> = (0..5).map(|k| net.broadcast_cost(k) * units as f64).collect();
        let budgets = Budgets { local, network: f64::INFINITY };
        let s = plan(Variant::P3, Method::Exact, &net, &gammas, &budgets).unwrap().selection;
        assert!(verify_feasible(&s, &net, &budgets, Variant::P3).is_feasible());
        assert!(s.objective <= last * (1.0 + 1e-12));
        last = s.objective;
    }
}

#[test]
fn three_chain_two_hop_consultation_needs_both_relays() {
    let net = Network::unit_cost(3, [(0, 1), (1, 2)], true).unwrap();
    let gammas = [1.0, 50.0, 0.01];
    let budgets = Budgets::network_only(3, 2.0);
    let s = plan(Variant::P3, Method::Exact, &net, &gammas, &budgets).unwrap().selection;
    assert!(s.delta(2, 0));
    assert!(s.pi(2, 2) && s.pi(2, 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn relaxation_exact_rounding_and_diagonal_are_ordered(seed in any::<u64>(), p3 in any::<bool>()) {
        let variant = if p3 { Variant::P3 } else { Variant::P2 };
        let (net, gammas, budgets) = instance(seed, variant);
        let model = build(variant, &net, &gammas, &budgets).unwrap();
        let lp = solve_lp(&model, true).unwrap();
        let rounded = round_algorithm1(&lp.x, &model, &net, &budgets);
        prop_assert!(verify_feasible(&rounded, &net, &budgets, variant).is_feasible());
        let exact = plan(variant, Method::Exact, &net, &gammas, &budgets).unwrap().selection;
        let diagonal = NeighborSelection::non_cooperative(&net, &gammas).objective;
        let slack = 1e-9 * diagonal;
        prop_assert!(lp.objective <= exact.objective + slack);
        prop_assert!(exact.objective <= rounded.objective + slack);
        prop_assert!(rounded.objective <= diagonal + slack);
    }

    #[test]
    fn self_consultation_always_holds(seed in any::<u64>()) {
        let (net, gammas, budgets) = instance(seed, Variant::P3);
        let s = plan(Variant::P3, Method::Exact, &net, &gammas, &budgets).unwrap().selection;
        for (k, set) in s.consults.iter().enumerate() {
            prop_assert!(set.contains(&k));
        }
    }
}
