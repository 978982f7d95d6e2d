//! Property tests for the structural invariants: kernel exactness,
//! round-trips, entropy kernel inequalities and additivity.

mod common;

use crn_entropy::entropy::{phi, psi, relative_entropy, relative_entropy_to_average, SpatialField};
use crn_entropy::network::{conservation_structure, parse_network, Network, Reaction};
use crn_entropy::ratmat::Rat;
use ndarray::Array2;
use num::BigInt;
use proptest::prelude::*;

/// Builds a valid network from raw draws, or rejects the draw.
fn build_network(
    n: usize,
    complexes: Vec<Vec<u8>>,
    edges: Vec<(usize, usize)>,
    rates: Vec<f64>,
) -> Option<Network> {
    let complexes: Vec<Vec<Rat>> = complexes
        .into_iter()
        .map(|y| {
            y.into_iter()
                .map(|v| Rat::from_integer(BigInt::from(v)))
                .collect()
        })
        .collect();
    let reactions: Vec<Reaction> = edges
        .into_iter()
        .zip(rates)
        .map(|((a, b), rate)| Reaction {
            reactant: a % complexes.len(),
            product: b % complexes.len(),
            rate,
        })
        .collect();
    let species = (0..n).map(|i| format!("S{}", i + 1)).collect();
    Network::new(species, complexes, reactions, vec![1.0; n]).ok()
}

fn network_strategy() -> impl Strategy<Value = Network> {
    (2usize..=6)
        .prop_flat_map(|n| {
            let complex = proptest::collection::vec(0u8..=2, n);
            let complexes = proptest::collection::vec(complex, 2..=4);
            let edges = proptest::collection::vec((0usize..4, 0usize..4), 1..=8);
            let rates = proptest::collection::vec(0.1f64..5.0, 8);
            (Just(n), complexes, edges, rates)
        })
        .prop_filter_map("invalid network", |(n, complexes, edges, rates)| {
            build_network(n, complexes, edges, rates)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn psi_dominates_square_root_gap(x in 0.0f64..1e3, y in 1e-9f64..1e3) {
        let gap = (x.sqrt() - y.sqrt()).powi(2);
        prop_assert!(psi(x, y) + 1e-9 * (1.0 + gap) >= gap);
    }

    #[test]
    fn psi_vanishes_only_on_diagonal(x in 0.0f64..1e3, y in 1e-9f64..1e3) {
        prop_assert_eq!(psi(x, x), 0.0);
        if (x - y).abs() > 1e-3 * (1.0 + x.max(y)) {
            prop_assert!(psi(x, y) > 0.0);
        }
    }

    #[test]
    fn phi_is_monotone(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(phi(lo) <= phi(hi) + 1e-12);
    }

    #[test]
    fn parse_serialize_round_trip(net in network_strategy()) {
        // Parsing canonicalizes complex order (first appearance), so the
        // parse -> serialize -> parse composition must be a fixed point.
        let parsed = parse_network(&net.serialize()).unwrap();
        let reparsed = parse_network(&parsed.serialize()).unwrap();
        prop_assert_eq!(&parsed, &reparsed);
        // Semantics preserved: same species and reaction count, and the
        // mass-action field agrees on a reference state.
        prop_assert_eq!(parsed.species(), net.species());
        prop_assert_eq!(parsed.reactions().len(), net.reactions().len());
        let c: Vec<f64> = (1..=net.n_species()).map(|i| 0.3 + 0.2 * i as f64).collect();
        let ra = net.reaction_rates(&c).unwrap();
        let rb = parsed.reaction_rates(&c).unwrap();
        for (a, b) in ra.iter().zip(&rb) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn conservation_annihilates_rates(
        net in network_strategy(),
        raw in proptest::collection::vec(0.01f64..5.0, 6),
    ) {
        let cs = conservation_structure(&net);
        // Q W^T = 0 exactly, in rational arithmetic.
        prop_assert!(cs.q_matrix().mul_transpose(cs.wegscheider()).is_zero());
        // Rank-nullity: m + rank(W) = N.
        prop_assert_eq!(cs.codim() + cs.wegscheider().rank(), net.n_species());
        // |Q R(c)|_inf <= 1e-10 (1 + |R(c)|_inf) on random positive states.
        let c: Vec<f64> = raw.iter().take(net.n_species()).copied().collect();
        if c.len() == net.n_species() {
            let rates = net.reaction_rates(&c).unwrap();
            let r_inf = rates.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for row in cs.q_f64() {
                let dot: f64 = row.iter().zip(&rates).map(|(a, b)| a * b).sum();
                prop_assert!(dot.abs() <= 1e-10 * (1.0 + r_inf));
            }
        }
    }

    #[test]
    fn entropy_additivity(
        cells in proptest::collection::vec(0.01f64..4.0, 24),
        reference in proptest::collection::vec(0.05f64..3.0, 3),
    ) {
        let mut values = Array2::zeros((3, 8));
        for (k, v) in cells.iter().enumerate() {
            values[(k / 8, k % 8)] = *v;
        }
        let field = SpatialField::new(values).unwrap();
        let total = relative_entropy(&field, &reference).unwrap();
        let spatial = relative_entropy_to_average(&field);
        let avg = SpatialField::constant(&field.averages(), 1).unwrap();
        let average = relative_entropy(&avg, &reference).unwrap();
        prop_assert!((total - spatial - average).abs() <= 1e-9 * (1.0 + total.abs()));
        prop_assert!(spatial >= -1e-12);
        prop_assert!(average >= -1e-12);
    }

    #[test]
    fn entropy_zero_iff_at_reference(
        reference in proptest::collection::vec(0.05f64..3.0, 2),
        bump in 1e-6f64..1.0,
        cell in 0usize..8,
    ) {
        let exact = SpatialField::constant(&reference, 8).unwrap();
        prop_assert!(relative_entropy(&exact, &reference).unwrap().abs() <= 1e-12);

        let mut values = exact.values().clone();
        values[(0, cell)] += bump;
        let perturbed = SpatialField::new(values).unwrap();
        prop_assert!(relative_entropy(&perturbed, &reference).unwrap() > 0.0);
    }
}

#[test]
fn projection_keeps_constraint_residual_tiny() {
    use crn_entropy::constants::{fdi_evaluate, project_mu};
    use rand::Rng;
    use rand::SeedableRng;

    let net = parse_network(common::ENZYME_DOC).unwrap();
    let cs = conservation_structure(&net);
    let c_inf = [1.0; 4];
    let q = cs.q_f64();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(404);
    let mut projected = 0;
    while projected < 2000 {
        let mu0: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let Ok(mu) = project_mu(&q, &c_inf, &mu0) else {
            continue;
        };
        projected += 1;
        let point = fdi_evaluate(&net, &cs, &c_inf, &mu).unwrap();
        assert!(point.constraint_residual <= 1e-12);
    }
}
