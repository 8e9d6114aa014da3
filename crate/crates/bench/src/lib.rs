//! Shared fixtures for the benchmarks in `benches/`.

use std::collections::BTreeMap;

use mediator_core::siot::RelationshipKind;
use mediator_core::{generate_synthetic, Scenario, SyntheticScenarioSpec};

/// Sparse multi-community scenario of `communities * per` users.
pub fn community_scenario(communities: usize, per: usize, seed: u64) -> Scenario {
    generate_synthetic(&SyntheticScenarioSpec {
        communities,
        nodes_per_community: per,
        intra_friend_prob: 3.0 / per as f64,
        intra_siot_prob: 2.0 / per as f64,
        cross_edges: BTreeMap::from([
            (RelationshipKind::Por, communities + communities / 2),
            (RelationshipKind::Clor, communities),
            (RelationshipKind::Sor, communities),
        ]),
        interest_fraction: 0.5,
        secondary_prob: 0.3,
        seed,
        ..Default::default()
    })
    .expect("valid spec")
}
