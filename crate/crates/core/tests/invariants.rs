mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use common::*;
use mediator_core::experiment::{run_campaign, run_source, ExperimentConfig, Mode, ModeSpec, SourceRun};
use mediator_core::geo::{haversine_m, GeoPoint};
use mediator_core::human::{giant_component_pct, AuthorizationMap, AuthorizationPolicy};
use mediator_core::metrics::{ci95, fmt_sig, mean_irn_pct, Averaging};
use mediator_core::protocol::propagate_vuip;
use mediator_core::siot::{mobile_of, KindSet, SiotView};
use mediator_core::trace::{detect_colocations, CheckIn, TraceCorpus};
use mediator_core::couple_randomness;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn reach(s: &mediator_core::Scenario, seed: u64, src: usize, mode: Mode, auth: f64, max_hops: u32) -> BTreeMap<usize, u32> {
    let n = s.n_users();
    let map = AuthorizationMap::new(
        Arc::new(couple_randomness(seed, 0, n, 2 * n)),
        AuthorizationPolicy::uniform(auth, 1.0).unwrap(),
    );
    run_source(s, src, INTEREST, mode, &[], &map, max_hops)
        .unwrap()
        .reached
        .into_iter()
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raising_authorization_only_adds_reach(seed in any::<u64>(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 30);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let mode = Mode::EnhancedSiot { kinds: random_kinds(&mut r) };
        for src in (0..s.n_users()).filter(|&u| s.interested(INTEREST)[u]) {
            let small = reach(&s, seed, src, mode, lo, 6);
            let big = reach(&s, seed, src, mode, hi, 6);
            prop_assert!(small.keys().all(|k| big.contains_key(k)));
        }
    }

    #[test]
    fn reached_nodes_are_interested_and_within_hops(seed in any::<u64>(), hops in 0u32..8) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 30);
        let interested = s.interested(INTEREST);
        for src in (0..s.n_users()).filter(|&u| s.interested(INTEREST)[u]) {
            let got = reach(&s, seed, src, Mode::EnhancedSiot { kinds: KindSet::all() }, 0.7, hops);
            prop_assert!(!got.contains_key(&src));
            for (&v, &h) in &got {
                prop_assert!(interested[v]);
                prop_assert!(h >= 1 && h <= hops);
            }
        }
    }

    #[test]
    fn friendships_never_exceed_enhanced(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 30);
        let kinds = random_kinds(&mut r);
        for src in (0..s.n_users()).filter(|&u| s.interested(INTEREST)[u]) {
            let f = reach(&s, seed, src, Mode::Friendships, 0.6, 6);
            let e = reach(&s, seed, src, Mode::EnhancedSiot { kinds }, 0.6, 6);
            prop_assert!(f.iter().all(|(k, h)| e.get(k).is_some_and(|he| he <= h)));
        }
    }

    #[test]
    fn flood_respects_ttl_and_grows_with_it(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 30);
        let n = s.n_users();
        let view = SiotView::new(&s.siot, KindSet::all(), None).unwrap();
        let auth = AuthorizationMap::new(
            Arc::new(couple_randomness(seed, 0, n, 2 * n)),
            AuthorizationPolicy::new(vec![1.0], random_probs(&mut r)).unwrap(),
        );
        let origin = mobile_of(r.gen_range(0..n));
        let mut prev = BTreeSet::new();
        for ttl in 1..=7 {
            let t = propagate_vuip(origin, &view, &auth, &s.vuips[origin / 2], ttl, seed, 0).unwrap();
            prop_assert!(t.hop.values().all(|&h| h >= 1 && h <= ttl));
            prop_assert!(!t.hop.contains_key(&origin));
            let now: BTreeSet<usize> = t.hop.keys().copied().collect();
            prop_assert!(prev.is_subset(&now));
            prev = now;
        }
    }

    #[test]
    fn giant_component_is_a_percentage_and_grows_with_edges(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 40);
        let members = s.interested(INTEREST);
        prop_assume!(members.contains(&true));
        let edges = s.users.edges();
        let g = giant_component_pct(&members, edges.iter().copied()).unwrap();
        prop_assert!(g > 0.0 && g <= 100.0);
        let mut more = edges.clone();
        more.extend(contacts_oracle(&s, KindSet::all(), INTEREST, &BTreeSet::new()));
        let g2 = giant_component_pct(&members, more.iter().copied()).unwrap();
        prop_assert!(g2 >= g);
        prop_assert!((g - giant_oracle(&members, &edges)).abs() < 1e-12);
    }

    #[test]
    fn mean_irn_ignores_run_order(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let runs: Vec<SourceRun> = (0..n)
            .map(|i| SourceRun {
                source: i % 7,
                mode: Mode::Friendships,
                point: 0,
                replicate: r.gen_range(0..4),
                reached: (0..r.gen_range(0..10usize)).map(|v| (v, 1)).collect(),
                denominator: 10,
            })
            .collect();
        for how in [Averaging::SourcesThenReplicates, Averaging::Pooled] {
            let (m, _) = mean_irn_pct(&runs, how).unwrap();
            let mut shuffled = runs.clone();
            shuffled.shuffle(&mut r);
            let (m2, _) = mean_irn_pct(&shuffled, how).unwrap();
            prop_assert!((m - m2).abs() < 1e-9);
            prop_assert!((0.0..=100.0).contains(&m));
        }
    }

    #[test]
    fn ci_is_non_negative_and_scale_invariant(v in prop::collection::vec(-1e3f64..1e3, 0..30)) {
        match ci95(&v) {
            None => prop_assert!(v.len() < 2),
            Some(c) => {
                prop_assert!(c >= 0.0);
                let shifted: Vec<f64> = v.iter().map(|x| x + 5.0).collect();
                prop_assert!((ci95(&shifted).unwrap() - c).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn fmt_sig_keeps_six_digits(x in -1e9f64..1e9) {
        let back: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs().max(1e-300));
    }

    #[test]
    fn haversine_is_a_metric(
        a in (-80.0f64..80.0, -179.0f64..179.0),
        b in (-80.0f64..80.0, -179.0f64..179.0),
        c in (-80.0f64..80.0, -179.0f64..179.0),
    ) {
        let p = |(lat, lon): (f64, f64)| GeoPoint::new(lat, lon).unwrap();
        let (a, b, c) = (p(a), p(b), p(c));
        let ab = haversine_m(a, b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - haversine_m(b, a)).abs() < 1e-6);
        prop_assert!(haversine_m(a, a) == 0.0);
        prop_assert!(haversine_m(a, c) <= ab + haversine_m(b, c) + 1e-6);
    }

    #[test]
    fn colocations_respect_thresholds(seed in any::<u64>(), n in 2usize..200) {
        let mut r = rng(seed);
        let cks: Vec<CheckIn> = (0..n)
            .map(|_| CheckIn {
                user_id: format!("u{}", r.gen_range(0..8)),
                timestamp: r.gen_range(0..10_000),
                location: GeoPoint::new(45.0 + r.gen_range(0.0..0.01), 9.0 + r.gen_range(0.0..0.01)).unwrap(),
                place_id: "p".into(),
            })
            .collect();
        let corpus = TraceCorpus::new(cks, BTreeSet::new());
        for c in detect_colocations(&corpus, 250.0, 1800) {
            prop_assert!(c.user_a < c.user_b);
            prop_assert!(c.dt_s >= 0 && c.dt_s <= 1800);
            prop_assert!(c.distance_m <= 250.0);
        }
    }

    #[test]
    fn increasing_policies_are_rejected(a in 0.0f64..1.0, d in 1e-6f64..0.5) {
        let b = (a + d).min(1.0);
        prop_assume!(b > a);
        prop_assert!(AuthorizationPolicy::new(vec![a, b], vec![1.0]).is_err());
        prop_assert!(AuthorizationPolicy::new(vec![1.0], vec![a, b]).is_err());
        prop_assert!(AuthorizationPolicy::new(vec![b, a], vec![b, a]).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn campaigns_are_reproducible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let s = random_scenario(&mut r, 30);
        prop_assume!(s.interested(INTEREST).contains(&true));
        let c = ExperimentConfig {
            modes: vec![ModeSpec::Friendships, ModeSpec::Enhanced],
            replicates: 3,
            seed,
            interest: INTEREST,
            auth_prob_per_hop: random_probs(&mut r),
            spread_prob_per_hop: random_probs(&mut r),
            ..Default::default()
        };
        let a = run_campaign(&c, &s).unwrap();
        let b = run_campaign(&c, &s).unwrap();
        prop_assert_eq!(&a.runs, &b.runs);
        prop_assert_eq!(&a.giant, &b.giant);
    }
}
