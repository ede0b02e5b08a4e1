mod common;

use std::sync::Arc;

use proptest::prelude::*;
use skorokhod::barriers::{extract_barrier, hitting_rst};
use skorokhod::lattice::enumerate_reachable;
use skorokhod::optsep::{certificate_check, verify_monotonicity};
use skorokhod::{solve, DiscreteMeasure, LatticeSpec, RandomizedStoppingTime};

/// Law of the rule with the given per-state stop probabilities, recycled
/// over the graph; always embeddable.
fn target_of(steps: usize, probs: &[f64]) -> DiscreteMeasure {
    let spec = LatticeSpec::symmetric(steps, 1.0);
    let g = Arc::new(enumerate_reachable(&spec, &DiscreteMeasure::dirac(0), 1 << 16).unwrap());
    let p = (0..g.len()).map(|v| if g.is_terminal(v) { 1.0 } else { probs[v % probs.len()] }).collect();
    let law = RandomizedStoppingTime::from_stop_probabilities(g, p).unwrap().pushforward_law();
    DiscreteMeasure::new(law.atoms().iter().copied().filter(|&(_, w)| w > 1e-12).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn optimizers_embed_certify_and_have_regions(
        cost in prop::sample::select(vec!["root", "rost", "cave", "azema_yor", "vallois_max"]),
        steps in 3usize..=8,
        probs in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..1.0f64], 1..12),
    ) {
        let target = target_of(steps, &probs);
        // Atoms below the solver's feasibility tolerance are not resolved.
        prop_assume!(target.atoms().iter().all(|&(_, w)| w >= 1e-6));
        let p = common::problem(cost, steps, 1.0, DiscreteMeasure::dirac(0), target.clone());
        let sol = solve(&p).unwrap();
        prop_assert!(sol.xi.pushforward_law().max_atom_difference(&target) <= 1e-9);
        prop_assert!((sol.xi.expected_time() - target.variance(1.0)).abs() <= 1e-9);
        let report = certificate_check(&sol, &p).unwrap();
        prop_assert!(report.passed(), "{report:?}");
        prop_assert!(verify_monotonicity(&sol.xi, &p.cost).passed());
        // Short horizons can bind, so the region may be refused, but a
        // region that is returned must reproduce the solution.
        if let Ok(b) = extract_barrier(&sol, &p) {
            let back = hitting_rst(&b, &p.spec, &p.start).unwrap();
            prop_assert!(back.joint_law_distance(&sol.xi) <= 1e-9);
        }
    }

    #[test]
    fn root_regions_exist_for_every_target(
        steps in 3usize..=10,
        probs in prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..1.0f64], 1..12),
    ) {
        let target = target_of(steps, &probs);
        let p = common::problem("root", steps, 1.0, DiscreteMeasure::dirac(0), target);
        let sol = solve(&p).unwrap();
        let b = extract_barrier(&sol, &p).unwrap();
        let back = hitting_rst(&b, &p.spec, &p.start).unwrap();
        prop_assert!(back.joint_law_distance(&sol.xi) <= 1e-9);
    }
}
