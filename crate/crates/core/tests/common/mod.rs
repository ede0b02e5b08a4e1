//! Problem instances shared by the integration tests.

#![allow(dead_code)]

use skorokhod::costs::{
    azema_yor_cost, cave_cost, jacka_cost, perkins_cost, range_cost, root_cost, rost_cost, vallois_cost, PairFn,
    ValloisDirection,
};
use skorokhod::{CostFunctional, DiscreteMeasure, EmbeddingProblem, Feature, LatticeSpec, ScalarFn};

pub fn m(atoms: &[(i64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::new(atoms.to_vec()).unwrap()
}

pub fn five() -> DiscreteMeasure {
    m(&[(-3, 0.15), (-1, 0.2), (0, 0.3), (1, 0.2), (3, 0.15)])
}

pub fn four() -> DiscreteMeasure {
    m(&[(-2, 0.25), (-1, 0.25), (1, 0.25), (2, 0.25)])
}

pub fn skew() -> DiscreteMeasure {
    m(&[(-3, 0.2), (-1, 0.3), (1, 0.3), (2, 0.1), (4, 0.1)])
}

pub fn pm() -> DiscreteMeasure {
    m(&[(-1, 0.5), (1, 0.5)])
}

pub fn quarter() -> DiscreteMeasure {
    m(&[(-2, 0.25), (0, 0.5), (2, 0.25)])
}

/// Every cost of the catalog, by name.
pub const CATALOG: [&str; 9] =
    ["root", "rost", "cave", "azema_yor", "jacka", "perkins", "range", "vallois_min", "vallois_max"];

pub fn features(name: &str) -> &'static [Feature] {
    match name {
        "azema_yor" => &[Feature::Max],
        "jacka" | "perkins" | "range" => &[Feature::Max, Feature::Min],
        "vallois_min" | "vallois_max" => &[Feature::ZeroVisits],
        _ => &[],
    }
}

pub fn cost(name: &str, spec: &LatticeSpec) -> CostFunctional {
    match name {
        "root" => root_cost(spec, ScalarFn::Square),
        "root_cube" => root_cost(spec, ScalarFn::Cube),
        "rost" => rost_cost(spec, ScalarFn::Sqrt),
        "cave" => cave_cost(spec, 3, None),
        "azema_yor" => azema_yor_cost(spec),
        "jacka" => jacka_cost(spec, ScalarFn::Saturating),
        "perkins" => perkins_cost(spec, PairFn::SaturatingSum, PairFn::SaturatingSum),
        "range" => range_cost(spec, PairFn::SaturatingSum, PairFn::SaturatingSum),
        "vallois_min" => vallois_cost(spec, ScalarFn::Sqrt, ValloisDirection::Minimize),
        "vallois_max" => vallois_cost(spec, ScalarFn::Sqrt, ValloisDirection::Maximize),
        other => panic!("unknown cost {other}"),
    }
    .unwrap()
}

pub fn problem(
    name: &str,
    steps: usize,
    step_size: f64,
    start: DiscreteMeasure,
    target: DiscreteMeasure,
) -> EmbeddingProblem {
    let spec = LatticeSpec::symmetric(steps, step_size).with_tracked(features(name));
    let c = cost(name, &spec);
    let secondary = c.has_secondary();
    EmbeddingProblem::new(spec, start, target, c).with_secondary(secondary)
}

pub struct Instance {
    pub label: String,
    pub problem: EmbeddingProblem,
}

/// The acceptance battery. Horizons are chosen so that every level the walk
/// can occupy at the last step, inside the target's hull, is a target level;
/// otherwise the horizon, not the cost, shapes the optimizer.
pub fn battery() -> Vec<Instance> {
    let d0 = DiscreteMeasure::dirac(0);
    let rows: Vec<(&str, usize, DiscreteMeasure, DiscreteMeasure, &str)> = vec![
        ("root", 3, d0.clone(), pm(), "pm"),
        ("root", 4, d0.clone(), quarter(), "quarter"),
        ("azema_yor", 4, d0.clone(), pm(), "pm"),
        ("root", 40, d0.clone(), five(), "five"),
        ("root", 40, d0.clone(), skew(), "skew"),
        ("root_cube", 40, d0.clone(), five(), "five"),
        ("root", 41, pm(), five(), "five from pm"),
        ("rost", 31, d0.clone(), five(), "five"),
        ("rost", 31, d0.clone(), four(), "four"),
        ("cave", 30, d0.clone(), five(), "five"),
        ("cave", 40, d0.clone(), skew(), "skew"),
        ("azema_yor", 17, d0.clone(), five(), "five"),
        ("azema_yor", 24, d0.clone(), skew(), "skew"),
        ("jacka", 17, d0.clone(), five(), "five"),
        ("jacka", 17, d0.clone(), four(), "four"),
        ("perkins", 17, d0.clone(), four(), "four"),
        ("perkins", 17, d0.clone(), five(), "five"),
        ("range", 15, d0.clone(), five(), "five"),
        ("range", 15, d0.clone(), four(), "four"),
        ("vallois_min", 17, d0.clone(), five(), "five"),
        ("vallois_min", 17, d0.clone(), four(), "four"),
        ("vallois_max", 17, d0.clone(), five(), "five"),
        ("vallois_max", 17, d0, four(), "four"),
    ];
    rows.into_iter()
        .map(|(name, n, start, target, tag)| {
            let spec = LatticeSpec::symmetric(n, 1.0).with_tracked(features(name));
            let c = cost(name, &spec);
            let secondary = c.has_secondary();
            Instance {
                label: format!("{name} N={n} {tag}"),
                problem: EmbeddingProblem::new(spec, start, target, c).with_secondary(secondary),
            }
        })
        .collect()
}
