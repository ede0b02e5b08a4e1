use lattice_simplex::Tolerances;

/// Every numerical threshold used by the library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub lp: Tolerances,
    /// Largest state graph `enumerate_reachable` will build.
    pub state_cap: usize,
    /// Mass below which a state is not part of a support.
    pub support: f64,
    /// Arrival mass below which a state counts as unreached.
    pub arrival: f64,
    /// Per-atom tolerance for marginal equality.
    pub marginal: f64,
    /// Relative duality-gap tolerance, scaled by `1 + |objective|`.
    pub gap: f64,
    /// Tolerance for dual feasibility and complementary slackness.
    pub certificate: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            lp: Tolerances::default(),
            state_cap: 2_000_000,
            support: 1e-9,
            arrival: 1e-12,
            marginal: 1e-9,
            gap: 1e-8,
            certificate: 1e-8,
        }
    }
}
