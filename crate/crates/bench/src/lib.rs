//! Shared fixtures for the benchmarks in `benches/`.

use gexp_core::{build_lattice, CylinderFunctional, GParams, Lattice, PayoffExpr};

pub fn lattice(n_steps: usize, sigma_refinement: usize) -> Lattice {
    build_lattice(1.0, n_steps, &GParams::default(), sigma_refinement).expect("default band builds")
}

pub fn terminal(text: &str) -> CylinderFunctional {
    CylinderFunctional::terminal(1.0, PayoffExpr::parse(text).expect("payoff parses")).expect("terminal functional")
}
