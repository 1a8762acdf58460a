//! Exact simulation of shallow linear-optical boson samplers, parity
//! coarse-graining of Fock measurement patterns into bit strings, a
//! variational bosonic solver for QUBO/Ising/portfolio problems, and the
//! lattice-path combinatorics (Dyck paths, Young's lattices, Catalan Hilbert
//! spaces) describing which patterns a sliced Reck mesh can reach.

pub mod cascade;
pub mod error;
pub mod fock;
pub mod interferometer;
pub mod lattice;
pub mod parity;
pub mod problems;
pub mod rng;
pub mod solver;

pub use cascade::CascadeSampler;
pub use error::{Error, Result};
pub use fock::{binomial, enumerate_basis, DetectionPattern, SectorBasis};
pub use interferometer::{
    apply_gate, build_reck_slices, evolve, exact_distribution, schwinger_expectation, standard_input, CircuitSpec,
    PatternDistribution, QuantumState, TwoModeGate,
};
pub use lattice::{
    catalan_basis, count_boolean_sublattices, dyck_count, enumerate_dyck_paths, ferrers_to_pattern,
    ordinal_sum_decomposition, young_lattice, BooleanDefinition, BoxBitString, DyckSpec, ExtendedFerrers, YoungLattice,
};
pub use parity::{
    coarse_grain, parity_map, upsilon0, upsilon0_prime, verify_surjectivity, BitString, BitStringDistribution,
    CoverageReport, ParityBitString,
};
pub use problems::{IsingProblem, MobiusProblem, PortfolioApproach, PortfolioProblem, ProblemSpec, QuboProblem};
pub use solver::{run_variational, Sampling, SolverConfig, SolverResult};
