//! Reference laws, the exact enumeration oracle and error metrics.

pub mod generators;
pub mod metrics;
pub mod oracle;

pub use generators::{generate, true_density, Component, Factor, Generated, GeneratorName, GeneratorSpec, Mixture};
pub use metrics::{l1_distance, L1Distance};
pub use oracle::{brute_force_phi, oracle_check, ExactPhi, OracleReport, ORACLE_TOLERANCE};
