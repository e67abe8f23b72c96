//! Dense linear systems `Ax = b` solved by the Triangle Algorithm on the
//! ellipsoid `{Ax : |x| <= r}`, with reference baselines, test instance
//! generators and an experiment harness.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod membership;
pub mod mm;
pub mod oracles;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use linalg::{DenseMatrix, Vector};
pub use membership::{run_membership, run_membership_with, MembershipConfig, MembershipResult, MembershipTag, PivotMode};
pub use solver::{solve, solve_with, OutcomeTag, SolveOutcome, SolverConfig};
