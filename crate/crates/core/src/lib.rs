//! Solvers for stochastic lp load balancing on unrelated machines and for
//! subset selection with a p-moment objective.
//!
//! The central tool is the L-function `nu_{eps,p}(X) = (1/p) ln E(1 + X/eps)^p`,
//! a separable proxy for the p-moment of a sum of independent non-negative
//! random variables: the scale `eps*` at which the nu-masses of a family sum
//! to one pins `E S^p` within constant factors. The load-balancing pipeline
//! turns this into linear constraints: truncate jobs, write a multi-scale
//! relaxation with capped-nu rows and subset-indexed effective-size rows
//! (handled by a separation oracle), reduce it to one scale per machine, and
//! round the result as a generalized assignment instance with the classic
//! Shmoys-Tardos matching construction. Subset selection reduces to one
//! linear-optimization oracle call per estimate of the optimum.
//!
//! Modules:
//! - [`dist`]: finite-support distributions and the scalar functionals.
//! - [`moment`]: exact convolution, exact/Monte-Carlo norms, `eps*`.
//! - [`lp`]: bounded-variable simplex with a cutting-plane loop.
//! - [`balance`]: the load-balancing pipeline end-to-end.
//! - [`gap`]: generalized-assignment rounding and its guarantees.
//! - [`select`]: p-moment subset selection via linear oracles.
//! - [`verify`]: the inequality suites the method rests on.
//! - [`instance`], [`brute`]: file formats, generators, brute-force baselines.

pub mod balance;
pub mod brute;
pub mod dist;
pub mod error;
pub mod gap;
pub mod instance;
pub mod lp;
pub mod moment;
pub mod select;
pub mod verify;

pub use balance::{
    FractionalAssignment, IntegralAssignment, LbInstance, ReducedParams, SolveReport, SolverConfig,
};
pub use dist::{DiscreteDist, PNorm};
pub use error::{Error, Result};
pub use gap::GapInstance;
pub use lp::{Constraint, LinearProgram, LpSolution, LpStatus, Relation, Sense, VarId};
pub use moment::{MachineLoads, McEstimate};
