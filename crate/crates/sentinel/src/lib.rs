//! Recovery of Markov chain stationary distributions from adversarially
//! corrupted transition matrices, with certified total-variation bounds.
//!
//! The attack model: an adversary hands you a transition matrix `Q` that
//! differs from the true chain `P` by at most `eps` in the pi-weighted l1
//! sense, `sum_x pi(x) ||P(x,.) - Q(x,.)||_1 <= eps`, where `pi` is the
//! stationary distribution of `P`. Tiny budgets buy catastrophic damage:
//! one absorbing row in a fast-mixing chain costs `O(1/n)` yet drags the
//! naive stationary distribution to a point mass. The defense: run PageRank
//! on `Q`. The restart chain `(1 - delta) Q + delta 1^T mu` forgets the
//! corruption at rate `delta`, and for the tuned `delta` its stationary
//! distribution lands provably close to `pi`, with a bound this crate
//! computes and checks numerically rather than takes on faith.
//!
//! Modules, bottom up:
//!
//! - [`chain`]: validated row-stochastic matrices, stationary solvers,
//!   pi-weighted norms, smoothness, adjoints, corruption measurement.
//! - [`spectral`]: the L2(pi) spectral gap via singular values, plus
//!   checkers for the mixing and coupling inequalities.
//! - [`pagerank`]: restart chains, three stationary solvers, damping
//!   tuning, and the closeness/contraction checkers.
//! - [`adversary`]: corruption constructors and the analytic test chains
//!   (star pairs, product chains, lazy families).
//! - [`recovery`]: the end-to-end estimator with its certified bound.
//! - [`harness`]: experiment sweeps over corruption budgets, CSV output,
//!   and the randomized verify suites the CLI exposes.
//! - [`io`]: JSON file formats for chains and distributions.
//!
//! Every inequality the crate certifies has a checker that reports
//! `(lhs, rhs, holds)` as data. Runnable walkthroughs live in `examples/`:
//! start with `two_state_stationary`, then `absorbing_attack` and
//! `certified_recovery`.

#![forbid(unsafe_code)]
#![deny(missing_docs)]

pub mod adversary;
pub mod chain;
pub mod error;
pub mod harness;
pub mod io;
pub mod pagerank;
pub mod recovery;
pub mod spectral;

pub use chain::{Dist, MarkovChain, StationaryMethod, WeightedFn};
pub use error::{Error, Result};
