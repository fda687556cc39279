//! Safe-learning control: keep an uncertain system inside half-plane safety
//! constraints while its process-noise distribution is learned online.
//!
//! The setting is a discrete-time control-affine system
//!
//! ```text
//! x_{t+1} = f(x_t) + g(x_t) u_t + w_t
//! ```
//!
//! whose additive process noise `w_t` has unknown mean and covariance. At
//! every step a nominal controller proposes an input `ū_t`; the toolkit
//! minimally modifies it (in the least-squares sense) so that the next state
//! satisfies half-plane safety constraints `H_{t+1} x_{t+1} ≤ h_{t+1}` with
//! probability at least `1 − δ`. The guarantees are finite-sample: they hold
//! at every time step given the number of residuals observed so far, not just
//! asymptotically.
//!
//! The pipeline, module by module:
//!
//! - [`model`]: the system, constraint, uncertainty-set, and result types
//!   shared by everything else.
//! - [`moments`]: online estimators of the noise mean/covariance from
//!   one-step prediction residuals (zero-mean, non-zero-mean, and a paired
//!   estimator for LTI systems with measurement noise).
//! - [`bounds`]: converts a sample count and an empirical covariance into an
//!   ellipsoidal set that contains the next disturbance with probability
//!   `≥ 1 − δ` — Markov-type, Chebyshev-type, and conservative all-horizon
//!   variants, plus non-Gaussian fallbacks driven by moment bounds — and the
//!   switching logic that picks the least conservative valid bound.
//! - [`reformulate`]: turns an uncertainty set plus half-plane constraints
//!   into deterministic tightened linear constraints on `u` (the support
//!   function of the set along each constraint row).
//! - [`qp`] and [`filter`]: solve `min ‖u − ū‖²` subject to the tightened
//!   constraints with a dense active-set method, certify infeasibility with
//!   Farkas multipliers, and relax δ by bisection when the requested level is
//!   unattainable.
//! - [`spatial`]: spatially varying noise — a grid of per-region estimators
//!   with union-bound confidence radii, neighbor-informed bounds, and
//!   statistically gated region merging.
//! - [`scenario`]: a unicycle obstacle-course simulation and Monte Carlo
//!   harness that exercises the whole stack, with CSV/SVG/JSON outputs.
//! - [`oracles`]: independent Monte Carlo oracles (direct sampling, no reuse
//!   of the estimator/bound code paths) for the statistical facts the bounds
//!   rely on.

pub mod bounds;
mod error;
pub mod filter;
pub mod model;
pub mod moments;
pub mod oracles;
pub mod qp;
pub mod reformulate;
pub mod scenario;
pub mod spatial;

pub use error::{Error, Result};
