//! Finite-sample confidence sets for the process noise.
//!
//! Every bound here answers the same question: given `t` residuals, produce
//! an [`UncertaintySet`] that contains the *next* disturbance with
//! probability at least `1−δ`. The catalogue (see [`BoundKind`]) trades off
//! validity range against conservatism:
//!
//! - **Markov-type** radii use only the first moment of the estimator's
//!   sampling distribution and are valid soonest.
//! - **Chebyshev-type** radii add the second moment; they need a few more
//!   samples but win for moderate `t` and small enough `δ`
//!   ([`generic::chebyshev_beats_markov_zero_mean`] decides when).
//! - **All-t** sets inflate the empirical covariance by a concentration
//!   term and hold from the very first samples, at the price of a known
//!   upper bound `σ` on the noise covariance scale.
//! - **Non-Gaussian** sets replace Gaussianity with fourth-moment bounds
//!   (`ζ`, plus `ν`, `κ` for the unknown-mean case).
//! - **NoisyLti** covers linear systems measured through sensor noise via
//!   the paired-residual estimator; its deliberately inflated covariance
//!   keeps the guarantee.
//!
//! The scalar closed forms live in [`generic`], parametric over the float
//! type so they can be cross-checked in higher precision; the concrete
//! layer validates preconditions (`t` thresholds, `δ` range, required
//! constants) and assembles the sets.

use nalgebra::{DMatrix, DVector};

use crate::model::{ConfidenceConfig, UncertaintySet};
use crate::moments::{EstimatorMode, MomentEstimate};
use crate::{Error, Result};

/// Closed-form scalar pieces of every bound, generic over the float type.
///
/// These functions are pure formula evaluations: preconditions (positive
/// denominators, valid `t`) are the *caller's* responsibility and are only
/// `debug_assert`ed here. The `f64` front ends in the parent module do the
/// checked versions.
pub mod generic {
    use num_traits::Float;

    fn two<F: Float>() -> F {
        F::one() + F::one()
    }

    fn three<F: Float>() -> F {
        two::<F>() + F::one()
    }

    /// Markov-type squared radius for the zero-mean estimator:
    /// `d = t·n / ((t−n−1)·δ)`, valid for `t > n+1`.
    pub fn markov_zero_mean_radius<F: Float>(t: F, n: F, delta: F) -> F {
        debug_assert!(t > n + F::one());
        t * n / ((t - n - F::one()) * delta)
    }

    /// Mean and variance of the squared Mahalanobis statistic under the
    /// zero-mean estimator, valid for `t > n+3`:
    /// `E = t·n/(t−n−1)`, `V = 2t²(t−1)n / ((t−n−1)²(t−n−3))`.
    pub fn chebyshev_zero_mean_moments<F: Float>(t: F, n: F) -> (F, F) {
        debug_assert!(t > n + three());
        let d1 = t - n - F::one();
        let d3 = t - n - three();
        let e = t * n / d1;
        let v = two::<F>() * t * t * (t - F::one()) * n / (d1 * d1 * d3);
        (e, v)
    }

    /// One-sided Chebyshev radius from a (mean, variance) pair:
    /// `E + √(V/δ)`.
    pub fn radius_from_moments<F: Float>(e: F, v: F, delta: F) -> F {
        e + (v / delta).sqrt()
    }

    /// Markov-type squared radius for the unknown-mean estimator:
    /// `d = (t+1)(t−1)·n / (t(t−n−2)·δ)`, valid for `t > n+2`.
    pub fn markov_nonzero_mean_radius<F: Float>(t: F, n: F, delta: F) -> F {
        debug_assert!(t > n + two());
        (t + F::one()) * (t - F::one()) * n / (t * (t - n - two()) * delta)
    }

    /// Mean and variance of the squared Mahalanobis statistic under the
    /// unknown-mean estimator, valid for `t > n+4`:
    /// `Ẽ = (t+1)(t−1)n/(t(t−n−2))`,
    /// `Ṽ = 2(t+1)²(t−1)²(t−2)n / (t²(t−n−2)²(t−n−4))`.
    pub fn chebyshev_nonzero_mean_moments<F: Float>(t: F, n: F) -> (F, F) {
        debug_assert!(t > n + two() + two());
        let d2 = t - n - two();
        let d4 = t - n - two() - two();
        let tp = t + F::one();
        let tm = t - F::one();
        let e = tp * tm * n / (t * d2);
        let v = two::<F>() * tp * tp * tm * tm * (t - two()) * n / (t * t * d2 * d2 * d4);
        (e, v)
    }

    /// Squared radius of the paired-residual bound for noisy linear
    /// measurements: `d = p·n/((p−n−1)·δ)` with `p = ⌊t/2⌋` pairs,
    /// valid for `t > 2n+3`.
    pub fn noisy_lti_radius<F: Float>(pairs: F, n: F, delta: F) -> F {
        debug_assert!(pairs > n + F::one());
        pairs * n / ((pairs - n - F::one()) * delta)
    }

    /// Covariance inflation of the all-t zero-mean set:
    /// `σ·√(2n(n+1)/(δt))`, valid for all `t ≥ 1`.
    pub fn allt_zero_mean_inflation<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        sigma * (two::<F>() * n * (n + F::one()) / (delta * t)).sqrt()
    }

    /// Covariance inflation of the all-t unknown-mean set:
    /// `σ·√(3n(n+1)/(δ(t−1)))`, valid for `t ≥ 2`.
    pub fn allt_nonzero_mean_inflation<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        sigma * (three::<F>() * n * (n + F::one()) / (delta * (t - F::one()))).sqrt()
    }

    /// Ball radius accounting for mean-estimation error in the all-t
    /// unknown-mean set: `√(3nσ/(tδ))`.
    pub fn allt_nonzero_mean_ball<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        (three::<F>() * n * sigma / (t * delta)).sqrt()
    }

    /// Single-event covariance concentration inflation
    /// `σ·√(n(n+1)/(δt))` (zero-mean estimator, all `t ≥ 1`).
    pub fn lone_cov_inflation_zero_mean<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        sigma * (n * (n + F::one()) / (delta * t)).sqrt()
    }

    /// Single-event covariance concentration inflation
    /// `σ·√(n(n+1)/(δ(t−1)))` (unknown-mean estimator, `t ≥ 2`).
    pub fn lone_cov_inflation_nonzero_mean<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        sigma * (n * (n + F::one()) / (delta * (t - F::one()))).sqrt()
    }

    /// Single-event squared radius of the sample-mean error ball:
    /// `‖μ_w − μ̂‖² ≤ nσ/(tδ)` with probability `≥ 1−δ`, all `t ≥ 1`.
    pub fn mean_error_sq_radius<F: Float>(n: F, t: F, delta: F, sigma: F) -> F {
        n * sigma / (t * delta)
    }

    /// Covariance inflation of the non-Gaussian zero-mean set:
    /// `√(2ζ/(tδ))` where `ζ` bounds the fourth moment `E‖w‖⁴`.
    pub fn non_gaussian_zero_mean_inflation<F: Float>(zeta: F, t: F, delta: F) -> F {
        (two::<F>() * zeta / (t * delta)).sqrt()
    }

    /// Fourth-moment proxy for the non-Gaussian unknown-mean set:
    /// `γ = ζ/t + ((t²−t+1)ν⁴ + (t²+2t−1)nσν² + 4tκν) / (t(t−1))`,
    /// valid for `t ≥ 2`.
    pub fn gamma_nonzero_mean<F: Float>(t: F, zeta: F, nu: F, kappa: F, sigma: F, n: F) -> F {
        debug_assert!(t >= two());
        let nu2 = nu * nu;
        let four = two::<F>() + two();
        let poly = (t * t - t + F::one()) * nu2 * nu2
            + (t * t + two::<F>() * t - F::one()) * n * sigma * nu2
            + four * t * kappa * nu;
        zeta / t + poly / (t * (t - F::one()))
    }

    /// Comparison condition deciding when the Chebyshev-type zero-mean
    /// radius beats the Markov-type one: `2(t−1)/(t−n−3) < n(1−δ)²/δ`.
    /// Requires `t > n+3` so both radii exist.
    pub fn chebyshev_beats_markov_zero_mean<F: Float>(t: F, n: F, delta: F) -> bool {
        debug_assert!(t > n + three());
        let lhs = two::<F>() * (t - F::one()) / (t - n - three());
        let one_md = F::one() - delta;
        lhs < n * one_md * one_md / delta
    }

    /// Unknown-mean analogue of the comparison condition:
    /// `2(t−2)/(t−n−4) < n(1−δ)²/δ`, requiring `t > n+4`.
    pub fn chebyshev_beats_markov_nonzero_mean<F: Float>(t: F, n: F, delta: F) -> bool {
        debug_assert!(t > n + two() + two());
        let lhs = two::<F>() * (t - two()) / (t - n - two() - two());
        let one_md = F::one() - delta;
        lhs < n * one_md * one_md / delta
    }

    /// Risk level below which the Chebyshev-type radius wins at *every*
    /// valid `t`: `δ < (2n+3 − √(3(n+1)(n+3)))/n`.
    pub fn chebyshev_delta_threshold_all_t<F: Float>(n: F) -> F {
        let disc = (three::<F>() * (n + F::one()) * (n + three())).sqrt();
        (two::<F>() * n + three() - disc) / n
    }

    /// Risk level below which the Chebyshev-type radius wins in the
    /// large-`t` limit: `δ < (n+1 − √(2n+1))/n`.
    pub fn chebyshev_delta_threshold_large_t<F: Float>(n: F) -> F {
        (n + F::one() - (two::<F>() * n + F::one()).sqrt()) / n
    }
}

/// Which confidence bound produced an uncertainty set.
///
/// Each kind carries a minimum sample count below which its derivation is
/// void; see [`BoundKind::min_t`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// First-moment bound, zero-mean estimator (`t ≥ n+2`).
    MarkovZeroMean,
    /// Second-moment bound, zero-mean estimator (`t ≥ n+4`).
    ChebyshevZeroMean,
    /// Inflated-covariance bound valid at every `t ≥ 1`; needs `σ`.
    AllTZeroMean,
    /// Paired-residual bound for noisy linear measurements (`t ≥ 2n+4`).
    NoisyLti,
    /// First-moment bound, unknown-mean estimator (`t ≥ n+3`).
    MarkovNonZeroMean,
    /// Second-moment bound, unknown-mean estimator (`t ≥ n+5`).
    ChebyshevNonZeroMean,
    /// Inflated ellipsoid ⊕ ball valid at every `t ≥ 2`; needs `σ`.
    AllTNonZeroMean,
    /// Fourth-moment (non-Gaussian) bound, zero mean (`t ≥ 1`); needs `ζ`.
    NonGaussianZeroMean,
    /// Fourth-moment bound, unknown mean (`t ≥ 2`); needs `ζ, ν, κ, σ`.
    NonGaussianNonZeroMean,
}

impl BoundKind {
    /// Minimum sample count at which this bound's guarantee holds, for
    /// noise dimension `n`. (For [`BoundKind::NoisyLti`], `t` counts raw
    /// measurements, two per pair.)
    pub fn min_t(self, n: usize) -> u64 {
        let n = n as u64;
        match self {
            BoundKind::MarkovZeroMean => n + 2,
            BoundKind::ChebyshevZeroMean => n + 4,
            BoundKind::AllTZeroMean => 1,
            BoundKind::NoisyLti => 2 * n + 4,
            BoundKind::MarkovNonZeroMean => n + 3,
            BoundKind::ChebyshevNonZeroMean => n + 5,
            BoundKind::AllTNonZeroMean => 2,
            BoundKind::NonGaussianZeroMean => 1,
            BoundKind::NonGaussianNonZeroMean => 2,
        }
    }

    /// Estimator mode this bound consumes.
    pub fn estimator_mode(self) -> EstimatorMode {
        match self {
            BoundKind::MarkovZeroMean
            | BoundKind::ChebyshevZeroMean
            | BoundKind::AllTZeroMean
            | BoundKind::NonGaussianZeroMean => EstimatorMode::ZeroMean,
            BoundKind::NoisyLti => EstimatorMode::NoisyLti,
            BoundKind::MarkovNonZeroMean
            | BoundKind::ChebyshevNonZeroMean
            | BoundKind::AllTNonZeroMean
            | BoundKind::NonGaussianNonZeroMean => EstimatorMode::NonZeroMean,
        }
    }

    /// Stable lowercase identifier (used in logs and JSON reports).
    pub fn as_str(self) -> &'static str {
        match self {
            BoundKind::MarkovZeroMean => "markov-zero-mean",
            BoundKind::ChebyshevZeroMean => "chebyshev-zero-mean",
            BoundKind::AllTZeroMean => "all-t-zero-mean",
            BoundKind::NoisyLti => "noisy-lti",
            BoundKind::MarkovNonZeroMean => "markov-nonzero-mean",
            BoundKind::ChebyshevNonZeroMean => "chebyshev-nonzero-mean",
            BoundKind::AllTNonZeroMean => "all-t-nonzero-mean",
            BoundKind::NonGaussianZeroMean => "nongaussian-zero-mean",
            BoundKind::NonGaussianNonZeroMean => "nongaussian-nonzero-mean",
        }
    }

    /// All nine kinds, in a stable order.
    pub fn all() -> [BoundKind; 9] {
        [
            BoundKind::MarkovZeroMean,
            BoundKind::ChebyshevZeroMean,
            BoundKind::AllTZeroMean,
            BoundKind::NoisyLti,
            BoundKind::MarkovNonZeroMean,
            BoundKind::ChebyshevNonZeroMean,
            BoundKind::AllTNonZeroMean,
            BoundKind::NonGaussianZeroMean,
            BoundKind::NonGaussianNonZeroMean,
        ]
    }
}

impl std::fmt::Display for BoundKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Low-level bound formulas accept `δ ∈ (0, 1]` (δ=1 collapses the
/// confidence inflation and is occasionally useful for diagnostics); the
/// filter-level configuration is stricter and requires `δ ∈ (0, 1)`.
fn check_delta(delta: f64) -> Result<()> {
    if !delta.is_finite() || delta <= 0.0 || delta > 1.0 {
        return Err(Error::ConfigError(format!(
            "risk level delta must lie in (0, 1], got {delta}"
        )));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::ConfigError("noise dimension n must be positive".into()));
    }
    Ok(())
}

fn check_min_t(kind: BoundKind, t: u64, n: usize) -> Result<()> {
    let min_t = kind.min_t(n);
    if t < min_t {
        return Err(Error::BoundNotValidYet { t, min_t });
    }
    Ok(())
}

fn check_cov_dims(cov: &DMatrix<f64>, n: usize, context: &'static str) -> Result<()> {
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: format!("{n}x{n}"),
            actual: format!("{}x{}", cov.nrows(), cov.ncols()),
        });
    }
    Ok(())
}

fn require(value: Option<f64>, what: &'static str) -> Result<f64> {
    value.ok_or_else(|| Error::ConfigError(format!("{what} is required by this bound but was not provided")))
}

/// Squared Mahalanobis radius `d` of the Markov-type zero-mean bound.
pub fn markov_radius_zero_mean(t: u64, n: usize, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    check_min_t(BoundKind::MarkovZeroMean, t, n)?;
    Ok(generic::markov_zero_mean_radius(t as f64, n as f64, delta))
}

/// Mean and variance `(E, V)` of the zero-mean squared Mahalanobis
/// statistic, the ingredients of the Chebyshev-type radius.
pub fn chebyshev_ev_zero_mean(t: u64, n: usize) -> Result<(f64, f64)> {
    check_n(n)?;
    check_min_t(BoundKind::ChebyshevZeroMean, t, n)?;
    Ok(generic::chebyshev_zero_mean_moments(t as f64, n as f64))
}

/// Chebyshev-type zero-mean radius `E + √(V/δ)`.
pub fn chebyshev_radius_zero_mean(t: u64, n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (e, v) = chebyshev_ev_zero_mean(t, n)?;
    Ok(generic::radius_from_moments(e, v, delta))
}

/// Squared radius of the paired-residual bound (`t` raw measurements,
/// `⌊t/2⌋` pairs).
pub fn noisy_lti_radius(t: u64, n: usize, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    check_min_t(BoundKind::NoisyLti, t, n)?;
    Ok(generic::noisy_lti_radius((t / 2) as f64, n as f64, delta))
}

/// Squared radius of the Markov-type unknown-mean bound; the accompanying
/// set is centered at the sample mean (the caller supplies the center).
pub fn markov_radius_nonzero_mean(t: u64, n: usize, delta: f64) -> Result<f64> {
    check_n(n)?;
    check_delta(delta)?;
    check_min_t(BoundKind::MarkovNonZeroMean, t, n)?;
    Ok(generic::markov_nonzero_mean_radius(t as f64, n as f64, delta))
}

/// Mean and variance `(Ẽ, Ṽ)` of the unknown-mean squared Mahalanobis
/// statistic.
pub fn chebyshev_ev_nonzero_mean(t: u64, n: usize) -> Result<(f64, f64)> {
    check_n(n)?;
    check_min_t(BoundKind::ChebyshevNonZeroMean, t, n)?;
    Ok(generic::chebyshev_nonzero_mean_moments(t as f64, n as f64))
}

/// Chebyshev-type unknown-mean radius `Ẽ + √(Ṽ/δ)`.
pub fn chebyshev_radius_nonzero_mean(t: u64, n: usize, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let (e, v) = chebyshev_ev_nonzero_mean(t, n)?;
    Ok(generic::radius_from_moments(e, v, delta))
}

/// All-t zero-mean set: `W = Σ̂ + σ√(2n(n+1)/(δt))·I`, `d = 2n/δ`,
/// centered at the origin. Valid at every `t ≥ 1` given the covariance
/// scale bound `σ` (`Σ_w ⪯ σI`).
pub fn all_t_set_zero_mean(
    cov: &DMatrix<f64>,
    t: u64,
    n: usize,
    delta: f64,
    sigma: Option<f64>,
) -> Result<UncertaintySet> {
    check_n(n)?;
    check_delta(delta)?;
    check_cov_dims(cov, n, "all-t zero-mean covariance")?;
    check_min_t(BoundKind::AllTZeroMean, t, n)?;
    let sigma = require(sigma, "covariance scale bound sigma")?;
    let infl = generic::allt_zero_mean_inflation(n as f64, t as f64, delta, sigma);
    let shape = cov + DMatrix::identity(n, n) * infl;
    UncertaintySet::new(DVector::zeros(n), shape, 2.0 * n as f64 / delta, 0.0)
}

/// All-t unknown-mean set: ellipsoid centered at `μ̂` with
/// `W = Σ̂ + σ√(3n(n+1)/(δ(t−1)))·I` and `d = 3n/δ`, Minkowski-inflated by
/// a ball of radius `√(3nσ/(tδ))` absorbing the mean-estimation error.
pub fn all_t_set_nonzero_mean(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    t: u64,
    n: usize,
    delta: f64,
    sigma: Option<f64>,
) -> Result<UncertaintySet> {
    check_n(n)?;
    check_delta(delta)?;
    check_cov_dims(cov, n, "all-t unknown-mean covariance")?;
    if mean.len() != n {
        return Err(Error::DimensionMismatch {
            context: "all-t unknown-mean center",
            expected: format!("length {n}"),
            actual: format!("length {}", mean.len()),
        });
    }
    check_min_t(BoundKind::AllTNonZeroMean, t, n)?;
    let sigma = require(sigma, "covariance scale bound sigma")?;
    let (nf, tf) = (n as f64, t as f64);
    let infl = generic::allt_nonzero_mean_inflation(nf, tf, delta, sigma);
    let ball = generic::allt_nonzero_mean_ball(nf, tf, delta, sigma);
    let shape = cov + DMatrix::identity(n, n) * infl;
    UncertaintySet::new(mean.clone(), shape, 3.0 * nf / delta, ball)
}

/// Non-Gaussian zero-mean set: `W = Σ̂ + √(2ζ/(tδ))·I`, `d = 2n/δ`,
/// centered at the origin. `ζ` bounds the fourth moment `E‖w‖⁴`; for
/// zero-mean Gaussian noise with `Σ_w ⪯ σI`, `ζ = σ²n(n+2)` works.
pub fn non_gaussian_set_zero_mean(
    cov: &DMatrix<f64>,
    t: u64,
    n: usize,
    delta: f64,
    zeta: Option<f64>,
) -> Result<UncertaintySet> {
    check_n(n)?;
    check_delta(delta)?;
    check_cov_dims(cov, n, "non-Gaussian zero-mean covariance")?;
    check_min_t(BoundKind::NonGaussianZeroMean, t, n)?;
    let zeta = require(zeta, "fourth-moment bound zeta")?;
    let infl = generic::non_gaussian_zero_mean_inflation(zeta, t as f64, delta);
    let shape = cov + DMatrix::identity(n, n) * infl;
    UncertaintySet::new(DVector::zeros(n), shape, 2.0 * n as f64 / delta, 0.0)
}

/// Fourth-moment proxy `γ` of the non-Gaussian unknown-mean bound.
/// Needs `ζ` (fourth moment), `ν` (mean norm bound), `κ` (third-moment
/// cross term), and `σ` (covariance scale). Valid for `t ≥ 2`.
pub fn gamma_nonzero_mean(
    t: u64,
    zeta: Option<f64>,
    nu: Option<f64>,
    kappa: Option<f64>,
    sigma: Option<f64>,
    n: usize,
) -> Result<f64> {
    check_n(n)?;
    check_min_t(BoundKind::NonGaussianNonZeroMean, t, n)?;
    let zeta = require(zeta, "fourth-moment bound zeta")?;
    let nu = require(nu, "mean norm bound nu")?;
    let kappa = require(kappa, "third-moment bound kappa")?;
    let sigma = require(sigma, "covariance scale bound sigma")?;
    Ok(generic::gamma_nonzero_mean(t as f64, zeta, nu, kappa, sigma, n as f64))
}

/// Non-Gaussian unknown-mean set: `W = Σ̂ + √(γ/δ)·I` with the unbiased
/// covariance estimate, `d = 2n/δ`, centered at the origin — the γ
/// inflation already absorbs the unknown mean, so no `μ̂` recentering.
pub fn non_gaussian_set_nonzero_mean(
    cov: &DMatrix<f64>,
    t: u64,
    n: usize,
    delta: f64,
    zeta: Option<f64>,
    nu: Option<f64>,
    kappa: Option<f64>,
    sigma: Option<f64>,
) -> Result<UncertaintySet> {
    check_delta(delta)?;
    check_cov_dims(cov, n, "non-Gaussian unknown-mean covariance")?;
    let gamma = gamma_nonzero_mean(t, zeta, nu, kappa, sigma, n)?;
    let shape = cov + DMatrix::identity(n, n) * (gamma / delta).sqrt();
    UncertaintySet::new(DVector::zeros(n), shape, 2.0 * n as f64 / delta, 0.0)
}

/// Bound selection for the zero-mean pipeline: the all-t set while `t` is
/// too small for anything else, then Markov, then Chebyshev once the
/// comparison condition favors it at this `(t, n, δ)`.
///
/// `sigma_available` gates the all-t branch; without `σ` there is no valid
/// bound before `t = n+2`.
pub fn select_bound_zero_mean(
    t: u64,
    n: usize,
    delta: f64,
    sigma_available: bool,
) -> Result<BoundKind> {
    check_n(n)?;
    check_delta(delta)?;
    let n64 = n as u64;
    if t < 1 {
        return Err(Error::BoundNotValidYet { t, min_t: 1 });
    }
    if t <= n64 + 1 {
        if !sigma_available {
            return Err(Error::ConfigError(format!(
                "no bound is valid at t={t} (need t >= {}) without the covariance scale bound sigma",
                n64 + 2
            )));
        }
        return Ok(BoundKind::AllTZeroMean);
    }
    if t <= n64 + 3 {
        return Ok(BoundKind::MarkovZeroMean);
    }
    if generic::chebyshev_beats_markov_zero_mean(t as f64, n as f64, delta) {
        Ok(BoundKind::ChebyshevZeroMean)
    } else {
        Ok(BoundKind::MarkovZeroMean)
    }
}

/// Bound selection for the unknown-mean pipeline; same cascade with the
/// unknown-mean thresholds and comparison condition.
pub fn select_bound_nonzero_mean(
    t: u64,
    n: usize,
    delta: f64,
    sigma_available: bool,
) -> Result<BoundKind> {
    check_n(n)?;
    check_delta(delta)?;
    let n64 = n as u64;
    if t < 2 {
        return Err(Error::BoundNotValidYet { t, min_t: 2 });
    }
    if t <= n64 + 2 {
        if !sigma_available {
            return Err(Error::ConfigError(format!(
                "no bound is valid at t={t} (need t >= {}) without the covariance scale bound sigma",
                n64 + 3
            )));
        }
        return Ok(BoundKind::AllTNonZeroMean);
    }
    if t <= n64 + 4 {
        return Ok(BoundKind::MarkovNonZeroMean);
    }
    if generic::chebyshev_beats_markov_nonzero_mean(t as f64, n as f64, delta) {
        Ok(BoundKind::ChebyshevNonZeroMean)
    } else {
        Ok(BoundKind::MarkovNonZeroMean)
    }
}

/// Row-wise comparison of the Markov-type tightening against the all-t
/// tightening: entry `i` is true iff
/// `(t/(t−n−1))·hᵢᵀΣ̂hᵢ < 2·hᵢᵀ(Σ̂ + σ√(2n(n+1)/(δt))·I)hᵢ`,
/// i.e. the Markov set yields the smaller margin along row `i`. Guaranteed
/// all-true for `t ≥ 2(n+1)`.
pub fn markov_vs_allt_test(
    cov: &DMatrix<f64>,
    h_mat: &DMatrix<f64>,
    t: u64,
    n: usize,
    delta: f64,
    sigma: Option<f64>,
) -> Result<Vec<bool>> {
    check_n(n)?;
    check_delta(delta)?;
    check_cov_dims(cov, n, "comparison covariance")?;
    if h_mat.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "comparison constraint matrix",
            expected: format!("{n} columns"),
            actual: format!("{} columns", h_mat.ncols()),
        });
    }
    check_min_t(BoundKind::MarkovZeroMean, t, n)?;
    let sigma = require(sigma, "covariance scale bound sigma")?;
    let (tf, nf) = (t as f64, n as f64);
    let markov_factor = tf / (tf - nf - 1.0);
    let infl = generic::allt_zero_mean_inflation(nf, tf, delta, sigma);
    let mut out = Vec::with_capacity(h_mat.nrows());
    for i in 0..h_mat.nrows() {
        let hi = h_mat.row(i).transpose();
        let quad = (hi.transpose() * cov * &hi)[(0, 0)];
        let lhs = markov_factor * quad;
        let rhs = 2.0 * (quad + infl * hi.norm_squared());
        out.push(lhs < rhs);
    }
    Ok(out)
}

/// Builds the [`UncertaintySet`] for a given bound kind from the current
/// estimate and configuration. Validates that the estimator mode matches
/// the kind and that `t` is past the kind's validity threshold.
pub fn build_set(
    kind: BoundKind,
    est: &MomentEstimate,
    cfg: &ConfidenceConfig,
) -> Result<UncertaintySet> {
    build_set_at_delta(kind, est, cfg, cfg.delta())
}

/// [`build_set`] with an explicit risk level (the δ-bisection in the
/// safety filter probes levels above the configured one).
pub fn build_set_at_delta(
    kind: BoundKind,
    est: &MomentEstimate,
    cfg: &ConfidenceConfig,
    delta: f64,
) -> Result<UncertaintySet> {
    let expected = kind.estimator_mode();
    if est.mode() != expected {
        return Err(Error::WrongMode {
            expected: expected.name(),
            actual: est.mode().name(),
        });
    }
    let n = est.dim();
    let t = est.t();
    check_min_t(kind, t, n)?;
    let cov = est.cov()?;
    match kind {
        BoundKind::MarkovZeroMean => {
            let d = markov_radius_zero_mean(t, n, delta)?;
            UncertaintySet::new(DVector::zeros(n), cov, d, 0.0)
        }
        BoundKind::ChebyshevZeroMean => {
            let d = chebyshev_radius_zero_mean(t, n, delta)?;
            UncertaintySet::new(DVector::zeros(n), cov, d, 0.0)
        }
        BoundKind::AllTZeroMean => all_t_set_zero_mean(&cov, t, n, delta, cfg.sigma()),
        BoundKind::NoisyLti => {
            let d = noisy_lti_radius(t, n, delta)?;
            UncertaintySet::new(DVector::zeros(n), cov, d, 0.0)
        }
        BoundKind::MarkovNonZeroMean => {
            let d = markov_radius_nonzero_mean(t, n, delta)?;
            UncertaintySet::new(est.mean()?, cov, d, 0.0)
        }
        BoundKind::ChebyshevNonZeroMean => {
            let d = chebyshev_radius_nonzero_mean(t, n, delta)?;
            UncertaintySet::new(est.mean()?, cov, d, 0.0)
        }
        BoundKind::AllTNonZeroMean => {
            all_t_set_nonzero_mean(&est.mean()?, &cov, t, n, delta, cfg.sigma())
        }
        BoundKind::NonGaussianZeroMean => {
            non_gaussian_set_zero_mean(&cov, t, n, delta, cfg.zeta())
        }
        BoundKind::NonGaussianNonZeroMean => non_gaussian_set_nonzero_mean(
            &cov,
            t,
            n,
            delta,
            cfg.zeta(),
            cfg.nu(),
            cfg.kappa(),
            cfg.sigma(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn markov_zero_mean_spot_values() {
        // 10·3/(6·0.3) = 50/3; 100·3/(96·1) = 3.125.
        assert_abs_diff_eq!(
            markov_radius_zero_mean(10, 3, 0.3).unwrap(),
            50.0 / 3.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            markov_radius_zero_mean(100, 3, 1.0).unwrap(),
            3.125,
            epsilon = 1e-12
        );
        // t = 5 is the first valid sample count for n = 3 (t > n+1).
        assert_abs_diff_eq!(markov_radius_zero_mean(5, 3, 0.3).unwrap(), 50.0, epsilon = 1e-12);
        assert!(matches!(
            markov_radius_zero_mean(4, 3, 0.3),
            Err(Error::BoundNotValidYet { t: 4, min_t: 5 })
        ));
    }

    #[test]
    fn chebyshev_zero_mean_moments_spot_values() {
        // E = tn/(t−n−1), V = 2t²(t−1)n/((t−n−1)²(t−n−3)).
        let (e, v) = chebyshev_ev_zero_mean(10, 3).unwrap();
        assert_abs_diff_eq!(e, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 75.0 / 2.0, epsilon = 1e-12);
        let (e, v) = chebyshev_ev_zero_mean(11, 3).unwrap();
        assert_abs_diff_eq!(e, 33.0 / 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1452.0 / 49.0, epsilon = 1e-12);
        let (e, v) = chebyshev_ev_zero_mean(20, 3).unwrap();
        assert_abs_diff_eq!(e, 3.75, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 1425.0 / 112.0, epsilon = 1e-12);
        assert!(matches!(
            chebyshev_ev_zero_mean(6, 3),
            Err(Error::BoundNotValidYet { t: 6, min_t: 7 })
        ));
    }

    #[test]
    fn chebyshev_zero_mean_radius_spot_values() {
        assert_abs_diff_eq!(
            chebyshev_radius_zero_mean(10, 3, 0.3).unwrap(),
            5.0 + 125.0f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            chebyshev_radius_zero_mean(11, 3, 0.3).unwrap(),
            33.0 / 7.0 + (1452.0 / 49.0 / 0.3).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            chebyshev_radius_zero_mean(20, 3, 0.3).unwrap(),
            3.75 + (1425.0 / 112.0 / 0.3).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn noisy_lti_radius_spot_values() {
        // ⌊12/2⌋ = 6 pairs: 6·3/((6−4)·0.3) = 30; floor keeps t=13 equal.
        assert_abs_diff_eq!(noisy_lti_radius(12, 3, 0.3).unwrap(), 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(noisy_lti_radius(13, 3, 0.3).unwrap(), 30.0, epsilon = 1e-12);
        assert!(matches!(
            noisy_lti_radius(9, 3, 0.3),
            Err(Error::BoundNotValidYet { t: 9, min_t: 10 })
        ));
    }

    #[test]
    fn markov_nonzero_mean_spot_values() {
        // (t+1)(t−1)n/(t(t−n−2)δ).
        assert_abs_diff_eq!(
            markov_radius_nonzero_mean(10, 3, 0.3).unwrap(),
            19.8,
            epsilon = 1e-12
        );
        // Large-t check: approaches n/δ = 10 from above.
        assert_abs_diff_eq!(
            markov_radius_nonzero_mean(1000, 3, 0.3).unwrap(),
            1001.0 * 999.0 * 3.0 / (1000.0 * 995.0 * 0.3),
            epsilon = 1e-12
        );
        // t = 6 is the first valid sample count for n = 3; t = 5 is not.
        assert_abs_diff_eq!(
            markov_radius_nonzero_mean(6, 3, 0.3).unwrap(),
            7.0 * 5.0 * 3.0 / (6.0 * 1.0 * 0.3),
            epsilon = 1e-12
        );
        assert!(matches!(
            markov_radius_nonzero_mean(5, 3, 0.3),
            Err(Error::BoundNotValidYet { t: 5, min_t: 6 })
        ));
    }

    #[test]
    fn chebyshev_nonzero_mean_moments_spot_values() {
        let (e, v) = chebyshev_ev_nonzero_mean(12, 3).unwrap();
        assert_abs_diff_eq!(e, 143.0 / 28.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 20449.0 / 588.0, epsilon = 1e-12);
        // t = 8 is the first valid sample count for n = 3; t = 7 is not.
        let (e, v) = chebyshev_ev_nonzero_mean(8, 3).unwrap();
        assert_abs_diff_eq!(e, 63.0 / 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 248.0625, epsilon = 1e-12);
        assert!(matches!(
            chebyshev_ev_nonzero_mean(7, 3),
            Err(Error::BoundNotValidYet { t: 7, min_t: 8 })
        ));
        // Large-t limit approaches n.
        let (e, _) = chebyshev_ev_nonzero_mean(10_000, 3).unwrap();
        assert_abs_diff_eq!(e, 3.001_500_72, epsilon = 1e-7);
    }

    #[test]
    fn all_t_zero_mean_spot_values() {
        let zero = DMatrix::zeros(3, 3);
        let set = all_t_set_zero_mean(&zero, 5, 3, 0.3, Some(1.0)).unwrap();
        // √(24/1.5) = 4 exactly.
        assert_abs_diff_eq!((set.shape() - DMatrix::identity(3, 3) * 4.0).norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(set.radius(), 20.0, epsilon = 1e-12);
        assert_eq!(set.ball_radius(), 0.0);

        let set = all_t_set_zero_mean(&DMatrix::identity(3, 3), 80, 3, 0.3, Some(1.0)).unwrap();
        assert_abs_diff_eq!((set.shape() - DMatrix::identity(3, 3) * 2.0).norm(), 0.0, epsilon = 1e-12);

        // Missing σ is a configuration error, not a panic.
        assert!(matches!(
            all_t_set_zero_mean(&zero, 5, 3, 0.3, None),
            Err(Error::ConfigError(_))
        ));

        // Inflation vanishes as t grows: W → Σ̂.
        let set = all_t_set_zero_mean(&DMatrix::identity(3, 3), 10_000_000, 3, 0.3, Some(1.0)).unwrap();
        assert!((set.shape() - DMatrix::identity(3, 3)).norm() < 1e-2);
    }

    #[test]
    fn all_t_nonzero_mean_spot_values() {
        let mu = DVector::zeros(3);
        let zero = DMatrix::zeros(3, 3);
        let set = all_t_set_nonzero_mean(&mu, &zero, 10, 3, 0.3, Some(1.0)).unwrap();
        let infl = (36.0f64 / 2.7).sqrt();
        assert_abs_diff_eq!(
            (set.shape() - DMatrix::identity(3, 3) * infl).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(set.radius(), 30.0, epsilon = 1e-12);
        assert_abs_diff_eq!(set.ball_radius(), 3.0f64.sqrt(), epsilon = 1e-12);

        // Minimum sample count t = 2 is accepted; t = 1 is not.
        assert!(all_t_set_nonzero_mean(&mu, &zero, 2, 3, 0.3, Some(1.0)).is_ok());
        assert!(matches!(
            all_t_set_nonzero_mean(&mu, &zero, 1, 3, 0.3, Some(1.0)),
            Err(Error::BoundNotValidYet { t: 1, min_t: 2 })
        ));
    }

    #[test]
    fn non_gaussian_zero_mean_spot_values() {
        // Gaussian specialization: ζ = σ²n(n+2) = 15 for σ=1, n=3.
        let zeta = 1.0 * 3.0 * 5.0;
        assert_abs_diff_eq!(zeta, 15.0);
        let set =
            non_gaussian_set_zero_mean(&DMatrix::zeros(3, 3), 10, 3, 0.3, Some(zeta)).unwrap();
        assert_abs_diff_eq!(
            (set.shape() - DMatrix::identity(3, 3) * 10.0f64.sqrt()).norm(),
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(set.radius(), 20.0, epsilon = 1e-12);
        assert!(matches!(
            non_gaussian_set_zero_mean(&DMatrix::zeros(3, 3), 10, 3, 0.3, None),
            Err(Error::ConfigError(_))
        ));
    }

    #[test]
    fn gamma_spot_values() {
        // ν = 0, κ = 0 collapses to ζ/t.
        assert_abs_diff_eq!(
            gamma_nonzero_mean(10, Some(15.0), Some(0.0), Some(0.0), Some(1.0), 3).unwrap(),
            1.5,
            epsilon = 1e-12
        );
        // t = 2, all constants 1, n = 3:
        // ζ/t + ((t²−t+1)ν⁴ + (t²+2t−1)nσν² + 4tκν)/(t(t−1))
        //   = 1/2 + (3 + 7·3 + 8)/2 = 16.5.
        assert_abs_diff_eq!(
            gamma_nonzero_mean(2, Some(1.0), Some(1.0), Some(1.0), Some(1.0), 3).unwrap(),
            16.5,
            epsilon = 1e-12
        );
        // Large-t limit: ν⁴ + nσν² = 4 for ν = σ = 1, n = 3.
        let g = gamma_nonzero_mean(10_000_000, Some(15.0), Some(1.0), Some(1.0), Some(1.0), 3)
            .unwrap();
        assert_abs_diff_eq!(g, 4.0, epsilon = 1e-5);
        assert!(matches!(
            gamma_nonzero_mean(1, Some(1.0), Some(1.0), Some(1.0), Some(1.0), 3),
            Err(Error::BoundNotValidYet { t: 1, min_t: 2 })
        ));
    }

    #[test]
    fn radii_decrease_in_delta() {
        for &(lo, hi) in &[(0.1, 0.2), (0.3, 0.5), (0.5, 0.9)] {
            assert!(
                markov_radius_zero_mean(10, 3, lo).unwrap()
                    > markov_radius_zero_mean(10, 3, hi).unwrap()
            );
            assert!(
                chebyshev_radius_zero_mean(10, 3, lo).unwrap()
                    > chebyshev_radius_zero_mean(10, 3, hi).unwrap()
            );
            assert!(
                markov_radius_nonzero_mean(10, 3, lo).unwrap()
                    > markov_radius_nonzero_mean(10, 3, hi).unwrap()
            );
            assert!(
                chebyshev_radius_nonzero_mean(10, 3, lo).unwrap()
                    > chebyshev_radius_nonzero_mean(10, 3, hi).unwrap()
            );
        }
    }

    #[test]
    fn markov_radii_approach_n_over_delta() {
        let target = 3.0 / 0.3;
        let r = markov_radius_zero_mean(1_000_000, 3, 0.3).unwrap();
        assert!((r - target).abs() / target < 1e-3, "zero-mean limit: {r}");
        let r = markov_radius_nonzero_mean(1_000_000, 3, 0.3).unwrap();
        assert!((r - target).abs() / target < 1e-3, "unknown-mean limit: {r}");
    }

    #[test]
    fn zero_mean_selector_schedule() {
        // n = 3, δ = 0.3: all-t through t = 4, Markov for 5..=9 (the
        // comparison condition 2(t−1)/(t−n−3) stays ≥ 4.9 through t = 9),
        // Chebyshev from t = 10 on (2·9/4 = 4.5 < 4.9).
        for t in 1..=4 {
            assert_eq!(
                select_bound_zero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::AllTZeroMean,
                "t={t}"
            );
        }
        for t in 5..=9 {
            assert_eq!(
                select_bound_zero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::MarkovZeroMean,
                "t={t}"
            );
        }
        for t in 10..=60 {
            assert_eq!(
                select_bound_zero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::ChebyshevZeroMean,
                "t={t}"
            );
        }
        // Without σ the early branch cannot run.
        assert!(matches!(
            select_bound_zero_mean(2, 3, 0.3, false),
            Err(Error::ConfigError(_))
        ));
        assert!(select_bound_zero_mean(5, 3, 0.3, false).is_ok());
    }

    #[test]
    fn nonzero_mean_selector_schedule() {
        // n = 3, δ = 0.3: all-t through t = 5, Markov for 6..=10,
        // Chebyshev from t = 11 (2·9/4 = 4.5 < 4.9; at t = 12, 2·10/5 = 4).
        for t in 2..=5 {
            assert_eq!(
                select_bound_nonzero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::AllTNonZeroMean,
                "t={t}"
            );
        }
        for t in 6..=10 {
            assert_eq!(
                select_bound_nonzero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::MarkovNonZeroMean,
                "t={t}"
            );
        }
        for t in 11..=60 {
            assert_eq!(
                select_bound_nonzero_mean(t, 3, 0.3, true).unwrap(),
                BoundKind::ChebyshevNonZeroMean,
                "t={t}"
            );
        }
        assert!(matches!(
            select_bound_nonzero_mean(1, 3, 0.3, true),
            Err(Error::BoundNotValidYet { t: 1, min_t: 2 })
        ));
    }

    #[test]
    fn small_delta_always_prefers_chebyshev() {
        // Below the all-t threshold δ < (2n+3−√(3(n+1)(n+3)))/n ≈ 0.1716
        // (n = 3), the Chebyshev branch wins at every valid t.
        let thr = generic::chebyshev_delta_threshold_all_t(3.0f64);
        assert_abs_diff_eq!(thr, (9.0 - 72.0f64.sqrt()) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thr, 0.171_572_875_253_809_9, epsilon = 1e-12);
        let delta = 0.17;
        for t in 7..=200 {
            assert_eq!(
                select_bound_zero_mean(t, 3, delta, true).unwrap(),
                BoundKind::ChebyshevZeroMean,
                "t={t}"
            );
        }
        // Above the large-t threshold ≈ 0.4514, Markov wins at every t.
        let thr = generic::chebyshev_delta_threshold_large_t(3.0f64);
        assert_abs_diff_eq!(thr, (4.0 - 7.0f64.sqrt()) / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(thr, 0.451_416_229_667, epsilon = 1e-9);
        for t in 7..=10_000 {
            assert_eq!(
                select_bound_zero_mean(t, 3, 0.46, true).unwrap(),
                BoundKind::MarkovZeroMean,
                "t={t}"
            );
        }
    }

    #[test]
    fn markov_vs_allt_rows() {
        // Spot: Σ̂ = I, H = I, n = 3, t = 6, σ = 1, δ = 0.3:
        // LHS = (6/2)·1 = 3, RHS = 2(1+√(24/1.8)) ≈ 9.30 → Markov tighter.
        let id = DMatrix::identity(3, 3);
        let rows = markov_vs_allt_test(&id, &id, 6, 3, 0.3, Some(1.0)).unwrap();
        assert_eq!(rows, vec![true, true, true]);

        // Guaranteed all-true for t ≥ 2(n+1); check the boundary and beyond
        // on random PSD Σ̂ and random rows.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for t in [8u64, 9, 12, 30] {
            for _ in 0..20 {
                let a = DMatrix::from_fn(3, 3, |_, _| {
                    rand::Rng::gen_range(&mut rng, -1.0..1.0)
                });
                let cov = &a * a.transpose();
                let h = DMatrix::from_fn(4, 3, |_, _| {
                    rand::Rng::gen_range(&mut rng, -2.0..2.0)
                });
                let rows = markov_vs_allt_test(&cov, &h, t, 3, 0.3, Some(1.0)).unwrap();
                assert!(rows.iter().all(|&b| b), "t={t}");
            }
        }
    }

    #[test]
    fn build_set_enforces_mode_and_validity() {
        let mut est = MomentEstimate::new(EstimatorMode::ZeroMean, 3).unwrap();
        for _ in 0..5 {
            est.update_zero_mean(&DVector::from_vec(vec![0.1, -0.2, 0.3])).unwrap();
        }
        let cfg = ConfidenceConfig::new(0.3).unwrap().with_sigma(1.0).unwrap();
        assert!(build_set(BoundKind::MarkovZeroMean, &est, &cfg).is_ok());
        assert!(matches!(
            build_set(BoundKind::MarkovNonZeroMean, &est, &cfg),
            Err(Error::WrongMode { .. })
        ));
        assert!(matches!(
            build_set(BoundKind::ChebyshevZeroMean, &est, &cfg),
            Err(Error::BoundNotValidYet { t: 5, min_t: 7 })
        ));
    }

    #[test]
    fn coverage_smoke_markov_zero_mean() {
        // Light version of the full Monte Carlo coverage gate: at t = 10,
        // n = 3, δ = 0.3 the fresh disturbance lands in the set far more
        // often than 1−δ (the bound is conservative).
        use rand_distr::StandardNormal;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = ConfidenceConfig::new(0.3).unwrap();
        let trials = 2000;
        let mut hits = 0;
        for _ in 0..trials {
            let mut est = MomentEstimate::new(EstimatorMode::ZeroMean, 3).unwrap();
            for _ in 0..10 {
                let w = DVector::from_fn(3, |_, _| {
                    rand::Rng::sample::<f64, _>(&mut rng, StandardNormal)
                });
                est.update_zero_mean(&w).unwrap();
            }
            let set = build_set(BoundKind::MarkovZeroMean, &est, &cfg).unwrap();
            let w = DVector::from_fn(3, |_, _| {
                rand::Rng::sample::<f64, _>(&mut rng, StandardNormal)
            });
            if set.contains(&w, 1e-9) {
                hits += 1;
            }
        }
        let freq = hits as f64 / trials as f64;
        assert!(freq >= 0.70, "coverage too low: {freq}");
    }

    #[test]
    fn generic_layer_agrees_with_f32() {
        // The generic forms evaluate consistently across float widths.
        let d64 = generic::markov_zero_mean_radius(10.0f64, 3.0, 0.3);
        let d32 = generic::markov_zero_mean_radius(10.0f32, 3.0, 0.3);
        assert!((d64 - d32 as f64).abs() < 1e-5);
        let (e64, v64) = generic::chebyshev_zero_mean_moments(10.0f64, 3.0);
        let (e32, v32) = generic::chebyshev_zero_mean_moments(10.0f32, 3.0);
        assert!((e64 - e32 as f64).abs() < 1e-5);
        assert!((v64 - v32 as f64).abs() < 1e-4);
    }
}
