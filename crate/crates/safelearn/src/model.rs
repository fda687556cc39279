//! Core value types: the control-affine system, half-plane safety
//! constraints, ellipsoidal (optionally ball-inflated) uncertainty sets, the
//! safety filter's outcome record, and the bag of distributional constants.
//!
//! Everything here is an immutable value object after construction; all
//! invariants (dimensions, symmetry, positive semi-definiteness, parameter
//! ranges) are enforced at the constructor boundary so downstream numerics
//! never have to re-validate.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bounds::BoundKind;
use crate::{Error, Result};

/// Relative symmetry tolerance (Frobenius) for shape matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Relative eigenvalue floor for shape matrices: eigenvalues in
/// `[-SYMMETRY_TOL·‖W‖_F, 0)` are treated as floating-point debris and
/// clamped to zero; anything lower is rejected as genuinely indefinite.
pub const PSD_CLAMP_TOL: f64 = 1e-10;

// ─────────────────────────────────────────────────────────────────────────────
// ControlAffineModel
// ─────────────────────────────────────────────────────────────────────────────

/// A discrete-time control-affine system `x⁺ = f(x) + g(x)u + w`.
///
/// `f` and `g` must be deterministic (same input, same output, bit for bit)
/// and re-entrant; they are shared behind `Arc` so models clone cheaply and
/// can be used from multiple threads.
#[derive(Clone)]
pub struct ControlAffineModel {
    n: usize,
    m: usize,
    f: Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    g: Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
}

impl fmt::Debug for ControlAffineModel {
    fn fmt(&self, fo: &mut fmt::Formatter<'_>) -> fmt::Result {
        fo.debug_struct("ControlAffineModel")
            .field("n", &self.n)
            .field("m", &self.m)
            .finish_non_exhaustive()
    }
}

impl ControlAffineModel {
    /// Builds a model from the drift `f` and input gain `g` evaluators.
    ///
    /// Output dimensions of `f` and `g` are checked lazily at every
    /// evaluation (they depend on `x`, so there is nothing to check here
    /// beyond positivity of the declared dimensions).
    pub fn new(
        n: usize,
        m: usize,
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::ContractViolation(format!(
                "model dimensions must be positive (n = {n}, m = {m})"
            )));
        }
        Ok(Self {
            n,
            m,
            f: Arc::new(f),
            g: Arc::new(g),
        })
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// Control dimension `m`.
    pub fn control_dim(&self) -> usize {
        self.m
    }

    /// Evaluates the drift `f(x)`, checking input and output dimensions.
    pub fn drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "drift evaluation",
                expected: format!("state of length {}", self.n),
                actual: format!("length {}", x.len()),
            });
        }
        let fx = (self.f)(x);
        if fx.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "drift output",
                expected: format!("length {}", self.n),
                actual: format!("length {}", fx.len()),
            });
        }
        Ok(fx)
    }

    /// Evaluates the input gain `g(x)`, checking that it is `n × m`.
    pub fn gain(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "gain evaluation",
                expected: format!("state of length {}", self.n),
                actual: format!("length {}", x.len()),
            });
        }
        let gx = (self.g)(x);
        if gx.nrows() != self.n || gx.ncols() != self.m {
            return Err(Error::DimensionMismatch {
                context: "gain output",
                expected: format!("{}x{}", self.n, self.m),
                actual: format!("{}x{}", gx.nrows(), gx.ncols()),
            });
        }
        Ok(gx)
    }
}

/// The nominal one-step prediction `x̂⁺ = f(x) + g(x)u` (no noise term).
///
/// This is the reference point both for constraint tightening and for
/// residual extraction: the observed `x⁺` minus this prediction is exactly
/// the realized disturbance.
pub fn predict_nominal(
    model: &ControlAffineModel,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if u.len() != model.m {
        return Err(Error::DimensionMismatch {
            context: "predict_nominal control",
            expected: format!("length {}", model.m),
            actual: format!("length {}", u.len()),
        });
    }
    let fx = model.drift(x)?;
    let gx = model.gain(x)?;
    Ok(fx + gx * u)
}

// ─────────────────────────────────────────────────────────────────────────────
// SafetySpec
// ─────────────────────────────────────────────────────────────────────────────

/// One time step's half-plane safety constraints `H x ≤ h` (`p` rows).
///
/// Rows of `H` must be nonzero: a zero row is either vacuous or infeasible
/// depending on `h`, and in both cases indicates a bug in constraint
/// generation.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    h_mat: DMatrix<f64>,
    h_vec: DVector<f64>,
}

impl SafetySpec {
    /// Validates and wraps the constraint system.
    pub fn new(h_mat: DMatrix<f64>, h_vec: DVector<f64>) -> Result<Self> {
        let p = h_mat.nrows();
        if p == 0 {
            return Err(Error::ContractViolation(
                "safety spec needs at least one constraint row".into(),
            ));
        }
        if h_mat.ncols() == 0 {
            return Err(Error::ContractViolation(
                "safety spec needs a positive state dimension".into(),
            ));
        }
        if h_vec.len() != p {
            return Err(Error::DimensionMismatch {
                context: "safety spec right-hand side",
                expected: format!("length {p}"),
                actual: format!("length {}", h_vec.len()),
            });
        }
        if h_mat.iter().any(|v| !v.is_finite()) || h_vec.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation(
                "safety spec entries must be finite".into(),
            ));
        }
        for i in 0..p {
            if h_mat.row(i).norm() == 0.0 {
                return Err(Error::ContractViolation(format!(
                    "safety spec row {i} is the zero vector"
                )));
            }
        }
        Ok(Self { h_mat, h_vec })
    }

    /// Number of constraint rows `p`.
    pub fn p(&self) -> usize {
        self.h_mat.nrows()
    }

    /// State dimension the constraints act on.
    pub fn state_dim(&self) -> usize {
        self.h_mat.ncols()
    }

    /// The constraint matrix `H` (`p × n`).
    pub fn h_matrix(&self) -> &DMatrix<f64> {
        &self.h_mat
    }

    /// The right-hand side `h` (`p`).
    pub fn h_vector(&self) -> &DVector<f64> {
        &self.h_vec
    }

    /// Slack `h − H x` of a state: nonnegative components mean satisfied
    /// rows. The minimum entry is the worst-row margin.
    pub fn slack(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "safety slack",
                expected: format!("length {}", self.state_dim()),
                actual: format!("length {}", x.len()),
            });
        }
        Ok(&self.h_vec - &self.h_mat * x)
    }

    /// Whether some row is violated by more than `tol`.
    pub fn is_violated(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.slack(x)?.iter().any(|&s| s < -tol))
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// UncertaintySet
// ─────────────────────────────────────────────────────────────────────────────

/// A high-confidence disturbance set
/// `{ c + W^{1/2} v + b : ‖v‖₂² ≤ d, ‖b‖₂ ≤ r }`:
/// an ellipsoid with center `c`, shape `W`, and squared radius `d`, optionally
/// inflated (Minkowski sum) by a Euclidean ball of radius `r`.
///
/// With `r = 0` this is the plain confidence ellipsoid produced by the
/// covariance-only bounds; `r > 0` appears when the mean estimate carries its
/// own confidence ball on top of the covariance ellipsoid.
///
/// `W` is symmetrized and eigenvalue-clamped at construction (tolerance
/// [`PSD_CLAMP_TOL`] relative to `‖W‖_F`), so `W^{1/2}` downstream never
/// encounters `-1e-16`-style eigenvalues. A matrix that is already symmetric
/// PSD is stored bit-for-bit unchanged, which makes construction idempotent.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintySet {
    center: DVector<f64>,
    shape: DMatrix<f64>,
    radius: f64,
    ball: f64,
}

impl UncertaintySet {
    /// Validates, symmetrizes, and eigenvalue-clamps the set description.
    pub fn new(center: DVector<f64>, shape: DMatrix<f64>, radius: f64, ball: f64) -> Result<Self> {
        let n = center.len();
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "uncertainty set shape",
                expected: format!("{n}x{n}"),
                actual: format!("{}x{}", shape.nrows(), shape.ncols()),
            });
        }
        if center.iter().any(|v| !v.is_finite()) || shape.iter().any(|v| !v.is_finite()) {
            return Err(Error::ContractViolation(
                "uncertainty set entries must be finite".into(),
            ));
        }
        if !radius.is_finite() || radius < 0.0 {
            return Err(Error::ContractViolation(format!(
                "uncertainty set radius must be finite and nonnegative, got {radius}"
            )));
        }
        if !ball.is_finite() || ball < 0.0 {
            return Err(Error::ContractViolation(format!(
                "uncertainty set ball inflation must be finite and nonnegative, got {ball}"
            )));
        }

        let fro = shape.norm();
        let asym = (&shape - shape.transpose()).norm();
        if asym > SYMMETRY_TOL * fro {
            return Err(Error::ContractViolation(format!(
                "uncertainty set shape is asymmetric: ‖W−Wᵀ‖_F = {asym:.3e} \
                 exceeds {SYMMETRY_TOL:e}·‖W‖_F"
            )));
        }

        let sym = (&shape + shape.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig < -PSD_CLAMP_TOL * fro {
            return Err(Error::ContractViolation(format!(
                "uncertainty set shape is indefinite: min eigenvalue {min_eig:.3e} \
                 below -{PSD_CLAMP_TOL:e}·‖W‖_F"
            )));
        }
        // Only touch the matrix if clamping is actually needed; an already
        // clean input is stored unchanged so reconstruction is idempotent.
        let shape = if min_eig < 0.0 {
            let clamped = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
            let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
            (&rebuilt + rebuilt.transpose()) * 0.5
        } else if asym > 0.0 {
            sym
        } else {
            shape
        };

        Ok(Self {
            center,
            shape,
            radius,
            ball,
        })
    }

    /// Dimension of the ambient disturbance space.
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Ellipsoid center `c`.
    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Shape matrix `W` (symmetric PSD).
    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    /// Squared ellipsoid radius `d` (the bound on `‖v‖₂²`).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Ball inflation radius `r` (`0` for plain ellipsoids).
    pub fn ball_radius(&self) -> f64 {
        self.ball
    }

    /// Support function `sup { aᵀw : w ∈ set } = aᵀc + √d·‖W^{1/2}a‖ + r‖a‖`.
    ///
    /// This is the exact worst-case value of a linear functional over the
    /// set, and the basis of all constraint tightening.
    pub fn support(&self, a: &DVector<f64>) -> Result<f64> {
        if a.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "support function direction",
                expected: format!("length {}", self.dim()),
                actual: format!("length {}", a.len()),
            });
        }
        let half = crate::reformulate::sqrt_psd(&self.shape)?;
        Ok(self.center.dot(a) + self.radius.sqrt() * (half * a).norm() + self.ball * a.norm())
    }

    /// Membership test: is `w` within distance `tol` of the set?
    ///
    /// Computes the Euclidean distance from `w − c` to the ellipsoid
    /// `{W^{1/2}v : ‖v‖² ≤ d}` (projection via the scaled eigenbasis and a
    /// 1-D bisection on the Lagrange multiplier, handling rank-deficient `W`)
    /// and compares it against `r + tol`.
    pub fn contains(&self, w: &DVector<f64>, tol: f64) -> Result<bool> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "membership test",
                expected: format!("length {}", self.dim()),
                actual: format!("length {}", w.len()),
            });
        }
        let y = w - &self.center;
        let eig = self.shape.clone().symmetric_eigen();
        let yp = eig.eigenvectors.transpose() * y;
        let lam_max = eig.eigenvalues.max().max(0.0);
        let lam_eps = lam_max * 1e-14;

        // Components in (numerically) null directions of W cannot be reached
        // by the ellipsoid at all; they must be absorbed by the ball.
        let mut fixed_sq = 0.0;
        let mut active: Vec<(f64, f64)> = Vec::new(); // (lambda_i, y'_i)
        for i in 0..yp.len() {
            let l = eig.eigenvalues[i];
            if l > lam_eps {
                active.push((l, yp[i]));
            } else {
                fixed_sq += yp[i] * yp[i];
            }
        }

        let dist_sq = if active.is_empty() {
            // W ≈ 0: the ellipsoid is just the center point.
            fixed_sq
        } else if self.radius == 0.0 {
            // d = 0: likewise a single point, but with full-rank reach.
            fixed_sq + active.iter().map(|&(_, v)| v * v).sum::<f64>()
        } else {
            // Inside the (scaled) ellipsoid already?
            let q: f64 = active.iter().map(|&(l, v)| v * v / l).sum();
            if q <= self.radius {
                fixed_sq
            } else {
                // Project onto {z : Σ z_i²/λ_i ≤ d}: z_i = λ_i y'_i/(λ_i+α)
                // with α solving Σ λ_i y'_i²/(λ_i+α)² = d (decreasing in α).
                let phi = |alpha: f64| -> f64 {
                    active
                        .iter()
                        .map(|&(l, v)| l * v * v / ((l + alpha) * (l + alpha)))
                        .sum()
                };
                let mut hi = lam_max.max(1.0);
                let mut grow = 0;
                while phi(hi) > self.radius && grow < 512 {
                    hi *= 2.0;
                    grow += 1;
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if phi(mid) > self.radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let alpha = 0.5 * (lo + hi);
                fixed_sq
                    + active
                        .iter()
                        .map(|&(l, v)| {
                            let miss = alpha * v / (l + alpha);
                            miss * miss
                        })
                        .sum::<f64>()
            }
        };

        Ok(dist_sq.sqrt() <= self.ball + tol)
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// SafeControlOutcome
// ─────────────────────────────────────────────────────────────────────────────

/// Feasibility status of a safety-filter solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterStatus {
    /// The tightened problem was feasible at the requested δ.
    Feasible,
    /// Infeasible even with δ relaxed arbitrarily close to 1; the filter
    /// reports this and returns the unmodified nominal input — whether to
    /// stop or proceed is the caller's policy.
    InfeasibleAtDelta,
    /// Infeasible at the requested δ but feasible at some larger δ′ < 1,
    /// found by bisection; the returned control is safe at level δ′.
    FeasibleAtRelaxedDelta,
}

impl fmt::Display for FilterStatus {
    fn fmt(&self, fo: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            FilterStatus::Feasible => "Feasible",
            FilterStatus::InfeasibleAtDelta => "InfeasibleAtDelta",
            FilterStatus::FeasibleAtRelaxedDelta => "FeasibleAtRelaxedDelta",
        };
        fo.write_str(s)
    }
}

/// Result of one safety-filter invocation.
#[derive(Debug, Clone)]
pub struct SafeControlOutcome {
    /// The control to apply.
    pub control: DVector<f64>,
    /// Feasibility status (see [`FilterStatus`]).
    pub status: FilterStatus,
    /// The risk level actually certified: the requested δ when `Feasible`,
    /// the bisection result for `FeasibleAtRelaxedDelta`, and `1.0` when
    /// `InfeasibleAtDelta` (no guarantee).
    pub achieved_delta: f64,
    /// Per-row constraint tightening `e` that was enforced.
    pub tightening: DVector<f64>,
    /// Which confidence bound produced the uncertainty set.
    pub bound_used: BoundKind,
}

// ─────────────────────────────────────────────────────────────────────────────
// ConfidenceConfig
// ─────────────────────────────────────────────────────────────────────────────

/// Distributional constants the bounds may require, besides the risk level δ.
///
/// Each optional constant corresponds to a standing assumption on the noise:
/// `sigma` is a uniform covariance bound (`Σ_w ⪯ σI`), `zeta` bounds the
/// fourth moment `E‖w‖⁴`, `nu` bounds the mean norm `‖μ_w‖`, and `kappa`
/// bounds the third-moment norm `‖E{w wᵀw}‖`. An operation that needs an
/// absent constant fails with a configuration error — there are no implicit
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceConfig {
    delta: f64,
    sigma: Option<f64>,
    zeta: Option<f64>,
    nu: Option<f64>,
    kappa: Option<f64>,
}

impl ConfidenceConfig {
    /// Creates a config with risk level `delta ∈ (0, 1)` and no constants.
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::ConfigError(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            delta,
            sigma: None,
            zeta: None,
            nu: None,
            kappa: None,
        })
    }

    /// Adds the uniform covariance bound σ (> 0).
    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::ConfigError(format!(
                "sigma must be a positive finite scalar, got {sigma}"
            )));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    /// Adds the fourth-moment bound ζ (> 0).
    pub fn with_zeta(mut self, zeta: f64) -> Result<Self> {
        if !zeta.is_finite() || zeta <= 0.0 {
            return Err(Error::ConfigError(format!(
                "zeta must be a positive finite scalar, got {zeta}"
            )));
        }
        self.zeta = Some(zeta);
        Ok(self)
    }

    /// Adds the mean-norm bound ν (> 0).
    pub fn with_nu(mut self, nu: f64) -> Result<Self> {
        if !nu.is_finite() || nu <= 0.0 {
            return Err(Error::ConfigError(format!(
                "nu must be a positive finite scalar, got {nu}"
            )));
        }
        self.nu = Some(nu);
        Ok(self)
    }

    /// Adds the third-moment bound κ (> 0).
    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !kappa.is_finite() || kappa <= 0.0 {
            return Err(Error::ConfigError(format!(
                "kappa must be a positive finite scalar, got {kappa}"
            )));
        }
        self.kappa = Some(kappa);
        Ok(self)
    }

    /// Risk level δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// σ if provided.
    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    /// ζ if provided.
    pub fn zeta(&self) -> Option<f64> {
        self.zeta
    }

    /// ν if provided.
    pub fn nu(&self) -> Option<f64> {
        self.nu
    }

    /// κ if provided.
    pub fn kappa(&self) -> Option<f64> {
        self.kappa
    }

    /// Same constants at a different risk level (used by the δ-bisection).
    pub fn at_delta(&self, delta: f64) -> Result<Self> {
        let mut c = Self::new(delta)?;
        c.sigma = self.sigma;
        c.zeta = self.zeta;
        c.nu = self.nu;
        c.kappa = self.kappa;
        Ok(c)
    }

    pub(crate) fn require_sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| {
            Error::ConfigError("this bound requires the covariance bound sigma, which was not provided".into())
        })
    }

    pub(crate) fn require_zeta(&self) -> Result<f64> {
        self.zeta.ok_or_else(|| {
            Error::ConfigError("this bound requires the fourth-moment bound zeta, which was not provided".into())
        })
    }

    pub(crate) fn require_nu(&self) -> Result<f64> {
        self.nu.ok_or_else(|| {
            Error::ConfigError("this bound requires the mean-norm bound nu, which was not provided".into())
        })
    }

    pub(crate) fn require_kappa(&self) -> Result<f64> {
        self.kappa.ok_or_else(|| {
            Error::ConfigError("this bound requires the third-moment bound kappa, which was not provided".into())
        })
    }
}

// ─────────────────────────────────────────────────────────────────────────────
// Tests
// ─────────────────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn identity_model(n: usize, m: usize) -> ControlAffineModel {
        ControlAffineModel::new(
            n,
            m,
            |x: &DVector<f64>| x.clone(),
            move |_x: &DVector<f64>| DMatrix::zeros(2, 1),
        )
        .unwrap()
    }

    #[test]
    fn predict_zero_gain_returns_drift() {
        let model = identity_model(2, 1);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let u = DVector::from_vec(vec![9.0]);
        let out = predict_nominal(&model, &x, &u).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn predict_pure_gain_returns_control() {
        let model = ControlAffineModel::new(
            2,
            2,
            |_x: &DVector<f64>| DVector::zeros(2),
            |_x: &DVector<f64>| DMatrix::identity(2, 2),
        )
        .unwrap();
        let x = DVector::from_vec(vec![5.0, 5.0]);
        let u = DVector::from_vec(vec![1.0, -1.0]);
        let out = predict_nominal(&model, &x, &u).unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn predict_unicycle_spot_value() {
        let model = crate::scenario::unicycle_model(0.1).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0, -2.4]);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let out = predict_nominal(&model, &x, &u).unwrap();
        assert_abs_diff_eq!(out[0], 0.1 * (-2.4f64).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 0.1 * (-2.4f64).sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(out[2], -2.4, epsilon = 1e-15);
        // Published 4-decimal reference values.
        assert_abs_diff_eq!(out[0], -0.0737, epsilon = 5e-5);
        assert_abs_diff_eq!(out[1], -0.0675, epsilon = 5e-5);
    }

    #[test]
    fn predict_checks_dimensions() {
        let model = identity_model(2, 1);
        let bad_x = DVector::from_vec(vec![1.0]);
        let u = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            predict_nominal(&model, &bad_x, &u),
            Err(Error::DimensionMismatch { .. })
        ));
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let bad_u = DVector::from_vec(vec![0.0, 0.0]);
        assert!(matches!(
            predict_nominal(&model, &x, &bad_u),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn safety_spec_rejects_zero_row_and_empty() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let rhs = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            SafetySpec::new(h, rhs),
            Err(Error::ContractViolation(_))
        ));
        assert!(SafetySpec::new(DMatrix::zeros(0, 2), DVector::zeros(0)).is_err());
    }

    #[test]
    fn safety_spec_slack_and_violation() {
        let spec = SafetySpec::new(
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_vec(vec![3.0]),
        )
        .unwrap();
        let x = DVector::from_vec(vec![5.0, 0.0]);
        assert_eq!(spec.slack(&x).unwrap()[0], -2.0);
        assert!(spec.is_violated(&x, 1e-8).unwrap());
        let y = DVector::from_vec(vec![2.0, 7.0]);
        assert!(!spec.is_violated(&y, 1e-8).unwrap());
    }

    #[test]
    fn uncertainty_set_rejects_asymmetric_and_indefinite() {
        let c = DVector::zeros(2);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(UncertaintySet::new(c.clone(), asym, 1.0, 0.0).is_err());
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(UncertaintySet::new(c, indef, 1.0, 0.0).is_err());
    }

    #[test]
    fn uncertainty_set_clamps_floating_point_debris() {
        // Eigenvalue at -1e-12 relative: inside the clamp band.
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let set = UncertaintySet::new(DVector::zeros(2), w, 4.0, 0.0).unwrap();
        let eig = set.shape().clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() >= 0.0);
    }

    #[test]
    fn uncertainty_set_preserves_clean_input_exactly() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.25, 0.25, 1.0]);
        let set = UncertaintySet::new(DVector::zeros(2), w.clone(), 1.0, 0.0).unwrap();
        assert_eq!(set.shape(), &w);
    }

    #[test]
    fn membership_matches_quadratic_form_for_plain_ellipsoid() {
        let w = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let set = UncertaintySet::new(DVector::zeros(2), w, 2.0, 0.0).unwrap();
        // Point with quadratic form exactly d: boundary.
        let on = DVector::from_vec(vec![(8.0f64).sqrt(), 0.0]); // x²/4 = 2
        assert!(set.contains(&on, 1e-9).unwrap());
        let outside = DVector::from_vec(vec![3.0, 0.0]); // 9/4 > 2
        assert!(!set.contains(&outside, 1e-9).unwrap());
        let inside = DVector::from_vec(vec![1.0, 1.0]); // 1/4 + 1 = 1.25 < 2
        assert!(set.contains(&inside, 1e-9).unwrap());
    }

    #[test]
    fn membership_with_ball_inflation() {
        // Unit disk (W=I, d=1) inflated by r=0.5: points at radius 1.5 are on
        // the boundary.
        let set = UncertaintySet::new(DVector::zeros(2), DMatrix::identity(2, 2), 1.0, 0.5).unwrap();
        let boundary = DVector::from_vec(vec![1.5, 0.0]);
        assert!(set.contains(&boundary, 1e-9).unwrap());
        let outside = DVector::from_vec(vec![1.51, 0.0]);
        assert!(!set.contains(&outside, 1e-9).unwrap());
    }

    #[test]
    fn membership_handles_degenerate_shape() {
        // Rank-1 shape: the ellipsoid is a segment along e1; off-axis points
        // must be covered by the ball alone.
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let set = UncertaintySet::new(DVector::zeros(2), w, 4.0, 0.3).unwrap();
        assert!(set.contains(&DVector::from_vec(vec![2.0, 0.25]), 1e-9).unwrap());
        assert!(!set.contains(&DVector::from_vec(vec![2.0, 0.35]), 1e-9).unwrap());
        assert!(!set.contains(&DVector::from_vec(vec![2.4, 0.0]), 1e-9).unwrap());
    }

    #[test]
    fn support_function_spot_values() {
        let set = UncertaintySet::new(
            DVector::from_vec(vec![1.0, 0.0]),
            DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]),
            9.0,
            0.5,
        )
        .unwrap();
        // a = e1: support = 1 + 3·2 + 0.5 = 7.5.
        let a = DVector::from_vec(vec![1.0, 0.0]);
        assert_abs_diff_eq!(set.support(&a).unwrap(), 7.5, epsilon = 1e-12);
    }

    #[test]
    fn confidence_config_validation() {
        assert!(ConfidenceConfig::new(0.0).is_err());
        assert!(ConfidenceConfig::new(1.0).is_err());
        let c = ConfidenceConfig::new(0.3).unwrap().with_sigma(1.0).unwrap();
        assert_eq!(c.delta(), 0.3);
        assert_eq!(c.sigma(), Some(1.0));
        assert!(c.require_zeta().is_err());
        assert!(ConfidenceConfig::new(0.3).unwrap().with_sigma(-1.0).is_err());
    }
}
