//! The safety filter: minimally modifies a nominal control so the *next*
//! state satisfies its half-plane constraints with probability ≥ 1−δ.
//!
//! One call chains the whole pipeline: pick the sharpest valid confidence
//! bound for the current sample count, build the disturbance set, tighten
//! the constraints, and project the nominal control onto the tightened
//! polyhedron. When the polyhedron is empty at the requested risk level,
//! the filter searches — by bisection on δ, along which feasibility is
//! monotone because every radius shrinks as δ grows — for the smallest
//! achievable risk level, and reports it honestly instead of failing.

use nalgebra::DVector;

use crate::bounds::{self, BoundKind};
use crate::model::{
    ConfidenceConfig, ControlAffineModel, FilterStatus, SafeControlOutcome, SafetySpec,
};
use crate::moments::MomentEstimate;
use crate::qp::{self, QpOutcome};
use crate::reformulate::{tighten, TightenedConstraints};
use crate::{Error, Result};

/// Distance minimized by the filter. Only the squared Euclidean norm
/// ships; the tag exists so a different metric is an additive change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceMetric {
    #[default]
    EuclideanSquared,
}

/// Which estimation pipeline the filter runs (determines the family of
/// bounds it may select from).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Zero-mean Gaussian noise: all-t → Markov → Chebyshev cascade.
    ZeroMean,
    /// Unknown-mean Gaussian noise: the analogous cascade.
    NonZeroMean,
    /// Paired-residual estimator for noisy linear measurements.
    NoisyLti,
    /// Fourth-moment bound, known zero mean.
    NonGaussianZeroMean,
    /// Fourth-moment bound, unknown mean.
    NonGaussianNonZeroMean,
}

/// Filter behavior knobs. `delta` is the requested per-step risk level;
/// the bisection parameters govern the fallback search when the problem
/// is infeasible at `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    distance: DistanceMetric,
    delta: f64,
    bisection_tol: f64,
    bisection_max_iters: u32,
    mode: FilterMode,
}

/// Upper end of the bisection bracket: risk levels this close to 1 are
/// "no guarantee requested" territory, and the bound formulas need δ < 1.
const DELTA_CEILING: f64 = 1.0 - 1e-6;

impl FilterConfig {
    /// A config with the default bisection parameters
    /// (tolerance `1e−3` on δ, at most 40 halvings).
    pub fn new(mode: FilterMode, delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::ConfigError(format!(
                "filter risk level delta must lie in (0, 1), got {delta}"
            )));
        }
        Ok(Self {
            distance: DistanceMetric::EuclideanSquared,
            delta,
            bisection_tol: 1e-3,
            bisection_max_iters: 40,
            mode,
        })
    }

    pub fn with_bisection_tol(mut self, tol: f64) -> Result<Self> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(Error::ConfigError(format!(
                "bisection tolerance must be positive, got {tol}"
            )));
        }
        self.bisection_tol = tol;
        Ok(self)
    }

    pub fn with_bisection_max_iters(mut self, iters: u32) -> Self {
        self.bisection_max_iters = iters;
        self
    }

    pub fn mode(&self) -> FilterMode {
        self.mode
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn distance(&self) -> DistanceMetric {
        self.distance
    }
}

/// Selects the bound kind for this mode at sample count `t` and risk
/// level `delta` — delegating to the zero-mean/unknown-mean cascades, or
/// pinning the single applicable kind for the other modes.
pub fn select_kind(
    mode: FilterMode,
    t: u64,
    n: usize,
    delta: f64,
    sigma_available: bool,
) -> Result<BoundKind> {
    match mode {
        FilterMode::ZeroMean => bounds::select_bound_zero_mean(t, n, delta, sigma_available),
        FilterMode::NonZeroMean => bounds::select_bound_nonzero_mean(t, n, delta, sigma_available),
        FilterMode::NoisyLti => {
            let kind = BoundKind::NoisyLti;
            let min_t = kind.min_t(n);
            if t < min_t {
                return Err(Error::BoundNotValidYet { t, min_t });
            }
            Ok(kind)
        }
        FilterMode::NonGaussianZeroMean => {
            let kind = BoundKind::NonGaussianZeroMean;
            let min_t = kind.min_t(n);
            if t < min_t {
                return Err(Error::BoundNotValidYet { t, min_t });
            }
            Ok(kind)
        }
        FilterMode::NonGaussianNonZeroMean => {
            let kind = BoundKind::NonGaussianNonZeroMean;
            let min_t = kind.min_t(n);
            if t < min_t {
                return Err(Error::BoundNotValidYet { t, min_t });
            }
            Ok(kind)
        }
    }
}

struct Attempt {
    kind: BoundKind,
    constraints: TightenedConstraints,
    outcome: QpOutcome,
}

/// Runs the safety filter once.
///
/// `spec_next` is the safety specification the *next* state must satisfy;
/// `est` is the current moment estimate (consistent with `cfg.mode()`);
/// `consts` supplies the noise-model constants (σ, ζ, ν, κ) the selected
/// bound may need. The outcome reports the filtered control, the achieved
/// risk level, and which bound produced the tightening.
pub fn filter_control(
    model: &ControlAffineModel,
    x: &DVector<f64>,
    u_bar: &DVector<f64>,
    spec_next: &SafetySpec,
    est: &MomentEstimate,
    cfg: &FilterConfig,
    consts: &ConfidenceConfig,
) -> Result<SafeControlOutcome> {
    let n = model.state_dim();
    if est.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "filter estimator dimension",
            expected: format!("{n}"),
            actual: format!("{}", est.dim()),
        });
    }
    if spec_next.state_dim() != n {
        return Err(Error::DimensionMismatch {
            context: "filter safety spec dimension",
            expected: format!("{n} state columns"),
            actual: format!("{} state columns", spec_next.state_dim()),
        });
    }
    if u_bar.len() != model.control_dim() {
        return Err(Error::DimensionMismatch {
            context: "filter nominal control",
            expected: format!("length {}", model.control_dim()),
            actual: format!("length {}", u_bar.len()),
        });
    }

    let f_x = model.drift(x)?;
    let g_x = model.gain(x)?;
    let sigma_available = consts.sigma().is_some();
    let t = est.t();

    let attempt = |delta: f64| -> Result<Attempt> {
        let kind = select_kind(cfg.mode(), t, n, delta, sigma_available)?;
        let set = bounds::build_set_at_delta(kind, est, consts, delta)?;
        let constraints = tighten(&set, spec_next, &f_x, &g_x)?;
        let outcome = qp::solve_qp(constraints.a_matrix(), constraints.b_vector(), u_bar)?;
        Ok(Attempt { kind, constraints, outcome })
    };

    // Requested risk level first.
    let at_request = attempt(cfg.delta())?;
    if let QpOutcome::Optimal(sol) = at_request.outcome {
        return Ok(SafeControlOutcome {
            control: sol.u,
            status: FilterStatus::Feasible,
            achieved_delta: cfg.delta(),
            tightening: at_request.constraints.tightening().clone(),
            bound_used: at_request.kind,
        });
    }

    // Infeasible at the request. Feasibility is monotone in δ (all radii
    // shrink), so probe the ceiling, then bisect for the smallest feasible
    // level.
    let at_ceiling = attempt(DELTA_CEILING)?;
    if matches!(at_ceiling.outcome, QpOutcome::Infeasible(_)) {
        // No risk level helps; report and hand back the nominal control so
        // the caller can decide policy. The tightening reported is the one
        // at the *requested* level.
        return Ok(SafeControlOutcome {
            control: u_bar.clone(),
            status: FilterStatus::InfeasibleAtDelta,
            achieved_delta: 1.0,
            tightening: at_request.constraints.tightening().clone(),
            bound_used: at_request.kind,
        });
    }

    let mut lo = cfg.delta(); // infeasible
    let mut hi = DELTA_CEILING; // feasible
    let mut best = at_ceiling;
    for _ in 0..cfg.bisection_max_iters {
        if hi - lo <= cfg.bisection_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let at_mid = attempt(mid)?;
        if matches!(at_mid.outcome, QpOutcome::Optimal(_)) {
            hi = mid;
            best = at_mid;
        } else {
            lo = mid;
        }
    }
    let QpOutcome::Optimal(sol) = best.outcome else {
        // Unreachable: `best` is only ever replaced by feasible attempts.
        return Err(Error::SolverError("bisection lost its feasible endpoint".into()));
    };
    Ok(SafeControlOutcome {
        control: sol.u,
        status: FilterStatus::FeasibleAtRelaxedDelta,
        achieved_delta: hi,
        tightening: best.constraints.tightening().clone(),
        bound_used: best.kind,
    })
}
