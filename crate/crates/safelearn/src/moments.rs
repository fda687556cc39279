//! Online estimation of the process-noise mean and covariance from one-step
//! prediction residuals.
//!
//! Three estimation regimes share one storage layout:
//!
//! - **ZeroMean** — the noise is known to have zero mean; the covariance is
//!   the `1/t`-normalized raw scatter `Σ w_k w_kᵀ / t`.
//! - **NonZeroMean** — both moments unknown; the mean is the sample average
//!   and the covariance the `1/(t−1)`-normalized scatter about it. Updates
//!   use a numerically stable streaming recursion whose state equals the
//!   batch formulas exactly (up to roundoff) — a naive recursion that
//!   re-centers with the post-update mean would not, and the distributional
//!   characterization of the estimator depends on the batch form.
//! - **NoisyLti** — for linear dynamics observed through measurement noise,
//!   residuals over *pairs* of consecutive measurements
//!   `y_{2k+1} − A y_{2k} − B u_{2k}` estimate an inflated covariance
//!   `Σ_w + Σ_v + AΣ_vAᵀ`; pairing keeps the terms independent.
//!
//! Storage is exactly `1 + n + n(n+1)/2` scalars (count, mean, packed
//! upper-triangular scatter) plus the mode tag — no residual history. This
//! matches the per-region footprint the spatial estimator advertises.

use nalgebra::{DMatrix, DVector};

use crate::model::{predict_nominal, ControlAffineModel};
use crate::{Error, Result};

/// Which estimation regime a [`MomentEstimate`] runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorMode {
    /// Noise has known zero mean; covariance only.
    ZeroMean,
    /// Mean and covariance both estimated.
    NonZeroMean,
    /// Paired-measurement estimator for LTI systems with measurement noise.
    NoisyLti,
}

impl EstimatorMode {
    pub(crate) fn name(self) -> &'static str {
        match self {
            EstimatorMode::ZeroMean => "ZeroMean",
            EstimatorMode::NonZeroMean => "NonZeroMean",
            EstimatorMode::NoisyLti => "NoisyLti",
        }
    }
}

/// Index into the packed upper triangle (row-major, diagonal included).
#[inline]
fn packed_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i - 1) / 2 + (j - i)
}

/// Length of the packed upper triangle for dimension `n`.
#[inline]
fn packed_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Streaming estimate of the noise moments. See the module docs for the
/// per-mode semantics of `t`, `mean`, and the scatter accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    mode: EstimatorMode,
    n: usize,
    /// ZeroMean/NonZeroMean: residual count. NoisyLti: raw measurement
    /// count (two per absorbed pair).
    t: u64,
    /// Running mean (all zeros in ZeroMean/NoisyLti modes).
    mean: DVector<f64>,
    /// Packed upper-triangular scatter accumulator. ZeroMean: `Σ wwᵀ`;
    /// NonZeroMean: centered scatter `Σ (w−μ̂)(w−μ̂)ᵀ`; NoisyLti: pair
    /// residual scatter.
    scatter: Vec<f64>,
}

impl MomentEstimate {
    /// Fresh estimator of dimension `n` in the given mode.
    pub fn new(mode: EstimatorMode, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ContractViolation(
                "estimator dimension must be positive".into(),
            ));
        }
        Ok(Self {
            mode,
            n,
            t: 0,
            mean: DVector::zeros(n),
            scatter: vec![0.0; packed_len(n)],
        })
    }

    /// Estimation mode.
    pub fn mode(&self) -> EstimatorMode {
        self.mode
    }

    /// Noise dimension `n`.
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Sample count: residuals seen (ZeroMean/NonZeroMean) or raw
    /// measurements consumed (NoisyLti; two per pair).
    pub fn t(&self) -> u64 {
        self.t
    }

    /// Number of absorbed measurement pairs (NoisyLti mode: `⌊t/2⌋`).
    pub fn pairs(&self) -> u64 {
        self.t / 2
    }

    fn check_mode(&self, expected: EstimatorMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::WrongMode {
                expected: expected.name(),
                actual: self.mode.name(),
            });
        }
        Ok(())
    }

    fn check_dim(&self, w: &DVector<f64>, context: &'static str) -> Result<()> {
        if w.len() != self.n {
            return Err(Error::DimensionMismatch {
                context,
                expected: format!("length {}", self.n),
                actual: format!("length {}", w.len()),
            });
        }
        Ok(())
    }

    /// Absorbs a residual under the zero-mean model: the raw scatter grows
    /// by `w wᵀ` and the covariance read-out is `scatter / t`.
    pub fn update_zero_mean(&mut self, w: &DVector<f64>) -> Result<()> {
        self.check_mode(EstimatorMode::ZeroMean)?;
        self.check_dim(w, "zero-mean update")?;
        for i in 0..self.n {
            for j in i..self.n {
                self.scatter[packed_index(self.n, i, j)] += w[i] * w[j];
            }
        }
        self.t += 1;
        Ok(())
    }

    /// Absorbs a residual under the unknown-mean model.
    ///
    /// Streaming form: with `d = w − μ̂_old`, the mean moves by `d/t` and the
    /// centered scatter grows by `((t−1)/t)·ddᵀ`, which reproduces the batch
    /// `Σ (w_k − μ̂_t)(w_k − μ̂_t)ᵀ` exactly in exact arithmetic (the usual
    /// one-pass equivalence) and is symmetric by construction.
    pub fn update_nonzero_mean(&mut self, w: &DVector<f64>) -> Result<()> {
        self.check_mode(EstimatorMode::NonZeroMean)?;
        self.check_dim(w, "non-zero-mean update")?;
        self.t += 1;
        let t = self.t as f64;
        let d = w - &self.mean;
        self.mean += &d / t;
        let scale = (t - 1.0) / t;
        for i in 0..self.n {
            for j in i..self.n {
                self.scatter[packed_index(self.n, i, j)] += scale * d[i] * d[j];
            }
        }
        Ok(())
    }

    /// Absorbs one consecutive measurement pair `(y_{2k}, y_{2k+1})` with the
    /// control `u_{2k}` applied between them, for linear dynamics
    /// `x⁺ = Ax + Bu + w` observed as `y = x + v`.
    ///
    /// The pair residual `y_{2k+1} − A y_{2k} − B u_{2k}` equals
    /// `w_{2k} + v_{2k+1} − A v_{2k}`; its scatter (normalized by the pair
    /// count) estimates `Σ_w + Σ_v + AΣ_vAᵀ`, a deliberately inflated — and
    /// therefore safe — stand-in for `Σ_w`. Pairs are non-overlapping so the
    /// residuals stay independent. Taking the pair as one atomic argument
    /// makes out-of-order arrival unrepresentable.
    pub fn update_noisy_lti(
        &mut self,
        a: &DMatrix<f64>,
        b: &DMatrix<f64>,
        y_pair: (&DVector<f64>, &DVector<f64>),
        u: &DVector<f64>,
    ) -> Result<()> {
        self.check_mode(EstimatorMode::NoisyLti)?;
        let (y_even, y_odd) = y_pair;
        self.check_dim(y_even, "noisy-LTI even measurement")?;
        self.check_dim(y_odd, "noisy-LTI odd measurement")?;
        if a.nrows() != self.n || a.ncols() != self.n {
            return Err(Error::DimensionMismatch {
                context: "noisy-LTI dynamics matrix",
                expected: format!("{n}x{n}", n = self.n),
                actual: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        if b.nrows() != self.n || b.ncols() != u.len() {
            return Err(Error::DimensionMismatch {
                context: "noisy-LTI input matrix",
                expected: format!("{}x{}", self.n, u.len()),
                actual: format!("{}x{}", b.nrows(), b.ncols()),
            });
        }
        let r = y_odd - a * y_even - b * u;
        for i in 0..self.n {
            for j in i..self.n {
                self.scatter[packed_index(self.n, i, j)] += r[i] * r[j];
            }
        }
        self.t += 2;
        Ok(())
    }

    /// The empirical mean `μ̂` — identically zero in ZeroMean/NoisyLti modes,
    /// the sample average otherwise (requiring at least one sample).
    pub fn mean(&self) -> Result<DVector<f64>> {
        match self.mode {
            EstimatorMode::ZeroMean | EstimatorMode::NoisyLti => Ok(DVector::zeros(self.n)),
            EstimatorMode::NonZeroMean => {
                if self.t < 1 {
                    return Err(Error::NotEnoughSamples { have: self.t, need: 1 });
                }
                Ok(self.mean.clone())
            }
        }
    }

    /// The empirical covariance `Σ̂` with the mode's normalization
    /// (`1/t`, `1/(t−1)`, or `1/pairs`), as a full symmetric matrix.
    pub fn cov(&self) -> Result<DMatrix<f64>> {
        let divisor = match self.mode {
            EstimatorMode::ZeroMean => {
                if self.t < 1 {
                    return Err(Error::NotEnoughSamples { have: self.t, need: 1 });
                }
                self.t as f64
            }
            EstimatorMode::NonZeroMean => {
                if self.t < 2 {
                    return Err(Error::NotEnoughSamples { have: self.t, need: 2 });
                }
                (self.t - 1) as f64
            }
            EstimatorMode::NoisyLti => {
                if self.pairs() < 1 {
                    return Err(Error::NotEnoughSamples { have: self.pairs(), need: 1 });
                }
                self.pairs() as f64
            }
        };
        let mut cov = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in i..self.n {
                let v = self.scatter[packed_index(self.n, i, j)] / divisor;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        Ok(cov)
    }

    /// Rebuilds a NonZeroMean estimator from externally combined statistics
    /// (used by region merging, whose combined covariance is a time-weighted
    /// convex combination rather than a pooled batch scatter).
    pub(crate) fn from_merged_nonzero(
        n: usize,
        t: u64,
        mean: DVector<f64>,
        cov: &DMatrix<f64>,
    ) -> Result<Self> {
        let mut est = Self::new(EstimatorMode::NonZeroMean, n)?;
        est.t = t;
        est.mean = mean;
        let denom = t.saturating_sub(1) as f64;
        for i in 0..n {
            for j in i..n {
                est.scatter[packed_index(n, i, j)] = cov[(i, j)] * denom;
            }
        }
        Ok(est)
    }
}

/// The realized one-step disturbance `w = x⁺ − f(x) − g(x)u`: the observed
/// next state minus the nominal prediction.
pub fn residual(
    model: &ControlAffineModel,
    x_next: &DVector<f64>,
    x: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    if x_next.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "residual next state",
            expected: format!("length {}", model.state_dim()),
            actual: format!("length {}", x_next.len()),
        });
    }
    Ok(x_next - predict_nominal(model, x, u)?)
}
