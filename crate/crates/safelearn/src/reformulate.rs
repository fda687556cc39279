//! Robust-to-deterministic constraint conversion.
//!
//! A half-plane state constraint `H x⁺ ≤ h` must hold for *every*
//! disturbance in the confidence set. Because the constraint rows are
//! linear, the robust condition collapses exactly to a deterministic one:
//! subtract from each row's budget the support function of the set along
//! that row. For the ellipsoid-plus-ball sets used here the support
//! function is closed-form, so the tightening vector is
//! `eᵢ = √d·‖W^{1/2}hᵢ‖ + r·‖hᵢ‖` and no approximation is involved.
//!
//! [`robust_membership_check`] is the falsification oracle for that claim:
//! it evaluates the raw robust constraint on sampled set points — always
//! including the analytic per-row maximizer — so the tightening can be
//! tested against first principles rather than against itself.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{SafetySpec, UncertaintySet, SYMMETRY_TOL};
use crate::{Error, Result};

/// Symmetric positive-semidefinite square root via eigendecomposition.
///
/// Eigenvalues below zero (roundoff debris) are clamped; genuine
/// indefiniteness should be rejected upstream by [`UncertaintySet`]'s
/// constructor, so this function only guards against asymmetry.
pub fn sqrt_psd(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch {
            context: "matrix square root",
            expected: "square matrix".into(),
            actual: format!("{}x{}", w.nrows(), w.ncols()),
        });
    }
    let fro = w.norm();
    let asym = (w - w.transpose()).norm();
    if asym > SYMMETRY_TOL * fro.max(1.0) {
        return Err(Error::ContractViolation(format!(
            "matrix square root input asymmetric: |W - Wᵀ| = {asym:.3e}"
        )));
    }
    let sym = (w + w.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let n = w.nrows();
    let mut root = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = eig.eigenvalues[k].max(0.0);
        let v = eig.eigenvectors.column(k);
        root += v * v.transpose() * lam.sqrt();
    }
    Ok(root)
}

/// Deterministic linear constraints `A u ≤ b` on the control, equivalent
/// to requiring `H x⁺ ≤ h` for every disturbance in the source set.
#[derive(Debug, Clone, PartialEq)]
pub struct TightenedConstraints {
    a_mat: DMatrix<f64>,
    b_vec: DVector<f64>,
    e_vec: DVector<f64>,
}

impl TightenedConstraints {
    /// Constraint matrix `A = H·g(x)`, one row per safety row.
    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    /// Right-hand side `b = h − H·f(x) − H·c − e`.
    pub fn b_vector(&self) -> &DVector<f64> {
        &self.b_vec
    }

    /// Tightening margins `e` (componentwise ≥ 0): the support function of
    /// the centered uncertainty set along each constraint row.
    pub fn tightening(&self) -> &DVector<f64> {
        &self.e_vec
    }

    /// Number of constraint rows.
    pub fn rows(&self) -> usize {
        self.a_mat.nrows()
    }

    /// Whether `u` satisfies every tightened row within `tol`.
    pub fn is_satisfied_by(&self, u: &DVector<f64>, tol: f64) -> bool {
        let slack = &self.b_vec - &self.a_mat * u;
        slack.iter().all(|&s| s >= -tol)
    }
}

/// Converts one uncertainty set plus one safety specification into
/// tightened control constraints, given the drift and gain evaluated at
/// the current state.
pub fn tighten(
    set: &UncertaintySet,
    spec: &SafetySpec,
    f_x: &DVector<f64>,
    g_x: &DMatrix<f64>,
) -> Result<TightenedConstraints> {
    let n = set.dim();
    if spec.state_dim() != n {
        return Err(Error::DimensionMismatch {
            context: "tighten: safety spec vs uncertainty set",
            expected: format!("{n} state columns"),
            actual: format!("{} state columns", spec.state_dim()),
        });
    }
    if f_x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "tighten: drift value",
            expected: format!("length {n}"),
            actual: format!("length {}", f_x.len()),
        });
    }
    if g_x.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "tighten: gain value",
            expected: format!("{n} rows"),
            actual: format!("{} rows", g_x.nrows()),
        });
    }
    let root = sqrt_psd(set.shape())?;
    let sqrt_d = set.radius().sqrt();
    let r = set.ball_radius();
    let h_mat = spec.h_matrix();
    let p = spec.p();
    let mut e_vec = DVector::zeros(p);
    let mut b_vec = DVector::zeros(p);
    for i in 0..p {
        let hi = h_mat.row(i).transpose();
        let e = sqrt_d * (&root * &hi).norm() + r * hi.norm();
        e_vec[i] = e;
        b_vec[i] = spec.h_vector()[i] - hi.dot(f_x) - hi.dot(set.center()) - e;
    }
    Ok(TightenedConstraints {
        a_mat: h_mat * g_x,
        b_vec,
        e_vec,
    })
}

/// Evaluates the raw robust constraint `h − H(f(x) + g(x)u + w)` over
/// sampled disturbances `w` from the set's boundary and returns the
/// worst (most negative) margin across rows and samples.
///
/// The sample always includes, for each row, the analytic maximizer
/// `w* = c + √d·W^{1/2}(W^{1/2}hᵢ)/‖W^{1/2}hᵢ‖ + r·hᵢ/‖hᵢ‖`, at which the
/// row's slack equals its tightened slack exactly; `sample_count`
/// additional boundary points use random directions. Deterministic for a
/// fixed `seed`.
pub fn robust_membership_check(
    set: &UncertaintySet,
    spec: &SafetySpec,
    f_x: &DVector<f64>,
    g_x: &DMatrix<f64>,
    u: &DVector<f64>,
    sample_count: usize,
    seed: u64,
) -> Result<f64> {
    if sample_count < 1 {
        return Err(Error::ConfigError(
            "robust membership check needs at least one sample".into(),
        ));
    }
    let n = set.dim();
    if g_x.ncols() != u.len() {
        return Err(Error::DimensionMismatch {
            context: "robust membership check: control",
            expected: format!("length {}", g_x.ncols()),
            actual: format!("length {}", u.len()),
        });
    }
    let root = sqrt_psd(set.shape())?;
    let sqrt_d = set.radius().sqrt();
    let r = set.ball_radius();
    let nominal = f_x + g_x * u;
    let margin_at = |w: &DVector<f64>| -> f64 {
        let slack = spec.h_vector() - spec.h_matrix() * (&nominal + w);
        slack.min()
    };

    let mut worst = f64::INFINITY;
    // Analytic per-row maximizers first: these make the check exact, not
    // merely probabilistic.
    for i in 0..spec.p() {
        let hi = spec.h_matrix().row(i).transpose();
        let sh = &root * &hi;
        let ell_dir = if sh.norm() > 0.0 {
            &root * (&sh / sh.norm())
        } else {
            DVector::zeros(n)
        };
        let ball_dir = if hi.norm() > 0.0 { &hi / hi.norm() } else { DVector::zeros(n) };
        let w_star = set.center() + ell_dir * sqrt_d + ball_dir * r;
        worst = worst.min(margin_at(&w_star));
    }
    // Random boundary points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit = |rng: &mut ChaCha8Rng| -> DVector<f64> {
        loop {
            let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = v.norm();
            if norm > 1e-12 {
                return v / norm;
            }
        }
    };
    for _ in 0..sample_count {
        let v = unit(&mut rng);
        let b = unit(&mut rng);
        let w = set.center() + &root * v * sqrt_d + b * r;
        worst = worst.min(margin_at(&w));
    }
    Ok(worst)
}
