//! Obstacle-course benchmark: a planar unicycle driven toward a goal by a
//! proportional controller, with circular obstacles rendered each step as
//! half-plane constraints on the next state and the safety filter sitting
//! between the nominal controller and the plant.
//!
//! The module provides the pieces individually (dynamics, controller,
//! constraint generation, stall escape) plus an episode runner and a
//! parallel Monte Carlo harness, and writers for the CSV/SVG artifacts the
//! CLI emits. Everything is deterministic given the scenario and seed.

use std::io::Write as IoWrite;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundKind;
use crate::filter::{filter_control, filter_control_fixed_kind, FilterConfig, FilterMode};
use crate::model::{
    predict_nominal, ConfidenceConfig, ControlAffineModel, FilterStatus, SafetySpec,
};
use crate::moments::{residual, EstimatorMode, MomentEstimate};
use crate::{Error, Result};

/// Schema tag written into every JSON artifact this crate emits.
pub const JSON_SCHEMA_VERSION: u32 = 1;

/// A circular obstacle in the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    /// Center, meters.
    pub center_m: [f64; 2],
    /// Radius, meters.
    pub radius_m: f64,
}

/// Start pose of the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartPose {
    pub x_m: f64,
    pub y_m: f64,
    pub yaw_rad: f64,
}

/// Goal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub x_m: f64,
    pub y_m: f64,
}

/// One constant-mean block of a piecewise noise field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBlock {
    pub x_min_m: f64,
    pub x_max_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
    pub mean: Vec<f64>,
}

/// The true disturbance generator of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoiseSpec {
    /// Gaussian with fixed mean and diagonal covariance.
    Gaussian { mean: Vec<f64>, cov_diag: Vec<f64> },
    /// Independent uniform noise on `[centerᵢ−h, centerᵢ+h]` per axis —
    /// a bounded non-Gaussian family with closed-form moment constants.
    UniformBox { center: Vec<f64>, half_width: f64 },
    /// Gaussian whose mean is piecewise constant in the robot's position.
    PiecewiseGaussian {
        blocks: Vec<NoiseBlock>,
        default_mean: Vec<f64>,
        cov_diag: Vec<f64>,
    },
}

/// Moment constants of a noise model, as far as they are well-defined for
/// the variant: covariance scale `σ` (`Σ_w ⪯ σI`), fourth moment `ζ`
/// (`E‖w‖⁴ ≤ ζ`), mean norm `ν`, third-moment cross term `κ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConstants {
    pub sigma: Option<f64>,
    pub zeta: Option<f64>,
    pub nu: Option<f64>,
    pub kappa: Option<f64>,
}

impl NoiseSpec {
    /// Noise dimension.
    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::Gaussian { mean, .. } => mean.len(),
            NoiseSpec::UniformBox { center, .. } => center.len(),
            NoiseSpec::PiecewiseGaussian { default_mean, .. } => default_mean.len(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::ConfigError(msg));
        match self {
            NoiseSpec::Gaussian { mean, cov_diag } => {
                if mean.len() != n || cov_diag.len() != n {
                    return bad(format!("gaussian noise fields must have length {n}"));
                }
                if cov_diag.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
                    return bad("gaussian cov_diag entries must be nonnegative".into());
                }
            }
            NoiseSpec::UniformBox { center, half_width } => {
                if center.len() != n {
                    return bad(format!("uniform-box center must have length {n}"));
                }
                if !(half_width.is_finite() && *half_width >= 0.0) {
                    return bad("uniform-box half_width must be nonnegative".into());
                }
            }
            NoiseSpec::PiecewiseGaussian { blocks, default_mean, cov_diag } => {
                if default_mean.len() != n || cov_diag.len() != n {
                    return bad(format!("piecewise noise fields must have length {n}"));
                }
                if cov_diag.iter().any(|&d| !(d >= 0.0) || !d.is_finite()) {
                    return bad("piecewise cov_diag entries must be nonnegative".into());
                }
                for b in blocks {
                    if b.mean.len() != n {
                        return bad(format!("noise block mean must have length {n}"));
                    }
                    if b.x_min_m >= b.x_max_m || b.y_min_m >= b.y_max_m {
                        return bad("noise block extents must be nonempty".into());
                    }
                }
            }
        }
        Ok(())
    }

    /// True mean at a position (position-independent except for the
    /// piecewise variant).
    pub fn mean_at(&self, pos: (f64, f64)) -> DVector<f64> {
        match self {
            NoiseSpec::Gaussian { mean, .. } => DVector::from_vec(mean.clone()),
            NoiseSpec::UniformBox { center, .. } => DVector::from_vec(center.clone()),
            NoiseSpec::PiecewiseGaussian { blocks, default_mean, .. } => {
                for b in blocks {
                    if pos.0 >= b.x_min_m && pos.0 < b.x_max_m && pos.1 >= b.y_min_m && pos.1 < b.y_max_m {
                        return DVector::from_vec(b.mean.clone());
                    }
                }
                DVector::from_vec(default_mean.clone())
            }
        }
    }

    /// Draws one disturbance at the given position.
    pub fn sample(&self, pos: (f64, f64), rng: &mut ChaCha8Rng) -> DVector<f64> {
        match self {
            NoiseSpec::Gaussian { cov_diag, .. } | NoiseSpec::PiecewiseGaussian { cov_diag, .. } => {
                let mean = self.mean_at(pos);
                DVector::from_fn(mean.len(), |i, _| {
                    mean[i] + cov_diag[i].sqrt() * rng.sample::<f64, _>(StandardNormal)
                })
            }
            NoiseSpec::UniformBox { center, half_width } => DVector::from_fn(center.len(), |i, _| {
                center[i] + rng.gen_range(-half_width..=*half_width)
            }),
        }
    }

    /// Closed-form moment constants of the model, where defined.
    ///
    /// For the uniform box with mean `μ` and per-axis half-width `h`
    /// (variance `h²/3` per axis):
    /// `ζ = Σᵢ[(4/3)μᵢ²h² + (4/45)h⁴] + (‖μ‖² + n·h²/3)²` and
    /// `κ = ‖μ‖·(‖μ‖² + (n+2)h²/3)`. For fixed Gaussians the standard
    /// fourth-moment identities apply. The piecewise field only yields `σ`
    /// and `ν` (its samples are not identically distributed over time, so
    /// single-distribution fourth-moment constants would be dishonest).
    pub fn constants(&self) -> NoiseConstants {
        match self {
            NoiseSpec::Gaussian { mean, cov_diag } => {
                let mu = DVector::from_vec(mean.clone());
                let tr: f64 = cov_diag.iter().sum();
                let tr2: f64 = cov_diag.iter().map(|d| d * d).sum();
                let mu_s_mu: f64 = cov_diag.iter().zip(mean).map(|(d, m)| d * m * m).sum();
                let zeta = (tr + mu.norm_squared()).powi(2) + 2.0 * tr2 + 4.0 * mu_s_mu;
                let third = DVector::from_fn(mean.len(), |i, _| {
                    mean[i] * (mu.norm_squared() + tr) + 2.0 * cov_diag[i] * mean[i]
                });
                NoiseConstants {
                    sigma: cov_diag.iter().cloned().fold(None, |acc: Option<f64>, d| {
                        Some(acc.map_or(d, |a| a.max(d)))
                    }),
                    zeta: Some(zeta),
                    nu: Some(mu.norm()),
                    kappa: Some(third.norm()),
                }
            }
            NoiseSpec::UniformBox { center, half_width } => {
                let mu = DVector::from_vec(center.clone());
                let n = center.len() as f64;
                let h2 = half_width * half_width;
                let var_sum: f64 = center
                    .iter()
                    .map(|&m| (4.0 / 3.0) * m * m * h2 + (4.0 / 45.0) * h2 * h2)
                    .sum();
                let zeta = var_sum + (mu.norm_squared() + n * h2 / 3.0).powi(2);
                NoiseConstants {
                    sigma: Some(h2 / 3.0),
                    zeta: Some(zeta),
                    nu: Some(mu.norm()),
                    kappa: Some(mu.norm() * (mu.norm_squared() + (n + 2.0) * h2 / 3.0)),
                }
            }
            NoiseSpec::PiecewiseGaussian { blocks, default_mean, cov_diag } => {
                let max_cov = cov_diag.iter().cloned().fold(0.0f64, f64::max);
                let mut nu = DVector::from_vec(default_mean.clone()).norm();
                for b in blocks {
                    nu = nu.max(DVector::from_vec(b.mean.clone()).norm());
                }
                NoiseConstants {
                    sigma: Some(max_cov),
                    zeta: None,
                    nu: Some(nu),
                    kappa: None,
                }
            }
        }
    }
}

/// Full description of one benchmark run; serializable as the JSON config
/// the CLI consumes (units are embedded in the field names).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Schema tag for forward compatibility.
    pub schema_version: u32,
    /// Discretization step Δ, seconds.
    pub delta_s: f64,
    pub start: StartPose,
    pub goal: Goal,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Robot clearance radius added to every obstacle, meters.
    pub robot_radius_m: f64,
    pub noise: NoiseSpec,
    pub horizon_steps: usize,
    /// Per-step risk level δ.
    pub risk_delta: f64,
    /// Covariance scale bound σ handed to the filter (`Σ_w ⪯ σI`).
    #[serde(default)]
    pub sigma: Option<f64>,
    pub seed: u64,
    /// Obstacles farther than this (surface distance) are not constrained.
    #[serde(default)]
    pub sensing_radius_m: Option<f64>,
    /// The episode counts as a success if the final position is within
    /// this distance of the goal.
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance_m: f64,
    /// Early stop once within this distance of the goal.
    #[serde(default = "default_stop_radius")]
    pub stop_radius_m: f64,
}

fn default_goal_tolerance() -> f64 {
    2.0
}

fn default_stop_radius() -> f64 {
    1.0
}

impl Scenario {
    /// Validates cross-field consistency (dimension 3 noise, positive
    /// geometry, δ range).
    pub fn validate(&self) -> Result<()> {
        if self.delta_s <= 0.0 || !self.delta_s.is_finite() {
            return Err(Error::ConfigError("delta_s must be positive".into()));
        }
        if !(self.risk_delta > 0.0 && self.risk_delta < 1.0) {
            return Err(Error::ConfigError(format!(
                "risk_delta must lie in (0, 1), got {}",
                self.risk_delta
            )));
        }
        if self.robot_radius_m < 0.0 {
            return Err(Error::ConfigError("robot_radius_m must be nonnegative".into()));
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            if !(o.radius_m > 0.0) || !o.radius_m.is_finite() {
                return Err(Error::ConfigError(format!(
                    "obstacles[{k}].radius_m must be positive"
                )));
            }
        }
        if self.horizon_steps == 0 {
            return Err(Error::ConfigError("horizon_steps must be positive".into()));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::ConfigError("sigma must be positive".into()));
            }
        }
        self.noise.validate(3)
    }

    /// The bundled obstacle-course benchmark: unicycle with Δ = 0.1 s,
    /// start (0, 0) facing −2.4 rad, goal (75, 85), zero-mean Gaussian
    /// noise of covariance 0.1·I₃, σ = 1, δ = 0.3, and three obstacles
    /// straddling the nominal path.
    pub fn unicycle_benchmark() -> Scenario {
        Scenario {
            schema_version: JSON_SCHEMA_VERSION,
            delta_s: 0.1,
            start: StartPose { x_m: 0.0, y_m: 0.0, yaw_rad: -2.4 },
            goal: Goal { x_m: 75.0, y_m: 85.0 },
            obstacles: vec![
                Obstacle { center_m: [20.0, 23.0], radius_m: 3.0 },
                Obstacle { center_m: [38.0, 44.0], radius_m: 4.0 },
                Obstacle { center_m: [58.0, 66.0], radius_m: 3.0 },
            ],
            robot_radius_m: 0.5,
            noise: NoiseSpec::Gaussian {
                mean: vec![0.0; 3],
                cov_diag: vec![0.1; 3],
            },
            horizon_steps: 1500,
            risk_delta: 0.3,
            sigma: Some(1.0),
            seed: 1,
            sensing_radius_m: None,
            goal_tolerance_m: default_goal_tolerance(),
            stop_radius_m: default_stop_radius(),
        }
    }
}

/// Planar unicycle integrated with step Δ:
/// `f(x) = x`, `g(x) = Δ·[[cos x³, 0], [sin x³, 0], [0, 1]]` (state is
/// position plus yaw; controls are forward speed and yaw rate).
pub fn unicycle_model(delta_s: f64) -> Result<ControlAffineModel> {
    if !(delta_s > 0.0 && delta_s.is_finite()) {
        return Err(Error::ConfigError(format!(
            "time step must be positive, got {delta_s}"
        )));
    }
    ControlAffineModel::new(
        3,
        2,
        Arc::new(|x: &DVector<f64>| x.clone()),
        Arc::new(move |x: &DVector<f64>| {
            let yaw = x[2];
            DMatrix::from_row_slice(
                3,
                2,
                &[
                    delta_s * yaw.cos(),
                    0.0,
                    delta_s * yaw.sin(),
                    0.0,
                    0.0,
                    delta_s,
                ],
            )
        }),
    )
}

/// Proportional go-to-goal controller:
/// `ū = ‖ε‖·[0.1·cos(θ_ε − x³), 0.03·sin(θ_ε − x³)]` with `ε` the vector
/// to the goal and `θ_ε` its bearing; zero at the goal itself.
pub fn nominal_control(x: &DVector<f64>, goal: (f64, f64)) -> DVector<f64> {
    let ex = goal.0 - x[0];
    let ey = goal.1 - x[1];
    let dist = (ex * ex + ey * ey).sqrt();
    if dist < 1e-12 {
        return DVector::zeros(2);
    }
    let theta = ey.atan2(ex);
    let ang = theta - x[2];
    DVector::from_vec(vec![dist * 0.1 * ang.cos(), dist * 0.03 * ang.sin()])
}

/// Half-plane rows generated from obstacles, with the row→obstacle map
/// needed by the stall-escape heuristic.
#[derive(Debug, Clone)]
pub struct ObstacleConstraints {
    /// The safety spec for the next state, or `None` when no rows apply.
    pub spec: Option<SafetySpec>,
    /// For each row, the index of the obstacle that produced it.
    pub row_obstacle: Vec<usize>,
    /// Rows dropped because the robot sat exactly on an obstacle center
    /// (constraint direction undefined there).
    pub skipped: usize,
}

/// Builds one row per (sensed) obstacle: with `â` the unit vector from the
/// robot to the obstacle center `c`, the row is `[âᵀ, 0]·x⁺ ≤ âᵀc − (r+r_o)`
/// — a half-plane whose boundary is perpendicular to the robot–center line
/// at offset `r + r_o` from the center, on the robot's side.
pub fn obstacle_constraints(
    x: &DVector<f64>,
    obstacles: &[Obstacle],
    robot_radius: f64,
    sensing_radius: Option<f64>,
) -> ObstacleConstraints {
    let (px, py) = (x[0], x[1]);
    let mut rows: Vec<[f64; 3]> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    let mut row_obstacle = Vec::new();
    let mut skipped = 0;
    for (k, o) in obstacles.iter().enumerate() {
        let dx = o.center_m[0] - px;
        let dy = o.center_m[1] - py;
        let dist = (dx * dx + dy * dy).sqrt();
        if let Some(s) = sensing_radius {
            if dist - o.radius_m > s {
                continue;
            }
        }
        if dist < 1e-9 {
            skipped += 1;
            continue;
        }
        let ax = dx / dist;
        let ay = dy / dist;
        rows.push([ax, ay, 0.0]);
        rhs.push(ax * o.center_m[0] + ay * o.center_m[1] - (o.radius_m + robot_radius));
        row_obstacle.push(k);
    }
    let spec = if rows.is_empty() {
        None
    } else {
        let p = rows.len();
        let h = DMatrix::from_fn(p, 3, |i, j| rows[i][j]);
        Some(
            SafetySpec::new(h, DVector::from_vec(rhs))
                .expect("obstacle rows are unit vectors with finite offsets"),
        )
    };
    ObstacleConstraints { spec, row_obstacle, skipped }
}

/// The safety line of an active obstacle row, for stall escape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeLine {
    /// Unit normal pointing from the robot toward the obstacle center.
    pub normal: [f64; 2],
    /// Points `y` on the boundary satisfy `normal·y = offset`.
    pub offset: f64,
    /// Lateral distance from the robot's projection to the retarget point.
    pub lateral: f64,
}

/// Retargets the nominal controller when the robot stalls against an
/// active constraint: aim for a point on the safety line, offset laterally
/// to whichever side is closer to the goal (ties break left, where "left"
/// is +90° from the constraint normal). Without an active row the nominal
/// control passes through unchanged.
pub fn stall_escape(
    u_bar: &DVector<f64>,
    x: &DVector<f64>,
    line: Option<EscapeLine>,
    goal: (f64, f64),
) -> DVector<f64> {
    let Some(line) = line else {
        return u_bar.clone();
    };
    let [ax, ay] = line.normal;
    let (px, py) = (x[0], x[1]);
    let gap = line.offset - (ax * px + ay * py);
    let (qx, qy) = (px + gap * ax, py + gap * ay); // projection onto the line
    let (nx, ny) = (-ay, ax); // left of the normal
    let left = (qx + line.lateral * nx, qy + line.lateral * ny);
    let right = (qx - line.lateral * nx, qy - line.lateral * ny);
    let d2 = |p: (f64, f64)| (goal.0 - p.0).powi(2) + (goal.1 - p.1).powi(2);
    let target = if d2(right) < d2(left) - 1e-12 { right } else { left };
    nominal_control(x, target)
}

/// Controller variants an episode can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmChoice {
    /// Zero-mean learning pipeline with automatic bound switching.
    Algorithm1,
    /// Unknown-mean learning pipeline with automatic bound switching.
    Algorithm2,
    /// A single bound kind, no switching.
    FixedBound(BoundKind),
    /// The nominal controller applied as-is (baseline).
    Unfiltered,
}

impl AlgorithmChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmChoice::Algorithm1 => "filtered-zero-mean",
            AlgorithmChoice::Algorithm2 => "filtered-unknown-mean",
            AlgorithmChoice::FixedBound(_) => "filtered-fixed-bound",
            AlgorithmChoice::Unfiltered => "unfiltered",
        }
    }
}

/// Per-step outcome tag in the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// Filter solved at the requested δ.
    Feasible,
    /// Filter solved only at a relaxed δ.
    RelaxedDelta,
    /// No δ < 1 was feasible; nominal control applied.
    InfeasibleAtDelta,
    /// Estimator not yet valid for any bound; nominal control applied.
    Warmup,
    /// Baseline run without the filter.
    Unfiltered,
    /// The QP reported a numerical failure; nominal control applied.
    SolverFailed,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Feasible => "feasible",
            StepStatus::RelaxedDelta => "relaxed-delta",
            StepStatus::InfeasibleAtDelta => "infeasible-at-delta",
            StepStatus::Warmup => "warmup",
            StepStatus::Unfiltered => "unfiltered",
            StepStatus::SolverFailed => "solver-failed",
        }
    }
}

/// One simulation step: the state and controls at time `t`, the filter's
/// verdict, and what the realized next state did to the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    /// State at time `t`, before applying the control.
    pub x: [f64; 3],
    pub u_bar: [f64; 2],
    pub u: [f64; 2],
    pub status: StepStatus,
    /// Achieved risk level (`None` when the filter did not run or solve).
    pub achieved_delta: Option<f64>,
    pub bound_used: Option<BoundKind>,
    /// Clearance of the realized next position to the nearest offset disc
    /// (`None` when the scenario has no obstacles).
    pub min_clearance: Option<f64>,
    /// Whether the realized next state violated any constraint row.
    pub violated: bool,
}

/// Full episode log plus summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
    pub final_state: [f64; 3],
    pub reached_goal: bool,
    /// Minimum offset-disc clearance over the whole episode.
    pub min_clearance: Option<f64>,
    /// Steps whose realized next position was inside an offset disc.
    pub penetration_steps: usize,
    pub feasible_steps: usize,
    pub relaxed_steps: usize,
    pub infeasible_steps: usize,
    pub warmup_steps: usize,
    pub violations_among_feasible: usize,
    pub warnings: Vec<String>,
}

impl TrajectoryLog {
    /// Violation frequency among steps the filter certified at the
    /// requested δ (`None` if there were none).
    pub fn violation_rate_feasible(&self) -> Option<f64> {
        if self.feasible_steps == 0 {
            None
        } else {
            Some(self.violations_among_feasible as f64 / self.feasible_steps as f64)
        }
    }
}

fn clearance(pos: (f64, f64), obstacles: &[Obstacle], robot_radius: f64) -> Option<f64> {
    obstacles
        .iter()
        .map(|o| {
            let dx = pos.0 - o.center_m[0];
            let dy = pos.1 - o.center_m[1];
            (dx * dx + dy * dy).sqrt() - (o.radius_m + robot_radius)
        })
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))))
}

/// Stall detector thresholds: a step counts as stalled when some tightened
/// row is active and the commanded speed is this small.
const STALL_SPEED: f64 = 0.1;
const ACTIVE_SLACK: f64 = 1e-6;
/// How long a stall retarget persists before reverting to the goal.
const ESCAPE_HOLD_STEPS: u32 = 30;

/// Runs one episode with the scenario's own seed.
pub fn run_episode(scenario: &Scenario, algorithm: AlgorithmChoice) -> Result<TrajectoryLog> {
    run_episode_seeded(scenario, algorithm, scenario.seed, 0)
}

/// Runs one episode with an explicit RNG seed and stream (the Monte Carlo
/// harness gives each episode its own stream).
pub fn run_episode_seeded(
    scenario: &Scenario,
    algorithm: AlgorithmChoice,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryLog> {
    scenario.validate()?;
    let model = unicycle_model(scenario.delta_s)?;
    let goal = (scenario.goal.x_m, scenario.goal.y_m);
    let consts = build_confidence(scenario)?;
    let filter_cfg = match algorithm {
        AlgorithmChoice::Algorithm1 => Some(FilterConfig::new(FilterMode::ZeroMean, scenario.risk_delta)?),
        AlgorithmChoice::Algorithm2 => Some(FilterConfig::new(FilterMode::NonZeroMean, scenario.risk_delta)?),
        AlgorithmChoice::FixedBound(kind) => {
            if kind == BoundKind::NoisyLti {
                return Err(Error::ConfigError(
                    "the paired-measurement bound does not apply to this nonlinear scenario".into(),
                ));
            }
            None
        }
        AlgorithmChoice::Unfiltered => None,
    };
    let est_mode = match algorithm {
        AlgorithmChoice::Algorithm1 => Some(EstimatorMode::ZeroMean),
        AlgorithmChoice::Algorithm2 => Some(EstimatorMode::NonZeroMean),
        AlgorithmChoice::FixedBound(kind) => Some(kind.estimator_mode()),
        AlgorithmChoice::Unfiltered => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut est = est_mode
        .map(|m| MomentEstimate::new(m, 3))
        .transpose()?;
    let mut x = DVector::from_vec(vec![scenario.start.x_m, scenario.start.y_m, scenario.start.yaw_rad]);
    let mut records = Vec::with_capacity(scenario.horizon_steps);
    let mut warnings: Vec<String> = Vec::new();
    let mut escape: Option<((f64, f64), u32)> = None;

    for step in 0..scenario.horizon_steps {
        let pos = (x[0], x[1]);
        let cons = obstacle_constraints(&x, &scenario.obstacles, scenario.robot_radius_m, scenario.sensing_radius_m);
        if cons.skipped > 0 && warnings.is_empty() {
            warnings.push(format!(
                "step {step}: {} obstacle row(s) skipped (robot at obstacle center)",
                cons.skipped
            ));
        }

        // Nominal control, possibly retargeted while escaping a stall.
        let mut u_bar = nominal_control(&x, goal);
        if let Some((target, hold)) = escape {
            let dist2 = (x[0] - target.0).powi(2) + (x[1] - target.1).powi(2);
            if hold == 0 || dist2 < 1.5 * 1.5 {
                escape = None;
            } else {
                u_bar = nominal_control(&x, target);
                escape = Some((target, hold - 1));
            }
        }

        // Filter (or pass through).
        let mut status;
        let mut achieved = None;
        let mut bound_used = None;
        let mut u = u_bar.clone();
        let mut active_line: Option<EscapeLine> = None;
        match (&algorithm, &cons.spec, &est) {
            (AlgorithmChoice::Unfiltered, _, _) | (_, None, _) => {
                status = if matches!(algorithm, AlgorithmChoice::Unfiltered) {
                    StepStatus::Unfiltered
                } else {
                    StepStatus::Feasible
                };
            }
            (_, Some(spec), Some(est_ref)) => {
                let outcome = match algorithm {
                    AlgorithmChoice::FixedBound(kind) => filter_control_fixed_kind(
                        &model,
                        &x,
                        &u_bar,
                        spec,
                        est_ref,
                        kind,
                        scenario.risk_delta,
                        &consts,
                    ),
                    _ => filter_control(
                        &model,
                        &x,
                        &u_bar,
                        spec,
                        est_ref,
                        filter_cfg.as_ref().expect("selector algorithms carry a config"),
                        &consts,
                    ),
                };
                match outcome {
                    Ok(out) => {
                        status = match out.status {
                            FilterStatus::Feasible => StepStatus::Feasible,
                            FilterStatus::FeasibleAtRelaxedDelta => StepStatus::RelaxedDelta,
                            FilterStatus::InfeasibleAtDelta => StepStatus::InfeasibleAtDelta,
                        };
                        achieved = Some(out.achieved_delta);
                        bound_used = Some(out.bound_used);
                        if out.status != FilterStatus::InfeasibleAtDelta {
                            u = out.control;
                            // Identify an active row for the stall detector:
                            // smallest slack of H(f + gu) ≤ h − e.
                            let f_x = model.drift(&x)?;
                            let g_x = model.gain(&x)?;
                            let nominal_next = &f_x + &g_x * &u;
                            let slack = spec.h_vector() - spec.h_matrix() * &nominal_next;
                            let mut best: Option<(usize, f64)> = None;
                            for i in 0..spec.p() {
                                let s = slack[i] - out.tightening[i];
                                if s.abs() <= ACTIVE_SLACK.max(1e-9 * out.tightening[i].abs())
                                    || s < 0.0
                                {
                                    if best.map_or(true, |(_, b)| s < b) {
                                        best = Some((i, s));
                                    }
                                }
                            }
                            if let Some((row, _)) = best {
                                let ob = &scenario.obstacles[cons.row_obstacle[row]];
                                let h_row = spec.h_matrix().row(row);
                                active_line = Some(EscapeLine {
                                    normal: [h_row[0], h_row[1]],
                                    offset: spec.h_vector()[row],
                                    lateral: ob.radius_m + scenario.robot_radius_m + 1.0,
                                });
                            }
                        }
                    }
                    Err(Error::BoundNotValidYet { .. }) | Err(Error::NotEnoughSamples { .. }) => {
                        status = StepStatus::Warmup;
                    }
                    Err(Error::SolverError(msg)) => {
                        status = StepStatus::SolverFailed;
                        if warnings.len() < 8 {
                            warnings.push(format!("step {step}: solver failure: {msg}"));
                        }
                    }
                    Err(e) => return Err(e),
                }
            }
            (_, Some(_), None) => unreachable!("filtered algorithms always carry an estimator"),
        }

        // True dynamics step.
        let w = scenario.noise.sample(pos, &mut rng);
        let x_next = predict_nominal(&model, &x, &u)? + &w;

        // Accounting against the constraints generated this step.
        let violated = cons
            .spec
            .as_ref()
            .map(|s| s.is_violated(&x_next))
            .unwrap_or(false);
        let min_clear = clearance((x_next[0], x_next[1]), &scenario.obstacles, scenario.robot_radius_m);

        // Learn from the realized residual.
        if let Some(est_ref) = est.as_mut() {
            let r = residual(&model, &x_next, &x, &u)?;
            match est_ref.mode() {
                EstimatorMode::ZeroMean => est_ref.update_zero_mean(&r)?,
                EstimatorMode::NonZeroMean => est_ref.update_nonzero_mean(&r)?,
                EstimatorMode::NoisyLti => unreachable!("rejected above"),
            }
        }

        // Stall detection arms the next step's retarget.
        if escape.is_none() {
            if let Some(line) = active_line {
                if u.norm() < STALL_SPEED {
                    let [ax, ay] = line.normal;
                    let gap = line.offset - (ax * x[0] + ay * x[1]);
                    let q = (x[0] + gap * ax, x[1] + gap * ay);
                    let (nx, ny) = (-ay, ax);
                    let left = (q.0 + line.lateral * nx, q.1 + line.lateral * ny);
                    let right = (q.0 - line.lateral * nx, q.1 - line.lateral * ny);
                    let d2 = |p: (f64, f64)| (goal.0 - p.0).powi(2) + (goal.1 - p.1).powi(2);
                    let target = if d2(right) < d2(left) - 1e-12 { right } else { left };
                    escape = Some((target, ESCAPE_HOLD_STEPS));
                }
            }
        }

        records.push(StepRecord {
            t: step as u64,
            x: [x[0], x[1], x[2]],
            u_bar: [u_bar[0], u_bar[1]],
            u: [u[0], u[1]],
            status,
            achieved_delta: achieved,
            bound_used,
            min_clearance: min_clear,
            violated,
        });
        x = x_next;

        let gd = ((x[0] - goal.0).powi(2) + (x[1] - goal.1).powi(2)).sqrt();
        if gd <= scenario.stop_radius_m {
            break;
        }
    }

    let final_state = [x[0], x[1], x[2]];
    let goal_dist = ((x[0] - goal.0).powi(2) + (x[1] - goal.1).powi(2)).sqrt();
    let min_clearance = records
        .iter()
        .filter_map(|r| r.min_clearance)
        .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c))));
    let penetration_steps = records
        .iter()
        .filter(|r| r.min_clearance.map_or(false, |c| c < 0.0))
        .count();
    let feasible_steps = records.iter().filter(|r| r.status == StepStatus::Feasible).count();
    let relaxed_steps = records.iter().filter(|r| r.status == StepStatus::RelaxedDelta).count();
    let infeasible_steps = records
        .iter()
        .filter(|r| r.status == StepStatus::InfeasibleAtDelta)
        .count();
    let warmup_steps = records.iter().filter(|r| r.status == StepStatus::Warmup).count();
    let violations_among_feasible = records
        .iter()
        .filter(|r| r.status == StepStatus::Feasible && r.violated)
        .count();
    Ok(TrajectoryLog {
        records,
        final_state,
        reached_goal: goal_dist <= scenario.goal_tolerance_m,
        min_clearance,
        penetration_steps,
        feasible_steps,
        relaxed_steps,
        infeasible_steps,
        warmup_steps,
        violations_among_feasible,
        warnings,
    })
}

fn build_confidence(scenario: &Scenario) -> Result<ConfidenceConfig> {
    let consts = scenario.noise.constants();
    let mut cfg = ConfidenceConfig::new(scenario.risk_delta)?;
    if let Some(sigma) = scenario.sigma.or(consts.sigma) {
        if sigma > 0.0 {
            cfg = cfg.with_sigma(sigma)?;
        }
    }
    if let Some(zeta) = consts.zeta {
        if zeta > 0.0 {
            cfg = cfg.with_zeta(zeta)?;
        }
    }
    if let Some(nu) = consts.nu {
        if nu > 0.0 {
            cfg = cfg.with_nu(nu)?;
        }
    }
    if let Some(kappa) = consts.kappa {
        if kappa > 0.0 {
            cfg = cfg.with_kappa(kappa)?;
        }
    }
    Ok(cfg)
}

/// Aggregate statistics over a batch of episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub schema_version: u32,
    pub algorithm: String,
    pub episodes: usize,
    pub goal_reached_episodes: usize,
    pub zero_penetration_episodes: usize,
    pub total_penetration_steps: usize,
    pub total_feasible_steps: usize,
    pub total_relaxed_steps: usize,
    pub total_infeasible_steps: usize,
    pub total_warmup_steps: usize,
    pub violations_among_feasible: usize,
    /// Violation frequency among feasible-certified steps, if any existed.
    pub violation_rate_feasible: Option<f64>,
    /// Worst offset-disc clearance seen across all episodes.
    pub min_clearance: Option<f64>,
}

/// Runs `episodes` independent episodes in parallel (per-episode RNG
/// streams derived from `base_seed`) and aggregates.
pub fn run_monte_carlo(
    scenario: &Scenario,
    algorithm: AlgorithmChoice,
    episodes: usize,
    base_seed: u64,
) -> Result<MonteCarloReport> {
    if episodes == 0 {
        return Err(Error::ConfigError("episode count must be positive".into()));
    }
    let logs: Vec<TrajectoryLog> = (0..episodes)
        .into_par_iter()
        .map(|i| run_episode_seeded(scenario, algorithm, base_seed, i as u64 + 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(&logs, algorithm))
}

fn aggregate(logs: &[TrajectoryLog], algorithm: AlgorithmChoice) -> MonteCarloReport {
    let feasible: usize = logs.iter().map(|l| l.feasible_steps).sum();
    let viol: usize = logs.iter().map(|l| l.violations_among_feasible).sum();
    MonteCarloReport {
        schema_version: JSON_SCHEMA_VERSION,
        algorithm: algorithm.as_str().to_string(),
        episodes: logs.len(),
        goal_reached_episodes: logs.iter().filter(|l| l.reached_goal).count(),
        zero_penetration_episodes: logs.iter().filter(|l| l.penetration_steps == 0).count(),
        total_penetration_steps: logs.iter().map(|l| l.penetration_steps).sum(),
        total_feasible_steps: feasible,
        total_relaxed_steps: logs.iter().map(|l| l.relaxed_steps).sum(),
        total_infeasible_steps: logs.iter().map(|l| l.infeasible_steps).sum(),
        total_warmup_steps: logs.iter().map(|l| l.warmup_steps).sum(),
        violations_among_feasible: viol,
        violation_rate_feasible: if feasible > 0 {
            Some(viol as f64 / feasible as f64)
        } else {
            None
        },
        min_clearance: logs
            .iter()
            .filter_map(|l| l.min_clearance)
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.min(c)))),
    }
}

/// Summary of a single episode, serializable for `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeSummary {
    pub schema_version: u32,
    pub algorithm: String,
    pub seed: u64,
    pub steps: usize,
    pub reached_goal: bool,
    pub final_state: [f64; 3],
    pub min_clearance: Option<f64>,
    pub penetration_steps: usize,
    pub feasible_steps: usize,
    pub relaxed_steps: usize,
    pub infeasible_steps: usize,
    pub warmup_steps: usize,
    pub violations_among_feasible: usize,
    pub violation_rate_feasible: Option<f64>,
    pub warnings: Vec<String>,
}

impl EpisodeSummary {
    pub fn from_log(log: &TrajectoryLog, algorithm: AlgorithmChoice, seed: u64) -> Self {
        EpisodeSummary {
            schema_version: JSON_SCHEMA_VERSION,
            algorithm: algorithm.as_str().to_string(),
            seed,
            steps: log.records.len(),
            reached_goal: log.reached_goal,
            final_state: log.final_state,
            min_clearance: log.min_clearance,
            penetration_steps: log.penetration_steps,
            feasible_steps: log.feasible_steps,
            relaxed_steps: log.relaxed_steps,
            infeasible_steps: log.infeasible_steps,
            warmup_steps: log.warmup_steps,
            violations_among_feasible: log.violations_among_feasible,
            violation_rate_feasible: log.violation_rate_feasible(),
            warnings: log.warnings.clone(),
        }
    }
}

/// Writes the trajectory as RFC-4180 CSV with the fixed column set
/// `t,x1,x2,x3,ubar1,ubar2,u1,u2,status,achieved_delta,min_clearance,violated`.
/// Optional fields render as empty cells.
pub fn write_trajectory_csv<W: IoWrite>(out: W, log: &TrajectoryLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t",
        "x1",
        "x2",
        "x3",
        "ubar1",
        "ubar2",
        "u1",
        "u2",
        "status",
        "achieved_delta",
        "min_clearance",
        "violated",
    ])
    .map_err(|e| Error::ConfigError(format!("CSV write failed: {e}")))?;
    for r in &log.records {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        w.write_record([
            r.t.to_string(),
            format!("{}", r.x[0]),
            format!("{}", r.x[1]),
            format!("{}", r.x[2]),
            format!("{}", r.u_bar[0]),
            format!("{}", r.u_bar[1]),
            format!("{}", r.u[0]),
            format!("{}", r.u[1]),
            r.status.as_str().to_string(),
            opt(r.achieved_delta),
            opt(r.min_clearance),
            r.violated.to_string(),
        ])
        .map_err(|e| Error::ConfigError(format!("CSV write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::ConfigError(format!("CSV flush failed: {e}")))?;
    Ok(())
}

/// Renders the 2-D trajectory as a standalone SVG: path polyline, obstacle
/// discs with their offset circles, start and goal markers. Pure string
/// construction with fixed-precision numbers, so output is byte-stable.
pub fn trajectory_svg(scenario: &Scenario, logs: &[(&str, &TrajectoryLog)]) -> String {
    // World-space bounding box over everything drawn.
    let mut min_x = scenario.start.x_m.min(scenario.goal.x_m);
    let mut max_x = scenario.start.x_m.max(scenario.goal.x_m);
    let mut min_y = scenario.start.y_m.min(scenario.goal.y_m);
    let mut max_y = scenario.start.y_m.max(scenario.goal.y_m);
    for o in &scenario.obstacles {
        let r = o.radius_m + scenario.robot_radius_m;
        min_x = min_x.min(o.center_m[0] - r);
        max_x = max_x.max(o.center_m[0] + r);
        min_y = min_y.min(o.center_m[1] - r);
        max_y = max_y.max(o.center_m[1] + r);
    }
    for (_, log) in logs {
        for rec in &log.records {
            min_x = min_x.min(rec.x[0]);
            max_x = max_x.max(rec.x[0]);
            min_y = min_y.min(rec.x[1]);
            max_y = max_y.max(rec.x[1]);
        }
    }
    let pad = 0.05 * ((max_x - min_x).max(max_y - min_y)).max(1.0);
    min_x -= pad;
    max_x += pad;
    min_y -= pad;
    max_y += pad;
    let width = 800.0;
    let scale = width / (max_x - min_x);
    let height = (max_y - min_y) * scale;
    let px = |x: f64| (x - min_x) * scale;
    let py = |y: f64| height - (y - min_y) * scale; // SVG y points down

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {width:.0} {height:.0}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for o in &scenario.obstacles {
        let cx = px(o.center_m[0]);
        let cy = py(o.center_m[1]);
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"#c8c8c8\" stroke=\"#555555\"/>\n",
            o.radius_m * scale
        ));
        svg.push_str(&format!(
            "<circle cx=\"{cx:.2}\" cy=\"{cy:.2}\" r=\"{:.2}\" fill=\"none\" stroke=\"#d06060\" \
             stroke-dasharray=\"6 4\"/>\n",
            (o.radius_m + scenario.robot_radius_m) * scale
        ));
    }
    let palette = ["#2060c0", "#c07020", "#208050", "#8040a0"];
    for (idx, (name, log)) in logs.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let mut points = String::new();
        for rec in &log.records {
            points.push_str(&format!("{:.2},{:.2} ", px(rec.x[0]), py(rec.x[1])));
        }
        points.push_str(&format!(
            "{:.2},{:.2}",
            px(log.final_state[0]),
            py(log.final_state[1])
        ));
        svg.push_str(&format!(
            "<polyline points=\"{points}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\">\
             <title>{name}</title></polyline>\n"
        ));
    }
    svg.push_str(&format!(
        "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"5\" fill=\"#209020\"/>\n",
        px(scenario.start.x_m),
        py(scenario.start.y_m)
    ));
    svg.push_str(&format!(
        "<path d=\"M {x0:.2} {y0:.2} L {x1:.2} {y1:.2} M {x0:.2} {y1:.2} L {x1:.2} {y0:.2}\" \
         stroke=\"#c02020\" stroke-width=\"2\"/>\n",
        x0 = px(scenario.goal.x_m) - 6.0,
        x1 = px(scenario.goal.x_m) + 6.0,
        y0 = py(scenario.goal.y_m) - 6.0,
        y1 = py(scenario.goal.y_m) + 6.0,
    ));
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unicycle_gain_orientation() {
        let model = unicycle_model(0.1).unwrap();
        let g0 = model.gain(&DVector::from_vec(vec![0.0, 0.0, 0.0])).unwrap();
        let expect = DMatrix::from_row_slice(3, 2, &[0.1, 0.0, 0.0, 0.0, 0.0, 0.1]);
        assert_abs_diff_eq!((g0 - expect).norm(), 0.0, epsilon = 1e-15);

        let g90 = model
            .gain(&DVector::from_vec(vec![0.0, 0.0, std::f64::consts::FRAC_PI_2]))
            .unwrap();
        assert_abs_diff_eq!(g90[(0, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g90[(1, 0)], 0.1, epsilon = 1e-15);
    }

    #[test]
    fn unicycle_step_spot_value() {
        let model = unicycle_model(0.1).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0, -2.4]);
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let next = predict_nominal(&model, &x, &u).unwrap();
        assert_abs_diff_eq!(next[0], 0.1 * (-2.4f64).cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(next[1], 0.1 * (-2.4f64).sin(), epsilon = 1e-12);
        assert_abs_diff_eq!(next[2], -2.4, epsilon = 1e-15);
        // ≈ [−0.0737, −0.0675, −2.4]
        assert_abs_diff_eq!(next[0], -0.0737, epsilon = 5e-4);
        assert_abs_diff_eq!(next[1], -0.0675, epsilon = 5e-4);
    }

    #[test]
    fn nominal_control_spot_values() {
        let x = DVector::from_vec(vec![0.0, 0.0, -2.4]);
        let u = nominal_control(&x, (75.0, 85.0));
        assert_abs_diff_eq!(u[0], -11.27, epsilon = 5e-3);
        assert_abs_diff_eq!(u[1], -0.360, epsilon = 2e-3);

        // At the goal the control is exactly zero.
        let u = nominal_control(&DVector::from_vec(vec![75.0, 85.0, 1.0]), (75.0, 85.0));
        assert_eq!(u, DVector::zeros(2));

        // Heading exactly at the goal: pure forward drive.
        let x = DVector::from_vec(vec![0.0, 0.0, std::f64::consts::FRAC_PI_4]);
        let u = nominal_control(&x, (10.0, 10.0));
        let dist = 200.0f64.sqrt();
        assert_abs_diff_eq!(u[0], 0.1 * dist, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_row_hand_geometry() {
        let x = DVector::from_vec(vec![0.0, 0.0, 0.3]);
        let obs = vec![Obstacle { center_m: [3.0, 4.0], radius_m: 1.0 }];
        let cons = obstacle_constraints(&x, &obs, 0.5, None);
        let spec = cons.spec.unwrap();
        assert_eq!(spec.p(), 1);
        assert_abs_diff_eq!(spec.h_matrix()[(0, 0)], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.h_matrix()[(0, 1)], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(spec.h_matrix()[(0, 2)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(spec.h_vector()[0], 3.5, epsilon = 1e-12);
        // The robot's own position satisfies the row.
        assert!(!spec.is_violated(&DVector::from_vec(vec![0.0, 0.0, 0.3])));
        // The offset-circle point toward the robot sits on the boundary.
        let boundary = DVector::from_vec(vec![2.1, 2.8, 0.0]);
        let slack = spec.slack(&boundary);
        assert_abs_diff_eq!(slack[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn obstacle_row_boundary_distance_invariant() {
        // Every emitted row's boundary line is at distance r + r_o from the
        // obstacle center, perpendicular to the robot–center segment.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = DVector::from_vec(vec![
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-3.0..3.0),
            ]);
            let obs = Obstacle {
                center_m: [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)],
                radius_m: rng.gen_range(0.5..3.0),
            };
            let dx = obs.center_m[0] - x[0];
            let dy = obs.center_m[1] - x[1];
            if (dx * dx + dy * dy).sqrt() < 1e-3 {
                continue;
            }
            let cons = obstacle_constraints(&x, &[obs.clone()], 0.5, None);
            let spec = cons.spec.unwrap();
            let a = spec.h_matrix().row(0);
            // Unit normal along robot→center.
            assert_abs_diff_eq!(a[0] * a[0] + a[1] * a[1], 1.0, epsilon = 1e-12);
            let dist = (dx * dx + dy * dy).sqrt();
            assert_abs_diff_eq!(a[0], dx / dist, epsilon = 1e-12);
            assert_abs_diff_eq!(a[1], dy / dist, epsilon = 1e-12);
            // Center-to-line distance is r + r_o.
            let line_dist = a[0] * obs.center_m[0] + a[1] * obs.center_m[1] - spec.h_vector()[0];
            assert_abs_diff_eq!(line_dist, obs.radius_m + 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn obstacle_row_skipped_at_center() {
        let x = DVector::from_vec(vec![3.0, 4.0, 0.0]);
        let obs = vec![Obstacle { center_m: [3.0, 4.0], radius_m: 1.0 }];
        let cons = obstacle_constraints(&x, &obs, 0.5, None);
        assert!(cons.spec.is_none());
        assert_eq!(cons.skipped, 1);
    }

    #[test]
    fn stall_escape_side_selection() {
        let u_bar = DVector::from_vec(vec![1.0, 0.0]);
        let x = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        // Safety line x = 2, normal (1,0), goal straight behind: tie → left,
        // i.e. +90° from the normal = +y.
        let line = EscapeLine { normal: [1.0, 0.0], offset: 2.0, lateral: 2.5 };
        let u = stall_escape(&u_bar, &x, Some(line), (10.0, 0.0));
        let u_left = nominal_control(&x, (2.0, 2.5));
        assert_abs_diff_eq!((u.clone() - u_left).norm(), 0.0, epsilon = 1e-12);

        // Goal offset to the right (−y): right point wins.
        let u = stall_escape(&u_bar, &x, Some(line), (10.0, -3.0));
        let u_right = nominal_control(&x, (2.0, -2.5));
        assert_abs_diff_eq!((u - u_right).norm(), 0.0, epsilon = 1e-12);

        // No active row: pass-through.
        let u = stall_escape(&u_bar, &x, None, (10.0, 0.0));
        assert_eq!(u, u_bar);
    }

    #[test]
    fn zero_noise_no_obstacles_reaches_goal_unmodified() {
        let mut sc = Scenario::unicycle_benchmark();
        sc.obstacles.clear();
        sc.noise = NoiseSpec::Gaussian { mean: vec![0.0; 3], cov_diag: vec![0.0; 3] };
        sc.horizon_steps = 2000;
        let log = run_episode(&sc, AlgorithmChoice::Algorithm1).unwrap();
        assert!(log.reached_goal, "final state {:?}", log.final_state);
        // Goal distance decreases monotonically once underway.
        let goal = (sc.goal.x_m, sc.goal.y_m);
        let mut last = f64::INFINITY;
        for r in &log.records {
            let d = ((r.x[0] - goal.0).powi(2) + (r.x[1] - goal.1).powi(2)).sqrt();
            assert!(d <= last + 1e-9);
            last = d;
        }
        // No constraints ⇒ the filter never modifies the nominal control.
        for r in &log.records {
            assert_eq!(r.u, r.u_bar);
        }
    }

    #[test]
    fn episodes_are_reproducible() {
        let mut sc = Scenario::unicycle_benchmark();
        sc.horizon_steps = 120;
        let a = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 7, 0).unwrap();
        let b = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 7, 0).unwrap();
        assert_eq!(a, b);
        let c = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 8, 0).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn violation_flags_recomputable_from_log() {
        let mut sc = Scenario::unicycle_benchmark();
        sc.horizon_steps = 200;
        let log = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 11, 0).unwrap();
        // Rebuild each step's constraints from the logged state and check
        // the flag against the next logged state.
        for k in 0..log.records.len() {
            let r = &log.records[k];
            let x = DVector::from_vec(vec![r.x[0], r.x[1], r.x[2]]);
            let next = if k + 1 < log.records.len() {
                log.records[k + 1].x
            } else {
                log.final_state
            };
            let cons = obstacle_constraints(&x, &sc.obstacles, sc.robot_radius_m, sc.sensing_radius_m);
            let recomputed = cons
                .spec
                .map(|s| s.is_violated(&DVector::from_vec(vec![next[0], next[1], next[2]])))
                .unwrap_or(false);
            assert_eq!(recomputed, r.violated, "step {k}");
        }
    }

    #[test]
    fn uniform_box_constants_match_monte_carlo() {
        let spec = NoiseSpec::UniformBox { center: vec![0.3, -0.2, 0.1], half_width: 0.5 };
        let c = spec.constants();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let trials = 200_000;
        let (mut s4, mut s3) = (0.0, DVector::zeros(3));
        for _ in 0..trials {
            let w = spec.sample((0.0, 0.0), &mut rng);
            let n2 = w.norm_squared();
            s4 += n2 * n2;
            s3 += &w * n2;
        }
        let zeta_mc = s4 / trials as f64;
        let kappa_mc = (s3 / trials as f64).norm();
        let zeta = c.zeta.unwrap();
        let kappa = c.kappa.unwrap();
        assert!((zeta_mc - zeta).abs() / zeta < 0.02, "ζ: {zeta_mc} vs {zeta}");
        assert!((kappa_mc - kappa).abs() / kappa < 0.05, "κ: {kappa_mc} vs {kappa}");
        assert_abs_diff_eq!(c.sigma.unwrap(), 0.25 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.nu.unwrap(), (0.09f64 + 0.04 + 0.01).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn gaussian_constants_spot_check() {
        // Zero-mean isotropic: ζ = σ²n(n+2) with σ the per-axis variance.
        let spec = NoiseSpec::Gaussian { mean: vec![0.0; 3], cov_diag: vec![1.0; 3] };
        let c = spec.constants();
        assert_abs_diff_eq!(c.zeta.unwrap(), 15.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.nu.unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.kappa.unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.sigma.unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn csv_writer_emits_fixed_header() {
        let mut sc = Scenario::unicycle_benchmark();
        sc.horizon_steps = 12;
        let log = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 5, 0).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &log).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,x1,x2,x3,ubar1,ubar2,u1,u2,status,achieved_delta,min_clearance,violated"
        );
        assert_eq!(lines.count(), log.records.len());
    }

    #[test]
    fn scenario_json_round_trip() {
        let sc = Scenario::unicycle_benchmark();
        let json = serde_json::to_string_pretty(&sc).unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(sc, back);
        // Unknown fields are rejected (config typos must not pass silently).
        let bad = json.replacen("\"delta_s\"", "\"delta_sec\"", 1);
        assert!(serde_json::from_str::<Scenario>(&bad).is_err());
    }

    #[test]
    fn svg_contains_scene_elements() {
        let mut sc = Scenario::unicycle_benchmark();
        sc.horizon_steps = 30;
        let log = run_episode_seeded(&sc, AlgorithmChoice::Algorithm1, 5, 0).unwrap();
        let svg = trajectory_svg(&sc, &[("filtered", &log)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("<polyline"));
        // One filled disc and one dashed offset circle per obstacle.
        assert_eq!(svg.matches("stroke-dasharray").count(), sc.obstacles.len());
        let svg2 = trajectory_svg(&sc, &[("filtered", &log)]);
        assert_eq!(svg, svg2); // byte-stable
    }
}
