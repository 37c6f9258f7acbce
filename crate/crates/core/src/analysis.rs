//! Convergence measurements on simulated trajectories.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{simulate, DynamicsError, NoiseProcess, StateVector, Trajectory};
use crate::graph::{
    check_joint_connectivity, negative_link_assumption_holds, ConnectivityCertificate, GraphError,
    NegativeLinkReport, WeightSchedule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("only {found} samples above the floor guard in the fit window, need {needed}")]
    InsufficientSamples { found: usize, needed: usize },
    #[error("negative-link assumption violated: worst eigenvalue {eigenvalue:e} (segment {segment})")]
    AssumptionViolated { eigenvalue: f64, segment: usize },
    #[error("schedule is not jointly (delta={delta}, T={window})-connected")]
    NotConnected { delta: f64, window: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Fitted rates at or below this are reported as non-convergence.
pub const ALPHA_FLAG_TOL: f64 = 1e-8;

/// Minimum number of samples a rate fit accepts.
pub const MIN_FIT_SAMPLES: usize = 10;

/// `e(t) = max_i |x_i(t) − mean(x(t))|`.
pub fn consensus_error(traj: &Trajectory) -> Vec<f64> {
    traj.states
        .iter()
        .map(|x| {
            let m = x.mean();
            x.iter().fold(0.0f64, |acc, v| acc.max((v - m).abs()))
        })
        .collect()
}

/// `‖x(t) − mean(x(t))·1‖₂`, the quantity the rate fit works on.
pub fn disagreement_norm(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(|x| x.add_scalar(-x.mean()).norm()).collect()
}

/// `d(t) = max_i x_i(t) − min_i x_i(t)`.
pub fn max_state_difference(traj: &Trajectory) -> Vec<f64> {
    traj.states.iter().map(|x| x.max() - x.min()).collect()
}

/// First sample where `d` grows while the consensus error shrinks.
pub fn max_difference_increase(traj: &Trajectory) -> Option<usize> {
    let d = max_state_difference(traj);
    let e = consensus_error(traj);
    (1..d.len()).find(|&k| d[k] > d[k - 1] + 1e-12 && e[k] < e[k - 1])
}

#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    #[serde(rename = "alpha")]
    pub alpha_hat: f64,
    #[serde(rename = "beta")]
    pub beta_hat: f64,
    pub residual: f64,
    #[serde(rename = "window")]
    pub fit_window: (f64, f64),
    pub samples: usize,
    /// `alpha_hat > ALPHA_FLAG_TOL`.
    pub converging: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFitOptions {
    /// Leading stretch excluded from the fit, typically one connectivity window.
    pub skip: f64,
    /// Fit only samples at `t0 + k·period`; removes the intra-period
    /// ripple of periodic schedules.
    pub period: Option<f64>,
}

impl Default for RateFitOptions {
    fn default() -> Self {
        Self { skip: 0.0, period: None }
    }
}

pub fn fit_exponential_rate(traj: &Trajectory) -> Result<RateFit, AnalysisError> {
    fit_exponential_rate_with(traj, RateFitOptions::default())
}

/// Least-squares line through `(t, ln ‖y(t)‖₂)` on the tail half of the
/// trajectory; `beta_hat` rescales the intercept at `t0` by `‖y(t0)‖₂`.
///
/// Samples at or below `1e2·ε·‖x(t0)‖₂` are dropped.
pub fn fit_exponential_rate_with(traj: &Trajectory, opts: RateFitOptions) -> Result<RateFit, AnalysisError> {
    if traj.is_empty() {
        return Err(AnalysisError::InsufficientSamples { found: 0, needed: MIN_FIT_SAMPLES });
    }
    if let Some(p) = opts.period {
        if !(p > 0.0) {
            return Err(AnalysisError::InvalidParameter(format!("period must be positive, got {p}")));
        }
    }
    let t0 = traj.initial_time();
    let t_last = *traj.sample_times.last().expect("nonempty");
    let start = (t0 + opts.skip).max(0.5 * (t0 + t_last));
    let norms = disagreement_norm(traj);
    let floor = 1e2 * f64::EPSILON * traj.states[0].norm();
    let on_grid = |t: f64| match opts.period {
        None => true,
        Some(p) => {
            let k = ((t - t0) / p).round();
            (t - t0 - k * p).abs() <= 1e-9 * t.abs().max(1.0)
        }
    };
    let points: Vec<(f64, f64)> = traj
        .sample_times
        .iter()
        .zip(&norms)
        .filter(|(&t, &e)| t >= start - 1e-12 && e > floor && on_grid(t))
        .map(|(&t, &e)| (t - t0, e.ln()))
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::InsufficientSamples {
            found: points.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let (slope, intercept, residual) = least_squares_line(&points);
    let alpha_hat = -slope;
    let y0 = norms[0];
    let beta_hat = if y0 > 0.0 { intercept.exp() / y0 } else { f64::NAN };
    Ok(RateFit {
        alpha_hat,
        beta_hat,
        residual,
        fit_window: (points[0].0 + t0, points[points.len() - 1].0 + t0),
        samples: points.len(),
        converging: alpha_hat > ALPHA_FLAG_TOL,
    })
}

/// Returns `(slope, intercept, rms residual)`.
fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessReport {
    pub zeta: f64,
    #[serde(rename = "B0")]
    pub b0: f64,
    pub t_end: f64,
    pub sup_error: f64,
    /// Measured candidate for the robust-consensus constant: the largest
    /// error seen from a consensus start.
    #[serde(rename = "C_bound")]
    pub c_bound: f64,
    /// Error at `t0 + (t_end − t0)/10`.
    pub error_at_tenth: f64,
    pub error_at_end: f64,
    /// `error_at_end > 10·error_at_tenth`: linear-or-faster growth.
    pub growing: bool,
}

/// Simulates from the consensus state `0` under `noise` and measures the
/// consensus error (against the running mean).
pub fn robustness_report(
    sched: &WeightSchedule,
    noise: &NoiseProcess,
    t_end: f64,
    sample_dt: f64,
) -> Result<RobustnessReport, AnalysisError> {
    let x0 = StateVector::new(0.0, DVector::zeros(sched.node_count()))?;
    let traj = simulate(sched, &x0, t_end, sample_dt, noise)?;
    let errors = consensus_error(&traj);
    let sup_error = errors.iter().copied().fold(0.0, f64::max);
    let tenth = t_end / 10.0;
    let k_tenth = traj.sample_times.partition_point(|&t| t < tenth - 1e-9);
    let error_at_tenth = errors[k_tenth.min(errors.len() - 1)];
    let error_at_end = *errors.last().expect("nonempty");
    Ok(RobustnessReport {
        zeta: noise.zeta(),
        b0: noise.b0(),
        t_end,
        sup_error,
        c_bound: sup_error,
        error_at_tenth,
        error_at_end,
        growing: error_at_end > 10.0 * error_at_tenth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedCheckParams {
    pub delta: f64,
    pub window: f64,
    pub stride: f64,
    pub t_end: f64,
    pub sample_dt: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SignedCheck {
    pub negative_link: NegativeLinkReport,
    pub certificate: ConnectivityCertificate,
    pub fit: RateFit,
}

/// Convergence of a signed schedule, refused unless every `L_k` is PSD and
/// the threshold graph of the weight integrals is jointly connected.
pub fn signed_convergence_check(
    sched: &WeightSchedule,
    x0: &StateVector,
    params: SignedCheckParams,
) -> Result<SignedCheck, AnalysisError> {
    let negative_link = negative_link_assumption_holds(sched, sched.psd_tolerance());
    if !negative_link.holds {
        return Err(AnalysisError::AssumptionViolated {
            eigenvalue: negative_link.worst_eigenvalue,
            segment: negative_link.worst_segment,
        });
    }
    let certificate = check_joint_connectivity(sched, params.delta, params.window, params.stride)?;
    if !certificate.is_connected() {
        return Err(AnalysisError::NotConnected {
            delta: params.delta,
            window: params.window,
        });
    }
    let traj = simulate(sched, x0, params.t_end, params.sample_dt, &NoiseProcess::zero(sched.node_count()))?;
    let fit = match fit_exponential_rate_with(
        &traj,
        RateFitOptions {
            skip: params.window,
            period: None,
        },
    ) {
        Ok(fit) => fit,
        // already at consensus: nothing left to decay
        Err(AnalysisError::InsufficientSamples { .. }) if disagreement_norm(&traj)[0] == 0.0 => RateFit {
            alpha_hat: f64::INFINITY,
            beta_hat: 0.0,
            residual: 0.0,
            fit_window: (x0.time, params.t_end),
            samples: 0,
            converging: true,
        },
        Err(e) => return Err(e),
    };
    Ok(SignedCheck {
        negative_link,
        certificate,
        fit,
    })
}
