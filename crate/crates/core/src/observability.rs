//! Observability of the projected consensus system.
//!
//! `W(s, s+δ) = ∫ Φᵀ(t,s) D(t) Dᵀ(t) Φ(t,s) dt` is computed by composite
//! Simpson ([`gramian`]) or segment-wise in closed form ([`gramian_exact`]):
//! with `F_k = −D_k D_kᵀ` symmetric, each segment contributes
//! `Φ_kᵀ (I − e^{2F_kΔ})/2 Φ_k`. Reconstruction inverts the exact Gramian so
//! that the only quadrature error left is the one on the sampled signal.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{
    project, projected_system, DynamicsError, OutputRoute, ProjectedSystem, Propagator,
    SystemKind, Trajectory,
};
use crate::graph::{
    edge_order, incidence, integrated_laplacian, time_eps, window_starts, GraphError,
    WeightSchedule,
};
use crate::linalg::{averaging_matrix, SortedEigen};
use crate::quadrature::{even_subdivisions, simpson, uniform_nodes};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservabilityError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("unobservable window: Gramian lambda_min {lambda_min:e} <= {threshold:e}")]
    Unobservable { lambda_min: f64, threshold: f64 },
    #[error("signal format error: {0}")]
    Format(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Default Simpson step for a window of length `delta`.
pub fn default_quad_step(delta: f64) -> f64 {
    delta / 1024.0
}

/// Default cutoff below which a Gramian counts as singular.
pub const DEFAULT_COND_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ObservabilityGramian {
    pub start: f64,
    pub delta: f64,
    #[serde(serialize_with = "serialize_matrix")]
    pub entries: DMatrix<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl ObservabilityGramian {
    fn from_entries(start: f64, delta: f64, entries: DMatrix<f64>) -> Self {
        let entries = crate::linalg::symmetrize(&entries);
        let eig = SortedEigen::new(&entries);
        Self {
            start,
            delta,
            lambda_min: eig.min(),
            lambda_max: eig.max(),
            entries,
        }
    }
}

fn serialize_matrix<S: serde::Serializer>(m: &DMatrix<f64>, ser: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(ser)
}

fn check_window(delta: f64) -> Result<(), ObservabilityError> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(ObservabilityError::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    Ok(())
}

/// Simpson quadrature of the observability Gramian; every segment piece of
/// `[s, s+δ]` gets its own uniform grid with step at most `quad_step`.
pub fn gramian(
    sched: &WeightSchedule,
    s: f64,
    delta: f64,
    quad_step: f64,
) -> Result<ObservabilityGramian, ObservabilityError> {
    check_window(delta)?;
    if !(quad_step > 0.0) {
        return Err(ObservabilityError::InvalidParameter(format!(
            "quad_step must be positive, got {quad_step}"
        )));
    }
    let sys = projected_system(sched)?;
    let prop = Propagator::new(sched, SystemKind::Projected);
    let n = sched.node_count();
    let mut phi = DMatrix::identity(n, n);
    let mut total = DMatrix::zeros(n, n);
    for piece in sched.pieces(s, s + delta)? {
        let k = piece.segment;
        let ddt = &sys.outputs[k] * sys.outputs[k].transpose();
        let nodes = uniform_nodes(piece.t0, piece.t1, even_subdivisions(piece.t0, piece.t1, quad_step));
        let values: Vec<DMatrix<f64>> = nodes
            .iter()
            .map(|&t| {
                let phi_t = prop.segment_exp(k, t - piece.t0) * &phi;
                phi_t.transpose() * &ddt * phi_t
            })
            .collect();
        total += simpson(&nodes, &values).expect("grid has nodes");
        phi = prop.segment_exp(k, piece.duration()) * phi;
    }
    Ok(ObservabilityGramian::from_entries(s, delta, total))
}

/// Closed-form Gramian, exact to rounding.
pub fn gramian_exact(
    sched: &WeightSchedule,
    s: f64,
    delta: f64,
) -> Result<ObservabilityGramian, ObservabilityError> {
    check_window(delta)?;
    let prop = Propagator::new(sched, SystemKind::Projected);
    let n = sched.node_count();
    let mut phi = DMatrix::identity(n, n);
    let mut total = DMatrix::zeros(n, n);
    for piece in sched.pieces(s, s + delta)? {
        let eig = prop.segment_eigen(piece.segment);
        let dt = piece.duration();
        let inner = eig.map(|l| 0.5 * (1.0 - (2.0 * l * dt).exp()));
        total += phi.transpose() * inner * &phi;
        phi = eig.map(|l| (l * dt).exp()) * phi;
    }
    Ok(ObservabilityGramian::from_entries(s, delta, total))
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub delta: f64,
    pub stride: f64,
    pub alpha1_hat: f64,
    pub alpha2_hat: f64,
    /// Window start attaining `alpha1_hat`.
    pub worst_window: f64,
    pub windows_checked: usize,
    /// `alpha1_hat` above the rounding floor `1e-12·δ·max(1, N·A*)`.
    pub observable: bool,
}

/// Extremal eigenvalues of `∫_s^{s+δ} (L + 11ᵀ/N) dt` over window starts.
///
/// The integral is linear in `s` between boundary-aligned starts, so its
/// smallest eigenvalue (concave there) is minimised and its largest (convex)
/// maximised at those starts; the stride grid only adds evidence.
pub fn uniform_bounds_check(
    sched: &WeightSchedule,
    delta_obs: f64,
    stride: f64,
) -> Result<BoundsReport, ObservabilityError> {
    check_window(delta_obs)?;
    let n = sched.node_count();
    let mean_part = averaging_matrix(n) * delta_obs;
    let starts = window_starts(sched, delta_obs, stride)?;
    let mut alpha1 = f64::INFINITY;
    let mut alpha2 = f64::NEG_INFINITY;
    let mut worst = 0.0;
    for &s in &starts {
        let integral = integrated_laplacian(sched, s, delta_obs)?;
        let eig = SortedEigen::new(&(integral.laplacian().as_matrix() + &mean_part));
        if eig.min() < alpha1 {
            alpha1 = eig.min();
            worst = s;
        }
        alpha2 = alpha2.max(eig.max());
    }
    let floor = 1e-12 * delta_obs * (n as f64 * sched.bound()).max(1.0);
    Ok(BoundsReport {
        delta: delta_obs,
        stride,
        alpha1_hat: alpha1,
        alpha2_hat: alpha2,
        worst_window: worst,
        windows_checked: starts.len(),
        observable: alpha1 > floor,
    })
}

/// `∫_s^{s+T} D Dᵀ dt` from the output matrices of a projected system.
pub fn integrated_output_product(
    sys: &ProjectedSystem,
    sched: &WeightSchedule,
    s: f64,
    length: f64,
) -> Result<DMatrix<f64>, ObservabilityError> {
    let n = sched.node_count();
    let mut total = DMatrix::zeros(n, n);
    for piece in sched.pieces(s, s + length)? {
        let d = &sys.outputs[piece.segment];
        total += d * d.transpose() * piece.duration();
    }
    Ok(total)
}

/// Channel layout of a sampled output signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputChannels {
    /// `z = Hᵀx`, one channel per edge in lexicographic order (0-based pairs).
    Edges(Vec<(usize, usize)>),
    /// `z = √(L + 11ᵀ/N)·y`, one channel per node.
    Projected(usize),
}

impl OutputChannels {
    pub fn len(&self) -> usize {
        match self {
            Self::Edges(e) => e.len(),
            Self::Projected(n) => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn headers(&self) -> Vec<String> {
        match self {
            Self::Edges(e) => e.iter().map(|(i, j)| format!("z_{}_{}", i + 1, j + 1)).collect(),
            Self::Projected(n) => (1..=*n).map(|i| format!("d_{i}")).collect(),
        }
    }
}

/// Output samples over time. A time may appear twice in a row: left and
/// right limits across a segment boundary where `H` jumps.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSignalTrace {
    pub sample_times: Vec<f64>,
    pub signals: Vec<DVector<f64>>,
    pub channels: OutputChannels,
}

impl EdgeSignalTrace {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    /// Header `t,z_1_2,z_1_3,...,z_{N−1}_N` (or `t,d_1,...,d_N`), 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend(self.channels.headers());
        writeln!(out, "{}", header.join(","))?;
        for (t, z) in self.sample_times.iter().zip(&self.signals) {
            write!(out, "{t:.16e}")?;
            for v in z.iter() {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Self, ObservabilityError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| ObservabilityError::Format("empty signal file".into()))?
            .split(',')
            .map(str::trim)
            .collect();
        if header.first() != Some(&"t") {
            return Err(ObservabilityError::Format("first column must be \"t\"".into()));
        }
        let names = &header[1..];
        let channels = if names.iter().all(|h| h.starts_with("d_")) && !names.is_empty() {
            OutputChannels::Projected(names.len())
        } else {
            let mut pairs = Vec::with_capacity(names.len());
            for h in names {
                let parts: Vec<&str> = h.split('_').collect();
                let parsed = match parts.as_slice() {
                    ["z", i, j] => i.parse::<usize>().ok().zip(j.parse::<usize>().ok()),
                    _ => None,
                };
                match parsed {
                    Some((i, j)) if i >= 1 && j > i => pairs.push((i - 1, j - 1)),
                    _ => return Err(ObservabilityError::Format(format!("bad column name {h:?}"))),
                }
            }
            OutputChannels::Edges(pairs)
        };
        let mut sample_times = Vec::new();
        let mut signals = Vec::new();
        for (row, line) in lines.enumerate() {
            let values: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| ObservabilityError::Format(format!("row {row}: {e}")))?;
            if values.len() != header.len() {
                return Err(ObservabilityError::Format(format!(
                    "row {row} has {} columns, header has {}",
                    values.len(),
                    header.len()
                )));
            }
            sample_times.push(values[0]);
            signals.push(DVector::from_column_slice(&values[1..]));
        }
        Ok(Self {
            sample_times,
            signals,
            channels,
        })
    }
}

/// Segment active just before `t`.
fn segment_left_of(sched: &WeightSchedule, t: f64) -> usize {
    sched.segment_index_at((t - 4.0 * time_eps(t)).max(0.0))
}

fn is_interior_boundary(boundaries: &[f64], t: f64) -> bool {
    boundaries.iter().any(|&b| (b - t).abs() <= 1e-9 * t.abs().max(1.0))
}

/// Build a trace from per-sample output maps; boundary samples are emitted
/// twice, with the outgoing and incoming segment.
fn trace_from(
    traj: &Trajectory,
    sched: &WeightSchedule,
    channels: OutputChannels,
    output: impl Fn(usize, &DVector<f64>) -> DVector<f64>,
) -> Result<EdgeSignalTrace, ObservabilityError> {
    if traj.is_empty() {
        return Err(ObservabilityError::Format("empty trajectory".into()));
    }
    let first = traj.initial_time();
    let last = *traj.sample_times.last().expect("nonempty");
    let boundaries = sched.boundaries_in(first, last)?;
    let mut sample_times = Vec::with_capacity(traj.len() + boundaries.len());
    let mut signals = Vec::with_capacity(traj.len() + boundaries.len());
    let count = traj.len();
    for (idx, (&t, x)) in traj.sample_times.iter().zip(&traj.states).enumerate() {
        let right = sched.segment_index_at(t);
        let left = segment_left_of(sched, t);
        if idx + 1 == count && idx > 0 {
            sample_times.push(t);
            signals.push(output(left, x));
        } else if idx > 0 && is_interior_boundary(&boundaries, t) {
            sample_times.push(t);
            signals.push(output(left, x));
            sample_times.push(t);
            signals.push(output(right, x));
        } else {
            sample_times.push(t);
            signals.push(output(right, x));
        }
    }
    Ok(EdgeSignalTrace {
        sample_times,
        signals,
        channels,
    })
}

/// `z(t_k) = H(t_k)ᵀ x(t_k)`; the component for edge `{i,j}` is
/// `√a_ij·(x_j − x_i)`.
pub fn edge_signals(
    traj: &Trajectory,
    sched: &WeightSchedule,
) -> Result<EdgeSignalTrace, ObservabilityError> {
    if traj.node_count() != sched.node_count() {
        return Err(ObservabilityError::Format(format!(
            "trajectory has {} nodes, schedule has {}",
            traj.node_count(),
            sched.node_count()
        )));
    }
    let mut hs = Vec::with_capacity(sched.segments().len());
    for seg in sched.segments() {
        hs.push(incidence(&seg.graph)?.into_matrix());
    }
    trace_from(
        traj,
        sched,
        OutputChannels::Edges(edge_order(sched.node_count())),
        |k, x| hs[k].tr_mul(x),
    )
}

/// Full projected outputs `D(t)ᵀ y(t)` with `D = √(L + 11ᵀ/N)`; the signal
/// used for signed schedules.
pub fn projected_outputs(
    traj: &Trajectory,
    sched: &WeightSchedule,
) -> Result<EdgeSignalTrace, ObservabilityError> {
    let sys = projected_system(sched)?;
    if sys.route != OutputRoute::SqrtFactor {
        return Err(ObservabilityError::Format(
            "projected outputs are only used for signed schedules; use edge_signals".into(),
        ));
    }
    trace_from(
        traj,
        sched,
        OutputChannels::Projected(sched.node_count()),
        |k, x| sys.outputs[k].tr_mul(&project(x)),
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct Reconstruction {
    pub s: f64,
    pub delta: f64,
    pub lambda_min: f64,
    #[serde(serialize_with = "serialize_vector")]
    pub estimate: DVector<f64>,
}

fn serialize_vector<S: serde::Serializer>(v: &DVector<f64>, ser: S) -> Result<S::Ok, S::Error> {
    v.iter().copied().collect::<Vec<f64>>().serialize(ser)
}

pub fn reconstruct(
    z: &EdgeSignalTrace,
    sched: &WeightSchedule,
    s: f64,
    delta: f64,
) -> Result<Reconstruction, ObservabilityError> {
    reconstruct_with(z, sched, s, delta, DEFAULT_COND_TOL)
}

/// `ŷ(s) = W⁻¹ ∫_s^{s+δ} Φᵀ(t,s) D(t) z(t) dt`, the estimate of
/// `x(s) − x_ave(0)·1`.
///
/// The signal integral uses Simpson on the trace's own samples, split at
/// segment boundaries; each boundary inside the window must be present as a
/// left/right pair of rows.
pub fn reconstruct_with(
    z: &EdgeSignalTrace,
    sched: &WeightSchedule,
    s: f64,
    delta: f64,
    cond_tol: f64,
) -> Result<Reconstruction, ObservabilityError> {
    check_window(delta)?;
    let n = sched.node_count();
    let sys = projected_system(sched)?;
    match (&z.channels, sys.route) {
        (OutputChannels::Edges(order), OutputRoute::Incidence) if *order == edge_order(n) => {}
        (OutputChannels::Projected(m), OutputRoute::SqrtFactor) if *m == n => {}
        (channels, route) => {
            return Err(ObservabilityError::Format(format!(
                "signal channels {channels:?} do not match the {route:?} outputs of a {n}-node schedule"
            )))
        }
    }
    if z.signals.iter().any(|v| v.len() != z.channels.len()) {
        return Err(ObservabilityError::Format("signal rows disagree with channel count".into()));
    }

    let end = s + delta;
    let tol = |t: f64| 1e-9 * t.abs().max(1.0);
    let mut rows: Vec<usize> = (0..z.len())
        .filter(|&k| z.sample_times[k] >= s - tol(s) && z.sample_times[k] <= end + tol(end))
        .collect();
    if rows.len() >= 2 && (z.sample_times[rows[1]] - s).abs() <= tol(s) {
        rows.remove(0);
    }
    if rows.len() >= 2 && (z.sample_times[rows[rows.len() - 2]] - end).abs() <= tol(end) {
        rows.pop();
    }
    let covers = rows.len() >= 2
        && (z.sample_times[rows[0]] - s).abs() <= tol(s)
        && (z.sample_times[*rows.last().expect("nonempty")] - end).abs() <= tol(end);
    if !covers {
        return Err(ObservabilityError::Format(format!(
            "signal samples do not span the window [{s}, {end}]"
        )));
    }

    // split at duplicated instants
    let mut pieces: Vec<Vec<usize>> = vec![vec![rows[0]]];
    for w in rows.windows(2) {
        if (z.sample_times[w[1]] - z.sample_times[w[0]]).abs() <= tol(z.sample_times[w[1]]) {
            pieces.push(vec![w[1]]);
        } else {
            pieces.last_mut().expect("nonempty").push(w[1]);
        }
    }
    let boundaries = sched.boundaries_in(s, end)?;
    for &b in &boundaries {
        let split_here = pieces
            .iter()
            .skip(1)
            .any(|p| (z.sample_times[p[0]] - b).abs() <= tol(b));
        if !split_here {
            return Err(ObservabilityError::Format(format!(
                "segment boundary {b} is not sampled as a left/right pair"
            )));
        }
    }

    let prop = Propagator::new(sched, SystemKind::Projected);
    let r = n * (n - 1) / 2;
    let mut phi = DMatrix::identity(n, n);
    let mut phi_time = s;
    let mut rhs = DVector::zeros(n);
    for piece in &pieces {
        if piece.len() < 2 {
            return Err(ObservabilityError::Format(format!(
                "need at least two samples between boundaries near t={}",
                z.sample_times[piece[0]]
            )));
        }
        let t0 = z.sample_times[piece[0]];
        let t1 = z.sample_times[*piece.last().expect("nonempty")];
        let k = sched.segment_index_at(0.5 * (t0 + t1));
        let d = &sys.outputs[k];
        let d_used = match sys.route {
            OutputRoute::Incidence => d.columns(0, r).into_owned(),
            OutputRoute::SqrtFactor => d.clone(),
        };
        // Φ(t, s) = exp(F_k (t − t0)) Φ(t0, s): one exponential per sample
        // instead of a running product, which would accumulate rounding.
        phi = prop.segment_exp(k, t0 - phi_time) * phi;
        let mut times = Vec::with_capacity(piece.len());
        let mut values = Vec::with_capacity(piece.len());
        for &row in piece {
            let t = z.sample_times[row];
            let phi_t = prop.segment_exp(k, t - t0) * &phi;
            times.push(t);
            values.push(phi_t.tr_mul(&(&d_used * &z.signals[row])));
        }
        phi = prop.segment_exp(k, t1 - t0) * phi;
        phi_time = t1;
        rhs += simpson(&times, &values).expect("two or more samples");
    }

    let w = gramian_exact(sched, s, delta)?;
    if !(w.lambda_min > cond_tol) {
        return Err(ObservabilityError::Unobservable {
            lambda_min: w.lambda_min,
            threshold: cond_tol,
        });
    }
    let eig = SortedEigen::new(&w.entries);
    let estimate = eig.apply(|l| 1.0 / l, &rhs);
    Ok(Reconstruction {
        s,
        delta,
        lambda_min: w.lambda_min,
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, NoiseProcess, StateVector};
    use crate::graph::{builtin, GraphSnapshot};
    use crate::linalg::max_abs;
    use approx::assert_relative_eq;

    #[test]
    fn edge_signal_examples() {
        let k2 = WeightSchedule::constant(GraphSnapshot::from_edges(2, &[(0, 1, 4.0)]).unwrap(), 1.0).unwrap();
        let traj = simulate(&k2, &StateVector::at_zero(&[1.0, -1.0]), 1.0, 0.5, &NoiseProcess::zero(2)).unwrap();
        let z = edge_signals(&traj, &k2).unwrap();
        assert_eq!(z.signals[0][0], -4.0);

        let p3 = WeightSchedule::constant(
            GraphSnapshot::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap(),
            1.0,
        )
        .unwrap();
        let traj = simulate(&p3, &StateVector::at_zero(&[1.0, 0.0, -1.0]), 1.0, 0.5, &NoiseProcess::zero(3)).unwrap();
        let z = edge_signals(&traj, &p3).unwrap();
        assert_eq!(z.signals[0], DVector::from_vec(vec![-1.0, 0.0, -1.0]));

        let consensus = simulate(&p3, &StateVector::at_zero(&[2.0; 3]), 1.0, 0.5, &NoiseProcess::zero(3)).unwrap();
        let z = edge_signals(&consensus, &p3).unwrap();
        assert!(z.signals.iter().all(|v| v.amax() == 0.0));
    }

    #[test]
    fn edge_signals_duplicate_boundary_rows() {
        let sched = builtin::alternating_path3();
        let traj = simulate(&sched, &StateVector::at_zero(&[1.0, 0.0, -1.0]), 2.0, 0.5, &NoiseProcess::zero(3)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        // samples 0, .5, 1, 1, 1.5, 2
        assert_eq!(z.sample_times, vec![0.0, 0.5, 1.0, 1.0, 1.5, 2.0]);
        let at_one = &z.signals[2..4];
        assert_eq!(at_one[0][2], 0.0); // {2,3} off before t=1
        assert_eq!(at_one[1][0], 0.0); // {1,2} off after t=1
        assert!(edge_signals(&traj, &builtin::signed_triangle(2.0)).is_err());
    }

    #[test]
    fn gramian_short_window_taylor() {
        let sched = builtin::k2_constant(1.0);
        let delta = 1e-4;
        let w = gramian(&sched, 0.0, delta, default_quad_step(delta)).unwrap();
        let sys = projected_system(&sched).unwrap();
        let ddt = &sys.outputs[0] * sys.outputs[0].transpose();
        assert!(max_abs(&(&w.entries - ddt * delta)) < 1e-6);
    }

    #[test]
    fn gramian_disconnected_has_kernel() {
        let sched = builtin::isolated_node3(10.0);
        let w = gramian(&sched, 0.0, 5.0, default_quad_step(5.0)).unwrap();
        assert!(w.lambda_min < 1e-8);
        let v = DVector::from_vec(vec![1.0, 1.0, -2.0]) / 6f64.sqrt();
        assert!((&w.entries * v).amax() < 1e-12);
    }

    #[test]
    fn gramian_k3_brute_force() {
        // independent oracle: trapezoid sum with Φ from a fresh matrix exponential
        let sched = builtin::complete(3, 1.0, 2.0);
        let f = -(crate::graph::laplacian(&sched.segments()[0].graph).into_matrix() + averaging_matrix(3));
        let steps = 10_000;
        let h = 1.0 / steps as f64;
        let mut brute = DMatrix::zeros(3, 3);
        for k in 0..=steps {
            let phi = (f.clone() * (k as f64 * h)).exp();
            let weight = if k == 0 || k == steps { 0.5 * h } else { h };
            brute += phi.transpose() * (-&f) * phi * weight;
        }
        let w = gramian(&sched, 0.0, 1.0, default_quad_step(1.0)).unwrap();
        assert!(max_abs(&(&w.entries - &brute)) < 1e-7);
        assert!(w.lambda_min > 0.1);
        // eigenvalues of −F are {1,3,3}: λ_min(W) = (1 − e^{−2})/2
        assert_relative_eq!(w.lambda_min, 0.5 * (1.0 - (-2.0f64).exp()), epsilon = 1e-10);
    }

    #[test]
    fn simpson_gramian_matches_closed_form_on_switching() {
        let sched = builtin::five_node_switching();
        let a = gramian(&sched, 0.3, 5.5, default_quad_step(5.5)).unwrap();
        let b = gramian_exact(&sched, 0.3, 5.5).unwrap();
        let coarse = max_abs(&(&a.entries - &b.entries));
        assert!(coarse < 1e-8, "diff {coarse:e}");
        assert!(a.lambda_min > 0.0);
        let fine = gramian(&sched, 0.3, 5.5, default_quad_step(5.5) / 2.0).unwrap();
        let ratio = coarse / max_abs(&(&fine.entries - &b.entries));
        assert!(ratio > 14.0 && ratio < 18.0, "ratio {ratio}");
    }

    #[test]
    fn bounds_examples() {
        let k2 = builtin::k2_constant(5.0);
        let r = uniform_bounds_check(&k2, 1.0, 0.5).unwrap();
        assert_relative_eq!(r.alpha1_hat, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.alpha2_hat, 2.0, epsilon = 1e-12);
        assert!(r.observable);

        let empty = WeightSchedule::constant(GraphSnapshot::empty(3), 5.0).unwrap();
        let r = uniform_bounds_check(&empty, 1.0, 0.5).unwrap();
        assert!(r.alpha1_hat.abs() < 1e-14);
        assert!(!r.observable);

        let alt = builtin::alternating_path3();
        assert!(uniform_bounds_check(&alt, 2.0, 0.1).unwrap().alpha1_hat > 0.0);
    }

    #[test]
    fn reconstruct_zero_signal() {
        let sched = builtin::k2_constant(2.0);
        let traj = simulate(&sched, &StateVector::at_zero(&[3.0, 3.0]), 2.0, 0.01, &NoiseProcess::zero(2)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        let est = reconstruct(&z, &sched, 0.0, 1.0).unwrap();
        assert_eq!(est.estimate, DVector::zeros(2));
    }

    #[test]
    fn reconstruct_k2_roundtrip() {
        let sched = builtin::k2_constant(2.0);
        let traj = simulate(&sched, &StateVector::at_zero(&[1.0, -1.0]), 1.0, 1.0 / 1024.0, &NoiseProcess::zero(2)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        let est = reconstruct(&z, &sched, 0.0, 1.0).unwrap();
        assert!((est.estimate - DVector::from_vec(vec![1.0, -1.0])).amax() < 1e-6);
    }

    #[test]
    fn reconstruct_rejects_unobservable_and_bad_layout() {
        let sched = builtin::isolated_node3(4.0);
        let traj = simulate(&sched, &StateVector::at_zero(&[1.0, 0.0, -1.0]), 4.0, 0.01, &NoiseProcess::zero(3)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        assert!(matches!(
            reconstruct(&z, &sched, 0.0, 2.0),
            Err(ObservabilityError::Unobservable { .. })
        ));
        let mut shuffled = z.clone();
        shuffled.channels = OutputChannels::Edges(vec![(0, 2), (0, 1), (1, 2)]);
        assert!(matches!(reconstruct(&shuffled, &sched, 0.0, 2.0), Err(ObservabilityError::Format(_))));
        assert!(matches!(reconstruct(&z, &sched, 3.0, 2.0), Err(ObservabilityError::Format(_))));
    }

    #[test]
    fn reconstruct_signed_from_projected_outputs() {
        let sched = builtin::signed_triangle(4.0);
        let traj = simulate(&sched, &StateVector::at_zero(&[2.0, 0.5, -1.0]), 4.0, 1.0 / 512.0, &NoiseProcess::zero(3)).unwrap();
        let z = projected_outputs(&traj, &sched).unwrap();
        let est = reconstruct(&z, &sched, 1.0, 2.0).unwrap();
        let truth = traj.state_at(1.0).unwrap().add_scalar(-traj.initial_average);
        assert!((est.estimate - truth).amax() < 1e-6);
        assert!(edge_signals(&traj, &sched).is_err());
    }

    fn switching_roundtrip_error(x0: &[f64], sample_dt: f64) -> (f64, DVector<f64>) {
        let sched = builtin::five_node_switching();
        let traj = simulate(&sched, &StateVector::at_zero(x0), 10.0, sample_dt, &NoiseProcess::zero(5)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        let est = reconstruct(&z, &sched, 2.0, 8.0).unwrap();
        let truth = traj.state_at(2.0).unwrap().add_scalar(-traj.initial_average);
        ((&est.estimate - truth).norm(), est.estimate)
    }

    #[test]
    fn switching_roundtrip_converges_at_simpson_order() {
        let x0 = [0.7, -1.3, 2.1, 0.4, -0.9];
        let step = default_quad_step(8.0);
        let (coarse, _) = switching_roundtrip_error(&x0, step);
        let (fine, _) = switching_roundtrip_error(&x0, step / 2.0);
        eprintln!("coarse {coarse:e} fine {fine:e} ratio {}", coarse / fine);
        assert!(coarse < 1e-5);
        assert!(coarse / fine >= 8.0);
    }

    #[test]
    fn reconstruction_is_blind_to_average_shift() {
        let x0 = [0.7, -1.3, 2.1, 0.4, -0.9];
        let shifted: Vec<f64> = x0.iter().map(|v| v + 3.25).collect();
        let (_, a) = switching_roundtrip_error(&x0, default_quad_step(8.0));
        let (_, b) = switching_roundtrip_error(&shifted, default_quad_step(8.0));
        assert!((a - b).amax() < 1e-9);
    }

    #[test]
    fn csv_roundtrip_keeps_duplicates() {
        let sched = builtin::alternating_path3();
        let traj = simulate(&sched, &StateVector::at_zero(&[1.0, 0.0, -1.0]), 2.0, 0.25, &NoiseProcess::zero(3)).unwrap();
        let z = edge_signals(&traj, &sched).unwrap();
        let mut buf = Vec::new();
        z.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,z_1_2,z_1_3,z_2_3\n"));
        assert_eq!(EdgeSignalTrace::from_csv_str(&text).unwrap(), z);
        assert!(EdgeSignalTrace::from_csv_str("t,q\n0,1\n").is_err());
    }
}
