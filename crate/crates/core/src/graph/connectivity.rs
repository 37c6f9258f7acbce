use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use serde::Serialize;

use super::schedule::time_eps;
use super::{laplacian, lambda2, GraphError, LaplacianMatrix, WeightSchedule};
use crate::linalg::SortedEigen;

/// `∫_s^{s+T} L(t) dt` together with the per-edge integrals `∫ a_ij dt`.
#[derive(Debug, Clone)]
pub struct IntegratedLaplacian {
    pub start: f64,
    pub length: f64,
    edge_integrals: DMatrix<f64>,
    laplacian: LaplacianMatrix,
}

impl IntegratedLaplacian {
    pub fn laplacian(&self) -> &LaplacianMatrix {
        &self.laplacian
    }

    /// `∫ a_ij dt` over the window (0-based nodes).
    pub fn edge_integral(&self, i: usize, j: usize) -> f64 {
        self.edge_integrals[(i, j)]
    }

    pub fn edge_integrals(&self) -> &DMatrix<f64> {
        &self.edge_integrals
    }
}

/// Exact segment-wise integral of the Laplacian over `[s, s+T]`.
pub fn integrated_laplacian(
    sched: &WeightSchedule,
    s: f64,
    length: f64,
) -> Result<IntegratedLaplacian, GraphError> {
    if length < 0.0 || !length.is_finite() {
        return Err(GraphError::InvalidParameter(format!(
            "window length must be nonnegative, got {length}"
        )));
    }
    let n = sched.node_count();
    let mut edge_integrals = DMatrix::zeros(n, n);
    for piece in sched.pieces(s, s + length)? {
        let w = sched.segments()[piece.segment].graph.weights();
        edge_integrals += w * piece.duration();
    }
    let laplacian = LaplacianMatrix::from_weights(&edge_integrals);
    Ok(IntegratedLaplacian {
        start: s,
        length,
        edge_integrals,
        laplacian,
    })
}

/// Window starts at which a property of `∫_s^{s+T}` must be checked.
///
/// Per-edge integrals of a piecewise-constant schedule are piecewise linear
/// in `s` with breakpoints where `s` or `s + T` crosses a segment boundary,
/// so those starts are always included on top of the stride grid. Periodic
/// schedules are covered over one period; finite ones over `[0, H − T]`.
pub fn window_starts(
    sched: &WeightSchedule,
    length: f64,
    stride: f64,
) -> Result<Vec<f64>, GraphError> {
    if !(length > 0.0) || !(stride > 0.0) {
        return Err(GraphError::InvalidParameter(format!(
            "window length and stride must be positive, got T={length}, stride={stride}"
        )));
    }
    let h = sched.horizon();
    let boundaries: Vec<f64> = sched
        .segments()
        .iter()
        .map(|s| s.t_start)
        .chain(std::iter::once(h))
        .collect();
    let mut starts = Vec::new();
    if sched.is_periodic() {
        let mut k = 0usize;
        loop {
            let s = k as f64 * stride;
            if s >= h - time_eps(h) {
                break;
            }
            starts.push(s);
            k += 1;
        }
        for &b in &boundaries {
            starts.push(b.rem_euclid(h));
            starts.push((b - length).rem_euclid(h));
        }
    } else {
        let last = h - length;
        if last < -time_eps(h) {
            return Err(GraphError::WindowOutsideHorizon {
                start: 0.0,
                end: length,
                horizon: h,
            });
        }
        let last = last.max(0.0);
        let mut k = 0usize;
        loop {
            let s = k as f64 * stride;
            if s > last + time_eps(last) {
                break;
            }
            starts.push(s);
            k += 1;
        }
        starts.push(last);
        for &b in &boundaries {
            for s in [b, b - length] {
                if s >= 0.0 && s <= last + time_eps(last) {
                    starts.push(s.min(last));
                }
            }
        }
    }
    starts.retain(|s| s.is_finite());
    for s in &mut starts {
        *s += 0.0; // −0.0 from rem_euclid
    }
    starts.sort_by(f64::total_cmp);
    starts.dedup_by(|a, b| (*a - *b).abs() <= time_eps(*b));
    if sched.is_periodic() {
        starts.retain(|&s| s < h - time_eps(h));
    }
    Ok(starts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Connected,
    NotConnected,
}

/// Evidence for one checked window start.
#[derive(Debug, Clone, Serialize)]
pub struct WindowEvidence {
    pub s: f64,
    /// Threshold-graph edges, 1-based.
    pub edges: Vec<[usize; 2]>,
    /// λ2 of the integrated (weighted) Laplacian; informational only.
    pub lambda2: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityCertificate {
    pub delta: f64,
    #[serde(rename = "T")]
    pub window: f64,
    pub stride: f64,
    pub verdict: Verdict,
    pub counterexample_window: Option<f64>,
    pub evidence: Vec<WindowEvidence>,
}

impl ConnectivityCertificate {
    pub fn is_connected(&self) -> bool {
        self.verdict == Verdict::Connected
    }
}

/// Checks that the edges with `∫_s^{s+T} a_ij dt ≥ δ` connect all nodes for
/// every enumerated window start `s`.
pub fn check_joint_connectivity(
    sched: &WeightSchedule,
    delta: f64,
    window: f64,
    stride: f64,
) -> Result<ConnectivityCertificate, GraphError> {
    if !(delta > 0.0) {
        return Err(GraphError::InvalidParameter(format!("delta must be positive, got {delta}")));
    }
    let n = sched.node_count();
    // rounding slack on the threshold only; connectivity itself is exact
    let slack = 1e-12 * delta.max(window * sched.bound());
    let mut evidence = Vec::new();
    let mut counterexample = None;
    for s in window_starts(sched, window, stride)? {
        let integral = integrated_laplacian(sched, s, window)?;
        let mut uf = UnionFind::<usize>::new(n);
        let mut edges = Vec::new();
        for (i, j) in super::edge_order(n) {
            if integral.edge_integral(i, j) >= delta - slack {
                uf.union(i, j);
                edges.push([i + 1, j + 1]);
            }
        }
        let root = uf.find(0);
        let connected = (1..n).all(|v| uf.find(v) == root);
        if !connected && counterexample.is_none() {
            counterexample = Some(s);
        }
        let lambda2 = if n >= 2 {
            lambda2(integral.laplacian().as_matrix())?
        } else {
            0.0
        };
        evidence.push(WindowEvidence {
            s,
            edges,
            lambda2,
            connected,
        });
    }
    Ok(ConnectivityCertificate {
        delta,
        window,
        stride,
        verdict: if counterexample.is_none() {
            Verdict::Connected
        } else {
            Verdict::NotConnected
        },
        counterexample_window: counterexample,
        evidence,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NegativeLinkReport {
    pub holds: bool,
    pub worst_eigenvalue: f64,
    pub worst_segment: usize,
    pub tolerance: f64,
}

/// Whether every segment Laplacian has `λ_min ≥ −tol`.
pub fn negative_link_assumption_holds(sched: &WeightSchedule, tol: f64) -> NegativeLinkReport {
    let (worst_segment, worst_eigenvalue) = sched
        .segments()
        .iter()
        .map(|s| SortedEigen::new(laplacian(&s.graph).as_matrix()).min())
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, l)| if l < best.1 { (k, l) } else { best });
    NegativeLinkReport {
        holds: worst_eigenvalue >= -tol,
        worst_eigenvalue,
        worst_segment,
        tolerance: tol,
    }
}
