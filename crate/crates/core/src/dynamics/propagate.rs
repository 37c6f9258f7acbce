use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::DynamicsError;
use crate::graph::{incidence, laplacian, psd_sqrt, GraphError, WeightSchedule};
use crate::linalg::{averaging_matrix, max_abs, SortedEigen};

/// Which linear system a propagator integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// `F = −L`
    Raw,
    /// `F = −(L + 11ᵀ/N)`, the dynamics of `y = (I − 11ᵀ/N)x`.
    Projected,
}

/// Cached eigendecompositions of every segment's `F_k`.
#[derive(Debug, Clone)]
pub struct Propagator<'a> {
    sched: &'a WeightSchedule,
    kind: SystemKind,
    eigs: Vec<SortedEigen>,
}

impl<'a> Propagator<'a> {
    pub fn new(sched: &'a WeightSchedule, kind: SystemKind) -> Self {
        let n = sched.node_count();
        let eigs = sched
            .segments()
            .iter()
            .map(|seg| {
                let mut f = -laplacian(&seg.graph).into_matrix();
                if kind == SystemKind::Projected {
                    f -= averaging_matrix(n);
                }
                SortedEigen::new(&f)
            })
            .collect();
        Self { sched, kind, eigs }
    }

    pub fn schedule(&self) -> &WeightSchedule {
        self.sched
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    /// Eigendecomposition of `F_k`.
    pub fn segment_eigen(&self, k: usize) -> &SortedEigen {
        &self.eigs[k]
    }

    /// `exp(F_k·dt)`.
    pub fn segment_exp(&self, k: usize, dt: f64) -> DMatrix<f64> {
        self.eigs[k].map(|l| (l * dt).exp())
    }

    /// `exp(F_k·dt)·x`.
    pub fn segment_step(&self, k: usize, dt: f64, x: &DVector<f64>) -> DVector<f64> {
        self.eigs[k].apply(|l| (l * dt).exp(), x)
    }

    /// `Φ(t, s)` as the ordered product of per-segment exponentials.
    pub fn transition(&self, s: f64, t: f64) -> Result<DMatrix<f64>, DynamicsError> {
        let n = self.sched.node_count();
        let mut phi = DMatrix::identity(n, n);
        for piece in self.sched.pieces(s, t)? {
            phi = self.segment_exp(piece.segment, piece.duration()) * phi;
        }
        Ok(phi)
    }

    /// `Φ(t, s)·x` without forming `Φ`.
    pub fn propagate(&self, x: &DVector<f64>, s: f64, t: f64) -> Result<DVector<f64>, DynamicsError> {
        let mut out = x.clone();
        for piece in self.sched.pieces(s, t)? {
            out = self.segment_step(piece.segment, piece.duration(), &out);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub from_time: f64,
    pub to_time: f64,
    pub entries: DMatrix<f64>,
    pub kind: SystemKind,
}

pub fn transition_matrix(
    kind: SystemKind,
    sched: &WeightSchedule,
    s: f64,
    t: f64,
) -> Result<TransitionMatrix, DynamicsError> {
    if t < s {
        return Err(DynamicsError::InvalidParameter(format!(
            "transition matrix needs t >= s, got s={s}, t={t}"
        )));
    }
    let entries = Propagator::new(sched, kind).transition(s, t)?;
    Ok(TransitionMatrix {
        from_time: s,
        to_time: t,
        entries,
        kind,
    })
}

/// How the output matrix `D_k` of the projected system is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputRoute {
    /// `D_k = [H_k | 1_N/√N]`, N×(r+1); outputs are the edge signals
    /// `H_kᵀx` plus a trailing channel that vanishes on projected states.
    Incidence,
    /// `D_k = √(L_k + 11ᵀ/N)`, N×N; used for signed schedules.
    SqrtFactor,
}

/// Per-segment `F_k = −(L_k + 11ᵀ/N)` and output matrices `D_k` with
/// `D_k D_kᵀ = L_k + 11ᵀ/N`.
#[derive(Debug, Clone)]
pub struct ProjectedSystem {
    pub schedule_id: String,
    pub node_count: usize,
    pub route: OutputRoute,
    pub dynamics: Vec<DMatrix<f64>>,
    pub outputs: Vec<DMatrix<f64>>,
}

impl ProjectedSystem {
    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, |d| d.ncols())
    }
}

/// Incidence route when every segment is nonnegative (and N ≥ 2), otherwise
/// the symmetric square root, which requires each `L_k` to be PSD.
pub fn projected_system(sched: &WeightSchedule) -> Result<ProjectedSystem, DynamicsError> {
    let n = sched.node_count();
    let r = n * n.saturating_sub(1) / 2;
    let route = if sched.is_nonnegative() && r > 0 {
        OutputRoute::Incidence
    } else {
        OutputRoute::SqrtFactor
    };
    let j_over_n = averaging_matrix(n);
    let tol = sched.psd_tolerance();
    let check_tol = 1e-10 * (n as f64 * sched.bound()).max(1.0);
    let mut dynamics = Vec::with_capacity(sched.segments().len());
    let mut outputs = Vec::with_capacity(sched.segments().len());
    for (k, seg) in sched.segments().iter().enumerate() {
        let l = laplacian(&seg.graph).into_matrix();
        if route == OutputRoute::SqrtFactor {
            let min = SortedEigen::new(&l).min();
            if min < -tol {
                return Err(GraphError::NegativeLinkViolated { eigenvalue: min }.into());
            }
        }
        let target = &l + &j_over_n;
        let d = match route {
            OutputRoute::Incidence => {
                let h = incidence(&seg.graph)?.into_matrix();
                h.insert_column(r, 1.0 / (n as f64).sqrt())
            }
            OutputRoute::SqrtFactor => psd_sqrt(&target, tol)?,
        };
        let err = max_abs(&(&d * d.transpose() - &target));
        if err > check_tol {
            return Err(DynamicsError::Config(format!(
                "segment {k}: D·Dᵀ deviates from L + 11ᵀ/N by {err:e}"
            )));
        }
        dynamics.push(-target);
        outputs.push(d);
    }
    Ok(ProjectedSystem {
        schedule_id: sched.id().to_string(),
        node_count: n,
        route,
        dynamics,
        outputs,
    })
}
