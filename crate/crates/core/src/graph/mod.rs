//! Time-varying weighted undirected graphs: snapshots, Laplacian and
//! incidence matrices, piecewise-constant schedules and joint connectivity.

pub mod builtin;
mod connectivity;
mod schedule;
mod snapshot;

use thiserror::Error;

pub use connectivity::{
    check_joint_connectivity, integrated_laplacian, negative_link_assumption_holds,
    window_starts, ConnectivityCertificate, IntegratedLaplacian, NegativeLinkReport, Verdict,
    WindowEvidence,
};
pub use schedule::{
    time_eps, EdgeFile, Piece, ScheduleFile, Segment, SegmentFile, WeightSchedule,
};
pub use snapshot::{
    edge_order, incidence, lambda2, laplacian, psd_sqrt, sqrt_laplacian_factor, GraphSnapshot,
    IncidenceMatrix, LaplacianMatrix,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error(
        "edge {{{i},{j}}} has negative weight {weight}; the incidence factor needs nonnegative \
         weights, use sqrt_laplacian_factor for signed graphs"
    )]
    SignedGraph { i: usize, j: usize, weight: f64 },
    #[error("negative-link assumption violated: Laplacian eigenvalue {eigenvalue}")]
    NegativeLinkViolated { eigenvalue: f64 },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("window [{start}, {end}] lies outside the schedule horizon {horizon}")]
    WindowOutsideHorizon { start: f64, end: f64, horizon: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("schedule format error: {0}")]
    Format(String),
}
