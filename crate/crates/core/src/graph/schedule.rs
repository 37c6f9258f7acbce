use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GraphError, GraphSnapshot};

/// Absolute tolerance used when comparing instants on the time axis.
pub fn time_eps(t: f64) -> f64 {
    1e-12 * t.abs().max(1.0)
}

/// One constant piece of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub graph: GraphSnapshot,
}

impl Segment {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// A sub-interval of a query window lying inside a single segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub segment: usize,
}

impl Piece {
    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }
}

/// Piecewise-constant symmetric edge weights `a_ij(t)`.
///
/// Segments tile `[0, horizon)`. A periodic schedule repeats them with
/// period equal to the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSchedule {
    id: String,
    node_count: usize,
    bound: f64,
    segments: Vec<Segment>,
    periodic: bool,
}

impl WeightSchedule {
    /// Validates contiguity, positive durations, node counts and `|a_ij| ≤ bound`.
    /// When `bound` is `None` the largest absolute weight is used.
    pub fn new(
        node_count: usize,
        bound: Option<f64>,
        segments: Vec<Segment>,
        periodic: bool,
    ) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::InvalidSchedule("node count must be positive".into()));
        }
        if segments.is_empty() {
            return Err(GraphError::InvalidSchedule("schedule has no segments".into()));
        }
        if segments[0].t_start != 0.0 {
            return Err(GraphError::InvalidSchedule(format!(
                "first segment starts at {} instead of 0",
                segments[0].t_start
            )));
        }
        for (k, seg) in segments.iter().enumerate() {
            if !(seg.t_end > seg.t_start) || !seg.t_end.is_finite() {
                return Err(GraphError::InvalidSchedule(format!(
                    "segment {k} has non-positive duration [{}, {})",
                    seg.t_start, seg.t_end
                )));
            }
            if seg.graph.node_count() != node_count {
                return Err(GraphError::InvalidSchedule(format!(
                    "segment {k} has {} nodes, schedule declares {node_count}",
                    seg.graph.node_count()
                )));
            }
            if k > 0 && segments[k - 1].t_end != seg.t_start {
                return Err(GraphError::InvalidSchedule(format!(
                    "segment {k} starts at {} but segment {} ends at {}",
                    seg.t_start,
                    k - 1,
                    segments[k - 1].t_end
                )));
            }
        }
        let observed = segments
            .iter()
            .map(|s| s.graph.max_abs_weight())
            .fold(0.0, f64::max);
        let bound = match bound {
            Some(b) if !(b > 0.0) || !b.is_finite() => {
                return Err(GraphError::InvalidSchedule(format!("bound must be positive, got {b}")))
            }
            Some(b) if observed > b => {
                return Err(GraphError::InvalidSchedule(format!(
                    "weight magnitude {observed} exceeds declared bound {b}"
                )))
            }
            Some(b) => b,
            None if observed > 0.0 => observed,
            None => 1.0,
        };
        Ok(Self {
            id: "schedule".to_string(),
            node_count,
            bound,
            segments,
            periodic,
        })
    }

    /// A single graph held constant on `[0, horizon)`.
    pub fn constant(graph: GraphSnapshot, horizon: f64) -> Result<Self, GraphError> {
        let n = graph.node_count();
        Self::new(
            n,
            None,
            vec![Segment {
                t_start: 0.0,
                t_end: horizon,
                graph,
            }],
            false,
        )
    }

    /// Builds contiguous segments from `(duration, graph)` pairs.
    pub fn from_durations(
        pieces: Vec<(f64, GraphSnapshot)>,
        periodic: bool,
    ) -> Result<Self, GraphError> {
        let n = pieces
            .first()
            .map(|(_, g)| g.node_count())
            .ok_or_else(|| GraphError::InvalidSchedule("schedule has no segments".into()))?;
        let mut t = 0.0;
        let segments = pieces
            .into_iter()
            .map(|(d, graph)| {
                let seg = Segment {
                    t_start: t,
                    t_end: t + d,
                    graph,
                };
                t += d;
                seg
            })
            .collect();
        Self::new(n, None, segments, periodic)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Declared weight bound `A*`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// End of the last segment; also the period of a periodic schedule.
    pub fn horizon(&self) -> f64 {
        self.segments[self.segments.len() - 1].t_end
    }

    pub fn period(&self) -> Option<f64> {
        self.periodic.then(|| self.horizon())
    }

    pub fn is_nonnegative(&self) -> bool {
        self.segments.iter().all(|s| s.graph.is_nonnegative())
    }

    /// Default PSD tolerance `1e-9·N·A*`.
    pub fn psd_tolerance(&self) -> f64 {
        1e-9 * self.node_count as f64 * self.bound
    }

    /// Every weight multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, GraphError> {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                t_start: s.t_start,
                t_end: s.t_end,
                graph: s.graph.scaled(c),
            })
            .collect();
        Ok(Self::new(self.node_count, Some(self.bound * c.abs()), segments, self.periodic)?
            .with_id(format!("{}*{c}", self.id)))
    }

    /// Fails unless `[s, t]` lies in the horizon (always true when periodic).
    pub fn check_window(&self, s: f64, t: f64) -> Result<(), GraphError> {
        let h = self.horizon();
        let outside = s < -time_eps(s) || t < s - time_eps(t) || !t.is_finite();
        if outside || (!self.periodic && t > h + time_eps(h)) {
            return Err(GraphError::WindowOutsideHorizon {
                start: s,
                end: t,
                horizon: h,
            });
        }
        Ok(())
    }

    /// Index of the segment active at `t` (right-continuous; the horizon of a
    /// finite schedule maps to the last segment).
    pub fn segment_index_at(&self, t: f64) -> usize {
        let (_, idx) = self.locate(t);
        idx
    }

    pub fn graph_at(&self, t: f64) -> &GraphSnapshot {
        &self.segments[self.segment_index_at(t)].graph
    }

    /// Returns (cycle start, segment index) for instant `t`.
    fn locate(&self, t: f64) -> (f64, usize) {
        let h = self.horizon();
        let (base, local) = if self.periodic {
            let mut cycle = (t / h).floor();
            let mut local = t - cycle * h;
            if local >= h - time_eps(h) {
                cycle += 1.0;
                local = 0.0;
            }
            (cycle * h, local.max(0.0))
        } else {
            (0.0, t)
        };
        let eps = time_eps(base + local);
        let idx = self
            .segments
            .iter()
            .position(|s| base + s.t_end > base + local + eps)
            .unwrap_or(self.segments.len() - 1);
        (base, idx)
    }

    /// Splits `[s, t]` at segment boundaries. Zero-length windows yield no
    /// pieces.
    pub fn pieces(&self, s: f64, t: f64) -> Result<Vec<Piece>, GraphError> {
        self.check_window(s, t)?;
        let mut out = Vec::new();
        if t - s <= time_eps(t) {
            return Ok(out);
        }
        let s = s.max(0.0);
        let (mut base, mut idx) = self.locate(s);
        let h = self.horizon();
        let mut cur = s;
        loop {
            let end = (base + self.segments[idx].t_end).min(t);
            if end - cur > time_eps(end) {
                out.push(Piece {
                    t0: cur,
                    t1: end,
                    segment: idx,
                });
            }
            cur = end;
            if t - cur <= time_eps(t) {
                break;
            }
            idx += 1;
            if idx == self.segments.len() {
                if !self.periodic {
                    break;
                }
                idx = 0;
                base += h;
            }
        }
        if let Some(last) = out.last_mut() {
            last.t1 = t;
        }
        Ok(out)
    }

    /// Absolute segment boundaries strictly inside `(s, t)`.
    pub fn boundaries_in(&self, s: f64, t: f64) -> Result<Vec<f64>, GraphError> {
        let pieces = self.pieces(s, t)?;
        Ok(pieces.iter().skip(1).map(|p| p.t0).collect())
    }

    pub fn from_json_str(text: &str) -> Result<Self, GraphError> {
        let file: ScheduleFile =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        file.into_schedule()
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GraphError::Format(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_file(&self) -> ScheduleFile {
        ScheduleFile {
            id: Some(self.id.clone()),
            nodes: self.node_count,
            bound: Some(self.bound),
            periodic: self.periodic,
            period: self.period(),
            segments: self
                .segments
                .iter()
                .map(|s| SegmentFile {
                    t0: s.t_start,
                    t1: s.t_end,
                    edges: super::edge_order(self.node_count)
                        .into_iter()
                        .filter(|&(i, j)| s.graph.weight(i, j) != 0.0)
                        .map(|(i, j)| EdgeFile {
                            i: i + 1,
                            j: j + 1,
                            w: s.graph.weight(i, j),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

/// On-disk schedule format. Node indices are 1-based; omitted edges have
/// weight 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub nodes: usize,
    #[serde(default)]
    pub bound: Option<f64>,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub period: Option<f64>,
    pub segments: Vec<SegmentFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentFile {
    pub t0: f64,
    pub t1: f64,
    #[serde(default)]
    pub edges: Vec<EdgeFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeFile {
    pub i: usize,
    pub j: usize,
    pub w: f64,
}

impl ScheduleFile {
    pub fn into_schedule(self) -> Result<WeightSchedule, GraphError> {
        let n = self.nodes;
        if n == 0 {
            return Err(GraphError::Format("\"nodes\" must be positive".into()));
        }
        let mut segments = Vec::with_capacity(self.segments.len());
        for (k, seg) in self.segments.iter().enumerate() {
            let mut weights = DMatrix::zeros(n, n);
            let mut seen = vec![false; n * n];
            for e in &seg.edges {
                if e.i == 0 || e.j == 0 || e.i > n || e.j > n {
                    return Err(GraphError::Format(format!(
                        "segment {k}: edge {{{},{}}} outside 1..={n}",
                        e.i, e.j
                    )));
                }
                if e.i == e.j {
                    return Err(GraphError::Format(format!(
                        "segment {k}: self-loop at node {}",
                        e.i
                    )));
                }
                let (lo, hi) = (e.i.min(e.j) - 1, e.i.max(e.j) - 1);
                if seen[lo * n + hi] {
                    return Err(GraphError::Format(format!(
                        "segment {k}: duplicate edge {{{},{}}}",
                        lo + 1,
                        hi + 1
                    )));
                }
                seen[lo * n + hi] = true;
                weights[(lo, hi)] = e.w;
                weights[(hi, lo)] = e.w;
            }
            segments.push(Segment {
                t_start: seg.t0,
                t_end: seg.t1,
                graph: GraphSnapshot::new(weights)?,
            });
        }
        let schedule = WeightSchedule::new(n, self.bound, segments, self.periodic)?;
        if let Some(p) = self.period {
            if !self.periodic {
                return Err(GraphError::Format("\"period\" given for a non-periodic schedule".into()));
            }
            let h = schedule.horizon();
            if (p - h).abs() > time_eps(h) {
                return Err(GraphError::Format(format!(
                    "period {p} must equal the end of the last segment ({h})"
                )));
            }
        }
        Ok(match self.id {
            Some(id) => schedule.with_id(id),
            None => schedule,
        })
    }
}
