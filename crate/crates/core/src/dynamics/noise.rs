use nalgebra::DVector;
use rand::Rng;
use rand_pcg::Pcg64;

use super::DynamicsError;
use crate::graph::{time_eps, WeightSchedule};

/// One row of a piecewise-constant noise table: `values` holds from `t0`
/// until the next row's `t0` (the last row holds forever).
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePiece {
    pub t0: f64,
    pub values: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseKind {
    Zero,
    Table(Vec<NoisePiece>),
    /// Constant random vector on each window `[kζ, (k+1)ζ)`, scaled so that
    /// its energy over the window is exactly `B0·(1 − margin)`.
    SeededRandom { seed: u64, margin: f64 },
}

/// Deterministic input `w(t)` with `∫_s^{s+ζ} wᵀw dt ≤ B0` for all `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseProcess {
    node_count: usize,
    zeta: f64,
    b0: f64,
    kind: NoiseKind,
}

impl NoiseProcess {
    pub fn zero(node_count: usize) -> Self {
        Self {
            node_count,
            zeta: 1.0,
            b0: 0.0,
            kind: NoiseKind::Zero,
        }
    }

    pub fn table(
        node_count: usize,
        zeta: f64,
        b0: f64,
        mut pieces: Vec<NoisePiece>,
    ) -> Result<Self, DynamicsError> {
        check_window_params(zeta, b0)?;
        pieces.sort_by(|a, b| a.t0.total_cmp(&b.t0));
        for (k, p) in pieces.iter().enumerate() {
            if p.values.len() != node_count {
                return Err(DynamicsError::Config(format!(
                    "noise row {k} has {} values, expected {node_count}",
                    p.values.len()
                )));
            }
            if !p.t0.is_finite() || p.t0 < 0.0 || p.values.iter().any(|v| !v.is_finite()) {
                return Err(DynamicsError::Config(format!("noise row {k} is not finite/nonnegative")));
            }
            if k > 0 && p.t0 == pieces[k - 1].t0 {
                return Err(DynamicsError::Config(format!("noise rows share start time {}", p.t0)));
            }
        }
        let process = Self {
            node_count,
            zeta,
            b0,
            kind: NoiseKind::Table(pieces),
        };
        let (window_start, energy) = process.max_window_energy();
        if energy > b0 * (1.0 + 1e-12) {
            return Err(DynamicsError::NoiseEnergy {
                window_start,
                energy,
                b0,
            });
        }
        Ok(process)
    }

    /// A single constant vector from `t0` on (zero before).
    pub fn constant_from(
        node_count: usize,
        zeta: f64,
        b0: f64,
        t0: f64,
        values: DVector<f64>,
    ) -> Result<Self, DynamicsError> {
        let mut rows = Vec::new();
        if t0 > 0.0 {
            rows.push(NoisePiece {
                t0: 0.0,
                values: DVector::zeros(node_count),
            });
        }
        rows.push(NoisePiece { t0, values });
        Self::table(node_count, zeta, b0, rows)
    }

    pub fn seeded_random(
        node_count: usize,
        zeta: f64,
        b0: f64,
        seed: u64,
        margin: f64,
    ) -> Result<Self, DynamicsError> {
        check_window_params(zeta, b0)?;
        if !(0.0..1.0).contains(&margin) {
            return Err(DynamicsError::Config(format!("margin must lie in [0, 1), got {margin}")));
        }
        Ok(Self {
            node_count,
            zeta,
            b0,
            kind: NoiseKind::SeededRandom { seed, margin },
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            NoiseKind::Zero => true,
            NoiseKind::Table(rows) => rows.iter().all(|r| r.values.iter().all(|&v| v == 0.0)),
            NoiseKind::SeededRandom { margin, .. } => self.b0 * (1.0 - margin) == 0.0,
        }
    }

    /// `w(t)`, right-continuous.
    pub fn value(&self, t: f64) -> DVector<f64> {
        self.value_sided(t, false)
    }

    /// `w(t⁻)`.
    pub fn value_left(&self, t: f64) -> DVector<f64> {
        self.value_sided(t, true)
    }

    fn value_sided(&self, t: f64, left: bool) -> DVector<f64> {
        let eps = time_eps(t);
        let probe = if left { t - eps } else { t + eps };
        match &self.kind {
            NoiseKind::Zero => DVector::zeros(self.node_count),
            NoiseKind::Table(rows) => rows
                .iter()
                .rev()
                .find(|r| r.t0 <= probe)
                .map_or_else(|| DVector::zeros(self.node_count), |r| r.values.clone()),
            NoiseKind::SeededRandom { seed, margin } => {
                let k = (probe / self.zeta).floor().max(0.0) as u64;
                self.window_vector(*seed, *margin, k)
            }
        }
    }

    fn window_vector(&self, seed: u64, margin: f64, window: u64) -> DVector<f64> {
        let mut rng = Pcg64::new(seed as u128, window as u128);
        let target = self.b0 * (1.0 - margin) / self.zeta;
        if target == 0.0 || self.node_count == 0 {
            return DVector::zeros(self.node_count);
        }
        loop {
            let v: DVector<f64> = DVector::from_fn(self.node_count, |_, _| rng.gen_range(-1.0..1.0));
            let norm2 = v.norm_squared();
            if norm2 > 1e-12 {
                return v * (target / norm2).sqrt();
            }
        }
    }

    /// Instants in `(a, b)` where `w` may jump.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let inside = |t: f64| t > a + time_eps(a) && t < b - time_eps(b);
        match &self.kind {
            NoiseKind::Zero => Vec::new(),
            NoiseKind::Table(rows) => rows.iter().map(|r| r.t0).filter(|&t| inside(t)).collect(),
            NoiseKind::SeededRandom { .. } => {
                let first: i64 = (a / self.zeta).floor() as i64 + 1;
                (first..)
                    .map(|k| k as f64 * self.zeta)
                    .take_while(|&t| t < b)
                    .filter(|&t| inside(t))
                    .collect()
            }
        }
    }

    /// Supremum over `s ≥ 0` of `∫_s^{s+ζ} wᵀw dt` and a start attaining it.
    ///
    /// The window energy is piecewise linear in `s` with breakpoints at jump
    /// times `b` and `b − ζ`, so checking those starts is exact.
    pub fn max_window_energy(&self) -> (f64, f64) {
        match &self.kind {
            NoiseKind::Zero => (0.0, 0.0),
            NoiseKind::SeededRandom { margin, .. } => (0.0, self.b0 * (1.0 - margin)),
            NoiseKind::Table(rows) => {
                let mut starts = vec![0.0];
                for r in rows {
                    starts.push(r.t0);
                    if r.t0 >= self.zeta {
                        starts.push(r.t0 - self.zeta);
                    }
                }
                starts
                    .into_iter()
                    .map(|s| (s, self.window_energy(s)))
                    .fold((0.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
            }
        }
    }

    /// `∫_s^{s+ζ} wᵀw dt` (exact for the piecewise-constant kinds).
    pub fn window_energy(&self, s: f64) -> f64 {
        let e = s + self.zeta;
        let mut cuts = vec![s];
        cuts.extend(self.breakpoints(s, e));
        cuts.push(e);
        cuts.windows(2)
            .map(|w| (w[1] - w[0]) * self.value(w[0]).norm_squared())
            .sum()
    }

    /// Random noise windows must tile the schedule horizon (or period).
    pub fn check_alignment(&self, sched: &WeightSchedule) -> Result<(), DynamicsError> {
        if let NoiseKind::SeededRandom { .. } = self.kind {
            let h = sched.horizon();
            let ratio = h / self.zeta;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                return Err(DynamicsError::Config(format!(
                    "noise window zeta={} does not divide the schedule {} {h}",
                    self.zeta,
                    if sched.is_periodic() { "period" } else { "horizon" }
                )));
            }
        }
        if self.node_count != sched.node_count() {
            return Err(DynamicsError::Config(format!(
                "noise has {} channels, schedule has {} nodes",
                self.node_count,
                sched.node_count()
            )));
        }
        Ok(())
    }
}

fn check_window_params(zeta: f64, b0: f64) -> Result<(), DynamicsError> {
    if !(zeta > 0.0) || !zeta.is_finite() {
        return Err(DynamicsError::Config(format!("zeta must be positive, got {zeta}")));
    }
    if !(b0 >= 0.0) || !b0.is_finite() {
        return Err(DynamicsError::Config(format!("B0 must be nonnegative, got {b0}")));
    }
    Ok(())
}
