use std::io::Write;

use nalgebra::DVector;

use super::{DynamicsError, NoiseProcess, Propagator, StateVector, SystemKind};
use crate::graph::{time_eps, WeightSchedule};
use crate::quadrature::{even_subdivisions, simpson, uniform_nodes};

/// Sampled solution of the consensus ODE.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub schedule_id: String,
    pub initial_average: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.sample_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.states.first().map_or(0, |x| x.len())
    }

    pub fn initial_time(&self) -> f64 {
        self.sample_times[0]
    }

    /// Index of the sample at `t` (within rounding), if any.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let eps = 1e-9 * t.abs().max(1.0);
        let k = self.sample_times.partition_point(|&s| s < t - eps);
        (k < self.len() && (self.sample_times[k] - t).abs() <= eps).then_some(k)
    }

    pub fn state_at(&self, t: f64) -> Option<&DVector<f64>> {
        self.index_of(t).map(|k| &self.states[k])
    }

    /// CSV with header `t,x1,...,xN` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n = self.node_count();
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("x{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (t, x) in self.sample_times.iter().zip(&self.states) {
            write!(out, "{t:.16e}")?;
            for v in x.iter() {
                write!(out, ",{v:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SimulationOptions {
    /// Largest Simpson step for the noise convolution; `sample_dt/4` if unset.
    pub quad_step: Option<f64>,
}

pub fn simulate(
    sched: &WeightSchedule,
    x0: &StateVector,
    t_end: f64,
    sample_dt: f64,
    noise: &NoiseProcess,
) -> Result<Trajectory, DynamicsError> {
    simulate_with(sched, x0, t_end, sample_dt, noise, SimulationOptions::default())
}

/// Samples land on `x0.time + k·sample_dt`, on `t_end` and on every segment
/// boundary in between.
pub fn simulate_with(
    sched: &WeightSchedule,
    x0: &StateVector,
    t_end: f64,
    sample_dt: f64,
    noise: &NoiseProcess,
    opts: SimulationOptions,
) -> Result<Trajectory, DynamicsError> {
    let n = sched.node_count();
    if x0.values.len() != n {
        return Err(DynamicsError::InvalidState(format!(
            "initial state has {} entries, schedule has {n} nodes",
            x0.values.len()
        )));
    }
    if !(t_end > x0.time) {
        return Err(DynamicsError::InvalidParameter(format!(
            "t_end={t_end} must exceed the initial time {}",
            x0.time
        )));
    }
    if !(sample_dt > 0.0) || !sample_dt.is_finite() {
        return Err(DynamicsError::InvalidParameter(format!("sample_dt must be positive, got {sample_dt}")));
    }
    let quad_step = opts.quad_step.unwrap_or(sample_dt / 4.0);
    if !(quad_step > 0.0) {
        return Err(DynamicsError::InvalidParameter(format!("quad_step must be positive, got {quad_step}")));
    }
    noise.check_alignment(sched)?;
    let t0 = x0.time;
    sched.check_window(t0, t_end)?;

    let mut times: Vec<f64> = (0..)
        .map(|k| t0 + k as f64 * sample_dt)
        .take_while(|&t| t < t_end - time_eps(t_end))
        .collect();
    times.push(t_end);
    times.extend(sched.boundaries_in(t0, t_end)?);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= time_eps(*b));

    let initial_average = x0.mean();
    let noiseless = noise.is_zero();
    let at_consensus = x0.values.iter().all(|&v| v == x0.values[0]);
    if noiseless && at_consensus {
        let states = vec![x0.values.clone(); times.len()];
        return Ok(Trajectory {
            sample_times: times,
            states,
            schedule_id: sched.id().to_string(),
            initial_average,
        });
    }

    let prop = Propagator::new(sched, SystemKind::Raw);
    let mut states = Vec::with_capacity(times.len());
    let mut x = x0.values.clone();
    states.push(x.clone());
    for w in times.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = sched.segment_index_at(0.5 * (a + b));
        if noiseless {
            x = prop.segment_step(seg, b - a, &x);
        } else {
            let mut cuts = vec![a];
            cuts.extend(noise.breakpoints(a, b));
            cuts.push(b);
            for c in cuts.windows(2) {
                x = noisy_step(&prop, seg, c[0], c[1], &x, noise, quad_step);
            }
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        sample_times: times,
        states,
        schedule_id: sched.id().to_string(),
        initial_average,
    })
}

/// Variation of constants on `[c, d]` inside one segment, with `w` smooth there:
/// `x(d) = e^{F(d−c)}x(c) + ∫_c^d e^{F(d−τ)} w(τ) dτ`.
fn noisy_step(
    prop: &Propagator<'_>,
    seg: usize,
    c: f64,
    d: f64,
    x: &DVector<f64>,
    noise: &NoiseProcess,
    quad_step: f64,
) -> DVector<f64> {
    let nodes = uniform_nodes(c, d, even_subdivisions(c, d, quad_step));
    let last = nodes.len() - 1;
    let integrand: Vec<DVector<f64>> = nodes
        .iter()
        .enumerate()
        .map(|(k, &tau)| {
            let w = match k {
                0 => noise.value(tau),
                k if k == last => noise.value_left(tau),
                _ => noise.value(tau),
            };
            prop.segment_step(seg, d - tau, &w)
        })
        .collect();
    let forced = simpson(&nodes, &integrand).expect("at least two nodes");
    prop.segment_step(seg, d - c, x) + forced
}

/// `max_k |mean(x(t_k)) − initial_average|`.
pub fn average_drift(traj: &Trajectory) -> f64 {
    traj.states
        .iter()
        .map(|x| (x.mean() - traj.initial_average).abs())
        .fold(0.0, f64::max)
}
