//! Task documentation and execution.

use serde::Serialize;
use serde_json::json;

use super::scenario::{Scenario, TaskSpec};
use super::CliError;
use crate::analysis::{
    consensus_error, fit_exponential_rate_with, max_state_difference, robustness_report,
    signed_convergence_check, RateFitOptions, SignedCheckParams,
};
use crate::dynamics::{simulate_with, SimulationOptions, Trajectory};
use crate::graph::{check_joint_connectivity, negative_link_assumption_holds};
use crate::observability::{
    default_quad_step, edge_signals, gramian, projected_outputs, reconstruct, uniform_bounds_check,
    EdgeSignalTrace, Reconstruction,
};

pub struct TaskDoc {
    pub name: &'static str,
    pub summary: &'static str,
    pub output: &'static str,
    /// `(name, default, meaning)`; an empty default marks a required parameter.
    pub params: &'static [(&'static str, &'static str, &'static str)],
}

const FILE: (&str, &str, &str) = ("file", "see output", "output file name inside output_dir");

pub const TASKS: &[TaskDoc] = &[
    TaskDoc {
        name: "simulate",
        summary: "integrate x' = -L(t)x + w(t) from initial_state under the scenario noise",
        output: "trajectory.csv",
        params: &[
            ("t_end", "", "final time (s)"),
            ("dt", "", "sample spacing (s); segment boundaries are always sampled"),
            ("quad_step", "dt/4", "Simpson step for the noise convolution"),
            FILE,
        ],
    },
    TaskDoc {
        name: "connectivity",
        summary: "certify joint (delta, T)-connectivity over all windows",
        output: "certificate.json",
        params: &[
            ("delta", "", "edge-integral threshold"),
            ("T", "", "window length (s)"),
            ("stride", "T/8", "spacing of extra window starts"),
            FILE,
        ],
    },
    TaskDoc {
        name: "negative_link",
        summary: "check that every segment Laplacian is positive semi-definite",
        output: "negative_link.json",
        params: &[FILE],
    },
    TaskDoc {
        name: "gramian",
        summary: "observability Gramian of the projected system on [s, s+delta]",
        output: "gramian.json",
        params: &[
            ("s", "", "window start (s)"),
            ("delta", "", "window length (s)"),
            ("quad_step", "delta/1024", "Simpson step"),
            FILE,
        ],
    },
    TaskDoc {
        name: "bounds",
        summary: "extremal eigenvalues of the windowed integral of L + 11'/N",
        output: "bounds.json",
        params: &[
            ("delta", "", "window length (s)"),
            ("stride", "delta/8", "spacing of extra window starts"),
            FILE,
        ],
    },
    TaskDoc {
        name: "edge_signals",
        summary: "edge signals z = H'x of the simulated trajectory (nonnegative weights only)",
        output: "edge_signals.csv",
        params: &[FILE],
    },
    TaskDoc {
        name: "reconstruct",
        summary: "recover x(s) - mean(x(0)) from output signals; reports the error against the simulation",
        output: "reconstruction.json",
        params: &[
            ("s", "", "window start (s), a sample time"),
            ("delta", "", "window length (s); s+delta must be a sample time"),
            FILE,
        ],
    },
    TaskDoc {
        name: "rate",
        summary: "log-linear fit of the disagreement decay on the tail half of the trajectory",
        output: "rate.json",
        params: &[
            ("skip", "0", "leading time excluded from the fit (s)"),
            ("period", "none", "fit only samples one period apart"),
            FILE,
        ],
    },
    TaskDoc {
        name: "max_difference",
        summary: "max-min state difference and consensus error per sample",
        output: "max_difference.csv",
        params: &[FILE],
    },
    TaskDoc {
        name: "robustness",
        summary: "consensus error under the scenario noise from a consensus start",
        output: "robustness.json",
        params: &[
            ("t_end", "", "final time (s)"),
            ("dt", "", "sample spacing (s)"),
            FILE,
        ],
    },
    TaskDoc {
        name: "signed_check",
        summary: "negative-link check, connectivity certificate and rate fit for signed schedules",
        output: "signed_check.json",
        params: &[
            ("delta", "", "edge-integral threshold"),
            ("T", "", "window length (s); also skipped by the fit"),
            ("stride", "T/8", "spacing of extra window starts"),
            ("t_end", "", "final time (s)"),
            ("dt", "", "sample spacing (s)"),
            FILE,
        ],
    },
];

pub fn doc(name: &str) -> Option<&'static TaskDoc> {
    TASKS.iter().find(|d| d.name == name)
}

pub fn list_text() -> String {
    let mut out = String::from("Tasks (run in the order listed in the scenario):\n");
    for d in TASKS {
        out.push_str(&format!("  {:<15} {}\n", d.name, d.summary));
    }
    out.push_str("\nUse `list-tasks --task NAME` for parameters.\n");
    out
}

pub fn doc_text(d: &TaskDoc) -> String {
    let mut out = format!("{}: {}\noutput: {}\nparameters:\n", d.name, d.summary, d.output);
    for (name, default, meaning) in d.params {
        let default = if default.is_empty() { "required".to_string() } else { format!("default {default}") };
        out.push_str(&format!("  {name:<10} {meaning} ({default})\n"));
    }
    out
}

/// One output file, held in memory until every task has succeeded.
pub struct Artifact {
    pub file: String,
    pub bytes: Vec<u8>,
}

/// Reconstruction plus the simulator's ground truth `x(s) − mean(x(0))·1`.
#[derive(Serialize)]
struct ReconstructionReport<'a> {
    #[serde(flatten)]
    rec: &'a Reconstruction,
    truth: &'a [f64],
    error: f64,
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s.into_bytes()
}

fn math(e: impl std::fmt::Display) -> CliError {
    CliError::Math(e.to_string())
}

pub fn execute(sc: &Scenario) -> Result<Vec<Artifact>, CliError> {
    let sched = &sc.schedule;
    let mut traj: Option<Trajectory> = None;
    let mut artifacts = Vec::with_capacity(sc.tasks.len() + 1);
    let mut index = Vec::with_capacity(sc.tasks.len());
    for task in &sc.tasks {
        let file = task.output_file();
        let bytes = match *task {
            TaskSpec::Simulate { t_end, dt, quad_step, .. } => {
                let x0 = sc.initial_state.as_ref().expect("validated");
                let t = simulate_with(sched, x0, t_end, dt, &sc.noise, SimulationOptions { quad_step })
                    .map_err(math)?;
                let mut buf = Vec::new();
                t.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                traj = Some(t);
                buf
            }
            TaskSpec::Connectivity { delta, window, stride, .. } => {
                let cert = check_joint_connectivity(sched, delta, window, stride.unwrap_or(window / 8.0))
                    .map_err(math)?;
                json_bytes(&cert)
            }
            TaskSpec::NegativeLink { .. } => json_bytes(&negative_link_assumption_holds(sched, sched.psd_tolerance())),
            TaskSpec::Gramian { s, delta, quad_step, .. } => {
                let w = gramian(sched, s, delta, quad_step.unwrap_or_else(|| default_quad_step(delta)))
                    .map_err(math)?;
                json_bytes(&w)
            }
            TaskSpec::Bounds { delta, stride, .. } => {
                json_bytes(&uniform_bounds_check(sched, delta, stride.unwrap_or(delta / 8.0)).map_err(math)?)
            }
            TaskSpec::EdgeSignals { .. } => {
                let z = edge_signals(traj.as_ref().expect("validated"), sched).map_err(math)?;
                let mut buf = Vec::new();
                z.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                buf
            }
            TaskSpec::Reconstruct { s, delta, .. } => {
                let t = traj.as_ref().expect("validated");
                let z: EdgeSignalTrace = if sched.is_nonnegative() {
                    edge_signals(t, sched)
                } else {
                    projected_outputs(t, sched)
                }
                .map_err(math)?;
                let rec = reconstruct(&z, sched, s, delta).map_err(math)?;
                let truth = t
                    .state_at(s)
                    .ok_or_else(|| CliError::Math(format!("s = {s} is not a sample time of the trajectory")))?
                    .add_scalar(-t.initial_average);
                json_bytes(&ReconstructionReport {
                    error: (&rec.estimate - &truth).norm(),
                    truth: truth.as_slice(),
                    rec: &rec,
                })
            }
            TaskSpec::Rate { skip, period, .. } => {
                let fit = fit_exponential_rate_with(traj.as_ref().expect("validated"), RateFitOptions { skip, period })
                    .map_err(math)?;
                json_bytes(&fit)
            }
            TaskSpec::MaxDifference { .. } => {
                let t = traj.as_ref().expect("validated");
                let mut out = String::from("t,d,e\n");
                for ((time, d), e) in t.sample_times.iter().zip(max_state_difference(t)).zip(consensus_error(t)) {
                    out.push_str(&format!("{time:.16e},{d:.16e},{e:.16e}\n"));
                }
                out.into_bytes()
            }
            TaskSpec::Robustness { t_end, dt, .. } => {
                json_bytes(&robustness_report(sched, &sc.noise, t_end, dt).map_err(math)?)
            }
            TaskSpec::SignedCheck { delta, window, stride, t_end, dt, .. } => {
                let params = SignedCheckParams {
                    delta,
                    window,
                    stride: stride.unwrap_or(window / 8.0),
                    t_end,
                    sample_dt: dt,
                };
                let check = signed_convergence_check(sched, sc.initial_state.as_ref().expect("validated"), params)
                    .map_err(math)?;
                json_bytes(&check)
            }
        };
        index.push(json!({ "task": task.name(), "file": file }));
        artifacts.push(Artifact { file, bytes });
    }
    artifacts.push(Artifact {
        file: "run.json".into(),
        bytes: json_bytes(&json!({
            "name": sc.name,
            "seed": sc.seed,
            "schedule_id": sched.id(),
            "nodes": sched.node_count(),
            "outputs": index,
        })),
    });
    Ok(artifacts)
}
