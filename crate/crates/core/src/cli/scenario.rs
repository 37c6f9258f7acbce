//! Scenario files: schema, loading and up-front validation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_pcg::Pcg64;
use serde::Deserialize;
use serde_json::Value;

use super::CliError;
use crate::dynamics::{random_state, NoisePiece, NoiseProcess, StateVector};
use crate::graph::{builtin, laplacian, WeightSchedule};
use crate::linalg::SortedEigen;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub schedule: Value,
    #[serde(default)]
    pub initial_state: Option<InitialStateSpec>,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    pub tasks: Vec<TaskSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum InitialStateSpec {
    Values(Vec<f64>),
    Generator(StateGenerator),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateGenerator {
    /// Entries uniform in `[−scale, scale)` from the scenario seed.
    SeededRandom {
        #[serde(default = "one")]
        scale: f64,
    },
    Consensus { value: f64 },
    /// `offset·1 + scale·v`, `v` the `index`-th (0-based, ascending)
    /// Laplacian eigenvector of segment `segment`.
    Eigenvector {
        segment: usize,
        index: usize,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    Zero,
    Table {
        zeta: f64,
        #[serde(rename = "B0")]
        b0: f64,
        rows: Vec<NoiseRow>,
    },
    /// Zero before `t0`, `values` afterwards.
    Constant {
        zeta: f64,
        #[serde(rename = "B0")]
        b0: f64,
        #[serde(default)]
        t0: f64,
        values: Vec<f64>,
    },
    SeededRandom {
        zeta: f64,
        #[serde(rename = "B0")]
        b0: f64,
        #[serde(default = "default_margin")]
        margin: f64,
    },
}

fn default_margin() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseRow {
    pub t0: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Simulate {
        t_end: f64,
        dt: f64,
        #[serde(default)]
        quad_step: Option<f64>,
        #[serde(default)]
        file: Option<String>,
    },
    Connectivity {
        delta: f64,
        #[serde(rename = "T")]
        window: f64,
        #[serde(default)]
        stride: Option<f64>,
        #[serde(default)]
        file: Option<String>,
    },
    NegativeLink {
        #[serde(default)]
        file: Option<String>,
    },
    Gramian {
        s: f64,
        delta: f64,
        #[serde(default)]
        quad_step: Option<f64>,
        #[serde(default)]
        file: Option<String>,
    },
    Bounds {
        delta: f64,
        #[serde(default)]
        stride: Option<f64>,
        #[serde(default)]
        file: Option<String>,
    },
    EdgeSignals {
        #[serde(default)]
        file: Option<String>,
    },
    Reconstruct {
        s: f64,
        delta: f64,
        #[serde(default)]
        file: Option<String>,
    },
    Rate {
        #[serde(default)]
        skip: f64,
        #[serde(default)]
        period: Option<f64>,
        #[serde(default)]
        file: Option<String>,
    },
    MaxDifference {
        #[serde(default)]
        file: Option<String>,
    },
    Robustness {
        t_end: f64,
        dt: f64,
        #[serde(default)]
        file: Option<String>,
    },
    SignedCheck {
        delta: f64,
        #[serde(rename = "T")]
        window: f64,
        #[serde(default)]
        stride: Option<f64>,
        t_end: f64,
        dt: f64,
        #[serde(default)]
        file: Option<String>,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate { .. } => "simulate",
            Self::Connectivity { .. } => "connectivity",
            Self::NegativeLink { .. } => "negative_link",
            Self::Gramian { .. } => "gramian",
            Self::Bounds { .. } => "bounds",
            Self::EdgeSignals { .. } => "edge_signals",
            Self::Reconstruct { .. } => "reconstruct",
            Self::Rate { .. } => "rate",
            Self::MaxDifference { .. } => "max_difference",
            Self::Robustness { .. } => "robustness",
            Self::SignedCheck { .. } => "signed_check",
        }
    }

    fn file_override(&self) -> Option<&str> {
        match self {
            Self::Simulate { file, .. }
            | Self::Connectivity { file, .. }
            | Self::NegativeLink { file }
            | Self::Gramian { file, .. }
            | Self::Bounds { file, .. }
            | Self::EdgeSignals { file }
            | Self::Reconstruct { file, .. }
            | Self::Rate { file, .. }
            | Self::MaxDifference { file }
            | Self::Robustness { file, .. }
            | Self::SignedCheck { file, .. } => file.as_deref(),
        }
    }

    /// Output file name inside the output directory.
    pub fn output_file(&self) -> String {
        if let Some(f) = self.file_override() {
            return f.to_string();
        }
        let default = match self {
            Self::Simulate { .. } => "trajectory.csv",
            Self::Connectivity { .. } => "certificate.json",
            Self::NegativeLink { .. } => "negative_link.json",
            Self::Gramian { .. } => "gramian.json",
            Self::Bounds { .. } => "bounds.json",
            Self::EdgeSignals { .. } => "edge_signals.csv",
            Self::Reconstruct { .. } => "reconstruction.json",
            Self::Rate { .. } => "rate.json",
            Self::MaxDifference { .. } => "max_difference.csv",
            Self::Robustness { .. } => "robustness.json",
            Self::SignedCheck { .. } => "signed_check.json",
        };
        default.to_string()
    }

    fn needs_trajectory(&self) -> bool {
        matches!(
            self,
            Self::EdgeSignals { .. } | Self::Reconstruct { .. } | Self::Rate { .. } | Self::MaxDifference { .. }
        )
    }

    fn needs_initial_state(&self) -> bool {
        matches!(self, Self::Simulate { .. } | Self::SignedCheck { .. })
    }
}

/// A validated scenario, ready to execute.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub schedule: WeightSchedule,
    pub initial_state: Option<StateVector>,
    pub noise: NoiseProcess,
    pub tasks: Vec<TaskSpec>,
    pub output_dir: PathBuf,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

/// Parse and validate a scenario file. Nothing is written here.
pub fn load(path: &Path, output_override: Option<&Path>) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| schema(format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    from_str(&text, &base, output_override)
}

/// `base` resolves relative paths (schedule files, output directory).
pub fn from_str(text: &str, base: &Path, output_override: Option<&Path>) -> Result<Scenario, CliError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| schema(format!("scenario: {e}")))?;
    if file.name.trim().is_empty() {
        return Err(schema("\"name\" must not be empty"));
    }
    let schedule = schedule_from(&file.schedule, base)?;
    let n = schedule.node_count();

    // one generator feeds every random draw, in a fixed order
    let mut master = Pcg64::seed_from_u64(file.seed);
    let state_seed = master.next_u64();
    let noise_seed = master.next_u64();

    let initial_state = match &file.initial_state {
        None => None,
        Some(spec) => Some(initial_state_from(spec, &schedule, state_seed)?),
    };
    let noise = noise_from(file.noise.as_ref(), n, noise_seed)?;
    noise
        .check_alignment(&schedule)
        .map_err(|e| schema(format!("noise: {e}")))?;

    if file.tasks.is_empty() {
        return Err(schema("\"tasks\" must list at least one task"));
    }
    let mut names = HashSet::new();
    let mut simulated: Option<f64> = None;
    for (k, task) in file.tasks.iter().enumerate() {
        let label = format!("task {k} ({})", task.name());
        let out = task.output_file();
        if out == "run.json" || out.is_empty() || out.contains(['/', '\\']) || out.starts_with('.') {
            return Err(schema(format!("{label}: invalid output file name {out:?}")));
        }
        if !names.insert(out) {
            return Err(schema(format!(
                "{label}: output file {:?} is produced twice; set \"file\" on one of them",
                task.output_file()
            )));
        }
        if task.needs_initial_state() && initial_state.is_none() {
            return Err(schema(format!("{label} needs \"initial_state\"")));
        }
        if task.needs_trajectory() && simulated.is_none() {
            return Err(schema(format!("{label} needs an earlier \"simulate\" task")));
        }
        check_task(task, &schedule, simulated).map_err(|m| schema(format!("{label}: {m}")))?;
        if let TaskSpec::Simulate { t_end, .. } = task {
            simulated = Some(*t_end);
        }
    }

    let output_dir = match output_override {
        Some(dir) => dir.to_path_buf(),
        None => base.join(file.output_dir.as_deref().unwrap_or("out")),
    };
    Ok(Scenario {
        name: file.name,
        seed: file.seed,
        schedule,
        initial_state,
        noise,
        tasks: file.tasks,
        output_dir,
    })
}

fn schedule_from(value: &Value, base: &Path) -> Result<WeightSchedule, CliError> {
    let obj = value
        .as_object()
        .ok_or_else(|| schema("\"schedule\" must be an object"))?;
    if let Some(name) = obj.get("builtin") {
        let name = name.as_str().ok_or_else(|| schema("\"builtin\" must be a string"))?;
        for key in obj.keys() {
            if key != "builtin" && key != "horizon" {
                return Err(schema(format!("schedule: unknown field {key:?}")));
            }
        }
        let horizon = match obj.get("horizon") {
            None => 10.0,
            Some(h) => h.as_f64().ok_or_else(|| schema("\"horizon\" must be a number"))?,
        };
        if !(horizon > 0.0) {
            return Err(schema("\"horizon\" must be positive"));
        }
        return builtin::by_name(name, horizon).map_err(|e| schema(format!("schedule: {e}")));
    }
    if let Some(file) = obj.get("file") {
        if obj.len() != 1 {
            return Err(schema("a file schedule takes only the \"file\" field"));
        }
        let rel = file.as_str().ok_or_else(|| schema("\"file\" must be a string"))?;
        return WeightSchedule::load(&base.join(rel)).map_err(|e| schema(format!("schedule: {e}")));
    }
    WeightSchedule::from_json_str(&value.to_string()).map_err(|e| schema(format!("schedule: {e}")))
}

fn initial_state_from(
    spec: &InitialStateSpec,
    sched: &WeightSchedule,
    seed: u64,
) -> Result<StateVector, CliError> {
    let n = sched.node_count();
    let values = match spec {
        InitialStateSpec::Values(v) => DVector::from_column_slice(v),
        InitialStateSpec::Generator(StateGenerator::SeededRandom { scale }) => random_state(seed, n) * *scale,
        InitialStateSpec::Generator(StateGenerator::Consensus { value }) => DVector::from_element(n, *value),
        InitialStateSpec::Generator(StateGenerator::Eigenvector {
            segment,
            index,
            scale,
            offset,
        }) => {
            let seg = sched.segments().get(*segment).ok_or_else(|| {
                schema(format!(
                    "initial_state: segment {segment} out of range (schedule has {})",
                    sched.segments().len()
                ))
            })?;
            if *index >= n {
                return Err(schema(format!("initial_state: eigenvector index {index} >= {n}")));
            }
            let eig = SortedEigen::new(laplacian(&seg.graph).as_matrix());
            eig.vectors.column(*index).into_owned() * *scale + DVector::from_element(n, *offset)
        }
    };
    if values.len() != n {
        return Err(schema(format!(
            "initial_state has {} entries, schedule has {n} nodes",
            values.len()
        )));
    }
    StateVector::new(0.0, values).map_err(|e| schema(format!("initial_state: {e}")))
}

fn noise_from(spec: Option<&NoiseSpec>, n: usize, seed: u64) -> Result<NoiseProcess, CliError> {
    let wrap = |e| schema(format!("noise: {e}"));
    let vector = |v: &[f64]| {
        if v.len() == n {
            Ok(DVector::from_column_slice(v))
        } else {
            Err(schema(format!("noise: vector has {} entries, expected {n}", v.len())))
        }
    };
    match spec {
        None | Some(NoiseSpec::Zero) => Ok(NoiseProcess::zero(n)),
        Some(NoiseSpec::Table { zeta, b0, rows }) => {
            let mut pieces = Vec::with_capacity(rows.len());
            for r in rows {
                pieces.push(NoisePiece {
                    t0: r.t0,
                    values: vector(&r.values)?,
                });
            }
            NoiseProcess::table(n, *zeta, *b0, pieces).map_err(wrap)
        }
        Some(NoiseSpec::Constant { zeta, b0, t0, values }) => {
            NoiseProcess::constant_from(n, *zeta, *b0, *t0, vector(values)?).map_err(wrap)
        }
        Some(NoiseSpec::SeededRandom { zeta, b0, margin }) => {
            NoiseProcess::seeded_random(n, *zeta, *b0, seed, *margin).map_err(wrap)
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(format!("\"{name}\" must be positive, got {v}"))
    }
}

fn in_horizon(sched: &WeightSchedule, s: f64, t: f64) -> Result<(), String> {
    sched.check_window(s, t).map_err(|e| e.to_string())
}

fn check_task(task: &TaskSpec, sched: &WeightSchedule, simulated: Option<f64>) -> Result<(), String> {
    match *task {
        TaskSpec::Simulate { t_end, dt, quad_step, .. } => {
            positive("t_end", t_end)?;
            positive("dt", dt)?;
            if let Some(q) = quad_step {
                positive("quad_step", q)?;
            }
            in_horizon(sched, 0.0, t_end)
        }
        TaskSpec::Connectivity { delta, window, stride, .. } => {
            positive("delta", delta)?;
            positive("T", window)?;
            if let Some(s) = stride {
                positive("stride", s)?;
            }
            if !sched.is_periodic() && window > sched.horizon() {
                return Err(format!("\"T\" = {window} exceeds the horizon {}", sched.horizon()));
            }
            Ok(())
        }
        TaskSpec::NegativeLink { .. } | TaskSpec::EdgeSignals { .. } | TaskSpec::MaxDifference { .. } => Ok(()),
        TaskSpec::Gramian { s, delta, quad_step, .. } => {
            positive("delta", delta)?;
            if let Some(q) = quad_step {
                positive("quad_step", q)?;
            }
            in_horizon(sched, s, s + delta)
        }
        TaskSpec::Bounds { delta, stride, .. } => {
            positive("delta", delta)?;
            if let Some(s) = stride {
                positive("stride", s)?;
            }
            if !sched.is_periodic() && delta > sched.horizon() {
                return Err(format!("\"delta\" = {delta} exceeds the horizon {}", sched.horizon()));
            }
            Ok(())
        }
        TaskSpec::Reconstruct { s, delta, .. } => {
            positive("delta", delta)?;
            if s < 0.0 {
                return Err(format!("\"s\" must be >= 0, got {s}"));
            }
            let t_end = simulated.unwrap_or(0.0);
            if s + delta > t_end + 1e-9 {
                return Err(format!("window [{s}, {}] extends past the simulated t_end {t_end}", s + delta));
            }
            Ok(())
        }
        TaskSpec::Rate { skip, period, .. } => {
            if !(skip >= 0.0) {
                return Err(format!("\"skip\" must be >= 0, got {skip}"));
            }
            if let Some(p) = period {
                positive("period", p)?;
            }
            Ok(())
        }
        TaskSpec::Robustness { t_end, dt, .. } => {
            positive("t_end", t_end)?;
            positive("dt", dt)?;
            in_horizon(sched, 0.0, t_end)
        }
        TaskSpec::SignedCheck { delta, window, stride, t_end, dt, .. } => {
            positive("delta", delta)?;
            positive("T", window)?;
            positive("t_end", t_end)?;
            positive("dt", dt)?;
            if let Some(s) = stride {
                positive("stride", s)?;
            }
            in_horizon(sched, 0.0, t_end)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Scenario, CliError> {
        from_str(text, Path::new("/tmp"), None)
    }

    #[test]
    fn minimal_builtin_scenario() {
        let sc = parse(
            r#"{"name":"k2","schedule":{"builtin":"k2_constant","horizon":5},
                "initial_state":[1,-1],"tasks":[{"task":"simulate","t_end":2,"dt":0.1}]}"#,
        )
        .unwrap();
        assert_eq!(sc.schedule.node_count(), 2);
        assert_eq!(sc.output_dir, Path::new("/tmp/out"));
    }

    #[test]
    fn inline_schedule_missing_nodes_is_rejected() {
        let err = parse(
            r#"{"name":"x","schedule":{"segments":[{"t0":0,"t1":1,"edges":[]}]},
                "tasks":[{"task":"negative_link"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(&err, CliError::Schema(m) if m.contains("nodes")), "{err}");
    }

    #[test]
    fn unknown_fields_and_tasks_are_rejected() {
        let base = r#""schedule":{"builtin":"k2_constant"},"initial_state":[1,-1]"#;
        for tasks in [
            r#"[{"task":"simulate","t_end":2,"dt":0.1,"typo":1}]"#,
            r#"[{"task":"simulat","t_end":2,"dt":0.1}]"#,
            r#"[{"task":"rate"}]"#,
            r#"[{"task":"simulate","t_end":20,"dt":0.1}]"#,
            r#"[{"task":"simulate","t_end":2,"dt":0.1},{"task":"reconstruct","s":1.5,"delta":1}]"#,
        ] {
            let text = format!(r#"{{"name":"x",{base},"tasks":{tasks}}}"#);
            assert!(matches!(parse(&text), Err(CliError::Schema(_))), "{tasks}");
        }
    }

    #[test]
    fn generators_are_seeded() {
        let text = |seed: u64| {
            format!(
                r#"{{"name":"x","seed":{seed},"schedule":{{"builtin":"five_node_switching"}},
                    "initial_state":{{"generator":"seeded_random"}},"tasks":[{{"task":"negative_link"}}]}}"#
            )
        };
        let a = parse(&text(3)).unwrap().initial_state.unwrap();
        let b = parse(&text(3)).unwrap().initial_state.unwrap();
        let c = parse(&text(4)).unwrap().initial_state.unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn eigenvector_generator() {
        let sc = parse(
            r#"{"name":"x","schedule":{"builtin":"signed_triangle"},
                "initial_state":{"generator":"eigenvector","segment":0,"index":0,"offset":2},
                "tasks":[{"task":"negative_link"}]}"#,
        )
        .unwrap();
        let x = sc.initial_state.unwrap().values;
        // eigenvalue 0 of a Laplacian: the consensus direction
        assert!((x.max() - x.min()).abs() < 1e-12);
    }
}
