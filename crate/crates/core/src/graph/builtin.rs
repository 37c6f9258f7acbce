//! Named schedules used by the golden scenarios and the test suites.

use rand::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use super::{GraphError, GraphSnapshot, WeightSchedule};

pub const NAMES: &[&str] = &[
    "k2_constant",
    "k3_constant",
    "alternating_path3",
    "isolated_node3",
    "signed_triangle",
    "signed_triangle_spread",
    "five_node_switching",
];

fn edges(n: usize, list: &[(usize, usize, f64)]) -> GraphSnapshot {
    // 1-based literals below
    let zero_based: Vec<_> = list.iter().map(|&(i, j, w)| (i - 1, j - 1, w)).collect();
    GraphSnapshot::from_edges(n, &zero_based).expect("builtin edge list is valid")
}

/// Unit-weight single edge on two nodes.
pub fn k2_constant(horizon: f64) -> WeightSchedule {
    WeightSchedule::constant(edges(2, &[(1, 2, 1.0)]), horizon)
        .expect("valid")
        .with_id("k2_constant")
}

pub fn complete(n: usize, w: f64, horizon: f64) -> WeightSchedule {
    WeightSchedule::constant(GraphSnapshot::complete(n, w), horizon)
        .expect("valid")
        .with_id(format!("k{n}_constant"))
}

/// Period-2 schedule: edge {1,2} on `[2k, 2k+1)`, edge {2,3} on `[2k+1, 2k+2)`.
pub fn alternating_path3() -> WeightSchedule {
    WeightSchedule::from_durations(
        vec![(1.0, edges(3, &[(1, 2, 1.0)])), (1.0, edges(3, &[(2, 3, 1.0)]))],
        true,
    )
    .expect("valid")
    .with_id("alternating_path3")
}

/// Edge {1,2} forever; node 3 never linked.
pub fn isolated_node3(horizon: f64) -> WeightSchedule {
    WeightSchedule::constant(edges(3, &[(1, 2, 1.0)]), horizon)
        .expect("valid")
        .with_id("isolated_node3")
}

/// `a12 = a13 = 1`, `a23 = −0.4`; Laplacian spectrum {0, 0.2, 3}.
pub fn signed_triangle(horizon: f64) -> WeightSchedule {
    WeightSchedule::constant(edges(3, &[(1, 2, 1.0), (1, 3, 1.0), (2, 3, -0.4)]), horizon)
        .expect("valid")
        .with_id("signed_triangle")
}

/// `a12 = 1`, `a13 = 10`, `a23 = −0.6`: still PSD, but the negative link is
/// strong enough relative to `a12` that the max–min spread can grow.
pub fn signed_triangle_spread(horizon: f64) -> WeightSchedule {
    WeightSchedule::constant(edges(3, &[(1, 2, 1.0), (1, 3, 10.0), (2, 3, -0.6)]), horizon)
        .expect("valid")
        .with_id("signed_triangle_spread")
}

/// Period-4 schedule on five nodes; no single segment is connected but the
/// union over a period is.
pub fn five_node_switching() -> WeightSchedule {
    WeightSchedule::from_durations(
        vec![
            (1.0, edges(5, &[(1, 2, 1.0), (3, 4, 0.5)])),
            (1.0, edges(5, &[(2, 3, 0.8)])),
            (1.0, edges(5, &[(4, 5, 1.2), (1, 3, 0.3)])),
            (1.0, edges(5, &[(1, 5, 0.6)])),
        ],
        true,
    )
    .expect("valid")
    .with_id("five_node_switching")
}

/// Look up a builtin by name. `horizon` applies to the non-periodic ones.
pub fn by_name(name: &str, horizon: f64) -> Result<WeightSchedule, GraphError> {
    Ok(match name {
        "k2_constant" => k2_constant(horizon),
        "k3_constant" => complete(3, 1.0, horizon),
        "alternating_path3" => alternating_path3(),
        "isolated_node3" => isolated_node3(horizon),
        "signed_triangle" => signed_triangle(horizon),
        "signed_triangle_spread" => signed_triangle_spread(horizon),
        "five_node_switching" => five_node_switching(),
        other => {
            return Err(GraphError::Format(format!(
                "unknown builtin schedule {other:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    })
}

/// Seeded random periodic schedule with nonnegative weights. Each segment
/// keeps each edge with probability `edge_prob`, weights uniform in
/// `(0, max_weight]`, durations uniform in `[0.5, 1.5)`.
pub fn random_periodic(
    seed: u64,
    n: usize,
    segment_count: usize,
    edge_prob: f64,
    max_weight: f64,
) -> WeightSchedule {
    let mut rng = Pcg64::seed_from_u64(seed);
    let pieces = (0..segment_count)
        .map(|_| {
            let duration = rng.gen_range(0.5..1.5);
            let mut list = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.gen_bool(edge_prob) {
                        let w = max_weight * (1.0 - rng.gen::<f64>());
                        list.push((i, j, w));
                    }
                }
            }
            (duration, GraphSnapshot::from_edges(n, &list).expect("valid"))
        })
        .collect();
    WeightSchedule::from_durations(pieces, true)
        .expect("valid")
        .with_id(format!("random_periodic_{seed}"))
}

/// Seeded random snapshot with nonnegative weights.
pub fn random_snapshot(rng: &mut impl Rng, n: usize, edge_prob: f64, max_weight: f64) -> GraphSnapshot {
    let mut list = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(edge_prob) {
                list.push((i, j, max_weight * rng.gen::<f64>()));
            }
        }
    }
    GraphSnapshot::from_edges(n, &list).expect("valid")
}
