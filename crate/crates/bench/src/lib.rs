//! Fixtures shared by the criterion benches.

use cat0_vip::scenario::{self, ProblemSpec};
use cat0_vip::{Point, Stream, SystemProblem, VipProblem};

/// The single-map problem of a builtin scenario.
pub fn single(name: &str) -> VipProblem {
    match scenario::builtin(name).map(|s| s.problem) {
        Some(ProblemSpec::Single(p)) | Some(ProblemSpec::Truncated { problem: p, .. }) => p,
        _ => panic!("{name} is not a single-map builtin"),
    }
}

pub fn system(name: &str) -> SystemProblem {
    match scenario::builtin(name).map(|s| s.problem) {
        Some(ProblemSpec::System(p)) => p,
        _ => panic!("{name} is not a system builtin"),
    }
}

/// `n` points uniform in the unit square.
pub fn cloud(n: usize, seed: u64) -> Vec<Point> {
    let mut rng = Stream::new(seed);
    (0..n)
        .map(|_| Point::euclidean([rng.next_f64(), rng.next_f64()]))
        .collect()
}
