#![allow(dead_code)]

use hybridsync_core::{Admittance, GridTopology, SystemState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Passive admittance with magnitude in [0.2, 2] and angle in [-pi/2, 0].
pub fn passive(rng: &mut ChaCha8Rng) -> Admittance {
    Admittance::from_polar(rng.random_range(0.2..2.0), rng.random_range(-FRAC_PI_2..=0.0))
}

pub fn random_topology(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> GridTopology {
    let n = rng.random_range(1..=max_n);
    let m = rng.random_range(1..=max_m);
    let lines = (0..n).map(|_| passive(rng)).collect();
    GridTopology::new(m, lines, passive(rng)).unwrap()
}

pub fn random_equal_topology(rng: &mut ChaCha8Rng, n: usize, m: usize) -> GridTopology {
    GridTopology::equal_lines(n, m, passive(rng), passive(rng)).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, topology: &GridTopology, spread: f64, varied_amplitude: bool) -> SystemState {
    let (n, m) = (topology.n_strings(), topology.modules_per_string());
    let mut state = SystemState::with_angles(
        n,
        m,
        (0..n * m).map(|_| rng.random_range(-spread..=spread)).collect(),
        1.0,
    )
    .unwrap();
    if varied_amplitude {
        for v in state.amplitude.as_mut_slice() {
            *v = rng.random_range(0.8..1.2);
        }
    }
    state
}
