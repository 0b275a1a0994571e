//! Closed-loop phase dynamics `d(delta_ij)/dt = omega_ij(delta)`, integrated
//! with fixed-step classical RK4.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::droop::{droop_frequency, frequency_deviation, voltage_reference, DroopParams};
use crate::error::{Error, Result};
use crate::network::{module_powers, GridTopology, ModuleMatrix, PowerReading, SystemState};
use crate::phasor::angle_difference;

/// Any `|d(delta)/dt|` above this aborts the integration.
pub const BLOWUP_RATE: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Angles measured against a reference spinning at `omega*`.
    #[default]
    RotatingAtOmegaStar,
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    pub t_end: f64,
    /// Initial angles are drawn uniformly from `[-delta0, delta0]`.
    pub delta0: f64,
    pub seed: u64,
    /// Synchronization threshold on the max pairwise angle difference, rad.
    pub sync_tol: f64,
    pub frame: Frame,
    /// Keep every `record_every`-th step in the trajectory (the final step is
    /// always kept). Synchronization is still checked at every step.
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-4,
            t_end: 2.0,
            delta0: 0.05,
            seed: 0,
            sync_tol: 1e-6,
            frame: Frame::RotatingAtOmegaStar,
            record_every: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(self) -> Result<Self> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt must be > 0"));
        }
        if !(self.t_end.is_finite() && self.t_end >= self.dt) {
            return Err(Error::invalid("t_end must be >= dt"));
        }
        if !(self.sync_tol.is_finite() && self.sync_tol > 0.0) {
            return Err(Error::invalid("sync_tol must be > 0"));
        }
        if !(self.delta0.is_finite() && self.delta0 >= 0.0) {
            return Err(Error::invalid("delta0 must be >= 0"));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be >= 1"));
        }
        Ok(self)
    }

    /// Number of integration steps, `round(t_end / dt)`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub powers: Vec<ModuleMatrix<PowerReading>>,
    /// Absolute module frequencies `omega_ij`, rad/s, whatever the frame.
    pub frequencies: Vec<ModuleMatrix<f64>>,
    pub sync_time: Option<f64>,
    pub synchronized: bool,
    pub final_sync_metric: f64,
    pub frame: Frame,
}

impl Trajectory {
    pub fn final_state(&self) -> &SystemState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    pub fn final_powers(&self) -> &ModuleMatrix<PowerReading> {
        self.powers.last().expect("trajectory always holds the initial state")
    }

    /// Spread (max - min) of `m P_ij + k_phi phi_ij` at the final step.
    pub fn steady_state_spread(&self, params: &DroopParams) -> f64 {
        spread(self.final_powers().iter().map(|r| params.droop_term(r)))
    }

    /// Mean frequency deviation from `omega*` at the final step. Once
    /// synchronized this is the common drift `-m P_s - k_phi phi_s`.
    pub fn final_frequency_deviation(&self, params: &DroopParams) -> f64 {
        let powers = self.final_powers();
        powers.iter().map(|r| frequency_deviation(params, r)).sum::<f64>() / powers.len() as f64
    }
}

fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if lo.is_finite() {
        hi - lo
    } else {
        0.0
    }
}

fn rates_from(params: &DroopParams, powers: &ModuleMatrix<PowerReading>, frame: Frame) -> ModuleMatrix<f64> {
    match frame {
        Frame::RotatingAtOmegaStar => powers.map(|r| frequency_deviation(params, r)),
        Frame::Absolute => powers.map(|r| droop_frequency(params, r)),
    }
}

/// Right-hand side of the phase dynamics: each module's droop frequency,
/// less `omega*` in the rotating frame.
pub fn rhs(
    topology: &GridTopology,
    params: &DroopParams,
    state: &SystemState,
    frame: Frame,
) -> Result<ModuleMatrix<f64>> {
    let powers = module_powers(topology, state)?;
    Ok(rates_from(params, &powers, frame))
}

/// Maximum pairwise angle difference, each difference wrapped to `[0, pi]`.
pub fn synchronization_metric(state: &SystemState) -> f64 {
    max_pairwise_wrapped(state.delta.as_slice())
}

fn max_pairwise_wrapped(angles: &[f64]) -> f64 {
    if angles.len() < 2 {
        return 0.0;
    }
    // On the circle, if every point fits in an arc shorter than pi the
    // answer is that arc's length: 2pi minus the largest empty gap.
    let mut reduced: Vec<f64> = angles.iter().map(|a| a.rem_euclid(TAU)).collect();
    reduced.sort_by(f64::total_cmp);
    let mut largest_gap = TAU - (reduced[reduced.len() - 1] - reduced[0]);
    for w in reduced.windows(2) {
        largest_gap = largest_gap.max(w[1] - w[0]);
    }
    let arc = TAU - largest_gap;
    if arc < PI {
        // Recompute from the original values so the result does not pick up
        // the rounding of rem_euclid on large angles.
        let reference = angles[0];
        let offsets = angles.iter().map(|&a| angle_difference(a, reference));
        return spread(offsets);
    }
    let mut worst = 0.0f64;
    for (k, &a) in angles.iter().enumerate() {
        for &b in &angles[k + 1..] {
            worst = worst.max(angle_difference(a, b).abs());
        }
    }
    worst
}

/// Initial state with amplitudes at `V_ref` and angles drawn uniformly from
/// `[-delta0, delta0]` by a ChaCha8 generator seeded with `config.seed`.
pub fn initial_state(topology: &GridTopology, params: &DroopParams, config: &SimConfig) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let spread = config.delta0;
    let angles = (0..topology.n_modules())
        .map(|_| if spread > 0.0 { rng.random_range(-spread..=spread) } else { 0.0 })
        .collect();
    SystemState::with_angles(
        topology.n_strings(),
        topology.modules_per_string(),
        angles,
        voltage_reference(params),
    )
    .expect("dimensions come from the topology")
}

fn check_rates(rates: &ModuleMatrix<f64>, step: usize, time: f64) -> Result<()> {
    for &r in rates.iter() {
        if !r.is_finite() || r.abs() > BLOWUP_RATE {
            return Err(Error::NumericalBlowup { step, time, rate: r.abs() });
        }
    }
    Ok(())
}

fn offset(state: &SystemState, rates: &ModuleMatrix<f64>, h: f64) -> SystemState {
    let mut next = state.clone();
    for (d, r) in next.delta.as_mut_slice().iter_mut().zip(rates.iter()) {
        *d += h * r;
    }
    next
}

/// Fixed-step RK4 integration from `initial` over `[0, t_end]`.
///
/// The run counts as synchronized when the metric drops below `sync_tol`
/// and stays there through the last step; `sync_time` is the first such
/// step time.
pub fn integrate(
    topology: &GridTopology,
    params: &DroopParams,
    config: &SimConfig,
    initial: &SystemState,
) -> Result<Trajectory> {
    let config = config.validate()?;
    let frame = config.frame;
    let dt = config.dt;
    let steps = config.steps();

    let mut trajectory = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        powers: Vec::new(),
        frequencies: Vec::new(),
        sync_time: None,
        synchronized: false,
        final_sync_metric: 0.0,
        frame,
    };

    let mut state = initial.clone();
    let mut last_unsynced: Option<usize> = None;
    for step in 0..=steps {
        let t = step as f64 * dt;
        let powers = module_powers(topology, &state)?;
        let k1 = rates_from(params, &powers, frame);
        check_rates(&k1, step, t)?;

        let metric = synchronization_metric(&state);
        if metric >= config.sync_tol {
            last_unsynced = Some(step);
        }
        if step % config.record_every == 0 || step == steps {
            trajectory.times.push(t);
            trajectory.frequencies.push(powers.map(|r| droop_frequency(params, r)));
            trajectory.powers.push(powers);
            trajectory.states.push(state.clone());
        }
        if step == steps {
            trajectory.final_sync_metric = metric;
            break;
        }

        let k2 = rhs(topology, params, &offset(&state, &k1, 0.5 * dt), frame)?;
        check_rates(&k2, step, t)?;
        let k3 = rhs(topology, params, &offset(&state, &k2, 0.5 * dt), frame)?;
        check_rates(&k3, step, t)?;
        let k4 = rhs(topology, params, &offset(&state, &k3, dt), frame)?;
        check_rates(&k4, step, t)?;

        let slopes = k1.iter().zip(k2.iter()).zip(k3.iter()).zip(k4.iter());
        for (d, (((a, b), c), e)) in state.delta.as_mut_slice().iter_mut().zip(slopes) {
            *d += dt / 6.0 * (a + 2.0 * b + 2.0 * c + e);
        }
    }

    match last_unsynced {
        None => {
            trajectory.synchronized = true;
            trajectory.sync_time = Some(0.0);
        }
        Some(k) if k < steps => {
            trajectory.synchronized = true;
            trajectory.sync_time = Some((k + 1) as f64 * dt);
        }
        Some(_) => {}
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::oracle_solve;
    use crate::phasor::Admittance;

    fn state(angles: &[f64]) -> SystemState {
        SystemState::with_angles(1, angles.len(), angles.to_vec(), 1.0).unwrap()
    }

    fn brute_force_metric(angles: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for a in angles {
            for b in angles {
                worst = worst.max(angle_difference(*a, *b).abs());
            }
        }
        worst
    }

    #[test]
    fn metric_examples() {
        assert_eq!(synchronization_metric(&state(&[0.3, 0.3, 0.3])), 0.0);
        assert!((synchronization_metric(&state(&[0.0, 0.1])) - 0.1).abs() < 1e-15);
        assert!(synchronization_metric(&state(&[0.0, TAU])) < 1e-15);
        assert!((synchronization_metric(&state(&[3.1, -3.1])) - (TAU - 6.2)).abs() < 1e-12);
    }

    #[test]
    fn metric_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let n = rng.random_range(2..9);
            let width = [0.01, 1.0, 3.0, 7.0][rng.random_range(0..4)];
            let centre = rng.random_range(-50.0..50.0);
            let angles: Vec<f64> = (0..n).map(|_| centre + rng.random_range(-width..width)).collect();
            let fast = max_pairwise_wrapped(&angles);
            assert!((fast - brute_force_metric(&angles)).abs() < 1e-12, "{angles:?}");
        }
    }

    fn two_by_two() -> (GridTopology, DroopParams) {
        let topology = GridTopology::equal_lines(
            2,
            2,
            Admittance::from_polar(1.0, -1.2),
            Admittance::from_polar(1.0, 0.0),
        )
        .unwrap();
        (topology, DroopParams::default().with_gains(100.0, 100.0))
    }

    #[test]
    fn rhs_equal_angles_are_identical() {
        let (topology, params) = two_by_two();
        let s = SystemState::with_angles(2, 2, vec![0.4; 4], 1.0).unwrap();
        let rates = rhs(&topology, &params, &s, Frame::RotatingAtOmegaStar).unwrap();
        assert!(rates.iter().all(|&r| r == rates[(0, 0)]));
    }

    #[test]
    fn rhs_no_load_single_string() {
        let topology = GridTopology::new(3, vec![Admittance::from_polar(1.0, -1.0)], Admittance::ZERO).unwrap();
        let params = DroopParams::default();
        let s = state(&[0.1, 0.0, -0.2]);
        let abs = rhs(&topology, &params, &s, Frame::Absolute).unwrap();
        let rot = rhs(&topology, &params, &s, Frame::RotatingAtOmegaStar).unwrap();
        assert!(abs.iter().all(|&w| w == params.omega_star));
        assert!(rot.iter().all(|&w| w == 0.0));
    }

    #[test]
    fn rhs_matches_oracle_path() {
        let topology = GridTopology::new(
            3,
            vec![Admittance::from_polar(1.1, -1.0), Admittance::from_polar(0.6, -0.4)],
            Admittance::from_polar(0.8, -0.1),
        )
        .unwrap();
        let params = DroopParams::default().with_gains(3.0, 1.5);
        let s = SystemState::with_angles(2, 3, vec![0.1, -0.05, 0.2, 0.0, -0.15, 0.07], 1.0).unwrap();
        let rates = rhs(&topology, &params, &s, Frame::Absolute).unwrap();
        let oracle = oracle_solve(&topology, &s).unwrap();
        for (r, reading) in rates.iter().zip(oracle.powers.iter()) {
            assert!((r - droop_frequency(&params, reading)).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_angles_stay_equal() {
        let (topology, params) = two_by_two();
        let config = SimConfig {
            t_end: 0.2,
            ..SimConfig::default()
        };
        let initial = SystemState::with_angles(2, 2, vec![0.25; 4], 1.0).unwrap();
        let traj = integrate(&topology, &params, &config, &initial).unwrap();
        assert!(traj.synchronized);
        assert_eq!(traj.sync_time, Some(0.0));
        for s in &traj.states {
            assert!(synchronization_metric(s) < 1e-12);
        }
    }

    #[test]
    fn trajectory_lists_share_length() {
        let (topology, params) = two_by_two();
        let config = SimConfig {
            t_end: 0.01,
            record_every: 7,
            ..SimConfig::default()
        };
        let initial = initial_state(&topology, &params, &config);
        let traj = integrate(&topology, &params, &config, &initial).unwrap();
        // steps 0, 7, 14, ..., 98 and the final step 100
        assert_eq!(traj.times.len(), 16);
        assert_eq!(traj.states.len(), traj.times.len());
        assert_eq!(traj.powers.len(), traj.times.len());
        assert_eq!(traj.frequencies.len(), traj.times.len());
        assert!((traj.times.last().unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn blowup_is_reported() {
        let (topology, _) = two_by_two();
        let params = DroopParams::default().with_gains(1e7, 0.0);
        let config = SimConfig {
            t_end: 0.01,
            ..SimConfig::default()
        };
        let initial = initial_state(&topology, &params, &config);
        let err = integrate(&topology, &params, &config, &initial).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { step: 0, .. }), "{err:?}");
    }

    #[test]
    fn invalid_config_rejected() {
        let (topology, params) = two_by_two();
        let initial = SystemState::synchronized(2, 2, 1.0);
        for config in [
            SimConfig { dt: 0.0, ..SimConfig::default() },
            SimConfig { t_end: 1e-5, ..SimConfig::default() },
            SimConfig { sync_tol: 0.0, ..SimConfig::default() },
            SimConfig { delta0: -1.0, ..SimConfig::default() },
        ] {
            assert!(matches!(integrate(&topology, &params, &config, &initial), Err(Error::Invalid(_))));
        }
    }

    #[test]
    fn seeded_initial_state_is_reproducible() {
        let (topology, params) = two_by_two();
        let config = SimConfig { seed: 99, delta0: 0.3, ..SimConfig::default() };
        let a = initial_state(&topology, &params, &config);
        let b = initial_state(&topology, &params, &config);
        assert_eq!(a, b);
        assert!(a.delta.iter().all(|d| d.abs() <= 0.3));
        assert!(a.amplitude.iter().all(|&v| v == params.v_ref));
    }
}
