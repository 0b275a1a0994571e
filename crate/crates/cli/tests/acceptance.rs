//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::f64::consts::FRAC_PI_2;
use std::time::{Duration, Instant};

use hybridsync_cli::commands::{cmd_simulate, TRAJECTORY_FILE};
use hybridsync_cli::parse_scenario;
use hybridsync_core::stability::{compare_spectra, relative_matrix_error};
use hybridsync_core::{
    analyze, build_system_matrix, closed_form_spectrum, equal_line_power, eta_coefficients, initial_state,
    integrate, module_power, numerical_linearization, numerical_spectrum, oracle_solve, stability_verdict,
    synchronization_metric, Admittance, DroopParams, EqualLineModel, GridTopology, Phasor, SimConfig,
    SystemState, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn passive(rng: &mut ChaCha8Rng) -> Admittance {
    Admittance::from_polar(rng.random_range(0.2..2.0), rng.random_range(-FRAC_PI_2..=0.0))
}

fn random_topology(rng: &mut ChaCha8Rng) -> GridTopology {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=4);
    let lines = (0..n).map(|_| passive(rng)).collect();
    GridTopology::new(m, lines, passive(rng)).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, topology: &GridTopology, lo: f64, hi: f64) -> SystemState {
    let (n, m) = (topology.n_strings(), topology.modules_per_string());
    let mut state =
        SystemState::with_angles(n, m, (0..n * m).map(|_| rng.random_range(lo..=hi)).collect(), 1.0).unwrap();
    for v in state.amplitude.as_mut_slice() {
        *v = rng.random_range(0.8..1.2);
    }
    state
}

fn reference_topology() -> GridTopology {
    GridTopology::equal_lines(2, 2, Admittance::from_polar(1.0, -1.2), Admittance::from_polar(1.0, 0.0)).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let topology = random_topology(&mut rng);
        let state = random_state(&mut rng, &topology, -FRAC_PI_2, 0.0);
        let oracle = oracle_solve(&topology, &state).map_err(|e| e.to_string())?;
        for i in 0..topology.n_strings() {
            for j in 0..topology.modules_per_string() {
                let r = module_power(&topology, &state, i, j).map_err(|e| e.to_string())?;
                worst = worst.max((r.p - oracle.powers[(i, j)].p).abs());
                worst = worst.max((r.q - oracle.powers[(i, j)].q).abs());
            }
        }
    }
    let elapsed = start.elapsed();
    let msg = format!("1000 instances, max |error| {worst:.2e}, {:.2} s", elapsed.as_secs_f64());
    if worst <= 1e-10 && elapsed < Duration::from_secs(10) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn equal_line_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=4);
        let topology = GridTopology::equal_lines(n, m, passive(&mut rng), passive(&mut rng)).unwrap();
        let model = EqualLineModel::from_topology(&topology).map_err(|e| e.to_string())?;
        let v_ref = rng.random_range(0.8..1.2);
        let mut state = random_state(&mut rng, &topology, -FRAC_PI_2, 0.0);
        state.amplitude.as_mut_slice().fill(v_ref);
        for i in 0..n {
            for j in 0..m {
                let reduced = equal_line_power(&model, v_ref, &state.delta, i, j).map_err(|e| e.to_string())?;
                let general = module_power(&topology, &state, i, j).map_err(|e| e.to_string())?;
                worst = worst.max((reduced.p - general.p).abs()).max((reduced.q - general.q).abs());
            }
        }
    }
    let msg = format!("500 angle sets, max |error| {worst:.2e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn power_conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let topology = random_topology(&mut rng);
        let state = random_state(&mut rng, &topology, -FRAC_PI_2, 0.0);
        let sol = oracle_solve(&topology, &state).map_err(|e| e.to_string())?;
        let generated: Phasor = sol.module_complex_power.iter().sum();
        let absorbed = sol.load_power + sol.line_losses.iter().sum::<Phasor>();
        worst = worst.max((generated - absorbed).magnitude());
    }
    let msg = format!("1000 oracle runs, max imbalance {worst:.2e}");
    if worst <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn spectrum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst_gap = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut failures = 0;
    for n in 1..=5 {
        for m in 1..=5 {
            for _ in 0..100 {
                let topology = GridTopology::equal_lines(n, m, passive(&mut rng), passive(&mut rng)).unwrap();
                let model = EqualLineModel::from_topology(&topology).map_err(|e| e.to_string())?;
                let eta = eta_coefficients(&model, 1.0, n, m).map_err(|e| e.to_string())?;
                let (mg, kg) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let sm = build_system_matrix(&eta, mg, kg, n, m);
                let closed = closed_form_spectrum(&eta, mg, kg, n, m);
                let (gap, agree) = compare_spectra(&closed, &numerical_spectrum(&sm.a));
                worst_gap = worst_gap.max(gap);
                if !agree {
                    failures += 1;
                }

                let verdict = stability_verdict(&eta, mg, kg, n);
                let (nf, mf) = (n as f64, m as f64);
                let (eta_1, eta_2) = (eta.eta_1(mg, kg), eta.eta_2(mg, kg));
                let scale = mf * nf * (eta_1.abs() + eta_2.abs()).max(1.0);
                let d1 = (mf * nf * eta_1 - mf * nf * verdict.lambda_p).abs() / scale;
                let d2 = (mf * (nf * eta_1 + eta_2) - mf * verdict.lambda_c).abs() / scale;
                worst_identity = worst_identity.max(d1).max(d2);
            }
        }
    }
    let msg = format!(
        "2500 draws, max eigenvalue gap {worst_gap:.2e}, {failures} outside tolerance, identity residual {worst_identity:.2e}"
    );
    if failures == 0 && worst_identity <= 1e-14 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn linearization_fidelity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let mut worst = 0.0f64;
    for n in 1..=4 {
        for m in 1..=4 {
            for _ in 0..5 {
                let topology = GridTopology::equal_lines(n, m, passive(&mut rng), passive(&mut rng)).unwrap();
                let params = DroopParams::default().with_gains(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                let report = analyze(&topology, &params).map_err(|e| e.to_string())?;
                let fd = numerical_linearization(&topology, &params, &SystemState::synchronized(n, m, 1.0))
                    .map_err(|e| e.to_string())?;
                worst = worst.max(relative_matrix_error(&report.system_matrix.a, &fd));
            }
        }
    }
    let msg = format!("N, M <= 4, max relative error {worst:.2e}");
    if worst <= 1e-6 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Gains m, k_phi over -300..=600 in steps of 100 on the 2x2 reference
/// topology. Every stable point decays at >= 12.5 /s, every unstable one
/// grows at >= 15 /s, so a 2 s run from a 0.05 rad spread separates them.
fn gain_grid() -> Vec<(f64, f64)> {
    let axis: Vec<f64> = (0..10).map(|k| -300.0 + 100.0 * k as f64).collect();
    axis.iter().flat_map(|&m| axis.iter().map(move |&k| (m, k))).collect()
}

struct GridRun {
    m: f64,
    k_phi: f64,
    stable: bool,
    trajectory: Option<Trajectory>,
    params: DroopParams,
    sync_tol: f64,
}

fn run_grid() -> (Vec<GridRun>, usize, Duration) {
    let topology = reference_topology();
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut excluded = 0;
    for (seed, (m, k_phi)) in gain_grid().into_iter().enumerate() {
        let params = DroopParams::default().with_gains(m, k_phi);
        let report = analyze(&topology, &params).unwrap();
        if report.lambda_p.abs() <= 1e-3 || report.lambda_c.abs() <= 1e-3 {
            excluded += 1;
            continue;
        }
        let config = SimConfig {
            delta0: 0.05,
            seed: seed as u64,
            sync_tol: 1e-6,
            t_end: 2.0,
            record_every: 1000,
            ..SimConfig::default()
        };
        let initial = initial_state(&topology, &params, &config);
        let trajectory = integrate(&topology, &params, &config, &initial).ok();
        runs.push(GridRun {
            m,
            k_phi,
            stable: report.stable,
            trajectory,
            params,
            sync_tol: config.sync_tol,
        });
    }
    (runs, excluded, start.elapsed())
}

fn predicate_agreement(runs: &[GridRun], excluded: usize, elapsed: Duration) -> Outcome {
    let mismatches: Vec<String> = runs
        .iter()
        .filter(|r| r.stable != r.trajectory.as_ref().is_some_and(|t| t.synchronized))
        .map(|r| format!("(m={}, k_phi={})", r.m, r.k_phi))
        .collect();
    let stable = runs.iter().filter(|r| r.stable).count();
    let msg = format!(
        "{} grid points ({stable} stable, {excluded} excluded), {} mismatches, {:.2} s{}",
        runs.len(),
        mismatches.len(),
        elapsed.as_secs_f64(),
        if mismatches.is_empty() { String::new() } else { format!(": {}", mismatches.join(" ")) }
    );
    if mismatches.is_empty() && elapsed < Duration::from_secs(60) && stable > 0 && stable < runs.len() {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn steady_state_law(runs: &[GridRun]) -> Outcome {
    let mut worst_spread = 0.0f64;
    let mut worst_metric = 0.0f64;
    let mut count = 0;
    let mut bad = 0;
    for run in runs {
        let Some(t) = run.trajectory.as_ref().filter(|t| t.synchronized) else {
            continue;
        };
        count += 1;
        let spread = t.steady_state_spread(&run.params);
        let metric = synchronization_metric(t.final_state());
        worst_spread = worst_spread.max(spread);
        worst_metric = worst_metric.max(metric);
        if spread >= 1e-8 || metric >= run.sync_tol {
            bad += 1;
        }
    }
    let msg = format!(
        "{count} synchronized runs, max droop-term spread {worst_spread:.2e}, max angle spread {worst_metric:.2e}"
    );
    if count > 0 && bad == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism_and_convergence() -> Outcome {
    let scenario = parse_scenario(
        r#"{"N": 2, "M": 2, "line": {"mag": 1.0, "ang": -1.2}, "load": {"mag": 1.0, "ang": 0.0},
            "droop": {"m": 100.0, "k_phi": 100.0},
            "sim": {"t_end": 0.5, "seed": 42, "delta0": 0.1, "record_every": 10}}"#,
    )
    .map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        cmd_simulate(&scenario, dir.path(), None).map_err(|e| e.to_string())?;
    }
    let read = |k: usize| std::fs::read(dirs[k].path().join(TRAJECTORY_FILE)).unwrap();
    let identical = read(0) == read(1);

    let topology = reference_topology();
    let params = DroopParams::default().with_gains(100.0, 100.0);
    let coarse = SimConfig {
        delta0: 0.1,
        seed: 1,
        record_every: 1000,
        ..SimConfig::default()
    };
    let fine = SimConfig {
        dt: coarse.dt / 2.0,
        record_every: 2000,
        ..coarse
    };
    let initial = initial_state(&topology, &params, &coarse);
    let a = integrate(&topology, &params, &coarse, &initial).map_err(|e| e.to_string())?;
    let b = integrate(&topology, &params, &fine, &initial).map_err(|e| e.to_string())?;
    let shift = a
        .final_state()
        .delta
        .iter()
        .zip(b.final_state().delta.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let msg = format!("CSV byte-identical: {identical}, dt-halving shift {shift:.2e} rad");
    if identical && shift < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() {
    let (runs, excluded, elapsed) = run_grid();
    let results: Vec<(&str, Outcome)> = vec![
        ("1 oracle equivalence", oracle_equivalence()),
        ("2 equal-line reduction", equal_line_reduction()),
        ("3 power conservation", power_conservation()),
        ("4 spectrum identity", spectrum_identity()),
        ("5 linearization fidelity", linearization_fidelity()),
        ("6 predicate/behaviour agreement", predicate_agreement(&runs, excluded, elapsed)),
        ("7 steady-state law", steady_state_law(&runs)),
        ("8 determinism and convergence", determinism_and_convergence()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
