//! `simulate` and `analyze`.

use std::fs;
use std::io::Write;
use std::path::Path;

use hybridsync_core::stability::{SPECTRUM_ABS_TOL, SPECTRUM_REL_TOL};
use hybridsync_core::{analyze, initial_state, integrate, DroopParams, EqualLineModel, Frame, StabilityReport, Trajectory};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::fmt_f64;
use crate::scenario::Scenario;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Column names of the trajectory CSV: `t`, then `delta_i_j`, `p_i_j`,
/// `q_i_j`, `phi_i_j` and `omega_i_j` blocks, each row-major with 1-based
/// string index `i` and module index `j`.
pub fn trajectory_header(n_strings: usize, modules: usize) -> Vec<String> {
    let mut header = vec!["t".to_string()];
    for prefix in ["delta", "p", "q", "phi", "omega"] {
        for i in 1..=n_strings {
            for j in 1..=modules {
                header.push(format!("{prefix}_{i}_{j}"));
            }
        }
    }
    header
}

pub fn write_trajectory_csv<W: Write>(writer: W, trajectory: &Trajectory) -> Result<()> {
    let state = trajectory.final_state();
    let (n, m) = (state.n_strings(), state.modules_per_string());
    let mut csv = csv::Writer::from_writer(writer);
    let map_err = |e: csv::Error| CliError::Numerical(format!("writing trajectory: {e}"));
    csv.write_record(trajectory_header(n, m)).map_err(map_err)?;
    let mut record: Vec<String> = Vec::with_capacity(1 + 5 * n * m);
    for (k, t) in trajectory.times.iter().enumerate() {
        record.clear();
        record.push(fmt_f64(*t));
        let powers = &trajectory.powers[k];
        record.extend(trajectory.states[k].delta.iter().map(|v| fmt_f64(*v)));
        record.extend(powers.iter().map(|r| fmt_f64(r.p)));
        record.extend(powers.iter().map(|r| fmt_f64(r.q)));
        record.extend(powers.iter().map(|r| fmt_f64(r.phi)));
        record.extend(trajectory.frequencies[k].iter().map(|v| fmt_f64(*v)));
        csv.write_record(&record).map_err(map_err)?;
    }
    csv.flush().map_err(|e| CliError::io("<trajectory>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub synchronized: bool,
    pub sync_time: Option<f64>,
    /// Max pairwise angle difference at `t_end`, rad.
    pub final_sync_metric: f64,
    /// Spread of `m P + k_phi phi` across modules at `t_end`.
    pub steady_state_spread: f64,
    /// Mean `omega - omega*` at `t_end`, rad/s.
    pub frequency_deviation: f64,
    pub seed: u64,
    pub frame: Frame,
    pub steps: usize,
    pub n_strings: usize,
    pub modules_per_string: usize,
}

pub fn summarize(trajectory: &Trajectory, params: &DroopParams, scenario: &Scenario, seed: u64) -> SimulationSummary {
    SimulationSummary {
        synchronized: trajectory.synchronized,
        sync_time: trajectory.sync_time,
        final_sync_metric: trajectory.final_sync_metric,
        steady_state_spread: trajectory.steady_state_spread(params),
        frequency_deviation: trajectory.final_frequency_deviation(params),
        seed,
        frame: trajectory.frame,
        steps: scenario.sim.steps(),
        n_strings: scenario.n_strings,
        modules_per_string: scenario.modules_per_string,
    }
}

/// Runs the scenario (optionally with a different seed) and returns the
/// trajectory and its summary.
pub fn run_simulation(scenario: &Scenario, seed: Option<u64>) -> Result<(Trajectory, SimulationSummary)> {
    let topology = scenario.topology()?;
    let mut config = scenario.sim;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let initial = initial_state(&topology, &scenario.droop, &config);
    let trajectory = integrate(&topology, &scenario.droop, &config, &initial)?;
    let summary = summarize(&trajectory, &scenario.droop, scenario, config.seed);
    Ok((trajectory, summary))
}

/// Writes `trajectory.csv` and `summary.json` into `out_dir`.
pub fn cmd_simulate(scenario: &Scenario, out_dir: &Path, seed: Option<u64>) -> Result<SimulationSummary> {
    let (trajectory, summary) = run_simulation(scenario, seed)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;

    let csv_path = out_dir.join(TRAJECTORY_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_trajectory_csv(std::io::BufWriter::new(file), &trajectory)?;

    let summary_path = out_dir.join(SUMMARY_FILE);
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&summary_path, json + "\n").map_err(|e| CliError::io(&summary_path, e))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutput {
    #[serde(flatten)]
    pub report: StabilityReport,
    pub y_eq_magnitude: f64,
    pub y_eq_angle: f64,
    pub spectrum_rel_tol: f64,
    pub spectrum_abs_tol: f64,
}

/// Stability analysis of an equal-line scenario. Heterogeneous lines are
/// rejected; the analysis only covers identical strings.
pub fn cmd_analyze(scenario: &Scenario) -> Result<AnalysisOutput> {
    let topology = scenario.topology()?;
    let model = EqualLineModel::from_topology(&topology)?;
    let report = analyze(&topology, &scenario.droop)?;
    Ok(AnalysisOutput {
        report,
        y_eq_magnitude: model.y_eq.magnitude(),
        y_eq_angle: model.y_eq.angle(),
        spectrum_rel_tol: SPECTRUM_REL_TOL,
        spectrum_abs_tol: SPECTRUM_ABS_TOL,
    })
}

pub fn render_analysis(output: &AnalysisOutput) -> String {
    serde_json::to_string_pretty(output).expect("report serializes") + "\n"
}

/// The analysis output is self-checking: disagreeing spectra are an error.
pub fn check_spectra(output: &AnalysisOutput) -> Result<()> {
    if output.report.spectra_agree {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "closed-form and numerical spectra disagree by {:e}",
            output.report.max_spectrum_discrepancy
        )))
    }
}
