//! Two-parameter grid sweeps of the stability predicate, optionally
//! checked against closed-loop simulation at every grid point.

use std::io::Write;
use std::path::Path;

use hybridsync_core::{
    eta_coefficients, initial_state, integrate, stability_verdict, EqualLineModel, SimConfig,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::fmt_f64;
use crate::scenario::{parse_json, AdmittanceSpec, Lines, Scenario, ScenarioFile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "m")]
    M,
    #[serde(rename = "k_phi")]
    KPhi,
    #[serde(rename = "N")]
    NStrings,
    #[serde(rename = "M")]
    Modules,
    #[serde(rename = "line_magnitude")]
    LineMagnitude,
    #[serde(rename = "line_angle")]
    LineAngle,
    #[serde(rename = "load_magnitude")]
    LoadMagnitude,
    #[serde(rename = "load_angle")]
    LoadAngle,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::M => "m",
            SweepParam::KPhi => "k_phi",
            SweepParam::NStrings => "N",
            SweepParam::Modules => "M",
            SweepParam::LineMagnitude => "line_magnitude",
            SweepParam::LineAngle => "line_angle",
            SweepParam::LoadMagnitude => "load_magnitude",
            SweepParam::LoadAngle => "load_angle",
        }
    }

    fn is_count(self) -> bool {
        matches!(self, SweepParam::NStrings | SweepParam::Modules)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: SweepParam,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    /// `steps` evenly spaced values from `min` to `max` inclusive. Count
    /// parameters are rounded to the nearest integer.
    pub fn values(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|k| {
                let v = if k == last {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / last as f64
                };
                if self.parameter.is_count() {
                    v.round()
                } else {
                    v
                }
            })
            .collect()
    }

    fn validate(&self, label: &str) -> Result<()> {
        if self.steps < 2 {
            return Err(CliError::Validation(format!("{label}: steps must be ≥ 2")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(CliError::Validation(format!("{label}: min and max must be finite")));
        }
        if self.parameter.is_count() && self.min.min(self.max).round() < 1.0 {
            return Err(CliError::Validation(format!(
                "{label}: {} must stay ≥ 1",
                self.parameter.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepMode {
    #[default]
    AnalyticOnly,
    WithSimulation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub axis1: Axis,
    pub axis2: Axis,
    pub fixed: ScenarioFile,
    #[serde(default)]
    pub mode: SweepMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Axis,
    pub fixed: Scenario,
    pub mode: SweepMode,
}

impl SweepSpec {
    pub fn validate(file: SweepFile) -> Result<Self> {
        file.axis1.validate("axis1")?;
        file.axis2.validate("axis2")?;
        if file.axis1.parameter == file.axis2.parameter {
            return Err(CliError::Validation("axis1 and axis2 must sweep different parameters".into()));
        }
        let fixed = Scenario::validate(file.fixed)?;
        let sweeps_n = [file.axis1.parameter, file.axis2.parameter].contains(&SweepParam::NStrings);
        if sweeps_n && matches!(fixed.lines, Lines::PerString(_)) {
            return Err(CliError::Validation(
                "sweeping N requires a single `line` admittance in the fixed scenario".into(),
            ));
        }
        Ok(SweepSpec {
            axis1: file.axis1,
            axis2: file.axis2,
            fixed,
            mode: file.mode,
        })
    }
}

pub fn parse_sweep(text: &str) -> Result<SweepSpec> {
    SweepSpec::validate(parse_json(text)?)
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_sweep(&text)
}

/// One grid point. Analytic fields are `None` when the point itself is
/// invalid; `error` then says why.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value1: f64,
    pub value2: f64,
    pub lambda_p: Option<f64>,
    pub lambda_c: Option<f64>,
    pub stable: Option<bool>,
    pub synchronized: Option<bool>,
    pub sync_time: Option<f64>,
    pub error: Option<String>,
}

fn with_polar(spec: AdmittanceSpec, magnitude: Option<f64>, angle: Option<f64>) -> AdmittanceSpec {
    let (mag, ang) = spec.polar();
    AdmittanceSpec::Polar {
        mag: magnitude.unwrap_or(mag),
        ang: angle.unwrap_or(ang),
    }
}

fn apply(scenario: &Scenario, param: SweepParam, value: f64) -> Scenario {
    let mut s = scenario.clone();
    let map_lines = |lines: &Lines, f: &dyn Fn(AdmittanceSpec) -> AdmittanceSpec| match lines {
        Lines::Equal(y) => Lines::Equal(f(*y)),
        Lines::PerString(ys) => Lines::PerString(ys.iter().map(|y| f(*y)).collect()),
    };
    match param {
        SweepParam::M => s.droop.m = value,
        SweepParam::KPhi => s.droop.k_phi = value,
        SweepParam::NStrings => s.n_strings = value as usize,
        SweepParam::Modules => s.modules_per_string = value as usize,
        SweepParam::LineMagnitude => s.lines = map_lines(&s.lines, &|y| with_polar(y, Some(value), None)),
        SweepParam::LineAngle => s.lines = map_lines(&s.lines, &|y| with_polar(y, None, Some(value))),
        SweepParam::LoadMagnitude => s.load = with_polar(s.load, Some(value), None),
        SweepParam::LoadAngle => s.load = with_polar(s.load, None, Some(value)),
    }
    s
}

fn evaluate(spec: &SweepSpec, value1: f64, value2: f64) -> SweepRow {
    let mut row = SweepRow {
        value1,
        value2,
        lambda_p: None,
        lambda_c: None,
        stable: None,
        synchronized: None,
        sync_time: None,
        error: None,
    };
    let point = apply(&apply(&spec.fixed, spec.axis1.parameter, value1), spec.axis2.parameter, value2);
    let result = (|| -> Result<()> {
        let scenario = Scenario::validate(point.to_file())?;
        let topology = scenario.topology()?;
        let (n, m) = (topology.n_strings(), topology.modules_per_string());
        let model = EqualLineModel::from_topology(&topology)?;
        let eta = eta_coefficients(&model, scenario.droop.v_ref, n, m)?;
        let verdict = stability_verdict(&eta, scenario.droop.m, scenario.droop.k_phi, n);
        row.lambda_p = Some(verdict.lambda_p);
        row.lambda_c = Some(verdict.lambda_c);
        row.stable = Some(verdict.stable);

        if spec.mode == SweepMode::WithSimulation {
            let config = SimConfig {
                record_every: scenario.sim.steps(),
                ..scenario.sim
            };
            let initial = initial_state(&topology, &scenario.droop, &config);
            let trajectory = integrate(&topology, &scenario.droop, &config, &initial)?;
            row.synchronized = Some(trajectory.synchronized);
            row.sync_time = trajectory.sync_time;
        }
        Ok(())
    })();
    if let Err(err) = result {
        row.error = Some(err.to_string());
    }
    row
}

/// Evaluates every grid point, `axis1` outer and `axis2` inner, on at most
/// `jobs` threads (default: all available). Row order does not depend on
/// scheduling.
pub fn cmd_sweep(spec: &SweepSpec, jobs: Option<usize>) -> Result<Vec<SweepRow>> {
    let points: Vec<(f64, f64)> = spec
        .axis1
        .values()
        .into_iter()
        .flat_map(|a| spec.axis2.values().into_iter().map(move |b| (a, b)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = jobs {
        if jobs == 0 {
            return Err(CliError::Validation("--jobs must be ≥ 1".into()));
        }
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| points.par_iter().map(|&(a, b)| evaluate(spec, a, b)).collect()))
}

pub fn sweep_header(spec: &SweepSpec) -> Vec<String> {
    let mut header = vec![
        spec.axis1.parameter.name().to_string(),
        spec.axis2.parameter.name().to_string(),
        "lambda_p".into(),
        "lambda_c".into(),
        "stable".into(),
    ];
    if spec.mode == SweepMode::WithSimulation {
        header.push("synchronized".into());
        header.push("sync_time".into());
    }
    header.push("error".into());
    header
}

pub fn write_sweep_csv<W: Write>(writer: W, spec: &SweepSpec, rows: &[SweepRow]) -> Result<()> {
    let opt_f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let opt_b = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    let axis = |param: SweepParam, v: f64| if param.is_count() { format!("{}", v as usize) } else { fmt_f64(v) };
    let map_err = |e: csv::Error| CliError::Numerical(format!("writing sweep: {e}"));

    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(sweep_header(spec)).map_err(map_err)?;
    for row in rows {
        let mut record = vec![
            axis(spec.axis1.parameter, row.value1),
            axis(spec.axis2.parameter, row.value2),
            opt_f(row.lambda_p),
            opt_f(row.lambda_c),
            opt_b(row.stable),
        ];
        if spec.mode == SweepMode::WithSimulation {
            record.push(opt_b(row.synchronized));
            record.push(opt_f(row.sync_time));
        }
        record.push(row.error.clone().unwrap_or_default());
        csv.write_record(&record).map_err(map_err)?;
    }
    csv.flush().map_err(|e| CliError::io("<sweep>", e))?;
    Ok(())
}
