//! Scenario files: topology, droop gains and simulation settings as JSON.
//!
//! ```json
//! {
//!   "N": 2, "M": 2,
//!   "line": { "mag": 1.0, "ang": -1.2 },
//!   "load": { "re": 1.0, "im": 0.0 },
//!   "droop": { "m": 100.0, "k_phi": 100.0 },
//!   "sim":   { "t_end": 1.0, "seed": 7 }
//! }
//! ```
//!
//! `line` gives every string the same admittance; `lines` lists one per
//! string instead. Admittances are polar (`mag`, `ang` in radians) or
//! rectangular (`re`, `im`). `droop` and `sim` and all their fields are
//! optional and default to [`DroopParams::default`] and [`SimConfig::default`].

use std::path::Path;

use hybridsync_core::{Admittance, DroopParams, GridTopology, SimConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Largest accepted `N * M`.
pub const MAX_MODULES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAdmittance", into = "RawAdmittance")]
pub enum AdmittanceSpec {
    Polar { mag: f64, ang: f64 },
    Rect { re: f64, im: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmittance {
    #[serde(skip_serializing_if = "Option::is_none")]
    mag: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ang: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    im: Option<f64>,
}

impl TryFrom<RawAdmittance> for AdmittanceSpec {
    type Error = String;

    fn try_from(raw: RawAdmittance) -> std::result::Result<Self, String> {
        match raw {
            RawAdmittance {
                mag: Some(mag),
                ang,
                re: None,
                im: None,
            } => Ok(AdmittanceSpec::Polar {
                mag,
                ang: ang.unwrap_or(0.0),
            }),
            RawAdmittance {
                mag: None,
                ang: None,
                re: Some(re),
                im,
            } => Ok(AdmittanceSpec::Rect {
                re,
                im: im.unwrap_or(0.0),
            }),
            _ => Err("admittance needs either `mag` (and optional `ang`) or `re` (and optional `im`)".into()),
        }
    }
}

impl From<AdmittanceSpec> for RawAdmittance {
    fn from(spec: AdmittanceSpec) -> Self {
        match spec {
            AdmittanceSpec::Polar { mag, ang } => RawAdmittance {
                mag: Some(mag),
                ang: Some(ang),
                re: None,
                im: None,
            },
            AdmittanceSpec::Rect { re, im } => RawAdmittance {
                mag: None,
                ang: None,
                re: Some(re),
                im: Some(im),
            },
        }
    }
}

impl AdmittanceSpec {
    pub fn to_admittance(self) -> Admittance {
        match self {
            AdmittanceSpec::Polar { mag, ang } => Admittance::from_polar(mag, ang),
            AdmittanceSpec::Rect { re, im } => Admittance::from_rect(re, im),
        }
    }

    /// `(magnitude, angle)`, exact for polar specs.
    pub fn polar(self) -> (f64, f64) {
        match self {
            AdmittanceSpec::Polar { mag, ang } => (mag, ang),
            AdmittanceSpec::Rect { .. } => {
                let y = self.to_admittance();
                (y.magnitude(), y.angle())
            }
        }
    }

    fn check_magnitude(self, what: &str) -> Result<()> {
        if let AdmittanceSpec::Polar { mag, ang } = self {
            if !(mag.is_finite() && mag >= 0.0) || !ang.is_finite() {
                return Err(CliError::Validation(format!(
                    "{what}: magnitude must be finite and ≥ 0 and the angle finite"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lines {
    Equal(AdmittanceSpec),
    PerString(Vec<AdmittanceSpec>),
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_strings: usize,
    pub modules_per_string: usize,
    pub lines: Lines,
    pub load: AdmittanceSpec,
    pub droop: DroopParams,
    pub sim: SimConfig,
}

/// On-disk layout, before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(rename = "N")]
    pub n_strings: usize,
    #[serde(rename = "M")]
    pub modules_per_string: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<AdmittanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lines: Option<Vec<AdmittanceSpec>>,
    pub load: AdmittanceSpec,
    #[serde(default)]
    pub droop: DroopParams,
    #[serde(default)]
    pub sim: SimConfig,
}

impl Scenario {
    pub fn validate(file: ScenarioFile) -> Result<Scenario> {
        let n = file.n_strings;
        let m = file.modules_per_string;
        if n < 1 {
            return Err(CliError::Validation("n_strings must be ≥ 1".into()));
        }
        if m < 1 {
            return Err(CliError::Validation("modules_per_string must be ≥ 1".into()));
        }
        if n.saturating_mul(m) > MAX_MODULES {
            return Err(CliError::Validation(format!(
                "resource limit: N·M = {} exceeds the maximum of {MAX_MODULES} modules",
                n.saturating_mul(m)
            )));
        }
        let lines = match (file.line, file.lines) {
            (Some(line), None) => Lines::Equal(line),
            (None, Some(lines)) => {
                if lines.len() != n {
                    return Err(CliError::Validation(format!(
                        "`lines` lists {} admittances but N = {n}",
                        lines.len()
                    )));
                }
                Lines::PerString(lines)
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Validation("give either `line` or `lines`, not both".into()))
            }
            (None, None) => {
                return Err(CliError::Validation("missing string admittance: give `line` or `lines`".into()))
            }
        };
        let scenario = Scenario {
            n_strings: n,
            modules_per_string: m,
            lines,
            load: file.load,
            droop: file.droop.validate()?,
            sim: file.sim.validate()?,
        };
        scenario.topology()?;
        Ok(scenario)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let (line, lines) = match &self.lines {
            Lines::Equal(y) => (Some(*y), None),
            Lines::PerString(ys) => (None, Some(ys.clone())),
        };
        ScenarioFile {
            n_strings: self.n_strings,
            modules_per_string: self.modules_per_string,
            line,
            lines,
            load: self.load,
            droop: self.droop,
            sim: self.sim,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn line_specs(&self) -> Vec<AdmittanceSpec> {
        match &self.lines {
            Lines::Equal(y) => vec![*y; self.n_strings],
            Lines::PerString(ys) => ys.clone(),
        }
    }

    pub fn topology(&self) -> Result<GridTopology> {
        let specs = self.line_specs();
        for (i, y) in specs.iter().enumerate() {
            y.check_magnitude(&format!("string {} line", i + 1))?;
        }
        self.load.check_magnitude("load")?;
        Ok(GridTopology::new(
            self.modules_per_string,
            specs.into_iter().map(AdmittanceSpec::to_admittance).collect(),
            self.load.to_admittance(),
        )?)
    }
}

/// Parses JSON text with field-path context on errors.
pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(&mut de).map_err(CliError::parse)?;
    de.end().map_err(|e| CliError::Parse {
        field: "<root>".into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    Ok(value)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    Scenario::validate(parse_json(text)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_scenario(&text)
}
