//! Request and response bodies of the HTTP interface, shared by the server and
//! its client.

use serde::{Deserialize, Serialize};

use crate::control::Axis;
use crate::dynamics::BicopterParams;
use crate::error::{Error, Result};
use crate::harness::scenario::{preset, preset_description, Scenario, PRESET_NAMES};
use crate::harness::sim::run_scenario;
use crate::harness::telemetry::{csv_string, RmseReport};
use crate::tuning::{tune, DesiredCharacteristic, TuneResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresetInfo {
    pub name: String,
    pub description: String,
}

pub fn preset_list() -> Vec<PresetInfo> {
    PRESET_NAMES
        .iter()
        .map(|n| PresetInfo {
            name: n.to_string(),
            description: preset_description(n).unwrap_or_default().to_string(),
        })
        .collect()
}

/// Exactly one of `scenario` and `preset` must be given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
}

impl RunRequest {
    pub fn resolve(&self) -> Result<Scenario> {
        match (&self.scenario, &self.preset) {
            (Some(s), None) => {
                s.validate()?;
                Ok(s.clone())
            }
            (None, Some(name)) => preset(name),
            _ => Err(Error::Scenario(
                "give exactly one of `scenario` and `preset`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResponse {
    pub ticks: usize,
    pub diverged_at: Option<u64>,
    pub report: Option<RmseReport>,
    /// Telemetry in the CSV column layout.
    pub csv: String,
}

pub fn execute_run(req: &RunRequest) -> Result<RunResponse> {
    let scenario = req.resolve()?;
    let out = run_scenario(&scenario)?;
    Ok(RunResponse {
        ticks: out.records.len(),
        diverged_at: out.diverged_at,
        report: out.report,
        csv: csv_string(&out.records),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuneRequest {
    pub axis: Axis,
    pub characteristic: DesiredCharacteristic,
    #[serde(default)]
    pub params: Option<BicopterParams>,
}

pub fn execute_tune(req: &TuneRequest) -> Result<TuneResult> {
    let params = req.params.unwrap_or_default();
    params.validate()?;
    tune(&params, req.axis, &req.characteristic)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_request_needs_exactly_one_source() {
        assert!(RunRequest::default().resolve().is_err());
        let both = RunRequest {
            scenario: Some(preset("testbed-8kn").unwrap()),
            preset: Some("testbed-8kn".into()),
        };
        assert!(both.resolve().is_err());
        let named = RunRequest {
            preset: Some("flight-indoor".into()),
            ..Default::default()
        };
        assert_eq!(
            named.resolve().unwrap().name.as_deref(),
            Some("flight-indoor")
        );
    }

    #[test]
    fn tune_request_wire_format() {
        let req: TuneRequest = serde_json::from_str(
            r#"{"axis":"roll","characteristic":{"kind":"coefficients","c1":331,"c0":1950}}"#,
        )
        .unwrap();
        let r = execute_tune(&req).unwrap();
        assert!((r.kp - 1.0053).abs() < 1e-3);
    }

    #[test]
    fn preset_list_is_complete() {
        let names: Vec<String> = preset_list().into_iter().map(|p| p.name).collect();
        assert_eq!(
            names,
            [
                "testbed-8kn",
                "testbed-9kn",
                "testbed-10kn",
                "flight-indoor"
            ]
        );
    }
}
