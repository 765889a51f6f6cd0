//! Per-tick telemetry rows, the CSV writer and RMSE reporting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attitude::wrap_angle;
use crate::dynamics::SaturationFlags;
use crate::error::{Error, Result};

/// Column order of the telemetry CSV.
pub const CSV_HEADER: [&str; 21] = [
    "k",
    "t",
    "phi_true",
    "theta_true",
    "psi_true",
    "phi_est",
    "theta_est",
    "psi_est",
    "phi_sp",
    "theta_sp",
    "psi_sp",
    "u_roll",
    "u_pitch",
    "u_yaw",
    "u_alt",
    "thr_R",
    "thr_L",
    "srv_R",
    "srv_L",
    "wind_mps",
    "sat_flags",
];

/// One control tick. Angles are in degrees; `u_*` are raw controller outputs
/// (degree-scaled for attitude, throttle fraction for altitude).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub k: u64,
    pub t: f64,
    pub phi_true: f64,
    pub theta_true: f64,
    pub psi_true: f64,
    pub phi_est: f64,
    pub theta_est: f64,
    pub psi_est: f64,
    pub phi_sp: f64,
    pub theta_sp: f64,
    pub psi_sp: f64,
    pub u_roll: f64,
    pub u_pitch: f64,
    pub u_yaw: f64,
    pub u_alt: f64,
    pub thr_r: f64,
    pub thr_l: f64,
    /// Servo angles, degrees.
    pub srv_r: f64,
    pub srv_l: f64,
    pub wind_mps: f64,
    pub sat_flags: SaturationFlags,
    /// NED position, m. Not part of the CSV contract.
    pub position: [f64; 3],
}

fn fixed6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

impl TelemetryRecord {
    pub fn csv_fields(&self) -> [String; 21] {
        [
            self.k.to_string(),
            fixed6(self.t),
            fixed6(self.phi_true),
            fixed6(self.theta_true),
            fixed6(self.psi_true),
            fixed6(self.phi_est),
            fixed6(self.theta_est),
            fixed6(self.psi_est),
            fixed6(self.phi_sp),
            fixed6(self.theta_sp),
            fixed6(self.psi_sp),
            fixed6(self.u_roll),
            fixed6(self.u_pitch),
            fixed6(self.u_yaw),
            fixed6(self.u_alt),
            fixed6(self.thr_r),
            fixed6(self.thr_l),
            fixed6(self.srv_r),
            fixed6(self.srv_l),
            fixed6(self.wind_mps),
            self.sat_flags.0.to_string(),
        ]
    }
}

/// Write the header and one row per record.
pub fn write_csv_to<W: Write>(
    records: &[TelemetryRecord],
    out: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.csv_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[TelemetryRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(records, BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn csv_string(records: &[TelemetryRecord]) -> String {
    let mut buf = Vec::new();
    write_csv_to(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// `√(Σ(xᵢ − rᵢ)² / N)`
pub fn rmse(series: &[f64], reference: &[f64]) -> Result<f64> {
    if series.len() != reference.len() {
        return Err(Error::LengthMismatch(series.len(), reference.len()));
    }
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let sum: f64 = series
        .iter()
        .zip(reference)
        .map(|(x, r)| (x - r).powi(2))
        .sum();
    Ok((sum / series.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxisRmse {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmseWindow {
    /// Seconds, inclusive.
    pub start: f64,
    /// Seconds, inclusive; open-ended when absent.
    #[serde(default)]
    pub end: Option<f64>,
}

impl Default for RmseWindow {
    fn default() -> Self {
        Self {
            start: 0.0,
            end: None,
        }
    }
}

impl RmseWindow {
    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && self.end.is_none_or(|e| t <= e)
    }
}

/// True attitude against setpoint over a time window, degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub rmse_deg: AxisRmse,
    pub window: RmseWindow,
    pub samples: usize,
    pub preset: Option<String>,
    pub seed: u64,
}

impl RmseReport {
    pub fn from_records(
        records: &[TelemetryRecord],
        window: RmseWindow,
        preset: Option<String>,
        seed: u64,
    ) -> Result<Self> {
        let rows: Vec<&TelemetryRecord> = records.iter().filter(|r| window.contains(r.t)).collect();
        let axis = |f: &dyn Fn(&TelemetryRecord) -> f64| -> Result<f64> {
            let errors: Vec<f64> = rows.iter().map(|r| f(r)).collect();
            rmse(&errors, &vec![0.0; errors.len()])
        };
        let rmse_deg = AxisRmse {
            roll: axis(&|r| r.phi_true - r.phi_sp)?,
            pitch: axis(&|r| r.theta_true - r.theta_sp)?,
            yaw: axis(&|r| wrap_angle((r.psi_true - r.psi_sp).to_radians()).to_degrees())?,
        };
        Ok(Self {
            rmse_deg,
            window,
            samples: rows.len(),
            preset,
            seed,
        })
    }
}
