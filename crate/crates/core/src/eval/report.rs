use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const REPORT_FORMAT: &str = "swinfreq-report";
pub const REPORT_VERSION: u32 = 1;

/// One method's curve over the report's x grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub method: String,
    pub y: Vec<f64>,
    /// Successful trials behind every point.
    pub trials: Vec<usize>,
    /// Trials on which the method returned an error.
    pub failures: Vec<usize>,
}

/// Result of a Monte Carlo experiment, self-describing enough to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub version: u32,
    pub experiment: String,
    pub x_label: String,
    pub x: Vec<f64>,
    pub curves: Vec<Curve>,
    pub config: serde_json::Value,
    pub seed: u64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, x_label: &str, x: Vec<f64>, config: serde_json::Value, seed: u64) -> Self {
        Self {
            format: REPORT_FORMAT.into(),
            version: REPORT_VERSION,
            experiment: experiment.into(),
            x_label: x_label.into(),
            x,
            curves: Vec::new(),
            config,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.curves {
            if c.y.len() != self.x.len() || c.trials.len() != self.x.len() || c.failures.len() != self.x.len() {
                return Err(Error::shape("report", format!("curve '{}' does not match the x grid", c.method)));
            }
        }
        Ok(())
    }

    pub fn curve(&self, method: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.method == method)
    }

    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.format != REPORT_FORMAT {
            return Err(Error::invalid(format!("not a report (format `{}`)", r.format)));
        }
        if r.version != REPORT_VERSION {
            return Err(Error::Version { expected: REPORT_VERSION, found: r.version });
        }
        r.validate()?;
        Ok(r)
    }

    /// Header `x_label,method...`, then one row per x value.
    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        out.push_str(&self.x_label);
        for c in &self.curves {
            write!(out, ",{}", c.method).unwrap();
        }
        out.push('\n');
        for (i, x) in self.x.iter().enumerate() {
            write!(out, "{x}").unwrap();
            for c in &self.curves {
                write!(out, ",{}", c.y[i]).unwrap();
            }
            out.push('\n');
        }
        Ok(out)
    }

    /// Write `<stem>.json` and `<stem>.csv`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let json = self.to_json()?;
        let csv = self.to_csv()?;
        crate::fsutil::write_atomic(&stem.with_extension("json"), |w| Ok(w.write_all(json.as_bytes())?))?;
        crate::fsutil::write_atomic(&stem.with_extension("csv"), |w| Ok(w.write_all(csv.as_bytes())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentReport {
        let mut r = ExperimentReport::new("demo", "snr_db", vec![0.0, 10.0], serde_json::json!({"n": 64}), 7);
        r.curves.push(Curve { method: "a".into(), y: vec![1.5, 2.0], trials: vec![3, 3], failures: vec![0, 0] });
        r.curves.push(Curve { method: "b".into(), y: vec![0.25, -1.0], trials: vec![3, 2], failures: vec![0, 1] });
        r
    }

    #[test]
    fn csv_layout() {
        assert_eq!(sample().to_csv().unwrap(), "snr_db,a,b\n0,1.5,0.25\n10,2,-1\n");
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        assert_eq!(ExperimentReport::from_json(&r.to_json().unwrap()).unwrap(), r);
    }

    #[test]
    fn ragged_curve_is_rejected() {
        let mut r = sample();
        r.curves[0].y.pop();
        assert!(r.to_csv().is_err());
    }
}
