//! Trace files: one CSV of per-iteration records plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::lyapunov::LyapunovRecord;
use crate::solvers::AlgorithmId;
use crate::tuning::{Constants, RateBound, Regime, StepSizes};

use super::BenchError;

pub const CSV_HEADER: [&str; 5] = ["iter", "lyapunov", "envelope", "kkt", "wall_ns"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    /// The regime's default stepsize rule.
    Corollary,
    /// `mu_g = 0`: the rule evaluated with a surrogate modulus; feasible but
    /// without a linear rate.
    Fallback,
    /// Stepsizes for a non-accelerated baseline.
    Baseline,
    /// User overrides from the config.
    Override,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub algorithm: AlgorithmId,
    pub regime: Regime,
    pub seed: u64,
    pub iterations: u64,
    pub stepsizes: StepSizes,
    pub step_source: StepSource,
    pub theta: Option<RateBound>,
    pub no_linear_rate: bool,
    pub constants: Constants,
    pub reference_kkt: f64,
    /// Lyapunov values below this are rounding noise; envelope violations
    /// are only counted above it.
    pub evaluation_floor: f64,
    pub final_kkt: f64,
    pub envelope_violations: Option<usize>,
    /// Generator constants are harness choices, not values from the method's
    /// analysis.
    pub artifact_choices: bool,
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub meta: TraceMeta,
    pub records: Vec<LyapunovRecord>,
}

#[derive(Serialize)]
struct Row {
    iter: u64,
    lyapunov: Option<f64>,
    envelope: Option<f64>,
    kkt: f64,
    wall_ns: u64,
}

impl TraceFile {
    pub fn stem(&self) -> String {
        format!("{}_seed{}_{}", self.meta.regime, self.meta.seed, self.meta.algorithm)
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let io = |e: csv::Error| BenchError::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.records {
            w.serialize(Row {
                iter: r.k,
                lyapunov: r.value,
                envelope: r.envelope,
                kkt: r.kkt,
                wall_ns: r.wall_ns,
            })
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`; returns the CSV path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, BenchError> {
        let io = |e: std::io::Error| BenchError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let csv_path = dir.join(format!("{}.csv", self.stem()));
        fs::write(&csv_path, self.to_csv()?).map_err(io)?;
        let mut json = self.meta_json();
        json.push('\n');
        fs::write(dir.join(format!("{}.json", self.stem())), json).map_err(io)?;
        Ok(csv_path)
    }
}

/// Parses a trace CSV back into records.
pub fn read_csv(text: &str) -> Result<Vec<LyapunovRecord>, BenchError> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let headers = rd.headers().map_err(|e| BenchError::Io(e.to_string()))?;
    if headers.iter().ne(CSV_HEADER) {
        return Err(BenchError::Io(format!("unexpected trace header {headers:?}")));
    }
    let opt = |s: &str| -> Result<Option<f64>, BenchError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|e| BenchError::Io(format!("{s:?}: {e}")))
        }
    };
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| BenchError::Io(e.to_string()))?;
        let num = |i: usize| rec.get(i).unwrap_or("");
        out.push(LyapunovRecord {
            k: num(0).parse().map_err(|e| BenchError::Io(format!("iter: {e}")))?,
            value: opt(num(1))?,
            envelope: opt(num(2))?,
            kkt: opt(num(3))?.unwrap_or(f64::NAN),
            wall_ns: num(4).parse().map_err(|e| BenchError::Io(format!("wall_ns: {e}")))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TraceFile {
        TraceFile {
            meta: TraceMeta {
                algorithm: AlgorithmId::Acv1,
                regime: Regime::SmoothH,
                seed: 4,
                iterations: 2,
                stepsizes: StepSizes::primal_dual(0.5, 0.25, 0.125, Regime::SmoothH),
                step_source: StepSource::Corollary,
                theta: None,
                no_linear_rate: false,
                constants: Constants::default(),
                reference_kkt: 1e-13,
                evaluation_floor: 1e-28,
                final_kkt: 1e-3,
                envelope_violations: Some(0),
                artifact_choices: true,
                timing: false,
            },
            records: (0..3)
                .map(|k| LyapunovRecord {
                    k,
                    value: (k != 1).then_some(0.1 / (k + 1) as f64),
                    envelope: None,
                    kkt: 1.0 / 3.0,
                    wall_ns: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let t = sample();
        let text = t.to_csv().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,lyapunov,envelope,kkt,wall_ns"));
        assert_eq!(lines.next(), Some("0,0.1,,0.3333333333333333,0"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(read_csv(&text).unwrap(), t.records);
        assert_eq!(t.stem(), "smooth_h_seed4_ACV1");
    }

    #[test]
    fn write_creates_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = sample().write(dir.path()).unwrap();
        assert!(path.exists());
        let meta: TraceMeta =
            serde_json::from_str(&fs::read_to_string(dir.path().join("smooth_h_seed4_ACV1.json")).unwrap()).unwrap();
        assert_eq!(meta, sample().meta);
    }
}
