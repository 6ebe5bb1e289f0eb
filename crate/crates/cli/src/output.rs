//! Result rows and their CSV / JSON encodings.

use std::io::Write;

use anyhow::Result;
use drainet_core::estimators::Params;
use drainet_core::ExperimentReport;
use serde::Serialize;

use crate::config::Format;

/// One output row. Every subcommand uses this schema; fields that do not
/// apply are left empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment: String,
    pub p: f64,
    pub b: f64,
    pub n: u64,
    pub epsilon: f64,
    pub alpha: f64,
    pub estimate: f64,
    pub ci: Option<f64>,
    pub target: Option<String>,
    pub verdict: Option<String>,
    pub samples: u64,
    pub seed: u64,
}

impl Row {
    pub fn from_report(r: &ExperimentReport) -> Row {
        let Params {
            p,
            b,
            n,
            epsilon,
            alpha,
            seed,
        } = r.params;
        Row {
            experiment: r.name.clone(),
            p,
            b,
            n,
            epsilon,
            alpha,
            estimate: r.estimate,
            ci: Some(r.ci_half_width),
            target: Some(r.target.to_string()),
            verdict: Some(r.verdict.to_string()),
            samples: r.samples,
            seed,
        }
    }

    /// A bare measurement, e.g. one knot of a sampled path.
    pub fn value(experiment: &str, params: &Params, estimate: f64, samples: u64) -> Row {
        Row {
            experiment: experiment.to_string(),
            p: params.p,
            b: params.b,
            n: params.n,
            epsilon: params.epsilon,
            alpha: params.alpha,
            estimate,
            ci: None,
            target: None,
            verdict: None,
            samples,
            seed: params.seed,
        }
    }
}

pub fn write_rows(rows: &[Row], format: Format, out: impl Write) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            if rows.is_empty() {
                w.write_record([
                    "experiment",
                    "p",
                    "b",
                    "n",
                    "epsilon",
                    "alpha",
                    "estimate",
                    "ci",
                    "target",
                    "verdict",
                    "samples",
                    "seed",
                ])?;
            }
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use drainet_core::estimators::Target;

    fn report() -> ExperimentReport {
        let params = Params::new(0.5, 1.0, 50, 1.0, 1).unwrap();
        ExperimentReport::judge(
            "coal-slope-k1",
            params,
            -0.5,
            0.01,
            Target::Range { lo: -0.6, hi: -0.4 },
            10,
        )
    }

    #[test]
    fn csv_header_and_quoting() {
        let mut buf = Vec::new();
        write_rows(&[Row::from_report(&report())], Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,p,b,n,epsilon,alpha,estimate,ci,target,verdict,samples,seed"
        );
        assert_eq!(
            lines.next().unwrap(),
            "coal-slope-k1,0.5,1.0,50,0.02,1.0,-0.5,0.01,\"[-0.6,-0.4]\",pass,10,1"
        );
    }

    #[test]
    fn json_has_the_same_fields() {
        let mut buf = Vec::new();
        write_rows(&[Row::from_report(&report())], Format::Json, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        let keys: Vec<&str> = v[0].as_object().unwrap().keys().map(|k| k.as_str()).collect();
        assert_eq!(keys.len(), 12);
        assert_eq!(v[0]["verdict"], "pass");
    }

    #[test]
    fn empty_csv_still_has_a_header() {
        let mut buf = Vec::new();
        write_rows(&[], Format::Csv, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("experiment,p,b,n"));
    }
}
