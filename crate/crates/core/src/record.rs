//! Trajectory records, run results, and their on-disk formats.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::design::DesignVector;

/// One cost evaluation at a (possibly perturbed) design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub theta: Vec<f64>,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    /// Design in force during iteration `k`.
    pub theta: DesignVector,
    /// `None` when the estimate was non-finite and the iteration skipped.
    pub gradient_norm: Option<f64>,
    pub f_evals: Vec<Evaluation>,
    /// Realized performance attributed to this iteration.
    pub objective: f64,
    pub cumulative_env_steps: u64,
    pub cumulative_queries: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub design_labels: Vec<String>,
    pub records: Vec<IterationRecord>,
    pub final_theta: DesignVector,
    pub total_env_steps: u64,
    pub total_queries: u64,
}

impl RunResult {
    pub fn empty(design_labels: Vec<String>, theta: DesignVector) -> Self {
        Self {
            design_labels,
            records: Vec::new(),
            final_theta: theta,
            total_env_steps: 0,
            total_queries: 0,
        }
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.total_env_steps = record.cumulative_env_steps;
        self.total_queries = record.cumulative_queries;
        self.records.push(record);
    }

    /// One JSON object per record.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<IterationRecord>> {
        let mut records = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(io::Error::other)?);
        }
        Ok(records)
    }

    /// CSV with columns `iteration, cumulative_queries, theta_<label>...,
    /// objective_running_mean, raw_objective`.
    pub fn write_csv<W: Write>(&self, out: W, window: usize) -> csv::Result<()> {
        let curve = emit_query_curve(self, window);
        let mut w = csv::Writer::from_writer(out);
        w.write_record(csv_header(&self.design_labels))?;
        for (r, point) in self.records.iter().zip(&curve) {
            let mut row = vec![r.k.to_string(), r.cumulative_queries.to_string()];
            row.extend(r.theta.as_slice().iter().map(|v| v.to_string()));
            row.push(point.objective.to_string());
            row.push(r.objective.to_string());
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn csv_header(design_labels: &[String]) -> Vec<String> {
    let mut header = vec!["iteration".to_string(), "cumulative_queries".to_string()];
    header.extend(design_labels.iter().map(|l| {
        if l.starts_with("theta_") {
            l.clone()
        } else {
            format!("theta_{l}")
        }
    }));
    header.push("objective_running_mean".into());
    header.push("raw_objective".into());
    header
}

pub const DEFAULT_CURVE_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub cumulative_queries: u64,
    pub objective: f64,
}

/// Objective against cumulative model queries, smoothed by a trailing mean
/// over the last `window` iterations.
pub fn emit_query_curve(result: &RunResult, window: usize) -> Vec<CurvePoint> {
    let window = window.max(1);
    let objectives: Vec<f64> = result.records.iter().map(|r| r.objective).collect();
    result
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let lo = (i + 1).saturating_sub(window);
            let tail = &objectives[lo..=i];
            CurvePoint {
                cumulative_queries: r.cumulative_queries,
                objective: tail.iter().sum::<f64>() / tail.len() as f64,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(k: u64, objective: f64, queries: u64) -> IterationRecord {
        IterationRecord {
            k,
            theta: DesignVector::new(vec![0.25, 0.5]).unwrap(),
            gradient_norm: Some(1.0),
            f_evals: vec![],
            objective,
            cumulative_env_steps: queries / 3,
            cumulative_queries: queries,
            seed: 1,
            skipped: false,
            weight: None,
        }
    }

    fn result(records: Vec<IterationRecord>) -> RunResult {
        let mut r = RunResult::empty(
            vec!["tax".into(), "subsidy".into()],
            DesignVector::zeros(2),
        );
        for rec in records {
            r.push(rec);
        }
        r
    }

    #[test]
    fn single_record_gives_single_point() {
        let c = emit_query_curve(&result(vec![record(0, 2.0, 9)]), 10);
        assert_eq!(c, vec![CurvePoint { cumulative_queries: 9, objective: 2.0 }]);
    }

    #[test]
    fn constant_objective_gives_flat_curve() {
        let recs = (0..20).map(|k| record(k, 3.5, 9 * (k + 1))).collect();
        assert!(emit_query_curve(&result(recs), 4).iter().all(|p| p.objective == 3.5));
    }

    #[test]
    fn running_mean_uses_trailing_window() {
        let recs = (0..4).map(|k| record(k, k as f64, 9 * (k + 1))).collect();
        let c = emit_query_curve(&result(recs), 2);
        let ys: Vec<f64> = c.iter().map(|p| p.objective).collect();
        assert_eq!(ys, vec![0.0, 0.5, 1.5, 2.5]);
    }

    #[test]
    fn csv_header_is_stable() {
        let mut buf = Vec::new();
        result(vec![record(0, 1.0, 9)]).write_csv(&mut buf, 10).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "iteration,cumulative_queries,theta_tax,theta_subsidy,objective_running_mean,raw_objective\n\
             0,9,0.25,0.5,1,1\n"
        );
    }

    #[test]
    fn jsonl_reads_back() {
        let r = result(vec![record(0, 1.0, 9), record(1, 2.0, 18)]);
        let text = r.to_jsonl_string();
        assert_eq!(text.lines().count(), 2);
        let back = RunResult::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, r.records);
    }
}
