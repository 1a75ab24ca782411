//! Bound verification over trace files.
//!
//! Deterministic envelopes are checked at every iteration. The stochastic
//! and directional guarantees are statements about the distribution of runs,
//! so they are checked once per batch of traces that share a configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use mirror_triangles::stochastic::batch_size;

use crate::trace_file::{Loaded, SCHEMA};

/// Per-iteration tolerance on the deterministic envelopes.
pub const TOLERANCE: f64 = 1e-9;
/// Two-sided normal 95% quantile used by the batch criteria.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    /// A bound the trace cannot establish (missing fields, or a claim that
    /// needs more runs). Counts against the exit status.
    Unverifiable,
    /// Reported for context, not a criterion (a single run of a
    /// high-probability bound).
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub source: String,
    pub check: &'static str,
    pub k: Option<usize>,
    pub observed: Option<f64>,
    pub envelope: Option<f64>,
    pub tolerance: f64,
    /// `envelope + tolerance - observed`; negative on failure.
    pub margin: Option<f64>,
    pub outcome: Outcome,
    pub note: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.outcome, Outcome::Pass | Outcome::Info))
    }

    pub fn count(&self, outcome: Outcome) -> usize {
        self.rows.iter().filter(|r| r.outcome == outcome).count()
    }

    fn compare(&mut self, source: &str, check: &'static str, k: Option<usize>, observed: f64, envelope: f64, tolerance: f64) {
        let margin = envelope + tolerance - observed;
        self.rows.push(ReportRow {
            source: source.into(),
            check,
            k,
            observed: Some(observed),
            envelope: Some(envelope),
            tolerance,
            margin: Some(margin),
            outcome: if margin >= 0.0 { Outcome::Pass } else { Outcome::Fail },
            note: String::new(),
        });
    }

    fn flag(&mut self, source: &str, check: &'static str, outcome: Outcome, note: impl Into<String>) {
        self.rows.push(ReportRow {
            source: source.into(),
            check,
            k: None,
            observed: None,
            envelope: None,
            tolerance: 0.0,
            margin: None,
            outcome,
            note: note.into(),
        });
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,check,k,observed,envelope,tolerance,margin,outcome,note\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            let outcome = serde_json::to_value(r.outcome).unwrap();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{:?},{},{},{}",
                r.source,
                r.check,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                f(r.observed),
                f(r.envelope),
                r.tolerance,
                f(r.margin),
                outcome.as_str().unwrap(),
                r.note.replace(',', ";"),
            );
        }
        out
    }
}

/// Verifies a set of named traces.
pub fn verify(traces: &[(String, Loaded)]) -> Report {
    let mut report = Report::default();
    let mut batches: BTreeMap<String, Vec<(&str, &Loaded)>> = BTreeMap::new();
    for (name, t) in traces {
        verify_one(&mut report, name, t);
        let h = &t.header;
        if matches!(h.solver.as_str(), "stochastic" | "directional" | "zeroth_order") {
            // runs of one configuration differ only in the seed
            let mut config = h.config.clone();
            config.run = Default::default();
            let key = serde_json::to_string(&(&h.solver, &h.problem, &h.prox, &config)).unwrap();
            batches.entry(key).or_default().push((name.as_str(), t));
        }
    }
    for runs in batches.values() {
        verify_batch(&mut report, runs);
    }
    report
}

fn verify_one(report: &mut Report, name: &str, t: &Loaded) {
    let h = &t.header;
    if h.schema != SCHEMA {
        report.flag(name, "schema", Outcome::Fail, format!("unknown schema `{}`", h.schema));
        return;
    }
    if t.hash_matches {
        report.flag(name, "integrity", Outcome::Pass, "records match content_hash");
    } else {
        report.flag(name, "integrity", Outcome::Fail, "records do not match content_hash (modified trace)");
    }
    if t.rows.is_empty() {
        report.flag(name, "sequence", Outcome::Fail, "trace has no records");
        return;
    }
    if let Some(bad) = t.rows.iter().enumerate().find(|(i, r)| r.k != *i) {
        report.flag(name, "sequence", Outcome::Fail, format!("row {} has k = {}", bad.0, bad.1.k));
    }
    let l = h.lipschitz;
    match h.solver.as_str() {
        "base" | "minimax" | "inexact" => {
            let (Some(f_star), Some(r2)) = (h.f_star, h.r_squared) else {
                report.flag(name, "envelope", Outcome::Unverifiable, "trace lacks f_star or r_squared");
                return;
            };
            let (factor, check) = match h.solver.as_str() {
                "base" => (4.0, "envelope_4LR2"),
                "minimax" => (8.0, "envelope_8LR2"),
                _ => (8.0, "envelope_8LR2_2kdelta"),
            };
            let delta = if h.solver == "inexact" {
                if h.mode.as_deref() == Some("universal") {
                    report.flag(name, check, Outcome::Unverifiable, "universal mode carries no rate theorem");
                    return;
                }
                match h.delta {
                    Some(d) => d,
                    None => {
                        report.flag(name, check, Outcome::Unverifiable, "trace lacks delta");
                        return;
                    }
                }
            } else {
                0.0
            };
            for r in &t.rows[1..] {
                let kf = r.k as f64;
                let env = factor * l * r2 / (kf + 1.0).powi(2) + 2.0 * kf * delta;
                report.compare(name, check, Some(r.k), r.f_x - f_star, env, TOLERANCE);
            }
            if h.solver != "base" {
                backtracking_audit(report, name, t);
            }
        }
        "stochastic" => stochastic_audit(report, name, t),
        "directional" | "zeroth_order" => {
            if h.status == "already_solved" {
                report.flag(name, "plan", Outcome::Info, "start is already an epsilon-solution; no steps planned");
            }
        }
        other => report.flag(name, "solver", Outcome::Unverifiable, format!("no bounds known for `{other}`")),
    }
}

/// `L_k <= max(2L, L0)` and the function-set count `4N + 2 log2(2L/L0)`.
fn backtracking_audit(report: &mut Report, name: &str, t: &Loaded) {
    let h = &t.header;
    let Some(l0) = h.l0 else {
        report.flag(name, "calls", Outcome::Unverifiable, "trace lacks l0");
        return;
    };
    let cap = (2.0 * h.lipschitz).max(l0);
    let worst = t.rows.iter().filter_map(|r| r.l_k).fold(0.0, f64::max);
    report.compare(name, "L_k_max", None, worst, cap, 0.0);
    let last = t.rows.last().expect("at least the initial record");
    let n = last.k as f64;
    let bound = 4.0 * n + 2.0 * (2.0 * h.lipschitz / l0).log2().max(0.0);
    report.compare(name, "calls_f", Some(last.k), last.calls_f as f64, bound, 0.0);
}

fn stochastic_audit(report: &mut Report, name: &str, t: &Loaded) {
    let h = &t.header;
    let (Some(eps), Some(var), Some(omega_tilde)) = (h.epsilon, h.variance, h.omega_tilde) else {
        report.flag(name, "batch_size", Outcome::Unverifiable, "trace lacks epsilon, variance or omega_tilde");
        return;
    };
    let mismatched: Vec<usize> = t.rows[1..]
        .iter()
        .filter(|r| r.m_k != Some(batch_size(var, omega_tilde, r.alpha, eps)))
        .map(|r| r.k)
        .collect();
    if mismatched.is_empty() {
        report.flag(name, "batch_size", Outcome::Pass, "m_k = ceil(3 D Omega~ alpha_k / eps) at every step");
    } else {
        report.flag(name, "batch_size", Outcome::Fail, format!("m_k differs at k = {mismatched:?}"));
    }
    let last = t.rows.last().expect("at least the initial record");
    match h.draw_bound {
        Some(b) => report.compare(name, "draws", Some(last.k), last.calls_g as f64, b, 0.0),
        None => report.flag(name, "draws", Outcome::Unverifiable, "trace lacks draw_bound"),
    }
    if let Some(f_star) = h.f_star {
        let gap = last.f_x - f_star;
        let margin = 4.0 * eps - gap;
        let held = if margin >= 0.0 { "held" } else { "missed" };
        report.rows.push(ReportRow {
            source: name.into(),
            check: "event_4eps",
            k: Some(last.k),
            observed: Some(gap),
            envelope: Some(4.0 * eps),
            tolerance: 0.0,
            margin: Some(margin),
            outcome: Outcome::Info,
            note: format!("single run of a high-probability bound: {held}"),
        });
    }
}

fn verify_batch(report: &mut Report, runs: &[(&str, &Loaded)]) {
    let h = &runs[0].1.header;
    let source = format!("batch:{}:{}:{} runs", h.solver, h.problem, runs.len());
    let (Some(eps), Some(f_star)) = (h.epsilon, h.f_star) else {
        report.flag(&source, "batch", Outcome::Unverifiable, "traces lack epsilon or f_star");
        return;
    };
    let gaps: Vec<f64> = runs
        .iter()
        .map(|(_, t)| t.rows.last().expect("initial record").f_x - f_star)
        .collect();
    let n = gaps.len() as f64;
    if h.solver == "stochastic" {
        let Some(beta) = h.beta else {
            report.flag(&source, "failure_fraction", Outcome::Unverifiable, "traces lack beta");
            return;
        };
        let failures = gaps.iter().filter(|g| **g > 4.0 * eps).count() as f64 / n;
        let p = (3.0 * beta).min(1.0);
        let limit = p + Z95 * (p * (1.0 - p) / n).sqrt();
        report.compare(&source, "failure_fraction", None, failures, limit, 0.0);
    } else {
        if gaps.len() < 2 {
            report.flag(
                &source,
                "mean_gap_3eps",
                Outcome::Unverifiable,
                "an expectation bound needs at least two runs",
            );
            return;
        }
        let mean = gaps.iter().sum::<f64>() / n;
        let std = (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        report.compare(&source, "mean_gap_3eps", None, mean, 3.0 * eps, Z95 * std / n.sqrt());
    }
}
