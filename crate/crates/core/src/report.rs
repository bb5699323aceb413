//! JSON reports with stable key order and 12-significant-digit numbers.

use serde_json::{json, Map, Value};

use crate::analysis::{HorizonBound, MpReport, OracleGameValue, OracleResult, SpeReport};
use crate::graph::Edge;
use crate::strategies::GameOutcome;

/// Significant digits of every number written to a report.
pub const REPORT_DIGITS: usize = 12;

/// Rounds `x` to `digits` significant digits. Non-finite values pass through.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// A rounded number; infinities become the strings `"inf"` / `"-inf"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x, REPORT_DIGITS))
    } else if x.is_nan() {
        Value::String("nan".into())
    } else if x > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

pub fn edges(set: &[Edge]) -> Value {
    Value::Array(set.iter().map(|e| Value::String(e.to_string())).collect())
}

fn edge_schedule(s: &[Vec<Edge>]) -> Value {
    Value::Array(s.iter().map(|set| edges(set)).collect())
}

/// Serializes with sorted keys and a trailing newline.
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports hold only plain values");
    s.push('\n');
    s
}

pub fn outcome_report(out: &GameOutcome, trajectory_csv: Option<&str>) -> Value {
    let intervals: Vec<Value> = out
        .intervals
        .iter()
        .map(|r| {
            json!({
                "start": num(r.start),
                "end": num(r.end),
                "broken": edges(&r.broken),
                "boosted": edges(&r.boosted),
                "value": num(r.value),
            })
        })
        .collect();
    let mut m = Map::new();
    m.insert("order".into(), json!(out.order));
    m.insert("value".into(), num(out.value));
    m.insert("utility".into(), num(out.utility));
    m.insert("intervals".into(), Value::Array(intervals));
    m.insert("final_state".into(), Value::Array(out.trajectory.final_state().iter().map(|x| num(*x)).collect()));
    if let Some(csv) = trajectory_csv {
        m.insert("trajectory_csv".into(), json!(csv));
    }
    Value::Object(m)
}

pub fn spe_report(r: &SpeReport, boost: f64, eps: f64) -> Value {
    json!({
        "gamma": num(r.gamma),
        "bound": num(r.bound),
        "diversity_ok": r.diversity_ok,
        "holds": r.holds,
        "boost": num(boost),
        "epsilon": num(eps),
    })
}

pub fn horizon_report(h: &HorizonBound, eps: f64) -> Value {
    let crossings: Vec<Value> = h
        .crossings
        .iter()
        .map(|c| {
            json!({
                "interval": c.interval,
                "upper": c.upper,
                "lower": c.lower,
                "row_sums": [num(c.row_sums.0), num(c.row_sums.1)],
                "t_star": c.t_star.map(num),
                "t_eps": c.t_eps.map(num),
            })
        })
        .collect();
    json!({
        "t_max": num(h.t_max),
        "cap": num(h.cap),
        "capped": h.capped,
        "epsilon": num(eps),
        "crossings": crossings,
    })
}

pub fn mp_report(r: &MpReport, tol_w: f64, tol_f: f64) -> Value {
    let violations: Vec<Value> = r
        .violations
        .iter()
        .map(|v| {
            json!({
                "t": num(v.t),
                "lower": v.lower.to_string(),
                "higher": v.higher.to_string(),
                "w_gap": num(v.w_gap),
                "f_gap": num(v.f_gap),
            })
        })
        .collect();
    json!({
        "consistent": r.violations.is_empty(),
        "violations": violations,
        "worst_margin": num(r.worst_margin),
        "samples": r.samples,
        "tol_weighted": num(tol_w),
        "tol_costate": num(tol_f),
    })
}

fn count(n: u128) -> Value {
    u64::try_from(n).map_or_else(|_| json!(n.to_string()), |n| json!(n))
}

pub fn oracle_result_report(r: &OracleResult) -> Value {
    json!({
        "best_value": num(r.best_value),
        "best_utility": num(r.best_utility),
        "best_schedule": edge_schedule(&r.best_schedule),
        "evaluation_count": count(r.evaluation_count),
    })
}

pub fn oracle_value_report(r: &OracleGameValue) -> Value {
    json!({
        "order": r.order,
        "value": num(r.value),
        "utility": num(r.utility),
        "broken": edge_schedule(&r.broken),
        "boosted": edge_schedule(&r.boosted),
        "evaluation_count": count(r.evaluation_count),
    })
}
