//! Machine-readable solve report (JSON).

use serde::{Deserialize, Serialize};

/// Traffic summary of a decentralized run.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct TrafficSummary {
    pub messages_sent: u64,
    pub bytes_modeled: u64,
    pub per_robot_sent: Vec<u64>,
}

/// Solve report. Certificate fields are present only for certified-mode runs;
/// RMSE fields only when ground truth was available.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct SolveReport {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_d_plus_1: Option<f64>,
    pub final_cost: f64,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_robot_rmse: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_rmse: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub improvement_percent: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traffic: Option<TrafficSummary>,
}

/// Relative improvement `(baseline - ours) / baseline` in percent, rounded to
/// one decimal.
pub fn improvement_percent(baseline: f64, ours: f64) -> f64 {
    if baseline == 0.0 {
        return 0.0;
    }
    let pct = (baseline - ours) / baseline * 100.0;
    (pct * 10.0).round() / 10.0
}

/// Serializes a report with a stable field order (pretty JSON).
pub fn write_report(report: &SolveReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn improvement_examples() {
        assert_eq!(improvement_percent(7.09, 3.62), 48.9);
        assert_eq!(improvement_percent(2.73, 2.38), 12.8);
        assert_eq!(improvement_percent(7.01, 3.62), 48.4);
        assert_eq!(improvement_percent(4.90, 2.38), 51.4);
        assert_eq!(improvement_percent(0.0, 1.0), 0.0);
    }

    #[test]
    fn certified_report_has_certificate_fields() {
        let report = SolveReport {
            mode: "certified".into(),
            certified: Some(true),
            lambda_d_plus_1: Some(0.5),
            final_cost: 1.25,
            iterations: 12,
            ..Default::default()
        };
        let text = write_report(&report);
        assert!(text.contains("\"certified\": true"));
        assert!(text.contains("\"lambda_d_plus_1\""));
        let back: SolveReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn one_time_report_lacks_certificate_fields() {
        let report = SolveReport {
            mode: "one-time".into(),
            final_cost: 3.0,
            iterations: 1,
            per_robot_rmse: Some(vec![1.0, 2.0]),
            ..Default::default()
        };
        let text = write_report(&report);
        assert!(!text.contains("certified"));
        assert!(!text.contains("lambda_d_plus_1"));
        assert!(text.contains("per_robot_rmse"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let report = SolveReport {
            mode: "certified".into(),
            certified: Some(true),
            lambda_d_plus_1: Some(0.123456),
            final_cost: 9.75,
            iterations: 3,
            ..Default::default()
        };
        assert_eq!(write_report(&report), write_report(&report.clone()));
    }
}
