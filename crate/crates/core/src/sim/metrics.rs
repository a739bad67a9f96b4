//! Detection overhead per process and the detect-time regression.

use serde::{Deserialize, Serialize};

use crate::detection::Outcome;
use crate::NodeId;

/// `100 * detect / execute`, absent when `execute` is zero.
pub fn overhead_percent(time_detect_s: f64, time_execute_s: f64) -> Option<f64> {
    if time_execute_s > 0.0 {
        Some(100.0 * time_detect_s / time_execute_s)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares `y = intercept + slope * x`. Needs two or more
/// points with distinct x.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|&(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some(LinearFit {
        slope,
        intercept,
        r2,
    })
}

/// Metrics for one completed process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessReport {
    pub process_id: String,
    pub coordinator: NodeId,
    pub replicas: Vec<NodeId>,
    pub outcome: Outcome,
    pub unsafe_workers: Vec<NodeId>,
    pub missing_workers: Vec<NodeId>,
    pub cfi_count: usize,
    pub total_instructions: usize,
    pub time_execute_s: f64,
    pub time_detect_s: f64,
    pub overhead_percent: Option<f64>,
    pub timing: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub processes: usize,
    pub attacks: usize,
    /// Mean of the per-process overhead percentages.
    pub mean_overhead_percent: Option<f64>,
    /// Overhead of the mean times: `100 * mean(detect) / mean(execute)`.
    pub ratio_of_means_overhead_percent: Option<f64>,
    /// Least-squares fit of detect seconds against control instruction count.
    pub fit: Option<LinearFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub processes: Vec<ProcessReport>,
    pub aggregate: Aggregate,
}

impl MetricsReport {
    pub fn from_processes(processes: Vec<ProcessReport>) -> Self {
        let n = processes.len();
        let overheads: Vec<f64> = processes.iter().filter_map(|p| p.overhead_percent).collect();
        let mean_overhead_percent =
            (!overheads.is_empty()).then(|| overheads.iter().sum::<f64>() / overheads.len() as f64);
        let ratio_of_means_overhead_percent = if n == 0 {
            None
        } else {
            let detect = processes.iter().map(|p| p.time_detect_s).sum::<f64>() / n as f64;
            let exec = processes.iter().map(|p| p.time_execute_s).sum::<f64>() / n as f64;
            overhead_percent(detect, exec)
        };
        let points: Vec<(f64, f64)> = processes
            .iter()
            .map(|p| (p.cfi_count as f64, p.time_detect_s))
            .collect();
        let aggregate = Aggregate {
            processes: n,
            attacks: processes.iter().filter(|p| p.outcome == Outcome::Attack).count(),
            mean_overhead_percent,
            ratio_of_means_overhead_percent,
            fit: linear_fit(&points),
        };
        Self {
            processes,
            aggregate,
        }
    }

    /// One JSON object per line: each process, then the aggregate.
    pub fn to_json_lines(&self) -> String {
        #[derive(Serialize)]
        #[serde(tag = "record", rename_all = "snake_case")]
        enum Line<'a> {
            Process(&'a ProcessReport),
            Aggregate(&'a Aggregate),
        }
        let mut out = String::new();
        let lines = self
            .processes
            .iter()
            .map(Line::Process)
            .chain(std::iter::once(Line::Aggregate(&self.aggregate)));
        for line in lines {
            out.push_str(&serde_json::to_string(&line).expect("report serializes"));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(cfi: usize, detect: f64, exec: f64, outcome: Outcome) -> ProcessReport {
        ProcessReport {
            process_id: format!("p{cfi}"),
            coordinator: NodeId(0),
            replicas: vec![NodeId(1), NodeId(2)],
            outcome,
            unsafe_workers: vec![],
            missing_workers: vec![],
            cfi_count: cfi,
            total_instructions: cfi * 5,
            time_execute_s: exec,
            time_detect_s: detect,
            overhead_percent: overhead_percent(detect, exec),
            timing: "modeled".into(),
        }
    }

    #[test]
    fn overhead_formula() {
        let o = overhead_percent(0.97, 31.17).unwrap();
        assert!((o - 3.1119666).abs() < 1e-6, "{o}");
        assert_eq!(format!("{o:.2}"), "3.11");
        assert_eq!(overhead_percent(1.0, 0.0), None);
    }

    #[test]
    fn exact_line() {
        let fit = linear_fit(&[(1.0, 3.0), (2.0, 5.0), (4.0, 9.0)]).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert!(linear_fit(&[]).is_none());
        assert!(linear_fit(&[(1.0, 1.0)]).is_none());
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_none());
        assert_eq!(linear_fit(&[(1.0, 2.0), (3.0, 2.0)]).unwrap().r2, 1.0);
    }

    #[test]
    fn both_aggregations() {
        // per-row overheads 10% and 1%: mean 5.5%, ratio of means 2/110 = 1.818..%
        let r = MetricsReport::from_processes(vec![
            report(10, 1.0, 10.0, Outcome::NoAttack),
            report(20, 1.0, 100.0, Outcome::Attack),
        ]);
        assert!((r.aggregate.mean_overhead_percent.unwrap() - 5.5).abs() < 1e-12);
        assert!((r.aggregate.ratio_of_means_overhead_percent.unwrap() - 200.0 / 110.0).abs() < 1e-12);
        assert_eq!(r.aggregate.attacks, 1);
    }

    #[test]
    fn absent_overhead_skipped_in_mean() {
        let r = MetricsReport::from_processes(vec![
            report(10, 1.0, 0.0, Outcome::NoAttack),
            report(20, 1.0, 50.0, Outcome::NoAttack),
        ]);
        assert_eq!(r.processes[0].overhead_percent, None);
        assert_eq!(r.aggregate.mean_overhead_percent, Some(2.0));
    }

    #[test]
    fn json_lines_shape() {
        let r = MetricsReport::from_processes(vec![report(10, 1.0, 0.0, Outcome::NoAttack)]);
        let text = r.to_json_lines();
        let lines: Vec<serde_json::Value> =
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0]["record"], "process");
        assert_eq!(lines[0]["overhead_percent"], serde_json::Value::Null);
        assert_eq!(lines[0]["outcome"], "no_attack");
        assert_eq!(lines[1]["record"], "aggregate");
        assert!(lines[1].get("mean_overhead_percent").is_some());
        assert!(lines[1].get("fit").is_some());
    }
}
