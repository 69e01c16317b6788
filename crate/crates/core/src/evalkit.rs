//! Trajectory error metrics and comparison reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::util::KahanSum;
use crate::{Error, Result, Trajectory};

/// `sqrt(mean_t |est_t - ref_t|^2)` over the set-points.
pub fn rmse(est: &Trajectory, reference: &Trajectory) -> Result<f64> {
    Error::check_len("trajectory", reference.len(), est.len())?;
    if est.is_empty() {
        return Err(Error::domain("rmse of empty trajectories"));
    }
    let sq: KahanSum = est
        .points
        .iter()
        .zip(&reference.points)
        .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .collect();
    Ok((sq.value() / est.len() as f64).sqrt())
}

/// Error summary of one method on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub method: String,
    pub scenario: String,
    pub mean_ex: f64,
    pub max_ex: f64,
    pub mean_ey: f64,
    pub max_ey: f64,
    /// Mean of the per-pair RMSE values.
    pub rmse: f64,
    pub rmse_median: f64,
    /// Population variance of the per-pair RMSE values.
    pub rmse_variance: f64,
    /// Number of pooled set-points.
    pub n_samples: usize,
    /// Per-pair RMSE, in batch order.
    pub rmse_series: Vec<f64>,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Pools absolute axis errors over every set-point of every pair.
pub fn axis_errors(
    pairs: &[(Trajectory, Trajectory)],
    method: &str,
    scenario: &str,
) -> Result<ErrorReport> {
    if pairs.is_empty() {
        return Err(Error::domain("no trajectory pairs to evaluate"));
    }
    let (mut sx, mut sy) = (KahanSum::default(), KahanSum::default());
    let (mut mx, mut my) = (0.0f64, 0.0f64);
    let mut n = 0usize;
    let mut series = Vec::with_capacity(pairs.len());
    for (est, reference) in pairs {
        series.push(rmse(est, reference)?);
        for (a, b) in est.points.iter().zip(&reference.points) {
            let (ex, ey) = ((a[0] - b[0]).abs(), (a[1] - b[1]).abs());
            sx.add(ex);
            sy.add(ey);
            mx = mx.max(ex);
            my = my.max(ey);
            n += 1;
        }
    }
    let m = series.len() as f64;
    let mean_rmse = series.iter().copied().collect::<KahanSum>().value() / m;
    let var = series
        .iter()
        .map(|r| (r - mean_rmse).powi(2))
        .collect::<KahanSum>()
        .value()
        / m;
    Ok(ErrorReport {
        method: method.to_owned(),
        scenario: scenario.to_owned(),
        mean_ex: sx.value() / n as f64,
        max_ex: mx,
        mean_ey: sy.value() / n as f64,
        max_ey: my,
        rmse: mean_rmse,
        rmse_median: median(&series),
        rmse_variance: var,
        n_samples: n,
        rmse_series: series,
    })
}

/// Quotes a CSV field when it contains a delimiter, quote or line break.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub const COMPARE_HEADER: &str =
    "method,scenario,mean_ex,max_ex,mean_ey,max_ey,rmse,rmse_median,rmse_variance";

/// One row per (scenario, method) over every scenario and method that
/// appears in `reports`, both sorted by name. Missing combinations are
/// filled with `n/a`.
pub fn compare_report(reports: &[ErrorReport]) -> Result<String> {
    let methods: BTreeSet<&str> = reports.iter().map(|r| r.method.as_str()).collect();
    let scenarios: BTreeSet<&str> = reports.iter().map(|r| r.scenario.as_str()).collect();
    let mut out = String::new();
    out.push_str(COMPARE_HEADER);
    out.push_str("\r\n");
    for scenario in &scenarios {
        for method in &methods {
            let found: Vec<&ErrorReport> = reports
                .iter()
                .filter(|r| r.method == *method && r.scenario == *scenario)
                .collect();
            if found.len() > 1 {
                return Err(Error::data(format!(
                    "duplicate report for method {method} on scenario {scenario}"
                )));
            }
            write!(out, "{},{}", csv_field(method), csv_field(scenario)).unwrap();
            match found.first() {
                Some(r) => {
                    for v in [r.mean_ex, r.max_ex, r.mean_ey, r.max_ey, r.rmse, r.rmse_median, r.rmse_variance] {
                        write!(out, ",{v}").unwrap();
                    }
                }
                None => out.push_str(&",n/a".repeat(7)),
            }
            out.push_str("\r\n");
        }
    }
    Ok(out)
}

/// Two-column series, e.g. `(generation, hypervolume)`.
pub fn series_csv(x_name: &str, y_name: &str, rows: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\r\n", csv_field(x_name), csv_field(y_name));
    for (x, y) in rows {
        writeln!(out, "{x},{y}\r").unwrap();
    }
    out
}

pub fn write_report_json(path: &Path, report: &ErrorReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_report_json(path: &Path) -> Result<ErrorReport> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(p: &[[f64; 2]]) -> Trajectory {
        Trajectory::new(p.to_vec())
    }

    #[test]
    fn rmse_examples() {
        let a = t(&[[1.0, 1.0], [2.0, 2.0]]);
        let b = t(&[[0.0, 0.0], [0.0, 0.0]]);
        assert!((rmse(&a, &b).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert_eq!(rmse(&a, &b).unwrap(), rmse(&b, &a).unwrap());
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert!(rmse(&a, &t(&[[0.0, 0.0]])).is_err());
    }

    #[test]
    fn pythagorean_offset() {
        let r = t(&[[0.0, 0.0], [1.0, 2.0], [5.0, -1.0]]);
        let e = t(&[[3.0, 4.0], [4.0, 6.0], [8.0, 3.0]]);
        let rep = axis_errors(&[(e, r)], "m", "s").unwrap();
        assert_eq!((rep.mean_ex, rep.mean_ey, rep.rmse), (3.0, 4.0, 5.0));
        assert_eq!((rep.max_ex, rep.max_ey, rep.n_samples), (3.0, 4.0, 3));
    }

    #[test]
    fn median_of_three() {
        assert_eq!(median(&[1.0, 100.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn missing_combination_is_na() {
        let r = t(&[[0.0, 0.0]]);
        let mut a = axis_errors(&[(r.clone(), r.clone())], "dwa", "highway").unwrap();
        let csv = compare_report(std::slice::from_ref(&a)).unwrap();
        assert_eq!(csv.lines().count(), 2);
        a.method = "net".into();
        a.scenario = "city, old".into();
        let b = axis_errors(&[(r.clone(), r)], "dwa", "highway").unwrap();
        let csv = compare_report(&[a, b]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "dwa,\"city, old\",n/a,n/a,n/a,n/a,n/a,n/a,n/a");
        assert!(lines[2].starts_with("net,\"city, old\",0,"));
    }
}
