//! Report rows, versioned CSV emission, re-parsing, and the human summary.
//!
//! The CSV carries only deterministic fields, so a rerun with the same seed
//! is byte-identical; timing goes to the human summary instead.

use std::fmt::Write as _;

use crate::error::{CliError, ErrKind};

/// Schema version comment written as the first CSV line.
pub const CSV_VERSION_LINE: &str = "# mimocap-report v1";

const HEADERS: [&str; 10] = [
    "scenario",
    "task",
    "param",
    "value",
    "capacity_bits_per_use",
    "ci_half_width",
    "certificate",
    "samples",
    "seed",
    "extra",
];

/// One result row of a run or a sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scenario: String,
    pub task: String,
    /// Swept parameter name, empty for plain runs.
    pub param: String,
    /// Swept value, NaN for plain runs (serialized empty).
    pub value: Option<f64>,
    pub capacity_bits_per_use: f64,
    pub ci_half_width: f64,
    /// Certificate residual where the task has one (KT gap or max margin).
    pub certificate: Option<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Semicolon-joined `key=value` details (covariance diagonal, atoms, ...).
    pub extra: String,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str) -> Result<Option<f64>, CliError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| CliError::new(ErrKind::Parse, format!("{what}: bad float {s:?}")))
}

/// Serialize rows as the versioned CSV document.
pub fn to_csv(rows: &[ReportRow]) -> Result<String, CliError> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(HEADERS).map_err(csv_err)?;
    for r in rows {
        wtr.write_record([
            r.scenario.as_str(),
            r.task.as_str(),
            r.param.as_str(),
            &fmt_opt(r.value),
            &r.capacity_bits_per_use.to_string(),
            &r.ci_half_width.to_string(),
            &fmt_opt(r.certificate),
            &r.samples.to_string(),
            &r.seed.to_string(),
            r.extra.as_str(),
        ])
        .map_err(csv_err)?;
    }
    let body = String::from_utf8(
        wtr.into_inner()
            .map_err(|e| CliError::new(ErrKind::Numerical, format!("csv flush failed: {e}")))?,
    )
    .expect("csv output is utf-8");
    Ok(format!("{CSV_VERSION_LINE}\n{body}"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::new(ErrKind::Numerical, format!("csv serialization failed: {e}"))
}

/// Parse a document produced by [`to_csv`] back into rows.
pub fn parse_csv(text: &str) -> Result<Vec<ReportRow>, CliError> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n");
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::new(ErrKind::Parse, format!("csv parse: {e}")))?;
        if rec.len() != HEADERS.len() {
            return Err(CliError::new(
                ErrKind::Parse,
                format!("csv row has {} fields, expected {}", rec.len(), HEADERS.len()),
            ));
        }
        let f = |i: usize| rec.get(i).unwrap_or_default().to_string();
        out.push(ReportRow {
            scenario: f(0),
            task: f(1),
            param: f(2),
            value: parse_opt(&f(3), "value")?,
            capacity_bits_per_use: f(4)
                .parse()
                .map_err(|_| CliError::new(ErrKind::Parse, "bad capacity field"))?,
            ci_half_width: f(5)
                .parse()
                .map_err(|_| CliError::new(ErrKind::Parse, "bad ci field"))?,
            certificate: parse_opt(&f(6), "certificate")?,
            samples: f(7)
                .parse()
                .map_err(|_| CliError::new(ErrKind::Parse, "bad samples field"))?,
            seed: f(8).parse().map_err(|_| CliError::new(ErrKind::Parse, "bad seed field"))?,
            extra: f(9),
        });
    }
    Ok(out)
}

/// Deterministic human summary (no timing): one line per row plus sweep
/// monotonicity flags where theory dictates a direction.
pub fn summarize(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let point = if r.param.is_empty() {
            String::new()
        } else {
            format!(" {}={}", r.param, fmt_opt(r.value))
        };
        let cert = r
            .certificate
            .map(|c| format!(" certificate={c:.3e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{} [{}]{}: capacity {:.6} +/- {:.6} bits/use{} (samples {}, seed {})",
            r.scenario,
            r.task,
            point,
            r.capacity_bits_per_use,
            r.ci_half_width,
            cert,
            r.samples,
            r.seed
        );
    }
    for flag in monotonicity_flags(rows) {
        let _ = writeln!(out, "{flag}");
    }
    out
}

/// Flags for sweep rows that violate a theory-implied direction beyond the
/// combined confidence slop: capacity is nondecreasing in the budget and
/// nonincreasing in the noise variance.
pub fn monotonicity_flags(rows: &[ReportRow]) -> Vec<String> {
    let mut flags = Vec::new();
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.param != b.param || a.param.is_empty() {
            continue;
        }
        let slack = a.ci_half_width + b.ci_half_width;
        let increasing = match a.param.as_str() {
            "gamma" => Some(true),
            "sigma2" => Some(false),
            _ => None,
        };
        let (va, vb) = match (a.value, b.value) {
            (Some(x), Some(y)) if y > x => (x, y),
            _ => continue,
        };
        match increasing {
            Some(true) if b.capacity_bits_per_use < a.capacity_bits_per_use - slack => {
                flags.push(format!(
                    "WARN nonmonotone: capacity fell from {} to {} as {} rose {} -> {}",
                    a.capacity_bits_per_use, b.capacity_bits_per_use, a.param, va, vb
                ));
            }
            Some(false) if b.capacity_bits_per_use > a.capacity_bits_per_use + slack => {
                flags.push(format!(
                    "WARN nonmonotone: capacity rose from {} to {} as {} rose {} -> {}",
                    a.capacity_bits_per_use, b.capacity_bits_per_use, a.param, va, vb
                ));
            }
            _ => {}
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(param: &str, value: Option<f64>, cap: f64) -> ReportRow {
        ReportRow {
            scenario: "s".into(),
            task: "waterfill".into(),
            param: param.into(),
            value,
            capacity_bits_per_use: cap,
            ci_half_width: 0.0,
            certificate: Some(1e-9),
            samples: 1,
            seed: 42,
            extra: "water_level=2;modes=1".into(),
        }
    }

    #[test]
    fn csv_round_trips_and_summary_is_stable() {
        let rows =
            vec![row("", None, 1.25), row("gamma", Some(0.5), 0.8), row("gamma", Some(1.0), 1.1)];
        let text = to_csv(&rows).unwrap();
        assert!(text.starts_with(CSV_VERSION_LINE));
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, rows);
        assert_eq!(summarize(&parsed), summarize(&rows));
    }

    #[test]
    fn monotonicity_violations_are_flagged() {
        let rows = vec![row("gamma", Some(0.5), 1.0), row("gamma", Some(1.0), 0.5)];
        let flags = monotonicity_flags(&rows);
        assert_eq!(flags.len(), 1);
        assert!(flags[0].contains("nonmonotone"));

        let ok = vec![row("gamma", Some(0.5), 1.0), row("gamma", Some(1.0), 1.5)];
        assert!(monotonicity_flags(&ok).is_empty());
    }
}
