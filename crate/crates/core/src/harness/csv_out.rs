//! CSV output for sweeps.
//!
//! Header: `config_id,policy,T,seed,total_reward,opt_lp,regret,null_pulls,
//! leftover_budget_0..leftover_budget_{m-1},phase1_end,phase2_end,phase3_infeasible`.
//! Aggregate rows carry `mean` or `stderr` in the seed column. Floats use 12
//! significant digits; missing values are empty cells. Existing files are
//! truncated.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{Aggregate, EpisodeSummary, HarnessError};

/// Episode rows, optionally followed by aggregate rows.
#[derive(Debug, Clone, Default)]
pub struct CsvTable<'a> {
    pub rows: &'a [EpisodeSummary],
    pub aggregates: &'a [Aggregate],
}

/// `%.12g`-style formatting.
pub fn format_float(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn cell(v: Option<f64>, integer: bool) -> String {
    match v {
        None => String::new(),
        Some(x) if integer && x.fract() == 0.0 && x.abs() < 1e15 => format!("{}", x as i64),
        Some(x) => format_float(x),
    }
}

pub fn header(num_resources: usize) -> String {
    let mut h = String::from("config_id,policy,T,seed,total_reward,opt_lp,regret,null_pulls");
    for j in 0..num_resources {
        write!(h, ",leftover_budget_{j}").expect("write to string");
    }
    h.push_str(",phase1_end,phase2_end,phase3_infeasible");
    h
}

/// Integer-valued numeric columns (null pulls, phase rounds, counters).
fn integer_column(i: usize, width: usize) -> bool {
    i == 3 || i + 3 >= width
}

fn numeric_cells(values: &[Option<f64>], episode_row: bool) -> String {
    let width = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| cell(v, episode_row && integer_column(i, width)))
        .collect::<Vec<_>>()
        .join(",")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Renders the table; the resource count is taken from the first row.
pub fn render_csv(table: &CsvTable<'_>) -> String {
    let m = table
        .rows
        .first()
        .map(|r| r.leftover_budgets.len())
        .or_else(|| table.aggregates.first().map(|a| a.mean.len() - 7))
        .unwrap_or(1);
    let mut out = header(m);
    out.push('\n');
    for r in table.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            quote(&r.config_id),
            quote(&r.policy),
            r.horizon,
            r.seed,
            numeric_cells(&r.numeric_columns(), true)
        )
        .expect("write to string");
    }
    for a in table.aggregates {
        for (label, values) in [("mean", &a.mean), ("stderr", &a.stderr)] {
            writeln!(
                out,
                "{},{},{},{label},{}",
                quote(&a.config_id),
                quote(&a.policy),
                a.horizon,
                numeric_cells(values, false)
            )
            .expect("write to string");
        }
    }
    out
}

pub fn write_csv(table: &CsvTable<'_>, path: &Path) -> Result<(), HarnessError> {
    let io_err = |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::fs::File::create(path).map_err(io_err)?;
    f.write_all(render_csv(table).as_bytes()).map_err(io_err)?;
    f.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(m: usize) -> EpisodeSummary {
        EpisodeSummary {
            config_id: "FIX-B".into(),
            policy: "cb".into(),
            horizon: 100,
            seed: 3,
            total_reward: 40.5,
            opt_lp: 0.475_428_571_428_571_4,
            regret: 7.042_857_142_857_14,
            null_pulls: 12,
            leftover_budgets: vec![2.0; m],
            phase1_end: None,
            phase2_end: Some(77),
            phase3_infeasible: 0,
            empty_feasible: 0,
        }
    }

    #[test]
    fn float_format() {
        assert_eq!(format_float(0.475_428_571_428_571_4), "0.475428571429");
        assert_eq!(format_float(2.0), "2");
        assert_eq!(format_float(-1234.5), "-1234.5");
        assert_eq!(format_float(1e-7), "1e-07");
        assert_eq!(format_float(123_456_789_012_345.0), "1.23456789012e+14");
        assert_eq!(format_float(9.999_999_999_999_9), "10");
        assert_eq!(format_float(0.0001), "0.0001");
    }

    #[test]
    fn single_resource_row_has_twelve_columns() {
        let rows = [summary(1)];
        let text = render_csv(&CsvTable {
            rows: &rows,
            aggregates: &[],
        });
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 12);
        assert_eq!(
            lines[1],
            "FIX-B,cb,100,3,40.5,0.475428571429,7.04285714286,12,2,,77,0"
        );
    }

    #[test]
    fn two_resources_two_leftover_columns() {
        let rows = [summary(2)];
        let text = render_csv(&CsvTable {
            rows: &rows,
            aggregates: &[],
        });
        let head = text.lines().next().unwrap();
        assert!(head.contains("leftover_budget_0,leftover_budget_1,phase1_end"));
        assert_eq!(text.lines().nth(1).unwrap().split(',').count(), 13);
    }

    #[test]
    fn overwrite_truncates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        std::fs::write(&path, "x".repeat(10_000)).unwrap();
        let rows = [summary(1)];
        write_csv(
            &CsvTable {
                rows: &rows,
                aggregates: &[],
            },
            &path,
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("config_id,"));
        assert!(!text.contains("xxx"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn missing_directory_reports_path() {
        let rows = [summary(1)];
        let err = write_csv(
            &CsvTable {
                rows: &rows,
                aggregates: &[],
            },
            Path::new("/no/such/dir/out.csv"),
        )
        .unwrap_err();
        assert!(err.to_string().contains("/no/such/dir/out.csv"));
    }
}
