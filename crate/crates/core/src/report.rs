//! CSV and Markdown output. Every CSV file starts with a `#` line naming the
//! file kind and format version plus the run parameters, then a fixed column
//! header. Nothing time-dependent is written, so identical runs produce
//! identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::IbpReport;
use crate::norms::InequalityReport;
use crate::sde::Trajectory;

pub const CSV_FORMAT_VERSION: u32 = 1;

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Renders `rows` as CSV under a `# dfmc <kind> v<version> <meta>` line.
pub fn csv_string<S: Serialize>(kind: &str, meta: &[(&str, String)], rows: &[S]) -> Result<String> {
    let mut out = format!("# dfmc {kind} v{CSV_FORMAT_VERSION}");
    for (k, v) in meta {
        let _ = write!(out, " {k}={v}");
    }
    out.push('\n');
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).map_err(csv_error)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(&String::from_utf8(body).map_err(|e| Error::Io(std::io::Error::other(e)))?);
    Ok(out)
}

/// Writes `contents` through a temporary sibling file and a rename, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("partial");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Joins a point's coordinates as `a;b;c` so it fits one CSV field.
pub fn join_point(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

/// `step,t,x1,...,xd` for every stored state.
pub fn trajectory_csv(problem: &str, seed: u64, path: u64, traj: &Trajectory) -> Result<String> {
    let mut out = format!(
        "# dfmc trajectory v{CSV_FORMAT_VERSION} problem={problem} seed={seed} path={path} dt={} exited={}\n",
        traj.dt(),
        traj.exited()
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((1..=traj.dim()).map(|i| format!("x{i}")));
    writer.write_record(&header).map_err(csv_error)?;
    for k in 0..traj.len() {
        let mut record = vec![k.to_string(), traj.time(k).to_string()];
        record.extend(traj.state(k).iter().map(|v| v.to_string()));
        writer.write_record(&record).map_err(csv_error)?;
    }
    let body = writer.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientRow {
    pub problem: String,
    pub f_id: String,
    pub x: String,
    pub route: String,
    pub t0: f64,
    pub component: usize,
    pub estimate: f64,
    pub se: f64,
    pub n: u64,
    pub seed: u64,
}

/// One row per component per route, plus the paired `residual` rows.
pub fn gradient_rows(problem: &str, seed: u64, reports: &[IbpReport]) -> Vec<GradientRow> {
    let mut rows = Vec::new();
    for r in reports {
        let row = |route: &str, j: usize, estimate: f64, se: f64, n: u64| GradientRow {
            problem: problem.to_string(),
            f_id: r.f_id.clone(),
            x: join_point(&r.x),
            route: route.to_string(),
            t0: r.t0,
            component: j + 1,
            estimate,
            se,
            n,
            seed,
        };
        for est in [&r.frechet, &r.malliavin] {
            for j in 0..est.dim() {
                let e = est.component(j);
                rows.push(row(&est.route.to_string(), j, e.value, e.se, est.count()));
            }
        }
        for (j, e) in r.residual.iter().enumerate() {
            rows.push(row("residual", j, e.value, e.se, r.frechet.count()));
        }
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCsvRow {
    pub problem: String,
    pub kind: String,
    pub f_id: String,
    pub p: f64,
    pub q: f64,
    pub t0: Option<f64>,
    pub lhs: f64,
    pub lhs_se: f64,
    pub lf_q: f64,
    pub f_q: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub constant: f64,
    pub effective_constant: f64,
    pub balanced_t0: Option<f64>,
    pub balanced_rhs: Option<f64>,
    pub verdict: &'static str,
}

pub fn inequality_rows(report: &InequalityReport) -> Vec<InequalityCsvRow> {
    report
        .rows
        .iter()
        .map(|r| InequalityCsvRow {
            problem: report.problem.clone(),
            kind: format!("{:?}", report.kind).to_lowercase(),
            f_id: r.f_id.clone(),
            p: report.p,
            q: report.q,
            t0: report.t0,
            lhs: r.lhs.value,
            lhs_se: r.lhs.se,
            lf_q: r.lf_q.value,
            f_q: r.f_q.value,
            ratio: r.ratio.value,
            ratio_se: r.ratio.se,
            constant: report.constant,
            effective_constant: report.effective_constant,
            balanced_t0: r.balanced_t0,
            balanced_rhs: r.balanced_rhs,
            verdict: if r.passes { "pass" } else { "fail" },
        })
        .collect()
}

/// One line per harness check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Fixed-precision rendering used in the Markdown report.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e-3 && v.abs() < 1e5 {
        format!("{v:.5}")
    } else {
        format!("{v:.4e}")
    }
}

pub fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = format!("| {} |\n|{}\n", header.join(" | "), "---|".repeat(header.len()));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out
}
