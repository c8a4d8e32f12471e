//! Metrics CSV files and the comparison report built from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io;
use crate::sim::{Metrics, PolicyKind};
use crate::{Error, Result};

/// One row of a metrics CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub policy: String,
    pub task: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub pph: f64,
    #[serde(rename = "avg_A")]
    pub avg_a: f64,
    #[serde(default)]
    pub placing_attempts: Option<usize>,
    #[serde(default)]
    pub successes: Option<usize>,
    #[serde(default)]
    pub elapsed_s: Option<f64>,
}

impl From<&Metrics> for MetricsRow {
    fn from(m: &Metrics) -> Self {
        Self {
            policy: m.policy.label().to_string(),
            task: m.task.clone(),
            episodes: m.episodes,
            success_rate: m.success_rate,
            pph: m.pph,
            avg_a: m.avg_complexity,
            placing_attempts: Some(m.placing_attempts),
            successes: Some(m.successes),
            elapsed_s: Some(m.elapsed),
        }
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    io::write_atomic(path, &metrics_csv(rows)?)
}

/// Reads a metrics CSV; an empty file or one without rows is an error.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: MetricsRow = row.map_err(|e| csv_error(path, e))?;
        out.push(row);
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("{} has no metrics rows", path.display())));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Parse { line: p.line() as usize, msg: format!("{}: {e}", path.display()) },
        None => match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::io(path, source),
            k => Error::Data(format!("{}: {k:?}", path.display())),
        },
    }
}

/// Rows grouped per task (first-seen order) with policies in the
/// standard order: DL, RAND, TFS, Ours-IM, Ours-FM, Ours-FM-R. A later row
/// for the same task and policy replaces an earlier one.
pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<(String, Vec<(PolicyKind, MetricsRow)>)>> {
    let mut tasks: Vec<String> = Vec::new();
    let mut by: BTreeMap<(usize, PolicyKind), MetricsRow> = BTreeMap::new();
    for r in rows {
        let kind: PolicyKind = r.policy.parse().map_err(|_| Error::Data(format!("unknown policy {:?}", r.policy)))?;
        let t = match tasks.iter().position(|t| *t == r.task) {
            Some(i) => i,
            None => {
                tasks.push(r.task.clone());
                tasks.len() - 1
            }
        };
        by.insert((t, kind), r.clone());
    }
    Ok(tasks
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let rows = by.range((i, PolicyKind::Dl)..=(i, PolicyKind::OursFmR)).map(|((_, k), r)| (*k, r.clone())).collect();
            (t.clone(), rows)
        })
        .collect())
}

fn file_stem(task: &str) -> String {
    task.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

/// Bar charts of success rate, PPH and average complexity for one task.
pub fn task_svg(task: &str, rows: &[(PolicyKind, MetricsRow)]) -> String {
    const PANEL_W: f64 = 300.0;
    const PANEL_H: f64 = 200.0;
    const TOP: f64 = 50.0;
    let panels: [(&str, fn(&MetricsRow) -> f64, f64); 3] = [
        ("Success rate (%)", |r| 100.0 * r.success_rate, 100.0),
        ("PPH", |r| r.pph, 0.0),
        ("Avg. complexity", |r| r.avg_a, 6.0),
    ];
    let width = PANEL_W * 3.0 + 40.0;
    let height = TOP + PANEL_H + 70.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="20" y="22" font-size="14">{}</text>"#, escape(task));
    for (p, (title, value, fixed_max)) in panels.iter().enumerate() {
        let x0 = 20.0 + p as f64 * PANEL_W;
        let max = if *fixed_max > 0.0 {
            *fixed_max
        } else {
            rows.iter().map(|(_, r)| value(r)).fold(0.0, f64::max).max(1.0) * 1.1
        };
        let _ = writeln!(s, r#"<text x="{}" y="{}">{title}</text>"#, x0, TOP - 8.0);
        let _ = writeln!(
            s,
            r#"<line x1="{x0}" y1="{y}" x2="{x2}" y2="{y}" stroke="black"/>"#,
            y = TOP + PANEL_H,
            x2 = x0 + PANEL_W - 20.0
        );
        let n = rows.len().max(1) as f64;
        let slot = (PANEL_W - 20.0) / n;
        for (i, (kind, r)) in rows.iter().enumerate() {
            let v = value(r);
            let h = (v / max).clamp(0.0, 1.0) * PANEL_H;
            let x = x0 + i as f64 * slot + slot * 0.15;
            let _ = writeln!(
                s,
                r##"<rect x="{x:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#4a7ab0"/>"##,
                TOP + PANEL_H - h,
                slot * 0.7
            );
            let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{v:.1}</text>"#, x + slot * 0.35, TOP + PANEL_H - h - 3.0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                x + slot * 0.35,
                TOP + PANEL_H + 14.0,
                kind.label()
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `summary.csv` and one `<task>.svg` per task into `out_dir`.
pub fn report(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("no metrics files given".into()));
    }
    let mut rows = Vec::new();
    for p in inputs {
        rows.extend(read_metrics(p)?);
    }
    let groups = summarize(&rows)?;
    let ordered: Vec<MetricsRow> = groups.iter().flat_map(|(_, rs)| rs.iter().map(|(_, r)| r.clone())).collect();
    let summary = out_dir.join("summary.csv");
    write_metrics(&summary, &ordered)?;
    let mut out = vec![summary];
    for (task, rs) in &groups {
        let p = out_dir.join(format!("{}.svg", file_stem(task)));
        io::write_atomic(&p, task_svg(task, rs).as_bytes())?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(policy: &str, task: &str) -> MetricsRow {
        MetricsRow {
            policy: policy.into(),
            task: task.into(),
            episodes: 3,
            success_rate: 0.5,
            pph: 100.0,
            avg_a: 1.0,
            placing_attempts: None,
            successes: None,
            elapsed_s: None,
        }
    }

    #[test]
    fn policies_come_out_in_table_order() {
        let rows: Vec<MetricsRow> =
            ["Ours-FM-R", "TFS", "ours-im", "DL", "Ours-FM", "RAND"].iter().map(|p| row(p, "consecutive:5")).collect();
        let g = summarize(&rows).unwrap();
        let order: Vec<&str> = g[0].1.iter().map(|(k, _)| k.label()).collect();
        assert_eq!(order, ["DL", "RAND", "TFS", "Ours-IM", "Ours-FM", "Ours-FM-R"]);
    }

    #[test]
    fn single_policy_gives_one_bar_per_metric() {
        let g = summarize(&[row("DL", "randomized:18-20")]).unwrap();
        let svg = task_svg(&g[0].0, &g[0].1);
        assert_eq!(svg.matches("<rect").count(), 3);
    }

    #[test]
    fn empty_and_malformed_files_fail() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(report(&[empty], dir.path()).is_err());
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "policy,task,episodes,success_rate,pph,avg_A\nDL,consecutive:5,3,0.5,100,1\nDL,consecutive:5,x,0.5,100,1\n")
            .unwrap();
        assert!(matches!(read_metrics(&bad), Err(Error::Parse { line: 3, .. })));
    }
}
