//! Cumulative solved tables, per-problem statistics and a plot of the curve.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::store::{cumulative_counts, CumulativeRow, SolutionRecord, Status};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemStats {
    pub problem: String,
    pub attempts: usize,
    pub solved: usize,
    pub first_solved_run: Option<u64>,
    /// Fewest instance clauses over all proofs found.
    pub min_instances: Option<usize>,
    pub statuses: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<CumulativeRow>,
    pub problems: Vec<ProblemStats>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn from_records(records: &[SolutionRecord]) -> Self {
        let mut by: BTreeMap<&str, ProblemStats> = BTreeMap::new();
        for r in records {
            let s = by.entry(&r.problem).or_insert_with(|| ProblemStats { problem: r.problem.clone(), ..Default::default() });
            s.attempts += 1;
            *s.statuses.entry(r.status.to_string()).or_default() += 1;
            if r.status == Status::Unsat {
                s.solved += 1;
                s.first_solved_run = Some(s.first_solved_run.map_or(r.run, |x| x.min(r.run)));
                s.min_instances = Some(s.min_instances.map_or(r.instances.len(), |m| m.min(r.instances.len())));
            }
        }
        Self { rows: cumulative_counts(records), problems: by.into_values().collect(), files: Vec::new() }
    }

    pub fn cumulative_tsv(&self) -> String {
        let mut s = String::from("run\tattempted\tsolved\tcumulative\n");
        for r in &self.rows {
            let _ = writeln!(s, "{}\t{}\t{}\t{}", r.run, r.attempted, r.solved, r.cumulative);
        }
        s
    }

    pub fn cumulative_markdown(&self) -> String {
        let mut s = String::from("| run | attempted | solved | cumulative |\n|---:|---:|---:|---:|\n");
        for r in &self.rows {
            let _ = writeln!(s, "| {} | {} | {} | {} |", r.run, r.attempted, r.solved, r.cumulative);
        }
        s
    }

    pub fn problems_tsv(&self) -> String {
        let mut s = String::from("problem\tattempts\tsolved\tfirst_solved_run\tmin_instances\n");
        let opt = |o: Option<u64>| o.map_or("-".to_string(), |v| v.to_string());
        for p in &self.problems {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                p.problem,
                p.attempts,
                p.solved,
                opt(p.first_solved_run),
                opt(p.min_instances.map(|v| v as u64))
            );
        }
        s
    }

    /// Solved-per-run bars and the cumulative line.
    pub fn cumulative_svg(&self) -> String {
        let (w, h, m) = (640.0, 400.0, 50.0);
        let n = self.rows.len().max(1) as f64;
        let ymax = self.rows.iter().map(|r| r.cumulative.max(r.attempted)).max().unwrap_or(1).max(1) as f64;
        let x = |i: usize| m + (w - 2.0 * m) * (i as f64 + 0.5) / n;
        let y = |v: usize| h - m - (h - 2.0 * m) * v as f64 / ymax;
        let mut s = String::new();
        let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(s, r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - m, w - m, h - m);
        let _ = writeln!(s, r#"<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#, h - m);
        let bar = (w - 2.0 * m) / n * 0.6;
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                r##"<rect x="{:.1}" y="{:.1}" width="{bar:.1}" height="{:.1}" fill="#9ecae1"/>"##,
                x(i) - bar / 2.0,
                y(r.solved),
                y(0) - y(r.solved)
            );
        }
        let points: Vec<String> = self.rows.iter().enumerate().map(|(i, r)| format!("{:.1},{:.1}", x(i), y(r.cumulative))).collect();
        let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="2"/>"##, points.join(" "));
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(s, r#"<text x="{:.1}" y="{}" font-size="10" text-anchor="middle">{}</text>"#, x(i), h - m + 14.0, r.run);
        }
        let _ = writeln!(s, r#"<text x="{m}" y="{}" font-size="10" text-anchor="end">{}</text>"#, m - 4.0, ymax);
        let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">run</text>"#, w / 2.0, h - 12.0);
        let _ = writeln!(s, r#"<text x="{}" y="20" font-size="12" text-anchor="middle">solved per run (bars), cumulative (line)</text>"#, w / 2.0);
        s.push_str("</svg>\n");
        s
    }
}

/// Writes `cumulative.tsv`, `cumulative.md`, `cumulative.svg`, `problems.tsv`
/// and `report.json` into `dir`.
pub fn write_report(records: &[SolutionRecord], dir: &Path) -> std::io::Result<Report> {
    std::fs::create_dir_all(dir)?;
    let mut report = Report::from_records(records);
    let files = [
        ("cumulative.tsv", report.cumulative_tsv()),
        ("cumulative.md", report.cumulative_markdown()),
        ("cumulative.svg", report.cumulative_svg()),
        ("problems.tsv", report.problems_tsv()),
    ];
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        report.files.push(path);
    }
    let json = dir.join("report.json");
    report.files.push(json.clone());
    std::fs::write(&json, serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::PolicyTag;

    fn rec(problem: &str, run: u64, status: Status) -> SolutionRecord {
        SolutionRecord {
            problem: problem.into(),
            run,
            status,
            policy: PolicyTag::Random,
            seed: 0,
            wall_time_s: 0.0,
            instances: Vec::new(),
            reason: None,
            stats: None,
        }
    }

    #[test]
    fn union_semantics() {
        let records = vec![
            rec("a", 1, Status::Unsat),
            rec("b", 1, Status::Sat),
            rec("a", 2, Status::Unsat),
            rec("b", 2, Status::Unsat),
            rec("a", 3, Status::Sat),
            rec("b", 3, Status::Sat),
        ];
        let r = Report::from_records(&records);
        let cum: Vec<usize> = r.rows.iter().map(|r| r.cumulative).collect();
        assert_eq!(cum, vec![1, 2, 2]);
        assert_eq!(r.problems[1].first_solved_run, Some(2));
        assert!(r.cumulative_svg().contains("<polyline"));
        assert_eq!(r.cumulative_tsv().lines().count(), 4);
    }

    #[test]
    fn writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = write_report(&[rec("a", 1, Status::Unsat)], dir.path()).unwrap();
        assert_eq!(r.files.len(), 5);
        assert!(r.files.iter().all(|f| f.exists()));
    }
}
