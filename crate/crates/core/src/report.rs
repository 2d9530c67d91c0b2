//! Report files. All floats use fixed precision so identical runs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{ComparisonTable, ConfusionMatrix, ValidationReport};
use crate::phy::SpreadingFactor;
use crate::selector::MobilityClass;

pub const REPORT_CSV: &str = "report.csv";
pub const CONFUSION_CSV: &str = "confusion.csv";
pub const SUMMARY_TXT: &str = "summary.txt";
pub const CONFUSION_SVG: &str = "confusion.svg";
pub const COMPARISON_CSV: &str = "comparison.csv";
pub const COMPARE_SVG: &str = "pdr_compare.svg";

/// One line of `report.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario_id: String,
    pub mobility_class: MobilityClass,
    pub predicted: Option<u8>,
    pub actual: u8,
    pub pdr_at_predicted: Option<String>,
    pub pdr_at_actual: String,
    pub exact: bool,
    pub within_one: bool,
    pub degenerate: bool,
    pub note: Option<String>,
}

pub fn report_rows(report: &ValidationReport) -> Vec<ReportRow> {
    report
        .rows
        .iter()
        .map(|r| ReportRow {
            scenario_id: r.scenario_id.clone(),
            mobility_class: r.mobility_class,
            predicted: r.predicted.map(SpreadingFactor::value),
            actual: r.actual.value(),
            pdr_at_predicted: r.pdr_at_predicted.map(|p| format!("{p:.4}")),
            pdr_at_actual: format!("{:.4}", r.pdr_at_actual),
            exact: r.is_exact(),
            within_one: r
                .predicted
                .is_some_and(|p| p.value().abs_diff(r.actual.value()) <= 1),
            degenerate: r.degenerate,
            note: r.note.clone(),
        })
        .collect()
}

pub fn write_report_csv<W: io::Write>(w: W, report: &ValidationReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for row in report_rows(report) {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_report_csv<R: io::Read>(r: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        rows.push(row.map_err(|e| Error::parse(i + 1, "report", e.to_string()))?);
    }
    Ok(rows)
}

/// Rebuilds rates and the matrix from `report.csv` rows.
pub fn summarize_rows(rows: &[ReportRow]) -> Result<Summary> {
    let mut confusion = ConfusionMatrix::default();
    let mut infeasible = 0;
    for (i, r) in rows.iter().enumerate() {
        let sf = |v: u8| {
            SpreadingFactor::new(v).map_err(|e| Error::parse(i + 1, "predicted", e.to_string()))
        };
        match r.predicted {
            Some(p) => confusion.add(sf(p)?, sf(r.actual)?),
            None => infeasible += 1,
        }
    }
    Ok(Summary {
        total: rows.len(),
        infeasible,
        exact: confusion.exact_match_rate(),
        within_one: confusion.within_one_sf_rate(),
        confusion,
        seed: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub total: usize,
    pub infeasible: usize,
    pub exact: f64,
    pub within_one: f64,
    pub confusion: ConfusionMatrix,
    pub seed: Option<u64>,
}

impl Summary {
    pub fn from_report(report: &ValidationReport) -> Self {
        Self {
            total: report.total_scenarios,
            infeasible: report.infeasible_count,
            exact: report.exact_match_rate,
            within_one: report.within_one_sf_rate,
            confusion: report.confusion.clone(),
            seed: Some(report.seed),
        }
    }

    /// `exact=… within1=…`
    pub fn headline(&self) -> String {
        format!("exact={:.4} within1={:.4}", self.exact, self.within_one)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", self.headline());
        let _ = writeln!(s, "scenarios={}", self.total);
        let _ = writeln!(s, "feasible={}", self.total - self.infeasible);
        let _ = writeln!(s, "infeasible={}", self.infeasible);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        s
    }
}

pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut s = String::from("predicted\\actual");
    for sf in SpreadingFactor::ALL {
        let _ = write!(s, ",{sf}");
    }
    s.push('\n');
    for (sf, row) in SpreadingFactor::ALL.iter().zip(m.counts) {
        let _ = write!(s, "{sf}");
        for c in row {
            let _ = write!(s, ",{c}");
        }
        s.push('\n');
    }
    s
}

pub fn confusion_svg(m: &ConfusionMatrix) -> String {
    const CELL: usize = 60;
    const LEFT: usize = 90;
    const TOP: usize = 70;
    let size = 6 * CELL;
    let max = m.counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="13">"#,
        LEFT + size + 20,
        TOP + size + 30
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle">actual best SF</text>"#,
        LEFT + size / 2
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">predicted SF</text>"#,
        TOP + size / 2,
        TOP + size / 2
    );
    for (i, sf) in SpreadingFactor::ALL.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{sf}</text>"#,
            LEFT + i * CELL + CELL / 2,
            TOP - 10
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{sf}</text>"#,
            LEFT - 8,
            TOP + i * CELL + CELL / 2 + 4
        );
    }
    for (i, row) in m.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            let shade = 255 - (c * 200 / max) as u8;
            let (x, y) = (LEFT + j * CELL, TOP + i * CELL);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="rgb({shade},{shade},255)" stroke="gray"/>"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{c}</text>"#,
                x + CELL / 2,
                y + CELL / 2 + 4
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

pub fn comparison_csv(t: &ComparisonTable) -> String {
    let mut s = String::from("scenario_id,mobility_class,static_sf,pdr_static,pdr_dynamic\n");
    for r in &t.rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{:.4}",
            r.scenario_id,
            r.mobility_class,
            r.static_sf.value(),
            r.pdr_static,
            r.pdr_dynamic
        );
    }
    s
}

pub fn comparison_text(t: &ComparisonTable) -> String {
    let mut s = String::new();
    if let Some(n) = &t.notice {
        let _ = writeln!(s, "notice: {n}");
    }
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>11} {:>12}",
        "class", "n", "pdr_static", "pdr_dynamic"
    );
    for (class, c) in &t.by_class {
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>11.4} {:>12.4}",
            class.label(),
            c.count,
            c.mean_pdr_static,
            c.mean_pdr_dynamic
        );
    }
    if !t.skipped.is_empty() {
        let _ = writeln!(s, "skipped (infeasible): {}", t.skipped.join(" "));
    }
    s
}

pub fn comparison_svg(t: &ComparisonTable) -> String {
    const LEFT: f64 = 60.0;
    const TOP: f64 = 40.0;
    const HEIGHT: f64 = 240.0;
    const GROUP: f64 = 110.0;
    let width = LEFT + GROUP * t.by_class.len().max(1) as f64 + 40.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{:.0}" font-family="sans-serif" font-size="13">"#,
        TOP + HEIGHT + 60.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{LEFT:.0}" y="20">mean PDR: static (blue) vs dynamic (orange)</text>"#
    );
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = TOP + HEIGHT * (1.0 - v);
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT:.0}" y1="{y:.1}" x2="{:.0}" y2="{y:.1}" stroke="lightgray"/><text x="{:.0}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            width - 20.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (i, (class, c)) in t.by_class.iter().enumerate() {
        let x0 = LEFT + 15.0 + GROUP * i as f64;
        for (k, (v, colour)) in [
            (c.mean_pdr_static, "#3b6fb6"),
            (c.mean_pdr_dynamic, "#e08a2c"),
        ]
        .into_iter()
        .enumerate()
        {
            let h = HEIGHT * v.clamp(0.0, 1.0);
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="36" height="{h:.1}" fill="{colour}"/>"#,
                x0 + 40.0 * k as f64,
                TOP + HEIGHT - h
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.0}" text-anchor="middle">{} (n={})</text>"#,
            x0 + 38.0,
            TOP + HEIGHT + 20.0,
            class.label(),
            c.count
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Writes `report.csv`, `confusion.csv`, `summary.txt` and `confusion.svg`.
pub fn write_validation(dir: impl AsRef<Path>, report: &ValidationReport) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write_report_csv(&mut buf, report)?;
    let summary = Summary::from_report(report);
    Ok(vec![
        {
            let p = dir.join(REPORT_CSV);
            fs::write(&p, buf)?;
            p
        },
        write(dir, CONFUSION_CSV, &confusion_csv(&report.confusion))?,
        write(dir, SUMMARY_TXT, &summary.text())?,
        write(dir, CONFUSION_SVG, &confusion_svg(&report.confusion))?,
    ])
}

/// Writes `comparison.csv` and `pdr_compare.svg`.
pub fn write_comparison(dir: impl AsRef<Path>, table: &ComparisonTable) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    Ok(vec![
        write(dir, COMPARISON_CSV, &comparison_csv(table))?,
        write(dir, COMPARE_SVG, &comparison_svg(table))?,
    ])
}

/// Regenerates summary and plots from an existing `report.csv`.
pub fn rebuild_from_dir(dir: impl AsRef<Path>) -> Result<(Summary, Vec<PathBuf>)> {
    let dir = dir.as_ref();
    let path = dir.join(REPORT_CSV);
    let file = fs::File::open(&path)
        .map_err(|e| Error::InvalidConfig(format!("cannot open {}: {e}", path.display())))?;
    let rows = read_report_csv(file)?;
    let summary = summarize_rows(&rows)?;
    let paths = vec![
        write(dir, CONFUSION_CSV, &confusion_csv(&summary.confusion))?,
        write(dir, SUMMARY_TXT, &summary.text())?,
        write(dir, CONFUSION_SVG, &confusion_svg(&summary.confusion))?,
    ];
    Ok((summary, paths))
}
