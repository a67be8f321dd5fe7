//! Report artifacts: the JSON report file a solve emits next to its
//! solution, and the benchmark CSV table.
//!
//! Every float is printed with Rust's shortest-roundtrip formatting, so
//! parsing a report or CSV back recovers the exact values and re-derived
//! statistics (averages, win rates) match to the bit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construction::PartitionStats;
use crate::orchestrator::{ParamsEcho, PhaseTimes, RunReport, ShapeStats, Variant};
use crate::solution::CostBreakdown;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
}

/// On-disk report schema. Everything needed to audit a run: bounds, gap,
/// per-phase virtual times, table statistics, and the elite pool's visit
/// patterns (sufficient to replay construction and recount the statistics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub instance: String,
    pub variant: Variant,
    pub seed: u64,
    pub params: ParamsEcho,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub gap: f64,
    pub cost: CostBreakdown,
    pub times: PhaseTimes,
    pub stats: PartitionStats,
    pub shape: ShapeStats,
    pub pool_size: usize,
    /// Visit patterns of Γ, collection rows only (`n × tau` each).
    pub pool_y: Vec<Vec<Vec<u8>>>,
}

impl ReportFile {
    pub fn from_run(report: &RunReport) -> ReportFile {
        ReportFile {
            instance: report.instance.clone(),
            variant: report.variant,
            seed: report.seed,
            params: report.params.clone(),
            upper_bound: report.upper_bound,
            lower_bound: report.lower_bound,
            gap: report.gap,
            cost: report.cost,
            times: report.times,
            stats: report.stats,
            shape: report.shape,
            pool_size: report.pool_y.len(),
            pool_y: report.pool_y.clone(),
        }
    }
}

/// Serializes a run report to the report file format.
pub fn render_report(report: &RunReport) -> String {
    let mut out = serde_json::to_string_pretty(&ReportFile::from_run(report))
        .expect("report serializes");
    out.push('\n');
    out
}

pub fn parse_report(text: &str) -> Result<ReportFile, ReportError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ReportError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

/// One line of the benchmark table.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub instance: String,
    pub variant: Variant,
    pub z: f64,
    pub time: f64,
    pub gap: f64,
    pub knpart: u32,
    pub bppart: u32,
    pub bpimpr: u32,
    pub veh_min: u32,
    pub veh_avg: f64,
    pub veh_max: u32,
    pub col_min: u32,
    pub col_avg: f64,
    pub col_max: u32,
}

impl BenchRow {
    pub fn from_report(report: &RunReport) -> BenchRow {
        BenchRow {
            instance: report.instance.clone(),
            variant: report.variant,
            z: report.upper_bound,
            time: report.times.total,
            gap: report.gap,
            knpart: report.stats.knpart,
            bppart: report.stats.bppart,
            bpimpr: report.stats.bpimpr,
            veh_min: report.shape.veh_min,
            veh_avg: report.shape.veh_avg,
            veh_max: report.shape.veh_max,
            col_min: report.shape.col_min,
            col_avg: report.shape.col_avg,
            col_max: report.shape.col_max,
        }
    }
}

pub const CSV_HEADER: &str = "instance,variant,z,time,gap,knpart,bppart,bpimpr,\
veh_min,veh_avg,veh_max,col_min,col_avg,col_max";

fn csv_row(row: &BenchRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        row.instance,
        row.variant,
        row.z,
        row.time,
        row.gap,
        row.knpart,
        row.bppart,
        row.bpimpr,
        row.veh_min,
        row.veh_avg,
        row.veh_max,
        row.col_min,
        row.col_avg,
        row.col_max,
    )
}

/// Assembles the benchmark CSV: one header, one row per run (caller supplies
/// the order), an `Averages` summary row, and — when reference objectives
/// are given — a win-rate row counting instances where z beat the reference.
pub fn bench_csv(rows: &[BenchRow], reference: Option<&[(String, f64)]>) -> String {
    assert!(!rows.is_empty(), "benchmark table needs at least one row");
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
        out.push('\n');
    }

    let len = rows.len() as f64;
    let mean = |f: &dyn Fn(&BenchRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / len;
    out.push_str(&format!(
        "Averages,,{},{},{},{},{},{},{},{},{},{},{},{}\n",
        mean(&|r| r.z),
        mean(&|r| r.time),
        mean(&|r| r.gap),
        mean(&|r| f64::from(r.knpart)),
        mean(&|r| f64::from(r.bppart)),
        mean(&|r| f64::from(r.bpimpr)),
        mean(&|r| f64::from(r.veh_min)),
        mean(&|r| r.veh_avg),
        mean(&|r| f64::from(r.veh_max)),
        mean(&|r| f64::from(r.col_min)),
        mean(&|r| r.col_avg),
        mean(&|r| f64::from(r.col_max)),
    ));

    if let Some(reference) = reference {
        let mut matched = 0u32;
        let mut wins = 0u32;
        for row in rows {
            if let Some((_, z_ref)) = reference.iter().find(|(name, _)| *name == row.instance)
            {
                matched += 1;
                if row.z < *z_ref {
                    wins += 1;
                }
            }
        }
        if matched > 0 {
            let pct = 100.0 * f64::from(wins) / f64::from(matched);
            out.push_str(&format!("<reference(%),,{pct},,,,,,,,,,,\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Instance;
    use crate::orchestrator::{run, RunParams};

    fn sample_report() -> RunReport {
        let inst = Instance::from_parts(
            "sample",
            550.0,
            0.24,
            90.0,
            0.02,
            2.5,
            vec![420.0, 380.0],
            vec![vec![200.0, 180.0], vec![150.0, 160.0]],
            vec![
                vec![0.0, 4.0, 5.0],
                vec![4.0, 0.0, 3.0],
                vec![5.0, 3.0, 0.0],
            ],
        )
        .unwrap();
        run(&inst, Variant::MhPlus, &RunParams::default()).unwrap()
    }

    #[test]
    fn report_roundtrips_exactly() {
        let report = sample_report();
        let text = render_report(&report);
        let parsed = parse_report(&text).unwrap();
        assert_eq!(parsed.instance, report.instance);
        assert_eq!(parsed.upper_bound.to_bits(), report.upper_bound.to_bits());
        assert_eq!(parsed.lower_bound.to_bits(), report.lower_bound.to_bits());
        assert_eq!(parsed.gap.to_bits(), report.gap.to_bits());
        assert_eq!(parsed.pool_y, report.pool_y);
        assert_eq!(parsed.stats, report.stats);
        assert_eq!(parsed.shape, report.shape);
        // Rendering is a pure function of the report.
        assert_eq!(text, render_report(&report));
    }

    #[test]
    fn report_rejects_unknown_fields() {
        let report = sample_report();
        let mut text = render_report(&report);
        text = text.replacen("\"instance\"", "\"bogus\": 1,\n  \"instance\"", 1);
        assert!(parse_report(&text).is_err());
    }

    fn row(name: &str, z: f64, time: f64, gap: f64) -> BenchRow {
        BenchRow {
            instance: name.into(),
            variant: Variant::Mh,
            z,
            time,
            gap,
            knpart: 3,
            bppart: 1,
            bpimpr: 0,
            veh_min: 1,
            veh_avg: 1.5,
            veh_max: 2,
            col_min: 2,
            col_avg: 2.5,
            col_max: 3,
        }
    }

    #[test]
    fn csv_averages_recompute_from_rows() {
        let rows =
            vec![row("a", 100.5, 1.25, 3.0), row("b", 200.25, 2.5, 4.5), row("c", 99.125, 0.5, 6.0)];
        let csv = bench_csv(&rows, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5); // header + 3 rows + averages
        let avg: Vec<&str> = lines[4].split(',').collect();
        assert_eq!(avg[0], "Averages");
        // Recompute the z average from the printed rows.
        let zs: Vec<f64> = lines[1..4]
            .iter()
            .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
            .collect();
        let recomputed = zs.iter().sum::<f64>() / zs.len() as f64;
        let printed: f64 = avg[2].parse().unwrap();
        assert!((printed - recomputed).abs() < 1e-9);
        assert_eq!(printed.to_bits(), recomputed.to_bits());
    }

    #[test]
    fn csv_reference_win_rate() {
        let rows = vec![row("a", 100.0, 1.0, 3.0), row("b", 200.0, 1.0, 3.0)];
        let reference = vec![("a".to_string(), 150.0), ("b".to_string(), 150.0)];
        let csv = bench_csv(&rows, Some(&reference));
        let last = csv.lines().last().unwrap();
        assert!(last.starts_with("<reference(%),,50,"), "got {last}");
    }
}
