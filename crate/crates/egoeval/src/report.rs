//! CSV report writers. All numbers use Rust's shortest round-trip float
//! formatting, so identical results produce byte-identical files.
//!
//! Schemas:
//!
//! - `ap_results.csv`: metric, bucket, t, delta, beta, ap, defined, gt_count
//! - `pr_points.csv`: metric, bucket, t, delta, beta, score, precision, recall
//! - `collision_groups.csv`: group, count, mean_iou, median_iou,
//!   mean_sde_now, median_sde_now, mean_sde_at_event, median_sde_at_event
//! - `collision_temporal.csv`: t, cda, mean_iou, mean_sde, tp, fp, missed,
//!   pair_count
//!
//! `bucket` renders a half-open range as `lo-hi` (`0-inf` for unbounded);
//! `beta` is empty for unweighted metrics; undefined statistics render as
//! empty cells.

use std::io::Write;
use std::path::Path;

use egoeval_core::apeval::LabeledResult;
use egoeval_core::collision::{CollisionStudy, GroupStats};

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        (if v > 0.0 { "inf" } else { "-inf" }).to_string()
    } else {
        format!("{v}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn bucket_label(bucket: (f64, f64)) -> String {
    format!("{}-{}", fmt(bucket.0), fmt(bucket.1))
}

fn open(path: &Path) -> std::io::Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_writer(std::fs::File::create(path)?))
}

/// One row per result cell.
pub fn write_ap_results(path: &Path, rows: &[LabeledResult]) -> std::io::Result<()> {
    let mut w = open(path)?;
    w.write_record(["metric", "bucket", "t", "delta", "beta", "ap", "defined", "gt_count"])?;
    for row in rows {
        let k = &row.key;
        w.write_record([
            k.metric.as_str().to_string(),
            bucket_label(k.bucket),
            fmt(k.t),
            fmt(k.threshold),
            fmt_opt(k.exponent),
            if row.result.defined { fmt(row.result.ap) } else { String::new() },
            row.result.defined.to_string(),
            row.result.gt_count.to_string(),
        ])?;
    }
    w.flush()
}

/// One row per precision-recall sweep point, labeled by its result cell.
pub fn write_pr_points(path: &Path, rows: &[LabeledResult]) -> std::io::Result<()> {
    let mut w = open(path)?;
    w.write_record(["metric", "bucket", "t", "delta", "beta", "score", "precision", "recall"])?;
    for row in rows {
        let k = &row.key;
        for p in &row.result.pr_points {
            w.write_record([
                k.metric.as_str().to_string(),
                bucket_label(k.bucket),
                fmt(k.t),
                fmt(k.threshold),
                fmt_opt(k.exponent),
                fmt(p.score),
                fmt(p.precision),
                fmt(p.recall),
            ])?;
        }
    }
    w.flush()
}

fn group_record(name: &str, stats: Option<&GroupStats>) -> [String; 8] {
    match stats {
        Some(s) => [
            name.to_string(),
            s.count.to_string(),
            fmt(s.mean_iou),
            fmt(s.median_iou),
            fmt(s.mean_sde_now),
            fmt(s.median_sde_now),
            fmt(s.mean_sde_at_event),
            fmt(s.median_sde_at_event),
        ],
        None => [
            name.to_string(),
            "0".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ],
    }
}

/// Group statistics: one row for detections whose collision label matched
/// the ground truth, one for the mismatches. An empty group keeps its row
/// with count 0 and empty statistics.
pub fn write_collision_groups(path: &Path, study: &CollisionStudy) -> std::io::Result<()> {
    let mut w = open(path)?;
    w.write_record([
        "group",
        "count",
        "mean_iou",
        "median_iou",
        "mean_sde_now",
        "median_sde_now",
        "mean_sde_at_event",
        "median_sde_at_event",
    ])?;
    w.write_record(group_record("tp", study.tp.as_ref()))?;
    w.write_record(group_record("fp_fn", study.fp_fn.as_ref()))?;
    w.flush()
}

/// Per-horizon detection-accuracy curve.
pub fn write_collision_temporal(path: &Path, study: &CollisionStudy) -> std::io::Result<()> {
    let mut w = open(path)?;
    w.write_record(["t", "cda", "mean_iou", "mean_sde", "tp", "fp", "missed", "pair_count"])?;
    for p in &study.temporal {
        w.write_record([
            fmt(p.t),
            fmt_opt(p.cda),
            fmt_opt(p.mean_iou),
            fmt_opt(p.mean_sde),
            p.tp.to_string(),
            p.fp.to_string(),
            p.missed.to_string(),
            p.pair_count.to_string(),
        ])?;
    }
    w.flush()
}

/// Render rows as an aligned text table (for stdout summaries).
pub fn text_table(header: &[&str], rows: &[Vec<String>], out: &mut impl Write) -> std::io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let write_row = |out: &mut dyn Write, cells: &[String]| -> std::io::Result<()> {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<w$}", w = widths[i]));
        }
        writeln!(out, "{}", line.trim_end())
    };
    write_row(out, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
    for row in rows {
        write_row(out, row)?;
    }
    Ok(())
}
