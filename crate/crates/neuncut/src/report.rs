//! CSV emitters for training curves, gamma-search reports and labelled
//! 2-D scatter data.
//!
//! Column orders are fixed:
//!
//! * training log: `iter,lap,orth,total,lr`, plus `acc,nmi,ari` when the
//!   log carries metrics (filled on each epoch's last step, empty elsewhere)
//! * gamma report: `gamma,optimal_lap,optimal_orth,selected`
//! * scatter: `x,y,predicted_label`

use std::fmt::Write as _;

use neuncut_core::gamma_search::SearchReport;
use neuncut_core::{Error as CoreError, Matrix, TrainLog};

use crate::io::fmt_f64;

pub fn train_log_csv(log: &TrainLog) -> String {
    let with_metrics = !log.epochs.is_empty();
    let mut out = String::from("iter,lap,orth,total,lr");
    if with_metrics {
        out.push_str(",acc,nmi,ari");
    }
    out.push('\n');
    for r in &log.iterations {
        let _ = write!(out, "{},{},{},{},{}", r.iter, fmt_f64(r.lap), fmt_f64(r.orth), fmt_f64(r.total), fmt_f64(r.lr));
        if with_metrics {
            match log.metrics_at(r.iter) {
                Some(m) => {
                    let _ = write!(out, ",{},{},{}", fmt_f64(m.acc), fmt_f64(m.nmi), fmt_f64(m.ari));
                }
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn gamma_report_csv(report: &SearchReport) -> String {
    let mut out = String::from("gamma,optimal_lap,optimal_orth,selected\n");
    for (i, p) in report.probes.iter().enumerate() {
        let flag = u8::from(report.selected == Some(i));
        let _ = writeln!(out, "{},{},{},{flag}", fmt_f64(p.gamma), fmt_f64(p.optimal_lap), fmt_f64(p.optimal_orth));
    }
    out
}

/// `x,y,predicted_label` rows; needs two-dimensional points.
pub fn scatter_csv(points: &Matrix, labels: &[usize]) -> Result<String, CoreError> {
    if points.cols() != 2 || points.rows() != labels.len() {
        return Err(CoreError::InvalidInput(format!(
            "scatter output needs 2-D points with one label each, got {}x{} and {} labels",
            points.rows(),
            points.cols(),
            labels.len()
        )));
    }
    let mut out = String::from("x,y,predicted_label\n");
    for (row, l) in points.row_iter().zip(labels) {
        let _ = writeln!(out, "{},{},{l}", fmt_f64(row[0]), fmt_f64(row[1]));
    }
    Ok(out)
}
