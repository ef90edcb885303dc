//! Prediction of basic-block instruction mixes and the accuracy metrics:
//! weighted RMS error, Kendall's tau, and coverage.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::model::{ConjunctiveMapping, Microkernel, ModelError};
use crate::ratio::Rat;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    NonPositiveNative(String),
    ZeroTotalWeight,
    Model(ModelError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::NonPositiveNative(id) => {
                write!(f, "block `{id}` has nonpositive native IPC")
            }
            EvalError::ZeroTotalWeight => write!(f, "all block weights are zero"),
            EvalError::Model(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for EvalError {}

/// One evaluation unit: an instruction mix with an execution weight.
#[derive(Debug, Clone)]
pub struct BlockMix {
    pub id: String,
    pub weight: f64,
    pub terms: Microkernel,
}

/// Prediction of a covered block.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub ipc: Rat,
    pub bottlenecks: BTreeSet<String>,
}

/// Throughput of the block's multiset under the mapping; a block using any
/// unmapped instruction is uncovered (reported, never silently dropped).
pub fn predict_block(
    mapping: &ConjunctiveMapping,
    block: &BlockMix,
) -> Result<Option<Prediction>, EvalError> {
    for name in block.terms.names() {
        if !mapping.contains_instruction(name) {
            return Ok(None);
        }
    }
    let t = mapping.throughput(&block.terms).map_err(EvalError::Model)?;
    Ok(Some(Prediction {
        ipc: t.ipc,
        bottlenecks: t.bottlenecks,
    }))
}

/// One scored row of the evaluation report.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub weight: f64,
    pub native_ipc: f64,
    pub predicted_ipc: f64,
}

impl PredictionRow {
    pub fn ratio(&self) -> f64 {
        self.predicted_ipc / self.native_ipc
    }
}

/// Weight-averaged root-mean-square of the relative IPC error, in percent.
pub fn rms_error(rows: &[PredictionRow]) -> Result<f64, EvalError> {
    let mut total_weight = 0.0;
    for r in rows {
        if !(r.native_ipc > 0.0) {
            return Err(EvalError::NonPositiveNative(r.id.clone()));
        }
        total_weight += r.weight;
    }
    if !(total_weight > 0.0) {
        return Err(EvalError::ZeroTotalWeight);
    }
    let mut acc = 0.0;
    for r in rows {
        let rel = (r.predicted_ipc - r.native_ipc) / r.native_ipc;
        acc += (r.weight / total_weight) * rel * rel;
    }
    Ok(libm::sqrt(acc) * 100.0)
}

/// Kendall's tau over all row pairs, ties counted as neither concordant
/// nor discordant and no tie correction. Undefined (`None`) when fewer
/// than two rows exist or all native values are equal.
pub fn kendall_tau(rows: &[(f64, f64)]) -> Option<f64> {
    let n = rows.len();
    if n < 2 {
        return None;
    }
    if rows.iter().all(|(nat, _)| *nat == rows[0].0) {
        return None;
    }
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dn = rows[i].0 - rows[j].0;
            let dp = rows[i].1 - rows[j].1;
            let prod = dn * dp;
            if prod > 0.0 {
                concordant += 1;
            } else if prod < 0.0 {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    Some((concordant - discordant) as f64 / pairs)
}

/// Share of blocks whose every instruction is mapped, in percent.
pub fn coverage(covered: usize, total: usize) -> f64 {
    if total == 0 {
        return 100.0;
    }
    covered as f64 / total as f64 * 100.0
}

/// The aggregate report emitted by the evaluate stage.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub rms_error_pct: Option<f64>,
    pub kendall_tau: Option<f64>,
    pub coverage_pct: f64,
    pub rows: Vec<PredictionRow>,
    pub uncovered: Vec<String>,
}

/// Scores covered rows and folds in the uncovered block ids.
pub fn compute_metrics(rows: Vec<PredictionRow>, uncovered: Vec<String>) -> MetricsReport {
    let rms = rms_error(&rows).ok();
    let tau = kendall_tau(
        &rows
            .iter()
            .map(|r| (r.native_ipc, r.predicted_ipc))
            .collect::<Vec<_>>(),
    );
    let cov = coverage(rows.len(), rows.len() + uncovered.len());
    MetricsReport {
        rms_error_pct: rms,
        kendall_tau: tau,
        coverage_pct: cov,
        rows,
        uncovered,
    }
}

/// CSV for external plotting; column order and formatting are fixed.
pub fn heatmap_csv(rows: &[PredictionRow]) -> String {
    let mut out = String::from("block_id,native_ipc,predicted_ipc,ratio,weight\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            r.native_ipc,
            r.predicted_ipc,
            r.ratio(),
            r.weight
        ));
    }
    out
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    match x {
        Some(v) => format!("{v:.digits$}"),
        None => "n/a".to_string(),
    }
}

/// Fixed-width terminal table of the per-block rows and the summary line.
pub fn text_table(report: &MetricsReport) -> String {
    let mut out = format!(
        "{:<16} {:>10} {:>10} {:>10} {:>8}\n",
        "block", "weight", "native", "predicted", "ratio"
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{:<16} {:>10.3} {:>10.4} {:>10.4} {:>8.4}\n",
            r.id,
            r.weight,
            r.native_ipc,
            r.predicted_ipc,
            r.ratio()
        ));
    }
    for id in &report.uncovered {
        out.push_str(&format!("{:<16} {:>10}\n", id, "uncovered"));
    }
    out.push('\n');
    out.push_str(&format!("{:>8} {:>8} {:>8}\n", "Cov.(%)", "Err.(%)", "Tau"));
    out.push_str(&format!(
        "{:>8.1} {:>8} {:>8}\n",
        report.coverage_pct,
        fmt_opt(report.rms_error_pct, 2),
        fmt_opt(report.kendall_tau, 3),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, weight: f64, native: f64, predicted: f64) -> PredictionRow {
        PredictionRow {
            id: id.to_string(),
            weight,
            native_ipc: native,
            predicted_ipc: predicted,
        }
    }

    #[test]
    fn rms_exact_predictions_are_zero() {
        let rows = [row("a", 1.0, 2.0, 2.0), row("b", 3.0, 0.5, 0.5)];
        assert_eq!(rms_error(&rows).unwrap(), 0.0);
    }

    #[test]
    fn rms_single_block_ten_percent() {
        let rows = [row("a", 2.0, 1.0, 1.1)];
        let v = rms_error(&rows).unwrap();
        assert!((v - 10.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rms_symmetric_errors() {
        let rows = [row("a", 1.0, 1.0, 1.1), row("b", 1.0, 1.0, 0.9)];
        let v = rms_error(&rows).unwrap();
        assert!((v - 10.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn rms_rejects_zero_native() {
        let rows = [row("a", 1.0, 0.0, 1.0)];
        assert!(matches!(
            rms_error(&rows),
            Err(EvalError::NonPositiveNative(_))
        ));
    }

    #[test]
    fn rms_is_scale_invariant() {
        let rows = [row("a", 1.0, 2.0, 2.5), row("b", 2.0, 1.0, 0.8)];
        let scaled: Vec<PredictionRow> = rows
            .iter()
            .map(|r| row(&r.id, r.weight, r.native_ipc * 3.0, r.predicted_ipc * 3.0))
            .collect();
        assert!((rms_error(&rows).unwrap() - rms_error(&scaled).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tau_identical_and_reversed() {
        let up: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, i as f64 * 2.0)).collect();
        assert_eq!(kendall_tau(&up), Some(1.0));
        let down: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -(i as f64))).collect();
        assert_eq!(kendall_tau(&down), Some(-1.0));
    }

    #[test]
    fn tau_undefined_on_equal_natives() {
        assert_eq!(kendall_tau(&[(1.0, 2.0), (1.0, 3.0)]), None);
        assert_eq!(kendall_tau(&[(1.0, 2.0)]), None);
    }

    #[test]
    fn tau_is_invariant_under_monotone_transforms() {
        let rows = [(1.0, 4.0), (2.0, 1.0), (3.0, 3.0), (0.5, 2.0)];
        let base = kendall_tau(&rows).unwrap();
        let squashed: Vec<(f64, f64)> = rows
            .iter()
            .map(|(n, p)| (libm::log(*n), p * p * p))
            .collect();
        assert_eq!(kendall_tau(&squashed), Some(base));
    }

    #[test]
    fn coverage_basics() {
        assert_eq!(coverage(4, 4), 100.0);
        assert_eq!(coverage(0, 4), 0.0);
        assert_eq!(coverage(3, 4), 75.0);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let rows = alloc::vec![
            row("a", 1.0, 2.0, 2.1),
            row("b", 2.0, 1.0, 0.9),
            row("c", 1.5, 3.0, 3.0),
        ];
        let mut rev = rows.clone();
        rev.reverse();
        let m1 = compute_metrics(rows, Vec::new());
        let m2 = compute_metrics(rev, Vec::new());
        assert_eq!(m1.rms_error_pct, m2.rms_error_pct);
        assert_eq!(m1.kendall_tau, m2.kendall_tau);
        assert_eq!(m1.coverage_pct, m2.coverage_pct);
    }

    #[test]
    fn heatmap_ratio_columns() {
        let rows = [row("a", 1.0, 2.0, 2.0), row("b", 1.0, 2.0, 3.0)];
        let csv = heatmap_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "block_id,native_ipc,predicted_ipc,ratio,weight"
        );
        assert_eq!(lines.next().unwrap(), "a,2,2,1,1");
        assert_eq!(lines.next().unwrap(), "b,2,3,1.5,1");
    }
}
