//! Plain-text result files: per-run traces, comparison summaries, and
//! λ-sweep tables.
//!
//! Every float prints with 17 significant digits (`{:.16e}`) so the files
//! round-trip bit-for-bit, and every file ends with a newline. Identical
//! runs therefore produce byte-identical files.

use serde::Serialize;

use isvrg::TraceRecord;

/// Column header of every per-run trace file.
pub const TRACE_HEADER: &str = "epoch,cum_ifo,objective,grad_sq,step_size,branch,second_moment";

/// Column header of the comparison summary.
pub const SUMMARY_HEADER: &str =
    "checkpoint_ifo,optimizer,median_grad_sq,min_grad_sq,max_grad_sq,seeds";

/// Column header of the λ-sweep table.
pub const SWEEP_HEADER: &str =
    "lambda,median_final_grad_sq,min_final_grad_sq,max_final_grad_sq,seeds";

/// Render a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// File name of one (optimizer, seed) cell's trace.
pub fn trace_file_name(optimizer: &str, seed: u64) -> String {
    format!("{optimizer}_{seed}.csv")
}

/// Render a run trace as CSV, one row per epoch record.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in trace {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch,
            r.cumulative_ifo,
            fmt_float(r.objective),
            fmt_float(r.grad_sq),
            fmt_float(r.step_size_last),
            r.branch_last,
            fmt_float(r.second_moment_est),
        ));
    }
    out
}

/// One summary entry: seed statistics for one optimizer at one
/// matched-budget checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    /// Cumulative optimization-channel oracle calls the row is matched at.
    pub checkpoint_ifo: u64,
    pub optimizer: String,
    pub median_grad_sq: f64,
    pub min_grad_sq: f64,
    pub max_grad_sq: f64,
    /// Seeds that contributed (diverged seeds are excluded).
    pub seeds: usize,
}

/// Render the comparison summary as CSV.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.checkpoint_ifo,
            r.optimizer,
            fmt_float(r.median_grad_sq),
            fmt_float(r.min_grad_sq),
            fmt_float(r.max_grad_sq),
            r.seeds,
        ));
    }
    out
}

/// Render the comparison summary as JSON (pretty, trailing newline).
pub fn summary_json(rows: &[SummaryRow]) -> String {
    let mut out = serde_json::to_string_pretty(rows).expect("summary rows serialize");
    out.push('\n');
    out
}

/// One λ-sweep entry: seed statistics of the budget-final squared gradient
/// norm at one λ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub median_final_grad_sq: f64,
    pub min_final_grad_sq: f64,
    pub max_final_grad_sq: f64,
    /// Seeds that contributed (diverged seeds are excluded).
    pub seeds: usize,
}

/// Render the λ-sweep table as CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(r.lambda),
            fmt_float(r.median_final_grad_sq),
            fmt_float(r.min_final_grad_sq),
            fmt_float(r.max_final_grad_sq),
            r.seeds,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use isvrg::Branch;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.0,
            -0.0,
            0.1,
            -3.5,
            1.0 / 3.0,
            1e-300,
            2.2250738585072014e-308,
            1.7976931348623157e308,
            (2.0f64).sqrt(),
        ] {
            let printed = fmt_float(x);
            let back: f64 = printed.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{printed}");
        }
    }

    #[test]
    fn trace_rows_render_all_columns() {
        let trace = vec![
            TraceRecord {
                epoch: 0,
                cumulative_ifo: 0,
                objective: 1.5,
                grad_sq: 0.25,
                step_size_last: 0.0,
                branch_last: Branch::Decayed,
                second_moment_est: 0.0,
            },
            TraceRecord {
                epoch: 1,
                cumulative_ifo: 24,
                objective: 0.75,
                grad_sq: 0.0625,
                step_size_last: 0.5,
                branch_last: Branch::Fixed,
                second_moment_est: 0.125,
            },
        ];
        let text = trace_csv(&trace);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], TRACE_HEADER);
        assert_eq!(
            lines[1],
            "0,0,1.5000000000000000e0,2.5000000000000000e-1,0.0000000000000000e0,\
             decayed,0.0000000000000000e0"
        );
        assert!(lines[2].starts_with("1,24,7.5"));
        assert!(lines[2].contains(",fixed,"));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn summary_and_sweep_have_stable_headers_and_trailing_newlines() {
        let srow = SummaryRow {
            checkpoint_ifo: 100,
            optimizer: "isvrg+".into(),
            median_grad_sq: 0.5,
            min_grad_sq: 0.25,
            max_grad_sq: 1.0,
            seeds: 11,
        };
        let summary = summary_csv(&[srow.clone()]);
        assert!(summary.starts_with(SUMMARY_HEADER));
        assert!(summary.ends_with('\n'));
        assert!(summary.contains("100,isvrg+,5.0"));
        let json = summary_json(&[srow]);
        assert!(json.ends_with('\n'));
        assert!(json.contains("\"checkpoint_ifo\": 100"));

        let sweep = sweep_csv(&[SweepRow {
            lambda: 0.5,
            median_final_grad_sq: 1.0,
            min_final_grad_sq: 1.0,
            max_final_grad_sq: 1.0,
            seeds: 3,
        }]);
        assert!(sweep.starts_with(SWEEP_HEADER));
        assert!(sweep.ends_with('\n'));
    }
}
