//! Rendering of training, evaluation and pipeline reports.
//!
//! Machine-readable outputs (CSV) carry only deterministic fields, so two
//! runs with the same inputs and seeds produce byte-identical artifacts;
//! wall-clock timing figures appear in the human-readable text forms
//! only.

use std::fmt::Write as _;

use mdn_ik_core::mdn::TrainingReport;

use crate::pipeline::PipelineRunReport;

/// Training report CSV: `epoch,lr,train_nll,val_nll`.
pub fn training_report_csv(report: &TrainingReport) -> String {
    let mut out = String::from("epoch,lr,train_nll,val_nll\n");
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{:.6e},{:.10e},{:.10e}",
            r.epoch, r.lr, r.train_nll, r.val_nll
        );
    }
    out
}

/// One evaluated target.
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub index: usize,
    pub target: [f64; 3],
    /// Within total link length of the base; rows outside are flagged and
    /// excluded from the summary statistics.
    pub reachable: bool,
    pub position_error_mm: f64,
    /// Per-joint absolute difference against the numerical solver,
    /// degrees.
    pub joint_error_deg: Vec<f64>,
    /// Whether the reference solver converged for this target.
    pub dls_converged: bool,
    pub inference_us: f64,
}

pub struct EvalSummary {
    pub evaluated: usize,
    pub flagged: usize,
    pub mean_position_error_mm: f64,
    pub worst_position_error_mm: f64,
    pub mean_joint_error_deg: Vec<f64>,
    pub mean_inference_us: f64,
}

pub fn summarize_eval(rows: &[EvalRow], dof: usize) -> EvalSummary {
    let included: Vec<&EvalRow> = rows.iter().filter(|r| r.reachable).collect();
    let n = included.len().max(1) as f64;
    let mut mean_joint = vec![0.0; dof];
    for row in &included {
        for (acc, &e) in mean_joint.iter_mut().zip(&row.joint_error_deg) {
            *acc += e / n;
        }
    }
    EvalSummary {
        evaluated: included.len(),
        flagged: rows.len() - included.len(),
        mean_position_error_mm: included.iter().map(|r| r.position_error_mm).sum::<f64>() / n,
        worst_position_error_mm: included
            .iter()
            .map(|r| r.position_error_mm)
            .fold(0.0, f64::max),
        mean_joint_error_deg: mean_joint,
        mean_inference_us: included.iter().map(|r| r.inference_us).sum::<f64>() / n,
    }
}

/// Evaluation table, machine form. Deterministic: no timing column.
pub fn eval_csv(rows: &[EvalRow], dof: usize) -> String {
    let mut out = String::from("index,target_x,target_y,target_z,reachable,position_error_mm");
    for j in 0..dof {
        let _ = write!(out, ",joint{j}_error_deg");
    }
    out.push('\n');
    for row in rows {
        let _ = write!(
            out,
            "{},{:.9},{:.9},{:.9},{}",
            row.index, row.target[0], row.target[1], row.target[2], row.reachable as u8
        );
        if row.reachable {
            let _ = write!(out, ",{:.6}", row.position_error_mm);
            for e in &row.joint_error_deg {
                let _ = write!(out, ",{e:.6}");
            }
        } else {
            for _ in 0..=dof {
                out.push(',');
            }
        }
        out.push('\n');
    }
    out
}

/// Evaluation table, human form, including per-target inference time.
pub fn eval_text(rows: &[EvalRow], dof: usize) -> String {
    let mut out = String::new();
    let _ = write!(
        out,
        "{:>3}  {:>8} {:>8} {:>8}  {:>10}",
        "#", "x", "y", "z", "pos err mm"
    );
    for j in 0..dof {
        let _ = write!(out, "  {:>8}", format!("|dq{j}| deg"));
    }
    let _ = writeln!(out, "  {:>9}  note", "infer us");
    for row in rows {
        let _ = write!(
            out,
            "{:>3}  {:>8.4} {:>8.4} {:>8.4}",
            row.index, row.target[0], row.target[1], row.target[2]
        );
        if row.reachable {
            let _ = write!(out, "  {:>10.3}", row.position_error_mm);
            for e in &row.joint_error_deg {
                let _ = write!(out, "  {e:>8.2}");
            }
            let _ = write!(out, "  {:>9.1}", row.inference_us);
            if !row.dls_converged {
                let _ = write!(out, "  dls-not-converged");
            }
        } else {
            let _ = write!(out, "  {:>10}", "-");
            for _ in 0..dof {
                let _ = write!(out, "  {:>8}", "-");
            }
            let _ = write!(out, "  {:>9}  unreachable (beyond total link length)", "-");
        }
        out.push('\n');
    }
    let summary = summarize_eval(rows, dof);
    let _ = writeln!(
        out,
        "\nsummary over {} reachable targets ({} flagged): mean {:.3} mm, worst {:.3} mm, mean inference {:.1} us",
        summary.evaluated,
        summary.flagged,
        summary.mean_position_error_mm,
        summary.worst_position_error_mm,
        summary.mean_inference_us
    );
    let joint_means: Vec<String> = summary
        .mean_joint_error_deg
        .iter()
        .map(|e| format!("{e:.2}"))
        .collect();
    let _ = writeln!(out, "mean |dq| vs dls per joint (deg): [{}]", joint_means.join(", "));
    out
}

/// Pipeline report CSV header for a given dof.
pub fn pipeline_csv_header(dof: usize) -> String {
    let mut out = String::from("detected_blobs,target_x,target_y,target_z");
    for j in 0..dof {
        let _ = write!(out, ",q{j}_rad");
    }
    for j in 0..dof {
        let _ = write!(out, ",d{j}_deg");
    }
    out.push_str(",achieved_x,achieved_y,achieved_z,position_error_mm\n");
    out
}

/// Pipeline report CSV row; deterministic (no timings). Target columns
/// hold the hover-adjusted goal the arm was commanded to.
pub fn pipeline_csv_row(report: &PipelineRunReport, dof: usize) -> String {
    let mut out = format!("{}", report.detected_blobs);
    match &report.outcome {
        Some(o) => {
            for v in [o.goal_world.x, o.goal_world.y, o.goal_world.z] {
                let _ = write!(out, ",{v:.9}");
            }
            for q in o.predicted_config.as_slice() {
                let _ = write!(out, ",{q:.9}");
            }
            for d in &o.commanded_degrees {
                let _ = write!(out, ",{d}");
            }
            for v in [
                o.achieved_position.x,
                o.achieved_position.y,
                o.achieved_position.z,
            ] {
                let _ = write!(out, ",{v:.9}");
            }
            let _ = write!(out, ",{:.6}", o.position_error_mm);
        }
        None => {
            for _ in 0..(3 + 2 * dof + 4) {
                out.push(',');
            }
        }
    }
    out.push('\n');
    out
}

/// Human-readable pipeline report, including stage timings.
pub fn pipeline_text(report: &PipelineRunReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "detected blobs: {}", report.detected_blobs);
    match &report.outcome {
        None => {
            let _ = writeln!(out, "no colonies detected; nothing to sample");
        }
        Some(o) => {
            let _ = writeln!(
                out,
                "chosen target (plate): ({:.4}, {:.4}, {:.4}) m",
                o.chosen_target_world.x, o.chosen_target_world.y, o.chosen_target_world.z
            );
            let _ = writeln!(
                out,
                "commanded goal (hover): ({:.4}, {:.4}, {:.4}) m",
                o.goal_world.x, o.goal_world.y, o.goal_world.z
            );
            let q: Vec<String> = o
                .predicted_config
                .as_slice()
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect();
            let _ = writeln!(out, "predicted config (rad): [{}]", q.join(", "));
            let d: Vec<String> = o.commanded_degrees.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "commanded degrees: [{}]", d.join(", "));
            let _ = writeln!(out, "command line: {:?}", o.command_line);
            let _ = writeln!(
                out,
                "achieved position: ({:.4}, {:.4}, {:.4}) m",
                o.achieved_position.x, o.achieved_position.y, o.achieved_position.z
            );
            let _ = writeln!(out, "position error: {:.3} mm", o.position_error_mm);
        }
    }
    let t = &report.timings;
    let _ = writeln!(
        out,
        "stage timings (us): segment {} | blobs {} | project {} | predict {} | calibrate {} | total {}",
        t.segment_us, t.blobs_us, t.project_us, t.predict_us, t.calibrate_us, t.total_us
    );
    out
}
