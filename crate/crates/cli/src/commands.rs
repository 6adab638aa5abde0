//! The five subcommands. Each writes its files through an [`Emitter`] and
//! returns a [`Verdict`]; only the caller turns verdicts into exit codes.

use binutil::tail_bounds::{scan_grid, GBoundReport};
use binutil::value_functions::UiReport;
use binutil::{
    build_grid, coefficients, coefficients_probe, convergence_sweep, g_bound_check, one_step_risk_neutral_check,
    uniform_integrability_probe, ConvergenceTable, Mode, TailBoundReport, Utility,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Command, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{real, reals, tag, Cell, Emitter, Table};

/// Largest local dominance constant the tail gate accepts.
pub const TAIL_GATE_CMAX: f64 = 10.0;
/// Slack for "global sup <= local sup" and for the `g_n` certificate margin.
pub const TAIL_GATE_SLACK: f64 = 1e-9;
/// Largest accepted one-step martingale residual.
pub const RESIDUAL_LIMIT: f64 = 1e-12;

/// Outcome of one subcommand: the cases that failed their check, if any.
#[derive(Debug, Clone, Default)]
pub struct Verdict {
    pub command: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
    /// Probe runs are observations; they never fail.
    pub probe: bool,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn label(&self) -> &'static str {
        match (self.probe, self.passed()) {
            (true, _) => "PROBE",
            (false, true) => "PASS",
            (false, false) => "FAIL",
        }
    }
}

fn pairs(cfg: &RunConfig) -> Vec<(f64, u64)> {
    cfg.p.iter().flat_map(|&p| cfg.n.iter().map(move |&n| (p, n))).collect()
}

fn object(entries: Vec<(&str, Value)>) -> Map<String, Value> {
    entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn with_command(cfg: &RunConfig, command: Command, map: Map<String, Value>) -> Map<String, Value> {
    let mut map = map;
    map.insert("command".into(), Value::String(command.as_str().into()));
    map.insert("probe".into(), Value::Bool(cfg.probe));
    map
}

struct TailCase {
    report: TailBoundReport,
    g: Option<GBoundReport>,
    local_verified: bool,
}

fn tail_failures(c: &TailCase) -> Vec<String> {
    let r = &c.report;
    let mut out = Vec::new();
    if !(r.c_right <= TAIL_GATE_CMAX && r.c_left <= TAIL_GATE_CMAX) {
        out.push(format!(
            "n={} p={}: local constant exceeds {TAIL_GATE_CMAX} (c_right={:.6e}, c_left={:.6e}, ln c_left={:.6})",
            r.n, r.p, r.c_right, r.c_left, r.ln_c_left
        ));
    }
    if !r.global_within_local(TAIL_GATE_SLACK) {
        out.push(format!(
            "n={} p={}: global constant above local (right {:.6e} vs {:.6e}, left {:.6e} vs {:.6e})",
            r.n, r.p, r.c_global_right, r.c_right, r.c_global_left, r.c_left
        ));
    }
    if !c.local_verified {
        out.push(format!(
            "n={} p={}: re-verification of the local constant failed",
            r.n, r.p
        ));
    }
    if let Some(g) = &c.g {
        if !(g.max_margin <= TAIL_GATE_SLACK) {
            out.push(format!(
                "n={} p={}: g_n certificate margin {} > 0",
                r.n, r.p, g.max_margin
            ));
        }
    }
    out
}

pub fn tailcheck(cfg: &RunConfig, emit: &mut Emitter) -> CliResult<Verdict> {
    let cases = pairs(cfg)
        .into_par_iter()
        .map(|(p, n)| -> CliResult<TailCase> {
            let grid = build_grid(n, p)?;
            let report = scan_grid(&grid);
            let local_verified = report.verify_local(&grid, 1e-12);
            let g = if p >= 0.5 { Some(g_bound_check(n, p)?) } else { None };
            Ok(TailCase {
                report,
                g,
                local_verified,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut verdict = Verdict {
        command: "tailcheck",
        cases: cases.len(),
        probe: cfg.probe,
        ..Default::default()
    };
    let mut table = Table::new(&[
        "n",
        "p",
        "c_right",
        "c_left",
        "argmax_right",
        "argmax_left",
        "c_global_right",
        "c_global_left",
        "ln_c_right",
        "ln_c_left",
        "ln_c_global_right",
        "ln_c_global_left",
        "g_max_margin",
        "g_argmax_k",
        "pass",
        "probe",
    ]);
    for c in &cases {
        let r = &c.report;
        let failures = tail_failures(c);
        let pass = failures.is_empty();
        if !cfg.probe {
            verdict.failures.extend(failures.iter().cloned());
        }
        table.push(vec![
            r.n.into(),
            r.p.into(),
            r.c_right.into(),
            r.c_left.into(),
            r.argmax_right.into(),
            r.argmax_left.into(),
            r.c_global_right.into(),
            r.c_global_left.into(),
            r.ln_c_right.into(),
            r.ln_c_left.into(),
            r.ln_c_global_right.into(),
            r.ln_c_global_left.into(),
            c.g.as_ref().map(|g| g.max_margin).into(),
            c.g.as_ref().and_then(|g| g.argmax_k).into(),
            pass.into(),
            cfg.probe.into(),
        ]);
        if emit.format().json() {
            let mut obj = object(vec![
                ("n", r.n.into()),
                ("p", real(r.p)),
                ("c_right", real(r.c_right)),
                ("c_left", real(r.c_left)),
                ("argmax_right", r.argmax_right.into()),
                ("argmax_left", r.argmax_left.into()),
                ("c_global_right", real(r.c_global_right)),
                ("c_global_left", real(r.c_global_left)),
                ("ln_c_right", real(r.ln_c_right)),
                ("ln_c_left", real(r.ln_c_left)),
                ("ln_c_global_right", real(r.ln_c_global_right)),
                ("ln_c_global_left", real(r.ln_c_global_left)),
                ("pass", pass.into()),
                ("failures", json!(failures)),
            ]);
            if let Some(g) = &c.g {
                obj.insert(
                    "g_bound".into(),
                    json!({
                        "max_margin": real(g.max_margin),
                        "argmax_k": g.argmax_k,
                        "extreme_log_ratio": real(g.extreme_log_ratio),
                    }),
                );
            }
            emit.json(
                &format!("tailcheck_p{}_n{}", tag(r.p), r.n),
                with_command(cfg, Command::Tailcheck, obj),
            )?;
        }
    }
    if emit.format().csv() {
        emit.csv("tailcheck", &table)?;
    }
    Ok(verdict)
}

pub fn coeffs(cfg: &RunConfig, emit: &mut Emitter) -> CliResult<Verdict> {
    let rows = pairs(cfg)
        .into_par_iter()
        .map(|(p, n)| {
            if p < 0.5 {
                coefficients_probe(n, p)
            } else {
                coefficients(n, p)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut verdict = Verdict {
        command: "coeffs",
        cases: rows.len(),
        probe: cfg.probe,
        ..Default::default()
    };
    let mut table = Table::new(&[
        "n",
        "p",
        "a",
        "b",
        "a_asym2",
        "b_asym2",
        "a_remainder",
        "b_remainder",
        "a_remainder_scaled",
        "b_remainder_scaled",
        "one_step_residual",
    ]);
    for c in &rows {
        let nf = c.n as f64;
        let residual = one_step_risk_neutral_check(c);
        if !(residual <= RESIDUAL_LIMIT) && !cfg.probe {
            verdict
                .failures
                .push(format!("n={} p={}: one-step residual {residual}", c.n, c.p));
        }
        let (ra, rb) = (c.a - c.a_asym2, c.b - c.b_asym2);
        table.push(vec![
            c.n.into(),
            c.p.into(),
            c.a.into(),
            c.b.into(),
            c.a_asym2.into(),
            c.b_asym2.into(),
            ra.into(),
            rb.into(),
            (ra * nf).into(),
            (rb * nf * nf).into(),
            residual.into(),
        ]);
    }
    emit.table("coeffs", &table, with_command(cfg, Command::Coeffs, Map::new()))?;
    Ok(verdict)
}

fn continuous_json(t: &ConvergenceTable) -> Value {
    json!({
        "value": real(t.continuous.value),
        "error_estimate": real(t.continuous.error_estimate),
        "finite": t.continuous.finite,
        "reason": t.continuous.reason,
        "dual_argument": t.continuous.dual_argument.map(real),
    })
}

pub fn converge(cfg: &RunConfig, spec: &Utility, emit: &mut Emitter) -> CliResult<Verdict> {
    let mut tasks = Vec::new();
    for &p in &cfg.p {
        tasks.extend(cfg.dual_arguments().into_iter().map(|y| (p, Mode::Dual, y)));
        tasks.extend(cfg.x.iter().map(|&x| (p, Mode::Primal, x)));
    }
    let results: Vec<_> = tasks
        .par_iter()
        .map(|&(p, mode, arg)| convergence_sweep(spec, p, arg, mode, &cfg.n))
        .collect();

    let mut verdict = Verdict {
        command: "converge",
        cases: tasks.len(),
        ..Default::default()
    };
    let mut summary = Table::new(&[
        "p",
        "utility",
        "mode",
        "argument",
        "continuous_value",
        "final_n",
        "final_gap",
        "within_tolerance_from",
        "gap_monotone",
        "lower_consistent",
        "upper_consistent",
        "tolerance",
        "verdict",
        "reason",
    ]);
    for (&(p, mode, arg), result) in tasks.iter().zip(results) {
        let stem = format!("converge_p{}_{}_{}", tag(p), mode.as_str(), tag(arg));
        let table = match result {
            Ok(t) => t,
            Err(binutil::Error::Numerical(msg)) => {
                verdict.failures.push(format!("{stem}: {msg}"));
                summary.push(vec![
                    p.into(),
                    spec.tag().into(),
                    mode.as_str().into(),
                    arg.into(),
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    Cell::Empty,
                    cfg.tol.into(),
                    "FAIL".into(),
                    msg.into(),
                ]);
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        let s = table.summary(cfg.tol);
        let mut reason = String::new();
        if !table.continuous.finite {
            reason = format!(
                "continuous value not finite: {}",
                table.continuous.reason.clone().unwrap_or_default()
            );
        } else if let Some(r) = table.rows.iter().find(|r| !r.value.is_finite()) {
            reason = format!("value at n={} not finite", r.n);
        } else if !table.passes(cfg.tol) {
            reason = format!("|final gap| {} above tolerance {}", s.final_gap.abs(), cfg.tol);
        }
        let pass = reason.is_empty();
        if !pass {
            verdict.failures.push(format!("{stem}: {reason}"));
        }
        let mut rows = Table::new(&["n", "value", "gap", "error_estimate"]);
        for r in &table.rows {
            rows.push(vec![r.n.into(), r.value.into(), r.gap.into(), r.error_estimate.into()]);
        }
        let extra = object(vec![
            ("p", real(p)),
            ("utility", Value::String(table.utility.clone())),
            ("mode", Value::String(mode.as_str().into())),
            ("argument", real(arg)),
            ("continuous", continuous_json(&table)),
            (
                "summary",
                json!({
                    "tolerance": real(s.tolerance),
                    "final_n": s.final_n,
                    "final_gap": real(s.final_gap),
                    "within_tolerance_from": s.within_tolerance_from,
                    "gap_monotone": s.gap_monotone,
                    "lower_consistent": s.lower_consistent,
                    "upper_consistent": s.upper_consistent,
                    "verdict": if pass { "PASS" } else { "FAIL" },
                }),
            ),
        ]);
        emit.table(&stem, &rows, with_command(cfg, Command::Converge, extra))?;
        summary.push(vec![
            p.into(),
            table.utility.clone().into(),
            mode.as_str().into(),
            arg.into(),
            table.continuous.value.into(),
            s.final_n.into(),
            s.final_gap.into(),
            s.within_tolerance_from.into(),
            s.gap_monotone.into(),
            s.lower_consistent.into(),
            s.upper_consistent.into(),
            cfg.tol.into(),
            (if pass { "PASS" } else { "FAIL" }).into(),
            reason.into(),
        ]);
    }
    emit.table(
        "converge_summary",
        &summary,
        with_command(cfg, Command::Converge, Map::new()),
    )?;
    Ok(verdict)
}

fn ui_failures(r: &UiReport) -> Vec<String> {
    let mut out = Vec::new();
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0]);
    if !mono(&r.sup_right) || !mono(&r.sup_left) {
        out.push(format!("p={} y={}: sup curves are not non-increasing in M", r.p, r.y));
    }
    if !r.dominance_holds() {
        out.push(format!("p={} y={}: a tail sum exceeds its Gaussian bound", r.p, r.y));
    }
    out
}

pub fn uiprobe(cfg: &RunConfig, spec: &Utility, emit: &mut Emitter) -> CliResult<Verdict> {
    let ys = if cfg.y.is_empty() { vec![1.0] } else { cfg.y.clone() };
    let tasks: Vec<(f64, f64)> = cfg.p.iter().flat_map(|&p| ys.iter().map(move |&y| (p, y))).collect();
    let reports = tasks
        .par_iter()
        .map(|&(p, y)| uniform_integrability_probe(spec, p, y, &cfg.m, &cfg.n))
        .collect::<Result<Vec<_>, _>>()?;

    let mut verdict = Verdict {
        command: "uiprobe",
        cases: reports.len(),
        probe: cfg.probe,
        ..Default::default()
    };
    for r in &reports {
        let failures = ui_failures(r);
        if !cfg.probe && r.p >= 0.5 {
            verdict.failures.extend(failures.iter().cloned());
        }
        let mut rows = Table::new(&[
            "n",
            "m",
            "right_tail",
            "left_tail",
            "ln_right_tail",
            "ln_left_tail",
            "ln_gauss_right",
            "ln_gauss_left",
            "ln_c_right",
            "ln_c_left",
            "right_dominated",
            "left_dominated",
        ]);
        for row in &r.rows {
            rows.push(vec![
                row.n.into(),
                row.m.into(),
                row.right_tail.into(),
                row.left_tail.into(),
                row.ln_right_tail.into(),
                row.ln_left_tail.into(),
                row.ln_gauss_right.into(),
                row.ln_gauss_left.into(),
                row.ln_c_right.into(),
                row.ln_c_left.into(),
                row.right_dominated.into(),
                row.left_dominated.into(),
            ]);
        }
        let mut sup = Table::new(&["m", "sup_right", "sup_left"]);
        for ((&m, &sr), &sl) in r.m_list.iter().zip(&r.sup_right).zip(&r.sup_left) {
            sup.push(vec![m.into(), sr.into(), sl.into()]);
        }
        let stem = format!("uiprobe_p{}_y{}", tag(r.p), tag(r.y));
        if emit.format().csv() {
            emit.csv(&stem, &rows)?;
            emit.csv(&format!("{stem}_sup"), &sup)?;
        }
        if emit.format().json() {
            let verdict_label = if cfg.probe || r.p < 0.5 {
                Value::Null
            } else {
                Value::String(if failures.is_empty() { "PASS" } else { "FAIL" }.into())
            };
            let obj = object(vec![
                ("p", real(r.p)),
                ("utility", Value::String(r.utility.clone())),
                ("y", real(r.y)),
                ("m_list", reals(&r.m_list)),
                ("n_list", json!(r.n_list)),
                ("sup_right", reals(&r.sup_right)),
                ("sup_left", reals(&r.sup_left)),
                ("dominance_checks", r.dominance_checks().into()),
                ("verdict", verdict_label),
                ("failures", json!(failures)),
                ("rows", rows.json_rows()),
            ]);
            emit.json(&stem, with_command(cfg, Command::Uiprobe, obj))?;
        }
    }
    Ok(verdict)
}

/// Runs every sweep on one configuration and adds a `report` summary file.
pub fn report(cfg: &RunConfig, spec: &Utility, emit: &mut Emitter) -> CliResult<Vec<Verdict>> {
    let verdicts = vec![
        tailcheck(cfg, emit)?,
        coeffs(cfg, emit)?,
        converge(cfg, spec, emit)?,
        uiprobe(cfg, spec, emit)?,
    ];
    let mut table = Table::new(&["command", "cases", "verdict", "failures"]);
    for v in &verdicts {
        table.push(vec![
            v.command.into(),
            (v.cases as u64).into(),
            v.label().into(),
            v.failures.join("; ").into(),
        ]);
    }
    emit.table("report", &table, with_command(cfg, Command::Report, Map::new()))?;
    Ok(verdicts)
}

/// Exit status for a set of verdicts: 3 if any non-probe check failed.
pub fn exit_code(verdicts: &[Verdict]) -> i32 {
    if verdicts.iter().all(|v| v.probe || v.passed()) {
        0
    } else {
        CliError::Numerical(String::new()).exit_code()
    }
}
