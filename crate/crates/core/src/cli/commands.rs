//! Subcommand bodies. Each returns an [`Outcome`]; nothing is written to
//! disk here.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::{CaseConfig, RunConfig};
use crate::continuation::{
    audit_monotonicity, certify_mu1, decide_existence, default_radii, q_at_infinity, stage_sweep,
    subcritical_scaling_check, sup_bound_monitor, MonotonicityReport,
};
use crate::discretize::{OperatorAssembly, RadialGrid};
use crate::error::{Error, Result};
use crate::geometry::{aubin_talenti_bubble, registry, sphere_yamabe_constant, ModelManifold, WeightSpec};
use crate::io::{field_csv, fmt_f64, text_table, trace_csv, TRACE_HEADER};
use crate::minimize::{decay_check, max_point_check, minimize_q};
use crate::spectral::{mu_bottom, q_equals_mu_check};

/// Results of one command, written out by the caller.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: u8,
    pub summary: Option<Value>,
    pub trace_csv: Option<String>,
    pub field_csv: Option<String>,
    /// Human-readable report for standard output.
    pub report: String,
}

fn to_value(v: &impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn setup(cfg: &RunConfig) -> Result<(ModelManifold<f64>, RadialGrid<f64>, OperatorAssembly<f64>)> {
    let m = cfg.model()?;
    let g = cfg.grid(&m)?;
    let a = OperatorAssembly::assemble(&m, &g, &WeightSpec::default())?;
    Ok((m, g, a))
}

fn grid_value(m: &ModelManifold<f64>, g: &RadialGrid<f64>) -> Value {
    to_value(&g.summary(m.label(), m.n()))
}

pub fn cmd_q(cfg: &RunConfig) -> Result<Outcome> {
    let (m, g, a) = setup(cfg)?;
    let alpha = cfg.weight.alpha;
    let p = cfg.p.unwrap_or_else(|| a.p_crit());
    let e = minimize_q(&a, alpha, p, &cfg.minimize, None)?;
    let sphere = sphere_yamabe_constant::<f64>(m.n())?;
    let max_point = max_point_check(&m, a.weight_spec(), &e, 1e-2)?;
    let summary = json!({
        "command": "q",
        "grid": grid_value(&m, &g),
        "extremal": to_value(&e.summary()),
        "sphere_constant": sphere,
        "max_point_check": max_point,
    });
    let report = format!(
        "{}: Q = {} (alpha = {}, p = {}), residual {:e}, {} iterations; Q(S^n) = {}\n",
        m.label(),
        fmt_f64(e.q),
        fmt_f64(alpha),
        fmt_f64(p),
        e.residual,
        e.iterations,
        fmt_f64(sphere)
    );
    Ok(Outcome { code: 0, summary: Some(summary), trace_csv: None, field_csv: Some(field_csv(&a, &e.v, alpha)?), report })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MuRow {
    r_max: f64,
    #[serde(rename = "N")]
    nodes: usize,
    value: f64,
    residual: f64,
    iterations: usize,
}

pub fn cmd_mu(cfg: &RunConfig) -> Result<Outcome> {
    let m = cfg.model()?;
    let gc = cfg.grid_config()?.clone();
    let mut radii = cfg.mu.r_max_sweep.clone();
    radii.push(gc.r_max);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let h = (gc.r_max - gc.r_inner) / (gc.nodes as f64 + 1.0);
    let rows: Vec<Result<(MuRow, Vec<f64>)>> = radii
        .par_iter()
        .map(|&r| {
            // same mesh width as the configured grid
            let nodes = (((r - gc.r_inner) / h).round() as usize).saturating_sub(1).max(1);
            let g = RadialGrid::build(&m, gc.r_inner, r, nodes)?;
            let a = OperatorAssembly::assemble(&m, &g, &WeightSpec::default())?;
            let s = mu_bottom(&a, cfg.mu.tol, cfg.mu.max_iter)?;
            let row = MuRow { r_max: r, nodes, value: s.value, residual: s.residual, iterations: s.iterations };
            Ok((row, s.eigenfield.into_inner()))
        })
        .collect();
    let rows: Vec<(MuRow, Vec<f64>)> = rows.into_iter().collect::<Result<_>>()?;
    let monotone = rows.windows(2).all(|w| w[1].0.value <= w[0].0.value);
    let main = rows.iter().find(|(r, _)| r.r_max == gc.r_max).expect("configured radius is in the sweep");
    let g = cfg.grid(&m)?;
    let a = OperatorAssembly::assemble(&m, &g, &WeightSpec::default())?;
    let summary = json!({
        "command": "mu",
        "grid": grid_value(&m, &g),
        "mu": {"value": main.0.value, "residual": main.0.residual, "r_max": main.0.r_max},
        "sweep": rows.iter().map(|(r, _)| to_value(r)).collect::<Vec<_>>(),
        "nonincreasing_in_r_max": monotone,
    });
    let table = text_table(
        &["r_max", "N", "mu", "residual"],
        &rows
            .iter()
            .map(|(r, _)| vec![fmt_f64(r.r_max), r.nodes.to_string(), fmt_f64(r.value), format!("{:e}", r.residual)])
            .collect::<Vec<_>>(),
    );
    Ok(Outcome { code: 0, summary: Some(summary), trace_csv: None, field_csv: Some(field_csv(&a, &main.1, 0.0)?), report: table })
}

pub fn cmd_continue(cfg: &RunConfig) -> Result<Outcome> {
    let (m, g, a) = setup(cfg)?;
    let sched = cfg.schedule(m.n())?;
    let verdict = decide_existence(&m, &g, &WeightSpec::default(), &sched, &cfg.minimize, &cfg.margins)?;
    let summary_v = verdict.summary();
    let blowup = verdict.trace.as_ref().map(|t| {
        let r = sup_bound_monitor(t, None);
        json!({
            "threshold": r.threshold,
            "flagged": r.flagged,
            "profiles": r.profiles.iter().map(|p| json!({
                "record": p.record, "m_p": p.m_p, "delta_p": p.delta_p,
                "lambda": p.lambda, "bubble_distance": p.bubble_distance,
            })).collect::<Vec<_>>(),
        })
    });
    let summary = json!({
        "command": "continue",
        "grid": grid_value(&m, &g),
        "mu": {"value": verdict.mu_value, "residual": verdict.mu_residual, "r_max": g.r_max()},
        "verdict": to_value(&summary_v),
        "qinf": verdict.qinf.as_ref().map(to_value),
        "blowup": blowup,
    });
    let trace = match &verdict.trace {
        Some(t) => trace_csv(t),
        None => format!("{}\n", TRACE_HEADER.join(",")),
    };
    let field = match &verdict.final_extremal {
        Some(e) => Some(field_csv(&a, &e.v, 0.0)?),
        None => None,
    };
    let failed = verdict.trace.as_ref().is_some_and(|t| t.failed());
    let code = if verdict.final_extremal.is_some() {
        0
    } else if failed {
        3
    } else {
        1
    };
    let mut report = format!(
        "{}: mu = {}, Q = {}, Qbar = {}\nhypotheses: mu_positive={} qbar_exceeds_q={} q_below_sphere={}\n",
        m.label(),
        fmt_f64(verdict.mu_value),
        summary_v.q_estimate.map_or("n/a".into(), fmt_f64),
        summary_v.q_inf_estimate.map_or("n/a".into(), fmt_f64),
        summary_v.hypotheses_met.mu_positive,
        summary_v.hypotheses_met.qbar_exceeds_q,
        summary_v.hypotheses_met.q_below_sphere,
    );
    for n in &summary_v.notes {
        report.push_str(&format!("note: {n}\n"));
    }
    Ok(Outcome { code, summary: Some(summary), trace_csv: Some(trace), field_csv: field, report })
}

pub fn cmd_qinf(cfg: &RunConfig) -> Result<Outcome> {
    let (m, g, _) = setup(cfg)?;
    let radii = cfg.qinf.radii.clone().unwrap_or_else(|| default_radii(g.r_max()));
    let rep = q_at_infinity(&m, &g, &WeightSpec::default(), &radii, &cfg.minimize)?;
    let errors = rep.estimates.iter().any(|e| e.error.is_some());
    let table = text_table(
        &["R", "R_node", "Q_radial", "Q_estimate"],
        &rep.estimates
            .iter()
            .map(|e| {
                vec![
                    fmt_f64(e.radius),
                    fmt_f64(e.inner_node_r),
                    e.q_radial.map_or_else(|| e.error.clone().unwrap_or_default(), fmt_f64),
                    e.q.map_or("n/a".into(), fmt_f64),
                ]
            })
            .collect::<Vec<_>>(),
    );
    let summary = json!({
        "command": "qinf",
        "grid": grid_value(&m, &g),
        "qinf": to_value(&rep),
        "radial_nondecreasing": rep.radial_nondecreasing(1e-8),
    });
    Ok(Outcome { code: if errors { 1 } else { 0 }, summary: Some(summary), trace_csv: None, field_csv: None, report: table })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub count: usize,
    pub best_lambda: f64,
    pub min_quotient: f64,
    pub sphere_constant: f64,
    /// `(min − Q(Sⁿ)) / Q(Sⁿ)`.
    pub rel_gap: f64,
    pub passed: bool,
}

/// Critical quotient of the nodal Aubin–Talenti bubble, minus its value at
/// `r_max`, over a log-spaced `λ` sweep.
pub fn bubble_sweep(cfg: &RunConfig) -> Result<(BubbleReport, Vec<f64>, OperatorAssembly<f64>)> {
    let (m, g, a) = setup(cfg)?;
    let bc = &cfg.bubble;
    let lo = bc.lambda_min.unwrap_or(10.0 / g.r_max());
    let hi = bc.lambda_max.unwrap_or(1.0 / (10.0 * g.h()));
    if !(lo > 0.0 && hi > lo) || bc.count < 2 {
        return Err(Error::Config(format!("bubble sweep needs 0 < lambda_min < lambda_max and count >= 2 (got {lo}, {hi}, {})", bc.count)));
    }
    let n = m.n();
    let pc = a.p_crit();
    let lambdas: Vec<f64> = (0..bc.count).map(|i| lo * (hi / lo).powf(i as f64 / (bc.count - 1) as f64)).collect();
    let r_max = g.r_max();
    // shifted down by the boundary value so the trial field vanishes at r_max
    let trial = |l: f64| -> Result<Vec<f64>> {
        let edge = aubin_talenti_bubble(n, l, r_max)?;
        a.radii().iter().map(|&r| Ok(aubin_talenti_bubble(n, l, r)? - edge)).collect()
    };
    let values: Vec<(f64, f64)> = lambdas
        .par_iter()
        .map(|&l| Ok((l, a.quotient(&trial(l)?, 0.0, pc)?)))
        .collect::<Result<_>>()?;
    let (best_lambda, min_quotient) = values.iter().copied().fold((f64::NAN, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
    let sphere = sphere_yamabe_constant::<f64>(n)?;
    let rel_gap = (min_quotient - sphere) / sphere;
    let best = trial(best_lambda)?;
    let report = BubbleReport {
        lambda_min: lo,
        lambda_max: hi,
        count: bc.count,
        best_lambda,
        min_quotient,
        sphere_constant: sphere,
        rel_gap,
        passed: rel_gap.abs() <= bc.tol,
    };
    Ok((report, best, a))
}

pub fn cmd_bubble(cfg: &RunConfig) -> Result<Outcome> {
    let (rep, best, a) = bubble_sweep(cfg)?;
    let m = cfg.model()?;
    let summary = json!({"command": "bubble", "grid": grid_value(&m, a.grid()), "bubble": to_value(&rep)});
    let report = format!(
        "{}: min over lambda of the bubble quotient = {} at lambda = {}; Q(S^n) = {}, relative gap {:e}\n",
        m.label(),
        fmt_f64(rep.min_quotient),
        fmt_f64(rep.best_lambda),
        fmt_f64(rep.sphere_constant),
        rep.rel_gap
    );
    Ok(Outcome {
        code: if rep.passed { 0 } else { 1 },
        summary: Some(summary),
        trace_csv: None,
        field_csv: Some(field_csv(&a, &best, 0.0)?),
        report,
    })
}

fn case_assembly(c: &CaseConfig) -> Result<(ModelManifold<f64>, OperatorAssembly<f64>)> {
    let m = ModelManifold::from_label(&c.model)?;
    let g = RadialGrid::build(&m, 0.0, c.r_max, c.nodes)?;
    let a = OperatorAssembly::assemble(&m, &g, &WeightSpec::default())?;
    Ok((m, a))
}

pub fn cmd_audit(cfg: &RunConfig) -> Result<Outcome> {
    let ac = &cfg.audit;
    let mc = &cfg.minimize;
    let mut lines = Vec::new();
    let mut all = true;
    let mut mark = |name: String, ok: bool, lines: &mut Vec<String>| {
        all &= ok;
        lines.push(format!("{} {name}", if ok { "PASS" } else { "FAIL" }));
    };

    let monotonicity: Vec<(String, MonotonicityReport)> = ac
        .models
        .par_iter()
        .map(|label| {
            let (_, a) =
                case_assembly(&CaseConfig { model: label.clone(), r_max: ac.r_max, nodes: ac.nodes })?;
            let traces = ac
                .alphas
                .par_iter()
                .map(|&al| stage_sweep(&a, al, &ac.ps, mc))
                .collect::<Result<Vec<_>>>()?;
            Ok((label.clone(), audit_monotonicity(&traces, ac.tol, None)))
        })
        .collect::<Result<_>>()?;
    for (label, r) in &monotonicity {
        mark(format!("monotonicity {label} ({} comparisons)", r.comparisons), r.passed, &mut lines);
    }

    let scaling = subcritical_scaling_check(&ac.scaling, mc)?;
    mark(format!("subcritical scaling ratio {} vs {}", fmt_f64(scaling.ratio), fmt_f64(scaling.expected)), scaling.passed, &mut lines);

    let q_mu = ac
        .q_mu
        .par_iter()
        .map(|c| Ok((c.model.clone(), q_equals_mu_check(&case_assembly(c)?.1, ac.q_mu_tol)?)))
        .collect::<Result<Vec<_>>>()?;
    for (label, r) in &q_mu {
        mark(format!("q_equals_mu {label} gap {:e}", r.rel_gap), r.passed, &mut lines);
    }

    let critical = ac
        .critical
        .par_iter()
        .map(|c| {
            let (m, a) = case_assembly(c)?;
            let e = minimize_q(&a, 0.0, a.p_crit(), mc, None)?;
            let mp = max_point_check(&m, a.weight_spec(), &e, ac.max_point_tol)?;
            Ok((c.model.clone(), mp, certify_mu1(&e, ac.certify_tol)))
        })
        .collect::<Result<Vec<_>>>()?;
    for (label, mp, cert) in &critical {
        mark(format!("max_point {label}"), *mp, &mut lines);
        mark(format!("certify_mu1 {label}"), *cert, &mut lines);
    }

    let decay = ac
        .decay
        .par_iter()
        .map(|d| {
            let (_, a) = case_assembly(&CaseConfig { model: d.model.clone(), r_max: d.r_max, nodes: d.nodes })?;
            let e = minimize_q(&a, d.alpha, d.p, mc, None)?;
            Ok((d.model.clone(), decay_check(&e, a.grid(), d.fraction, d.tol)))
        })
        .collect::<Result<Vec<_>>>()?;
    for (label, ok) in &decay {
        mark(format!("decay {label}"), *ok, &mut lines);
    }

    let summary = json!({
        "command": "audit",
        "monotonicity": monotonicity.iter().map(|(l, r)| json!({"model": l, "report": to_value(r)})).collect::<Vec<_>>(),
        "scaling": to_value(&scaling),
        "q_equals_mu": q_mu.iter().map(|(l, r)| json!({"model": l, "report": to_value(r)})).collect::<Vec<_>>(),
        "critical": critical.iter().map(|(l, mp, c)| json!({"model": l, "max_point": mp, "certify_mu1": c})).collect::<Vec<_>>(),
        "decay": decay.iter().map(|(l, ok)| json!({"model": l, "passed": ok})).collect::<Vec<_>>(),
        "passed": all,
    });
    let mut report = lines.join("\n");
    report.push('\n');
    Ok(Outcome { code: if all { 0 } else { 1 }, summary: Some(summary), trace_csv: None, field_csv: None, report })
}

pub fn cmd_models() -> Outcome {
    let rows: Vec<Vec<String>> = registry().iter().map(|(l, d)| vec![l.to_string(), d.to_string()]).collect();
    Outcome { code: 0, summary: None, trace_csv: None, field_csv: None, report: text_table(&["label", "description"], &rows) }
}
