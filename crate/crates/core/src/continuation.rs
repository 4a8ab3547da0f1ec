//! Two-stage continuation `p → p_crit`, `α → 0`, the Yamabe constant at
//! infinity, monotonicity audits, blow-up monitoring and the existence
//! verdict.
//!
//! Stage 1 fixes the largest weight exponent `α` and raises `p` through
//! the schedule; stage 2 fixes `p = p_crit` and lowers `α` to zero. Every
//! solve is warm-started from the previous extremal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{DiscreteField, OperatorAssembly, RadialGrid};
use crate::error::{Error, Result};
use crate::geometry::{aubin_talenti_bubble, critical_exponent, sphere_yamabe_constant, ModelManifold, WeightSpec};
use crate::minimize::{minimize_q, Extremal, ExtremalSummary, MinimizeConfig};
use crate::scalar::Real;
use crate::spectral::mu_bottom;

/// Default blow-up threshold factor relative to the first record's `sup v`.
pub const BLOWUP_FACTOR: f64 = 50.0;

/// Continuation schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    alpha_list: Vec<T>,
    p_list: Vec<T>,
    /// Per-record solver settings, keyed by record index in execution
    /// order (stage 1 first).
    overrides: Vec<(usize, MinimizeConfig)>,
}

impl<T: Real> Schedule<T> {
    /// `alpha_list` must be strictly decreasing, positive, and end with 0;
    /// `p_list` increasing in `[2, p_crit]` and ending with `p_crit`.
    pub fn new(n: usize, alpha_list: Vec<T>, p_list: Vec<T>) -> Result<Self> {
        let pc = critical_exponent::<T>(n);
        let close = |a: T, b: T| (a - b).abs() <= T::lit(1e-12) * (T::one() + b.abs());
        if alpha_list.is_empty() || p_list.is_empty() {
            return Err(Error::Config("schedule lists must be nonempty".into()));
        }
        if *alpha_list.last().unwrap() != T::zero() {
            return Err(Error::Config("alpha_list must end with 0".into()));
        }
        if alpha_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::Config("alpha_list must be strictly decreasing".into()));
        }
        if p_list.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("p_list must be strictly increasing".into()));
        }
        if p_list.iter().any(|&p| p < T::lit(2.0) || (p > pc && !close(p, pc))) {
            return Err(Error::Config(format!("p_list must lie in [2, {pc}]")));
        }
        let mut p_list = p_list;
        let last = p_list.len() - 1;
        if !close(p_list[last], pc) {
            return Err(Error::Config(format!("p_list must end with p_crit = {pc}")));
        }
        p_list[last] = pc;
        Ok(Self { alpha_list, p_list, overrides: Vec::new() })
    }

    /// `p ∈ {2, 3, 4, …}` refined towards `p_crit`, `α ∈ {0.5, 0.2, 0.05, 0}`.
    pub fn default_for(n: usize) -> Result<Self> {
        let pc = critical_exponent::<f64>(n);
        let mut ps: Vec<f64> = [2.0, 3.0, 4.0, 5.0].into_iter().filter(|&p| p < pc - 0.4).collect();
        let top = *ps.last().unwrap();
        ps.extend([pc - 0.5, pc - 0.1].into_iter().filter(|&p| p > top));
        ps.push(pc);
        let ps = ps.into_iter().map(T::lit).collect();
        let alphas = [0.5, 0.2, 0.05, 0.0].into_iter().map(T::lit).collect();
        Self::new(n, alphas, ps)
    }

    pub fn with_override(mut self, record: usize, cfg: MinimizeConfig) -> Self {
        self.overrides.retain(|(i, _)| *i != record);
        self.overrides.push((record, cfg));
        self
    }

    pub fn alpha_list(&self) -> &[T] {
        &self.alpha_list
    }

    pub fn p_list(&self) -> &[T] {
        &self.p_list
    }

    /// `(stage, α, p)` in execution order.
    pub fn stages(&self) -> Vec<(u8, T, T)> {
        let a0 = self.alpha_list[0];
        let pc = *self.p_list.last().unwrap();
        let mut out: Vec<(u8, T, T)> = self.p_list.iter().map(|&p| (1, a0, p)).collect();
        out.extend(self.alpha_list[1..].iter().map(|&a| (2, a, pc)));
        out
    }

    fn config_for(&self, record: usize, base: &MinimizeConfig) -> MinimizeConfig {
        self.overrides.iter().find(|(i, _)| *i == record).map_or_else(|| base.clone(), |(_, c)| c.clone())
    }

    /// Same schedule with every positive `α` multiplied by `factor`.
    fn scaled_alphas(&self, factor: T) -> Self {
        Self { alpha_list: self.alpha_list.iter().map(|&a| a * factor).collect(), ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Converged,
    /// `sup v` above the blow-up threshold.
    Blowup,
    /// The solver stopped short; the record holds its best iterate.
    Failed,
}

/// One solve of the continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord<T> {
    pub stage: u8,
    pub alpha: T,
    pub p: T,
    pub q: T,
    pub sup_v: T,
    pub argmax_r: T,
    pub residual: T,
    pub iterations: usize,
    pub norm_pcrit_unweighted: T,
    /// Nodal sup-distance to the previous extremal over the inner half of
    /// the domain (absent for the first record).
    pub inner_change: Option<T>,
    pub status: RecordStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationTrace<T> {
    pub records: Vec<StageRecord<T>>,
    /// Extremal of every record, aligned with `records`.
    pub fields: Vec<DiscreteField<T>>,
    pub radii: Vec<T>,
    /// Dimension of the model the trace was computed on.
    pub n: usize,
    /// The `α = 0`, `p = p_crit` extremal when the schedule completed.
    pub final_extremal: Option<Extremal<T>>,
    pub blowup_threshold: T,
}

impl<T: Real> ContinuationTrace<T> {
    pub fn completed(&self) -> bool {
        self.final_extremal.is_some()
    }

    pub fn failed(&self) -> bool {
        self.records.iter().any(|r| r.status == RecordStatus::Failed)
    }
}

fn inner_change<T: Real>(radii: &[T], prev: &[T], next: &[T]) -> T {
    let (lo, hi) = (radii[0], *radii.last().unwrap());
    let mid = (lo + hi) * T::lit(0.5);
    radii
        .iter()
        .zip(prev.iter().zip(next))
        .filter(|(&r, _)| r <= mid)
        .map(|(_, (&a, &b))| (a - b).abs())
        .fold(T::zero(), T::max)
}

/// Runs the sequence `(stage, α, p)` with warm starts. The first
/// non-convergent solve ends the trace with a failure record.
fn run_stages<T: Real>(
    a: &OperatorAssembly<T>,
    stages: &[(u8, T, T)],
    config_for: impl Fn(usize) -> MinimizeConfig,
) -> Result<ContinuationTrace<T>> {
    let radii = a.radii().to_vec();
    let pc = a.p_crit();
    let mut records = Vec::with_capacity(stages.len());
    let mut fields: Vec<DiscreteField<T>> = Vec::with_capacity(stages.len());
    let mut threshold = T::infinity();
    let mut last = None;
    for (i, &(stage, alpha, p)) in stages.iter().enumerate() {
        let cfg = config_for(i);
        let warm = fields.last();
        let outcome = minimize_q(a, alpha, p, &cfg, warm);
        let (e, status) = match outcome {
            Ok(e) => (e, RecordStatus::Converged),
            Err(Error::NonConvergence { iterations, residual, value, best }) => {
                let v = DiscreteField(best.iter().map(|&x| T::lit(x)).collect::<Vec<T>>());
                let (node, sup) = v.argmax().unwrap_or((0, T::zero()));
                records.push(StageRecord {
                    stage,
                    alpha,
                    p,
                    q: T::lit(value),
                    sup_v: sup,
                    argmax_r: radii[node],
                    residual: T::lit(residual),
                    iterations,
                    norm_pcrit_unweighted: crate::discretize::p_norm(&v, a.mass(), pc),
                    inner_change: fields.last().map(|f| inner_change(&radii, f, &v)),
                    status: RecordStatus::Failed,
                });
                fields.push(v);
                break;
            }
            Err(e) => return Err(e),
        };
        if i == 0 {
            threshold = T::lit(BLOWUP_FACTOR) * e.sup_v;
        }
        let status = if e.sup_v > threshold { RecordStatus::Blowup } else { status };
        records.push(StageRecord {
            stage,
            alpha,
            p,
            q: e.q,
            sup_v: e.sup_v,
            argmax_r: e.argmax_r,
            residual: e.residual,
            iterations: e.iterations,
            norm_pcrit_unweighted: e.norm_pcrit_unweighted,
            inner_change: fields.last().map(|f| inner_change(&radii, f, &e.v)),
            status,
        });
        fields.push(e.v.clone());
        last = Some(e);
    }
    let done = records.len() == stages.len() && records.iter().all(|r| r.status != RecordStatus::Failed);
    let final_extremal = last.filter(|e| done && e.alpha == T::zero() && e.p == pc);
    Ok(ContinuationTrace { records, fields, radii, n: a.dim(), final_extremal, blowup_threshold: threshold })
}

/// Stage 1 over `p_list` at the first `α`, then stage 2 over the remaining
/// `α` at `p_crit`.
pub fn run_continuation<T: Real>(
    m: &ModelManifold<T>,
    g: &RadialGrid<T>,
    w: &WeightSpec<T>,
    sched: &Schedule<T>,
    cfg: &MinimizeConfig,
) -> Result<ContinuationTrace<T>> {
    let a = OperatorAssembly::assemble(m, g, w)?;
    run_stages(&a, &sched.stages(), |i| sched.config_for(i, cfg))
}

/// A single warm-started `p`-sweep at fixed `α` (stage 1 only; the list
/// need not reach `p_crit`).
pub fn stage_sweep<T: Real>(a: &OperatorAssembly<T>, alpha: T, p_list: &[T], cfg: &MinimizeConfig) -> Result<ContinuationTrace<T>> {
    let stages: Vec<(u8, T, T)> = p_list.iter().map(|&p| (1, alpha, p)).collect();
    run_stages(a, &stages, |_| cfg.clone())
}

/// A failed inequality of the monotonicity audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// `"alpha"`, `"p_limsup"` or `"alpha_limit"`.
    pub check: String,
    pub lhs: (f64, f64, f64),
    pub rhs: (f64, f64, f64),
    /// `lhs.Q − rhs.Q`, the amount by which `lhs ≤ rhs + tol` fails.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub tol: f64,
    pub comparisons: usize,
    pub violations: Vec<Violation>,
    /// Gap `Q^α_p − Q^0_p` at the smallest positive `α`, per `p`.
    pub alpha_limit_gaps: Vec<(f64, f64)>,
    pub alpha_ok: bool,
    pub p_limsup_ok: bool,
    pub alpha_limit_ok: bool,
    pub passed: bool,
}

/// Checks, over all converged records of `traces` (same model and grid):
///
/// * (a) `α ≤ β ⇒ Q^α_p ≤ Q^β_p + tol` at equal `p`;
/// * (b) within each stage-1 sweep, `Q^α_s ≤ Q^α_p + tol` for the last
///   three subcritical `s` before the sweep's final exponent `p`;
/// * (c) for every `p` with an `α = 0` value, `Q^α_p` is nonincreasing as
///   `α ↓ 0` and stays above `Q^0_p − tol`. When `limit_tol` is given the
///   gap at the smallest positive `α` must also be below it.
pub fn audit_monotonicity<T: Real>(traces: &[ContinuationTrace<T>], tol: T, limit_tol: Option<T>) -> MonotonicityReport {
    let tol = tol.as_f64();
    let key = |r: &StageRecord<T>| (r.alpha.as_f64(), r.p.as_f64(), r.q.as_f64());
    let samples: Vec<(f64, f64, f64)> = traces
        .iter()
        .flat_map(|t| t.records.iter().filter(|r| r.status != RecordStatus::Failed).map(key))
        .collect();
    let same_p = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b.abs());
    let mut violations = Vec::new();
    let mut comparisons = 0;

    for x in &samples {
        for y in &samples {
            if same_p(x.1, y.1) && x.0 <= y.0 && !std::ptr::eq(x, y) {
                comparisons += 1;
                if x.2 > y.2 + tol {
                    violations.push(Violation { check: "alpha".into(), lhs: *x, rhs: *y, excess: x.2 - y.2 });
                }
            }
        }
    }

    for t in traces {
        let sweep: Vec<(f64, f64, f64)> =
            t.records.iter().filter(|r| r.stage == 1 && r.status != RecordStatus::Failed).map(key).collect();
        if let Some((&top, rest)) = sweep.split_last() {
            for s in rest.iter().rev().take(3) {
                comparisons += 1;
                if s.2 > top.2 + tol {
                    violations.push(Violation { check: "p_limsup".into(), lhs: *s, rhs: top, excess: s.2 - top.2 });
                }
            }
        }
    }

    let mut ps: Vec<f64> = samples.iter().filter(|s| s.0 == 0.0).map(|s| s.1).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup_by(|a, b| same_p(*a, *b));
    let mut alpha_limit_gaps = Vec::new();
    for p in ps {
        let mut column: Vec<(f64, f64, f64)> = samples.iter().filter(|s| same_p(s.1, p)).copied().collect();
        column.sort_by(|a, b| b.0.total_cmp(&a.0));
        column.dedup_by(|a, b| a.0 == b.0);
        let base = *column.last().unwrap();
        for w in column.windows(2) {
            comparisons += 1;
            if w[1].2 > w[0].2 + tol {
                violations.push(Violation { check: "alpha_limit".into(), lhs: w[1], rhs: w[0], excess: w[1].2 - w[0].2 });
            }
        }
        for s in &column {
            comparisons += 1;
            if s.2 < base.2 - tol {
                violations.push(Violation { check: "alpha_limit".into(), lhs: base, rhs: *s, excess: base.2 - s.2 });
            }
        }
        if column.len() >= 2 {
            let smallest = column[column.len() - 2];
            let gap = smallest.2 - base.2;
            alpha_limit_gaps.push((p, gap));
            if let Some(lt) = limit_tol {
                comparisons += 1;
                if gap > lt.as_f64() {
                    violations.push(Violation { check: "alpha_limit".into(), lhs: smallest, rhs: base, excess: gap });
                }
            }
        }
    }
    let ok = |c: &str| violations.iter().all(|v| v.check != c);
    let (alpha_ok, p_limsup_ok, alpha_limit_ok) = (ok("alpha"), ok("p_limsup"), ok("alpha_limit"));
    let passed = violations.is_empty();
    MonotonicityReport { tol, comparisons, violations, alpha_limit_gaps, alpha_ok, p_limsup_ok, alpha_limit_ok, passed }
}

/// Rescaled profile `u(x) = m⁻¹ v(r* + δ x)`, `δ = m^{(2−p)/2}`, of one
/// flagged record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupProfile {
    pub record: usize,
    pub m_p: f64,
    pub delta_p: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Bubble scale `λ` minimizing the sup-distance below.
    pub lambda: f64,
    /// Sup-distance to `(1 + λ²x²)^{−(n−2)/2}` over five half-widths of
    /// the profile.
    pub bubble_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlowupReport {
    pub threshold: f64,
    pub flagged: Vec<usize>,
    pub profiles: Vec<BlowupProfile>,
}

/// `δ_p = m_p^{(2−p)/2}`.
pub fn blowup_scale<T: Real>(m_p: T, p: T) -> T {
    m_p.powf((T::lit(2.0) - p) * T::lit(0.5))
}

/// Half-width of the bubble of scale `λ`: where it falls to `1/2`.
fn bubble_half_width(n: usize, lambda: f64) -> f64 {
    (2f64.powf(2.0 / (n as f64 - 2.0)) - 1.0).sqrt() / lambda
}

/// Where the profile first falls to `1/2` moving outward from `x = 0`.
fn profile_half_width(x: &[f64], u: &[f64]) -> Option<f64> {
    let c = x.iter().map(|v| v.abs()).enumerate().min_by(|a, b| a.1.total_cmp(&b.1))?.0;
    let outward = |range: &mut dyn Iterator<Item = usize>| {
        let mut prev = c;
        for i in range {
            if u[i] <= 0.5 {
                let t = (u[prev] - 0.5) / (u[prev] - u[i]);
                return Some((x[prev] + t * (x[i] - x[prev])).abs());
            }
            prev = i;
        }
        None
    };
    let right = outward(&mut (c + 1..x.len()));
    let left = outward(&mut (0..c).rev());
    match (left, right) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

/// Sup-distance between `(x, u)` samples and the bubble of scale `λ` over
/// `|x| ≤ window`.
pub fn bubble_distance(n: usize, x: &[f64], u: &[f64], lambda: f64, window: f64) -> f64 {
    x.iter()
        .zip(u)
        .filter(|(&xi, _)| xi.abs() <= window)
        .map(|(&xi, &ui)| (ui - aubin_talenti_bubble(n, lambda, xi).unwrap_or(f64::NAN)).abs())
        .fold(0.0, |m, d| if d.is_nan() || d > m { d } else { m })
}

/// Best bubble scale over five half-widths of the profile itself, by a
/// log-spaced scan followed by golden-section refinement. Returns
/// `(λ, distance)`; the distance is infinite when the profile never falls
/// to half its peak.
pub fn fit_bubble(n: usize, x: &[f64], u: &[f64]) -> (f64, f64) {
    let Some(half) = profile_half_width(x, u) else {
        return (f64::NAN, f64::INFINITY);
    };
    let window = 5.0 * half;
    let dist = |ll: f64| bubble_distance(n, x, u, ll.exp(), window);
    let guess = bubble_half_width(n, 1.0) / half;
    let (lo, hi, steps) = (guess.ln() - 3.0, guess.ln() + 3.0, 121);
    let grid: Vec<f64> = (0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect();
    let mut best = 0;
    for i in 1..steps {
        if dist(grid[i]) < dist(grid[best]) {
            best = i;
        }
    }
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(steps - 1)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if dist(c) <= dist(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let ll = 0.5 * (a + b);
    let ll = if dist(ll) <= dist(grid[best]) { ll } else { grid[best] };
    (ll.exp(), dist(ll))
}

/// Flags records with `sup v` above `k_threshold` (default: the trace's own
/// threshold) and rescales each flagged extremal around its maximum.
pub fn sup_bound_monitor<T: Real>(trace: &ContinuationTrace<T>, k_threshold: Option<T>) -> BlowupReport {
    let k = k_threshold.unwrap_or(trace.blowup_threshold).as_f64();
    let mut flagged = Vec::new();
    let mut profiles = Vec::new();
    for (i, rec) in trace.records.iter().enumerate() {
        let sup = rec.sup_v.as_f64();
        if !(sup > k) {
            continue;
        }
        flagged.push(i);
        let delta = blowup_scale(sup, rec.p.as_f64());
        let center = rec.argmax_r.as_f64();
        let x: Vec<f64> = trace.radii.iter().map(|&r| (r.as_f64() - center) / delta).collect();
        let u: Vec<f64> = trace.fields[i].iter().map(|&v| v.as_f64() / sup).collect();
        let (lambda, dist) = fit_bubble(trace.n, &x, &u);
        profiles.push(BlowupProfile { record: i, m_p: sup, delta_p: delta, x, u, lambda, bubble_distance: dist });
    }
    BlowupReport { threshold: k, flagged, profiles }
}

/// Exterior estimate for one radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExteriorEstimate {
    /// Requested radius.
    pub radius: f64,
    /// First grid node at or beyond `radius`.
    pub inner_node_r: f64,
    /// Radial minimum of the critical quotient on `[R, r_max]`.
    pub q_radial: Option<f64>,
    /// `min(q_radial, Q(Sⁿ))`.
    pub q: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QInfReport {
    pub r_max: f64,
    pub sphere_constant: f64,
    pub estimates: Vec<ExteriorEstimate>,
    /// Estimate at the largest radius.
    pub qbar: Option<f64>,
}

impl QInfReport {
    /// Radial estimates nondecreasing in `R` up to `tol` (relative).
    pub fn radial_nondecreasing(&self, tol: f64) -> bool {
        let v: Vec<f64> = self.estimates.iter().filter_map(|e| e.q_radial).collect();
        v.windows(2).all(|w| w[1] >= w[0] - tol * w[0].abs())
    }
}

/// Default radii for `q_at_infinity`: `r_max · {1/8, 1/4, 3/8}`.
pub fn default_radii<T: Real>(r_max: T) -> Vec<T> {
    [0.125, 0.25, 0.375].iter().map(|&f| T::lit(f) * r_max).collect()
}

/// Minimizes the `α = 0` critical quotient on the exterior grids `[R, r_max]`
/// (both ends Dirichlet, nodes shared with `g`).
///
/// Radial trial functions cannot concentrate off the axis, so the radial
/// exterior minimum only bounds `Q(M ∖ B_R)` from above. Bubbles
/// concentrating at any point bound it by `Q(Sⁿ)`; the reported estimate is
/// the smaller of the two and the radial value is kept alongside.
pub fn q_at_infinity<T: Real>(
    m: &ModelManifold<T>,
    g: &RadialGrid<T>,
    w: &WeightSpec<T>,
    radii: &[T],
    cfg: &MinimizeConfig,
) -> Result<QInfReport> {
    if radii.is_empty() || radii.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::Argument("exterior radii must be nonempty and increasing".into()));
    }
    let r_max = g.r_max();
    if !(*radii.last().unwrap() < r_max * T::lit(0.5)) {
        return Err(Error::Argument(format!("largest exterior radius must be below r_max/2 = {}", r_max * T::lit(0.5))));
    }
    let sphere = sphere_yamabe_constant::<f64>(m.n())?;
    let pc = critical_exponent::<T>(m.n());
    let estimates: Vec<ExteriorEstimate> = radii
        .par_iter()
        .map(|&radius| {
            let sub = g.exterior(radius);
            let inner = sub.as_ref().map(|s| s.r_inner().as_f64()).unwrap_or(f64::NAN);
            let solved = sub
                .and_then(|s| OperatorAssembly::assemble(m, &s, w))
                .and_then(|a| minimize_q(&a, T::zero(), pc, cfg, None));
            match solved {
                Ok(e) => {
                    let raw = e.q.as_f64();
                    ExteriorEstimate {
                        radius: radius.as_f64(),
                        inner_node_r: inner,
                        q_radial: Some(raw),
                        q: Some(raw.min(sphere)),
                        error: None,
                    }
                }
                Err(err) => ExteriorEstimate {
                    radius: radius.as_f64(),
                    inner_node_r: inner,
                    q_radial: None,
                    q: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let qbar = estimates.last().and_then(|e| e.q);
    Ok(QInfReport { r_max: r_max.as_f64(), sphere_constant: sphere, estimates, qbar })
}

/// Hypothesis margins and final-extremal tolerances for [`decide_existence`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Margins {
    pub mu: f64,
    pub qbar: f64,
    /// Required gap below `Q(Sⁿ)`; `None` means 0.5 % of `Q(Sⁿ)`.
    pub sphere: Option<f64>,
    pub final_residual: f64,
    pub norm_tol: f64,
    /// Exterior radii; `None` means [`default_radii`].
    pub radii: Option<Vec<f64>>,
    /// Attempts at shrinking the first `α` before giving up on `α₀`.
    pub alpha0_retries: usize,
}

impl Default for Margins {
    fn default() -> Self {
        Self { mu: 0.1, qbar: 0.5, sphere: None, final_residual: 1e-6, norm_tol: 1e-2, radii: None, alpha0_retries: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Hypotheses {
    pub mu_positive: bool,
    pub qbar_exceeds_q: bool,
    pub q_below_sphere: bool,
}

impl Hypotheses {
    pub fn all(&self) -> bool {
        self.mu_positive && self.qbar_exceeds_q && self.q_below_sphere
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict<T> {
    pub mu_value: T,
    pub mu_residual: T,
    pub q_estimate: Option<T>,
    pub q_inf_estimate: Option<T>,
    pub hypotheses_met: Hypotheses,
    pub final_extremal: Option<Extremal<T>>,
    pub notes: Vec<String>,
    /// Continuation run, when one was attempted.
    pub trace: Option<ContinuationTrace<T>>,
    pub qinf: Option<QInfReport>,
}

/// JSON form of a [`Verdict`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerdictSummary {
    pub mu_value: f64,
    pub q_estimate: Option<f64>,
    pub q_inf_estimate: Option<f64>,
    pub hypotheses_met: Hypotheses,
    #[serde(rename = "final")]
    pub final_extremal: Option<ExtremalSummary>,
    pub notes: Vec<String>,
}

impl<T: Real> Verdict<T> {
    pub fn summary(&self) -> VerdictSummary {
        VerdictSummary {
            mu_value: self.mu_value.as_f64(),
            q_estimate: self.q_estimate.map(|q| q.as_f64()),
            q_inf_estimate: self.q_inf_estimate.map(|q| q.as_f64()),
            hypotheses_met: self.hypotheses_met,
            final_extremal: self.final_extremal.as_ref().map(|e| e.summary()),
            notes: self.notes.clone(),
        }
    }
}

/// `μ` tolerance used by the verdict (absolute `M⁻¹` residual).
const VERDICT_MU_TOL: f64 = 1e-8;

/// Checks the existence hypotheses with margins and, when they hold, runs
/// the continuation and certifies its final extremal.
///
/// The `Q` estimate is the direct `α = 0` critical minimum, capped by
/// `Q(Sⁿ)` like the exterior estimates (see [`q_at_infinity`]).
pub fn decide_existence<T: Real>(
    m: &ModelManifold<T>,
    g: &RadialGrid<T>,
    w: &WeightSpec<T>,
    sched: &Schedule<T>,
    cfg: &MinimizeConfig,
    margins: &Margins,
) -> Result<Verdict<T>> {
    let a = OperatorAssembly::assemble(m, g, w)?;
    let sphere = sphere_yamabe_constant::<f64>(m.n())?;
    let margin_sphere = margins.sphere.unwrap_or(0.005 * sphere);
    let mut notes = Vec::new();
    let mu = mu_bottom(&a, T::lit(VERDICT_MU_TOL), 100_000)?;
    let mut hyp = Hypotheses { mu_positive: mu.value.as_f64() >= margins.mu, qbar_exceeds_q: false, q_below_sphere: false };
    if !hyp.mu_positive {
        notes.push(format!("mu_positive failed: mu = {} < {}", mu.value, margins.mu));
        notes.push("continuation not attempted".into());
        return Ok(Verdict {
            mu_value: mu.value,
            mu_residual: mu.residual,
            q_estimate: None,
            q_inf_estimate: None,
            hypotheses_met: hyp,
            final_extremal: None,
            notes,
            trace: None,
            qinf: None,
        });
    }

    let pc = a.p_crit();
    let direct = minimize_q(&a, T::zero(), pc, cfg, None)?;
    let q_raw = direct.q.as_f64();
    let q_est = q_raw.min(sphere);
    if q_raw > sphere {
        notes.push(format!("radial Q minimum {q_raw} exceeds Q(S^n) = {sphere}; estimate capped"));
    }
    let radii: Vec<T> = match &margins.radii {
        Some(r) => r.iter().map(|&x| T::lit(x)).collect(),
        None => default_radii(g.r_max()),
    };
    let qinf = q_at_infinity(m, g, w, &radii, cfg)?;
    for e in &qinf.estimates {
        if let Some(err) = &e.error {
            notes.push(format!("exterior R = {}: {err}", e.radius));
        }
    }
    let qbar = qinf.qbar;
    hyp.qbar_exceeds_q = qbar.is_some_and(|qb| qb - q_est >= margins.qbar);
    hyp.q_below_sphere = q_est <= sphere - margin_sphere;
    if !hyp.qbar_exceeds_q {
        notes.push(format!(
            "qbar_exceeds_q failed: Qbar = {} vs Q = {q_est} (margin {})",
            qbar.map_or("n/a".to_string(), |x| x.to_string()),
            margins.qbar
        ));
    }
    if !hyp.q_below_sphere {
        notes.push(format!("q_below_sphere failed: Q = {q_est} vs Q(S^n) - {margin_sphere} = {}", sphere - margin_sphere));
    }
    let mut verdict = Verdict {
        mu_value: mu.value,
        mu_residual: mu.residual,
        q_estimate: Some(T::lit(q_est)),
        q_inf_estimate: qbar.map(T::lit),
        hypotheses_met: hyp,
        final_extremal: None,
        notes,
        trace: None,
        qinf: Some(qinf),
    };
    if !hyp.all() {
        verdict.notes.push("continuation not attempted".into());
        return Ok(verdict);
    }

    // a-posteriori alpha_0: the first alpha must keep Q^alpha below Q(S^n)
    let mut schedule = sched.clone();
    let mut alpha_ok = false;
    for attempt in 0..=margins.alpha0_retries {
        let a0 = schedule.alpha_list()[0];
        let qa = minimize_q(&a, a0, pc, cfg, None)?.q.as_f64();
        if qa < sphere {
            alpha_ok = true;
            break;
        }
        verdict.notes.push(format!("alpha_0 = {a0}: Q^alpha = {qa} is not below Q(S^n)"));
        if attempt < margins.alpha0_retries {
            schedule = schedule.scaled_alphas(T::lit(0.5));
        }
    }
    if !alpha_ok {
        verdict.notes.push("no admissible alpha_0 found; continuation run with the last schedule".into());
    }

    let trace = run_continuation(m, g, w, &schedule, cfg)?;
    let blowup = trace.records.iter().any(|r| r.status == RecordStatus::Blowup);
    if blowup {
        verdict.notes.push("sup bound exceeded during continuation".into());
    }
    match &trace.final_extremal {
        Some(e) => {
            let norm_ok = (e.norm_pcrit_unweighted.as_f64() - 1.0).abs() <= margins.norm_tol;
            let res_ok = e.residual.as_f64() <= margins.final_residual;
            if norm_ok && res_ok && !blowup && e.v.is_positive() {
                verdict.final_extremal = Some(e.clone());
            } else {
                verdict.notes.push(format!(
                    "final extremal rejected: residual {}, norm {}",
                    e.residual, e.norm_pcrit_unweighted
                ));
            }
        }
        None => verdict.notes.push("continuation did not complete".into()),
    }
    verdict.trace = Some(trace);
    Ok(verdict)
}

/// Numerical witness for `μ⁽¹⁾ ≤ Q`: finite `sup v`, `‖v‖_{p_crit} ≤ 1 + tol`
/// and residual at most `tol`.
pub fn certify_mu1<T: Real>(e: &Extremal<T>, tol: T) -> bool {
    e.sup_v.is_finite() && e.norm_pcrit_unweighted <= T::one() + tol && e.residual <= tol
}

/// Parameters of [`subcritical_scaling_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSetup {
    pub n: usize,
    pub s: f64,
    pub r1: f64,
    pub r2: f64,
    /// Interior nodes of both grids; equal counts make the two discrete
    /// problems exact rescalings of each other.
    #[serde(rename = "N")]
    pub nodes: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub q1: f64,
    pub q2: f64,
    pub ratio: f64,
    pub expected: f64,
    /// `2 − n + 2n/s`.
    pub exponent: f64,
    pub rel_error: f64,
    pub passed: bool,
}

/// Exponent `2 − n + 2n/s` of `Q_s(B_R) = R^{−e} Q_s(B_1)` on flat space.
pub fn scaling_exponent(n: usize, s: f64) -> f64 {
    let n = n as f64;
    2.0 - n + 2.0 * n / s
}

/// Compares `Q_s(B_{R2}) / Q_s(B_{R1})` with `(R2/R1)^{−e}` on flat balls.
pub fn subcritical_scaling_check(setup: &ScalingSetup, cfg: &MinimizeConfig) -> Result<ScalingReport> {
    let pc = critical_exponent::<f64>(setup.n);
    if !(setup.s >= 2.0 && setup.s <= pc) {
        return Err(Error::Argument(format!("s = {} outside [2, {pc}]", setup.s)));
    }
    if !(setup.r2 > setup.r1 && setup.r1 > 0.0) {
        return Err(Error::Argument("radii must satisfy 0 < R1 < R2".into()));
    }
    let m = ModelManifold::<f64>::flat(setup.n)?;
    let w = WeightSpec::default();
    let solve = |r: f64| -> Result<f64> {
        let g = RadialGrid::build(&m, 0.0, r, setup.nodes)?;
        let a = OperatorAssembly::assemble(&m, &g, &w)?;
        Ok(minimize_q(&a, 0.0, setup.s, cfg, None)?.q)
    };
    let (q1, q2) = rayon::join(|| solve(setup.r1), || solve(setup.r2));
    let (q1, q2) = (q1?, q2?);
    let exponent = scaling_exponent(setup.n, setup.s);
    let expected = (setup.r2 / setup.r1).powf(-exponent);
    let ratio = q2 / q1;
    let rel_error = (ratio / expected - 1.0).abs();
    let passed = rel_error <= setup.tol && exponent >= 0.0;
    Ok(ScalingReport { q1, q2, ratio, expected, exponent, rel_error, passed })
}
