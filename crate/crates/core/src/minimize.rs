//! Constrained minimization of the weighted Yamabe quotient.
//!
//! Minimizes `E(v) = vᵀ K v` over `‖ρ^α v‖_p = 1`. The primary iteration
//! is the normalized inverse fixed point
//!
//! ```text
//! v ← normalize(K⁻¹ W |v|^{p-2} v)
//! ```
//!
//! which is the unit step along the Sobolev-preconditioned descent
//! direction `d = E(v) K⁻¹ W|v|^{p-2}v - v`. Whenever the unit step fails
//! the Armijo test the step is backtracked along the same direction, so
//! the value sequence never increases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretize::{p_norm, DiscreteField, OperatorAssembly, RadialGrid};
use crate::error::{Error, Result};
use crate::geometry::{ModelManifold, WeightSpec};
use crate::scalar::Real;
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    WarmStart,
    GaussianBump,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineSearch {
    /// Step reduction factor in `(0, 1)`.
    pub backtrack: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub sufficient_decrease: f64,
    pub min_step: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self { backtrack: 0.5, sufficient_decrease: 1e-4, min_step: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeConfig {
    pub max_iter: usize,
    /// Stop once the relative decrease of the value drops below this...
    pub q_rel_tol: f64,
    /// ...and the relative Euler–Lagrange residual below this.
    pub residual_tol: f64,
    pub line_search: LineSearch,
    pub init: Init,
    /// Width of the initial bump as a fraction of the radial extent.
    pub bump_width: f64,
    /// Relative amplitude of a seeded multiplicative perturbation of the
    /// initial field (zero disables it).
    pub jitter: f64,
    pub rng_seed: u64,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            max_iter: 200_000,
            q_rel_tol: 1e-13,
            residual_tol: 1e-8,
            line_search: LineSearch::default(),
            init: Init::GaussianBump,
            bump_width: 0.125,
            jitter: 0.0,
            rng_seed: 0,
        }
    }
}

impl MinimizeConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        if !(self.q_rel_tol > 0.0) || !(self.residual_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(ls.backtrack > 0.0 && ls.backtrack < 1.0) {
            return Err(Error::Config(format!("backtrack factor {} not in (0, 1)", ls.backtrack)));
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) || !(ls.min_step > 0.0) {
            return Err(Error::Config("invalid Armijo parameters".into()));
        }
        if self.max_iter == 0 || !(self.bump_width > 0.0) || !(self.jitter >= 0.0) {
            return Err(Error::Config("max_iter, bump_width and jitter must be positive".into()));
        }
        Ok(())
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }
}

/// Converged minimizer with the data used by the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Extremal<T> {
    pub v: DiscreteField<T>,
    pub q: T,
    pub alpha: T,
    pub p: T,
    pub residual: T,
    pub iterations: usize,
    pub sup_v: T,
    pub argmax_node: usize,
    pub argmax_r: T,
    /// `‖v‖_{p_crit}` without weight.
    pub norm_pcrit_unweighted: T,
    /// Value after every accepted iteration, starting with the initial field.
    pub q_history: Vec<T>,
}

/// Serialized form of an [`Extremal`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalSummary {
    #[serde(rename = "Q")]
    pub q: f64,
    pub alpha: f64,
    pub p: f64,
    pub residual: f64,
    pub iterations: usize,
    pub sup_v: f64,
    pub argmax_r: f64,
    pub norm_pcrit: f64,
}

impl<T: Real> Extremal<T> {
    pub fn summary(&self) -> ExtremalSummary {
        ExtremalSummary {
            q: self.q.as_f64(),
            alpha: self.alpha.as_f64(),
            p: self.p.as_f64(),
            residual: self.residual.as_f64(),
            iterations: self.iterations,
            sup_v: self.sup_v.as_f64(),
            argmax_r: self.argmax_r.as_f64(),
            norm_pcrit: self.norm_pcrit_unweighted.as_f64(),
        }
    }
}

// Consecutive non-improving iterations after which the loop hands over to
// the polish.
const STALL_LIMIT: usize = 25;

// Relative residual below which Newton candidates compete with the
// fixed-point step.
const NEWTON_SWITCH: f64 = 1e-2;

/// Quadratic form, constraint weights and residual mass of one
/// constrained problem.
pub(crate) struct Problem<'a, T: Real> {
    pub op: &'a SymTridiag<T>,
    pub weights: Vec<T>,
    pub mass: &'a [T],
    pub p: T,
}

pub(crate) struct Solution<T> {
    pub v: Vec<T>,
    pub q: T,
    pub residual: T,
    pub iterations: usize,
    pub history: Vec<T>,
}

fn nonlinearity<T: Real>(v: &[T], w: &[T], p: T) -> Vec<T> {
    let two = T::lit(2.0);
    if p == two {
        v.iter().zip(w).map(|(&x, &m)| m * x).collect()
    } else {
        let e = p - two;
        v.iter().zip(w).map(|(&x, &m)| m * x.abs().powf(e) * x).collect()
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

// Masses for the dual norm; zero-mass (pole) nodes borrow the nearest
// positive neighbour.
fn dual_mass<T: Real>(mass: &[T]) -> Vec<T> {
    let mut out = mass.to_vec();
    for i in 0..out.len() {
        if !(out[i] > T::zero()) {
            let near = (1..out.len())
                .flat_map(|d| [i.checked_sub(d), Some(i + d)])
                .flatten()
                .find(|&j| j < mass.len() && mass[j] > T::zero());
            out[i] = near.map(|j| mass[j]).unwrap_or(T::one());
        }
    }
    out
}

pub(crate) fn dual_norm<T: Real>(r: &[T], dual: &[T]) -> T {
    r.iter().zip(dual).map(|(&x, &m)| x * x / m).sum::<T>().sqrt()
}

/// `‖K v − q W|v|^{p−2}v‖_{M⁻¹} / ‖K v‖_{M⁻¹}`.
pub(crate) fn relative_residual<T: Real>(op: &SymTridiag<T>, w: &[T], dual: &[T], v: &[T], q: T, p: T) -> T {
    let kv = op.matvec(v);
    let g = nonlinearity(v, w, p);
    let r: Vec<T> = kv.iter().zip(&g).map(|(&a, &b)| a - q * b).collect();
    let scale = dual_norm(&kv, dual);
    if scale > T::zero() {
        dual_norm(&r, dual) / scale
    } else {
        dual_norm(&r, dual)
    }
}

impl<'a, T: Real> Problem<'a, T> {
    fn normalize(&self, v: &mut [T]) -> Option<T> {
        let n = p_norm(v, &self.weights, self.p);
        if !(n > T::zero()) || !n.is_finite() {
            return None;
        }
        for x in v.iter_mut() {
            *x /= n;
        }
        Some(n)
    }

    /// Refines a near-critical `v` once the value no longer resolves the
    /// remaining decrease. For `p > 2` this is Newton's method on
    /// `K u = W|u|^{p−2}u` with `u = q^{1/(p−2)} v`; at `p = 2` it is plain
    /// inverse iteration. Steps are kept only while the residual drops and
    /// the value does not rise beyond rounding.
    fn polish(&self, v: &[T], q: T, fac: &crate::tridiag::Ldl<T>, dual: &[T], r_tol: T) -> Option<(Vec<T>, T, T)> {
        let two = T::lit(2.0);
        let slack = T::one() + T::lit(64.0) * T::epsilon();
        let mut best_v = v.to_vec();
        let mut best_q = q;
        let mut best_r = relative_residual(self.op, &self.weights, dual, v, q, self.p);
        for _ in 0..60 {
            if best_r <= r_tol {
                break;
            }
            let mut cand = if self.p == two {
                fac.solve(&nonlinearity(&best_v, &self.weights, self.p))
            } else {
                let (u, step) = self.newton_direction(&best_v, best_q)?;
                u.iter().zip(&step).map(|(&a, &b)| (a + b).abs()).collect()
            };
            self.normalize(&mut cand)?;
            let qc = self.op.form(&cand);
            let rc = relative_residual(self.op, &self.weights, dual, &cand, qc, self.p);
            if !(rc < best_r) || !(qc <= best_q * slack) {
                break;
            }
            best_v = cand;
            best_q = qc;
            best_r = rc;
        }
        Some((best_v, best_q, best_r))
    }

    /// Newton step for `K u = W|u|^{p−2}u` at `u = q^{1/(p−2)} v`, the
    /// unnormalized form of the constrained critical point equation.
    fn newton_direction(&self, v: &[T], q: T) -> Option<(Vec<T>, Vec<T>)> {
        let two = T::lit(2.0);
        let c = q.powf((self.p - two).recip());
        let u: Vec<T> = v.iter().map(|&x| c * x).collect();
        let ku = self.op.matvec(&u);
        let g = nonlinearity(&u, &self.weights, self.p);
        let f: Vec<T> = ku.iter().zip(&g).map(|(&a, &b)| b - a).collect();
        let pm1 = self.p - T::one();
        let add: Vec<T> = u
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| -pm1 * w * x.abs().powf(self.p - two))
            .collect();
        let jac = self.op.affine(T::one(), &add).ldl().ok()?;
        let step = jac.solve(&f);
        step.iter().all(|x| x.is_finite()).then_some((u, step))
    }

    /// Gradient of `E(v)/‖v‖²` (weighted `p`-norm) at an arbitrary `v`.
    fn gradient(&self, v: &[T]) -> Vec<T> {
        let n = p_norm(v, &self.weights, self.p);
        let e = self.op.form(v);
        let kv = self.op.matvec(v);
        let g = nonlinearity(v, &self.weights, self.p);
        let two = T::lit(2.0);
        // ∇‖v‖ = ‖v‖^{1−p} g, so ∇(E/‖v‖²) = 2Kv/‖v‖² − 2E ‖v‖^{−p−2} g
        let n2 = n * n;
        let np2 = n.powf(self.p + two);
        kv.iter().zip(&g).map(|(&a, &b)| two * a / n2 - two * e * b / np2).collect()
    }

    pub fn solve(&self, init: Vec<T>, cfg: &MinimizeConfig) -> Result<Solution<T>> {
        cfg.validate()?;
        let dual = dual_mass(self.mass);
        let fac = self.op.ldl_positive()?;
        let mut v = init;
        if self.normalize(&mut v).is_none() {
            return Err(Error::Argument("initial field has zero weighted norm".into()));
        }
        let mut q = self.op.form(&v);
        let mut history = vec![q];
        let beta = T::lit(cfg.line_search.backtrack);
        let c1 = T::lit(cfg.line_search.sufficient_decrease);
        let min_step = T::lit(cfg.line_search.min_step);
        let q_tol = T::lit(cfg.q_rel_tol);
        let r_tol = T::lit(cfg.residual_tol);
        let mut residual = relative_residual(self.op, &self.weights, &dual, &v, q, self.p);
        let mut iterations = 0;
        let mut stalled = 0;
        while iterations < cfg.max_iter {
            iterations += 1;
            let g = nonlinearity(&v, &self.weights, self.p);
            let x = fac.solve(&g);
            let d: Vec<T> = x.iter().zip(&v).map(|(&xi, &vi)| q * xi - vi).collect();
            let slope = dot(&self.gradient(&v), &d);
            let mut t = T::one();
            let mut accepted = None;
            while t >= min_step {
                let mut cand: Vec<T> = v.iter().zip(&d).map(|(&a, &b)| a + t * b).collect();
                if self.normalize(&mut cand).is_some() {
                    let qc = self.op.form(&cand);
                    if qc <= q + c1 * t * slope.min(T::zero()) {
                        accepted = Some((cand, qc));
                        break;
                    }
                }
                t *= beta;
            }
            if self.p != T::lit(2.0) && residual < T::lit(NEWTON_SWITCH) {
                if let Some((u, step)) = self.newton_direction(&v, q) {
                    let mut t = T::one();
                    for _ in 0..4 {
                        let mut cand: Vec<T> = u.iter().zip(&step).map(|(&a, &b)| (a + t * b).abs()).collect();
                        if self.normalize(&mut cand).is_some() {
                            let qc = self.op.form(&cand);
                            let bar = accepted.as_ref().map_or(q, |(_, qa)| *qa);
                            if qc < bar {
                                accepted = Some((cand, qc));
                                break;
                            }
                        }
                        t *= beta;
                    }
                }
            }
            let Some((cand, qc)) = accepted else {
                // no admissible decrease left; the polish below decides
                break;
            };
            let dq = q - qc;
            v = cand;
            q = qc;
            history.push(q);
            let previous = residual;
            residual = relative_residual(self.op, &self.weights, &dual, &v, q, self.p);
            if dq <= q_tol * q.abs() {
                if residual <= r_tol {
                    break;
                }
                // rounding plateau: neither the value nor the residual moves
                stalled = if residual > T::lit(0.99) * previous { stalled + 1 } else { 0 };
                if stalled >= STALL_LIMIT {
                    break;
                }
            } else {
                stalled = 0;
            }
        }

        // positivity: the fixed-point map sends v ≥ 0 to a strictly positive field
        for x in v.iter_mut() {
            *x = x.abs();
        }
        let g = nonlinearity(&v, &self.weights, self.p);
        let mut polished = fac.solve(&g);
        if self.normalize(&mut polished).is_some() {
            let qp = self.op.form(&polished);
            if qp <= q * (T::one() + T::lit(1e-12)) {
                v = polished;
                q = qp;
            }
        }
        residual = relative_residual(self.op, &self.weights, &dual, &v, q, self.p);
        if residual > r_tol {
            if let Some((pv, _, pr)) = self.polish(&v, q, &fac, &dual, r_tol) {
                if pr < residual {
                    v = pv;
                }
            }
        }
        self.normalize(&mut v);
        q = self.op.form(&v);
        residual = relative_residual(self.op, &self.weights, &dual, &v, q, self.p);
        if residual > r_tol {
            return Err(Error::NonConvergence {
                iterations,
                residual: residual.as_f64(),
                value: q.as_f64(),
                best: v.iter().map(|x| x.as_f64()).collect(),
            });
        }
        Ok(Solution { v, q, residual, iterations, history })
    }
}

/// Initial field per `cfg.init` (warm starts are handled by the caller).
pub fn initial_field<T: Real>(a: &OperatorAssembly<T>, cfg: &MinimizeConfig) -> Vec<T> {
    let radii = a.radii();
    let mut v: Vec<T> = match cfg.init {
        Init::Constant => vec![T::one(); radii.len()],
        Init::GaussianBump | Init::WarmStart => {
            let mut center = 0;
            for (i, &s) in a.sigma().iter().enumerate() {
                if s < a.sigma()[center] {
                    center = i;
                }
            }
            let c = radii[center];
            let g = a.grid();
            let width = T::lit(cfg.bump_width) * (g.r_max() - g.r_inner());
            radii.iter().map(|&r| (-((r - c) / width).powi(2)).exp()).collect()
        }
    };
    if cfg.jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        for x in v.iter_mut() {
            let u: f64 = rng.gen_range(-1.0..1.0);
            *x *= T::one() + T::lit(cfg.jitter * u);
        }
    }
    v
}

/// Gradient of `quotient(·, α, p)` at `v`.
pub fn quotient_gradient<T: Real>(a: &OperatorAssembly<T>, v: &[T], alpha: T, p: T) -> Result<Vec<T>> {
    if v.len() != a.len() {
        return Err(Error::Dimension { expected: a.len(), got: v.len() });
    }
    let problem = Problem { op: a.operator(), weights: a.weighted_mass(alpha, p)?, mass: a.mass(), p };
    Ok(problem.gradient(v))
}

/// Requires `μ > 0`, i.e. a positive definite discrete conformal Laplacian.
pub(crate) fn require_positive_mu<T: Real>(a: &OperatorAssembly<T>) -> Result<()> {
    match a.operator().ldl_positive() {
        Ok(_) => Ok(()),
        Err(Error::NotPositiveDefinite { row, pivot }) => Err(Error::Precondition(format!(
            "μ ≤ 0: the discrete conformal Laplacian is not positive definite (pivot {pivot:e} at row {row})"
        ))),
        Err(e) => Err(e),
    }
}

/// Weighted (sub)critical Yamabe minimizer: `inf E(v)` over `‖ρ^α v‖_p = 1`.
pub fn minimize_q<T: Real>(
    a: &OperatorAssembly<T>,
    alpha: T,
    p: T,
    cfg: &MinimizeConfig,
    warm: Option<&DiscreteField<T>>,
) -> Result<Extremal<T>> {
    let weights = a.weighted_mass(alpha, p)?;
    require_positive_mu(a)?;
    let init = match warm {
        Some(w) => {
            if w.len() != a.len() {
                return Err(Error::Dimension { expected: a.len(), got: w.len() });
            }
            w.values().to_vec()
        }
        None => initial_field(a, cfg),
    };
    let problem = Problem { op: a.operator(), weights, mass: a.mass(), p };
    let sol = problem.solve(init, cfg)?;
    Ok(package(a, alpha, p, sol))
}

fn package<T: Real>(a: &OperatorAssembly<T>, alpha: T, p: T, sol: Solution<T>) -> Extremal<T> {
    let v = DiscreteField(sol.v);
    let (argmax_node, sup_v) = v.argmax().unwrap_or((0, T::zero()));
    let pc = a.p_crit();
    let unweighted = p_norm(&v, a.mass(), pc);
    let q = a.energy(&v).unwrap_or(sol.q);
    Extremal {
        argmax_r: a.radii()[argmax_node],
        v,
        q,
        alpha,
        p,
        residual: sol.residual,
        iterations: sol.iterations,
        sup_v,
        argmax_node,
        norm_pcrit_unweighted: unweighted,
        q_history: sol.history,
    }
}

/// Relative Euler–Lagrange residual of `K v = Q W_{α,p} |v|^{p−2} v` in
/// the `M⁻¹` dual norm, scaled by `‖K v‖_{M⁻¹}`.
pub fn el_residual<T: Real>(a: &OperatorAssembly<T>, v: &[T], q: T, alpha: T, p: T) -> Result<T> {
    if v.len() != a.len() {
        return Err(Error::Dimension { expected: a.len(), got: v.len() });
    }
    let w = a.weighted_mass(alpha, p)?;
    let dual = dual_mass(a.mass());
    Ok(relative_residual(a.operator(), &w, &dual, v, q, p))
}

/// Maximum-point inequality `Q ρ^{αp}(r*) v(r*)^{p−2} ≥ σ(r*) − tol`.
pub fn max_point_check<T: Real>(m: &ModelManifold<T>, w: &WeightSpec<T>, e: &Extremal<T>, tol: T) -> Result<bool> {
    let r = e.argmax_r;
    let sigma = m.scalar_curvature(r)?;
    let rho = w.weight(r, e.alpha * e.p)?;
    let lhs = e.q * rho * e.sup_v.powf(e.p - T::lit(2.0));
    Ok(lhs >= sigma - tol)
}

/// Interior concentration: `max v` over the outermost `fraction` of the
/// domain is at most `tol · sup v` and the maximum lies inside.
///
/// Vacuous (only the interior-maximum part is checked) when the grid ends
/// at the closing pole of a compact model.
pub fn decay_check<T: Real>(e: &Extremal<T>, g: &RadialGrid<T>, fraction: T, tol: T) -> bool {
    let cut = g.r_max() - fraction * (g.r_max() - g.r_inner());
    let interior = e.argmax_r < cut;
    if g.is_closed() {
        return interior;
    }
    let radii = g.radii();
    let tail = radii
        .iter()
        .zip(e.v.iter())
        .filter(|(&r, _)| r >= cut)
        .map(|(_, &x)| x.abs())
        .fold(T::zero(), T::max);
    interior && tail <= tol * e.sup_v
}
