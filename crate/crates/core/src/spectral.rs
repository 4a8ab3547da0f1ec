//! Bottom of its spectrum of the discrete conformal Laplacian and best
//! weighted embedding constants.

use serde::Serialize;

use crate::discretize::{DiscreteField, OperatorAssembly};
use crate::error::{Error, Result};
use crate::minimize::{dual_norm, minimize_q, MinimizeConfig, Problem};
use crate::scalar::Real;
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult<T> {
    pub value: T,
    /// Positive, `M`-normalized eigenfield.
    pub eigenfield: DiscreteField<T>,
    pub iterations: usize,
    /// `‖(A+S)e − value·Me‖_{M⁻¹}`.
    pub residual: T,
}

/// Smallest eigenvalue of the pencil `(A + S, M)` by shift-and-invert
/// iteration.
///
/// The first shift lies below `inf σ`, which makes `A + S − shift·M`
/// positive definite. Once the residual certifies an eigenvalue close to
/// the current Rayleigh quotient the shift is moved up to just below it,
/// but only when the LDLᵀ pivots confirm the shifted operator is still
/// positive definite, i.e. the shift stays below the bottom eigenvalue.
pub fn mu_bottom<T: Real>(a: &OperatorAssembly<T>, tol: T, max_iter: usize) -> Result<SpectralResult<T>> {
    let k = a.operator();
    let m = a.mass();
    let dual = dual_mass_for(m);
    let (sigma_min, _) = a.sigma_bounds();
    let mut shift = sigma_min - T::one();
    let mut fac = k.shifted(shift, m).ldl_positive()?;

    // deterministic positive start: the volume density
    let mut x: Vec<T> = m.to_vec();
    if x.iter().all(|&v| v == T::zero()) {
        x = vec![T::one(); m.len()];
    }
    m_normalize(&mut x, m);
    let mut value = k.form(&x);
    let mut residual = eig_residual(k, m, &dual, &x, value);
    let mut iterations = 0;
    while residual > tol && iterations < max_iter {
        iterations += 1;
        let rhs: Vec<T> = x.iter().zip(m).map(|(&v, &w)| v * w).collect();
        x = fac.solve(&rhs);
        if x.iter().copied().sum::<T>() < T::zero() {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        m_normalize(&mut x, m);
        value = k.form(&x);
        residual = eig_residual(k, m, &dual, &x, value);

        let candidate = value - (residual + residual).max(T::lit(1e-8) * (value.abs() + T::one()));
        if candidate > shift {
            if let Ok(f) = k.shifted(candidate, m).ldl_positive() {
                shift = candidate;
                fac = f;
            }
        }
    }
    if residual > tol {
        return Err(Error::NonConvergence {
            iterations,
            residual: residual.as_f64(),
            value: value.as_f64(),
            best: x.iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(SpectralResult { value, eigenfield: DiscreteField(x), iterations, residual })
}

fn m_normalize<T: Real>(x: &mut [T], m: &[T]) {
    let n: T = x.iter().zip(m).map(|(&v, &w)| w * v * v).sum::<T>().sqrt();
    if n > T::zero() {
        x.iter_mut().for_each(|v| *v /= n);
    }
}

fn dual_mass_for<T: Real>(m: &[T]) -> Vec<T> {
    let positive_min = m.iter().copied().filter(|&w| w > T::zero()).fold(T::infinity(), T::min);
    m.iter()
        .enumerate()
        .map(|(i, &w)| {
            if w > T::zero() {
                w
            } else {
                m.get(i + 1).copied().filter(|&v| v > T::zero()).unwrap_or(positive_min)
            }
        })
        .collect()
}

fn eig_residual<T: Real>(k: &SymTridiag<T>, m: &[T], dual: &[T], x: &[T], value: T) -> T {
    let kx = k.matvec(x);
    let r: Vec<T> = kx.iter().zip(x).zip(m).map(|((&a, &v), &w)| a - value * w * v).collect();
    dual_norm(&r, dual)
}

/// Outcome of comparing the `p = 2, α = 0` minimum with the bottom eigenvalue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QMuReport {
    pub q: f64,
    pub mu: f64,
    pub rel_gap: f64,
    pub passed: bool,
}

/// The `p = 2`, `α = 0` quotient minimum and `μ` are the same variational
/// problem; a relative disagreement `|Q − μ| / |μ|` beyond `tol` flags a
/// bug in one path.
pub fn q_equals_mu_check<T: Real>(a: &OperatorAssembly<T>, tol: T) -> Result<QMuReport> {
    let mu = mu_bottom(a, T::lit(1e-9), 100_000)?;
    let cfg = MinimizeConfig { q_rel_tol: 1e-15, residual_tol: 1e-10, ..MinimizeConfig::default() };
    let q = minimize_q(a, T::zero(), T::lit(2.0), &cfg, None)?.q;
    let gap = (q - mu.value).abs() / mu.value.abs().max(T::min_positive_value());
    Ok(QMuReport { q: q.as_f64(), mu: mu.value.as_f64(), rel_gap: gap.as_f64(), passed: gap <= tol })
}

/// Best constant `C = sup ‖ρ^α v‖_p / ‖v‖_{H₁²}` on the truncated domain,
/// with `‖v‖²_{H₁²} = ‖dv‖₂² + ‖v‖₂²`.
pub fn embedding_constant<T: Real>(a: &OperatorAssembly<T>, alpha: T, p: T, tol: T) -> Result<T> {
    let weights = a.weighted_mass(alpha, p)?;
    let st = a.stiffness();
    let h_form = st.affine(a.a_n().recip(), a.mass());
    let problem = Problem { op: &h_form, weights, mass: a.mass(), p };
    let cfg = MinimizeConfig { residual_tol: tol.as_f64(), ..MinimizeConfig::default() };
    let init = crate::minimize::initial_field(a, &cfg);
    let sol = problem.solve(init, &cfg)?;
    Ok(sol.q.sqrt().recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::RadialGrid;
    use crate::geometry::{ModelManifold, WeightSpec};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn assembly(m: &ModelManifold<f64>, r_max: f64, n: usize) -> OperatorAssembly<f64> {
        let g = RadialGrid::build(m, 0.0, r_max, n).unwrap();
        OperatorAssembly::assemble(m, &g, &WeightSpec::default()).unwrap()
    }

    #[test]
    fn sphere_bottom_is_six() {
        let m = ModelManifold::sphere(3).unwrap();
        let coarse = mu_bottom(&assembly(&m, PI, 250), 1e-10, 10_000).unwrap();
        let fine = mu_bottom(&assembly(&m, PI, 2000), 1e-8, 10_000).unwrap();
        assert!(fine.value > 6.0 && fine.value < coarse.value);
        assert!(fine.value - 6.0 < 5e-3, "{}", fine.value);
        assert!(fine.eigenfield.is_positive());
    }

    #[test]
    fn flat_ball_scales_like_inverse_square() {
        let m = ModelManifold::flat(3).unwrap();
        let big = mu_bottom(&assembly(&m, 10.0, 1000), 1e-10, 10_000).unwrap();
        let small = mu_bottom(&assembly(&m, 5.0, 1000), 1e-10, 10_000).unwrap();
        assert_relative_eq!(big.value, 8.0 * PI * PI / 100.0, max_relative = 1e-4);
        assert_relative_eq!(small.value / big.value, 4.0, max_relative = 1e-4);
        let a = assembly(&m, 10.0, 1000);
        assert!(big.residual <= 1e-10);
        let e = &big.eigenfield;
        assert_relative_eq!(a.mass_form(e).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn hyperbolic_bottom_decreases_towards_two() {
        let m = ModelManifold::hyperbolic(3).unwrap();
        let mu: Vec<f64> = [5.0, 10.0, 20.0]
            .iter()
            .map(|&r| mu_bottom(&assembly(&m, r, 1000), 1e-10, 100_000).unwrap().value)
            .collect();
        assert!(mu[0] > mu[1] && mu[1] > mu[2] && mu[2] > 2.0);
        // discrete value against 2 + 8π²/R²
        assert_relative_eq!(mu[1], 2.0 + 8.0 * PI * PI / 100.0, max_relative = 1e-4);
    }

    #[test]
    fn embedding_constant_l2_is_below_one() {
        let m = ModelManifold::flat(3).unwrap();
        let c = embedding_constant(&assembly(&m, 20.0, 400), 0.0, 2.0, 1e-9).unwrap();
        assert!(c < 1.0 && c > 0.95, "{c}");
    }
}
