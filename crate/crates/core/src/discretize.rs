//! Piecewise-linear radial elements for the conformal Laplacian.
//!
//! Every form is carried on the active nodes of a uniform radial grid.
//! The gradient energy `a_n ∫ θ v'² dr` uses midpoint quadrature of `θ` on
//! each cell; the `L²`, curvature and weighted `L^p` masses use nodal
//! (trapezoidal) quadrature, so they are diagonal. At a smooth pole
//! `θ(0) = 0` and the pole node carries no mass.

use std::ops::{Deref, DerefMut};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{ModelManifold, WeightSpec};
use crate::scalar::Real;
use crate::tridiag::SymTridiag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerBc {
    /// Smooth pole at `r = 0`; radial functions satisfy `v'(0) = 0`.
    PoleNeumann,
    /// Homogeneous Dirichlet condition at `r_inner`.
    Dirichlet,
}

/// Uniform radial mesh `r_i = r_inner + i h`, `i = 0..=N+1`, `h = (r_max - r_inner)/(N+1)`.
///
/// The outer node is always Dirichlet. With [`InnerBc::PoleNeumann`] the
/// pole node is an unknown, otherwise it is fixed to zero as well.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    r_inner: T,
    r_max: T,
    n_interior: usize,
    h: T,
    bc_inner: InnerBc,
    closed_end: bool,
}

impl<T: Real> RadialGrid<T> {
    /// Boundary conditions follow the model: a pole grid when `r_inner = 0`
    /// and the model has a smooth pole, Dirichlet otherwise.
    pub fn build(m: &ModelManifold<T>, r_inner: T, r_max: T, n: usize) -> Result<Self> {
        Self::build_with(m, r_inner, r_max, n, None)
    }

    pub fn build_with(
        m: &ModelManifold<T>,
        r_inner: T,
        r_max: T,
        n: usize,
        bc_inner: Option<InnerBc>,
    ) -> Result<Self> {
        if !(r_inner >= T::zero()) || !(r_max > r_inner) || !r_max.is_finite() {
            return Err(Error::Config(format!("need r_max > r_inner >= 0, got [{r_inner}, {r_max}]")));
        }
        if n < 1 {
            return Err(Error::Config("grid needs at least one interior node".into()));
        }
        let closed_end = match m.r_end() {
            Some(end) if r_max > end * (T::one() + T::lit(1e-12)) => {
                return Err(Error::Config(format!("r_max = {r_max} exceeds the model's closing pole {end}")));
            }
            Some(end) => (r_max - end).abs() <= T::lit(1e-12) * end,
            None => false,
        };
        let natural = if r_inner == T::zero() && m.has_pole() { InnerBc::PoleNeumann } else { InnerBc::Dirichlet };
        let bc = bc_inner.unwrap_or(natural);
        if bc == InnerBc::PoleNeumann && natural != InnerBc::PoleNeumann {
            return Err(Error::Config(format!(
                "pole condition requested at r_inner = {r_inner} on a model without a pole there"
            )));
        }
        if r_inner == T::zero() && !m.has_pole() {
            return Err(Error::Config("model has no smooth pole at r = 0; use r_inner > 0".into()));
        }
        let h = (r_max - r_inner) / T::from_count(n + 1);
        Ok(Self { r_inner, r_max, n_interior: n, h, bc_inner: bc, closed_end })
    }

    /// Exterior sub-grid `[R', r_max]` sharing this grid's nodes, with
    /// `R'` the first node at or beyond `radius`. Both ends are Dirichlet.
    pub fn exterior(&self, radius: T) -> Result<Self> {
        if !(radius >= self.r_inner) || !(radius < self.r_max) {
            return Err(Error::Config(format!("exterior radius {radius} outside the grid")));
        }
        let steps = ((radius - self.r_inner) / self.h - T::lit(1e-9)).ceil();
        let start = steps.to_usize().unwrap_or(0);
        if start + 2 > self.n_interior + 1 {
            return Err(Error::Config(format!("exterior radius {radius} leaves no interior nodes")));
        }
        Ok(Self {
            r_inner: self.node(start),
            r_max: self.r_max,
            n_interior: self.n_interior - start,
            h: self.h,
            bc_inner: InnerBc::Dirichlet,
            closed_end: self.closed_end,
        })
    }

    pub fn r_inner(&self) -> T {
        self.r_inner
    }

    pub fn r_max(&self) -> T {
        self.r_max
    }

    /// Number of interior nodes `N`.
    pub fn n_interior(&self) -> usize {
        self.n_interior
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn bc_inner(&self) -> InnerBc {
        self.bc_inner
    }

    /// True when `r_max` is the closing pole of a compact model.
    pub fn is_closed(&self) -> bool {
        self.closed_end
    }

    /// Radius of global node `i`, `0 ≤ i ≤ N + 1`.
    pub fn node(&self, i: usize) -> T {
        if i == self.n_interior + 1 {
            self.r_max
        } else {
            self.r_inner + T::from_count(i) * self.h
        }
    }

    /// Global index of the first unknown.
    pub fn offset(&self) -> usize {
        match self.bc_inner {
            InnerBc::PoleNeumann => 0,
            InnerBc::Dirichlet => 1,
        }
    }

    /// Number of unknowns.
    pub fn len(&self) -> usize {
        self.n_interior + 1 - self.offset()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn radii(&self) -> Vec<T> {
        (self.offset()..=self.n_interior).map(|i| self.node(i)).collect()
    }

    pub fn summary(&self, model: &str, n: usize) -> GridSummary {
        GridSummary {
            model: model.to_string(),
            n,
            r_inner: self.r_inner.as_f64(),
            r_max: self.r_max.as_f64(),
            big_n: self.n_interior,
            bc: self.bc_inner,
        }
    }
}

/// Serializable grid description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub model: String,
    pub n: usize,
    pub r_inner: f64,
    pub r_max: f64,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub bc: InnerBc,
}

/// Nodal values on the active nodes of a grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteField<T>(pub Vec<T>);

impl<T: Real> DiscreteField<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn from_fn(grid: &RadialGrid<T>, f: impl Fn(T) -> T) -> Self {
        Self(grid.radii().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    /// All values strictly positive.
    pub fn is_positive(&self) -> bool {
        self.0.iter().all(|&x| x > T::zero())
    }

    /// Largest value and its smallest index.
    pub fn argmax(&self) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        for (i, &x) in self.0.iter().enumerate() {
            match best {
                Some((_, b)) if x <= b => {}
                _ => best = Some((i, x)),
            }
        }
        best
    }
}

impl<T> Deref for DiscreteField<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> DerefMut for DiscreteField<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

impl<T> From<Vec<T>> for DiscreteField<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// Assembled quadratic forms of the conformal Laplacian on one grid.
#[derive(Debug, Clone)]
pub struct OperatorAssembly<T: Real> {
    grid: RadialGrid<T>,
    dim: usize,
    a_n: T,
    radii: Vec<T>,
    /// `a_n θ(r_{j+1/2}) / h` for cells `j = 0..=N`.
    conductance: Vec<T>,
    sigma: Vec<T>,
    mass: Vec<T>,
    stiffness: SymTridiag<T>,
    operator: SymTridiag<T>,
    weight: WeightSpec<T>,
    sigma_bounds: (T, T),
}

impl<T: Real> OperatorAssembly<T> {
    pub fn assemble(m: &ModelManifold<T>, g: &RadialGrid<T>, w: &WeightSpec<T>) -> Result<Self> {
        let h = g.h();
        let a_n = m.a_n();
        let half = T::lit(0.5);
        let mut conductance = Vec::with_capacity(g.n_interior() + 1);
        for j in 0..=g.n_interior() {
            let mid = (g.node(j) + g.node(j + 1)) * half;
            let f = m.warp().jet_with_step(mid, h).f;
            if !(f > T::zero()) || !f.is_finite() {
                return Err(Error::Assembly {
                    node: j,
                    r: mid.as_f64(),
                    reason: format!("warp f = {f} is not positive on cell midpoint"),
                });
            }
            conductance.push(a_n * m.volume_density_with_step(mid, h) / h);
        }
        let radii = g.radii();
        let mut sigma = Vec::with_capacity(radii.len());
        let mut mass = Vec::with_capacity(radii.len());
        for (a, &r) in radii.iter().enumerate() {
            let node = a + g.offset();
            let s = m.scalar_curvature_with_step(r, h).map_err(|e| Error::Assembly {
                node,
                r: r.as_f64(),
                reason: e.to_string(),
            })?;
            if !s.is_finite() {
                return Err(Error::Assembly { node, r: r.as_f64(), reason: "scalar curvature is unbounded".into() });
            }
            sigma.push(s);
            mass.push(m.volume_density_with_step(r, h) * h);
        }
        let (lo, hi) = sigma
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &s| (lo.min(s), hi.max(s)));

        let off0 = g.offset();
        let len = radii.len();
        let row_sum: Vec<T> = (0..len)
            .map(|a| {
                let node = a + off0;
                let mut s = T::zero();
                if a == 0 && node >= 1 {
                    s += conductance[node - 1];
                }
                if a + 1 == len {
                    s += conductance[node];
                }
                s
            })
            .collect();
        let off: Vec<T> = (0..len.saturating_sub(1)).map(|a| -conductance[a + off0]).collect();
        let stiffness = SymTridiag::from_row_sums(row_sum, off);
        let potential: Vec<T> = sigma.iter().zip(&mass).map(|(&s, &w)| s * w).collect();
        let operator = stiffness.affine(T::one(), &potential);
        Ok(Self {
            grid: g.clone(),
            dim: m.n(),
            a_n,
            radii,
            conductance,
            sigma,
            mass,
            stiffness,
            operator,
            weight: *w,
            sigma_bounds: (lo, hi),
        })
    }

    pub fn grid(&self) -> &RadialGrid<T> {
        &self.grid
    }

    /// Manifold dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_n(&self) -> T {
        self.a_n
    }

    pub fn p_crit(&self) -> T {
        crate::geometry::critical_exponent(self.dim)
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn radii(&self) -> &[T] {
        &self.radii
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    /// Nodal masses `θ(r_i) h`.
    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    /// Gradient part `A`, `A(v,v) = a_n Σ θ_{j+1/2} (Δv_j)²/h`.
    pub fn stiffness(&self) -> &SymTridiag<T> {
        &self.stiffness
    }

    /// `K = A + S`, the discrete conformal Laplacian.
    pub fn operator(&self) -> &SymTridiag<T> {
        &self.operator
    }

    pub fn weight_spec(&self) -> &WeightSpec<T> {
        &self.weight
    }

    /// `(inf σ, sup σ)` over the active nodes.
    pub fn sigma_bounds(&self) -> (T, T) {
        self.sigma_bounds
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: v.len() });
        }
        Ok(())
    }

    fn check_exponent(&self, alpha: T, p: T) -> Result<()> {
        let pc = self.p_crit();
        if !(p >= T::lit(2.0)) || p > pc * (T::one() + T::lit(64.0) * T::epsilon()) {
            return Err(Error::Argument(format!("exponent p = {p} outside [2, {pc}]")));
        }
        if !(alpha >= T::zero()) {
            return Err(Error::Argument(format!("weight exponent must be nonnegative, got {alpha}")));
        }
        Ok(())
    }

    /// `A(v, v)`, summed cell by cell (Dirichlet nodes contribute zero values).
    pub fn gradient_energy(&self, v: &[T]) -> Result<T> {
        self.check_len(v)?;
        let off = self.grid.offset();
        let at = |node: usize| -> T {
            if node < off || node >= off + v.len() {
                T::zero()
            } else {
                v[node - off]
            }
        };
        let mut s = T::zero();
        for (j, &k) in self.conductance.iter().enumerate() {
            let d = at(j + 1) - at(j);
            s += k * d * d;
        }
        Ok(s)
    }

    /// `S(v, v) = Σ σ_i θ_i h v_i²`.
    pub fn potential_energy(&self, v: &[T]) -> Result<T> {
        self.check_len(v)?;
        Ok(v.iter().zip(&self.sigma).zip(&self.mass).map(|((&x, &s), &m)| s * m * x * x).sum())
    }

    /// `M(v, v) = Σ θ_i h v_i²`.
    pub fn mass_form(&self, v: &[T]) -> Result<T> {
        self.check_len(v)?;
        Ok(v.iter().zip(&self.mass).map(|(&x, &m)| m * x * x).sum())
    }

    /// Discrete `∫ v L v = A(v,v) + S(v,v)`.
    pub fn energy(&self, v: &[T]) -> Result<T> {
        Ok(self.gradient_energy(v)? + self.potential_energy(v)?)
    }

    /// Symmetric bilinear form associated with [`energy`](Self::energy).
    pub fn energy_bilinear(&self, u: &[T], v: &[T]) -> Result<T> {
        self.check_len(u)?;
        self.check_len(v)?;
        let ku = self.operator.matvec(u);
        Ok(ku.iter().zip(v).map(|(&a, &b)| a * b).sum())
    }

    /// Nodal weights `θ_i h ρ(r_i)^{αp}` of the weighted `L^p` mass.
    pub fn weighted_mass(&self, alpha: T, p: T) -> Result<Vec<T>> {
        self.check_exponent(alpha, p)?;
        self.radii
            .iter()
            .zip(&self.mass)
            .map(|(&r, &m)| Ok(m * self.weight.weight(r, alpha * p)?))
            .collect()
    }

    /// `‖ρ^α v‖_p` with nodal quadrature.
    pub fn weighted_p_norm(&self, v: &[T], alpha: T, p: T) -> Result<T> {
        self.check_len(v)?;
        let w = self.weighted_mass(alpha, p)?;
        Ok(p_norm(v, &w, p))
    }

    /// Yamabe-type quotient `energy(v) / ‖ρ^α v‖_p²`.
    pub fn quotient(&self, v: &[T], alpha: T, p: T) -> Result<T> {
        let norm = self.weighted_p_norm(v, alpha, p)?;
        if !(norm > T::zero()) {
            return Err(Error::Argument("quotient of the zero field".into()));
        }
        Ok(self.energy(v)? / (norm * norm))
    }
}

pub(crate) fn p_norm<T: Real>(v: &[T], w: &[T], p: T) -> T {
    let two = T::lit(2.0);
    let s: T = if p == two {
        v.iter().zip(w).map(|(&x, &m)| m * x * x).sum()
    } else {
        v.iter().zip(w).map(|(&x, &m)| m * x.abs().powf(p)).sum()
    };
    s.powf(p.recip())
}
