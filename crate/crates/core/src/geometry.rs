//! Rotationally symmetric model manifolds `dr² + f(r)² g_{S^{n-1}}`.
//!
//! A model is a dimension `n ≥ 3` plus a warp profile `f`. Everything the
//! discretization needs (scalar curvature, volume density, the radial
//! weight) is evaluated pointwise from the profile and its first two
//! derivatives.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{FromPrimitive, Num};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalar function of the radius, used for custom profiles.
pub type RadialFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpKind {
    Sphere,
    Flat,
    Hyperbolic,
    CylinderBump,
    Custom,
}

/// Value and derivatives of a warp profile at one radius.
///
/// `one_minus_fp_sq` is `1 - f'(r)²`, carried separately because the
/// difference cancels badly near the poles of the round sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub f: T,
    pub fp: T,
    pub fpp: T,
    pub one_minus_fp_sq: T,
}

#[derive(Clone)]
enum Shape<T: Real> {
    Sphere,
    Flat,
    Hyperbolic,
    CylinderBump {
        c_inf: T,
        width: T,
    },
    Custom {
        f: RadialFn<T>,
        fp: Option<RadialFn<T>>,
        fpp: Option<RadialFn<T>>,
        fd_step: T,
    },
}

/// Radial warp function `f` with its derivatives.
#[derive(Clone)]
pub struct WarpProfile<T: Real> {
    kind: WarpKind,
    params: BTreeMap<String, f64>,
    shape: Shape<T>,
}

impl<T: Real> fmt::Debug for WarpProfile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WarpProfile")
            .field("kind", &self.kind)
            .field("params", &self.params)
            .finish()
    }
}

// Quintic Hermite basis on [0, 1]: value/slope at 0, value at 1
// (slope and curvature vanish at both ends except where noted).
fn hermite<T: Real>(s: T) -> [[T; 3]; 3] {
    let l = T::lit;
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = [
        T::one() - l(10.0) * s3 + l(15.0) * s4 - l(6.0) * s5,
        -l(30.0) * s2 + l(60.0) * s3 - l(30.0) * s4,
        -l(60.0) * s + l(180.0) * s2 - l(120.0) * s3,
    ];
    let h1 = [
        s - l(6.0) * s3 + l(8.0) * s4 - l(3.0) * s5,
        T::one() - l(18.0) * s2 + l(32.0) * s3 - l(15.0) * s4,
        -l(36.0) * s + l(96.0) * s2 - l(60.0) * s3,
    ];
    let h5 = [
        l(10.0) * s3 - l(15.0) * s4 + l(6.0) * s5,
        l(30.0) * s2 - l(60.0) * s3 + l(30.0) * s4,
        l(60.0) * s - l(180.0) * s2 + l(120.0) * s3,
    ];
    [h0, h1, h5]
}

impl<T: Real> WarpProfile<T> {
    pub fn sphere() -> Self {
        Self::named(WarpKind::Sphere, Shape::Sphere, BTreeMap::new())
    }

    pub fn flat() -> Self {
        Self::named(WarpKind::Flat, Shape::Flat, BTreeMap::new())
    }

    pub fn hyperbolic() -> Self {
        Self::named(WarpKind::Hyperbolic, Shape::Hyperbolic, BTreeMap::new())
    }

    /// `f(r) = r` on `[0, 1]`, C² quintic blend on `[1, 1 + width]`, then
    /// the constant `c_inf` (a round cylinder end of radius `c_inf`).
    pub fn cylinder_bump(c_inf: f64, width: f64) -> Result<Self> {
        if !(c_inf > 0.0) || !c_inf.is_finite() {
            return Err(Error::Argument(format!("cylinder radius must be positive, got {c_inf}")));
        }
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Argument(format!("blend width must be positive, got {width}")));
        }
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), c_inf);
        params.insert("w".to_string(), width);
        let profile = Self::named(
            WarpKind::CylinderBump,
            Shape::CylinderBump { c_inf: T::lit(c_inf), width: T::lit(width) },
            params,
        );
        // the blend may undershoot for extreme parameters
        let samples = 400;
        for i in 1..=samples {
            let r = T::one() + T::lit(width) * T::from_count(i) / T::from_count(samples);
            if !(profile.jet(r).f > T::zero()) {
                return Err(Error::Argument(format!(
                    "cylinder blend with c={c_inf}, w={width} is not positive at r={}",
                    r
                )));
            }
        }
        Ok(profile)
    }

    /// Custom profile from closures. Missing derivatives are replaced by
    /// centered finite differences of step `fd_step` (odd extension
    /// through the pole for negative arguments).
    pub fn custom(
        f: RadialFn<T>,
        fp: Option<RadialFn<T>>,
        fpp: Option<RadialFn<T>>,
        fd_step: T,
    ) -> Self {
        Self::named(WarpKind::Custom, Shape::Custom { f, fp, fpp, fd_step }, BTreeMap::new())
    }

    fn named(kind: WarpKind, shape: Shape<T>, params: BTreeMap<String, f64>) -> Self {
        Self { kind, params, shape }
    }

    pub fn kind(&self) -> WarpKind {
        self.kind
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Evaluates `f` and its derivatives. Custom profiles without analytic
    /// derivatives use their own finite-difference step.
    pub fn jet(&self, r: T) -> Jet<T> {
        match &self.shape {
            Shape::Custom { fd_step, .. } => self.jet_with_step(r, *fd_step),
            _ => self.jet_with_step(r, T::zero()),
        }
    }

    /// Like [`jet`](Self::jet) but with an explicit finite-difference
    /// step for tabulated/custom profiles; analytic profiles ignore it.
    pub fn jet_with_step(&self, r: T, step: T) -> Jet<T> {
        let one = T::one();
        match &self.shape {
            Shape::Sphere => {
                let (s, c) = r.sin_cos();
                Jet { f: s, fp: c, fpp: -s, one_minus_fp_sq: s * s }
            }
            Shape::Flat => Jet { f: r, fp: one, fpp: T::zero(), one_minus_fp_sq: T::zero() },
            Shape::Hyperbolic => {
                let (s, c) = (r.sinh(), r.cosh());
                Jet { f: s, fp: c, fpp: s, one_minus_fp_sq: -s * s }
            }
            Shape::CylinderBump { c_inf, width } => {
                let (f, fp, fpp) = if r <= one {
                    (r, one, T::zero())
                } else if r >= one + *width {
                    (*c_inf, T::zero(), T::zero())
                } else {
                    let w = *width;
                    let s = (r - one) / w;
                    let [h0, h1, h5] = hermite(s);
                    // F(s) = 1·H0 + w·H1 + c·H5 with d/dr = (1/w) d/ds
                    let f = h0[0] + w * h1[0] + *c_inf * h5[0];
                    let fs = h0[1] + w * h1[1] + *c_inf * h5[1];
                    let fss = h0[2] + w * h1[2] + *c_inf * h5[2];
                    (f, fs / w, fss / (w * w))
                };
                Jet { f, fp, fpp, one_minus_fp_sq: (one - fp) * (one + fp) }
            }
            Shape::Custom { f, fp, fpp, fd_step } => {
                let h = if step > T::zero() { step } else { *fd_step };
                let eval = |x: T| if x < T::zero() { -f(-x) } else { f(x) };
                let f0 = eval(r);
                let d1 = match fp {
                    Some(g) => g(r),
                    None => (eval(r + h) - eval(r - h)) / (h + h),
                };
                let d2 = match fpp {
                    Some(g) => g(r),
                    None => (eval(r + h) - f0 - f0 + eval(r - h)) / (h * h),
                };
                Jet { f: f0, fp: d1, fpp: d2, one_minus_fp_sq: (one - d1) * (one + d1) }
            }
        }
    }
}

/// Rotationally symmetric model `(M, dr² + f(r)² g_{S^{n-1}})`.
#[derive(Clone, Debug)]
pub struct ModelManifold<T: Real> {
    n: usize,
    warp: WarpProfile<T>,
    r_pole: bool,
    label: String,
    r_end: Option<T>,
}

impl<T: Real> ModelManifold<T> {
    /// `r_end` is the radius of a second, closing pole (the round sphere).
    pub fn new(
        n: usize,
        warp: WarpProfile<T>,
        r_pole: bool,
        r_end: Option<T>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::Argument(format!("dimension must be at least 3, got {n}")));
        }
        Ok(Self { n, warp, r_pole, label: label.into(), r_end })
    }

    pub fn sphere(n: usize) -> Result<Self> {
        Self::new(n, WarpProfile::sphere(), true, Some(T::PI()), format!("sphere{n}"))
    }

    pub fn flat(n: usize) -> Result<Self> {
        Self::new(n, WarpProfile::flat(), true, None, format!("flat{n}"))
    }

    pub fn hyperbolic(n: usize) -> Result<Self> {
        Self::new(n, WarpProfile::hyperbolic(), true, None, format!("hyperbolic{n}"))
    }

    pub fn cylinder_bump(n: usize, c_inf: f64, width: f64) -> Result<Self> {
        let warp = WarpProfile::cylinder_bump(c_inf, width)?;
        let mut label = format!("cylbump{n}:c={c_inf}");
        if width != 1.0 {
            label.push_str(&format!(",w={width}"));
        }
        Self::new(n, warp, true, None, label)
    }

    /// Parses a registry label such as `sphere3`, `hyperbolic4` or
    /// `cylbump3:c=0.5,w=1`.
    pub fn from_label(label: &str) -> Result<Self> {
        let (head, tail) = match label.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (label, None),
        };
        let split = head
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(|| Error::Config(format!("model label `{label}` has no dimension")))?;
        let (family, dim) = head.split_at(split);
        let n: usize = dim
            .parse()
            .map_err(|_| Error::Config(format!("bad dimension in model label `{label}`")))?;
        let mut params = BTreeMap::new();
        if let Some(tail) = tail {
            for kv in tail.split(',').filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("bad parameter `{kv}` in `{label}`")))?;
                let v: f64 = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad value for `{k}` in `{label}`")))?;
                params.insert(k.trim().to_string(), v);
            }
        }
        let allow = |keys: &[&str]| -> Result<()> {
            match params.keys().find(|k| !keys.contains(&k.as_str())) {
                Some(k) => Err(Error::Config(format!("unknown parameter `{k}` for model `{family}`"))),
                None => Ok(()),
            }
        };
        let model = match family {
            "sphere" => {
                allow(&[])?;
                Self::sphere(n)
            }
            "flat" => {
                allow(&[])?;
                Self::flat(n)
            }
            "hyperbolic" => {
                allow(&[])?;
                Self::hyperbolic(n)
            }
            "cylbump" => {
                allow(&["c", "w"])?;
                let c = params.get("c").copied().unwrap_or(0.5);
                let w = params.get("w").copied().unwrap_or(1.0);
                Self::cylinder_bump(n, c, w)
            }
            other => return Err(Error::Config(format!("unknown model family `{other}`"))),
        };
        model.map_err(|e| match e {
            Error::Argument(msg) => Error::Config(msg),
            e => e,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn warp(&self) -> &WarpProfile<T> {
        &self.warp
    }

    pub fn has_pole(&self) -> bool {
        self.r_pole
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Radius of the closing pole for compact models.
    pub fn r_end(&self) -> Option<T> {
        self.r_end
    }

    /// `a_n = 4(n-1)/(n-2)`.
    pub fn a_n(&self) -> T {
        conformal_coefficient(self.n)
    }

    /// `p_crit = 2n/(n-2)`.
    pub fn p_crit(&self) -> T {
        critical_exponent(self.n)
    }

    /// `σ(r) = -2(n-1) f''/f + (n-1)(n-2)(1 - f'²)/f²`.
    pub fn scalar_curvature(&self, r: T) -> Result<T> {
        self.scalar_curvature_with_step(r, T::zero())
    }

    pub(crate) fn scalar_curvature_with_step(&self, r: T, step: T) -> Result<T> {
        self.check_domain(r)?;
        let pole_limit = |x: T| -> Result<T> {
            // smooth pole: f = x + k x³/6 + …, σ → -n(n-1) k
            if !self.r_pole && x == T::zero() {
                return Err(Error::Domain("r = 0 is not a smooth pole of this model".into()));
            }
            let eps = T::lit(1e-4);
            let jet = if step > T::zero() {
                self.warp.jet_with_step(eps, step)
            } else {
                self.warp.jet(eps)
            };
            let n = T::from_count(self.n);
            Ok(-n * (n - T::one()) * jet.fpp / eps)
        };
        if r == T::zero() {
            return pole_limit(r);
        }
        if let Some(end) = self.r_end {
            if r == end {
                // closing pole of the sphere: mirror through r -> end - r
                return pole_limit(T::zero());
            }
        }
        let jet = if step > T::zero() { self.warp.jet_with_step(r, step) } else { self.warp.jet(r) };
        if !(jet.f > T::zero()) {
            return Err(Error::Domain(format!("warp vanishes at r = {r}")));
        }
        let n1 = T::from_count(self.n - 1);
        let n2 = T::from_count(self.n - 2);
        Ok(-(n1 + n1) * jet.fpp / jet.f + n1 * n2 * jet.one_minus_fp_sq / (jet.f * jet.f))
    }

    /// `θ(r) = |S^{n-1}| f(r)^{n-1}`.
    pub fn volume_density(&self, r: T) -> T {
        self.volume_density_with_step(r, T::zero())
    }

    pub(crate) fn volume_density_with_step(&self, r: T, step: T) -> T {
        let f = if step > T::zero() { self.warp.jet_with_step(r, step).f } else { self.warp.jet(r).f };
        unit_sphere_area::<T>(self.n - 1) * f.abs().powi((self.n - 1) as i32)
    }

    fn check_domain(&self, r: T) -> Result<()> {
        if !(r >= T::zero()) || !r.is_finite() {
            return Err(Error::Domain(format!("radius {r} outside [0, ∞)")));
        }
        if let Some(end) = self.r_end {
            if r > end {
                return Err(Error::Domain(format!("radius {r} beyond the closing pole {end}")));
            }
        }
        Ok(())
    }
}

/// Smooth radius entering the weight `ρ = exp(-r_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightSpec<T> {
    xi: T,
}

impl<T: Real> Default for WeightSpec<T> {
    fn default() -> Self {
        Self { xi: T::one() }
    }
}

impl<T: Real> WeightSpec<T> {
    /// Offset bound: `|r_s(r) - r| ≤ xi`.
    pub fn xi(&self) -> T {
        self.xi
    }

    /// `r_s(r) = sqrt(1 + r²)`.
    pub fn smooth_radius(&self, r: T) -> T {
        (T::one() + r * r).sqrt()
    }

    /// `ρ(r)^α = exp(-α sqrt(1 + r²))`, exactly `1` for `α = 0`.
    pub fn weight(&self, r: T, alpha: T) -> Result<T> {
        if !(alpha >= T::zero()) {
            return Err(Error::Argument(format!("weight exponent must be nonnegative, got {alpha}")));
        }
        if alpha == T::zero() {
            return Ok(T::one());
        }
        Ok((-alpha * self.smooth_radius(r)).exp())
    }
}

pub fn conformal_coefficient<T: Real>(n: usize) -> T {
    let n = T::from_count(n);
    T::lit(4.0) * (n - T::one()) / (n - T::lit(2.0))
}

pub fn critical_exponent<T: Real>(n: usize) -> T {
    let n = T::from_count(n);
    (n + n) / (n - T::lit(2.0))
}

// Γ(k/2) for integer k ≥ 1 via Γ(1) = 1, Γ(1/2) = √π, Γ(x+1) = xΓ(x).
fn gamma_half<T: Real>(k: usize) -> T {
    let half = T::lit(0.5);
    let (mut x, mut g) = if k.is_multiple_of(2) { (T::one(), T::one()) } else { (half, T::PI().sqrt()) };
    let target = T::from_count(k) * half;
    while x < target {
        g *= x;
        x += T::one();
    }
    g
}

/// Surface area of the unit sphere `S^k ⊂ R^{k+1}`: `2π^{(k+1)/2}/Γ((k+1)/2)`.
pub fn unit_sphere_area<T: Real>(k: usize) -> T {
    let e = T::from_count(k + 1) * T::lit(0.5);
    T::lit(2.0) * T::PI().powf(e) / gamma_half::<T>(k + 1)
}

/// Yamabe constant of the round sphere, `n(n-1) ω_n^{2/n}` with `ω_n = |S^n|`.
pub fn sphere_yamabe_constant<T: Real>(n: usize) -> Result<T> {
    if n < 3 {
        return Err(Error::Argument(format!("dimension must be at least 3, got {n}")));
    }
    let nn = T::from_count(n);
    let omega = unit_sphere_area::<T>(n);
    Ok(nn * (nn - T::one()) * omega.powf(T::lit(2.0) / nn))
}

/// Scalar curvature `-k(k+1)c² + (n-k-1)(n-k-2)` of the warped model
/// `S^{n-k-1} × H^{k+1}` with hyperbolic factor scaled by `c`.
///
/// Generic over any numeric type with exact arithmetic where available:
/// `i64` for `c ∈ {-1, 0, 1}`, `Ratio<i64>` for rational `c`, floats otherwise.
pub fn model_space_sigma<N>(n: usize, k: usize, c: N) -> Result<N>
where
    N: Num + Copy + PartialOrd + FromPrimitive,
{
    if n < 2 || k > n - 2 {
        return Err(Error::Argument(format!("need 0 <= k <= n-2, got n={n}, k={k}")));
    }
    let one = N::one();
    if c < N::zero() - one || c > one {
        return Err(Error::Argument("curvature parameter c must lie in [-1, 1]".into()));
    }
    let int = |x: usize| N::from_usize(x).expect("small integer");
    let hyperbolic = int(k) * int(k + 1) * c * c;
    let spherical = int(n - k - 1) * int(n - k - 2);
    Ok(spherical - hyperbolic)
}

/// Aubin–Talenti profile `(1 + λ² r²)^{-(n-2)/2}`.
pub fn aubin_talenti_bubble<T: Real>(n: usize, lambda: T, r: T) -> Result<T> {
    if !(lambda > T::zero()) {
        return Err(Error::Argument(format!("bubble scale must be positive, got {lambda}")));
    }
    let e = -(T::from_count(n) - T::lit(2.0)) * T::lit(0.5);
    Ok((T::one() + lambda * lambda * r * r).powf(e))
}

/// Labels understood by [`ModelManifold::from_label`], with a short description.
pub fn registry() -> Vec<(&'static str, &'static str)> {
    vec![
        ("sphere<n>", "round sphere, f = sin r on [0, π]"),
        ("flat<n>", "Euclidean space, f = r"),
        ("hyperbolic<n>", "hyperbolic space, f = sinh r"),
        ("cylbump<n>:c=<c>[,w=<w>]", "flat core blended into a cylinder end of radius c over width w"),
    ]
}

/// `f = r (1 + sin²(π r / h))`: equal to the flat profile with `f' = 1` at
/// the nodes of a grid of width `h`, but with `f'' = 2π² r / h²` there, so
/// the nodal potential is strongly negative while the stiffness barely
/// changes. Its discrete conformal Laplacian is indefinite.
#[cfg(test)]
pub(crate) fn grid_ripple(h: f64) -> ModelManifold<f64> {
    let k = std::f64::consts::PI / h;
    let f: RadialFn<f64> = Arc::new(move |r| r * (1.0 + (k * r).sin().powi(2)));
    let fp: RadialFn<f64> = Arc::new(move |r| 1.0 + (k * r).sin().powi(2) + r * k * (2.0 * k * r).sin());
    let fpp: RadialFn<f64> =
        Arc::new(move |r| 2.0 * k * (2.0 * k * r).sin() + 2.0 * r * k * k * (2.0 * k * r).cos());
    ModelManifold::new(3, WarpProfile::custom(f, Some(fp), Some(fpp), 1e-6), true, None, "ripple").unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_rational::Ratio;

    #[test]
    fn curvature_of_space_forms() {
        let s = ModelManifold::<f64>::sphere(3).unwrap();
        let f = ModelManifold::<f64>::flat(3).unwrap();
        let h = ModelManifold::<f64>::hyperbolic(4).unwrap();
        assert_relative_eq!(s.scalar_curvature(1.0).unwrap(), 6.0, max_relative = 1e-12);
        assert_eq!(f.scalar_curvature(2.5).unwrap(), 0.0);
        assert_relative_eq!(h.scalar_curvature(2.0).unwrap(), -12.0, max_relative = 1e-12);
        for i in 1..60 {
            let r = 0.05 * i as f64;
            assert_relative_eq!(s.scalar_curvature(r).unwrap(), 6.0, max_relative = 1e-12);
            assert_relative_eq!(h.scalar_curvature(r).unwrap(), -12.0, max_relative = 1e-12);
        }
        // pole limits
        assert_relative_eq!(s.scalar_curvature(0.0).unwrap(), 6.0, max_relative = 1e-6);
        assert_relative_eq!(s.scalar_curvature(std::f64::consts::PI).unwrap(), 6.0, max_relative = 1e-6);
        assert_relative_eq!(h.scalar_curvature(0.0).unwrap(), -12.0, max_relative = 1e-6);
    }

    #[test]
    fn curvature_domain_errors() {
        let s = ModelManifold::<f64>::sphere(3).unwrap();
        assert!(matches!(s.scalar_curvature(4.0), Err(Error::Domain(_))));
        let tube = ModelManifold::new(3, WarpProfile::<f64>::hyperbolic(), false, None, "tube").unwrap();
        assert!(matches!(tube.scalar_curvature(0.0), Err(Error::Domain(_))));
        assert!(tube.scalar_curvature(1.0).is_ok());
    }

    #[test]
    fn custom_profile_finite_differences() {
        let f: RadialFn<f64> = Arc::new(|r: f64| r.sin());
        let m = ModelManifold::new(3, WarpProfile::custom(f, None, None, 1e-4), true, None, "fd").unwrap();
        for r in [0.3, 1.0, 2.0] {
            assert_relative_eq!(m.scalar_curvature(r).unwrap(), 6.0, max_relative = 1e-5);
        }
    }

    #[test]
    fn volume_density_values() {
        let f = ModelManifold::<f64>::flat(3).unwrap();
        let s = ModelManifold::<f64>::sphere(3).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(f.volume_density(2.0), 16.0 * pi, max_relative = 1e-14);
        assert_relative_eq!(s.volume_density(pi / 2.0), 4.0 * pi, max_relative = 1e-14);
        assert_eq!(f.volume_density(0.0), 0.0);
        assert_relative_eq!(unit_sphere_area::<f64>(1), 2.0 * pi, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area::<f64>(3), 2.0 * pi * pi, max_relative = 1e-15);
        assert_relative_eq!(unit_sphere_area::<f64>(4), 8.0 * pi * pi / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn weight_values() {
        let w = WeightSpec::<f64>::default();
        assert_relative_eq!(w.weight(0.0, 1.0).unwrap(), (-1.0f64).exp(), max_relative = 1e-15);
        assert_eq!(w.weight(7.0, 0.0).unwrap(), 1.0);
        assert_relative_eq!(w.weight(3.0, 2.0).unwrap(), (-2.0 * 10f64.sqrt()).exp(), max_relative = 1e-15);
        assert!(w.weight(3.0, 2.0).unwrap() > 1.78e-3 && w.weight(3.0, 2.0).unwrap() < 1.80e-3);
        assert!(matches!(w.weight(1.0, -0.1), Err(Error::Argument(_))));
        assert_eq!(w.xi(), 1.0);
    }

    #[test]
    fn sphere_constants() {
        let pi = std::f64::consts::PI;
        let q3 = sphere_yamabe_constant::<f64>(3).unwrap();
        assert_relative_eq!(q3, 6.0 * (2.0 * pi * pi).powf(2.0 / 3.0), max_relative = 1e-14);
        assert!((q3 - 43.823).abs() < 1e-3);
        let q4 = sphere_yamabe_constant::<f64>(4).unwrap();
        assert_relative_eq!(q4, 12.0 * (8.0 * pi * pi / 3.0).sqrt(), max_relative = 1e-14);
        assert!((q4 - 61.562).abs() < 1e-3);
        assert!(sphere_yamabe_constant::<f64>(2).is_err());
        assert!((sphere_yamabe_constant::<f32>(3).unwrap() - 43.823).abs() < 1e-2);
    }

    #[test]
    fn model_space_sigma_exact() {
        assert_eq!(model_space_sigma(5, 1, 1i64).unwrap(), 4);
        assert_eq!(model_space_sigma(5, 1, 0i64).unwrap(), 6);
        assert_eq!(model_space_sigma(5, 1, -1i64).unwrap(), 4);
        let half = Ratio::new(1i64, 2);
        assert_eq!(model_space_sigma(5, 1, half).unwrap(), Ratio::new(11, 2));
        assert!(model_space_sigma(5, 1, 2i64).is_err());
        assert!(model_space_sigma(5, 4, 0i64).is_err());
        assert_relative_eq!(model_space_sigma(6, 2, 0.3f64).unwrap(), 6.0 - 6.0 * 0.09, max_relative = 1e-15);
    }

    #[test]
    fn bubble_values() {
        assert_eq!(aubin_talenti_bubble(3, 1.0f64, 0.0).unwrap(), 1.0);
        assert_relative_eq!(aubin_talenti_bubble(3, 1.0f64, 1.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-15);
        assert!(aubin_talenti_bubble(3, 0.0f64, 1.0).is_err());
    }

    #[test]
    fn cylinder_bump_is_c2_and_positive() {
        let w = WarpProfile::<f64>::cylinder_bump(0.5, 1.0).unwrap();
        let a = w.jet(1.0);
        let b = w.jet(1.0 + 1e-9);
        assert_relative_eq!(a.f, b.f, max_relative = 1e-8);
        assert!((a.fp - b.fp).abs() < 1e-7 && (a.fpp - b.fpp).abs() < 1e-6);
        let c = w.jet(2.0 - 1e-9);
        assert!((c.f - 0.5).abs() < 1e-8 && c.fp.abs() < 1e-7 && c.fpp.abs() < 1e-6);
        assert_eq!(w.jet(5.0).f, 0.5);
        // analytic derivatives agree with finite differences inside the blend
        for r in [1.2, 1.5, 1.8] {
            let h = 1e-5;
            let d1 = (w.jet(r + h).f - w.jet(r - h).f) / (2.0 * h);
            let d2 = (w.jet(r + h).fp - w.jet(r - h).fp) / (2.0 * h);
            assert_relative_eq!(w.jet(r).fp, d1, epsilon = 1e-8);
            assert_relative_eq!(w.jet(r).fpp, d2, epsilon = 1e-6);
        }
        assert!(WarpProfile::<f64>::cylinder_bump(-1.0, 1.0).is_err());
    }

    #[test]
    fn registry_labels() {
        let m = ModelManifold::<f64>::from_label("cylbump3:c=0.5").unwrap();
        assert_eq!(m.n(), 3);
        assert_eq!(m.warp().kind(), WarpKind::CylinderBump);
        assert_eq!(m.label(), "cylbump3:c=0.5");
        assert_eq!(ModelManifold::<f64>::from_label("hyperbolic3").unwrap().warp().kind(), WarpKind::Hyperbolic);
        assert!(matches!(ModelManifold::<f64>::from_label("torus3"), Err(Error::Config(_))));
        assert!(matches!(ModelManifold::<f64>::from_label("flat2"), Err(Error::Config(_))));
        assert!(matches!(ModelManifold::<f64>::from_label("cylbump3:q=1"), Err(Error::Config(_))));
        let m = ModelManifold::<f64>::sphere(5).unwrap();
        assert_relative_eq!(m.p_crit(), 10.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(m.a_n(), 16.0 / 3.0, max_relative = 1e-15);
    }
}
