//! Interaction kernels `α = ρ·𝟙(|x-y| ≤ δ)` and weights `ω` for the built-in families.
//!
//! Built-in families are radial and translation invariant: `ρ(x,y) = (y-x)/|y-x|` and
//! `ω(x,y) = r φ(r)` with `r = |y-x|`. The unweighted operators of a built-in spec use
//! `α = ρ 𝟙 r^{(n+2-2β)/2}` (times `e^{-λr/2}` when tempered), so that `γ = α·α` has the
//! same radial power as the equivalence kernel; for the fractional family this is the
//! kernel with `γ = r^{-(n+2s)}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn contains(&self, r: f64) -> bool {
        match self {
            Horizon::Finite(d) => r <= *d,
            Horizon::Infinite => true,
        }
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            Horizon::Finite(d) => Some(*d),
            Horizon::Infinite => None,
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(d) => s.serialize_f64(*d),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Horizon, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Horizon::Finite(x)),
            Raw::Str(s) if s == "inf" || s == "infinity" => Ok(Horizon::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("bad horizon {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Fractional,
    Tempered,
    PowerLaw,
    Custom,
}

type VecFn = dyn Fn(&Point, &Point) -> Point + Send + Sync;
type ScalarFn = dyn Fn(&Point, &Point) -> f64 + Send + Sync;
type RadialFn = dyn Fn(f64) -> f64 + Send + Sync;

/// User kernel. `rho` and `omega` are evaluated only at distinct points; the flags are
/// declarations the library relies on and spot-checks, not properties it can prove.
#[derive(Clone)]
pub struct CustomKernel {
    pub label: String,
    rho: Arc<VecFn>,
    omega: Arc<ScalarFn>,
    /// `(|ρ|(r), ω(r))` when the kernel is radial and translation invariant.
    radial: Option<(Arc<RadialFn>, Arc<RadialFn>)>,
    pub antisymmetric: bool,
    pub symmetric: bool,
    pub translation_invariant: bool,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("label", &self.label)
            .field("radial", &self.radial.is_some())
            .field("antisymmetric", &self.antisymmetric)
            .field("symmetric", &self.symmetric)
            .field("translation_invariant", &self.translation_invariant)
            .finish()
    }
}

impl PartialEq for CustomKernel {
    fn eq(&self, o: &Self) -> bool {
        Arc::ptr_eq(&self.rho, &o.rho) && Arc::ptr_eq(&self.omega, &o.omega)
    }
}

impl CustomKernel {
    /// `ρ(x,y) = (y-x)/r · rho(r)`, `ω(x,y) = omega(r)`.
    pub fn radial<R, W>(label: &str, rho: R, omega: W) -> CustomKernel
    where
        R: Fn(f64) -> f64 + Send + Sync + 'static,
        W: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let rho: Arc<RadialFn> = Arc::new(rho);
        let omega: Arc<RadialFn> = Arc::new(omega);
        let (r2, w2) = (rho.clone(), omega.clone());
        CustomKernel {
            label: label.to_string(),
            rho: Arc::new(move |x: &Point, y: &Point| {
                let d = *y - *x;
                let r = d.norm();
                d * (r2(r) / r)
            }),
            omega: Arc::new(move |x: &Point, y: &Point| w2(x.dist(y))),
            radial: Some((rho, omega)),
            antisymmetric: true,
            symmetric: true,
            translation_invariant: true,
        }
    }

    /// Unit direction and unit weight.
    pub fn constant() -> CustomKernel {
        CustomKernel::radial("constant", |_| 1.0, |_| 1.0)
    }

    pub fn general<R, W>(label: &str, rho: R, omega: W, antisymmetric: bool, symmetric: bool, translation_invariant: bool) -> CustomKernel
    where
        R: Fn(&Point, &Point) -> Point + Send + Sync + 'static,
        W: Fn(&Point, &Point) -> f64 + Send + Sync + 'static,
    {
        CustomKernel {
            label: label.to_string(),
            rho: Arc::new(rho),
            omega: Arc::new(omega),
            radial: None,
            antisymmetric,
            symmetric,
            translation_invariant,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: Family,
    pub n: usize,
    pub s: Option<f64>,
    pub lambda: f64,
    pub beta: Option<f64>,
    pub delta: Horizon,
    pub custom: Option<CustomKernel>,
}

impl KernelSpec {
    pub fn fractional(n: usize, s: f64, delta: Horizon) -> Result<KernelSpec> {
        KernelSpec {
            family: Family::Fractional,
            n,
            s: Some(s),
            lambda: 0.0,
            beta: None,
            delta,
            custom: None,
        }
        .validated()
    }

    pub fn tempered(n: usize, s: f64, lambda: f64, delta: Horizon) -> Result<KernelSpec> {
        KernelSpec {
            family: Family::Tempered,
            n,
            s: Some(s),
            lambda,
            beta: None,
            delta,
            custom: None,
        }
        .validated()
    }

    pub fn power_law(n: usize, beta: f64, delta: Horizon) -> Result<KernelSpec> {
        KernelSpec {
            family: Family::PowerLaw,
            n,
            s: None,
            lambda: 0.0,
            beta: Some(beta),
            delta,
            custom: None,
        }
        .validated()
    }

    pub fn custom(n: usize, delta: Horizon, kernel: CustomKernel) -> Result<KernelSpec> {
        KernelSpec {
            family: Family::Custom,
            n,
            s: None,
            lambda: 0.0,
            beta: None,
            delta,
            custom: Some(kernel),
        }
        .validated()
    }

    pub fn validated(self) -> Result<KernelSpec> {
        if !(1..=3).contains(&self.n) {
            return Err(Error::domain(format!("dimension {} outside 1..=3", self.n)));
        }
        if let Horizon::Finite(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::domain("horizon must be positive"));
            }
        }
        match self.family {
            Family::Fractional | Family::Tempered => {
                let s = self.s.ok_or_else(|| Error::domain("order s required"))?;
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::domain(format!("order s = {s} outside (0,1)")));
                }
                if self.family == Family::Tempered && !(self.lambda >= 0.0 && self.lambda.is_finite()) {
                    return Err(Error::domain("tempering rate must be nonnegative"));
                }
            }
            Family::PowerLaw => {
                let b = self.beta.ok_or_else(|| Error::domain("exponent beta required"))?;
                if !(b > self.n as f64 / 2.0 && b.is_finite()) {
                    return Err(Error::domain(format!("beta = {b} must exceed n/2")));
                }
            }
            Family::Custom => {
                if self.custom.is_none() {
                    return Err(Error::domain("custom family needs rho and omega"));
                }
            }
        }
        Ok(self)
    }

    pub fn with_delta(&self, delta: Horizon) -> Result<KernelSpec> {
        KernelSpec {
            delta,
            ..self.clone()
        }
        .validated()
    }

    pub fn order(&self) -> Option<f64> {
        self.s
    }

    /// Exponent of `φ = r^{-β}` (before tempering) for built-in families.
    pub fn beta_eff(&self) -> Option<f64> {
        match self.family {
            Family::Fractional | Family::Tempered => Some(self.n as f64 + 1.0 + self.s.unwrap()),
            Family::PowerLaw => self.beta,
            Family::Custom => None,
        }
    }

    pub fn tempering(&self) -> f64 {
        if self.family == Family::Tempered {
            self.lambda
        } else {
            0.0
        }
    }

    pub fn is_radial(&self) -> bool {
        match &self.custom {
            Some(c) => c.radial.is_some(),
            None => true,
        }
    }

    pub fn is_translation_invariant(&self) -> bool {
        match &self.custom {
            Some(c) => c.translation_invariant,
            None => true,
        }
    }

    fn check(x: &Point, y: &Point) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::domain("points of different dimension"));
        }
        let r = x.dist(y);
        if r == 0.0 {
            return Err(Error::domain("kernel evaluated at coincident points"));
        }
        Ok(r)
    }

    /// Weight profile `ω(r)` for radial kernels.
    pub fn omega_r(&self, r: f64) -> f64 {
        match (&self.custom, self.beta_eff()) {
            (Some(c), _) => (c.radial.as_ref().expect("radial kernel").1)(r),
            (None, Some(b)) => r.powf(1.0 - b) * (-self.tempering() * r).exp(),
            (None, None) => unreachable!(),
        }
    }

    /// `|ρ|(r)` for radial kernels (1 for built-ins).
    pub fn rho_r(&self, r: f64) -> f64 {
        match &self.custom {
            Some(c) => (c.radial.as_ref().expect("radial kernel").0)(r),
            None => 1.0,
        }
    }

    /// Magnitude of `αω` at separation `r`, including the horizon indicator.
    pub fn alpha_omega_r(&self, r: f64) -> f64 {
        if self.delta.contains(r) {
            self.rho_r(r) * self.omega_r(r)
        } else {
            0.0
        }
    }

    /// Magnitude of the unweighted `α` at separation `r`, including the indicator.
    pub fn alpha_r(&self, r: f64) -> f64 {
        if !self.delta.contains(r) {
            return 0.0;
        }
        match (&self.custom, self.beta_eff()) {
            (Some(_), _) => self.rho_r(r),
            (None, Some(b)) => {
                let n = self.n as f64;
                r.powf((n + 2.0 - 2.0 * b) / 2.0) * (-0.5 * self.tempering() * r).exp()
            }
            (None, None) => unreachable!(),
        }
    }

    /// `γ = α·α` at separation `r` for radial kernels.
    pub fn gamma_r(&self, r: f64) -> f64 {
        let a = self.alpha_r(r);
        a * a
    }

    pub fn rho(&self, x: &Point, y: &Point) -> Result<Point> {
        let r = Self::check(x, y)?;
        Ok(match &self.custom {
            Some(c) => (c.rho)(x, y),
            None => (*y - *x) * (1.0 / r),
        })
    }

    pub fn omega(&self, x: &Point, y: &Point) -> Result<f64> {
        let r = Self::check(x, y)?;
        Ok(match &self.custom {
            Some(c) => (c.omega)(x, y),
            None => self.omega_r(r),
        })
    }

    pub fn alpha(&self, x: &Point, y: &Point) -> Result<Point> {
        let r = Self::check(x, y)?;
        if !self.delta.contains(r) {
            return Ok(Point::zero(self.n));
        }
        match &self.custom {
            Some(c) => Ok((c.rho)(x, y)),
            None => Ok((*y - *x) * (self.alpha_r(r) / r)),
        }
    }

    pub fn alpha_omega(&self, x: &Point, y: &Point) -> Result<Point> {
        let r = Self::check(x, y)?;
        if !self.delta.contains(r) {
            return Ok(Point::zero(self.n));
        }
        match &self.custom {
            Some(c) => Ok((c.rho)(x, y) * (c.omega)(x, y)),
            None => Ok((*y - *x) * (self.omega_r(r) / r)),
        }
    }

    pub fn gamma_unweighted(&self, x: &Point, y: &Point) -> Result<f64> {
        let a = self.alpha(x, y)?;
        Ok(a.dot(&a))
    }

    /// `αω(x,y)` when `r = |y-x| > 0` and the unit direction `d` are already known.
    pub(crate) fn alpha_omega_at(&self, x: &Point, y: &Point, r: f64, d: &Point) -> Point {
        if !self.delta.contains(r) {
            return Point::zero(self.n);
        }
        match &self.custom {
            Some(c) if c.radial.is_none() => (c.rho)(x, y) * (c.omega)(x, y),
            _ => *d * (self.rho_r(r) * self.omega_r(r)),
        }
    }

    /// `γ(x,y)` when `r = |y-x| > 0` is already known.
    pub(crate) fn gamma_at(&self, x: &Point, y: &Point, r: f64) -> f64 {
        match &self.custom {
            Some(c) if c.radial.is_none() => {
                if !self.delta.contains(r) {
                    return 0.0;
                }
                let a = (c.rho)(x, y);
                a.dot(&a)
            }
            _ => self.gamma_r(r),
        }
    }
}

pub fn rho(spec: &KernelSpec, x: &Point, y: &Point) -> Result<Point> {
    spec.rho(x, y)
}

pub fn omega(spec: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    spec.omega(x, y)
}

pub fn alpha_omega(spec: &KernelSpec, x: &Point, y: &Point) -> Result<Point> {
    spec.alpha_omega(x, y)
}

pub fn gamma_unweighted(spec: &KernelSpec, x: &Point, y: &Point) -> Result<f64> {
    spec.gamma_unweighted(x, y)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    family: Family,
    n: usize,
    #[serde(default)]
    s: Option<f64>,
    #[serde(default)]
    lambda: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    delta: Horizon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile: Option<String>,
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SpecJson {
            family: self.family,
            n: self.n,
            s: self.s,
            lambda: Some(self.lambda),
            beta: self.beta,
            delta: self.delta,
            profile: self.custom.as_ref().map(|c| c.label.clone()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<KernelSpec, D::Error> {
        let j = SpecJson::deserialize(d)?;
        let custom = match (j.family, j.profile.as_deref()) {
            (Family::Custom, Some("constant")) => Some(CustomKernel::constant()),
            (Family::Custom, p) => {
                return Err(serde::de::Error::custom(format!(
                    "custom kernel profile {p:?} not available from JSON (known: \"constant\")"
                )))
            }
            (_, Some(_)) => return Err(serde::de::Error::custom("profile is only valid for custom kernels")),
            _ => None,
        };
        KernelSpec {
            family: j.family,
            n: j.n,
            s: j.s,
            lambda: j.lambda.unwrap_or(0.0),
            beta: j.beta,
            delta: j.delta,
            custom,
        }
        .validated()
        .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn frac(delta: Horizon) -> KernelSpec {
        KernelSpec::fractional(1, 0.5, delta).unwrap()
    }

    #[test]
    fn rho_examples() {
        let k = frac(Horizon::Infinite);
        assert_eq!(k.rho(&Point::x1(0.0), &Point::x1(2.0)).unwrap()[0], 1.0);
        let k2 = KernelSpec::fractional(2, 0.5, Horizon::Infinite).unwrap();
        let r = k2.rho(&Point::of(&[0.0, 0.0]), &Point::of(&[3.0, 4.0])).unwrap();
        assert!((r[0] - 0.6).abs() < 1e-15 && (r[1] - 0.8).abs() < 1e-15);
        assert!(k.rho(&Point::x1(1.0), &Point::x1(1.0)).is_err());
    }

    #[test]
    fn omega_examples() {
        let k = frac(Horizon::Infinite);
        assert_eq!(k.omega(&Point::x1(0.0), &Point::x1(1.0)).unwrap(), 1.0);
        let w = k.omega(&Point::x1(0.0), &Point::x1(2.0)).unwrap();
        assert!((w - 0.353_553_390_593_273_8).abs() < 1e-15);
        let t = KernelSpec::tempered(1, 0.5, 1.0, Horizon::Infinite).unwrap();
        let w = t.omega(&Point::x1(0.0), &Point::x1(1.0)).unwrap();
        assert!((w - 0.367_879_441_171_442_3).abs() < 1e-15);
    }

    #[test]
    fn alpha_omega_examples() {
        let k = frac(Horizon::Infinite);
        assert_eq!(k.alpha_omega(&Point::x1(0.0), &Point::x1(1.0)).unwrap()[0], 1.0);
        assert_eq!(frac(Horizon::Finite(0.5)).alpha_omega(&Point::x1(0.0), &Point::x1(1.0)).unwrap()[0], 0.0);
        assert!((k.alpha_omega(&Point::x1(0.0), &Point::x1(4.0)).unwrap()[0] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn gamma_examples() {
        let k = frac(Horizon::Infinite);
        assert!((k.gamma_unweighted(&Point::x1(0.0), &Point::x1(2.0)).unwrap() - 0.25).abs() < 1e-15);
        let t = frac(Horizon::Finite(1.0));
        assert_eq!(t.gamma_unweighted(&Point::x1(0.0), &Point::x1(1.5)).unwrap(), 0.0);
    }

    #[test]
    fn invariants_on_random_pairs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let specs = [
            KernelSpec::fractional(2, 0.3, Horizon::Finite(2.0)).unwrap(),
            KernelSpec::tempered(2, 0.7, 0.5, Horizon::Infinite).unwrap(),
            KernelSpec::power_law(2, 2.2, Horizon::Infinite).unwrap(),
        ];
        for k in &specs {
            for _ in 0..1000 {
                let x = Point::of(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
                let y = Point::of(&[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
                let a = k.rho(&x, &y).unwrap();
                let b = k.rho(&y, &x).unwrap();
                assert_eq!((a + b).norm(), 0.0);
                let w1 = k.omega(&x, &y).unwrap();
                assert_eq!(w1, k.omega(&y, &x).unwrap());
                assert!(w1 >= 0.0);
                if let Horizon::Finite(d) = k.delta {
                    if x.dist(&y) > d {
                        assert_eq!(k.alpha_omega(&x, &y).unwrap().norm(), 0.0);
                    }
                }
                assert_eq!(k.gamma_unweighted(&x, &y).unwrap(), k.gamma_unweighted(&y, &x).unwrap());
            }
        }
    }

    #[test]
    fn power_law_scaling() {
        let k = KernelSpec::power_law(2, 2.3, Horizon::Infinite).unwrap();
        let o = Point::of(&[0.0, 0.0]);
        let e = Point::of(&[0.6, 0.8]);
        for c in [0.5, 2.0, 7.0] {
            let ratio = k.omega(&o, &(e * c)).unwrap() / k.omega(&o, &e).unwrap();
            assert!((ratio - c.powf(1.0 - 2.3)).abs() < 1e-13 * ratio);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(KernelSpec::fractional(1, 1.0, Horizon::Infinite).is_err());
        assert!(KernelSpec::power_law(2, 1.0, Horizon::Infinite).is_err());
        assert!(KernelSpec::fractional(1, 0.5, Horizon::Finite(0.0)).is_err());
        assert!(KernelSpec::fractional(4, 0.5, Horizon::Infinite).is_err());
    }

    #[test]
    fn json_round_trip() {
        let j = r#"{"family":"fractional","n":1,"s":0.5,"lambda":0.0,"beta":null,"delta":"inf"}"#;
        let k: KernelSpec = serde_json::from_str(j).unwrap();
        assert_eq!(k, frac(Horizon::Infinite));
        let back: KernelSpec = serde_json::from_str(&serde_json::to_string(&k).unwrap()).unwrap();
        assert_eq!(back, k);
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"fractional","n":1,"s":0.5,"delta":1,"x":1}"#).is_err());
        let c: KernelSpec = serde_json::from_str(r#"{"family":"custom","n":1,"delta":0.25,"profile":"constant"}"#).unwrap();
        assert_eq!(c.gamma_r(0.1), 1.0);
    }
}
