//! Two-point operators: `𝒢u(x,y)`, `𝒟ν(x)` and `ℒu = 𝒟𝒢u`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, TwoPointVectorField};
use crate::geometry::Point;
use crate::kernels::KernelSpec;
use crate::quadrature::{Estimate, QuadratureConfig};

use super::{check_dim, integrate, layout, periodic_mean, window_correction};

/// `(u(y) - u(x))·α(x,y)`.
pub fn unweighted_gradient(u: &ScalarField, spec: &KernelSpec, x: &Point, y: &Point) -> Result<Point> {
    check_dim(u.n, spec.n)?;
    Ok(spec.alpha(x, y)? * (u.eval(y) - u.eval(x)))
}

/// `𝒢u` as a two-point field, zero on the diagonal.
pub fn unweighted_gradient_field(u: &ScalarField, spec: &KernelSpec) -> TwoPointVectorField {
    let (uf, sp) = (u.clone(), spec.clone());
    let mut v = TwoPointVectorField::new(u.n, u.support.clone(), move |x, y| {
        if x == y {
            Point::zero(sp.n)
        } else {
            sp.alpha(x, y).map(|a| a * (uf.eval(y) - uf.eval(x))).unwrap_or(Point::zero(sp.n))
        }
    });
    if let Some(mean) = periodic_mean(&u.support) {
        let uf = u.clone();
        v.far_mean = Some(Arc::new(move |x: &Point| 2.0 * (mean - uf.eval(x))));
    }
    v
}

/// `∫(ν(x,y) + ν(y,x))·α(x,y) dy`.
pub fn unweighted_divergence(v: &TwoPointVectorField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_dim(v.n, spec.n)?;
    let lay = layout(&v.support, x, spec.delta, cfg)?;
    let f = |y: &Point, r: f64, d: &Point| {
        let a = match &spec.custom {
            Some(_) if !spec.is_radial() => spec.alpha(x, y).unwrap_or(Point::zero(spec.n)),
            _ => *d * spec.alpha_r(r),
        };
        ((v.eval(x, y) + v.eval(y, x)).dot(&a), 0.0)
    };
    let mut est = integrate(&f, x, &lay, cfg)?;
    if let Some(l) = lay.window {
        let m = v
            .far_mean
            .as_ref()
            .ok_or_else(|| Error::domain("periodic two-point field without a declared far-field mean"))?;
        est = est.plus(window_correction(spec.n, |r| spec.gamma_r(r), l, m(x), cfg)?);
    }
    Ok(est)
}

/// `2∫(u(y) - u(x)) γ(x,y) dy`; the paired rays form the second difference.
pub fn unweighted_laplacian(u: &ScalarField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_dim(u.n, spec.n)?;
    let lay = layout(&u.support, x, spec.delta, cfg)?;
    let ux = u.eval(x);
    let f = |y: &Point, r: f64, _d: &Point| {
        let (uy, e) = u.eval_noisy(y);
        let g = spec.gamma_at(x, y, r);
        (2.0 * (uy - ux) * g, 2.0 * e * g)
    };
    let mut est = integrate(&f, x, &lay, cfg)?;
    if let Some(l) = lay.window {
        if !spec.is_radial() {
            return Err(Error::domain("windowed periodic integration needs a radial kernel"));
        }
        let mean = periodic_mean(&u.support).unwrap();
        est = est.plus(window_correction(spec.n, |r| 2.0 * spec.gamma_r(r), l, mean - ux, cfg)?);
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::frac_laplacian_constant;
    use crate::kernels::{CustomKernel, Horizon};
    use std::f64::consts::PI;

    #[test]
    fn gradient_examples() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let u = ScalarField::linear(Point::x1(1.0));
        let g = unweighted_gradient(&u, &spec, &Point::x1(0.0), &Point::x1(1.0)).unwrap();
        assert_eq!(g[0], 1.0);
        let c = ScalarField::constant(1, 3.0);
        assert_eq!(unweighted_gradient(&c, &spec, &Point::x1(0.0), &Point::x1(1.0)).unwrap()[0], 0.0);
        let b = ScalarField::bump(Point::x1(0.1), 1.0);
        let (x, y) = (Point::x1(-0.3), Point::x1(0.45));
        let a = unweighted_gradient(&b, &spec, &x, &y).unwrap();
        let c = unweighted_gradient(&b, &spec, &y, &x).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn laplacian_of_cosine_matches_riesz_symbol() {
        // With γ = r^{-(1+2s)}, ℒu = -(2/C)(-Δ)^s u, so ℒ cos at 0 is -2π for s = 1/2.
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let u = ScalarField::trig(1, 1.0);
        let cfg = QuadratureConfig::default();
        let v = unweighted_laplacian(&u, &spec, &Point::x1(0.0), &cfg).unwrap();
        let c = frac_laplacian_constant(1, 0.5).unwrap();
        assert!((v.value + 2.0 / c).abs() < 1e-6 * 2.0 * PI, "{v:?}");
        assert!((v.value + 2.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn laplacian_of_constant_vanishes() {
        let spec = KernelSpec::power_law(1, 2.0, Horizon::Finite(0.5)).unwrap();
        let u = ScalarField::constant(1, 2.5);
        let v = unweighted_laplacian(&u, &spec, &Point::x1(0.3), &QuadratureConfig::default()).unwrap();
        assert_eq!(v.value, 0.0);
    }

    #[test]
    fn truncated_quadratic_matches_closed_form() {
        // u = x², γ ≡ 1 on |x-y| ≤ δ: 2∫_{-δ}^{δ} ((x+h)² - x²) dh = 4δ³/3.
        let spec = KernelSpec::custom(1, Horizon::Finite(0.5), CustomKernel::constant()).unwrap();
        let u = ScalarField::new(1, "x^2", crate::fields::Support::Unbounded, |p| p[0] * p[0]);
        let v = unweighted_laplacian(&u, &spec, &Point::x1(0.7), &QuadratureConfig::default()).unwrap();
        assert!((v.value - 4.0 * 0.125 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let u = ScalarField::trig(1, 2.0);
        let cfg = QuadratureConfig::default();
        let x = Point::x1(0.4);
        let d = unweighted_divergence(&unweighted_gradient_field(&u, &spec), &spec, &x, &cfg).unwrap();
        let l = unweighted_laplacian(&u, &spec, &x, &cfg).unwrap();
        assert!((d.value - l.value).abs() < 1e-6 * l.value.abs(), "{d:?} {l:?}");
    }

    #[test]
    fn divergence_of_antisymmetric_and_constant_fields() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Finite(1.0)).unwrap();
        let cfg = QuadratureConfig::default();
        let x = Point::x1(0.2);
        let anti = TwoPointVectorField::new(1, crate::fields::Support::Unbounded, |x, y| Point::x1((y[0] - x[0]).sin()));
        assert_eq!(unweighted_divergence(&anti, &spec, &x, &cfg).unwrap().value, 0.0);
        let c = TwoPointVectorField::new(1, crate::fields::Support::Unbounded, |_, _| Point::x1(0.7));
        assert!(unweighted_divergence(&c, &spec, &x, &cfg).unwrap().value.abs() < 1e-14);
    }
}
