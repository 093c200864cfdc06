//! Cartesian fractional gradient and divergence (untruncated, truncated, tempered), the
//! Riesz fractional Laplacian and the exterior flux operators.
//!
//! These are written directly from their integral definitions, independently of the
//! weighted operators they coincide with, so the two can be cross-checked.

use crate::constants::{frac_laplacian_constant, grad_scale};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::geometry::{BoxDomain, Point, Region};
use crate::kernels::{Horizon, KernelSpec};
use crate::quadrature::{polar_integrate, Estimate, FarField, PolarOpts, QuadratureConfig};

use super::unweighted::unweighted_laplacian;
use super::{check_dim, integrate, layout, periodic_mean, window_correction, VectorEstimate};

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} outside (0,1)")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::domain("tempering rate must be finite and nonnegative"));
    }
    Ok(())
}

fn cartesian_gradient(u: &ScalarField, s: f64, delta: Horizon, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    check_order(s)?;
    check_lambda(lambda)?;
    let n = u.n;
    let lay = layout(&u.support, x, delta, cfg)?;
    let ux = u.eval(x);
    let p = n as f64 + s + 1.0;
    let mut parts = Vec::with_capacity(n);
    for i in 0..n {
        let f = |y: &Point, r: f64, _d: &Point| {
            if !delta.contains(r) {
                return (0.0, 0.0);
            }
            let k = (x[i] - y[i]) * r.powf(-p) * (-lambda * r).exp();
            let (uy, e) = u.eval_noisy(y);
            ((ux - uy) * k, e * k.abs())
        };
        parts.push(integrate(&f, x, &lay, cfg)?);
    }
    Ok(VectorEstimate::from_components(parts))
}

fn cartesian_divergence(v: &VectorField, s: f64, delta: Horizon, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_order(s)?;
    check_lambda(lambda)?;
    let n = v.dim();
    let lay = layout(&v.support(), x, delta, cfg)?;
    let (vx, _) = v.eval_noisy(x);
    let p = n as f64 + s + 1.0;
    let f = |y: &Point, r: f64, _d: &Point| {
        if !delta.contains(r) {
            return (0.0, 0.0);
        }
        let k = r.powf(-p) * (-lambda * r).exp();
        let (vy, e) = v.eval_noisy(y);
        ((vx - vy).dot(&(*x - *y)) * k, e * r * k)
    };
    integrate(&f, x, &lay, cfg)
}

/// `grad^s u(x) = ∫(u(x) - u(y)) (x-y)/|x-y|^{n+s+1} dy`.
pub fn frac_gradient(u: &ScalarField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    cartesian_gradient(u, s, Horizon::Infinite, 0.0, x, cfg)
}

/// `div^s v(x) = ∫(v(x) - v(y))·(x-y)/|x-y|^{n+s+1} dy`.
pub fn frac_divergence(v: &VectorField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    cartesian_divergence(v, s, Horizon::Infinite, 0.0, x, cfg)
}

pub fn frac_gradient_truncated(u: &ScalarField, s: f64, delta: f64, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    cartesian_gradient(u, s, finite(delta)?, 0.0, x, cfg)
}

pub fn frac_divergence_truncated(v: &VectorField, s: f64, delta: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    cartesian_divergence(v, s, finite(delta)?, 0.0, x, cfg)
}

/// Kernel multiplied by `e^{-λ|x-y|}`.
pub fn tempered_gradient(u: &ScalarField, s: f64, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    cartesian_gradient(u, s, Horizon::Infinite, lambda, x, cfg)
}

pub fn tempered_divergence(v: &VectorField, s: f64, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    cartesian_divergence(v, s, Horizon::Infinite, lambda, x, cfg)
}

/// Directional (Riemann-Liouville) gradient, through its identity with `G_s·grad^s`.
pub fn directional_gradient(u: &ScalarField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    Ok(frac_gradient(u, s, x, cfg)?.scale(grad_scale(s)?))
}

pub fn directional_divergence(v: &VectorField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    Ok(frac_divergence(v, s, x, cfg)?.scale(grad_scale(s)?))
}

fn finite(delta: f64) -> Result<Horizon> {
    if delta > 0.0 && delta.is_finite() {
        Ok(Horizon::Finite(delta))
    } else {
        Err(Error::domain("truncated operator needs a finite positive horizon"))
    }
}

fn riesz(u: &ScalarField, s: f64, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_order(s)?;
    check_lambda(lambda)?;
    let n = u.n;
    let lay = layout(&u.support, x, Horizon::Infinite, cfg)?;
    let ux = u.eval(x);
    let p = n as f64 + 2.0 * s;
    let k = move |r: f64| r.powf(-p) * (-lambda * r).exp();
    let f = |y: &Point, r: f64, _d: &Point| {
        let (uy, e) = u.eval_noisy(y);
        ((ux - uy) * k(r), e * k(r))
    };
    let mut est = integrate(&f, x, &lay, cfg)?;
    if let Some(l) = lay.window {
        let mean = periodic_mean(&u.support).unwrap();
        est = est.plus(window_correction(n, k, l, ux - mean, cfg)?);
    }
    Ok(est)
}

/// `PV∫(u(x) - u(y)) |x-y|^{-(n+2s)} dy`.
pub fn riesz_integral(u: &ScalarField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    riesz(u, s, 0.0, x, cfg)
}

/// `(-Δ)^s u(x) = C_{n,s} PV∫(u(x) - u(y)) |x-y|^{-(n+2s)} dy`.
pub fn fractional_laplacian(u: &ScalarField, s: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    Ok(riesz(u, s, 0.0, x, cfg)?.scale(frac_laplacian_constant(u.n, s)?))
}

/// `(-Δ)^s_λ u(x)`: the Riesz kernel times `e^{-λ|x-y|}`, same constant.
pub fn tempered_fractional_laplacian(u: &ScalarField, s: f64, lambda: f64, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    Ok(riesz(u, s, lambda, x, cfg)?.scale(frac_laplacian_constant(u.n, s)?))
}

fn exterior_point(x: &Point, omega: &BoxDomain) -> Result<()> {
    if omega.contains_closed(x) {
        return Err(Error::domain("flux operators are evaluated outside the closed domain"));
    }
    Ok(())
}

fn riesz_over(u: &ScalarField, s: f64, x: &Point, region: &Region, far: FarField, cfg: &QuadratureConfig) -> Result<Estimate> {
    let ux = u.eval(x);
    let p = u.n as f64 + 2.0 * s;
    let f = |y: &Point, r: f64, _d: &Point| {
        let k = r.powf(-p);
        let (uy, e) = u.eval_noisy(y);
        ((ux - uy) * k, e * k)
    };
    let lay = layout(&u.support, x, Horizon::Infinite, cfg)?;
    polar_integrate(
        &f,
        x,
        &PolarOpts {
            region,
            far,
            singular: false,
            breaks: &lay.breaks,
        },
        cfg,
    )
}

/// `𝒩_s u(x) = ∫_Ω (u(x) - u(y)) |x-y|^{-(n+2s)} dy` for `x ∉ Ω`.
pub fn fractional_neumann(u: &ScalarField, s: f64, x: &Point, omega: &BoxDomain, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_order(s)?;
    check_dim(u.n, omega.dim())?;
    exterior_point(x, omega)?;
    riesz_over(u, s, x, &Region::Box(omega.clone()), FarField::Truncate(f64::INFINITY), cfg)
}

/// `∫_{R^n \ Ω} (u(x) - u(y)) |x-y|^{-(n+2s)} dy`, principal value at `x`.
pub fn exterior_riesz(u: &ScalarField, s: f64, x: &Point, omega: &BoxDomain, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_order(s)?;
    check_dim(u.n, omega.dim())?;
    exterior_point(x, omega)?;
    let region = Region::Box(omega.clone()).outside();
    let lay = layout(&u.support, x, Horizon::Infinite, cfg)?;
    let ux = u.eval(x);
    let p = u.n as f64 + 2.0 * s;
    let f = |y: &Point, r: f64, _d: &Point| {
        let k = r.powf(-p);
        let (uy, e) = u.eval_noisy(y);
        ((ux - uy) * k, e * k)
    };
    polar_integrate(
        &f,
        x,
        &PolarOpts {
            region: &region,
            far: lay.far,
            singular: true,
            breaks: &lay.breaks,
        },
        cfg,
    )
}

/// `𝒩[𝒢u](x) = -𝒟(𝒢u)(x)` for `x ∉ Ω`; with the Riesz-type kernel of order `s` this is
/// `2∫(u(x) - u(y)) |x-y|^{-(n+2s)} dy`.
pub fn nonlocal_flux(u: &ScalarField, spec: &KernelSpec, x: &Point, omega: &BoxDomain, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_dim(u.n, omega.dim())?;
    exterior_point(x, omega)?;
    Ok(unweighted_laplacian(u, spec, x, cfg)?.scale(-1.0))
}
