//! Shared integration engine: adaptive 1D rules, polar principal-value integration,
//! two-center splitting, sphere rules and seeded Monte Carlo.

pub mod gauss;
pub mod mc;
pub mod polar;
pub mod sphere;
pub mod two_center;

use serde::{Deserialize, Serialize};

use std::sync::Mutex;

use crate::error::{Error, Result};

pub use gauss::{adaptive, adaptive_par, gauss_legendre, semi_infinite, semi_infinite_par, Tol};
pub use mc::{mc_integrate, McRegion, McEstimate};
pub use polar::{polar_integrate, pv_integrate, FarField, PolarOpts};
pub use sphere::{half_sphere, hemisphere_integral, sphere_integrate, Directions};
pub use two_center::two_center_integrate;

/// A quadrature value with its error estimate and evaluation count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Estimate {
        Estimate {
            value,
            error: 0.0,
            evals: 0,
        }
    }

    pub fn scale(self, k: f64) -> Estimate {
        Estimate {
            value: self.value * k,
            error: self.error * k.abs(),
            evals: self.evals,
        }
    }

    pub fn plus(self, o: Estimate) -> Estimate {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
            evals: self.evals + o.evals,
        }
    }

    pub fn minus(self, o: Estimate) -> Estimate {
        self.plus(o.scale(-1.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Innermost principal-value cutoff radius.
    pub eps: f64,
    /// Far-field radius used when an integrand has no better far-field treatment.
    pub r_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Budget per one-dimensional adaptive run.
    pub max_evals: usize,
    pub mc_seed: u64,
    pub richardson_levels: usize,
    /// Angular resolution: nodes on a half circle (n = 2) or azimuthal nodes (n = 3).
    pub sphere_nodes: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            eps: 1e-4,
            r_max: 100.0,
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_evals: 4_000_000,
            mc_seed: 20_240_611,
            richardson_levels: 3,
            sphere_nodes: 64,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < self.r_max) {
            return Err(Error::config("require 0 < eps < r_max"));
        }
        if !(self.rel_tol > 0.0) || !(self.abs_tol >= 0.0) {
            return Err(Error::config("require rel_tol > 0 and abs_tol >= 0"));
        }
        if self.richardson_levels < 2 {
            return Err(Error::config("richardson_levels must be at least 2"));
        }
        if self.sphere_nodes < 4 || self.sphere_nodes % 2 != 0 {
            return Err(Error::config("sphere_nodes must be even and at least 4"));
        }
        if self.max_evals < 1000 {
            return Err(Error::config("max_evals must be at least 1000"));
        }
        Ok(())
    }

    pub fn tol(&self) -> Tol {
        Tol {
            abs: self.abs_tol,
            rel: self.rel_tol,
            max_evals: self.max_evals,
        }
    }

    /// Configuration for an inner integral whose values get differenced by an outer one.
    pub fn inner(&self) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol: (self.rel_tol * 1e-3).max(1e-12),
            abs_tol: self.abs_tol * 1e-3,
            ..self.clone()
        }
    }

    pub fn with_rel_tol(&self, rel_tol: f64) -> QuadratureConfig {
        QuadratureConfig {
            rel_tol,
            ..self.clone()
        }
    }
}

/// Parallel pieces per outer segment: enough to keep every worker busy.
fn pieces(segments: usize) -> usize {
    (2 * rayon::current_num_threads()).div_ceil(segments.max(1)).max(1)
}

/// `∫ f` over a union of intervals, split at `knots`; unbounded ends are mapped. The first
/// error returned by `f` aborts the integral.
pub fn line_integral<F>(f: F, ivs: &[(f64, f64)], knots: &[f64], cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(f64) -> Result<Estimate> + Sync,
{
    let fault = Mutex::new(None);
    let g = |x: f64| match f(x) {
        Ok(e) => (e.value, e.error),
        Err(e) => {
            fault.lock().unwrap().get_or_insert(e);
            (0.0, 0.0)
        }
    };
    let tol = cfg.tol();
    let mut total = Estimate::default();
    for &(a, b) in ivs {
        if !(a < b) {
            continue;
        }
        let inner: Vec<f64> = knots.iter().copied().filter(|&t| t > a && t < b).collect();
        let finite: Vec<f64> = inner.iter().copied().chain([a, b]).filter(|t| t.is_finite()).collect();
        let lo = finite.iter().copied().reduce(f64::min).unwrap_or(0.0);
        let hi = finite.iter().copied().reduce(f64::max).unwrap_or(lo);
        let mut pts = vec![lo];
        pts.extend(inner.iter().filter(|&&t| t > lo && t < hi));
        pts.push(hi);
        if hi > lo {
            total = total.plus(adaptive_par(&g, &pts, pieces(pts.len() - 1), tol)?);
        }
        let scale = (hi - lo).max(1.0);
        if a == f64::NEG_INFINITY {
            total = total.plus(semi_infinite_par(|t| g(-t), -lo, scale, pieces(1), tol)?);
        }
        if b == f64::INFINITY {
            total = total.plus(semi_infinite_par(&g, hi, scale, pieces(1), tol)?);
        }
    }
    if let Some(e) = fault.into_inner().unwrap() {
        return Err(e);
    }
    Ok(total)
}

fn psi(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Smooth cutoff: 1 on `t <= 1`, 0 on `t >= 2`, C-infinity in between.
pub fn window(t: f64) -> f64 {
    if t <= 1.0 {
        1.0
    } else if t >= 2.0 {
        0.0
    } else {
        let a = psi(2.0 - t);
        a / (a + psi(t - 1.0))
    }
}

/// Surface measure of the unit sphere in R^n (2 for n = 1).
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / statrs::function::gamma::gamma(h)
}

/// `|S^{n-1}| ∫_L^∞ k(r) (1 - window(r/L)) r^{n-1} dr`: the part of a radial kernel's mass
/// that a window of radius `L` discards.
pub fn window_complement_moment<K: Fn(f64) -> f64>(n: usize, k: K, l: f64, tol: Tol) -> Result<Estimate> {
    let near = adaptive(
        |r| k(r) * (1.0 - window(r / l)) * r.powi(n as i32 - 1),
        &[l, 1.5 * l, 2.0 * l],
        tol,
    )?;
    let far = semi_infinite(|r| k(r) * r.powi(n as i32 - 1), 2.0 * l, l, tol)?;
    Ok(near.plus(far).scale(sphere_area(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_is_a_partition() {
        assert_eq!(window(0.5), 1.0);
        assert_eq!(window(2.5), 0.0);
        assert!((window(1.5) - 0.5).abs() < 1e-15);
        for i in 0..100 {
            let t = 1.0 + i as f64 / 100.0;
            let u = 3.0 - t;
            assert!((window(t) + window(u) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-13);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        let bad = QuadratureConfig {
            richardson_levels: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
