//! Pointwise evaluation of nonlocal operators by polar quadrature about the evaluation point.
//!
//! All one-point operators share the same layout logic: the region and far-field treatment
//! follow from the horizon and from the field's declared support. Periodic fields with an
//! infinite horizon are integrated against a smooth window of radius `L`; for even
//! (Laplacian-type) integrands the discarded mass is restored as `(ū - u(x))·M(L)`, where
//! `ū` is the cell mean and `M(L)` the kernel moment outside the window. Odd integrands
//! need no correction since their windowed complement is smaller than any power of `1/L`.

pub mod fractional;
pub mod spectral;
pub mod unweighted;
pub mod weighted;

use serde::Serialize;

pub use fractional::{
    directional_divergence, directional_gradient, exterior_riesz, frac_divergence, frac_divergence_truncated,
    frac_gradient, frac_gradient_truncated, fractional_laplacian, fractional_neumann, nonlocal_flux,
    riesz_integral, tempered_divergence, tempered_fractional_laplacian, tempered_gradient,
};
pub use spectral::{spectral_fractional_laplacian, spectral_frac_gradient};
pub use unweighted::{unweighted_divergence, unweighted_gradient, unweighted_gradient_field, unweighted_laplacian};
pub use weighted::{
    weighted_divergence, weighted_divergence_primal, weighted_gradient, weighted_gradient_field,
    weighted_laplacian, GradientField,
};

use crate::error::{Error, Result};
use crate::fields::Support;
use crate::geometry::{Point, Region};
use crate::kernels::Horizon;
use crate::quadrature::{polar_integrate, window_complement_moment, Estimate, FarField, PolarOpts, QuadratureConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VectorEstimate {
    pub value: Point,
    pub error: f64,
    pub evals: usize,
}

impl VectorEstimate {
    pub fn scale(self, k: f64) -> VectorEstimate {
        VectorEstimate {
            value: self.value * k,
            error: self.error * k.abs(),
            evals: self.evals,
        }
    }

    pub(crate) fn from_components(parts: Vec<Estimate>) -> VectorEstimate {
        let c: Vec<f64> = parts.iter().map(|e| e.value).collect();
        VectorEstimate {
            value: Point::of(&c),
            error: parts.iter().map(|e| e.error * e.error).sum::<f64>().sqrt(),
            evals: parts.iter().map(|e| e.evals).sum(),
        }
    }
}

pub struct Layout {
    pub region: Region,
    pub far: FarField,
    pub breaks: Vec<f64>,
    /// Window radius when the far field is windowed.
    pub window: Option<f64>,
}

/// Window radius for periodic fields: many periods, and at least `r_max`.
pub(crate) fn periodic_window(period: f64, cfg: &QuadratureConfig) -> f64 {
    cfg.r_max.max(16.0 * period)
}

pub fn layout(support: &Support, x: &Point, delta: Horizon, cfg: &QuadratureConfig) -> Result<Layout> {
    let mut breaks = Vec::new();
    if let Support::Compact { center, radius } = support {
        let d = x.dist(center);
        breaks.extend([d - radius, d + radius].into_iter().filter(|&b| b > 0.0));
    }
    if let Horizon::Finite(dl) = delta {
        breaks.retain(|&b| b < dl);
        return Ok(Layout {
            region: Region::ball(*x, dl),
            far: FarField::Truncate(dl),
            breaks,
            window: None,
        });
    }
    let (far, window) = match support {
        Support::Compact { center, radius } => (FarField::Map((x.dist(center) + radius).max(1.0)), None),
        Support::Decay { .. } => (FarField::Map(x.norm() + 4.0), None),
        Support::Periodic { period, .. } => {
            let l = periodic_window(*period, cfg);
            (FarField::Window(l), Some(l))
        }
        Support::Unbounded => {
            return Err(Error::domain(
                "a field without declared decay needs a finite horizon",
            ))
        }
    };
    Ok(Layout {
        region: Region::Whole,
        far,
        breaks,
        window,
    })
}

pub fn integrate<F>(f: &F, x: &Point, lay: &Layout, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&Point, f64, &Point) -> (f64, f64) + Sync,
{
    polar_integrate(
        f,
        x,
        &PolarOpts {
            region: &lay.region,
            far: lay.far,
            singular: true,
            breaks: &lay.breaks,
        },
        cfg,
    )
}

/// `(ū - u(x))·∫(1-χ(|z|/L)) k(|z|) dz`: the part of `∫(u(y)-u(x))k` outside the window.
pub fn window_correction<K: Fn(f64) -> f64>(
    n: usize,
    k: K,
    l: f64,
    mean_minus_ux: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    Ok(window_complement_moment(n, k, l, cfg.tol())?.scale(mean_minus_ux))
}

pub fn periodic_mean(support: &Support) -> Option<f64> {
    match support {
        Support::Periodic { mean, .. } => Some(*mean),
        _ => None,
    }
}

pub(crate) fn check_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::domain(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}
