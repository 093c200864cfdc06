//! How much of the fractional gradient a horizon `δ` throws away, against explicit bounds.

use serde::Serialize;

use crate::constants::upsilon;
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::geometry::{Point, Region};
use crate::quadrature::{line_integral, polar_integrate, Estimate, FarField, PolarOpts, QuadratureConfig};

#[derive(Clone, Debug, Serialize)]
pub struct TruncationRow {
    pub delta: f64,
    /// `∫ |grad^s u - grad^s_δ u|² dx`.
    pub measured_l2: f64,
    /// `‖u‖₂² (2Υ_{n,n+2s} δ^{-n-2s} + ‖u‖₁ √(Υ_{n,3n+4s} δ^{-3n-4s}))`.
    pub bound_l2: f64,
    /// Gap at the first sample point.
    pub measured_pointwise: f64,
    /// `|u(x)| Υ_{n,s} δ^{-s} + ‖u‖₂ √(Υ_{n,n+2s} δ^{-n-2s})`.
    pub bound_pointwise: f64,
    pub error_l2: f64,
    pub error_pointwise: f64,
    /// Worst `measured/bound` over all sample points.
    pub worst_pointwise_ratio: f64,
}

impl TruncationRow {
    pub fn l2_ratio(&self) -> f64 {
        self.measured_l2 / self.bound_l2
    }

    pub fn l2_ok(&self) -> bool {
        self.measured_l2 <= self.bound_l2
    }

    pub fn pointwise_ok(&self) -> bool {
        self.worst_pointwise_ratio <= 1.0
    }
}

/// `∫_{|y-x|>δ} (u(x) - u(y)) (x-y)/|x-y|^{2+s} dy` in one dimension.
pub(crate) fn gap(u: &ScalarField, s: f64, delta: f64, x: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let c = Point::x1(x);
    let ux = u.eval(&c);
    let region = Region::ball(c, delta).outside();
    // Radii at which the ray crosses the bulk of `u`, which is narrow when seen from far away.
    let (mid, width) = match &u.support {
        Support::Compact { center, radius } => ((x - center[0]).abs(), *radius),
        _ => (x.abs(), 1.0),
    };
    let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|k| mid + k * width)
        .filter(|r| *r > delta)
        .collect();
    let f = |y: &Point, r: f64, d: &Point| {
        let (uy, e) = u.eval_noisy(y);
        let k = -d[0] * r.powf(-1.0 - s);
        ((ux - uy) * k, e * k.abs())
    };
    polar_integrate(
        &f,
        &c,
        &PolarOpts {
            region: &region,
            far: FarField::Map((x.abs() + delta).max(1.0)),
            singular: false,
            breaks: &breaks,
        },
        cfg,
    )
}

fn norm(u: &ScalarField, p: i32, cfg: &QuadratureConfig) -> Result<f64> {
    let e = line_integral(
        |x| {
            Ok(Estimate {
                value: u.eval(&Point::x1(x)).abs().powi(p),
                error: 0.0,
                evals: 1,
            })
        },
        &[(f64::NEG_INFINITY, f64::INFINITY)],
        &[0.0],
        cfg,
    )?;
    Ok(e.value.powf(1.0 / p as f64))
}

/// Measured gaps and their bounds for each horizon. `points` are the pointwise sample
/// locations; the first one is reported as `measured_pointwise`.
pub fn truncation_study(
    u: &ScalarField,
    s: f64,
    deltas: &[f64],
    points: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<TruncationRow>> {
    cfg.validate()?;
    if u.n != 1 {
        return Err(Error::config("truncation studies are one-dimensional"));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} outside (0,1)")));
    }
    if points.is_empty() {
        return Err(Error::config("at least one sample point is needed"));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::config("horizons must be positive and finite"));
    }
    let n = 1.0;
    let l1 = norm(u, 1, cfg)?;
    let l2 = norm(u, 2, cfg)?;
    let (u_s, u_2s, u_4s) = (upsilon(1, s)?, upsilon(1, n + 2.0 * s)?, upsilon(1, 3.0 * n + 4.0 * s)?);
    let inner = cfg.with_rel_tol((cfg.rel_tol * 1e-2).max(1e-13));
    deltas
        .iter()
        .map(|&d| {
            let sq = line_integral(
                |x| {
                    let g = gap(u, s, d, x, &inner)?;
                    Ok(Estimate {
                        value: g.value * g.value,
                        error: 2.0 * g.value.abs() * g.error,
                        evals: g.evals,
                    })
                },
                &[(f64::NEG_INFINITY, f64::INFINITY)],
                &[-d, 0.0, d],
                cfg,
            )?;
            let bound_l2 = l2 * l2 * (2.0 * u_2s / d.powf(n + 2.0 * s) + l1 * (u_4s / d.powf(3.0 * n + 4.0 * s)).sqrt());
            let tail = l2 * (u_2s / d.powf(n + 2.0 * s)).sqrt();
            let mut first = None;
            let mut worst: f64 = 0.0;
            for &x in points {
                let g = gap(u, s, d, x, cfg)?;
                let b = u.eval(&Point::x1(x)).abs() * u_s / d.powf(s) + tail;
                worst = worst.max(g.value.abs() / b);
                first.get_or_insert((g, b));
            }
            let (g, b) = first.unwrap();
            Ok(TruncationRow {
                delta: d,
                measured_l2: sq.value,
                bound_l2,
                measured_pointwise: g.value.abs(),
                bound_pointwise: b,
                error_l2: sq.error,
                error_pointwise: g.error,
                worst_pointwise_ratio: worst,
            })
        })
        .collect()
}

/// Least-squares slope of `log measured_pointwise` against `log δ`; `-∞` when a gap vanishes.
pub fn pointwise_slope(rows: &[TruncationRow]) -> f64 {
    if rows.len() < 2 {
        return f64::NAN;
    }
    if rows.iter().any(|r| !(r.measured_pointwise > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.delta.ln(), r.measured_pointwise.ln())).collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::fractional::{frac_gradient, frac_gradient_truncated};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default().with_rel_tol(1e-8)
    }

    #[test]
    fn gap_is_full_minus_truncated() {
        let u = ScalarField::gauss_like(1);
        let (s, d, x) = (0.4, 0.7, 0.3);
        let c = cfg();
        let full = frac_gradient(&u, s, &Point::x1(x), &c).unwrap();
        let cut = frac_gradient_truncated(&u, s, d, &Point::x1(x), &c).unwrap();
        let g = gap(&u, s, d, x, &c).unwrap();
        assert!((full.value[0] - cut.value[0] - g.value).abs() < 1e-6, "{g:?}");
        // Far from the bulk the gap is -‖u‖₁ x^{-1-s} to leading order.
        let far = gap(&u, 0.5, 32.0, 1000.0, &c).unwrap().value;
        assert!((far / (-std::f64::consts::PI.sqrt() * 1000f64.powf(-1.5)) - 1.0).abs() < 1e-5, "{far}");
    }

    #[test]
    fn gaussian_norms() {
        let u = ScalarField::gauss_like(1);
        let pi = std::f64::consts::PI;
        assert!((norm(&u, 1, &cfg()).unwrap() - pi.sqrt()).abs() < 1e-9);
        assert!((norm(&u, 2, &cfg()).unwrap() - (pi / 2.0).sqrt().sqrt()).abs() < 1e-9);
    }

    #[test]
    fn bounds_hold_at_moderate_horizons() {
        let u = ScalarField::gauss_like(1);
        let rows = truncation_study(&u, 0.5, &[2.0, 4.0], &[0.3, 1.0], &cfg()).unwrap();
        for r in &rows {
            assert!(r.l2_ok(), "{r:?}");
            assert!(r.pointwise_ok(), "{r:?}");
        }
        // Frozen: measured/bound at δ = 2.
        assert!((rows[0].l2_ratio() - 0.664).abs() < 5e-3, "{}", rows[0].l2_ratio());
    }

    #[test]
    fn squared_bound_fails_for_large_horizons() {
        // For a Gaussian the ratio tends to √(π/2) as δ grows.
        let u = ScalarField::gauss_like(1);
        let rows = truncation_study(&u, 0.5, &[32.0], &[0.3], &cfg()).unwrap();
        assert!(!rows[0].l2_ok());
        assert!((rows[0].l2_ratio() - 1.1129).abs() < 1e-3, "{}", rows[0].l2_ratio());
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<TruncationRow> = [1.0, 2.0, 4.0]
            .iter()
            .map(|&d: &f64| TruncationRow {
                delta: d,
                measured_l2: 0.0,
                bound_l2: 1.0,
                measured_pointwise: 3.0 * d.powf(-0.5),
                bound_pointwise: 1.0,
                error_l2: 0.0,
                error_pointwise: 0.0,
                worst_pointwise_ratio: 0.0,
            })
            .collect();
        assert!((pointwise_slope(&rows) + 0.5).abs() < 1e-12);
    }
}
