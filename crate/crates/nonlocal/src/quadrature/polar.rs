//! Integration in polar coordinates about a point singularity.
//!
//! Each angular node `θ` carries the pair of rays `c ± rθ`, summed at equal radius before
//! radial quadrature, so the odd leading part of a principal-value integrand cancels
//! exactly. The innermost ball `r < ε` is removed at a sequence of radii
//! `ε_k = ε·4^{-k}` and the limit `ε → 0` is extrapolated with Aitken's process.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, Region, Span};
use crate::kernels::Horizon;

use super::gauss::{adaptive_noisy, semi_infinite_noisy};
use super::{half_sphere, window, Estimate, QuadratureConfig, Tol};

/// How an unbounded radial range is handled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FarField {
    /// Cut the ray at this radius.
    Truncate(f64),
    /// Map `[a, ∞)` onto a finite interval with length scale `L`; exact for integrable tails.
    Map(f64),
    /// Multiply by `window(r/L)` and cut at `2L`; for oscillatory integrands, the caller
    /// accounts for the discarded mass.
    Window(f64),
}

#[derive(Clone, Debug)]
pub struct PolarOpts<'a> {
    pub region: &'a Region,
    pub far: FarField,
    /// Remove and extrapolate the inner ball when both rays of a pair start at the center.
    pub singular: bool,
    /// Additional radial breakpoints.
    pub breaks: &'a [f64],
}

struct Ray {
    plus: Vec<Span>,
    minus: Vec<Span>,
}

fn in_spans(s: &[Span], r: f64) -> bool {
    s.iter().any(|&(a, b)| r >= a && r <= b)
}

fn clip(spans: Vec<Span>, far: FarField) -> Vec<Span> {
    let cap = match far {
        FarField::Truncate(r) => r,
        FarField::Window(l) => 2.0 * l,
        FarField::Map(_) => f64::INFINITY,
    };
    spans
        .into_iter()
        .filter(|s| s.0 < cap)
        .map(|(a, b)| (a, b.min(cap)))
        .collect()
}

/// `∫_{region} f(y) dy` in polar coordinates about `c`. The integrand receives
/// `(y, |y - c|, (y - c)/|y - c|)` and returns `(value, noise)`.
pub fn polar_integrate<F>(f: &F, c: &Point, opts: &PolarOpts, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&Point, f64, &Point) -> (f64, f64) + Sync,
{
    let n = c.dim();
    let dirs = half_sphere(n, cfg.sphere_nodes);
    let wsum: f64 = dirs.weights.iter().sum();
    let tol = Tol {
        abs: cfg.abs_tol / (2.0 * wsum),
        rel: cfg.rel_tol,
        max_evals: cfg.max_evals,
    };
    let rays: Vec<Result<Estimate>> = dirs
        .dirs
        .par_iter()
        .map(|d| {
            let ray = Ray {
                plus: clip(opts.region.ray_spans(c, d), opts.far),
                minus: clip(opts.region.ray_spans(c, &-*d), opts.far),
            };
            radial(f, c, d, &ray, opts, cfg, tol)
        })
        .collect();
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evals = 0;
    let mut coarse = 0.0;
    for (i, r) in rays.into_iter().enumerate() {
        let e = r?;
        value += dirs.weights[i] * e.value;
        error += dirs.weights[i] * e.error;
        evals += e.evals;
        if let Some(cw) = &dirs.coarse {
            coarse += cw[i] * e.value;
        }
    }
    if dirs.coarse.is_some() {
        error += (value - coarse).abs();
    }
    Ok(Estimate { value, error, evals })
}

fn radial<F>(
    f: &F,
    c: &Point,
    d: &Point,
    ray: &Ray,
    opts: &PolarOpts,
    cfg: &QuadratureConfig,
    tol: Tol,
) -> Result<Estimate>
where
    F: Fn(&Point, f64, &Point) -> (f64, f64) + Sync,
{
    if ray.plus.is_empty() && ray.minus.is_empty() {
        return Ok(Estimate::default());
    }
    let n = c.dim() as i32;
    let md = -*d;
    let (win, far_scale) = match opts.far {
        FarField::Window(l) => (Some(l), l),
        FarField::Map(l) => (None, l),
        FarField::Truncate(r) => (None, r),
    };
    let g = |r: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut e = 0.0;
        if in_spans(&ray.plus, r) {
            let (a, b) = f(&(*c + *d * r), r, d);
            v += a;
            e += b;
        }
        if in_spans(&ray.minus, r) {
            let (a, b) = f(&(*c + md * r), r, &md);
            v += a;
            e += b;
        }
        let mut j = r.powi(n - 1);
        if let Some(l) = win {
            j *= window(r / l);
        }
        (v * j, e * j.abs())
    };

    let mut pts: Vec<f64> = Vec::new();
    let mut unbounded = false;
    for s in ray.plus.iter().chain(ray.minus.iter()) {
        pts.push(s.0);
        if s.1.is_finite() {
            pts.push(s.1);
        } else {
            unbounded = true;
        }
    }
    let lo = pts.iter().cloned().fold(f64::INFINITY, f64::min);
    let starts_at_center = |s: &[Span]| s.first().is_some_and(|x| x.0 == 0.0);
    let pv = opts.singular && starts_at_center(&ray.plus) && starts_at_center(&ray.minus);
    let mut hi = pts.iter().cloned().fold(lo, f64::max);
    if unbounded {
        hi = hi.max(far_scale);
        pts.push(hi);
    }
    pts.extend(opts.breaks.iter().filter(|&&b| b > lo && b < hi));

    if !pv {
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let mut est = adaptive_noisy(g, &pts, tol)?;
        if unbounded {
            est = est.plus(semi_infinite_noisy(g, hi, far_scale, tol)?);
        }
        return Ok(est);
    }

    // Principal value about the center.
    let first_end = ray.plus[0].1.min(ray.minus[0].1);
    let mut eps = cfg.eps.min(first_end / 4.0);
    if first_end <= 0.0 || eps <= 0.0 {
        return Err(Error::quadrature("degenerate ray span", 0.0, 0.0, 0));
    }
    let top = first_end.min(hi);
    let mut r = eps;
    while r < top {
        pts.push(r);
        r *= 2.0;
    }
    pts.push(eps);
    pts.retain(|&p| p >= eps);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut main = adaptive_noisy(g, &pts, tol)?;
    if unbounded {
        main = main.plus(semi_infinite_noisy(g, hi, far_scale, tol)?);
    }

    let inc_tol = Tol {
        abs: tol.abs.max(tol.rel * main.value.abs()),
        ..tol
    };
    // Shrink the cutoff until successive extrapolated tails agree to the target.
    let min_levels = cfg.richardson_levels.max(3);
    let mut incs: Vec<f64> = Vec::new();
    let mut evals = main.evals;
    let mut err = main.error;
    let mut best: Option<(f64, f64)> = None;
    for level in 1..MAX_PV_LEVELS {
        let e2 = eps / 4.0;
        let inc = match adaptive_noisy(g, &[e2, 2.0 * e2, eps], inc_tol) {
            Ok(inc) => inc,
            // Round-off near the center; keep what has converged so far.
            Err(_) if best.is_some() => break,
            Err(e) => return Err(e),
        };
        evals += inc.evals;
        err += inc.error;
        incs.push(inc.value);
        eps = e2;
        if level + 1 < min_levels {
            continue;
        }
        let total: f64 = main.value + incs.iter().sum::<f64>();
        let target = tol.abs.max(tol.rel * total.abs());
        let floor = tol.abs.max(1e-13 * total.abs()) + err;
        let Some((tail, tail_err)) = extrapolate(&incs, floor) else {
            if best.is_some() {
                break;
            }
            continue;
        };
        let drift = best.map_or(tail_err, |(v, _)| (total + tail - v).abs()).min(tail_err);
        best = Some((total + tail, drift));
        if drift <= target || inc.value.abs() <= target * 1e-3 {
            break;
        }
    }
    let total: f64 = main.value + incs.iter().sum::<f64>();
    let (value, drift) = best.ok_or_else(|| {
        Error::quadrature(
            format!("principal-value extrapolation not converging: increments {incs:?}"),
            total,
            err,
            evals,
        )
    })?;
    Ok(Estimate {
        value,
        error: err + drift,
        evals,
    })
}

const MAX_PV_LEVELS: usize = 16;

/// Given successive increments `Δ_k` of a cutoff sequence, estimate the remaining tail.
fn extrapolate(incs: &[f64], floor: f64) -> Option<(f64, f64)> {
    let k = incs.len();
    let d2 = incs[k - 1];
    if d2.abs() <= floor {
        return Some((0.0, d2.abs()));
    }
    if k < 2 {
        // Single increment: assume at least the ratio of an integrable r^{-1} + 0 singularity.
        return Some((0.0, d2.abs()));
    }
    let d1 = incs[k - 2];
    let q = d2 / d1;
    if !(q.abs() < 1.0) || !q.is_finite() {
        return None;
    }
    let tail = d2 * q / (1.0 - q);
    Some((tail, 0.01 * tail.abs() + floor * 1e-3))
}

/// Principal value `lim ∫_{ε ≤ |y-c| ≤ min(δ, r_max)} f dy` for a scalar integrand.
pub fn pv_integrate<F>(f: F, c: &Point, delta: Horizon, cfg: &QuadratureConfig) -> Result<Estimate>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let region = match delta {
        Horizon::Finite(d) => Region::ball(*c, d),
        Horizon::Infinite => Region::Whole,
    };
    let g = |y: &Point, _r: f64, _d: &Point| (f(y), 0.0);
    polar_integrate(
        &g,
        c,
        &PolarOpts {
            region: &region,
            far: FarField::Truncate(cfg.r_max),
            singular: true,
            breaks: &[],
        },
        cfg,
    )
}
