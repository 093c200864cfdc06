use crate::error::{Error, Result};
use crate::geometry::{Point, Region};

use super::{polar_integrate, window, Estimate, FarField, PolarOpts, QuadratureConfig};

/// Integral over `region` of a function with point singularities at `a` and `b`.
///
/// A smooth partition of unity splits the integrand into a ball of radius `|a-b|/2` about
/// each singular point (principal value in polar coordinates) and a remainder that vanishes
/// near both points, integrated about the midpoint with a mapped far field.
pub fn two_center_integrate<F>(
    f: &F,
    a: &Point,
    b: &Point,
    region: &Region,
    cfg: &QuadratureConfig,
) -> Result<Estimate>
where
    F: Fn(&Point) -> f64 + Sync,
{
    let d = a.dist(b);
    if !(d > 0.0) {
        return Err(Error::domain("two-center integral needs distinct centers"));
    }
    let q = d / 4.0;
    let chi = |z: &Point, c: &Point| window(z.dist(c) / q);

    let mut total = Estimate::default();
    for c in [a, b] {
        let piece = region.clone().and(Region::ball(*c, 2.0 * q));
        let g = |z: &Point, _r: f64, _d: &Point| {
            let w = chi(z, c);
            if w == 0.0 {
                (0.0, 0.0)
            } else {
                (f(z) * w, 0.0)
            }
        };
        let e = polar_integrate(
            &g,
            c,
            &PolarOpts {
                region: &piece,
                far: FarField::Truncate(2.0 * q),
                singular: true,
                breaks: &[q],
            },
            cfg,
        )?;
        total = total.plus(e);
    }

    let m = (*a + *b) * 0.5;
    let g = |z: &Point, _r: f64, _d: &Point| {
        let w = 1.0 - chi(z, a) - chi(z, b);
        if w <= 0.0 {
            (0.0, 0.0)
        } else {
            (f(z) * w, 0.0)
        }
    };
    let breaks = [q, 2.0 * q, 3.0 * q, 4.0 * q];
    let e = polar_integrate(
        &g,
        &m,
        &PolarOpts {
            region,
            far: FarField::Map(d),
            singular: false,
            breaks: &breaks,
        },
        cfg,
    )?;
    Ok(total.plus(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_of_odd_singularities_1d() {
        // ∫ (1-z) z / (|1-z|^β |z|^β) dz = 8 for β = 5/2.
        let cfg = QuadratureConfig {
            rel_tol: 1e-10,
            ..Default::default()
        };
        let f = |z: &Point| {
            let z = z[0];
            (1.0 - z) * z / ((1.0 - z).abs().powf(2.5) * z.abs().powf(2.5))
        };
        let e = two_center_integrate(&f, &Point::x1(0.0), &Point::x1(1.0), &Region::Whole, &cfg).unwrap();
        assert!((e.value - 8.0).abs() < 1e-7, "{}", e.value);
    }

    #[test]
    fn smooth_integrand_over_lens() {
        let cfg = QuadratureConfig::default();
        let lens = Region::ball(Point::x1(0.0), 1.0).and(Region::ball(Point::x1(1.5), 1.0));
        let e = two_center_integrate(&|_z: &Point| 1.0, &Point::x1(0.0), &Point::x1(1.5), &lens, &cfg).unwrap();
        assert!((e.value - 0.5).abs() < 1e-10);
    }
}
