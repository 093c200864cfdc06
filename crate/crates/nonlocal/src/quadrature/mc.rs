use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::Point;

use super::sphere_area;

/// Sampling domains for Monte Carlo oracles.
#[derive(Clone, Debug)]
pub enum McRegion {
    /// `R^n \ B_radius(center)`, importance sampled with a Pareto radius; `tail` is the
    /// decay exponent `t` of an integrand behaving like `r^{-(n+t)}`.
    BallComplement { center: Point, radius: f64, tail: f64 },
    Ball { center: Point, radius: f64 },
    Sphere { n: usize },
    SphereProduct { n: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

const STREAMS: u64 = 16;

fn direction(n: usize, rng: &mut ChaCha8Rng) -> Point {
    match n {
        1 => Point::x1(if rng.random::<bool>() { 1.0 } else { -1.0 }),
        2 => {
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            Point::of(&[t.cos(), t.sin()])
        }
        _ => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let t = rng.random::<f64>() * std::f64::consts::TAU;
            let s = (1.0 - z * z).max(0.0).sqrt();
            Point::of(&[s * t.cos(), s * t.sin(), z])
        }
    }
}

fn sample(region: &McRegion, rng: &mut ChaCha8Rng, buf: &mut Vec<Point>) -> f64 {
    buf.clear();
    match region {
        McRegion::BallComplement { center, radius, tail } => {
            let n = center.dim();
            let a = 1.2 * tail;
            let u: f64 = 1.0 - rng.random::<f64>();
            let r = radius * u.powf(-1.0 / a);
            buf.push(*center + direction(n, rng) * r);
            // 1 / density in R^n
            sphere_area(n) * r.powi(n as i32 - 1) / (a * radius.powf(a) * r.powf(-a - 1.0))
        }
        McRegion::Ball { center, radius } => {
            let n = center.dim();
            let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
            buf.push(*center + direction(n, rng) * r);
            sphere_area(n) * radius.powi(n as i32) / n as f64
        }
        McRegion::Sphere { n } => {
            buf.push(direction(*n, rng));
            sphere_area(*n)
        }
        McRegion::SphereProduct { n } => {
            buf.push(direction(*n, rng));
            buf.push(direction(*n, rng));
            sphere_area(*n).powi(2)
        }
    }
}

/// Seeded Monte Carlo estimate of `∫ f` over the region. The sample budget is split over a
/// fixed number of ChaCha streams, so the result does not depend on the thread count.
pub fn mc_integrate<F>(f: F, region: &McRegion, samples: usize, seed: u64) -> McEstimate
where
    F: Fn(&[Point]) -> f64 + Sync,
{
    let per = samples.div_ceil(STREAMS as usize);
    let parts: Vec<(f64, f64, usize)> = (0..STREAMS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let mut buf = Vec::with_capacity(2);
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..per {
                let w = sample(region, &mut rng, &mut buf);
                let x = f(&buf) * w;
                let d = x - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (x - mean);
            }
            (mean, m2, per)
        })
        .collect();
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (mb, m2b, nb) in parts {
        let tot = n + nb;
        let d = mb - mean;
        mean += d * nb as f64 / tot as f64;
        m2 += m2b + d * d * (n as f64) * (nb as f64) / tot as f64;
        n = tot;
    }
    let var = m2 / (n as f64 - 1.0);
    McEstimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        samples: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exterior_inverse_square_1d() {
        let r = McRegion::BallComplement {
            center: Point::x1(0.0),
            radius: 1.0,
            tail: 1.0,
        };
        let e = mc_integrate(|y| y[0].norm().powi(-2), &r, 200_000, 7);
        assert!((e.value - 2.0).abs() < 5.0 * e.std_error + 1e-12, "{e:?}");
        assert!(e.std_error < 2e-3);
    }

    #[test]
    fn product_measure() {
        let e = mc_integrate(|_| 1.0, &McRegion::SphereProduct { n: 2 }, 1000, 1);
        let t = std::f64::consts::TAU;
        assert!((e.value - t * t).abs() < 1e-10);
    }

    #[test]
    fn reproducible_bits() {
        let r = McRegion::Ball {
            center: Point::of(&[0.0, 0.0]),
            radius: 2.0,
        };
        let a = mc_integrate(|y| y[0][0] * y[0][0], &r, 10_000, 99);
        let b = mc_integrate(|y| y[0][0] * y[0][0], &r, 10_000, 99);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
