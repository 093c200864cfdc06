use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Point;

use super::{adaptive, gauss_legendre, Estimate, QuadratureConfig, Tol};

/// A rule over half of S^{n-1}; each node stands for the pair `±dir`.
#[derive(Clone, Debug)]
pub struct Directions {
    pub dirs: Vec<Point>,
    pub weights: Vec<f64>,
    /// Weights of an embedded coarser rule (zero on unused nodes), used for an error estimate.
    pub coarse: Option<Vec<f64>>,
}

/// Half-sphere rule with `m` angular nodes: offset trapezoid in angle for n = 2,
/// Gauss-Legendre in `cos(polar angle)` times azimuthal trapezoid for n = 3.
pub fn half_sphere(n: usize, m: usize) -> Directions {
    match n {
        1 => Directions {
            dirs: vec![Point::x1(1.0)],
            weights: vec![1.0],
            coarse: None,
        },
        2 => {
            let w = PI / m as f64;
            let mut dirs = Vec::with_capacity(m);
            let mut coarse = Vec::with_capacity(m);
            for j in 0..m {
                let t = (j as f64 + 0.5) * w;
                dirs.push(Point::of(&[t.cos(), t.sin()]));
                coarse.push(if j % 2 == 0 { 2.0 * w } else { 0.0 });
            }
            Directions {
                dirs,
                weights: vec![w; m],
                coarse: Some(coarse),
            }
        }
        3 => {
            let mu_n = (m / 2).max(4);
            let (x, wx) = gauss_legendre(mu_n);
            let wphi = 2.0 * PI / m as f64;
            let mut dirs = Vec::new();
            let mut weights = Vec::new();
            let mut coarse = Vec::new();
            for (xi, wi) in x.iter().zip(&wx) {
                let mu = 0.5 * (xi + 1.0);
                let st = (1.0 - mu * mu).max(0.0).sqrt();
                for j in 0..m {
                    let p = (j as f64 + 0.5) * wphi;
                    dirs.push(Point::of(&[st * p.cos(), st * p.sin(), mu]));
                    weights.push(0.5 * wi * wphi);
                    coarse.push(if j % 2 == 0 { wi * wphi } else { 0.0 });
                }
            }
            Directions {
                dirs,
                weights,
                coarse: Some(coarse),
            }
        }
        _ => panic!("dimension {n} unsupported"),
    }
}

/// `∫_{S^{n-1}} g dθ`; S^0 = {-1, +1} with counting measure.
pub fn sphere_integrate<G: Fn(&Point) -> f64>(g: G, n: usize, cfg: &QuadratureConfig) -> Result<Estimate> {
    if !(1..=3).contains(&n) {
        return Err(Error::domain(format!("sphere dimension {n} unsupported")));
    }
    let d = half_sphere(n, cfg.sphere_nodes);
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for (i, (p, w)) in d.dirs.iter().zip(&d.weights).enumerate() {
        let v = g(p) + g(&-*p);
        fine += w * v;
        if let Some(c) = &d.coarse {
            coarse += c[i] * v;
        }
    }
    let error = if d.coarse.is_some() {
        (fine - coarse).abs()
    } else {
        0.0
    };
    Ok(Estimate {
        value: fine,
        error,
        evals: 2 * d.dirs.len(),
    })
}

/// `∫_{|θ|=1, θ₁ ≥ 0} p(θ₁) dθ` for integrands depending on the first coordinate only,
/// reduced to a one-dimensional integral in the polar angle.
pub fn hemisphere_integral<P: Fn(f64) -> f64>(p: P, n: usize, tol: Tol) -> Result<Estimate> {
    match n {
        1 => Ok(Estimate {
            value: p(1.0),
            error: 0.0,
            evals: 1,
        }),
        2 => Ok(adaptive(|phi| p(phi.cos()), &[0.0, PI / 4.0, PI / 2.0], tol)?.scale(2.0)),
        3 => Ok(adaptive(p, &[0.0, 0.5, 1.0], tol)?.scale(2.0 * PI)),
        _ => Err(Error::domain(format!("sphere dimension {n} unsupported"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn constant_on_spheres() {
        assert_eq!(sphere_integrate(|_| 1.0, 1, &cfg()).unwrap().value, 2.0);
        let c = sphere_integrate(|_| 1.0, 2, &cfg()).unwrap().value;
        assert!((c - 2.0 * PI).abs() < 1e-13);
        let a = sphere_integrate(|_| 1.0, 3, &cfg()).unwrap().value;
        assert!((a - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn squared_first_coordinate() {
        let c = sphere_integrate(|t| t[0] * t[0], 2, &cfg()).unwrap().value;
        assert!((c - PI).abs() < 1e-13);
        let a = sphere_integrate(|t| t[2] * t[2], 3, &cfg()).unwrap().value;
        assert!((a - 4.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hemisphere_power_matches_beta_function() {
        let tol = Tol {
            abs: 1e-14,
            rel: 1e-13,
            max_evals: 100_000,
        };
        for n in 1..=3 {
            for &q in &[1.1, 1.5, 1.9] {
                let h = hemisphere_integral(|t| t.abs().powf(q), n, tol).unwrap().value;
                let g = statrs::function::gamma::gamma;
                let exact = PI.powf((n as f64 - 1.0) / 2.0) * g((q + 1.0) / 2.0)
                    / g((q + n as f64) / 2.0);
                assert!((h - exact).abs() < 1e-11 * exact, "n={n} q={q}: {h} vs {exact}");
            }
        }
    }
}
