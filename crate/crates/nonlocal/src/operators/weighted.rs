//! One-point operators `𝒢_ω`, `𝒟_ω` and `ℒ_ω = 𝒟_ω𝒢_ω`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support, VectorField};
use crate::geometry::Point;
use crate::kernels::{Horizon, KernelSpec};
use crate::quadrature::{Estimate, QuadratureConfig};

use super::{check_dim, integrate, layout, VectorEstimate};

/// `∫(u(y) - u(x)) α(x,y)ω(x,y) dy`.
pub fn weighted_gradient(u: &ScalarField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<VectorEstimate> {
    check_dim(u.n, spec.n)?;
    let lay = layout(&u.support, x, spec.delta, cfg)?;
    let ux = u.eval(x);
    let mut parts = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let f = |y: &Point, r: f64, d: &Point| {
            let (uy, e) = u.eval_noisy(y);
            let a = spec.alpha_omega_at(x, y, r, d)[i];
            ((uy - ux) * a, e * a.abs())
        };
        parts.push(integrate(&f, x, &lay, cfg)?);
    }
    Ok(VectorEstimate::from_components(parts))
}

/// `∫(v(y) - v(x))·α(x,y)ω(x,y) dy`.
pub fn weighted_divergence(v: &VectorField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_dim(v.dim(), spec.n)?;
    let lay = layout(&v.support(), x, spec.delta, cfg)?;
    let (vx, _) = v.eval_noisy(x);
    let f = |y: &Point, r: f64, d: &Point| {
        let (vy, e) = v.eval_noisy(y);
        let a = spec.alpha_omega_at(x, y, r, d);
        ((vy - vx).dot(&a), e * a.norm())
    };
    integrate(&f, x, &lay, cfg)
}

/// The primal form `∫(ω(x,y)v(x) + ω(y,x)v(y))·α(x,y) dy`, with `α = ρ𝟙`.
pub fn weighted_divergence_primal(v: &VectorField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_dim(v.dim(), spec.n)?;
    let lay = layout(&v.support(), x, spec.delta, cfg)?;
    let (vx, _) = v.eval_noisy(x);
    let f = |y: &Point, r: f64, _d: &Point| {
        if !spec.delta.contains(r) {
            return (0.0, 0.0);
        }
        let (vy, e) = v.eval_noisy(y);
        let (Ok(rho), Ok(wxy), Ok(wyx)) = (spec.rho(x, y), spec.omega(x, y), spec.omega(y, x)) else {
            return (0.0, 0.0);
        };
        ((vx * wxy + vy * wyx).dot(&rho), e * wyx * rho.norm())
    };
    integrate(&f, x, &lay, cfg)
}

type Cache = Mutex<HashMap<[u64; 3], (Point, f64)>>;

/// `𝒢_ω u` as a vector field whose values are quadratures. Evaluations are cached by point;
/// a quadrature failure inside an evaluation is recorded and reported by [`GradientField::check`].
#[derive(Clone)]
pub struct GradientField {
    pub field: VectorField,
    fault: Arc<Mutex<Option<Error>>>,
    cache: Arc<Cache>,
}

impl GradientField {
    pub fn check(&self) -> Result<()> {
        match self.fault.lock().unwrap().take() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn cached_points(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

fn gradient_support(u: &Support, spec: &KernelSpec) -> Support {
    let far = spec.beta_eff().map(|b| b - 1.0).unwrap_or(0.0);
    let far = if spec.tempering() > 0.0 { f64::INFINITY } else { far };
    match (u, spec.delta) {
        (Support::Compact { center, radius }, Horizon::Finite(d)) => Support::Compact {
            center: *center,
            radius: radius + d,
        },
        (Support::Compact { .. }, Horizon::Infinite) => Support::Decay { exponent: far },
        (Support::Decay { exponent }, Horizon::Infinite) => Support::Decay {
            exponent: exponent.min(far),
        },
        (Support::Decay { exponent }, Horizon::Finite(_)) => Support::Decay { exponent: *exponent },
        (Support::Periodic { period, .. }, _) => Support::Periodic {
            period: *period,
            mean: 0.0,
        },
        (Support::Unbounded, _) => Support::Unbounded,
    }
}

pub fn weighted_gradient_field(u: &ScalarField, spec: &KernelSpec, cfg: &QuadratureConfig) -> GradientField {
    let fault: Arc<Mutex<Option<Error>>> = Arc::new(Mutex::new(None));
    let cache: Arc<Cache> = Arc::new(Mutex::new(HashMap::new()));
    let support = gradient_support(&u.support, spec);
    let components = (0..spec.n)
        .map(|i| {
            let (u, spec, cfg) = (u.clone(), spec.clone(), cfg.clone());
            let (fault, cache) = (fault.clone(), cache.clone());
            ScalarField::noisy(spec.n, &format!("G_w[{}]_{i}", u.label), support.clone(), move |y| {
                if let Some((g, e)) = cache.lock().unwrap().get(&y.key()) {
                    return (g[i], *e);
                }
                match weighted_gradient(&u, &spec, y, &cfg) {
                    Ok(g) => {
                        cache.lock().unwrap().insert(y.key(), (g.value, g.error));
                        (g.value[i], g.error)
                    }
                    Err(e) => {
                        fault.lock().unwrap().get_or_insert(e);
                        (0.0, 0.0)
                    }
                }
            })
        })
        .collect();
    GradientField {
        field: VectorField { components },
        fault,
        cache,
    }
}

/// `𝒟_ω(𝒢_ω u)(x)` by nested quadrature; the inner gradient runs at tightened tolerance.
pub fn weighted_laplacian(u: &ScalarField, spec: &KernelSpec, x: &Point, cfg: &QuadratureConfig) -> Result<Estimate> {
    let g = weighted_gradient_field(u, spec, &cfg.inner());
    let est = weighted_divergence(&g.field, spec, x, cfg);
    g.check()?;
    est
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{dns_closed_form, grad_scale};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn constants_are_annihilated() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Finite(1.0)).unwrap();
        let c = ScalarField::constant(1, 1.5);
        let x = Point::x1(0.1);
        assert_eq!(weighted_gradient(&c, &spec, &x, &cfg()).unwrap().value[0], 0.0);
        let v = VectorField::new(vec![ScalarField::constant(1, 2.0)]).unwrap();
        assert_eq!(weighted_divergence(&v, &spec, &x, &cfg()).unwrap().value, 0.0);
        assert_eq!(weighted_laplacian(&c, &spec, &x, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn even_field_has_zero_gradient_at_origin() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let g = weighted_gradient(&ScalarField::trig(1, 1.0), &spec, &Point::x1(0.0), &cfg()).unwrap();
        assert_eq!(g.value[0], 0.0);
    }

    #[test]
    fn gradient_of_cosine_matches_symbol() {
        // grad^s cos(kx) = -(2 sin(πs/2)/G_s) k^s sin(kx).
        for &(s, k) in &[(0.5, 1.0), (0.25, 2.0), (0.75, 3.0)] {
            let spec = KernelSpec::fractional(1, s, Horizon::Infinite).unwrap();
            let x = Point::x1(0.3);
            let g = weighted_gradient(&ScalarField::trig(1, k), &spec, &x, &cfg()).unwrap();
            let want = -2.0 * (std::f64::consts::PI * s / 2.0).sin() / grad_scale(s).unwrap() * k.powf(s) * (k * 0.3).sin();
            assert!((g.value[0] - want).abs() < 1e-6 * want.abs(), "s={s} k={k}: {} vs {want}", g.value[0]);
        }
    }

    #[test]
    fn primal_and_symmetric_divergence_agree() {
        let spec = KernelSpec::power_law(1, 2.2, Horizon::Finite(1.0)).unwrap();
        let v = VectorField::new(vec![ScalarField::bump(Point::x1(0.2), 0.9)]).unwrap();
        for x in [-0.4, 0.1, 0.65] {
            let x = Point::x1(x);
            let a = weighted_divergence(&v, &spec, &x, &cfg()).unwrap();
            let b = weighted_divergence_primal(&v, &spec, &x, &cfg()).unwrap();
            assert!((a.value - b.value).abs() < 1e-6 * a.value.abs().max(1e-3), "{a:?} {b:?}");
        }
    }

    #[test]
    fn nested_laplacian_of_cosine() {
        // div^s grad^s cos = (D/G²) cos for k = 1.
        let s = 0.5;
        let spec = KernelSpec::fractional(1, s, Horizon::Infinite).unwrap();
        let x = Point::x1(0.0);
        let l = weighted_laplacian(&ScalarField::trig(1, 1.0), &spec, &x, &cfg()).unwrap();
        let want = dns_closed_form(1, s).unwrap() / grad_scale(s).unwrap().powi(2);
        assert!((l.value - want).abs() < 1e-4 * want.abs(), "{l:?} vs {want}");
    }
}
