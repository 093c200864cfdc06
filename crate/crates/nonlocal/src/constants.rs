//! Named constants: `Υ_{n,t}`, `C_{n,s}`, `G_s`, `D_{n,s}`, `γ̄` and the tempered factor `F`,
//! each with an independent numerical oracle.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::{Point, Region};
use crate::operators::fractional::riesz_integral;
use crate::quadrature::{
    adaptive, hemisphere_integral, mc_integrate, semi_infinite, sphere_integrate, two_center_integrate, Estimate,
    McEstimate, McRegion, QuadratureConfig, Tol,
};

/// `1/Γ(x)`, zero at the poles.
fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        0.0
    } else {
        1.0 / gamma(x)
    }
}

fn check_n(n: usize) -> Result<()> {
    if !(1..=3).contains(&n) {
        return Err(Error::domain(format!("dimension {n} outside 1..=3")));
    }
    Ok(())
}

fn check_order(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("order s = {s} outside (0,1)")));
    }
    Ok(())
}

/// `Υ_{n,t} = π^{n/2} n / (t Γ(n/2+1))`, so that `∫_{|y|≥δ} |y|^{-(n+t)} dy = Υ_{n,t} δ^{-t}`.
pub fn upsilon(n: usize, t: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    if !(t > 0.0) {
        return Err(Error::domain(format!("upsilon needs t > 0, got {t}")));
    }
    let h = n as f64 / 2.0;
    Ok(PI.powf(h) * n as f64 / (t * gamma(h + 1.0)))
}

/// `C_{n,s} = 4^s Γ(s + n/2) / (π^{n/2} |Γ(-s)|)`.
pub fn frac_laplacian_constant(n: usize, s: f64) -> Result<f64> {
    check_n(n)?;
    check_order(s)?;
    let h = n as f64 / 2.0;
    Ok(4f64.powf(s) * gamma(s + h) / (PI.powf(h) * gamma(-s).abs()))
}

/// `G_s = s / Γ(1-s)`.
pub fn grad_scale(s: f64) -> Result<f64> {
    check_order(s)?;
    Ok(s * rgamma(1.0 - s))
}

/// `H_n(p) = ∫_{|θ|=1, θ₁≥0} θ₁^p dθ = π^{(n-1)/2} Γ((p+1)/2) / Γ((p+n)/2)`.
pub fn hemisphere_closed_form(n: usize, p: f64) -> Result<f64> {
    check_n(n)?;
    if !(p > -1.0) {
        return Err(Error::domain("hemisphere moment needs p > -1"));
    }
    Ok(PI.powf((n as f64 - 1.0) / 2.0) * gamma((p + 1.0) / 2.0) * rgamma((p + n as f64) / 2.0))
}

/// `D_{n,s} = -4 sin²(πs/2) H_n(s+1)²` with the beta-function value of `H_n`.
pub fn dns_closed_form(n: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    let h = hemisphere_closed_form(n, s + 1.0)?;
    Ok(-4.0 * (PI * s / 2.0).sin().powi(2) * h * h)
}

/// `D_{n,s}` with the hemisphere integral computed by quadrature.
pub fn dns_constant(n: usize, s: f64) -> Result<f64> {
    check_n(n)?;
    check_order(s)?;
    let tol = Tol {
        abs: 1e-15,
        rel: 1e-13,
        max_evals: 1_000_000,
    };
    let h = hemisphere_integral(|t| t.powf(s + 1.0), n, tol)?.value;
    Ok(-4.0 * (PI * s / 2.0).sin().powi(2) * h * h)
}

/// `(iθ₁)^s` for real `θ₁`, principal branch.
fn i_pow(t: f64, s: f64) -> (f64, f64) {
    let m = t.abs().powf(s);
    let a = PI * s / 2.0 * t.signum();
    (m * a.cos(), m * a.sin())
}

/// The one-dimensional double sum `Σ_{θ,θ'=±1} θθ' (iθ)^s (iθ')^s` as `(re, im)`.
pub fn dns_discrete_1d(s: f64) -> (f64, f64) {
    let mut re = 0.0;
    let mut im = 0.0;
    for t in [-1.0f64, 1.0] {
        for u in [-1.0f64, 1.0] {
            let (a, b) = i_pow(t, s);
            let (c, d) = i_pow(u, s);
            re += t * u * (a * c - b * d);
            im += t * u * (a * d + b * c);
        }
    }
    (re, im)
}

/// `Σ_i (∫ θ_i (iθ·e₁)^s dθ)²` with full-sphere quadrature of each factor.
pub fn dns_factorized(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    check_order(s)?;
    let mut re = 0.0;
    let mut im = 0.0;
    for i in 0..n {
        let a = sphere_integrate(|th: &Point| th[i] * i_pow(th[0], s).0, n, cfg)?.value;
        let b = sphere_integrate(|th: &Point| th[i] * i_pow(th[0], s).1, n, cfg)?.value;
        re += a * a - b * b;
        im += 2.0 * a * b;
    }
    Ok((re, im))
}

/// Monte Carlo over `S^{n-1} × S^{n-1}` of `θ·θ' (iθ₁)^s (iθ'₁)^s`: real and imaginary parts.
pub fn dns_monte_carlo(n: usize, s: f64, samples: usize, seed: u64) -> Result<(McEstimate, McEstimate)> {
    check_n(n)?;
    check_order(s)?;
    let region = McRegion::SphereProduct { n };
    let part = |imag: bool| {
        mc_integrate(
            |p: &[Point]| {
                let (a, b) = i_pow(p[0][0], s);
                let (c, d) = i_pow(p[1][0], s);
                let w = p[0].dot(&p[1]);
                w * if imag { a * d + b * c } else { a * c - b * d }
            },
            &region,
            samples,
            seed,
        )
    };
    Ok((part(false), part(true)))
}

/// Range of `β` where the `γ̄` integral converges: `n/2 + 1 < β < n + 2`.
fn check_gamma_bar(n: usize, beta: f64) -> Result<()> {
    check_n(n)?;
    let nf = n as f64;
    if !(beta > nf / 2.0) {
        return Err(Error::domain(format!("power-law exponent {beta} must exceed n/2")));
    }
    if !(beta > nf / 2.0 + 1.0 && beta < nf + 2.0) {
        return Err(Error::quadrature(
            format!("the gamma-bar integral diverges for beta = {beta}, n = {n}; it converges for n/2+1 < beta < n+2"),
            f64::NAN,
            f64::INFINITY,
            0,
        ));
    }
    Ok(())
}

/// Closed form of `γ̄` from the Fourier transforms of the two factors:
/// `2γ̄ = -(2π)^{-n} c̃(β-2)² c(2n+2-2β)` with
/// `c(a) = π^{n/2} 2^{n-a} Γ((n-a)/2)/Γ(a/2)` and `c̃(a) = c(a)/a`.
pub fn gamma_bar_closed_form(n: usize, beta: f64) -> Result<f64> {
    check_gamma_bar(n, beta)?;
    let nf = n as f64;
    let c = |a: f64| PI.powf(nf / 2.0) * 2f64.powf(nf - a) * gamma((nf - a) / 2.0) * rgamma(a / 2.0);
    let ct = |a: f64| PI.powf(nf / 2.0) * 2f64.powf(nf - a - 1.0) * gamma((nf - a) / 2.0) * rgamma(a / 2.0 + 1.0);
    let two = -(2.0 * PI).powf(-nf) * ct(beta - 2.0).powi(2) * c(2.0 * nf + 2.0 - 2.0 * beta);
    Ok(two / 2.0)
}

fn two_center_kernel(n: usize, beta: f64, lam_r: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    let e = Point::unit(n, 0);
    let f = |z: &Point| {
        let a = e - *z;
        let (ra, rz) = (a.norm(), z.norm());
        a.dot(z) / (ra.powf(beta) * rz.powf(beta)) * (-lam_r * (ra + rz)).exp()
    };
    two_center_integrate(&f, &Point::zero(n), &e, &Region::Whole, cfg)
}

/// `γ̄` by quadrature of `½∫ (e-z)·z / (|e-z|^β |z|^β) dz`.
pub fn gamma_bar(n: usize, beta: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_gamma_bar(n, beta)?;
    Ok(two_center_kernel(n, beta, 0.0, cfg)?.scale(0.5))
}

/// `F(n,s,λr) = ∫ (e-z)·z / (|e-z|^β |z|^β) e^{-λr(|e-z|+|z|)} dz` with `β = n+1+s`.
pub fn tempered_factor(n: usize, s: f64, lam_r: f64, cfg: &QuadratureConfig) -> Result<Estimate> {
    check_n(n)?;
    check_order(s)?;
    if !(lam_r >= 0.0 && lam_r.is_finite()) {
        return Err(Error::domain("lambda*r must be finite and nonnegative"));
    }
    two_center_kernel(n, n as f64 + 1.0 + s, lam_r, cfg)
}

/// Samples of `F(n,s,λr)·e^{λr}` and their envelope.
#[derive(Clone, Debug, Serialize)]
pub struct TemperedBand {
    pub lam_r: Vec<f64>,
    pub scaled: Vec<f64>,
    pub errors: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl TemperedBand {
    /// Every sample positive and finite.
    pub fn positive(&self) -> bool {
        self.lower > 0.0 && self.upper.is_finite()
    }
}

pub fn tempered_band(n: usize, s: f64, lam_r: &[f64], cfg: &QuadratureConfig) -> Result<TemperedBand> {
    let mut scaled = Vec::with_capacity(lam_r.len());
    let mut errors = Vec::with_capacity(lam_r.len());
    for &l in lam_r {
        let f = tempered_factor(n, s, l, cfg)?;
        scaled.push(f.value * l.exp());
        errors.push(f.error * l.exp());
    }
    Ok(TemperedBand {
        lam_r: lam_r.to_vec(),
        lower: scaled.iter().cloned().fold(f64::INFINITY, f64::min),
        upper: scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        scaled,
        errors,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantReport {
    pub name: String,
    pub n: usize,
    pub s_or_beta: f64,
    pub lambda_r: f64,
    pub value: f64,
    pub oracle_value: f64,
    pub rel_discrepancy: f64,
    pub method: String,
    pub pass: bool,
}

impl ConstantReport {
    fn new(name: &str, n: usize, s_or_beta: f64, value: f64, oracle: f64, tol: f64, method: String) -> ConstantReport {
        let rel = (value - oracle).abs() / value.abs().max(f64::MIN_POSITIVE);
        ConstantReport {
            name: name.to_string(),
            n,
            s_or_beta,
            lambda_r: 0.0,
            value,
            oracle_value: oracle,
            rel_discrepancy: rel,
            method,
            pass: rel <= tol,
        }
    }
}

pub const REPORT_TOL: f64 = 1e-3;
const MC_SAMPLES: usize = 1 << 21;

/// Monte Carlo of `δ^t ∫_{|y|≥δ} |y|^{-(n+t)} dy`.
pub fn upsilon_monte_carlo(n: usize, t: f64, delta: f64, samples: usize, seed: u64) -> McEstimate {
    let region = McRegion::BallComplement {
        center: Point::zero(n),
        radius: delta,
        tail: t,
    };
    let e = mc_integrate(|p: &[Point]| p[0].norm().powf(-(n as f64 + t)), &region, samples, seed);
    McEstimate {
        value: e.value * delta.powf(t),
        std_error: e.std_error * delta.powf(t),
        samples: e.samples,
    }
}

/// `1/Γ(1-s)` through `∫_0^∞ t^{-s} e^{-t} dt`.
fn gamma_integral(a: f64) -> Result<f64> {
    let tol = Tol {
        abs: 1e-15,
        rel: 1e-12,
        max_evals: 1_000_000,
    };
    let near = adaptive(|t| t.powf(a - 1.0) * (-t).exp(), &[0.0, 0.25, 0.5, 1.0], tol)?;
    let far = semi_infinite(|t| t.powf(a - 1.0) * (-t).exp(), 1.0, 1.0, tol)?;
    Ok(near.value + far.value)
}

/// Every constant for `(n, s)` against its oracle.
pub fn constants_report(n: usize, s: f64, cfg: &QuadratureConfig) -> Result<Vec<ConstantReport>> {
    check_n(n)?;
    check_order(s)?;
    let mut rows = Vec::new();
    let seed = cfg.mc_seed;

    for (i, t) in [1.0, 2.0].into_iter().enumerate() {
        let mc = upsilon_monte_carlo(n, t, 1.0, MC_SAMPLES, seed.wrapping_add(i as u64));
        rows.push(ConstantReport::new(
            "upsilon",
            n,
            t,
            upsilon(n, t)?,
            mc.value,
            REPORT_TOL,
            format!("closed form vs Monte Carlo on the ball exterior, std error {:.3e}", mc.std_error),
        ));
    }

    let riesz = riesz_integral(&ScalarField::trig(n, 1.0), s, &Point::zero(n), cfg)?;
    let c_oracle = if n == 1 {
        1.0 / riesz.value
    } else {
        // Only the e₁ direction of cos(x₁) varies: the n-D integral factors into the
        // sphere moment of |θ₁|^{2s} and the one-dimensional Riesz integral.
        let one_d = riesz_integral(&ScalarField::trig(1, 1.0), s, &Point::zero(1), cfg)?;
        let h = hemisphere_integral(|t| t.powf(2.0 * s), n, cfg.tol())?;
        1.0 / (h.value * one_d.value)
    };
    rows.push(ConstantReport::new(
        "C",
        n,
        s,
        frac_laplacian_constant(n, s)?,
        c_oracle,
        REPORT_TOL,
        "closed form vs inverse of the PV integral of cos(x1) at the origin (symbol |k|^{2s} = 1)".into(),
    ));

    rows.push(ConstantReport::new(
        "G",
        n,
        s,
        grad_scale(s)?,
        s / gamma_integral(1.0 - s)?,
        REPORT_TOL,
        "closed form vs s over the quadratured Euler integral for Gamma(1-s)".into(),
    ));

    let d = dns_constant(n, s)?;
    let (d_oracle, how) = if n == 1 {
        (dns_discrete_1d(s).0, "hemisphere quadrature vs discrete double sum over {-1,+1}^2")
    } else {
        (dns_closed_form(n, s)?, "hemisphere quadrature (adaptive Gauss-Kronrod in the polar angle) vs beta-function closed form")
    };
    rows.push(ConstantReport::new("D", n, s, d, d_oracle, REPORT_TOL, how.into()));

    let (fr, fi) = dns_factorized(n, s, cfg)?;
    rows.push(ConstantReport::new(
        "D_sphere",
        n,
        s,
        d,
        fr,
        REPORT_TOL,
        format!(
            "factorized full-sphere quadrature ({} nodes), imaginary part {:.3e}",
            cfg.sphere_nodes, fi
        ),
    ));

    let (mre, mim) = dns_monte_carlo(n, s, MC_SAMPLES, seed.wrapping_add(7))?;
    let mut row = ConstantReport::new(
        "D_mc",
        n,
        s,
        d,
        mre.value,
        REPORT_TOL,
        format!(
            "Monte Carlo on the sphere product: real std error {:.3e}, imaginary part {:.3e} +- {:.3e}",
            mre.std_error, mim.value, mim.std_error
        ),
    );
    row.pass = ((d - mre.value).abs() <= (REPORT_TOL * d.abs()).max(4.0 * mre.std_error))
        && mim.value.abs() <= 4.0 * mim.std_error.max(1e-12);
    rows.push(row);

    let beta = n as f64 + 1.0 + s;
    let gb = gamma_bar(n, beta, cfg)?;
    let gb_closed = gamma_bar_closed_form(n, beta)?;
    rows.push(ConstantReport::new(
        "gamma_bar",
        n,
        beta,
        gb.value,
        gb_closed,
        REPORT_TOL,
        format!("two-center PV quadrature (error {:.3e}) vs Fourier closed form", gb.error),
    ));
    let cdg = -frac_laplacian_constant(n, s)? * dns_closed_form(n, s)? / grad_scale(s)?.powi(2);
    rows.push(ConstantReport::new(
        "two_gamma_bar",
        n,
        beta,
        2.0 * gb.value,
        cdg,
        REPORT_TOL,
        "quadrature vs -C*D/G^2".into(),
    ));
    let f0 = tempered_factor(n, s, 0.0, cfg)?;
    rows.push(ConstantReport::new(
        "F",
        n,
        s,
        f0.value,
        2.0 * gb_closed,
        REPORT_TOL,
        format!("tempered factor at lambda*r = 0 (error {:.3e}) vs 2*gamma_bar", f0.error),
    ));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn upsilon_values() {
        assert!((upsilon(1, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((upsilon(2, 1.0).unwrap() - 2.0 * PI).abs() < 1e-13);
        assert!((upsilon(1, 2.0).unwrap() - 1.0).abs() < 1e-14);
        assert!(upsilon(1, 0.0).is_err());
    }

    #[test]
    fn upsilon_scales_with_delta() {
        for delta in [0.5, 1.0, 2.0] {
            let mc = upsilon_monte_carlo(2, 1.0, delta, 1 << 18, 3);
            assert!((mc.value - 2.0 * PI).abs() < 4.0 * mc.std_error + 1e-3);
        }
    }

    #[test]
    fn laplacian_constant() {
        assert!((frac_laplacian_constant(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
        // Γ(3/2)·2 / (π·2√π) = 1/(2π).
        assert!((frac_laplacian_constant(2, 0.5).unwrap() - 0.5 / PI).abs() < 1e-14);
        assert!(frac_laplacian_constant(1, 1.0).is_err());
    }

    #[test]
    fn gradient_scale() {
        assert!((grad_scale(0.5).unwrap() - 0.5 / PI.sqrt()).abs() < 1e-14);
        assert!((grad_scale(0.25).unwrap() - 0.204_012_234_774_565_7).abs() < 1e-12);
        assert!(grad_scale(1e-9).unwrap() < 1e-8);
    }

    #[test]
    fn dns_values() {
        assert!((dns_constant(1, 0.5).unwrap() + 2.0).abs() < 1e-12);
        let (re, im) = dns_discrete_1d(0.5);
        assert!((re + 2.0).abs() < 1e-12 && im.abs() < 1e-12);
        for n in 1..=3 {
            for k in 1..=9 {
                let s = k as f64 / 10.0;
                let d = dns_constant(n, s).unwrap();
                assert!(d < 0.0);
                assert!((d - dns_closed_form(n, s).unwrap()).abs() < 1e-10 * d.abs());
            }
        }
    }

    #[test]
    fn dns_oracles_in_two_dimensions() {
        let d = dns_closed_form(2, 0.5).unwrap();
        let (re, im) = dns_factorized(2, 0.5, &cfg()).unwrap();
        assert!((re - d).abs() < 1e-4 * d.abs() && im.abs() < 1e-10);
        let (mre, mim) = dns_monte_carlo(2, 0.5, 1 << 18, 11).unwrap();
        assert!((mre.value - d).abs() < 4.0 * mre.std_error);
        assert!(mim.value.abs() < 4.0 * mim.std_error);
    }

    #[test]
    fn gamma_bar_fractional_case() {
        let g = gamma_bar(1, 2.5, &cfg()).unwrap();
        assert!((g.value - 4.0).abs() < 1e-5, "{g:?}");
        assert!((gamma_bar_closed_form(1, 2.5).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_bar_closed_form_matches_quadrature() {
        for &(n, beta) in &[(1, 1.75), (1, 2.25), (1, 2.9), (2, 3.5), (2, 2.5)] {
            let q = gamma_bar(n, beta, &cfg()).unwrap();
            let c = gamma_bar_closed_form(n, beta).unwrap();
            assert!((q.value - c).abs() < 1e-4 * c.abs(), "n={n} beta={beta}: {q:?} vs {c}");
        }
    }

    #[test]
    fn gamma_bar_vanishes_at_beta_two_in_one_dimension() {
        assert_eq!(gamma_bar_closed_form(1, 2.0).unwrap(), 0.0);
        assert!(gamma_bar(1, 2.0, &cfg()).unwrap().value.abs() < 1e-5);
    }

    #[test]
    fn gamma_bar_sign_and_range() {
        for k in 1..10 {
            let s = k as f64 / 10.0;
            for n in 1..=3 {
                assert!(gamma_bar_closed_form(n, n as f64 + 1.0 + s).unwrap() > 0.0);
            }
        }
        assert!(matches!(gamma_bar(1, 0.4, &cfg()), Err(Error::Domain(_))));
        assert!(matches!(gamma_bar(1, 3.0, &cfg()), Err(Error::Quadrature(_))));
        assert!(matches!(gamma_bar(1, 1.4, &cfg()), Err(Error::Quadrature(_))));
    }

    #[test]
    fn consistency_with_fractional_constants() {
        for &(n, s) in &[(1, 0.5), (1, 0.25), (2, 0.5), (3, 0.3)] {
            let cdg = -frac_laplacian_constant(n, s).unwrap() * dns_closed_form(n, s).unwrap() / grad_scale(s).unwrap().powi(2);
            let g = gamma_bar_closed_form(n, n as f64 + 1.0 + s).unwrap();
            assert!((cdg - 2.0 * g).abs() < 1e-12 * cdg, "n={n} s={s}");
        }
    }

    #[test]
    fn tempered_factor_limits() {
        let f0 = tempered_factor(1, 0.5, 0.0, &cfg()).unwrap();
        assert!((f0.value - 8.0).abs() < 1e-5);
        let f1 = tempered_factor(1, 0.5, 1.0, &cfg()).unwrap();
        let f2 = tempered_factor(1, 0.5, 2.0, &cfg()).unwrap();
        assert!(f0.value > f1.value && f1.value > f2.value);
    }

    #[test]
    fn report_passes_for_one_dimension() {
        let rows = constants_report(1, 0.5, &cfg()).unwrap();
        for r in &rows {
            assert!(r.pass, "{r:?}");
        }
        let d = rows.iter().find(|r| r.name == "D").unwrap();
        assert!((d.value + 2.0).abs() < 1e-12);
    }
}
