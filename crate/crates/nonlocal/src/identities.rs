//! Numerical checks of the nonlocal Green identities and of the weighted/unweighted energy
//! equivalence on the line. Every term is its own quadrature, and the two sides of one
//! identity never share an intermediate integral.
//!
//! Fields must be compactly supported; unbounded outer ranges are mapped onto finite ones.

use serde::Serialize;

use crate::constants::frac_laplacian_constant;
use crate::equivalence::{equivalent_unweighted_spec, EqMode, EquivalenceKernel};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::geometry::{BoxDomain, Point, Region};
use crate::kernels::{Horizon, KernelSpec};
use crate::operators::{
    fractional_laplacian, fractional_neumann, nonlocal_flux, unweighted_divergence, unweighted_gradient_field,
    unweighted_laplacian, weighted_divergence, weighted_divergence_primal, weighted_gradient, weighted_gradient_field,
};
use crate::quadrature::{adaptive, line_integral as line, polar_integrate, Estimate, FarField, PolarOpts, QuadratureConfig};

/// Multiplier on the root-sum-square of the term errors.
pub const SAFETY: f64 = 10.0;


#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    Unweighted,
    Weighted,
    FractionalDipierro,
    /// The fractional identity rebuilt from the unweighted one on the whole plane.
    Reconciliation,
    /// `(R×R) \ (E×E) = (Ω×Ω) ∪ (E×Ω) ∪ (Ω×E)` with `E` the exterior.
    SetDecomposition,
    Variational,
}

#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub name: String,
    /// `"lhs"` or `"rhs"`.
    pub side: &'static str,
    pub coefficient: f64,
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GreenReport {
    pub identity: Identity,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub terms: Vec<Term>,
}

impl GreenReport {
    /// `tolerance = SAFETY·RSS(errors)`, plus a rounding floor proportional to the summed
    /// magnitudes so that cancelling terms of size `M` are not held to better than `~ε·M`.
    fn build(identity: Identity, terms: Vec<Term>, cfg: &QuadratureConfig) -> GreenReport {
        let side = |s: &str| terms.iter().filter(|t| t.side == s).map(|t| t.coefficient * t.value).sum::<f64>();
        let (lhs, rhs) = (side("lhs"), side("rhs"));
        let rss = terms.iter().map(|t| (t.coefficient * t.error).powi(2)).sum::<f64>().sqrt();
        let mass: f64 = terms.iter().map(|t| (t.coefficient * t.value).abs()).sum();
        let tolerance = SAFETY * rss + 64.0 * f64::EPSILON * mass + cfg.abs_tol;
        let residual = (lhs - rhs).abs();
        GreenReport {
            identity,
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
            terms,
        }
    }

    pub fn evals(&self) -> usize {
        self.terms.iter().map(|t| t.evals).sum()
    }
}

fn term(name: &str, side: &'static str, coefficient: f64, e: Estimate) -> Term {
    Term {
        name: name.to_string(),
        side,
        coefficient,
        value: e.value,
        error: e.error,
        evals: e.evals,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FractionalGreen {
    pub dipierro: GreenReport,
    pub reconciliation: GreenReport,
    pub decomposition: GreenReport,
}

impl FractionalGreen {
    pub fn reports(&self) -> [&GreenReport; 3] {
        [&self.dipierro, &self.reconciliation, &self.decomposition]
    }

    pub fn pass(&self) -> bool {
        self.reports().iter().all(|r| r.pass)
    }
}

type Iv = (f64, f64);

fn meet(a: Iv, b: Iv) -> Option<Iv> {
    let iv = (a.0.max(b.0), a.1.min(b.1));
    (iv.0 < iv.1).then_some(iv)
}

fn grow(a: Iv, t: f64) -> Iv {
    (a.0 - t, a.1 + t)
}

/// The parts of `a` outside `om`.
fn outside(a: Iv, om: Iv) -> Vec<Iv> {
    let mut v = Vec::new();
    if a.0 < om.0 {
        v.push((a.0, a.1.min(om.0)));
    }
    if a.1 > om.1 {
        v.push((a.0.max(om.1), a.1));
    }
    v
}

fn support_iv(f: &ScalarField) -> Result<Option<Iv>> {
    match &f.support {
        Support::Compact { center, radius } => Ok((*radius > 0.0).then(|| (center[0] - radius, center[0] + radius))),
        _ => Err(Error::config(format!("identity checks need compactly supported fields, got {}", f.label))),
    }
}

fn setup(u: &ScalarField, v: &ScalarField, omega: &BoxDomain, n: usize) -> Result<Iv> {
    if n != 1 || u.n != 1 || v.n != 1 || omega.dim() != 1 {
        return Err(Error::config("identity checks are implemented on the line (n = 1)"));
    }
    Ok((omega.lo[0], omega.hi[0]))
}

fn reach(delta: Horizon) -> f64 {
    delta.finite().unwrap_or(f64::INFINITY)
}

/// Interval endpoints shifted by each of `shifts` in both directions.
fn knots(ivs: &[Option<Iv>], shifts: &[f64]) -> Vec<f64> {
    let mut k: Vec<f64> = ivs
        .iter()
        .flatten()
        .flat_map(|&(a, b)| shifts.iter().flat_map(move |&s| [a - s, a + s, b - s, b + s]))
        .filter(|t| t.is_finite())
        .collect();
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

fn ivs(iv: Option<Iv>) -> Vec<Iv> {
    iv.into_iter().collect()
}

type PairKernel<'a> = &'a (dyn Fn(&Point, &Point, f64) -> f64 + Sync);

/// Inner integrals `∫_{region} (u(y) - u(x))(v(y) - v(x)) k(x,y) dy` of a double integral.
struct Pair<'a> {
    u: &'a ScalarField,
    v: &'a ScalarField,
    k: PairKernel<'a>,
    cut: Horizon,
    knots: &'a [f64],
}

impl Pair<'_> {
    fn integrand(&self, x: f64, y: f64, r: f64) -> f64 {
        let (px, py) = (Point::x1(x), Point::x1(y));
        (self.u.eval(&py) - self.u.eval(&px)) * (self.v.eval(&py) - self.v.eval(&px)) * (self.k)(&px, &py, r)
    }

    fn polar(&self, x: f64, region: &Region, cfg: &QuadratureConfig) -> Result<Estimate> {
        let c = Point::x1(x);
        let f = |y: &Point, r: f64, _d: &Point| (self.integrand(x, y[0], r), 0.0);
        let far_reach = self.knots.iter().map(|t| (t - x).abs()).fold(1.0, f64::max);
        let (region, far) = match self.cut {
            Horizon::Finite(d) => (region.clone().and(Region::ball(c, d)), FarField::Truncate(d)),
            Horizon::Infinite => (region.clone(), FarField::Map(far_reach)),
        };
        let cap = reach(self.cut);
        let breaks: Vec<f64> = self.knots.iter().map(|t| (t - x).abs()).filter(|&b| b > 0.0 && b < cap).collect();
        polar_integrate(
            &f,
            &c,
            &PolarOpts {
                region: &region,
                far,
                singular: true,
                breaks: &breaks,
            },
            cfg,
        )
    }

    /// Plain adaptive rule in `y` over a bounded interval; `x` must not lie inside it.
    fn direct(&self, x: f64, iv: Iv, cfg: &QuadratureConfig) -> Result<Estimate> {
        let iv = match self.cut {
            Horizon::Finite(d) => match meet(iv, (x - d, x + d)) {
                Some(iv) => iv,
                None => return Ok(Estimate::default()),
            },
            Horizon::Infinite => iv,
        };
        let mut pts = vec![iv.0];
        pts.extend(self.knots.iter().filter(|&&t| t > iv.0 && t < iv.1));
        pts.push(iv.1);
        adaptive(|y| if y == x { 0.0 } else { self.integrand(x, y, (y - x).abs()) }, &pts, cfg.tol())
    }
}

fn mid(cfg: &QuadratureConfig) -> QuadratureConfig {
    cfg.with_rel_tol((cfg.rel_tol * 1e-2).max(1e-12))
}

fn product(a: Estimate, b: f64) -> Estimate {
    a.scale(b)
}

/// `∫_Ω -ℒu·v = ∬ 𝒢u·𝒢v + ∫_{R\Ω} 𝒟(𝒢u)·v`.
pub fn check_unweighted_green(
    u: &ScalarField,
    v: &ScalarField,
    omega: &BoxDomain,
    spec: &KernelSpec,
    cfg: &QuadratureConfig,
) -> Result<GreenReport> {
    let om = setup(u, v, omega, spec.n)?;
    let (su, sv) = (support_iv(u)?, support_iv(v)?);
    let d = reach(spec.delta);
    let inner = mid(cfg);
    let knots = knots(&[su, sv, Some(om)], &[0.0, d]);
    let ev = |x: f64| v.eval(&Point::x1(x));

    let lhs = line(
        |x| Ok(product(unweighted_laplacian(u, spec, &Point::x1(x), &inner)?, -ev(x))),
        &ivs(sv.and_then(|s| meet(s, om))),
        &knots,
        cfg,
    )?;

    let k = |x: &Point, y: &Point, r: f64| spec.gamma_at(x, y, r);
    let pair = Pair {
        u,
        v,
        k: &k,
        cut: spec.delta,
        knots: &knots,
    };
    let outer = match (su, sv) {
        (Some(a), Some(b)) => vec![grow((a.0.min(b.0), a.1.max(b.1)), d)],
        _ => vec![],
    };
    let energy = line(|x| pair.polar(x, &Region::Whole, &inner), &outer, &knots, cfg)?;

    let gu = unweighted_gradient_field(u, spec);
    let ext: Vec<Iv> = match (su, sv) {
        (Some(a), Some(b)) => outside(b, om).into_iter().filter_map(|iv| meet(iv, grow(a, d))).collect(),
        _ => vec![],
    };
    let flux = line(
        |x| Ok(product(unweighted_divergence(&gu, spec, &Point::x1(x), &inner)?, ev(x))),
        &ext,
        &knots,
        cfg,
    )?;

    Ok(GreenReport::build(
        Identity::Unweighted,
        vec![
            term("-Lu*v over Omega", "lhs", 1.0, lhs),
            term("Gu*Gv double integral", "rhs", 1.0, energy),
            term("D(Gu)*v over exterior", "rhs", 1.0, flux),
        ],
        cfg,
    ))
}

/// `∫_Ω -ℒ_ω u·v = ∫ 𝒢_ω u·𝒢_ω v + ∫_{R\Ω} 𝒟_ω𝒢_ω u·v`.
pub fn check_weighted_green(
    u: &ScalarField,
    v: &ScalarField,
    omega: &BoxDomain,
    spec: &KernelSpec,
    cfg: &QuadratureConfig,
) -> Result<GreenReport> {
    let om = setup(u, v, omega, spec.n)?;
    let (su, sv) = (support_iv(u)?, support_iv(v)?);
    let d = reach(spec.delta);
    let (inner, deep) = (mid(cfg), mid(&mid(cfg)));
    let knots = knots(&[su, sv, Some(om)], &[0.0, d, 2.0 * d]);
    let ev = |x: f64| v.eval(&Point::x1(x));

    let g = weighted_gradient_field(u, spec, &deep);
    let lhs = line(
        |x| Ok(product(weighted_divergence(&g.field, spec, &Point::x1(x), &inner)?, -ev(x))),
        &ivs(sv.and_then(|s| meet(s, om))),
        &knots,
        cfg,
    )?;
    g.check()?;

    let outer = match (su, sv) {
        (Some(a), Some(b)) => ivs(meet(grow(a, d), grow(b, d))),
        _ => vec![],
    };
    let energy = line(
        |x| {
            let p = Point::x1(x);
            let a = weighted_gradient(u, spec, &p, &inner)?;
            let b = weighted_gradient(v, spec, &p, &inner)?;
            let (a0, b0) = (a.value[0], b.value[0]);
            Ok(Estimate {
                value: a0 * b0,
                error: a0.abs() * b.error + b0.abs() * a.error,
                evals: a.evals + b.evals,
            })
        },
        &outer,
        &knots,
        cfg,
    )?;

    // A second gradient field so the exterior term shares no cached values with the left side.
    let g2 = weighted_gradient_field(u, spec, &deep);
    let ext: Vec<Iv> = match (su, sv) {
        (Some(a), Some(b)) => outside(b, om).into_iter().filter_map(|iv| meet(iv, grow(a, 2.0 * d))).collect(),
        _ => vec![],
    };
    let flux = line(
        |x| Ok(product(weighted_divergence_primal(&g2.field, spec, &Point::x1(x), &inner)?, ev(x))),
        &ext,
        &knots,
        cfg,
    )?;
    g2.check()?;

    Ok(GreenReport::build(
        Identity::Weighted,
        vec![
            term("-L_w u*v over Omega", "lhs", 1.0, lhs),
            term("G_w u*G_w v", "rhs", 1.0, energy),
            term("D_w(G_w u)*v over exterior", "rhs", 1.0, flux),
        ],
        cfg,
    ))
}

/// The fractional Green identity
/// `∫_Ω (-Δ)^s u·v + C∫_E v·𝒩_s u = (C/2)∬_{R²\E²} (u(x)-u(y))(v(x)-v(y)) K`,
/// its reconstruction `(2/C)∫_Ω (-Δ)^s u·v = ∬_{R²}(…)K - ∫_E v·𝒩[𝒢u]` from the unweighted
/// identity, and the split of `R²\E²` into three rectangles. `E = R\Ω`, `K = |x-y|^{-(1+2s)}`.
pub fn check_fractional_green(
    u: &ScalarField,
    v: &ScalarField,
    omega: &BoxDomain,
    s: f64,
    cfg: &QuadratureConfig,
) -> Result<FractionalGreen> {
    let spec = KernelSpec::fractional(1, s, Horizon::Infinite)?;
    let om = setup(u, v, omega, 1)?;
    let (su, sv) = (support_iv(u)?, support_iv(v)?);
    let c = frac_laplacian_constant(1, s)?;
    let inner = mid(cfg);
    let knots = knots(&[su, sv, Some(om)], &[0.0]);
    let ev = |x: f64| v.eval(&Point::x1(x));
    let (inf, ninf) = (f64::INFINITY, f64::NEG_INFINITY);
    let inside = Region::Box(omega.clone());
    let exterior = inside.clone().outside();
    let ext_all = [(ninf, om.0), (om.1, inf)];
    let sv_in = ivs(sv.and_then(|b| meet(b, om)));
    let sv_ext: Vec<Iv> = sv.map(|b| outside(b, om)).unwrap_or_default();

    let t1 = line(
        |x| Ok(product(fractional_laplacian(u, s, &Point::x1(x), &inner)?, ev(x))),
        &sv_in,
        &knots,
        cfg,
    )?;
    let t2 = line(
        |x| Ok(product(fractional_neumann(u, s, &Point::x1(x), omega, &inner)?, ev(x))),
        &sv_ext,
        &knots,
        cfg,
    )?;
    let flux = line(
        |x| Ok(product(nonlocal_flux(u, &spec, &Point::x1(x), omega, &inner)?, ev(x))),
        &sv_ext,
        &knots,
        cfg,
    )?;

    let p = 1.0 + 2.0 * s;
    let k = move |_x: &Point, _y: &Point, r: f64| r.powf(-p);
    let pair = Pair {
        u,
        v,
        k: &k,
        cut: Horizon::Infinite,
        knots: &knots,
    };
    let whole_in = line(|x| pair.polar(x, &Region::Whole, &inner), &[om], &knots, cfg)?;
    let whole_ext = line(|x| pair.polar(x, &Region::Whole, &inner), &ext_all, &knots, cfg)?;
    let ext_ext = line(|x| pair.polar(x, &exterior, &inner), &ext_all, &knots, cfg)?;
    let in_in = line(|x| pair.polar(x, &inside, &inner), &[om], &knots, cfg)?;
    let in_ext = line(|x| pair.polar(x, &exterior, &inner), &[om], &knots, cfg)?;
    let ext_in = line(|x| pair.polar(x, &inside, &inner), &ext_all, &knots, cfg)?;
    // The same set as the three rectangles, integrated directly: x over Ω with y
    // unrestricted, x outside with y over Ω by a plain rule in y.
    let ext_in_direct = line(|x| pair.direct(x, om, &inner), &ext_all, &knots, cfg)?;

    let dipierro = GreenReport::build(
        Identity::FractionalDipierro,
        vec![
            term("(-Lap)^s u*v over Omega", "lhs", 1.0, t1),
            term("v*N_s u over exterior", "lhs", c, t2),
            term("R2 minus E2 double integral, Omega rows", "rhs", c / 2.0, whole_in),
            term("R2 minus E2 double integral, exterior rows", "rhs", c / 2.0, ext_in_direct),
        ],
        cfg,
    );
    let reconciliation = GreenReport::build(
        Identity::Reconciliation,
        vec![
            term("(-Lap)^s u*v over Omega", "lhs", 2.0 / c, t1),
            term("R2 double integral, Omega rows", "rhs", 1.0, whole_in),
            term("R2 double integral, exterior rows", "rhs", 1.0, whole_ext),
            term("v*N[Gu] over exterior", "rhs", -1.0, flux),
        ],
        cfg,
    );
    let decomposition = GreenReport::build(
        Identity::SetDecomposition,
        vec![
            term("R2 double integral, Omega rows", "lhs", 1.0, whole_in),
            term("R2 double integral, exterior rows", "lhs", 1.0, whole_ext),
            term("E x E", "lhs", -1.0, ext_ext),
            term("Omega x Omega", "rhs", 1.0, in_in),
            term("E x Omega", "rhs", 1.0, ext_in),
            term("Omega x E", "rhs", 1.0, in_ext),
        ],
        cfg,
    );
    Ok(FractionalGreen {
        dipierro,
        reconciliation,
        decomposition,
    })
}

/// `|||u|||²`: the double integral of `|𝒢u|²` over `(Ω∪Ω_I)²`, or with `weighted` the
/// integral of `(𝒢_ω u)²` over `Ω∪Ω_I^ω`.
pub fn energy(u: &ScalarField, spec: &KernelSpec, domain: &BoxDomain, cfg: &QuadratureConfig, weighted: bool) -> Result<Estimate> {
    let om = setup(u, u, domain, spec.n)?;
    let Some(su) = support_iv(u)? else {
        return Ok(Estimate::default());
    };
    let d = reach(spec.delta);
    let inner = mid(cfg);
    if weighted {
        let knots = knots(&[Some(su), Some(om)], &[0.0, d, 2.0 * d]);
        let outer = ivs(meet(grow(om, 2.0 * d), grow(su, d)));
        return line(
            |x| {
                let g = weighted_gradient(u, spec, &Point::x1(x), &inner)?;
                let g0 = g.value[0];
                Ok(Estimate {
                    value: g0 * g0,
                    error: 2.0 * g0.abs() * g.error,
                    evals: g.evals,
                })
            },
            &outer,
            &knots,
            cfg,
        );
    }
    let big = grow(om, d);
    let knots = knots(&[Some(su), Some(om), Some(big)], &[0.0, d]);
    let region = if d.is_finite() {
        Region::Box(BoxDomain::interval(big.0, big.1)?)
    } else {
        Region::Whole
    };
    let k = |x: &Point, y: &Point, r: f64| spec.gamma_at(x, y, r);
    let pair = Pair {
        u,
        v: u,
        k: &k,
        cut: spec.delta,
        knots: &knots,
    };
    line(|x| pair.polar(x, &region, &inner), &ivs(meet(big, grow(su, d))), &knots, cfg)
}

/// `𝒜(u,v)` with the unweighted kernel `γ = γ_eq` against `𝒜_ω(u,v) = ∫ 𝒢_ω u·𝒢_ω v`,
/// for `v` vanishing outside `Ω`. The error of the tabulated `γ_eq` is charged to `𝒜`.
pub fn check_variational_equivalence(
    u: &ScalarField,
    v: &ScalarField,
    omega: &BoxDomain,
    spec: &KernelSpec,
    cfg: &QuadratureConfig,
) -> Result<GreenReport> {
    let om = setup(u, v, omega, spec.n)?;
    let (su, sv) = (support_iv(u)?, support_iv(v)?);
    if let Some(b) = sv {
        if b.0 < om.0 || b.1 > om.1 {
            return Err(Error::domain("the test field must vanish outside the domain"));
        }
    }
    let mut ek = EquivalenceKernel::auto(spec)?;
    if ek.mode == EqMode::GeneralThreeTerm {
        return Err(Error::config("variational equivalence needs a translation-invariant radial kernel"));
    }
    let d = reach(spec.delta);
    if ek.mode != EqMode::ClosedFormPowerLaw {
        let r_hi = if d.is_finite() { 2.0 * d } else { cfg.r_max };
        ek = ek.with_profile(1e-3 * d.min(1.0), r_hi, 32, cfg)?;
    }
    let profile_rel = ek.profile.as_ref().map(|p| p.rel_error()).unwrap_or(0.0);
    let eq = equivalent_unweighted_spec(&ek)?;
    let inner = mid(cfg);
    let knots = knots(&[su, sv, Some(om)], &[0.0, d, 2.0 * d]);

    let k = |x: &Point, y: &Point, r: f64| eq.gamma_at(x, y, r);
    let pair = Pair {
        u,
        v,
        k: &k,
        cut: eq.delta,
        knots: &knots,
    };
    let outer = match (su, sv) {
        (Some(_), Some(b)) => vec![grow(b, 2.0 * d)],
        _ => vec![],
    };
    let mut a = line(|x| pair.polar(x, &Region::Whole, &inner), &outer, &knots, cfg)?;
    a.error += a.value.abs() * profile_rel;

    let outer_w = match (su, sv) {
        (Some(a), Some(b)) => ivs(meet(grow(a, d), grow(b, d))),
        _ => vec![],
    };
    let aw = line(
        |x| {
            let p = Point::x1(x);
            let a = weighted_gradient(u, spec, &p, &inner)?;
            let b = weighted_gradient(v, spec, &p, &inner)?;
            let (a0, b0) = (a.value[0], b.value[0]);
            Ok(Estimate {
                value: a0 * b0,
                error: a0.abs() * b.error + b0.abs() * a.error,
                evals: a.evals + b.evals,
            })
        },
        &outer_w,
        &knots,
        cfg,
    )?;

    Ok(GreenReport::build(
        Identity::Variational,
        vec![term("A(u,v) with gamma_eq", "lhs", 1.0, a), term("A_w(u,v)", "rhs", 1.0, aw)],
        cfg,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CustomKernel;

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    fn bump(c: f64, r: f64) -> ScalarField {
        ScalarField::bump(Point::x1(c), r)
    }

    fn unit() -> BoxDomain {
        BoxDomain::interval(0.0, 1.0).unwrap()
    }

    fn show(r: &GreenReport) -> String {
        format!("{:?}: lhs {} rhs {} residual {:e} tol {:e}", r.identity, r.lhs, r.rhs, r.residual, r.tolerance)
    }

    #[test]
    fn zero_test_field_is_trivial() {
        let spec = KernelSpec::power_law(1, 2.0, Horizon::Finite(0.25)).unwrap();
        let u = bump(0.5, 0.8);
        let z = ScalarField::zero(1);
        for r in [
            check_unweighted_green(&u, &z, &unit(), &spec, &cfg()).unwrap(),
            check_weighted_green(&u, &z, &unit(), &spec, &cfg()).unwrap(),
        ] {
            assert_eq!((r.lhs, r.rhs), (0.0, 0.0));
            assert!(r.pass);
        }
    }

    #[test]
    fn unweighted_green_constant_kernel() {
        let spec = KernelSpec::custom(1, Horizon::Finite(0.25), CustomKernel::constant()).unwrap();
        let u = bump(0.5, 0.8);
        let r = check_unweighted_green(&u, &u, &unit(), &spec, &cfg()).unwrap();
        assert!(r.pass, "{}", show(&r));
        assert!(r.lhs.abs() > 1e-3);
    }

    #[test]
    fn unweighted_green_is_bilinear() {
        let spec = KernelSpec::power_law(1, 2.0, Horizon::Finite(0.25)).unwrap();
        let (u, v) = (bump(0.5, 0.8), bump(0.6, 0.75));
        let r1 = check_unweighted_green(&u, &v, &unit(), &spec, &cfg()).unwrap();
        let r2 = check_unweighted_green(&u.scaled(2.0), &v.scaled(-3.0), &unit(), &spec, &cfg()).unwrap();
        assert!(r1.pass && r2.pass, "{} / {}", show(&r1), show(&r2));
        assert!((r2.lhs + 6.0 * r1.lhs).abs() < 1e-6 * r1.lhs.abs());
        assert!((r2.rhs + 6.0 * r1.rhs).abs() < 1e-6 * r1.rhs.abs());
    }

    #[test]
    fn weighted_green_truncated_power_law() {
        let spec = KernelSpec::power_law(1, 2.0, Horizon::Finite(0.25)).unwrap();
        let r = check_weighted_green(&bump(0.5, 0.8), &bump(0.6, 0.75), &unit(), &spec, &cfg()).unwrap();
        assert!(r.pass, "{}", show(&r));
        assert!(r.terms[2].value.abs() > 1e-4, "exterior term should not vanish");
    }

    #[test]
    fn weighted_green_fractional_kernel() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let omega = BoxDomain::interval(-0.5, 0.5).unwrap();
        let r = check_weighted_green(&bump(0.0, 0.8), &bump(0.3, 0.9), &omega, &spec, &cfg()).unwrap();
        assert!(r.pass, "{}", show(&r));
    }

    #[test]
    fn fractional_green_bump_pair() {
        let omega = BoxDomain::interval(-1.0, 1.0).unwrap();
        let fg = check_fractional_green(&bump(-0.2, 1.1), &bump(0.3, 1.0), &omega, 0.4, &cfg()).unwrap();
        for r in fg.reports() {
            assert!(r.pass, "{}", show(r));
        }
    }

    #[test]
    fn variational_truncated_power_law() {
        let spec = KernelSpec::power_law(1, 2.5, Horizon::Finite(0.5)).unwrap();
        let omega = BoxDomain::interval(-1.0, 1.0).unwrap();
        let r = check_variational_equivalence(&bump(-0.1, 0.8), &bump(0.1, 0.6), &omega, &spec, &cfg()).unwrap();
        assert!(r.pass, "{}", show(&r));
    }

    #[test]
    fn variational_needs_interior_test_field() {
        let spec = KernelSpec::power_law(1, 2.5, Horizon::Finite(0.5)).unwrap();
        let r = check_variational_equivalence(&bump(0.5, 0.3), &bump(0.5, 0.8), &unit(), &spec, &cfg());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn energies_agree_for_fractional_kernel() {
        let spec = KernelSpec::fractional(1, 0.5, Horizon::Infinite).unwrap();
        let eq = equivalent_unweighted_spec(&EquivalenceKernel::auto(&spec).unwrap()).unwrap();
        let omega = BoxDomain::interval(-1.0, 1.0).unwrap();
        let u = bump(0.1, 0.7);
        let ew = energy(&u, &spec, &omega, &cfg(), true).unwrap();
        let eu = energy(&u, &eq, &omega, &cfg(), false).unwrap();
        let tol = SAFETY * (ew.error.powi(2) + eu.error.powi(2)).sqrt();
        assert!((ew.value - eu.value).abs() < tol.max(1e-9), "{ew:?} vs {eu:?}");
        let e3 = energy(&u.scaled(3.0), &spec, &omega, &cfg(), true).unwrap();
        assert!((e3.value - 9.0 * ew.value).abs() < 1e-6 * ew.value);
        assert_eq!(energy(&ScalarField::zero(1), &spec, &omega, &cfg(), true).unwrap().value, 0.0);
    }

    #[test]
    fn weighted_form_on_the_diagonal_is_the_energy() {
        let spec = KernelSpec::power_law(1, 2.5, Horizon::Finite(0.5)).unwrap();
        let omega = BoxDomain::interval(-1.0, 1.0).unwrap();
        let v = bump(0.1, 0.6);
        let r = check_variational_equivalence(&v, &v, &omega, &spec, &cfg()).unwrap();
        let e = energy(&v, &spec, &omega, &cfg(), true).unwrap();
        assert!((r.rhs - e.value).abs() < 1e-6 * e.value, "{} vs {}", r.rhs, e.value);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let spec = KernelSpec::fractional(2, 0.5, Horizon::Infinite).unwrap();
        let u = ScalarField::bump(Point::of(&[0.0, 0.0]), 0.5);
        let omega = BoxDomain::new(Point::of(&[-1.0, -1.0]), Point::of(&[1.0, 1.0])).unwrap();
        assert!(matches!(check_unweighted_green(&u, &u, &omega, &spec, &cfg()), Err(Error::Config(_))));
    }
}
