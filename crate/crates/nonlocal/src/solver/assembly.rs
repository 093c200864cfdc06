use std::collections::HashMap;
use std::sync::Mutex;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{estimate_to_moment, is_zero_field, AssemblyInfo, Basis, Flavor, Moment, Route, StiffnessSystem, VolumeConstrainedProblem};
use crate::equivalence::{equivalent_unweighted_spec, EqMode, EquivalenceKernel};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::geometry::{BoxDomain, Point, Region};
use crate::kernels::{Family, Horizon, KernelSpec};
use crate::operators::weighted_gradient;
use crate::quadrature::{adaptive, gauss_legendre, line_integral, polar_integrate, semi_infinite, Estimate, FarField, PolarOpts, QuadratureConfig};

const P0_PIECES: [[f64; 4]; 1] = [[1.0, -1.0, 0.0, 0.0]];
const P1_PIECES: [[f64; 4]; 2] = [[2.0 / 3.0, 0.0, -1.0, 0.5], [4.0 / 3.0, -2.0, 1.0, -1.0 / 6.0]];

/// `k`-th derivative of a cubic.
fn poly(c: &[f64; 4], t: f64, k: usize) -> f64 {
    match k {
        0 => ((c[3] * t + c[2]) * t + c[1]) * t + c[0],
        1 => (3.0 * c[3] * t + 2.0 * c[2]) * t + c[1],
        2 => 6.0 * c[3] * t + 2.0 * c[2],
        _ => 6.0 * c[3],
    }
}

/// Autocorrelation `Λ(t) = ∫φ(x)φ(x+t)dx` of the one-dimensional reference basis function on
/// a mesh of width `h`, as cubic pieces in `τ = |t|/h` scaled by `h`.
pub(super) struct Autocorr {
    h: f64,
    pieces: &'static [[f64; 4]],
}

impl Autocorr {
    pub(super) fn new(basis: Basis, h: f64) -> Autocorr {
        let pieces: &'static [[f64; 4]] = match basis {
            Basis::PiecewiseConstant => &P0_PIECES,
            Basis::PiecewiseLinear => &P1_PIECES,
        };
        Autocorr { h, pieces }
    }

    fn reach(&self) -> f64 {
        self.pieces.len() as f64 * self.h
    }

    pub(super) fn eval(&self, t: f64) -> f64 {
        let tau = t.abs() / self.h;
        let j = tau.floor() as usize;
        if j >= self.pieces.len() {
            0.0
        } else {
            self.h * poly(&self.pieces[j], tau, 0)
        }
    }

    /// Derivatives of `Λ` at `mh` in `t`, orders 0 to 3, from the side `dir = ±1`.
    fn one_sided(&self, m: i64, dir: i64) -> [f64; 4] {
        let s = if m > 0 || (m == 0 && dir > 0) { 1 } else { -1 };
        let tau = m.abs();
        let j = if s * dir > 0 { tau } else { tau - 1 };
        if j < 0 || j as usize >= self.pieces.len() {
            return [0.0; 4];
        }
        let c = &self.pieces[j as usize];
        let f = s as f64 / self.h;
        [0, 1, 2, 3].map(|k| self.h * poly(c, tau as f64, k) * f.powi(k as i32))
    }

    /// `2Λ(mh) - Λ(mh + r) - Λ(mh - r)` for `r ≥ 0`. Within one cell of `mh` the one-sided
    /// Taylor expansions are exact, which avoids cancellation at small `r`.
    pub(super) fn second_difference(&self, m: i64, r: f64) -> f64 {
        if r <= self.h {
            let (a, b) = (self.one_sided(m, 1), self.one_sided(m, -1));
            -((a[1] - b[1]) * r + (a[2] + b[2]) * r * r / 2.0 + (a[3] - b[3]) * r.powi(3) / 6.0)
        } else {
            let d = m as f64 * self.h;
            2.0 * self.eval(d) - self.eval(d + r) - self.eval(d - r)
        }
    }
}

type Radial<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

/// `2∫₀^∞ γ(r)[2Λ(d) - Λ(d+r) - Λ(d-r)] dr` with `d = mh`.
pub(super) fn unweighted_moment_1d(gamma: Radial, cut: Horizon, lam: &Autocorr, m: i64, knots: &[f64], cfg: &QuadratureConfig) -> Result<Estimate> {
    let h = lam.h;
    let d = m as f64 * h;
    let reach = d.abs() + lam.reach();
    let cells = (reach / h).round() as i64;
    let mut pts: Vec<f64> = (0..=cells).map(|k| k as f64 * h).collect();
    pts.extend(knots.iter().filter(|&&k| k > 0.0 && k < reach));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let core = adaptive(|r| gamma(r) * lam.second_difference(m, r), &pts, cfg.tol())?.scale(2.0);
    let l = lam.eval(d);
    if l == 0.0 {
        return Ok(core);
    }
    // Past `reach` only the constant part survives: 4Λ(d)∫γ.
    let tail = match cut {
        Horizon::Finite(c) if c <= reach => Estimate::default(),
        Horizon::Finite(c) => {
            let mut p = vec![reach];
            p.extend(knots.iter().filter(|&&k| k > reach && k < c));
            p.push(c);
            adaptive(gamma, &p, cfg.tol())?
        }
        Horizon::Infinite => semi_infinite(gamma, reach, reach, cfg.tol())?,
    };
    Ok(core.plus(tail.scale(4.0 * l)))
}

pub(super) fn reference_basis(basis: Basis, h: f64) -> ScalarField {
    match basis {
        Basis::PiecewiseLinear => ScalarField::new(1, "hat", Support::Compact { center: Point::x1(0.0), radius: h }, move |p| {
            (1.0 - p[0].abs() / h).max(0.0)
        }),
        Basis::PiecewiseConstant => ScalarField::new(
            1,
            "cell",
            Support::Compact {
                center: Point::x1(0.0),
                radius: h / 2.0,
            },
            move |p| if p[0].abs() < h / 2.0 { 1.0 } else { 0.0 },
        ),
    }
}

/// `∫ 𝒢_ω φ(x) 𝒢_ω φ(x - mh) dx` for every `m` in `ms`, with the gradient values shared.
pub(super) fn weighted_moments_1d(spec: &KernelSpec, basis: Basis, h: f64, ms: &[i64], cfg: &QuadratureConfig) -> Result<Vec<Estimate>> {
    let phi = reference_basis(basis, h);
    let inner = cfg.with_rel_tol((cfg.rel_tol * 1e-2).max(1e-12));
    let cache: Mutex<HashMap<u64, (f64, f64)>> = Mutex::new(HashMap::new());
    let g = |x: f64| -> Result<(f64, f64)> {
        if let Some(v) = cache.lock().unwrap().get(&x.to_bits()) {
            return Ok(*v);
        }
        let e = weighted_gradient(&phi, spec, &Point::x1(x), &inner)?;
        let v = (e.value[0], e.error);
        cache.lock().unwrap().insert(x.to_bits(), v);
        Ok(v)
    };
    let w = match basis {
        Basis::PiecewiseLinear => h,
        Basis::PiecewiseConstant => h / 2.0,
    };
    let kinks: Vec<f64> = match basis {
        Basis::PiecewiseLinear => vec![-h, 0.0, h],
        Basis::PiecewiseConstant => vec![-w, w],
    };
    let shifts: Vec<f64> = match spec.delta {
        Horizon::Finite(dl) => vec![0.0, -dl, dl],
        Horizon::Infinite => vec![0.0],
    };
    ms.par_iter()
        .map(|&m| {
            let d = m as f64 * h;
            let ivs: Vec<(f64, f64)> = match spec.delta {
                Horizon::Finite(dl) => {
                    let (lo, hi) = ((-w - dl).max(d - w - dl), (w + dl).min(d + w + dl));
                    if lo < hi {
                        vec![(lo, hi)]
                    } else {
                        vec![]
                    }
                }
                Horizon::Infinite => vec![(f64::NEG_INFINITY, f64::INFINITY)],
            };
            let mut knots: Vec<f64> = kinks
                .iter()
                .flat_map(|k| shifts.iter().flat_map(move |s| [k + s, k + s + d]))
                .collect();
            knots.sort_by(f64::total_cmp);
            knots.dedup();
            line_integral(
                |x| {
                    let (a, ea) = g(x)?;
                    let (b, eb) = g(x - d)?;
                    Ok(Estimate {
                        value: a * b,
                        error: a.abs() * eb + b.abs() * ea,
                        evals: 2,
                    })
                },
                &ivs,
                &knots,
                cfg,
            )
        })
        .collect()
}

/// `A_m` for piecewise constants on squares: `∫ γ(|z|)[2Λ(d) - Λ(z-d) - Λ(z+d)] dz` with
/// `Λ(t) = (h - |t₁|)₊(h - |t₂|)₊`.
pub(super) fn unweighted_moment_2d(gamma: Radial, cut: Horizon, h: f64, m: (i64, i64), cfg: &QuadratureConfig) -> Result<Estimate> {
    let lam = |z: &Point| (h - z[0].abs()).max(0.0) * (h - z[1].abs()).max(0.0);
    let c = Point::of(&[0.0, 0.0]);
    let d = Point::of(&[m.0 as f64 * h, m.1 as f64 * h]);
    if m == (0, 0) {
        let f = |z: &Point, r: f64, _d: &Point| (gamma(r) * 2.0 * (h * h - lam(z)), 0.0);
        let (region, far) = match cut {
            Horizon::Finite(dl) => (Region::ball(c, dl), FarField::Truncate(dl)),
            Horizon::Infinite => (Region::Whole, FarField::Map(h)),
        };
        let breaks = [h, h * std::f64::consts::SQRT_2];
        return polar_integrate(
            &f,
            &c,
            &PolarOpts {
                region: &region,
                far,
                singular: false,
                breaks: &breaks,
            },
            cfg,
        );
    }
    let sq = BoxDomain::new(d - Point::of(&[h, h]), d + Point::of(&[h, h]))?;
    let outer = d.norm() + 2.0 * h;
    let (region, far) = match cut {
        Horizon::Finite(dl) => (Region::Box(sq).and(Region::ball(c, dl)), FarField::Truncate(dl.min(outer))),
        Horizon::Infinite => (Region::Box(sq), FarField::Truncate(outer)),
    };
    // Off the diagonal Λ(d) = 0 and the two shifted terms contribute equally.
    let f = |z: &Point, r: f64, _d: &Point| (-2.0 * gamma(r) * lam(&(*z - d)), 0.0);
    polar_integrate(
        &f,
        &c,
        &PolarOpts {
            region: &region,
            far,
            singular: false,
            breaks: &[],
        },
        cfg,
    )
}

/// Exponent `q` with `γ(r) ~ r^q` near zero, for built-in families.
fn near_exponent(spec: &KernelSpec) -> Option<f64> {
    if spec.family == Family::Custom {
        return None;
    }
    spec.beta_eff().map(|b| spec.n as f64 + 2.0 - 2.0 * b)
}

fn check_conforming(spec: &KernelSpec, basis: Basis) -> Result<()> {
    let Some(q) = near_exponent(spec) else {
        return Ok(());
    };
    let n = spec.n as f64;
    let order = match basis {
        Basis::PiecewiseConstant => 1.0,
        Basis::PiecewiseLinear => 2.0,
    };
    if q + n + order <= 0.0 {
        return Err(Error::config(format!(
            "{basis:?} elements are not in the energy space of this kernel (gamma ~ r^{q}); use a smoother basis"
        )));
    }
    Ok(())
}

/// Uniform mesh: integer multi-indices of nodes (or cells), their positions and free flags.
struct Mesh {
    index: Vec<Vec<i64>>,
    nodes: Vec<Point>,
    free: Vec<bool>,
}

fn cells(len: f64, h: f64) -> Result<i64> {
    let n = (len / h).round();
    if n < 1.0 || ((n * h) - len).abs() > 1e-9 * len {
        return Err(Error::config(format!("mesh width {h} does not divide the domain length {len}")));
    }
    Ok(n as i64)
}

fn mesh(problem: &VolumeConstrainedProblem, collar: f64) -> Result<Mesh> {
    let om = &problem.domain.omega;
    let h = problem.h;
    let c = if collar > 0.0 { (collar / h - 1e-9).ceil() as i64 } else { 0 };
    let mut m = Mesh {
        index: vec![],
        nodes: vec![],
        free: vec![],
    };
    match (om.dim(), problem.basis) {
        (1, Basis::PiecewiseLinear) => {
            let n = cells(om.hi[0] - om.lo[0], h)?;
            for k in -c..=n + c {
                m.index.push(vec![k]);
                m.nodes.push(Point::x1(om.lo[0] + k as f64 * h));
                m.free.push(k > 0 && k < n);
            }
        }
        (1, Basis::PiecewiseConstant) => {
            let n = cells(om.hi[0] - om.lo[0], h)?;
            for k in -c..n + c {
                m.index.push(vec![k]);
                m.nodes.push(Point::x1(om.lo[0] + (k as f64 + 0.5) * h));
                m.free.push(k >= 0 && k < n);
            }
        }
        (2, Basis::PiecewiseConstant) => {
            let n0 = cells(om.hi[0] - om.lo[0], h)?;
            let n1 = cells(om.hi[1] - om.lo[1], h)?;
            for k0 in -c..n0 + c {
                for k1 in -c..n1 + c {
                    m.index.push(vec![k0, k1]);
                    m.nodes.push(Point::of(&[om.lo[0] + (k0 as f64 + 0.5) * h, om.lo[1] + (k1 as f64 + 0.5) * h]));
                    m.free.push(k0 >= 0 && k0 < n0 && k1 >= 0 && k1 < n1);
                }
            }
        }
        (2, Basis::PiecewiseLinear) => return Err(Error::config("piecewise-linear elements are one-dimensional")),
        (n, _) => return Err(Error::config(format!("the solver supports n = 1, 2 (got {n})"))),
    }
    Ok(m)
}

/// `∫_Ω f φ_i` by Gauss-Legendre on each cell of the basis support.
fn load(problem: &VolumeConstrainedProblem, node: &Point) -> f64 {
    let (x, w) = gauss_legendre(8);
    let h = problem.h;
    let f = &problem.f;
    let om = &problem.domain.omega;
    let quad = |a: f64, b: f64, weight: &dyn Fn(f64) -> f64| -> f64 {
        let (c, r) = ((a + b) / 2.0, (b - a) / 2.0);
        x.iter().zip(&w).map(|(t, wt)| wt * r * f.eval(&Point::x1(c + r * t)) * weight(c + r * t)).sum()
    };
    match (om.dim(), problem.basis) {
        (1, Basis::PiecewiseLinear) => {
            let xi = node[0];
            let hat = |y: f64| 1.0 - (y - xi).abs() / h;
            quad(xi - h, xi, &hat) + quad(xi, xi + h, &hat)
        }
        (1, _) => quad(node[0] - h / 2.0, node[0] + h / 2.0, &|_| 1.0),
        _ => {
            let r = h / 2.0;
            let mut s = 0.0;
            for (ti, wi) in x.iter().zip(&w) {
                for (tj, wj) in x.iter().zip(&w) {
                    s += wi * wj * r * r * f.eval(&Point::of(&[node[0] + r * ti, node[1] + r * tj]));
                }
            }
            s
        }
    }
}

/// The radial kernel of the unweighted form to assemble, and whether it comes from `γ_eq`.
fn form_kernel(problem: &VolumeConstrainedProblem, cfg: &QuadratureConfig) -> Result<KernelSpec> {
    let spec = &problem.spec;
    if !spec.is_radial() || !spec.is_translation_invariant() {
        return Err(Error::config("assembly needs a radial translation-invariant kernel"));
    }
    if problem.domain.flavor == Flavor::Unweighted {
        return Ok(spec.clone());
    }
    let mut ek = EquivalenceKernel::auto(spec)?;
    if ek.mode != EqMode::ClosedFormPowerLaw {
        let (lo, hi) = match spec.delta {
            Horizon::Finite(d) => (1e-3 * d.min(1.0) * problem.h.min(1.0), 2.0 * d),
            Horizon::Infinite => (1e-3 * problem.h.min(1.0), cfg.r_max),
        };
        ek = ek.with_profile(lo, hi, 32, cfg)?;
    }
    equivalent_unweighted_spec(&ek)
}

pub fn assemble(problem: &VolumeConstrainedProblem, cfg: &QuadratureConfig) -> Result<StiffnessSystem> {
    cfg.validate()?;
    let spec = &problem.spec;
    let dom = &problem.domain;
    let n = dom.omega.dim();
    if spec.n != n || problem.f.n != n || problem.g.n != n {
        return Err(Error::config("kernel, fields and domain dimensions differ"));
    }
    if spec.delta != dom.delta {
        return Err(Error::config("kernel horizon and domain horizon differ"));
    }
    let h = problem.h;
    if !(h > 0.0) {
        return Err(Error::config("mesh width must be positive"));
    }
    if let Horizon::Finite(d) = spec.delta {
        if h > d / 2.0 + 1e-12 {
            return Err(Error::config(format!("mesh too coarse: h = {h} > delta/2 = {}", d / 2.0)));
        }
    }
    check_conforming(spec, problem.basis)?;
    let direct_weighted = dom.flavor == Flavor::Weighted && problem.route == Route::Direct;
    if direct_weighted && n != 1 {
        return Err(Error::config("the direct weighted form is assembled in one dimension only; use the equivalence route"));
    }

    // Infinite horizon: the constraint is carried by a collar of width diam(Ω), and only when
    // g is not identically zero.
    let diam = dom.omega.diameter();
    let (collar, collar_info) = match dom.thickness() {
        Some(t) => (t, None),
        None if is_zero_field(&problem.g) => (0.0, None),
        None => (diam, Some(diam)),
    };
    let mesh = mesh(problem, collar)?;
    let count = mesh.nodes.len();

    // Distinct offsets up to symmetry.
    let key = |a: &[i64], b: &[i64]| -> Vec<i64> {
        let mut k: Vec<i64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
        k.sort_unstable();
        k
    };
    let mut offsets: Vec<Vec<i64>> = Vec::new();
    {
        let span: Vec<i64> = (0..n)
            .map(|ax| {
                let lo = mesh.index.iter().map(|k| k[ax]).min().unwrap();
                let hi = mesh.index.iter().map(|k| k[ax]).max().unwrap();
                hi - lo
            })
            .collect();
        if n == 1 {
            offsets.extend((0..=span[0]).map(|m| vec![m]));
        } else {
            let top = span[0].max(span[1]);
            for a in 0..=top {
                offsets.extend((a..=top).map(|b| vec![a, b]));
            }
        }
    }

    let values: Vec<Estimate> = if direct_weighted {
        let ms: Vec<i64> = offsets.iter().map(|o| o[0]).collect();
        weighted_moments_1d(spec, problem.basis, h, &ms, cfg)?
    } else {
        let form = form_kernel(problem, cfg)?;
        let gamma = |r: f64| form.gamma_r(r);
        let mut knots = vec![];
        if let Horizon::Finite(d) = spec.delta {
            knots.extend([d, 2.0 * d]);
        }
        let lam = Autocorr::new(problem.basis, h);
        offsets
            .par_iter()
            .map(|o| {
                if n == 1 {
                    unweighted_moment_1d(&gamma, form.delta, &lam, o[0], &knots, cfg)
                } else {
                    unweighted_moment_2d(&gamma, form.delta, h, (o[0], o[1]), cfg)
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    let table: HashMap<Vec<i64>, f64> = offsets.iter().cloned().zip(values.iter().map(|e| e.value)).collect();
    let moments: Vec<Moment> = offsets.into_iter().zip(values).map(|(o, e)| estimate_to_moment(o, e)).collect();

    let mut full = DMatrix::<f64>::zeros(count, count);
    for i in 0..count {
        for j in i..count {
            let v = table[&key(&mesh.index[i], &mesh.index[j])];
            full[(i, j)] = v;
            full[(j, i)] = v;
        }
    }
    let free: Vec<usize> = (0..count).filter(|&i| mesh.free[i]).collect();
    let constrained: Vec<usize> = (0..count).filter(|&i| !mesh.free[i]).collect();
    let constraint_values: Vec<f64> = constrained.iter().map(|&i| problem.g.eval(&mesh.nodes[i])).collect();
    let matrix = DMatrix::from_fn(free.len(), free.len(), |a, b| full[(free[a], free[b])]);
    let mut rhs: Vec<f64> = free.par_iter().map(|&i| load(problem, &mesh.nodes[i])).collect();
    for (a, &i) in free.iter().enumerate() {
        for (&j, &g) in constrained.iter().zip(&constraint_values) {
            rhs[a] -= full[(i, j)] * g;
        }
    }
    let kernel = match dom.flavor {
        Flavor::Unweighted => format!("{:?}", spec.family),
        Flavor::Weighted => format!("{:?} (weighted, {:?})", spec.family, problem.route),
    };
    Ok(StiffnessSystem {
        nodes: mesh.nodes,
        free,
        constrained,
        constraint_values,
        full,
        matrix,
        load: DVector::from_vec(rhs),
        moments,
        info: AssemblyInfo {
            h,
            basis: problem.basis,
            route: problem.route,
            flavor: dom.flavor,
            kernel,
            rel_tol: cfg.rel_tol,
            collar: collar_info,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_matches_direct_integral() {
        let h = 0.3;
        for basis in [Basis::PiecewiseConstant, Basis::PiecewiseLinear] {
            let lam = Autocorr::new(basis, h);
            let phi = reference_basis(basis, h);
            for &t in &[0.0, 0.07, 0.3, 0.41, 0.6] {
                let mut pts = vec![-h, -h / 2.0, 0.0, h / 2.0, h];
                pts.extend(pts.clone().iter().map(|p| p - t).filter(|p| *p > -h));
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                let direct = adaptive(
                    |x| phi.eval(&Point::x1(x)) * phi.eval(&Point::x1(x + t)),
                    &pts,
                    crate::quadrature::Tol {
                        abs: 1e-14,
                        rel: 1e-12,
                        max_evals: 100_000,
                    },
                )
                .unwrap();
                assert!((lam.eval(t) - direct.value).abs() < 1e-10, "{basis:?} t={t}");
            }
        }
    }

    #[test]
    fn second_difference_expansion_is_exact() {
        let h = 0.25;
        for basis in [Basis::PiecewiseConstant, Basis::PiecewiseLinear] {
            let lam = Autocorr::new(basis, h);
            for m in -3..=3 {
                for &r in &[0.01, 0.1, 0.2, 0.25] {
                    let d = m as f64 * h;
                    let direct = 2.0 * lam.eval(d) - lam.eval(d + r) - lam.eval(d - r);
                    assert!((lam.second_difference(m, r) - direct).abs() < 1e-14, "{basis:?} m={m} r={r}");
                }
            }
        }
    }

    #[test]
    fn constant_kernel_moment() {
        // P0, γ = 1 on r ≤ δ: A_0 = 2[∫₀ʰ 2r dr + ∫ₕ^δ 2h dr] = 2h² + 4h(δ - h).
        let (h, d) = (0.1, 0.25);
        let lam = Autocorr::new(Basis::PiecewiseConstant, h);
        let gamma = |r: f64| if r <= d { 1.0 } else { 0.0 };
        let a0 = unweighted_moment_1d(&gamma, Horizon::Finite(d), &lam, 0, &[d], &QuadratureConfig::default()).unwrap();
        assert!((a0.value - (2.0 * h * h + 4.0 * h * (d - h))).abs() < 1e-12, "{a0:?}");
        // Neighbor: -∫γ[Λ(r-h) + Λ(r+h)] over r ∈ ℝ = -2∫₀^δ (h - |r-h|)₊ dr.
        let a1 = unweighted_moment_1d(&gamma, Horizon::Finite(d), &lam, 1, &[d], &QuadratureConfig::default()).unwrap();
        assert!((a1.value + 2.0 * h * h).abs() < 1e-12, "{a1:?}");
    }
}
