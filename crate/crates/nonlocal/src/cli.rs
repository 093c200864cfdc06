//! Job files and the subcommands behind the `nonlocal` binary. Every subcommand turns a
//! validated [`JobConfig`] into in-memory artifacts; the binary writes them.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constants::{constants_report, gamma_bar_closed_form, tempered_band};
use crate::equivalence::{EqMode, EquivalenceKernel};
use crate::error::{Error, Result};
use crate::fields::{parse_grid, ScalarField, VectorField};
use crate::geometry::{BoxDomain, Point};
use crate::identities::{
    check_fractional_green, check_unweighted_green, check_variational_equivalence, check_weighted_green, GreenReport,
};
use crate::kernels::{Family, Horizon, KernelSpec};
use crate::operators::{self, spectral_fractional_laplacian, VectorEstimate};
use crate::quadrature::{Estimate, QuadratureConfig};
use crate::solver::{
    assemble, compare_assemblies, pointwise_slope, solve, truncation_study, AssemblyInfo, Basis, DualReport, Flavor,
    NonlocalDomain, Route, StiffnessSystem, VolumeConstrainedProblem,
};

pub const COMMANDS: [&str; 6] = ["constants", "apply", "eqkernel", "green", "solve", "converge"];

/// Default band for `F(n,s,λr)·e^{λr}` in the constants table.
pub const TEMPERED_BAND: [f64; 2] = [4.0, 64.0];

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PointSpec {
    fn point(&self) -> Result<Point> {
        match self {
            PointSpec::Scalar(x) => Point::new(&[*x]),
            PointSpec::Vector(v) => Point::new(v),
        }
    }
}

/// `[a, b]` or one `[lo, hi]` pair per axis.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum BoxSpec {
    Interval([f64; 2]),
    Axes(Vec<[f64; 2]>),
}

impl BoxSpec {
    fn domain(&self) -> Result<BoxDomain> {
        let axes = match self {
            BoxSpec::Interval(iv) => vec![*iv],
            BoxSpec::Axes(a) => a.clone(),
        };
        if axes.is_empty() || axes.len() > 3 {
            return Err(Error::config("omega needs one to three axes"));
        }
        let lo: Vec<f64> = axes.iter().map(|a| a[0]).collect();
        let hi: Vec<f64> = axes.iter().map(|a| a[1]).collect();
        BoxDomain::new(Point::new(&lo)?, Point::new(&hi)?)
    }
}

/// A job file. Keys not used by the chosen subcommand are ignored; unknown keys are rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Option<String>,
    pub n: Option<usize>,
    pub s: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
    pub kernel: Option<KernelSpec>,
    pub operator: Option<String>,
    /// Field descriptor: `trig:k`, `bump:r[:c]`, `gauss-like`, `const:c`, `zero`.
    pub field: Option<String>,
    /// Second field of a Green identity.
    pub test_field: Option<String>,
    /// One descriptor per component, for divergences.
    pub vector: Option<Vec<String>>,
    /// Grid file, relative to the job file.
    pub grid_file: Option<PathBuf>,
    pub points: Option<Vec<PointSpec>>,
    pub radii: Option<Vec<f64>>,
    pub mode: Option<EqMode>,
    pub deltas: Option<Vec<f64>>,
    pub lambda_r: Option<Vec<f64>>,
    pub band: Option<[f64; 2]>,
    pub identity: Option<String>,
    pub omega: Option<BoxSpec>,
    pub flavor: Option<Flavor>,
    pub basis: Option<Basis>,
    pub route: Option<Route>,
    pub h: Option<f64>,
    pub source: Option<String>,
    pub constraint: Option<String>,
    /// Also assemble through the other route and compare (weighted, one dimension).
    pub compare_routes: Option<bool>,
    pub quadrature: Option<QuadratureConfig>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

pub fn parse_job(text: &str) -> Result<JobConfig> {
    serde_json::from_str(text).map_err(|e| Error::config(format!("job file: {e}")))
}

/// Command-line settings that override the job file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub identity: Option<String>,
    /// Directory that relative paths in the job refer to.
    pub base: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct Artifacts {
    pub command: String,
    /// `csv` or `json`.
    pub extension: &'static str,
    pub primary: Vec<u8>,
    /// Extra outputs, keyed by the suffix that replaces the primary extension.
    pub extra: Vec<(String, Vec<u8>)>,
    pub seed: u64,
    pub pass: Option<bool>,
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn fmt_point(p: &Point) -> String {
    p.coords().iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(";")
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(vec![]);
    let io = |e: csv::Error| Error::config(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::config(format!("csv: {e}")))
}

fn json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| Error::config(format!("json: {e}")))?;
    b.push(b'\n');
    Ok(b)
}

fn need<T: Clone>(v: &Option<T>, key: &str, cmd: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::config(format!("`{cmd}` needs `{key}` in the job file")))
}

fn config(job: &JobConfig, ov: &Overrides) -> Result<(QuadratureConfig, u64)> {
    let mut cfg = job.quadrature.clone().unwrap_or_default();
    if let Some(t) = ov.tol {
        cfg.rel_tol = t;
    }
    let seed = ov.seed.or(job.seed).unwrap_or(cfg.mc_seed);
    cfg.mc_seed = seed;
    cfg.validate()?;
    Ok((cfg, seed))
}

fn field(desc: &str, n: usize, ov: &Overrides, grid: &Option<PathBuf>) -> Result<ScalarField> {
    if desc == "grid" {
        let path = grid.as_ref().ok_or_else(|| Error::config("field \"grid\" needs `grid_file`"))?;
        let full = ov.base.as_deref().unwrap_or(Path::new(".")).join(path);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::config(format!("grid file {}: {e}", full.display())))?;
        let g = parse_grid(&text)?;
        if g.n != n {
            return Err(Error::config(format!("grid is {}-dimensional, job is {n}-dimensional", g.n)));
        }
        return ScalarField::from_grid(g);
    }
    ScalarField::parse(desc, n)
}

/// Runs `command` on `job`. The job's own `command`, when present, must agree.
pub fn run(command: &str, job: &JobConfig, ov: &Overrides) -> Result<Artifacts> {
    if !COMMANDS.contains(&command) {
        return Err(Error::config(format!("unknown subcommand {command:?}")));
    }
    if let Some(c) = &job.command {
        if c != command {
            return Err(Error::config(format!("job is for `{c}`, not `{command}`")));
        }
    }
    let (cfg, seed) = config(job, ov)?;
    let (extension, primary, extra, pass) = match command {
        "constants" => constants(job, &cfg)?,
        "apply" => apply(job, ov, &cfg)?,
        "eqkernel" => eqkernel(job, &cfg)?,
        "green" => green(job, ov, &cfg)?,
        "solve" => solve_job(job, &cfg)?,
        _ => converge(job, &cfg)?,
    };
    Ok(Artifacts {
        command: command.to_string(),
        extension,
        primary,
        extra,
        seed,
        pass,
    })
}

type Out = (&'static str, Vec<u8>, Vec<(String, Vec<u8>)>, Option<bool>);

fn constants(job: &JobConfig, cfg: &QuadratureConfig) -> Result<Out> {
    let n = job.n.unwrap_or(1);
    let s = job.s.unwrap_or(0.5);
    let mut rows = Vec::new();
    let mut pass = true;
    for r in constants_report(n, s, cfg)? {
        pass &= r.pass;
        rows.push(vec![
            r.name.clone(),
            r.n.to_string(),
            fmt_f64(r.s_or_beta),
            fmt_f64(r.lambda_r),
            fmt_f64(r.value),
            fmt_f64(r.oracle_value),
            fmt_f64(r.rel_discrepancy),
            r.method.clone(),
            if r.pass { "PASS" } else { "FAIL" }.into(),
        ]);
    }
    if let Some(lr) = &job.lambda_r {
        let [lo, hi] = job.band.unwrap_or(TEMPERED_BAND);
        if !(0.0 < lo && lo < hi) {
            return Err(Error::config("band must satisfy 0 < lo < hi"));
        }
        let b = tempered_band(n, s, lr, cfg)?;
        for (i, l) in b.lam_r.iter().enumerate() {
            let v = b.scaled[i];
            let ok = v >= lo && v <= hi;
            pass &= ok;
            rows.push(vec![
                "F_scaled".into(),
                n.to_string(),
                fmt_f64(s),
                fmt_f64(*l),
                fmt_f64(v),
                String::new(),
                String::new(),
                format!(
                    "two-center quadrature of F times exp(lambda r), error {:.3e}, band [{lo}, {hi}], envelope [{:.6}, {:.6}]",
                    b.errors[i], b.lower, b.upper
                ),
                if ok { "PASS" } else { "FAIL" }.into(),
            ]);
        }
    }
    let header = ["name", "n", "s_or_beta", "lambda_r", "value", "oracle", "rel_err", "method", "pass"];
    Ok(("csv", csv_bytes(&header, rows)?, vec![], Some(pass)))
}

fn vector_row(p: &Point, v: &VectorEstimate) -> Vec<String> {
    vec![fmt_point(p), fmt_point(&v.value), fmt_f64(v.error)]
}

fn scalar_row(p: &Point, e: &Estimate) -> Vec<String> {
    vec![fmt_point(p), fmt_f64(e.value), fmt_f64(e.error)]
}

fn apply(job: &JobConfig, ov: &Overrides, cfg: &QuadratureConfig) -> Result<Out> {
    let cmd = "apply";
    let op = need(&job.operator, "operator", cmd)?;
    let n = job.n.or(job.kernel.as_ref().map(|k| k.n)).unwrap_or(1);
    let header = ["point", "value", "error_estimate"];
    let s = || need(&job.s, "s", cmd);
    let kernel = || need(&job.kernel, "kernel", cmd);
    let scalar = || field(&need(&job.field, "field", cmd)?, n, ov, &job.grid_file);
    let vector = || -> Result<VectorField> {
        let descs = need(&job.vector, "vector", cmd)?;
        VectorField::new(descs.iter().map(|d| field(d, n, ov, &job.grid_file)).collect::<Result<_>>()?)
    };

    if op == "spectral_fractional_laplacian" {
        let u = scalar()?;
        let g = u.grid.as_ref().ok_or_else(|| Error::config("the spectral operator needs field \"grid\""))?;
        let out = spectral_fractional_laplacian(g, s()?)?;
        let m = g.resolution;
        let rows = out
            .samples
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let idx: Vec<usize> = if g.n == 1 { vec![i] } else { vec![i / m, i % m] };
                vec![fmt_point(&g.node(&idx)), fmt_f64(*v), String::new()]
            })
            .collect();
        return Ok(("csv", csv_bytes(&header, rows)?, vec![], None));
    }

    let points: Vec<Point> = need(&job.points, "points", cmd)?.iter().map(|p| p.point()).collect::<Result<_>>()?;
    if points.iter().any(|p| p.dim() != n) {
        return Err(Error::config(format!("evaluation points must be {n}-dimensional")));
    }
    let omega = || -> Result<BoxDomain> { need(&job.omega, "omega", cmd)?.domain() };
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let row = match op.as_str() {
            "unweighted_laplacian" => scalar_row(x, &operators::unweighted_laplacian(&scalar()?, &kernel()?, x, cfg)?),
            "weighted_gradient" => vector_row(x, &operators::weighted_gradient(&scalar()?, &kernel()?, x, cfg)?),
            "weighted_divergence" => scalar_row(x, &operators::weighted_divergence(&vector()?, &kernel()?, x, cfg)?),
            "weighted_laplacian" => scalar_row(x, &operators::weighted_laplacian(&scalar()?, &kernel()?, x, cfg)?),
            "frac_gradient" => vector_row(x, &operators::frac_gradient(&scalar()?, s()?, x, cfg)?),
            "frac_divergence" => scalar_row(x, &operators::frac_divergence(&vector()?, s()?, x, cfg)?),
            "frac_gradient_truncated" => {
                let d = need(&job.delta, "delta", cmd)?;
                vector_row(x, &operators::frac_gradient_truncated(&scalar()?, s()?, d, x, cfg)?)
            }
            "tempered_gradient" => {
                let l = need(&job.lambda, "lambda", cmd)?;
                vector_row(x, &operators::tempered_gradient(&scalar()?, s()?, l, x, cfg)?)
            }
            "directional_gradient" => vector_row(x, &operators::directional_gradient(&scalar()?, s()?, x, cfg)?),
            "fractional_laplacian" => scalar_row(x, &operators::fractional_laplacian(&scalar()?, s()?, x, cfg)?),
            "tempered_fractional_laplacian" => {
                let l = need(&job.lambda, "lambda", cmd)?;
                scalar_row(x, &operators::tempered_fractional_laplacian(&scalar()?, s()?, l, x, cfg)?)
            }
            "fractional_neumann" => scalar_row(x, &operators::fractional_neumann(&scalar()?, s()?, x, &omega()?, cfg)?),
            "nonlocal_flux" => scalar_row(x, &operators::nonlocal_flux(&scalar()?, &kernel()?, x, &omega()?, cfg)?),
            other => return Err(Error::config(format!("unknown operator {other:?}"))),
        };
        rows.push(row);
    }
    Ok(("csv", csv_bytes(&header, rows)?, vec![], None))
}

/// `2γ̄ r^{n+2-2β}` for untruncated power-law kernels.
fn closed_form_eq(spec: &KernelSpec, r: f64) -> Result<Option<f64>> {
    if !matches!(spec.family, Family::PowerLaw | Family::Fractional) || spec.delta != Horizon::Infinite {
        return Ok(None);
    }
    let beta = spec.beta_eff().ok_or_else(|| Error::config("kernel has no power-law exponent"))?;
    let n = spec.n as f64;
    Ok(Some(2.0 * gamma_bar_closed_form(spec.n, beta)? * r.powf(n + 2.0 - 2.0 * beta)))
}

fn eqkernel(job: &JobConfig, cfg: &QuadratureConfig) -> Result<Out> {
    let cmd = "eqkernel";
    let spec = need(&job.kernel, "kernel", cmd)?;
    let radii = need(&job.radii, "radii", cmd)?;
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::config("radii must be positive and finite"));
    }
    // Quadrature by default, so the closed form stays an independent check.
    let mode = match job.mode {
        Some(m) => m,
        None => match EquivalenceKernel::auto(&spec)?.mode {
            EqMode::ClosedFormPowerLaw => EqMode::TranslationInvariant,
            m => m,
        },
    };
    let ek = EquivalenceKernel::new(&spec, mode)?;
    let mut rows = Vec::new();
    for &r in &radii {
        let e = ek.radial_value(r, cfg)?;
        let (closed, rel) = match closed_form_eq(&spec, r)? {
            Some(c) => (fmt_f64(c), fmt_f64((e.value - c).abs() / c.abs().max(f64::MIN_POSITIVE))),
            None => (String::new(), String::new()),
        };
        rows.push(vec![fmt_f64(r), fmt_f64(e.value), closed, rel, fmt_f64(e.error)]);
    }
    let header = ["radius", "two_gamma_eq", "closed_form", "rel_err", "error_estimate"];
    Ok(("csv", csv_bytes(&header, rows)?, vec![], None))
}

#[derive(Serialize)]
struct GreenOut<'a> {
    identity: &'a str,
    pass: bool,
    reports: Vec<&'a GreenReport>,
}

fn green(job: &JobConfig, ov: &Overrides, cfg: &QuadratureConfig) -> Result<Out> {
    let cmd = "green";
    let identity = ov.identity.clone().or(job.identity.clone()).ok_or_else(|| Error::config("`green` needs an identity"))?;
    let n = job.n.or(job.kernel.as_ref().map(|k| k.n)).unwrap_or(1);
    let u = field(&need(&job.field, "field", cmd)?, n, ov, &job.grid_file)?;
    let v = field(&need(&job.test_field, "test_field", cmd)?, n, ov, &job.grid_file)?;
    let omega = need(&job.omega, "omega", cmd)?.domain()?;
    let kernel = || need(&job.kernel, "kernel", cmd);
    let single: GreenReport;
    let frac;
    let reports: Vec<&GreenReport> = match identity.as_str() {
        "unweighted" => {
            single = check_unweighted_green(&u, &v, &omega, &kernel()?, cfg)?;
            vec![&single]
        }
        "weighted" => {
            single = check_weighted_green(&u, &v, &omega, &kernel()?, cfg)?;
            vec![&single]
        }
        "variational" => {
            single = check_variational_equivalence(&u, &v, &omega, &kernel()?, cfg)?;
            vec![&single]
        }
        "fractional" | "fractional_dipierro" | "reconciliation" | "set_decomposition" => {
            frac = check_fractional_green(&u, &v, &omega, need(&job.s, "s", cmd)?, cfg)?;
            match identity.as_str() {
                "fractional" => frac.reports().to_vec(),
                "fractional_dipierro" => vec![&frac.dipierro],
                "reconciliation" => vec![&frac.reconciliation],
                _ => vec![&frac.decomposition],
            }
        }
        other => {
            return Err(Error::config(format!(
                "unknown identity {other:?} (unweighted, weighted, variational, fractional, fractional_dipierro, reconciliation, set_decomposition)"
            )))
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    let out = GreenOut {
        identity: &identity,
        pass,
        reports,
    };
    Ok(("json", json_bytes(&out)?, vec![], Some(pass)))
}

#[derive(Serialize)]
struct SolveReport {
    spd: bool,
    residual: f64,
    energy: f64,
    asymmetry: f64,
    free_nodes: usize,
    constrained_nodes: usize,
    max_moment_error: f64,
    info: AssemblyInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    dual: Option<DualOut>,
}

#[derive(Serialize)]
struct DualOut {
    other_route: Route,
    moments: DualReport,
    energy_other: f64,
    energy_difference: f64,
    energy_tolerance: f64,
    energy_pass: bool,
}

fn solve_job(job: &JobConfig, cfg: &QuadratureConfig) -> Result<Out> {
    let cmd = "solve";
    let spec = need(&job.kernel, "kernel", cmd)?;
    let omega = need(&job.omega, "omega", cmd)?.domain()?;
    let n = omega.dim();
    let flavor = job.flavor.unwrap_or(Flavor::Unweighted);
    let ov = Overrides::default();
    let problem = VolumeConstrainedProblem {
        domain: NonlocalDomain::new(omega, spec.delta, flavor),
        f: field(job.source.as_deref().unwrap_or("const:1"), n, &ov, &None)?,
        g: field(job.constraint.as_deref().unwrap_or("zero"), n, &ov, &None)?,
        spec,
        h: need(&job.h, "h", cmd)?,
        basis: job.basis.unwrap_or(Basis::PiecewiseLinear),
        route: job.route.unwrap_or(Route::Equivalence),
    };
    let sys = assemble(&problem, cfg)?;
    let sol = solve(&sys)?;
    let dual = if job.compare_routes.unwrap_or(false) {
        if flavor != Flavor::Weighted {
            return Err(Error::config("compare_routes applies to weighted problems"));
        }
        let other_route = match problem.route {
            Route::Direct => Route::Equivalence,
            Route::Equivalence => Route::Direct,
        };
        let other = assemble(&VolumeConstrainedProblem { route: other_route, ..problem.clone() }, cfg)?;
        let moments = compare_assemblies(&sys, &other)?;
        let energy_other = other.energy(&nalgebra::DVector::from_vec(sol.values.clone()));
        let (diff, tol) = energy_gap(&sys, &other, &sol.values);
        Some(DualOut {
            other_route,
            moments,
            energy_other,
            energy_difference: diff,
            energy_tolerance: tol,
            energy_pass: diff <= tol,
        })
    } else {
        None
    };
    let rows = sol
        .nodes
        .iter()
        .zip(&sol.values)
        .zip(&sol.free)
        .map(|((p, v), f)| vec![fmt_point(p), fmt_f64(*v), (*f as u8).to_string()])
        .collect();
    let csv = csv_bytes(&["node", "value", "free"], rows)?;
    let pass = dual.as_ref().map(|d| d.moments.pass && d.energy_pass);
    let report = SolveReport {
        spd: sol.spd,
        residual: sol.residual,
        energy: sol.energy,
        asymmetry: sys.asymmetry(),
        free_nodes: sys.free.len(),
        constrained_nodes: sys.constrained.len(),
        max_moment_error: sys.max_moment_error(),
        info: sys.info.clone(),
        dual,
    };
    Ok(("csv", csv, vec![("report.json".into(), json_bytes(&report)?)], pass))
}

/// `|uᵀ(A - B)u|` and its tolerance: each entry carries `10·√(e_a² + e_b²)`, summed with
/// weights `|u_i u_j|`, plus a rounding floor.
pub fn energy_gap(a: &StiffnessSystem, b: &StiffnessSystem, u: &[f64]) -> (f64, f64) {
    let err = |s: &StiffnessSystem| -> HashMap<Vec<i64>, f64> {
        s.moments.iter().map(|m| (m.offset.clone(), m.error)).collect()
    };
    let (ea, eb) = (err(a), err(b));
    let tol_entry: HashMap<Vec<i64>, f64> =
        ea.iter().map(|(k, e)| (k.clone(), 10.0 * e.hypot(*eb.get(k).unwrap_or(&0.0)))).collect();
    let mut diff = 0.0;
    let mut tol = 0.0;
    let mut scale = 0.0;
    let h = a.info.h;
    for i in 0..u.len() {
        for j in 0..u.len() {
            let w = u[i] * u[j];
            if w == 0.0 {
                continue;
            }
            diff += w * (a.full[(i, j)] - b.full[(i, j)]);
            scale += (w * a.full[(i, j)]).abs();
            let mut key: Vec<i64> = a.nodes[i]
                .coords()
                .iter()
                .zip(a.nodes[j].coords())
                .map(|(x, y)| ((x - y) / h).round().abs() as i64)
                .collect();
            key.sort_unstable();
            tol += w.abs() * tol_entry.get(&key).copied().unwrap_or(0.0);
        }
    }
    (diff.abs(), tol + 64.0 * f64::EPSILON * scale)
}

fn converge(job: &JobConfig, cfg: &QuadratureConfig) -> Result<Out> {
    let cmd = "converge";
    let u = ScalarField::parse(job.field.as_deref().unwrap_or("gauss-like"), 1)?;
    let s = need(&job.s, "s", cmd)?;
    let deltas = need(&job.deltas, "deltas", cmd)?;
    let points: Vec<f64> = match &job.points {
        Some(p) => p
            .iter()
            .map(|q| match q {
                PointSpec::Scalar(x) => Ok(*x),
                PointSpec::Vector(v) if v.len() == 1 => Ok(v[0]),
                _ => Err(Error::config("converge points are one-dimensional")),
            })
            .collect::<Result<_>>()?,
        None => vec![0.3],
    };
    let rows = truncation_study(&u, s, &deltas, &points, cfg)?;
    let slope = pointwise_slope(&rows);
    let pass = rows.iter().all(|r| r.l2_ok() && r.pointwise_ok());
    let out = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.delta),
                fmt_f64(r.measured_l2),
                fmt_f64(r.bound_l2),
                fmt_f64(r.measured_pointwise),
                fmt_f64(r.bound_pointwise),
                if r.l2_ok() { "PASS" } else { "FAIL" }.into(),
                if r.pointwise_ok() { "PASS" } else { "FAIL" }.into(),
            ]
        })
        .collect();
    let header = [
        "delta",
        "measured_L2",
        "bound_L2",
        "measured_pointwise",
        "bound_pointwise",
        "l2_pass",
        "pointwise_pass",
    ];
    #[derive(Serialize)]
    struct Summary {
        pointwise_slope: f64,
        expected_slope: f64,
        all_bounds_hold: bool,
    }
    let summary = Summary {
        pointwise_slope: slope,
        expected_slope: -s,
        all_bounds_hold: pass,
    };
    Ok(("csv", csv_bytes(&header, out)?, vec![("summary.json".into(), json_bytes(&summary)?)], Some(pass)))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub command: String,
    pub job_sha256: String,
    pub seed: u64,
    pub threads: usize,
    pub rel_tol_override: Option<f64>,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub outputs: Vec<ManifestEntry>,
    pub pass: Option<bool>,
}

/// `out.csv` -> `out.<suffix>`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes the primary output, the extras and `<stem>.manifest.json`, each atomically.
pub fn write_outputs(out: &Path, art: &Artifacts, job_bytes: &[u8], threads: usize, tol: Option<f64>) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, &[u8])> = vec![(out.to_path_buf(), &art.primary)];
    for (suffix, bytes) in &art.extra {
        files.push((sibling(out, suffix), bytes));
    }
    let mut versions = BTreeMap::new();
    versions.insert("nonlocal-calculus", env!("CARGO_PKG_VERSION"));
    let manifest = Manifest {
        command: art.command.clone(),
        job_sha256: sha256_hex(job_bytes),
        seed: art.seed,
        threads,
        rel_tol_override: tol,
        versions,
        outputs: files
            .iter()
            .map(|(p, b)| ManifestEntry {
                path: p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: sha256_hex(b),
            })
            .collect(),
        pass: art.pass,
    };
    let mbytes = json_bytes(&manifest)?;
    let mpath = sibling(out, "manifest.json");
    for (p, b) in &files {
        write_atomic(p, b)?;
    }
    write_atomic(&mpath, &mbytes)?;
    let mut written: Vec<PathBuf> = files.into_iter().map(|(p, _)| p).collect();
    written.push(mpath);
    Ok(written)
}

/// Exit status for an error: 1 for numerical failures, 2 for bad input.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Quadrature(_) | Error::Coercivity(_) => 1,
        Error::Config(_) | Error::Domain(_) | Error::Io(_) => 2,
    }
}
