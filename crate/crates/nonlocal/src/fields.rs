//! Scalar and vector fields: an analytic closure, a declaration of how the field behaves
//! far away, and optionally periodic grid samples for the spectral route.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Far-field behavior, which selects the quadrature strategy for unbounded integrals.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    /// Vanishes outside the ball.
    Compact { center: Point, radius: f64 },
    /// Periodic in every coordinate with the given period and cell mean.
    Periodic { period: f64, mean: f64 },
    /// `|u(x)| = O(|x|^{-exponent})`; `f64::INFINITY` for faster than any power.
    Decay { exponent: f64 },
    Unbounded,
}

impl Support {
    /// Radius beyond which the field is zero, measured from the origin.
    pub fn extent(&self) -> Option<f64> {
        match self {
            Support::Compact { center, radius } => Some(center.norm() + radius),
            _ => None,
        }
    }
}

/// Uniform samples on the torus `[0, period)^n`, row-major with the last axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicGrid {
    pub n: usize,
    pub period: f64,
    pub resolution: usize,
    pub samples: Vec<f64>,
}

impl PeriodicGrid {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.n) {
            return Err(Error::config("grid dimension must be 1 or 2"));
        }
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(Error::config("grid period must be positive"));
        }
        if self.resolution < 2 || self.resolution > 1 << 16 {
            return Err(Error::config("grid resolution must be in 2..=65536"));
        }
        let want = self.resolution.checked_pow(self.n as u32).unwrap_or(usize::MAX);
        if self.samples.len() != want {
            return Err(Error::config(format!(
                "grid has {} samples, expected {want}",
                self.samples.len()
            )));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("grid samples must be finite"));
        }
        Ok(())
    }

    pub fn node(&self, idx: &[usize]) -> Point {
        let h = self.period / self.resolution as f64;
        let c: Vec<f64> = idx.iter().map(|&i| i as f64 * h).collect();
        Point::of(&c)
    }

    pub fn sample(f: &dyn Fn(&Point) -> f64, n: usize, period: f64, resolution: usize) -> PeriodicGrid {
        let h = period / resolution as f64;
        let mut samples = Vec::with_capacity(resolution.pow(n as u32));
        if n == 1 {
            for i in 0..resolution {
                samples.push(f(&Point::x1(i as f64 * h)));
            }
        } else {
            for i in 0..resolution {
                for j in 0..resolution {
                    samples.push(f(&Point::of(&[i as f64 * h, j as f64 * h])));
                }
            }
        }
        PeriodicGrid {
            n,
            period,
            resolution,
            samples,
        }
    }

    /// Signed integer wavenumber of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let m = self.resolution as i64;
        let i = i as i64;
        if i <= m / 2 {
            i
        } else {
            i - m
        }
    }

    /// Normalized Fourier coefficients `c_k` with `u = Σ c_k e^{i k·x 2π/P}`.
    pub fn coefficients(&self) -> Vec<Complex<f64>> {
        let m = self.resolution;
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut data: Vec<Complex<f64>> = self.samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
        if self.n == 1 {
            fft.process(&mut data);
        } else {
            for row in data.chunks_mut(m) {
                fft.process(row);
            }
            let mut col = vec![Complex::new(0.0, 0.0); m];
            for j in 0..m {
                for i in 0..m {
                    col[i] = data[i * m + j];
                }
                fft.process(&mut col);
                for i in 0..m {
                    data[i * m + j] = col[i];
                }
            }
        }
        let norm = 1.0 / data.len() as f64;
        data.iter().map(|c| c * norm).collect()
    }
}

/// Trigonometric interpolant of grid samples; the Nyquist mode is split symmetrically.
#[derive(Clone, Debug)]
struct TrigInterp {
    n: usize,
    period: f64,
    modes: Vec<(i64, i64, Complex<f64>)>,
}

impl TrigInterp {
    fn new(g: &PeriodicGrid) -> TrigInterp {
        let c = g.coefficients();
        let m = g.resolution;
        let nyq = if m % 2 == 0 { Some(m as i64 / 2) } else { None };
        let mut modes = Vec::new();
        let split = |k: i64| -> Vec<(i64, f64)> {
            if Some(k) == nyq {
                vec![(k, 0.5), (-k, 0.5)]
            } else {
                vec![(k, 1.0)]
            }
        };
        if g.n == 1 {
            for (i, ci) in c.iter().enumerate() {
                if ci.norm() < 1e-15 {
                    continue;
                }
                for (k, w) in split(g.wavenumber(i)) {
                    modes.push((k, 0, ci * w));
                }
            }
        } else {
            for i in 0..m {
                for j in 0..m {
                    let ci = c[i * m + j];
                    if ci.norm() < 1e-15 {
                        continue;
                    }
                    for (k1, w1) in split(g.wavenumber(i)) {
                        for (k2, w2) in split(g.wavenumber(j)) {
                            modes.push((k1, k2, ci * (w1 * w2)));
                        }
                    }
                }
            }
        }
        TrigInterp {
            n: g.n,
            period: g.period,
            modes,
        }
    }

    fn eval(&self, p: &Point) -> f64 {
        let w = 2.0 * PI / self.period;
        let x1 = p[0];
        let x2 = if self.n == 2 { p[1] } else { 0.0 };
        self.modes
            .iter()
            .map(|&(k1, k2, c)| {
                let t = w * (k1 as f64 * x1 + k2 as f64 * x2);
                c.re * t.cos() - c.im * t.sin()
            })
            .sum()
    }
}

type EvalFn = dyn Fn(&Point) -> (f64, f64) + Send + Sync;

/// A scalar field. `eval_noisy` returns the value and an absolute error bound, which is
/// zero for analytic fields and a quadrature estimate for fields produced by operators.
#[derive(Clone)]
pub struct ScalarField {
    pub n: usize,
    pub label: String,
    pub support: Support,
    pub grid: Option<PeriodicGrid>,
    f: Arc<EvalFn>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ScalarField({}, n={}, {:?})", self.label, self.n, self.support)
    }
}

impl ScalarField {
    pub fn new<F>(n: usize, label: &str, support: Support, f: F) -> ScalarField
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        ScalarField {
            n,
            label: label.to_string(),
            support,
            grid: None,
            f: Arc::new(move |p| (f(p), 0.0)),
        }
    }

    pub fn noisy<F>(n: usize, label: &str, support: Support, f: F) -> ScalarField
    where
        F: Fn(&Point) -> (f64, f64) + Send + Sync + 'static,
    {
        ScalarField {
            n,
            label: label.to_string(),
            support,
            grid: None,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p).0
    }

    pub fn eval_noisy(&self, p: &Point) -> (f64, f64) {
        (self.f)(p)
    }

    pub fn zero(n: usize) -> ScalarField {
        ScalarField::new(n, "zero", Support::Compact { center: Point::zero(n), radius: 0.0 }, |_| 0.0)
    }

    pub fn constant(n: usize, c: f64) -> ScalarField {
        ScalarField::new(n, &format!("const:{c}"), Support::Periodic { period: 1.0, mean: c }, move |_| c)
    }

    pub fn linear(coeff: Point) -> ScalarField {
        ScalarField::new(coeff.dim(), "linear", Support::Unbounded, move |p| coeff.dot(p))
    }

    /// `cos(k x₁)`; carries grid samples on `[0, 2π)^n` when `k` is an integer.
    pub fn trig(n: usize, k: f64) -> ScalarField {
        let mut f = ScalarField::new(
            n,
            &format!("trig:{k}"),
            Support::Periodic { period: 2.0 * PI / k.abs(), mean: 0.0 },
            move |p| (k * p[0]).cos(),
        );
        if k.fract() == 0.0 && k != 0.0 && n <= 2 {
            let res = (4 * k.abs() as usize + 8).next_power_of_two().max(32);
            f.grid = Some(PeriodicGrid::sample(&|p| (k * p[0]).cos(), n, 2.0 * PI, res));
            f.support = Support::Periodic { period: 2.0 * PI, mean: 0.0 };
        }
        f
    }

    /// `Σ a_k cos(k x₁) + b_k sin(k x₁)` with integer wavenumbers and zero mean.
    pub fn trig_poly(n: usize, terms: &[(u32, f64, f64)]) -> ScalarField {
        let tt: Vec<(f64, f64, f64)> = terms.iter().map(|&(k, a, b)| (k as f64, a, b)).collect();
        let eval = move |p: &Point| -> f64 { tt.iter().map(|(k, a, b)| a * (k * p[0]).cos() + b * (k * p[0]).sin()).sum() };
        let kmax = terms.iter().map(|t| t.0).max().unwrap_or(1) as usize;
        let res = (4 * kmax + 8).next_power_of_two().max(32);
        let grid = PeriodicGrid::sample(&eval, n, 2.0 * PI, res);
        let mut f = ScalarField::new(n, "trig-poly", Support::Periodic { period: 2.0 * PI, mean: 0.0 }, eval);
        f.grid = Some(grid);
        f
    }

    /// `exp(1 - 1/(1 - |x-c|²/r²))` inside the ball, zero outside; peak value 1.
    pub fn bump(center: Point, r: f64) -> ScalarField {
        ScalarField::new(
            center.dim(),
            &format!("bump:{r}"),
            Support::Compact { center, radius: r },
            move |p| {
                let q = p.dist(&center) / r;
                if q >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - q * q)).exp()
                }
            },
        )
    }

    /// `exp(-|x|²)`.
    pub fn gauss_like(n: usize) -> ScalarField {
        ScalarField::new(n, "gauss-like", Support::Decay { exponent: f64::INFINITY }, |p| (-p.dot(p)).exp())
    }

    pub fn from_grid(grid: PeriodicGrid) -> Result<ScalarField> {
        grid.validate()?;
        let interp = TrigInterp::new(&grid);
        let mean = grid.samples.iter().sum::<f64>() / grid.samples.len() as f64;
        let mut f = ScalarField::new(
            grid.n,
            "grid",
            Support::Periodic { period: grid.period, mean },
            move |p| interp.eval(p),
        );
        f.grid = Some(grid);
        Ok(f)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        let g = self.f.clone();
        let support = match &self.support {
            Support::Periodic { period, mean } => Support::Periodic { period: *period, mean: mean * c },
            s => s.clone(),
        };
        let mut out = ScalarField::noisy(self.n, &format!("{}*{c}", self.label), support, move |p| {
            let (v, e) = g(p);
            (c * v, c.abs() * e)
        });
        out.grid = self.grid.as_ref().map(|g| PeriodicGrid {
            samples: g.samples.iter().map(|v| v * c).collect(),
            ..g.clone()
        });
        out
    }

    /// Maximum disagreement between the closure and the grid samples at grid nodes.
    pub fn grid_mismatch(&self) -> Option<f64> {
        let g = self.grid.as_ref()?;
        let m = g.resolution;
        let mut worst: f64 = 0.0;
        for (i, s) in g.samples.iter().enumerate() {
            let idx: Vec<usize> = if g.n == 1 { vec![i] } else { vec![i / m, i % m] };
            worst = worst.max((self.eval(&g.node(&idx)) - s).abs());
        }
        Some(worst)
    }

    /// Parse `trig:k`, `bump:r`, `bump:r:c`, `gauss-like`, `const:c` or `zero`.
    pub fn parse(desc: &str, n: usize) -> Result<ScalarField> {
        if !(1..=3).contains(&n) {
            return Err(Error::config(format!("field dimension {n} outside 1..=3")));
        }
        let num = |s: &str| -> Result<f64> {
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad number {s:?} in field {desc:?}")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::config(format!("non-finite number in field {desc:?}")))
            }
        };
        let parts: Vec<&str> = desc.split(':').collect();
        match parts.as_slice() {
            ["trig", k] => {
                let k = num(k)?;
                if k == 0.0 || k.abs() > 1e6 {
                    return Err(Error::config("trig wavenumber must be nonzero and at most 1e6"));
                }
                Ok(ScalarField::trig(n, k))
            }
            ["bump", r] | ["bump", r, _] => {
                let r = num(r)?;
                if !(r > 0.0) {
                    return Err(Error::config("bump radius must be positive"));
                }
                let c = if parts.len() == 3 { num(parts[2])? } else { 0.0 };
                Ok(ScalarField::bump(Point::zero(n).with(0, c), r))
            }
            ["gauss-like"] => Ok(ScalarField::gauss_like(n)),
            ["const", c] => Ok(ScalarField::constant(n, num(c)?)),
            ["zero"] => Ok(ScalarField::zero(n)),
            _ => Err(Error::config(format!("unknown field descriptor {desc:?}"))),
        }
    }
}

/// Parse a grid file: JSON `{n, period, resolution, samples}`.
pub fn parse_grid(text: &str) -> Result<PeriodicGrid> {
    let g: PeriodicGrid = serde_json::from_str(text).map_err(|e| Error::config(format!("grid file: {e}")))?;
    g.validate()?;
    Ok(g)
}

#[derive(Clone, Debug)]
pub struct VectorField {
    pub components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<VectorField> {
        let n = components.first().map(|c| c.n).unwrap_or(0);
        if components.len() != n || components.iter().any(|c| c.n != n) {
            return Err(Error::domain("vector field needs one component per dimension"));
        }
        Ok(VectorField { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval(&self, p: &Point) -> Point {
        let c: Vec<f64> = self.components.iter().map(|f| f.eval(p)).collect();
        Point::of(&c)
    }

    pub fn eval_noisy(&self, p: &Point) -> (Point, f64) {
        let mut c = [0.0; 3];
        let mut e = 0.0;
        for (i, f) in self.components.iter().enumerate() {
            let (v, n) = f.eval_noisy(p);
            c[i] = v;
            e += n * n;
        }
        (Point::of(&c[..self.dim()]), e.sqrt())
    }

    /// The common far-field class of the components.
    pub fn support(&self) -> Support {
        self.components[0].support.clone()
    }
}

type TwoPointFn = dyn Fn(&Point, &Point) -> Point + Send + Sync;

/// A function of two points, such as the unweighted gradient `𝒢u(x,y)`.
#[derive(Clone)]
pub struct TwoPointVectorField {
    pub n: usize,
    /// Behavior in `y` for fixed `x`.
    pub support: Support,
    /// For periodic fields: `m(x)` such that `(ν(x,y) + ν(y,x))·α(x,y)` averages to
    /// `m(x)γ(x,y)` far from `x`.
    pub far_mean: Option<Arc<dyn Fn(&Point) -> f64 + Send + Sync>>,
    f: Arc<TwoPointFn>,
}

impl TwoPointVectorField {
    pub fn new<F>(n: usize, support: Support, f: F) -> TwoPointVectorField
    where
        F: Fn(&Point, &Point) -> Point + Send + Sync + 'static,
    {
        TwoPointVectorField {
            n,
            support,
            far_mean: None,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Point {
        (self.f)(x, y)
    }
}
