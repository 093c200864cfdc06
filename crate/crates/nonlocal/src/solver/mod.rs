//! Galerkin discretization of volume-constrained nonlocal Poisson problems on uniform meshes
//! of boxes, and truncation studies for the fractional gradient.
//!
//! Stiffness matrices of translation-invariant kernels are Toeplitz: every entry is a
//! kernel moment of the offset between two basis functions. Unweighted forms integrate the
//! kernel against a second difference of the basis autocorrelation; the weighted form in one
//! dimension correlates `𝒢_ω` of the reference basis function with its shifts.

mod assembly;
mod truncation;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{ScalarField, Support};
use crate::geometry::{BoxDomain, Point, Region};
use crate::kernels::{Horizon, KernelSpec};
use crate::quadrature::Estimate;

pub use assembly::assemble;
pub use truncation::{pointwise_slope, truncation_study, TruncationRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Unweighted,
    Weighted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    PiecewiseConstant,
    PiecewiseLinear,
}

/// How the bilinear form of a weighted problem is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// `∫ 𝒢_ω u·𝒢_ω v` (one dimension only).
    Direct,
    /// The unweighted form with `γ = γ_eq`.
    Equivalence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NonlocalDomain {
    pub omega: BoxDomain,
    pub delta: Horizon,
    pub flavor: Flavor,
    pub interaction: Region,
}

impl NonlocalDomain {
    pub fn new(omega: BoxDomain, delta: Horizon, flavor: Flavor) -> NonlocalDomain {
        let interaction = interaction_domain(&omega, delta, flavor);
        NonlocalDomain {
            omega,
            delta,
            flavor,
            interaction,
        }
    }

    /// Collar thickness: `δ` (unweighted) or `2δ` (weighted); `None` for an infinite horizon.
    pub fn thickness(&self) -> Option<f64> {
        thickness(self.delta, self.flavor)
    }
}

fn thickness(delta: Horizon, flavor: Flavor) -> Option<f64> {
    delta.finite().map(|d| match flavor {
        Flavor::Unweighted => d,
        Flavor::Weighted => 2.0 * d,
    })
}

/// `Ω_δ \ Ω` or `Ω_{2δ} \ Ω`; the whole exterior for an infinite horizon.
pub fn interaction_domain(omega: &BoxDomain, delta: Horizon, flavor: Flavor) -> Region {
    let outside = Region::Box(omega.clone()).outside();
    match thickness(delta, flavor) {
        Some(t) => Region::Box(omega.inflate(t)).and(outside),
        None => outside,
    }
}

#[derive(Clone, Debug)]
pub struct VolumeConstrainedProblem {
    pub domain: NonlocalDomain,
    pub spec: KernelSpec,
    /// Source on `Ω`.
    pub f: ScalarField,
    /// Constraint values on the interaction domain, imposed at collar nodes.
    pub g: ScalarField,
    pub h: f64,
    pub basis: Basis,
    pub route: Route,
}

/// One Toeplitz entry: the form evaluated on two basis functions `offset` cells apart.
#[derive(Clone, Debug, Serialize)]
pub struct Moment {
    pub offset: Vec<i64>,
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssemblyInfo {
    pub h: f64,
    pub basis: Basis,
    pub route: Route,
    pub flavor: Flavor,
    pub kernel: String,
    pub rel_tol: f64,
    /// Outer radius of the collar mesh for an infinite horizon, when a collar is meshed.
    pub collar: Option<f64>,
}

/// The assembled system over all mesh nodes; `matrix` and `load` are the free block.
#[derive(Clone, Debug)]
pub struct StiffnessSystem {
    pub nodes: Vec<Point>,
    pub free: Vec<usize>,
    pub constrained: Vec<usize>,
    /// `g` at the constrained nodes.
    pub constraint_values: Vec<f64>,
    pub full: DMatrix<f64>,
    pub matrix: DMatrix<f64>,
    pub load: DVector<f64>,
    pub moments: Vec<Moment>,
    pub info: AssemblyInfo,
}

impl StiffnessSystem {
    /// `‖A - Aᵀ‖_F / ‖A‖_F` of the free block.
    pub fn asymmetry(&self) -> f64 {
        let a = &self.matrix;
        (a - a.transpose()).norm() / a.norm().max(f64::MIN_POSITIVE)
    }

    /// `𝒜(u_h, u_h)` for nodal values on all nodes.
    pub fn energy(&self, values: &DVector<f64>) -> f64 {
        values.dot(&(&self.full * values))
    }

    pub fn max_moment_error(&self) -> f64 {
        self.moments.iter().map(|m| m.error).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Solution {
    pub nodes: Vec<Point>,
    pub values: Vec<f64>,
    pub free: Vec<bool>,
    /// `‖A u - b‖ / ‖b‖` on the free block.
    pub residual: f64,
    pub energy: f64,
    pub spd: bool,
}

/// Cholesky solve of the free block. Failure of the factorization means the discrete form
/// is not coercive.
pub fn solve(system: &StiffnessSystem) -> Result<Solution> {
    let n = system.nodes.len();
    let mut values = vec![0.0; n];
    for (&i, &g) in system.constrained.iter().zip(&system.constraint_values) {
        values[i] = g;
    }
    let mut residual = 0.0;
    if !system.free.is_empty() {
        let chol = system.matrix.clone().cholesky().ok_or_else(|| {
            Error::Coercivity("stiffness matrix is not positive definite; the kernel may not be singular enough".into())
        })?;
        let u = chol.solve(&system.load);
        let r = &system.matrix * &u - &system.load;
        let bn = system.load.norm();
        residual = if bn > 0.0 { r.norm() / bn } else { r.norm() };
        for (k, &i) in system.free.iter().enumerate() {
            values[i] = u[k];
        }
    }
    let mut free = vec![false; n];
    for &i in &system.free {
        free[i] = true;
    }
    let all = DVector::from_vec(values.clone());
    Ok(Solution {
        nodes: system.nodes.clone(),
        energy: system.energy(&all),
        values,
        free,
        residual,
        spd: true,
    })
}

pub(crate) fn is_zero_field(f: &ScalarField) -> bool {
    matches!(f.support, Support::Compact { radius, .. } if radius == 0.0)
}

/// Agreement of two assemblies of the same problem, entry by entry.
#[derive(Clone, Debug, Serialize)]
pub struct DualReport {
    pub max_difference: f64,
    /// Largest `|A - B| / tolerance` over entries.
    pub worst_ratio: f64,
    pub pass: bool,
}

/// Compares Toeplitz moments: tolerance per entry `10·√(e_a² + e_b²)` plus a rounding floor.
pub fn compare_assemblies(a: &StiffnessSystem, b: &StiffnessSystem) -> Result<DualReport> {
    if a.moments.len() != b.moments.len() || a.nodes.len() != b.nodes.len() {
        return Err(Error::config("assemblies are on different meshes"));
    }
    let mut max_difference: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for (x, y) in a.moments.iter().zip(&b.moments) {
        if x.offset != y.offset {
            return Err(Error::config("assemblies list different offsets"));
        }
        let diff = (x.value - y.value).abs();
        let tol = 10.0 * x.error.hypot(y.error) + 64.0 * f64::EPSILON * x.value.abs().max(y.value.abs());
        max_difference = max_difference.max(diff);
        worst_ratio = worst_ratio.max(if tol > 0.0 { diff / tol } else if diff > 0.0 { f64::INFINITY } else { 0.0 });
    }
    Ok(DualReport {
        max_difference,
        worst_ratio,
        pass: worst_ratio <= 1.0,
    })
}

pub(crate) fn estimate_to_moment(offset: Vec<i64>, e: Estimate) -> Moment {
    Moment {
        offset,
        value: e.value,
        error: e.error,
        evals: e.evals,
    }
}
