//! Gauss-Legendre quadrature over chart boxes and the integral identities
//! built on it: divergence-theorem fluxes, the left/right/combined Green
//! identities, their Riemannian and symplectic specializations, the
//! Dirichlet energy, and a first-variation (Euler-Lagrange) residual.
//!
//! All integrals are tensor-product Gauss-Legendre rules. Node evaluation is
//! parallelized, but the contributions are accumulated by a fixed pairwise
//! tree so results are bit-for-bit reproducible regardless of thread count.
//! Boundary integrals walk the `2n` faces of the box with outward unit
//! normals along the coordinate axes.
//!
//! Volume forms enter these integrals through their densities only. Every
//! identity below has the same orientation factor on both sides, so the
//! sign cancels and the reported numbers correspond to the positively
//! oriented representative.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{bracket, grad_left, grad_right};
use crate::domain::ChartBox;
use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::linalg::CheckedLu;
use crate::measure::{
    laplace_left, laplace_right, liouville_volume, rescale_volume, riemannian_volume, VolumeForm,
};
use crate::structure::GeometricStructure;
use crate::tolerances::TOL_BOUNDARY_SUPPORT;

/// A one-dimensional Gauss-Legendre rule on the reference interval `[-1, 1]`.
///
/// An `order`-point rule integrates polynomials up to degree `2 order - 1`
/// exactly. Nodes are stored in ascending order; all weights are positive
/// and sum to the reference interval length `2`.
#[derive(Clone, Debug)]
pub struct QuadRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadRule {
    /// Builds the `order`-point Gauss-Legendre rule by Newton iteration on
    /// the Legendre recurrence.
    pub fn gauss_legendre(order: usize) -> Result<QuadRule> {
        if order == 0 {
            return Err(Error::InvalidArgument(String::from(
                "quadrature order must be at least 1",
            )));
        }
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x =
                (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre_with_derivative(n, x);
                let step = p / dp;
                x -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Ok(QuadRule {
            order,
            nodes,
            weights,
        })
    }

    /// Number of nodes.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Nodes in ascending order on `[-1, 1]`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Positive weights summing to `2`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The rule mapped onto `[lo, hi]` as `(node, weight)` pairs.
    fn scaled_to(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| (mid + half * x, half * w))
            .collect()
    }
}

/// Legendre polynomial `P_n` and its derivative at `x`, via the three-term
/// recurrence. Requires `n >= 1`.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut value = x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * value - kf * prev) / (kf + 1.0);
        prev = value;
        value = next;
    }
    let derivative = n as f64 * (x * value - prev) / (x * x - 1.0);
    (value, derivative)
}

/// Returns the cached `order`-point rule, building it on first use.
fn rule(order: usize) -> Result<Arc<QuadRule>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<QuadRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature rule cache poisoned");
    if let Some(hit) = guard.get(&order) {
        return Ok(hit.clone());
    }
    let built = Arc::new(QuadRule::gauss_legendre(order)?);
    guard.insert(order, built.clone());
    Ok(built)
}

/// Sums by a fixed pairwise tree: deterministic and more accurate than a
/// running left-to-right sum on long node lists.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        len => {
            let mid = len / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Per-axis scaled `(node, weight)` tables for a box.
fn scaled_axes(chart: &ChartBox, order: usize) -> Result<Vec<Vec<(f64, f64)>>> {
    let rule = rule(order)?;
    Ok((0..chart.dim())
        .map(|ax| rule.scaled_to(chart.lo()[ax], chart.hi()[ax]))
        .collect())
}

fn grid_size(order: usize, axes: usize) -> Result<usize> {
    order
        .checked_pow(axes as u32)
        .ok_or_else(|| Error::InvalidArgument(String::from("quadrature grid too large")))
}

/// All tensor-product nodes of a box rule as `(point, weight)` pairs, in a
/// fixed axis-major order.
pub(crate) fn tensor_nodes(chart: &ChartBox, order: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let n = chart.dim();
    let axes = scaled_axes(chart, order)?;
    let total = grid_size(order, n)?;
    Ok((0..total)
        .map(|flat| {
            let mut rest = flat;
            let mut point = vec![0.0; n];
            let mut weight = 1.0;
            for ax in 0..n {
                let (x, w) = axes[ax][rest % order];
                point[ax] = x;
                weight *= w;
                rest /= order;
            }
            (point, weight)
        })
        .collect())
}

/// Integrates a scalar field over a box with a tensor-product
/// Gauss-Legendre rule of the given order per axis.
pub fn integrate_box(f: &ScalarField, chart: &ChartBox, order: usize) -> Result<f64> {
    let n = chart.dim();
    if f.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.dim(),
        });
    }
    let axes = scaled_axes(chart, order)?;
    let total = grid_size(order, n)?;
    let values = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut rest = flat;
            let mut point = vec![0.0; n];
            let mut weight = 1.0;
            for ax in 0..n {
                let (x, w) = axes[ax][rest % order];
                point[ax] = x;
                weight *= w;
                rest /= order;
            }
            Ok(f.eval(&point)? * weight)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&values))
}

/// Integrates the outward flux `scale * X . nu` of a vector field through
/// the boundary of a box, against the density of `mu`: the sum over the
/// `2n` faces of `int scale * rho * (+/- X^k)` with the face's
/// `(n-1)`-dimensional product rule.
pub fn integrate_boundary_flux(
    mu: &VolumeForm,
    x: &VectorField,
    scale: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<f64> {
    let n = chart.dim();
    for got in [mu.dim(), x.dim(), scale.dim()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    let axes = scaled_axes(chart, order)?;
    let face_total = grid_size(order, n - 1)?;
    let jobs = 2 * n * face_total;
    let values = (0..jobs)
        .into_par_iter()
        .map(|job| {
            let face = job / face_total;
            let axis = face / 2;
            let upper = face % 2 == 1;
            let mut rest = job % face_total;
            let mut point = vec![0.0; n];
            let mut weight = 1.0;
            for ax in 0..n {
                if ax == axis {
                    continue;
                }
                let (x_ax, w_ax) = axes[ax][rest % order];
                point[ax] = x_ax;
                weight *= w_ax;
                rest /= order;
            }
            let sign = if upper {
                point[axis] = chart.hi()[axis];
                1.0
            } else {
                point[axis] = chart.lo()[axis];
                -1.0
            };
            let integrand = scale.eval(&point)?
                * mu.density().eval(&point)?
                * x.component(axis).eval(&point)?;
            Ok(integrand * sign * weight)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&values))
}

/// Outcome of one Green-identity check: the two-sided integral totals and
/// the defect `residual = |lhs - (-bulk + boundary)|`.
#[derive(Clone, Debug, Serialize)]
pub struct GreenReport {
    pub identity: String,
    pub lhs: f64,
    pub bulk: f64,
    pub boundary: f64,
    pub residual: f64,
    pub order: usize,
    #[serde(rename = "box")]
    pub chart: ChartBox,
}

/// Checks `int F (Lap_L G) dmu = -int {F, G} dmu + bdry F (grad_L G) . nu`.
pub fn green_left(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    g: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<GreenReport> {
    let lap = laplace_left(b, mu, g)?;
    let lhs = integrate_box(&f.mul(&lap)?.mul(mu.density())?, chart, order)?;
    let bulk = integrate_box(&bracket(b, f, g)?.mul(mu.density())?, chart, order)?;
    let boundary = integrate_boundary_flux(mu, &grad_left(b, g)?, f, chart, order)?;
    Ok(GreenReport {
        identity: String::from("green-left"),
        lhs,
        bulk,
        boundary,
        residual: (lhs - (-bulk + boundary)).abs(),
        order,
        chart: chart.clone(),
    })
}

/// Checks `int F (Lap_R G) dmu = -int {G, F} dmu + bdry F (grad_R G) . nu`.
pub fn green_right(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    g: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<GreenReport> {
    let lap = laplace_right(b, mu, g)?;
    let lhs = integrate_box(&f.mul(&lap)?.mul(mu.density())?, chart, order)?;
    let bulk = integrate_box(&bracket(b, g, f)?.mul(mu.density())?, chart, order)?;
    let boundary = integrate_boundary_flux(mu, &grad_right(b, g)?, f, chart, order)?;
    Ok(GreenReport {
        identity: String::from("green-right"),
        lhs,
        bulk,
        boundary,
        residual: (lhs - (-bulk + boundary)).abs(),
        order,
        chart: chart.clone(),
    })
}

/// Checks the bulk-free combination
/// `int (F Lap_L G - G Lap_R F) dmu = bdry (F grad_L G - G grad_R F) . nu`:
/// the two bracket terms cancel, so the reported bulk is identically zero.
pub fn green_combined(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    g: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<GreenReport> {
    let lap_g = laplace_left(b, mu, g)?;
    let lap_f = laplace_right(b, mu, f)?;
    let integrand = f
        .mul(&lap_g)?
        .sub(&g.mul(&lap_f)?)?
        .mul(mu.density())?;
    let lhs = integrate_box(&integrand, chart, order)?;
    let field = grad_left(b, g)?
        .scale_field(f)?
        .add(&grad_right(b, f)?.scale_field(g)?.scale(-1.0))?;
    let one = ScalarField::constant(chart.dim(), 1.0);
    let boundary = integrate_boundary_flux(mu, &field, &one, chart, order)?;
    Ok(GreenReport {
        identity: String::from("green-combined"),
        lhs,
        bulk: 0.0,
        boundary,
        residual: (lhs - boundary).abs(),
        order,
        chart: chart.clone(),
    })
}

/// Green identity for a Riemannian metric structure, with the boundary term
/// evaluated two ways that agree algebraically: the coordinate flux
/// `F (grad G) . e_k sqrt(det g)` and the metric flux
/// `F g(grad G, nu_g)` against the induced boundary volume
/// `sqrt(det g * (g^{-1})_kk)`, where `nu_g` is the outward unit normal in
/// the metric `g`.
#[derive(Clone, Debug, Serialize)]
pub struct RiemannianGreenReport {
    pub identity: String,
    pub lhs: f64,
    pub bulk: f64,
    pub boundary_coordinate: f64,
    pub boundary_metric: f64,
    pub forms_gap: f64,
    pub residual: f64,
    pub order: usize,
    #[serde(rename = "box")]
    pub chart: ChartBox,
}

/// Checks the left Green identity against the Riemannian volume of `g`,
/// reporting the boundary term in both coordinate and metric form. The
/// residual uses the metric form.
pub fn green_riemannian(
    b: &GeometricStructure,
    g: &GeometricStructure,
    f: &ScalarField,
    h: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<RiemannianGreenReport> {
    g.require_spd("Riemannian Green metric")?;
    let mu = riemannian_volume(g)?;
    let lap = laplace_left(b, &mu, h)?;
    let lhs = integrate_box(&f.mul(&lap)?.mul(mu.density())?, chart, order)?;
    let bulk = integrate_box(&bracket(b, f, h)?.mul(mu.density())?, chart, order)?;
    let field = grad_left(b, h)?;
    let boundary_coordinate = integrate_boundary_flux(&mu, &field, f, chart, order)?;
    let boundary_metric = metric_boundary_flux(g, &field, f, chart, order)?;
    Ok(RiemannianGreenReport {
        identity: String::from("green-riemannian"),
        lhs,
        bulk,
        boundary_coordinate,
        boundary_metric,
        forms_gap: (boundary_coordinate - boundary_metric).abs(),
        residual: (lhs - (-bulk + boundary_metric)).abs(),
        order,
        chart: chart.clone(),
    })
}

/// Boundary flux in metric form: `scale * g(X, nu_g)` integrated against
/// the boundary volume `sqrt(det g * (g^{-1})_kk)` of each face, with
/// `nu_g = +/- g^{-1} e_k / sqrt((g^{-1})_kk)` the outward `g`-unit normal.
fn metric_boundary_flux(
    g: &GeometricStructure,
    x: &VectorField,
    scale: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<f64> {
    let n = chart.dim();
    let axes = scaled_axes(chart, order)?;
    let face_total = grid_size(order, n - 1)?;
    let jobs = 2 * n * face_total;
    let values = (0..jobs)
        .into_par_iter()
        .map(|job| {
            let face = job / face_total;
            let axis = face / 2;
            let upper = face % 2 == 1;
            let mut rest = job % face_total;
            let mut point = vec![0.0; n];
            let mut weight = 1.0;
            for ax in 0..n {
                if ax == axis {
                    continue;
                }
                let (x_ax, w_ax) = axes[ax][rest % order];
                point[ax] = x_ax;
                weight *= w_ax;
                rest /= order;
            }
            let sign = if upper {
                point[axis] = chart.hi()[axis];
                1.0
            } else {
                point[axis] = chart.lo()[axis];
                -1.0
            };
            let gm = g.matrix().eval(&point)?;
            let lu = CheckedLu::new(&gm, &point)?;
            let inverse = lu.inverse();
            let inv_kk = inverse[(axis, axis)];
            let normal = inverse.column(axis) * (sign / inv_kk.sqrt());
            let xv = DVector::from_vec(x.eval(&point)?);
            let metric_flux = (&gm * xv).dot(&normal);
            let face_density = (lu.determinant() * inv_kk).sqrt();
            Ok(scale.eval(&point)? * metric_flux * face_density * weight)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&values))
}

/// Both symplectic Green equalities for a conformally rescaled Liouville
/// volume `omega = factor * Lambda`:
///
/// `int {F, G} d omega = -int (F / factor) {factor, G} d omega
///                       + bdry F (X_G . nu) d omega`
/// `int {F, G} d omega = -int {F, factor} (G / factor) d omega
///                       - bdry G (X_F . nu) d omega`
///
/// where `X_H = grad_L H` is the Hamiltonian field of `H`.
#[derive(Clone, Debug, Serialize)]
pub struct SymplecticGreenReport {
    pub identity: String,
    pub lhs: f64,
    pub bulk_first: f64,
    pub boundary_first: f64,
    pub residual_first: f64,
    pub bulk_second: f64,
    pub boundary_second: f64,
    pub residual_second: f64,
    pub closedness_defect: f64,
    pub order: usize,
    #[serde(rename = "box")]
    pub chart: ChartBox,
}

/// Checks both symplectic Green equalities for the volume
/// `omega = factor * Lambda`, with `Lambda` the Liouville volume of `b`.
/// Requires a skew structure with closed coefficients and a nowhere-zero
/// `factor` on the chart.
pub fn symplectic_green(
    b: &GeometricStructure,
    factor: &ScalarField,
    f: &ScalarField,
    g: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<SymplecticGreenReport> {
    let liouville = liouville_volume(b)?;
    if !liouville.closed() {
        return Err(Error::Precondition(format!(
            "structure coefficients are not closed (max defect {:.3e}); \
             the symplectic Green identities need a closed skew structure",
            liouville.max_closedness_defect()
        )));
    }
    let defect = liouville.max_closedness_defect();
    let omega = rescale_volume(liouville.form(), factor)?;
    let rho = omega.density();
    let lhs = integrate_box(&bracket(b, f, g)?.mul(rho)?, chart, order)?;

    let bulk_first = integrate_box(
        &f.quotient(factor)?.mul(&bracket(b, factor, g)?)?.mul(rho)?,
        chart,
        order,
    )?;
    let boundary_first = integrate_boundary_flux(&omega, &grad_left(b, g)?, f, chart, order)?;
    let residual_first = (lhs - (-bulk_first + boundary_first)).abs();

    let bulk_second = integrate_box(
        &bracket(b, f, factor)?.mul(&g.quotient(factor)?)?.mul(rho)?,
        chart,
        order,
    )?;
    let boundary_second = integrate_boundary_flux(&omega, &grad_left(b, f)?, g, chart, order)?;
    let residual_second = (lhs - (-bulk_second - boundary_second)).abs();

    Ok(SymplecticGreenReport {
        identity: String::from("green-symplectic"),
        lhs,
        bulk_first,
        boundary_first,
        residual_first,
        bulk_second,
        boundary_second,
        residual_second,
        closedness_defect: defect,
        order,
        chart: chart.clone(),
    })
}

/// Dirichlet energy `E(F) = 1/2 int {F, F} dmu` over the box. For skew
/// structures `{F, F}` vanishes identically and so does the energy.
pub fn dirichlet_energy(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<f64> {
    let integrand = bracket(b, f, f)?.mul(mu.density())?;
    Ok(0.5 * integrate_box(&integrand, chart, order)?)
}

/// First-variation check of the Dirichlet energy: the centered difference
/// quotient of `E` along an interior-supported variation against the
/// analytic first variation `-int 1/2 (Lap_L + Lap_R) F * dF dmu`.
#[derive(Clone, Debug, Serialize)]
pub struct ElReport {
    pub identity: String,
    pub numeric: f64,
    pub analytic: f64,
    pub residual: f64,
    pub step: f64,
    pub order: usize,
    #[serde(rename = "box")]
    pub chart: ChartBox,
}

/// Compares `(E(F + step * dF) - E(F - step * dF)) / (2 step)` with the
/// analytic first variation. The variation must vanish on the box boundary:
/// every face quadrature node is checked against the boundary-support
/// tolerance before any energy is evaluated.
pub fn el_residual(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    variation: &ScalarField,
    chart: &ChartBox,
    order: usize,
    step: f64,
) -> Result<ElReport> {
    if step <= 0.0 || !step.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variation step must be positive and finite, got {step}"
        )));
    }
    require_interior_support(variation, chart, order)?;
    let plus = f.add(&variation.scale(step))?;
    let minus = f.sub(&variation.scale(step))?;
    let energy_plus = dirichlet_energy(b, mu, &plus, chart, order)?;
    let energy_minus = dirichlet_energy(b, mu, &minus, chart, order)?;
    let numeric = (energy_plus - energy_minus) / (2.0 * step);

    let mean_laplacian = laplace_left(b, mu, f)?
        .add(&laplace_right(b, mu, f)?)?
        .scale(0.5);
    let integrand = mean_laplacian
        .mul(variation)?
        .mul(mu.density())?
        .scale(-1.0);
    let analytic = integrate_box(&integrand, chart, order)?;
    Ok(ElReport {
        identity: String::from("euler-lagrange"),
        numeric,
        analytic,
        residual: (numeric - analytic).abs(),
        step,
        order,
        chart: chart.clone(),
    })
}

/// Rejects variations that fail to vanish at every face quadrature node.
fn require_interior_support(
    variation: &ScalarField,
    chart: &ChartBox,
    order: usize,
) -> Result<()> {
    let n = chart.dim();
    if variation.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: variation.dim(),
        });
    }
    let axes = scaled_axes(chart, order)?;
    let face_total = grid_size(order, n - 1)?;
    for face in 0..2 * n {
        let axis = face / 2;
        let upper = face % 2 == 1;
        for node in 0..face_total {
            let mut rest = node;
            let mut point = vec![0.0; n];
            for ax in 0..n {
                if ax == axis {
                    continue;
                }
                point[ax] = axes[ax][rest % order].0;
                rest /= order;
            }
            point[axis] = if upper {
                chart.hi()[axis]
            } else {
                chart.lo()[axis]
            };
            let value = variation.eval(&point)?;
            if value.abs() > TOL_BOUNDARY_SUPPORT {
                return Err(Error::Precondition(format!(
                    "variation must vanish on the chart boundary: |value| = {:.3e} at {:?}",
                    value.abs(),
                    point
                )));
            }
        }
    }
    Ok(())
}
