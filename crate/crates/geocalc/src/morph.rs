//! Pullbacks and pushforwards under chart maps, geometromorphism
//! verification, and the naturality checks for gradients, brackets,
//! divergences, and Laplacians.
//!
//! Every check reports an entrywise max residual over the supplied
//! points (∞-norm) with the point where it was attained, plus a
//! per-identity breakdown. Inverse maps are never computed: a check that
//! needs `Φ⁻¹` fails fast unless the map declares one.

use std::sync::Arc;

use serde::Serialize;

use crate::calculus::{bracket, bracket_skew, bracket_sym, Chirality};
use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::fields::{DiffeoMap, FieldKernel, JetOrder, ScalarField, VectorField};
use crate::linalg::CheckedLu;
use crate::measure::{divergence, laplacian, VolumeForm};
use crate::structure::{matrix_field_from_op, GeometricStructure};
use crate::tolerances::TOL_DIFFERENTIAL;

/// Max residual of one verified identity.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityResidual {
    pub identity: String,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
}

/// Outcome of a naturality or structure-preservation check.
#[derive(Clone, Debug, Serialize)]
pub struct MorphReport {
    pub pass: bool,
    pub tol: f64,
    pub probe_count: usize,
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub breakdown: Vec<IdentityResidual>,
}

impl MorphReport {
    fn from_breakdown(
        breakdown: Vec<IdentityResidual>,
        tol: f64,
        probe_count: usize,
    ) -> MorphReport {
        let worst = breakdown
            .iter()
            .max_by(|a, b| a.max_residual.total_cmp(&b.max_residual));
        let (max_residual, worst_point) = worst
            .map(|r| (r.max_residual, r.worst_point.clone()))
            .unwrap_or((0.0, Vec::new()));
        MorphReport {
            pass: max_residual < tol,
            tol,
            probe_count,
            max_residual,
            worst_point,
            breakdown,
        }
    }
}

/// Max of `|f(p)|` over the points, with the point attaining it.
fn residual_over_points(
    identity: &str,
    points: &[Vec<f64>],
    f: impl Fn(&[f64]) -> Result<f64>,
) -> Result<IdentityResidual> {
    let mut max_residual = 0.0f64;
    let mut worst_point = points.first().cloned().unwrap_or_default();
    for p in points {
        let r = f(p)?.abs();
        if r > max_residual {
            max_residual = r;
            worst_point = p.clone();
        }
    }
    Ok(IdentityResidual {
        identity: identity.to_string(),
        max_residual,
        worst_point,
    })
}

/// The pullback structure `(Φ*b)(x) = J(x)^⊤ 𝓑(Φ(x)) J(x)` with
/// `J = DΦ`, probed on the same chart box as the source structure.
pub fn pullback_structure(
    phi: &DiffeoMap,
    b_n: &GeometricStructure,
) -> Result<GeometricStructure> {
    if phi.dim() != b_n.dim() {
        return Err(Error::DimensionMismatch {
            expected: b_n.dim(),
            got: phi.dim(),
        });
    }
    let map = phi.clone();
    let matrix = b_n.matrix().clone();
    let op = move |x: &[f64]| {
        let j = map.jacobian(x)?;
        let bn = matrix.eval(&map.eval(x)?)?;
        Ok(j.transpose() * bn * j)
    };
    GeometricStructure::new(
        matrix_field_from_op(b_n.dim(), Arc::new(op)),
        b_n.probe_box(),
    )
}

/// Checks `Φ*b^N = b^M` at the points: the report's residual is the
/// largest entrywise difference between the pulled-back matrix and
/// `𝓑^M`.
pub fn is_geometromorphism(
    phi: &DiffeoMap,
    b_m: &GeometricStructure,
    b_n: &GeometricStructure,
    points: &[Vec<f64>],
    tol: f64,
) -> Result<MorphReport> {
    let residual = structure_pullback_residual(phi, b_m, b_n, points)?;
    Ok(MorphReport::from_breakdown(
        vec![residual],
        tol,
        points.len(),
    ))
}

fn structure_pullback_residual(
    phi: &DiffeoMap,
    b_m: &GeometricStructure,
    b_n: &GeometricStructure,
    points: &[Vec<f64>],
) -> Result<IdentityResidual> {
    let pulled = pullback_structure(phi, b_n)?;
    residual_over_points("structure-pullback", points, |p| {
        let diff = pulled.matrix().eval(p)? - b_m.matrix().eval(p)?;
        Ok(diff.abs().max())
    })
}

/// The pushforward `Φ⋆X = (DΦ · X) ∘ Φ⁻¹`, componentwise
/// `(J X)^k ∘ Φ⁻¹`. Requires a declared inverse.
pub fn pushforward_vector(phi: &DiffeoMap, x: &VectorField) -> Result<VectorField> {
    if phi.dim() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: phi.dim(),
        });
    }
    let inverse = phi.inverse_map().ok_or_else(|| {
        Error::Precondition(String::from(
            "pushforward needs a map with a declared inverse",
        ))
    })?;
    let order = if phi.max_order() >= JetOrder::Hessian
        && x.max_order() >= JetOrder::Gradient
    {
        JetOrder::Gradient
    } else {
        JetOrder::Value
    };
    let comps = (0..x.dim())
        .map(|comp| {
            ScalarField::from_kernel(Arc::new(PushforwardComponentKernel {
                phi: phi.clone(),
                inverse: inverse.clone(),
                x: x.clone(),
                comp,
                order,
            }))
        })
        .collect();
    VectorField::new(comps)
}

struct PushforwardComponentKernel {
    phi: DiffeoMap,
    inverse: DiffeoMap,
    x: VectorField,
    comp: usize,
    order: JetOrder,
}

impl FieldKernel for PushforwardComponentKernel {
    fn dim(&self) -> usize {
        self.x.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.order
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let u = self.inverse.eval(point)?;
        let j = self.phi.jacobian(&u)?;
        let xv = self.x.eval(&u)?;
        let k = self.comp;
        let value = (0..n).map(|i| j[(k, i)] * xv[i]).sum();
        match order {
            JetOrder::Value => Ok(Jet2::constant(n, value)),
            JetOrder::Gradient => {
                // ∂/∂y_j of (J X)^k ∘ Φ⁻¹: differentiate J X at u, then
                // push through the Jacobian of the declared inverse.
                let jinv = self.inverse.jacobian(point)?;
                let hess_k = self.phi.component(k).hessian(&u)?;
                let jac_x = self.x.jacobian(&u)?;
                let mut inner = vec![0.0; n];
                for (m, im) in inner.iter_mut().enumerate() {
                    *im = (0..n)
                        .map(|i| hess_k[(i, m)] * xv[i] + j[(k, i)] * jac_x[(i, m)])
                        .sum();
                }
                let mut grad = vec![0.0; n];
                for (jj, gj) in grad.iter_mut().enumerate() {
                    *gj = (0..n).map(|m| jinv[(m, jj)] * inner[m]).sum();
                }
                Ok(Jet2::from_parts(
                    n,
                    value,
                    grad,
                    vec![0.0; crate::expr::hess_len(n)],
                ))
            }
            JetOrder::Hessian => Err(Error::DerivativeOrder {
                available: self.order,
                requested: order,
            }),
        }
    }
}

/// The pullback volume `Φ*μ`: density `|det DΦ(x)| · ρ(Φ(x))`,
/// orientation multiplied by the (constant) sign of `det DΦ`.
pub fn pullback_volume(phi: &DiffeoMap, mu_n: &VolumeForm) -> Result<VolumeForm> {
    if phi.dim() != mu_n.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu_n.dim(),
            got: phi.dim(),
        });
    }
    let det = ScalarField::from_kernel(Arc::new(JacobianDetKernel { phi: phi.clone() }));
    let mut sign: i8 = 0;
    for p in mu_n.probe_box().probes() {
        let v = det.eval(&p)?;
        if v == 0.0 {
            return Err(Error::Precondition(format!(
                "map Jacobian is singular at {p:?}"
            )));
        }
        let s = if v > 0.0 { 1 } else { -1 };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return Err(Error::Precondition(format!(
                "map Jacobian determinant changes sign on the chart (at {p:?})"
            )));
        }
    }
    let abs_det = if sign < 0 { det.scale(-1.0) } else { det };
    let density = abs_det.mul(&mu_n.density().compose(phi)?)?;
    Ok(VolumeForm::from_density(&density, mu_n.probe_box())?
        .with_orientation(mu_n.orientation() * sign))
}

/// `det DΦ(x)`, with gradient `∂ᵢ det = det · tr(J⁻¹ ∂ᵢJ)`.
struct JacobianDetKernel {
    phi: DiffeoMap,
}

impl FieldKernel for JacobianDetKernel {
    fn dim(&self) -> usize {
        self.phi.dim()
    }

    fn max_order(&self) -> JetOrder {
        if self.phi.max_order() >= JetOrder::Hessian {
            JetOrder::Gradient
        } else {
            JetOrder::Value
        }
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let j = self.phi.jacobian(point)?;
        match order {
            JetOrder::Value => Ok(Jet2::constant(n, j.determinant())),
            JetOrder::Gradient => {
                let lu = CheckedLu::new(&j, point)?;
                let det = lu.determinant();
                let hessians: Vec<_> = (0..n)
                    .map(|k| self.phi.component(k).hessian(point))
                    .collect::<Result<_>>()?;
                let mut grad = vec![0.0; n];
                for (i, gi) in grad.iter_mut().enumerate() {
                    let mut dj = nalgebra::DMatrix::zeros(n, n);
                    for k in 0..n {
                        for m in 0..n {
                            dj[(k, m)] = hessians[k][(m, i)];
                        }
                    }
                    *gi = det * (lu.inverse() * dj).trace();
                }
                Ok(Jet2::from_parts(
                    n,
                    det,
                    grad,
                    vec![0.0; crate::expr::hess_len(n)],
                ))
            }
            JetOrder::Hessian => Err(Error::DerivativeOrder {
                available: self.max_order(),
                requested: order,
            }),
        }
    }
}

/// Max residual of `Φ*μ^N − μ^M` (densities with orientation signs) at
/// the points.
fn volume_pullback_residual(
    phi: &DiffeoMap,
    mu_m: &VolumeForm,
    mu_n: &VolumeForm,
    points: &[Vec<f64>],
) -> Result<IdentityResidual> {
    let pulled = pullback_volume(phi, mu_n)?;
    residual_over_points("volume-pullback", points, |p| {
        let a = f64::from(pulled.orientation()) * pulled.density().eval(p)?;
        let b = f64::from(mu_m.orientation()) * mu_m.density().eval(p)?;
        Ok(a - b)
    })
}

/// Verifies `Φ⋆(∇^{L/R}_{b^M}(F∘Φ)) = ∇^{L/R}_{b^N}F` at the points,
/// along with the geometromorphism property it rests on.
pub fn check_grad_naturality(
    phi: &DiffeoMap,
    b_m: &GeometricStructure,
    b_n: &GeometricStructure,
    f: &ScalarField,
    points: &[Vec<f64>],
) -> Result<MorphReport> {
    let mut breakdown = vec![structure_pullback_residual(phi, b_m, b_n, points)?];
    let f_pulled = f.compose(phi)?;
    for (name, side) in [
        ("grad-left", Chirality::Left),
        ("grad-right", Chirality::Right),
    ] {
        let lhs = pushforward_vector(
            phi,
            &crate::calculus::gradient(b_m, &f_pulled, side)?,
        )?;
        let rhs = crate::calculus::gradient(b_n, f, side)?;
        breakdown.push(residual_over_points(name, points, |p| {
            let a = lhs.eval(p)?;
            let b = rhs.eval(p)?;
            Ok(a
                .iter()
                .zip(&b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max))
        })?);
    }
    Ok(MorphReport::from_breakdown(
        breakdown,
        TOL_DIFFERENTIAL,
        points.len(),
    ))
}

/// Verifies `{F, G}_{b^N}∘Φ = {F∘Φ, G∘Φ}_{b^M}` at the points, for the
/// bracket and its symmetric and skew parts.
pub fn check_bracket_naturality(
    phi: &DiffeoMap,
    b_m: &GeometricStructure,
    b_n: &GeometricStructure,
    f: &ScalarField,
    g: &ScalarField,
    points: &[Vec<f64>],
) -> Result<MorphReport> {
    type BracketOp = fn(
        &GeometricStructure,
        &ScalarField,
        &ScalarField,
    ) -> Result<ScalarField>;
    let mut breakdown = vec![structure_pullback_residual(phi, b_m, b_n, points)?];
    let f_pulled = f.compose(phi)?;
    let g_pulled = g.compose(phi)?;
    let cases: [(&str, BracketOp); 3] = [
        ("bracket", bracket),
        ("bracket-sym", bracket_sym),
        ("bracket-skew", bracket_skew),
    ];
    for (name, op) in cases {
        let lhs = op(b_n, f, g)?.compose(phi)?;
        let rhs = op(b_m, &f_pulled, &g_pulled)?;
        breakdown.push(residual_over_points(name, points, |p| {
            Ok(lhs.eval(p)? - rhs.eval(p)?)
        })?);
    }
    Ok(MorphReport::from_breakdown(
        breakdown,
        TOL_DIFFERENTIAL,
        points.len(),
    ))
}

/// Verifies `div_{μ^N}(Φ⋆X)∘Φ = div_{μ^M}X` at the points, along with
/// the volume pullback property it rests on.
pub fn check_div_naturality(
    phi: &DiffeoMap,
    mu_m: &VolumeForm,
    mu_n: &VolumeForm,
    x: &VectorField,
    points: &[Vec<f64>],
) -> Result<MorphReport> {
    let mut breakdown = vec![volume_pullback_residual(phi, mu_m, mu_n, points)?];
    let lhs = divergence(mu_n, &pushforward_vector(phi, x)?)?.compose(phi)?;
    let rhs = divergence(mu_m, x)?;
    breakdown.push(residual_over_points("divergence", points, |p| {
        Ok(lhs.eval(p)? - rhs.eval(p)?)
    })?);
    Ok(MorphReport::from_breakdown(
        breakdown,
        TOL_DIFFERENTIAL,
        points.len(),
    ))
}

/// Verifies `Δ^{L/R}_{b^M,μ^M}(F∘Φ) = (Δ^{L/R}_{b^N,μ^N}F)∘Φ` at the
/// points, along with the structure and volume pullback properties it
/// rests on.
pub fn check_laplace_naturality(
    phi: &DiffeoMap,
    b_m: &GeometricStructure,
    mu_m: &VolumeForm,
    b_n: &GeometricStructure,
    mu_n: &VolumeForm,
    f: &ScalarField,
    points: &[Vec<f64>],
) -> Result<MorphReport> {
    let mut breakdown = vec![
        structure_pullback_residual(phi, b_m, b_n, points)?,
        volume_pullback_residual(phi, mu_m, mu_n, points)?,
    ];
    let f_pulled = f.compose(phi)?;
    for (name, side) in [
        ("laplace-left", Chirality::Left),
        ("laplace-right", Chirality::Right),
    ] {
        let lhs = laplacian(b_m, mu_m, &f_pulled, side)?;
        let rhs = laplacian(b_n, mu_n, f, side)?.compose(phi)?;
        breakdown.push(residual_over_points(name, points, |p| {
            Ok(lhs.eval(p)? - rhs.eval(p)?)
        })?);
    }
    Ok(MorphReport::from_breakdown(
        breakdown,
        TOL_DIFFERENTIAL,
        points.len(),
    ))
}

/// Re-verifies that pairwise compositions and declared inverses of the
/// maps preserve `b`: the structure-preserving maps of a chart are closed
/// under composition and inversion.
pub fn check_group_property(
    maps: &[DiffeoMap],
    b: &GeometricStructure,
    points: &[Vec<f64>],
) -> Result<MorphReport> {
    let mut breakdown = Vec::new();
    let mut push = |name: String, phi: &DiffeoMap| -> Result<()> {
        let mut r = structure_pullback_residual(phi, b, b, points)?;
        r.identity = name;
        breakdown.push(r);
        Ok(())
    };
    for (i, phi) in maps.iter().enumerate() {
        push(format!("map-{i}"), phi)?;
        let inv = phi.inverse_map().ok_or_else(|| {
            Error::Precondition(format!("map {i} has no declared inverse"))
        })?;
        push(format!("map-{i}-inverse"), &inv)?;
    }
    for (i, phi) in maps.iter().enumerate() {
        for (j, psi) in maps.iter().enumerate() {
            if i != j {
                push(format!("map-{i}-after-map-{j}"), &phi.compose(psi)?)?;
            }
        }
    }
    Ok(MorphReport::from_breakdown(
        breakdown,
        TOL_DIFFERENTIAL,
        points.len(),
    ))
}
