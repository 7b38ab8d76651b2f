//! Left and right gradients, the bracket they induce, and the derived
//! Leibniz and Hamilton-Poisson vector fields.
//!
//! The left gradient solves `𝓑^⊤ v = dF` pointwise and the right gradient
//! solves `𝓑 v = dF`, each with one LU factorization shared by the value
//! and all derivative components at that point. The bracket
//! `{F, G} = dF · ∇^L G` is assembled from derivative and gradient
//! component fields, so bracket fields still expose first derivatives and
//! brackets of brackets can be evaluated.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::fields::{FieldKernel, JetOrder, ScalarField, VectorField};
use crate::linalg::CheckedLu;
use crate::structure::{GeometricPair, GeometricStructure};

/// Which of the two gradients (equivalently, which slot of `b`) an
/// operation uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chirality {
    Left,
    Right,
}

impl Chirality {
    pub fn name(self) -> &'static str {
        match self {
            Chirality::Left => "left",
            Chirality::Right => "right",
        }
    }
}

/// `∇^L_b F`, defined by `b(∇^L_b F, X) = dF·X`; in coordinates
/// `𝓑^⊤ (∇^L_b F) = dF`.
pub fn grad_left(b: &GeometricStructure, f: &ScalarField) -> Result<VectorField> {
    gradient(b, f, Chirality::Left)
}

/// `∇^R_b F`, defined by `b(X, ∇^R_b F) = dF·X`; in coordinates
/// `𝓑 (∇^R_b F) = dF`.
pub fn grad_right(b: &GeometricStructure, f: &ScalarField) -> Result<VectorField> {
    gradient(b, f, Chirality::Right)
}

/// The gradient of the requested chirality.
pub fn gradient(
    b: &GeometricStructure,
    f: &ScalarField,
    side: Chirality,
) -> Result<VectorField> {
    if f.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: f.dim(),
        });
    }
    let order = gradient_component_order(b, f)?;
    let comps = (0..b.dim())
        .map(|comp| {
            ScalarField::from_kernel(Arc::new(GradComponentKernel {
                b: b.clone(),
                f: f.clone(),
                side,
                comp,
                order,
            }))
        })
        .collect();
    VectorField::new(comps)
}

/// Jet order a gradient component can deliver: values need first
/// derivatives of `F`, gradients need second derivatives of `F` and first
/// derivatives of `𝓑`.
fn gradient_component_order(
    b: &GeometricStructure,
    f: &ScalarField,
) -> Result<JetOrder> {
    if f.max_order() < JetOrder::Gradient {
        return Err(Error::DerivativeOrder {
            available: f.max_order(),
            requested: JetOrder::Gradient,
        });
    }
    Ok(
        if f.max_order() >= JetOrder::Hessian
            && b.matrix().max_order() >= JetOrder::Gradient
        {
            JetOrder::Gradient
        } else {
            JetOrder::Value
        },
    )
}

struct GradComponentKernel {
    b: GeometricStructure,
    f: ScalarField,
    side: Chirality,
    comp: usize,
    order: JetOrder,
}

impl GradComponentKernel {
    /// Matrix of the linear system at `p`: `𝓑^⊤` for the left gradient,
    /// `𝓑` for the right.
    fn system_matrix(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.b.matrix().eval(p)?;
        Ok(match self.side {
            Chirality::Left => m.transpose(),
            Chirality::Right => m,
        })
    }

    /// Gradient of the system matrix in direction `j`.
    fn system_matrix_derivative(&self, p: &[f64], j: usize) -> Result<DMatrix<f64>> {
        let n = self.b.dim();
        let mut d = DMatrix::zeros(n, n);
        for k in 0..n {
            for l in 0..n {
                let g = self.b.matrix().entry(k, l).gradient(p)?[j];
                match self.side {
                    Chirality::Left => d[(l, k)] = g,
                    Chirality::Right => d[(k, l)] = g,
                }
            }
        }
        Ok(d)
    }
}

impl FieldKernel for GradComponentKernel {
    fn dim(&self) -> usize {
        self.b.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.order
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let lu = CheckedLu::new(&self.system_matrix(point)?, point)?;
        match order {
            JetOrder::Value => {
                let df = DVector::from_vec(self.f.gradient(point)?);
                let v = lu.solve(&df);
                Ok(Jet2::constant(n, v[self.comp]))
            }
            JetOrder::Gradient => {
                let jet = self.f.jet(point, JetOrder::Hessian)?;
                let df = DVector::from_column_slice(jet.gradient());
                let v = lu.solve(&df);
                // Differentiating A v = dF: A (∂_j v) = ∂_j dF − (∂_j A) v.
                let mut grad = Vec::with_capacity(n);
                for j in 0..n {
                    let da = self.system_matrix_derivative(point, j)?;
                    let rhs = DVector::from_fn(n, |k, _| jet.hessian(k, j)) - da * &v;
                    grad.push(lu.solve(&rhs)[self.comp]);
                }
                Ok(Jet2::from_parts(
                    n,
                    v[self.comp],
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

/// The bracket `{F, G}_b = dF · ∇^L_b G = (dF)^⊤ 𝓑^{-⊤} (dG)` as a field
/// that still exposes first derivatives.
pub fn bracket(
    b: &GeometricStructure,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<ScalarField> {
    let grad_g = grad_left(b, g)?;
    let terms: Vec<ScalarField> = (0..b.dim())
        .map(|i| f.partial_derivative(i)?.mul(grad_g.component(i)))
        .collect::<Result<_>>()?;
    ScalarField::sum(&terms)
}

/// Symmetric bracket `{F, G}_{b,sym} = ½({F, G} + {G, F})`.
pub fn bracket_sym(
    b: &GeometricStructure,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<ScalarField> {
    let fg = bracket(b, f, g)?;
    let gf = bracket(b, g, f)?;
    fg.add(&gf).map(|s| s.scale(0.5))
}

/// Skew bracket `{F, G}_{b,skew} = ½({F, G} − {G, F})`.
pub fn bracket_skew(
    b: &GeometricStructure,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<ScalarField> {
    let fg = bracket(b, f, g)?;
    let gf = bracket(b, g, f)?;
    fg.sub(&gf).map(|s| s.scale(0.5))
}

/// The vector field `½(∇^L_b F + ∇^R_b F)`; the derivative of `G` along it
/// is `{G, F}_{b,sym}`.
pub fn leibniz_field_sym(
    b: &GeometricStructure,
    f: &ScalarField,
) -> Result<VectorField> {
    let l = grad_left(b, f)?;
    let r = grad_right(b, f)?;
    Ok(l.add(&r)?.scale(0.5))
}

/// The vector field `½(∇^L_b F − ∇^R_b F)`; the derivative of `G` along it
/// is `{G, F}_{b,skew}`.
pub fn hamilton_poisson_field(
    b: &GeometricStructure,
    f: &ScalarField,
) -> Result<VectorField> {
    let l = grad_left(b, f)?;
    let r = grad_right(b, f)?;
    Ok(l.add(&r.scale(-1.0))?.scale(0.5))
}

/// Gradient of the pair's Riemannian reference metric (left and right
/// agree for symmetric structures).
pub fn metric_gradient(pair: &GeometricPair, f: &ScalarField) -> Result<VectorField> {
    grad_left(pair.g(), f)
}
