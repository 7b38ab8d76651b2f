//! Scalar, vector, and matrix fields on a chart, and maps between charts.
//!
//! A [`ScalarField`] is an immutable evaluator backed either by a parsed
//! expression or by a composite kernel (sums, products, compositions,
//! derivative components, operator outputs). Every field knows the highest
//! jet order it can deliver; operators that consume derivatives check this
//! at construction, so a request that would need third derivatives of an
//! expression (for example a divergence of a Laplacian) fails when built,
//! not when evaluated.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Func, Jet2};

/// Highest derivative order a field can produce at a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum JetOrder {
    /// Plain values only.
    Value,
    /// Values and gradients.
    Gradient,
    /// Values, gradients, and Hessians.
    Hessian,
}

impl JetOrder {
    /// Order available after taking one derivative, if any.
    pub(crate) fn lower(self) -> Option<JetOrder> {
        match self {
            JetOrder::Hessian => Some(JetOrder::Gradient),
            JetOrder::Gradient => Some(JetOrder::Value),
            JetOrder::Value => None,
        }
    }
}

/// Evaluation backend of a [`ScalarField`]. Jet slots above the requested
/// order are zero-filled and carry no meaning.
pub(crate) trait FieldKernel: Send + Sync {
    fn dim(&self) -> usize;
    fn max_order(&self) -> JetOrder;
    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2>;
}

fn check_point(dim: usize, point: &[f64]) -> Result<()> {
    if point.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: point.len(),
        });
    }
    Ok(())
}

/// Smooth scalar function on an `n`-dimensional chart.
#[derive(Clone)]
pub struct ScalarField {
    kernel: Arc<dyn FieldKernel>,
}

impl ScalarField {
    pub(crate) fn from_kernel(kernel: Arc<dyn FieldKernel>) -> Self {
        ScalarField { kernel }
    }

    /// Parses expression text over coordinates `x1..x<dim>`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        Ok(Self::from_ast_unchecked(expr::parse(text, dim)?, dim))
    }

    /// Wraps an already-built expression tree, checking coordinate range.
    pub fn from_expr(ast: Expr, dim: usize) -> Result<Self> {
        let max = ast.max_coord();
        if max > dim {
            return Err(Error::CoordinateOutOfRange {
                offset: 0,
                index: max,
                dim,
            });
        }
        Ok(Self::from_ast_unchecked(ast, dim))
    }

    fn from_ast_unchecked(ast: Expr, dim: usize) -> Self {
        ScalarField {
            kernel: Arc::new(ExprKernel { ast, dim }),
        }
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        Self::from_ast_unchecked(Expr::Number(value), dim)
    }

    /// Coordinate function `x_{index+1}` (0-based `index`).
    pub fn coordinate(dim: usize, index: usize) -> Self {
        assert!(
            index < dim,
            "coordinate index {index} out of range for dimension {dim}"
        );
        Self::from_ast_unchecked(Expr::Coord(index + 1), dim)
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn max_order(&self) -> JetOrder {
        self.kernel.max_order()
    }

    /// Jet of the requested order; fails if the field cannot provide it.
    pub fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        check_point(self.dim(), point)?;
        if order > self.max_order() {
            return Err(Error::DerivativeOrder {
                available: self.max_order(),
                requested: order,
            });
        }
        self.kernel.jet(point, order)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        Ok(self.jet(point, JetOrder::Value)?.value())
    }

    pub fn gradient(&self, point: &[f64]) -> Result<Vec<f64>> {
        Ok(self.jet(point, JetOrder::Gradient)?.gradient().to_vec())
    }

    /// Symmetric Hessian matrix at `point`.
    pub fn hessian(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(point, JetOrder::Hessian)?.hessian_matrix())
    }

    fn binary(
        &self,
        other: &ScalarField,
        build: impl FnOnce(ScalarField, ScalarField) -> Arc<dyn FieldKernel>,
    ) -> Result<ScalarField> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(ScalarField {
            kernel: build(self.clone(), other.clone()),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        ScalarField::sum(&[self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.binary(other, |a, b| Arc::new(ProductKernel { a, b }))
    }

    pub fn quotient(&self, other: &ScalarField) -> Result<ScalarField> {
        self.binary(other, |a, b| Arc::new(QuotientKernel { a, b }))
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        ScalarField {
            kernel: Arc::new(ScaleKernel {
                c,
                f: self.clone(),
            }),
        }
    }

    /// Sum of any number of fields of equal dimension.
    pub fn sum(terms: &[ScalarField]) -> Result<ScalarField> {
        let Some(first) = terms.first() else {
            return Err(Error::InvalidArgument(String::from(
                "sum of zero fields has no dimension",
            )));
        };
        for t in terms {
            if t.dim() != first.dim() {
                return Err(Error::DimensionMismatch {
                    expected: first.dim(),
                    got: t.dim(),
                });
            }
        }
        Ok(ScalarField {
            kernel: Arc::new(SumKernel {
                terms: terms.to_vec(),
            }),
        })
    }

    /// The partial derivative `∂F/∂x_{index+1}` as a field one jet order
    /// below `F`; construction fails if `F` has no derivatives to give.
    pub fn partial_derivative(&self, index: usize) -> Result<ScalarField> {
        if index >= self.dim() {
            return Err(Error::InvalidArgument(format!(
                "derivative index {index} out of range for dimension {}",
                self.dim()
            )));
        }
        let Some(order) = self.max_order().lower() else {
            return Err(Error::DerivativeOrder {
                available: JetOrder::Value,
                requested: JetOrder::Gradient,
            });
        };
        Ok(ScalarField {
            kernel: Arc::new(PartialDerivKernel {
                f: self.clone(),
                index,
                order,
            }),
        })
    }

    /// Composition `F ∘ Φ` with exact chain-rule jets.
    pub fn compose(&self, map: &DiffeoMap) -> Result<ScalarField> {
        if self.dim() != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: map.dim(),
            });
        }
        Ok(ScalarField {
            kernel: Arc::new(ComposeKernel {
                f: self.clone(),
                map: map.clone(),
            }),
        })
    }

    /// Composition `outer ∘ F` with a 1-dimensional outer field.
    pub fn chain(outer: &ScalarField, inner: &ScalarField) -> Result<ScalarField> {
        if outer.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: outer.dim(),
            });
        }
        Ok(ScalarField {
            kernel: Arc::new(ChainKernel {
                outer: outer.clone(),
                inner: inner.clone(),
            }),
        })
    }

    /// Applies one of the named unary functions pointwise.
    pub fn apply_func(&self, func: Func) -> ScalarField {
        let outer = ScalarField::from_ast_unchecked(
            Expr::Call(func, Box::new(Expr::Coord(1))),
            1,
        );
        ScalarField::chain(&outer, self).expect("outer function is 1-dimensional")
    }
}

struct ExprKernel {
    ast: Expr,
    dim: usize,
}

impl FieldKernel for ExprKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> JetOrder {
        JetOrder::Hessian
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        match order {
            JetOrder::Value => Ok(Jet2::constant(
                self.dim,
                expr::eval(&self.ast, point)?,
            )),
            _ => expr::eval_jet2(&self.ast, point),
        }
    }
}

struct SumKernel {
    terms: Vec<ScalarField>,
}

impl FieldKernel for SumKernel {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    fn max_order(&self) -> JetOrder {
        self.terms
            .iter()
            .map(ScalarField::max_order)
            .min()
            .unwrap_or(JetOrder::Hessian)
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let mut acc = self.terms[0].kernel.jet(point, order)?;
        for t in &self.terms[1..] {
            acc = acc.add(&t.kernel.jet(point, order)?);
        }
        Ok(acc)
    }
}

struct ProductKernel {
    a: ScalarField,
    b: ScalarField,
}

impl FieldKernel for ProductKernel {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.a.max_order().min(self.b.max_order())
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        Ok(self
            .a
            .kernel
            .jet(point, order)?
            .mul(&self.b.kernel.jet(point, order)?))
    }
}

struct QuotientKernel {
    a: ScalarField,
    b: ScalarField,
}

impl FieldKernel for QuotientKernel {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.a.max_order().min(self.b.max_order())
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        self.a
            .kernel
            .jet(point, order)?
            .div(&self.b.kernel.jet(point, order)?)
    }
}

struct ScaleKernel {
    c: f64,
    f: ScalarField,
}

impl FieldKernel for ScaleKernel {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.f.max_order()
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        Ok(self.f.kernel.jet(point, order)?.scale(self.c))
    }
}

struct PartialDerivKernel {
    f: ScalarField,
    index: usize,
    order: JetOrder,
}

impl FieldKernel for PartialDerivKernel {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.order
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        match order {
            JetOrder::Value => {
                let jet = self.f.kernel.jet(point, JetOrder::Gradient)?;
                Ok(Jet2::constant(n, jet.gradient()[self.index]))
            }
            JetOrder::Gradient => {
                let jet = self.f.kernel.jet(point, JetOrder::Hessian)?;
                let grad: Vec<f64> =
                    (0..n).map(|j| jet.hessian(self.index, j)).collect();
                Ok(Jet2::from_parts(
                    n,
                    jet.gradient()[self.index],
                    grad,
                    vec![0.0; expr::hess_len(n)],
                ))
            }
            JetOrder::Hessian => Err(Error::DerivativeOrder {
                available: self.order,
                requested: order,
            }),
        }
    }
}

struct ChainKernel {
    outer: ScalarField,
    inner: ScalarField,
}

impl FieldKernel for ChainKernel {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.outer.max_order().min(self.inner.max_order())
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let u = self.inner.kernel.jet(point, order)?;
        let outer = self.outer.kernel.jet(&[u.value()], order)?;
        let f1 = if order >= JetOrder::Gradient {
            outer.gradient()[0]
        } else {
            0.0
        };
        let f2 = if order >= JetOrder::Hessian {
            outer.hessian(0, 0)
        } else {
            0.0
        };
        Ok(u.apply(outer.value(), f1, f2))
    }
}

struct ComposeKernel {
    f: ScalarField,
    map: DiffeoMap,
}

impl FieldKernel for ComposeKernel {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.f.max_order().min(self.map.max_order())
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let comps: Vec<Jet2> = self
            .map
            .components()
            .iter()
            .map(|c| c.kernel.jet(point, order))
            .collect::<Result<_>>()?;
        let image: Vec<f64> = comps.iter().map(Jet2::value).collect();
        let fj = self.f.kernel.jet(&image, order)?;
        match order {
            JetOrder::Value => Ok(Jet2::constant(n, fj.value())),
            JetOrder::Gradient => {
                // (F∘Φ)_i = Σ_k F_k Φ^k_i
                let grad: Vec<f64> = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| fj.gradient()[k] * comps[k].gradient()[i])
                            .sum()
                    })
                    .collect();
                Ok(Jet2::from_parts(
                    n,
                    fj.value(),
                    grad,
                    vec![0.0; expr::hess_len(n)],
                ))
            }
            JetOrder::Hessian => {
                let grad: Vec<f64> = (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|k| fj.gradient()[k] * comps[k].gradient()[i])
                            .sum()
                    })
                    .collect();
                // (F∘Φ)_ij = Σ_kl F_kl Φ^k_i Φ^l_j + Σ_k F_k Φ^k_ij
                let mut hess = Vec::with_capacity(expr::hess_len(n));
                for i in 0..n {
                    for j in 0..=i {
                        let mut h = 0.0;
                        for k in 0..n {
                            for l in 0..n {
                                h += fj.hessian(k, l)
                                    * comps[k].gradient()[i]
                                    * comps[l].gradient()[j];
                            }
                            h += fj.gradient()[k] * comps[k].hessian(i, j);
                        }
                        hess.push(h);
                    }
                }
                Ok(Jet2::from_parts(n, fj.value(), grad, hess))
            }
        }
    }
}

/// Vector field written in the chart basis.
#[derive(Clone)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let n = components.len();
        if n == 0 {
            return Err(Error::InvalidArgument(String::from(
                "vector field needs at least one component",
            )));
        }
        for c in &components {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.dim(),
                });
            }
        }
        Ok(VectorField { components })
    }

    pub fn from_exprs(texts: &[&str]) -> Result<Self> {
        let n = texts.len();
        VectorField::new(
            texts
                .iter()
                .map(|t| ScalarField::parse(t, n))
                .collect::<Result<_>>()?,
        )
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn max_order(&self) -> JetOrder {
        self.components
            .iter()
            .map(ScalarField::max_order)
            .min()
            .unwrap_or(JetOrder::Hessian)
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.components[k]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    /// Entry `(k, i) = ∂X^k/∂x^i`.
    pub fn jacobian(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        jacobian_of(&self.components, point)
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        VectorField::new(
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.add(b))
                .collect::<Result<_>>()?,
        )
    }

    pub fn scale(&self, c: f64) -> VectorField {
        VectorField {
            components: self.components.iter().map(|f| f.scale(c)).collect(),
        }
    }

    /// Pointwise multiplication of every component by a scalar field.
    pub fn scale_field(&self, f: &ScalarField) -> Result<VectorField> {
        VectorField::new(
            self.components
                .iter()
                .map(|c| c.mul(f))
                .collect::<Result<_>>()?,
        )
    }
}

fn jacobian_of(components: &[ScalarField], point: &[f64]) -> Result<DMatrix<f64>> {
    let n = components.len();
    let mut j = DMatrix::zeros(n, n);
    for (k, comp) in components.iter().enumerate() {
        let grad = comp.gradient(point)?;
        for i in 0..n {
            j[(k, i)] = grad[i];
        }
    }
    Ok(j)
}

/// Square matrix of scalar fields (row-major).
#[derive(Clone)]
pub struct MatrixField {
    entries: Vec<ScalarField>,
    n: usize,
}

impl MatrixField {
    pub fn from_entries(rows: Vec<Vec<ScalarField>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(String::from(
                "matrix field must be square and non-empty",
            )));
        }
        let entries: Vec<ScalarField> = rows.into_iter().flatten().collect();
        for e in &entries {
            if e.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: e.dim(),
                });
            }
        }
        Ok(MatrixField { entries, n })
    }

    pub fn from_exprs(rows: &[Vec<String>]) -> Result<Self> {
        let n = rows.len();
        let mut fields = Vec::with_capacity(n);
        for row in rows {
            fields.push(
                row.iter()
                    .map(|t| ScalarField::parse(t, n))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        MatrixField::from_entries(fields)
    }

    pub fn constant(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::InvalidArgument(String::from(
                "constant matrix field must be square",
            )));
        }
        let n = m.nrows();
        MatrixField::from_entries(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| ScalarField::constant(n, m[(i, j)]))
                        .collect()
                })
                .collect(),
        )
    }

    pub fn identity(n: usize) -> Self {
        MatrixField::constant(DMatrix::identity(n, n)).expect("identity is square")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn max_order(&self) -> JetOrder {
        self.entries
            .iter()
            .map(ScalarField::max_order)
            .min()
            .unwrap_or(JetOrder::Hessian)
    }

    pub fn entry(&self, i: usize, j: usize) -> &ScalarField {
        &self.entries[i * self.n + j]
    }

    pub fn eval(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.entry(i, j).eval(point)?;
            }
        }
        Ok(m)
    }

    pub fn transpose(&self) -> MatrixField {
        let n = self.n;
        let entries = (0..n)
            .flat_map(|i| (0..n).map(move |j| (j, i)))
            .map(|(i, j)| self.entry(i, j).clone())
            .collect();
        MatrixField { entries, n }
    }

    pub fn add(&self, other: &MatrixField) -> Result<MatrixField> {
        self.check_same_size(other)?;
        let n = self.n;
        MatrixField::from_entries(
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| self.entry(i, j).add(other.entry(i, j)))
                        .collect::<Result<_>>()
                })
                .collect::<Result<_>>()?,
        )
    }

    pub fn scale(&self, c: f64) -> MatrixField {
        MatrixField {
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
            n: self.n,
        }
    }

    /// Pointwise matrix product, entry by entry as sums of products.
    pub fn matmul(&self, other: &MatrixField) -> Result<MatrixField> {
        self.check_same_size(other)?;
        let n = self.n;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::with_capacity(n);
            for j in 0..n {
                let terms: Vec<ScalarField> = (0..n)
                    .map(|k| self.entry(i, k).mul(other.entry(k, j)))
                    .collect::<Result<_>>()?;
                row.push(ScalarField::sum(&terms)?);
            }
            rows.push(row);
        }
        MatrixField::from_entries(rows)
    }

    /// Applies `X ↦ M X` pointwise to a vector field.
    pub fn apply(&self, x: &VectorField) -> Result<VectorField> {
        if self.n != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.dim(),
            });
        }
        let n = self.n;
        VectorField::new(
            (0..n)
                .map(|i| {
                    let terms: Vec<ScalarField> = (0..n)
                        .map(|k| self.entry(i, k).mul(x.component(k)))
                        .collect::<Result<_>>()?;
                    ScalarField::sum(&terms)
                })
                .collect::<Result<_>>()?,
        )
    }

    fn check_same_size(&self, other: &MatrixField) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        Ok(())
    }
}

/// Smooth map of the chart to itself with an optional declared inverse.
/// Where an inverse is declared, `Φ⁻¹(Φ(p)) = p` must hold at sampled
/// points to `1e-10`; operations that need the inverse verify this.
#[derive(Clone)]
pub struct DiffeoMap {
    forward: Arc<Vec<ScalarField>>,
    inverse: Option<Arc<Vec<ScalarField>>>,
}

impl DiffeoMap {
    pub fn new(forward: Vec<ScalarField>, inverse: Option<Vec<ScalarField>>) -> Result<Self> {
        let n = forward.len();
        if n == 0 {
            return Err(Error::InvalidArgument(String::from(
                "map needs at least one component",
            )));
        }
        for c in forward.iter().chain(inverse.iter().flatten()) {
            if c.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.dim(),
                });
            }
        }
        if let Some(inv) = &inverse {
            if inv.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: inv.len(),
                });
            }
        }
        Ok(DiffeoMap {
            forward: Arc::new(forward),
            inverse: inverse.map(Arc::new),
        })
    }

    pub fn from_exprs(forward: &[&str], inverse: Option<&[&str]>) -> Result<Self> {
        let n = forward.len();
        let parse_all = |texts: &[&str]| -> Result<Vec<ScalarField>> {
            texts.iter().map(|t| ScalarField::parse(t, n)).collect()
        };
        DiffeoMap::new(parse_all(forward)?, inverse.map(parse_all).transpose()?)
    }

    pub fn identity(n: usize) -> Self {
        let comps: Vec<ScalarField> =
            (0..n).map(|i| ScalarField::coordinate(n, i)).collect();
        DiffeoMap::new(comps.clone(), Some(comps)).expect("identity components are valid")
    }

    pub fn dim(&self) -> usize {
        self.forward.len()
    }

    pub fn max_order(&self) -> JetOrder {
        self.forward
            .iter()
            .map(ScalarField::max_order)
            .min()
            .unwrap_or(JetOrder::Hessian)
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.forward
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.forward[k]
    }

    pub fn has_inverse(&self) -> bool {
        self.inverse.is_some()
    }

    /// The declared inverse as a map, with this map as its inverse.
    pub fn inverse_map(&self) -> Option<DiffeoMap> {
        self.inverse.as_ref().map(|inv| DiffeoMap {
            forward: inv.clone(),
            inverse: Some(self.forward.clone()),
        })
    }

    pub fn eval(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.forward.iter().map(|c| c.eval(point)).collect()
    }

    /// Entry `(k, i) = ∂Φ^k/∂x^i`.
    pub fn jacobian(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        jacobian_of(&self.forward, point)
    }

    /// `self ∘ other`, composing declared inverses when both exist.
    pub fn compose(&self, other: &DiffeoMap) -> Result<DiffeoMap> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let forward: Vec<ScalarField> = self
            .forward
            .iter()
            .map(|c| c.compose(other))
            .collect::<Result<_>>()?;
        let inverse = match (&other.inverse, self.inverse_map()) {
            (Some(other_inv), Some(self_inv_map)) => Some(
                other_inv
                    .iter()
                    .map(|c| c.compose(&self_inv_map))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        DiffeoMap::new(forward, inverse)
    }

    /// Largest round-trip defect `|Φ⁻¹(Φ(p)) − p|_∞` over the points.
    /// Fails if no inverse is declared.
    pub fn inverse_roundtrip_defect(&self, points: &[Vec<f64>]) -> Result<f64> {
        let inv = self.inverse_map().ok_or_else(|| {
            Error::Precondition(String::from("map has no declared inverse"))
        })?;
        let mut worst = 0.0f64;
        for p in points {
            let q = self.eval(p)?;
            let r = inv.eval(&q)?;
            for i in 0..p.len() {
                worst = worst.max((r[i] - p[i]).abs());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn expression_fields_report_spec_jets() {
        let f = ScalarField::parse("x1^2 + x2^2", 2).unwrap();
        assert_eq!(f.eval(&[1.0, 2.0]).unwrap(), 5.0);
        assert_eq!(f.gradient(&[1.0, 2.0]).unwrap(), vec![2.0, 4.0]);
        let h = f.hessian(&[1.0, 2.0]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]));

        let g = ScalarField::parse("x1*x2", 2).unwrap();
        assert_eq!(g.gradient(&[3.0, 5.0]).unwrap(), vec![5.0, 3.0]);
        let h = g.hessian(&[3.0, 5.0]).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn jacobian_matches_spec_examples() {
        let shear = DiffeoMap::from_exprs(&["x1 + x2", "x2"], None).unwrap();
        let j = shear.jacobian(&[0.3, 0.7]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));

        let id = DiffeoMap::identity(3);
        assert_eq!(id.jacobian(&[1.0, 2.0, 3.0]).unwrap(), DMatrix::identity(3, 3));

        let m = DiffeoMap::from_exprs(&["x1^2", "x1*x2"], None).unwrap();
        let j = m.jacobian(&[1.0, 2.0]).unwrap();
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 2.0, 1.0]));
    }

    #[test]
    fn composition_matches_spec_examples() {
        let f = ScalarField::parse("x1", 2).unwrap();
        let shift = DiffeoMap::from_exprs(&["x1 + 1", "x2"], None).unwrap();
        let g = f.compose(&shift).unwrap();
        assert_eq!(g.eval(&[2.0, 9.0]).unwrap(), 3.0);

        let f = ScalarField::parse("x1^2", 2).unwrap();
        let stretch = DiffeoMap::from_exprs(&["2*x1", "x2"], None).unwrap();
        let g = f.compose(&stretch).unwrap();
        assert_eq!(g.gradient(&[1.0, 0.0]).unwrap(), vec![8.0, 0.0]);

        let f = ScalarField::parse("sin(x1)*x2", 2).unwrap();
        let composed = f.compose(&DiffeoMap::identity(2)).unwrap();
        for p in [[0.2, 0.4], [1.0, -1.0]] {
            assert_eq!(composed.eval(&p).unwrap(), f.eval(&p).unwrap());
        }
    }

    #[test]
    fn jacobian_of_composition_is_product_of_jacobians() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let inner = DiffeoMap::from_exprs(
            &["x1 + 0.3*sin(x2)", "x2 + 0.2*x1^2"],
            None,
        )
        .unwrap();
        let outer = DiffeoMap::from_exprs(
            &["exp(0.1*x2) + x1", "x2 - 0.25*x1*x2"],
            None,
        )
        .unwrap();
        let composed = outer.compose(&inner).unwrap();
        for _ in 0..50 {
            let p = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let ji = inner.jacobian(&p).unwrap();
            let q = inner.eval(&p).unwrap();
            let jo = outer.jacobian(&q).unwrap();
            let jc = composed.jacobian(&p).unwrap();
            let residual = (&jo * &ji - jc).abs().max();
            assert!(
                residual < 1e-9,
                "chain rule defect {residual} at {p:?}"
            );
        }
    }

    #[test]
    fn composed_hessian_is_exactly_symmetric() {
        let f = ScalarField::parse("exp(x1*x2) + sin(x1)", 2).unwrap();
        let map = DiffeoMap::from_exprs(&["x1^2 - x2", "x1*x2 + 1"], None).unwrap();
        let g = f.compose(&map).unwrap();
        for p in [[0.3, 0.5], [-0.7, 0.2], [1.1, -0.4]] {
            let h = g.hessian(&p).unwrap();
            assert_eq!(h[(0, 1)].to_bits(), h[(1, 0)].to_bits());
        }
    }

    #[test]
    fn partial_derivative_fields_lose_one_order() {
        let f = ScalarField::parse("x1^3*x2", 2).unwrap();
        assert_eq!(f.max_order(), JetOrder::Hessian);
        let fx = f.partial_derivative(0).unwrap();
        assert_eq!(fx.max_order(), JetOrder::Gradient);
        assert_eq!(fx.eval(&[2.0, 3.0]).unwrap(), 36.0);
        assert_eq!(fx.gradient(&[2.0, 3.0]).unwrap(), vec![36.0, 12.0]);

        let fxx = fx.partial_derivative(0).unwrap();
        assert_eq!(fxx.max_order(), JetOrder::Value);
        assert_eq!(fxx.eval(&[2.0, 3.0]).unwrap(), 36.0);
        assert!(matches!(
            fxx.partial_derivative(0),
            Err(Error::DerivativeOrder { .. })
        ));
        assert!(matches!(
            fxx.gradient(&[2.0, 3.0]),
            Err(Error::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn quotient_fields_guard_against_zero_denominators() {
        let f = ScalarField::parse("x1", 1).unwrap();
        let g = ScalarField::parse("x1 - 1", 1).unwrap();
        let q = f.quotient(&g).unwrap();
        assert_eq!(q.eval(&[3.0]).unwrap(), 1.5);
        assert!(matches!(q.eval(&[1.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn inverse_roundtrip_defect_is_tiny_for_exact_inverses() {
        let shear = DiffeoMap::from_exprs(
            &["x1 + x2", "x2"],
            Some(&["x1 - x2", "x2"]),
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = vec![vec![0.1, 0.9], vec![-2.0, 3.0]];
        assert!(shear.inverse_roundtrip_defect(&pts).unwrap() < 1e-15);

        let no_inv = DiffeoMap::from_exprs(&["x1 + x2", "x2"], None).unwrap();
        assert!(no_inv.inverse_roundtrip_defect(&pts).is_err());

        let composed = shear.compose(&shear).unwrap();
        assert!(composed.has_inverse());
        assert!(composed.inverse_roundtrip_defect(&pts).unwrap() < 1e-15);
        assert_eq!(composed.eval(&[1.0, 1.0]).unwrap(), vec![3.0, 1.0]);
    }

    #[test]
    fn matrix_fields_multiply_pointwise() {
        let a = MatrixField::from_exprs(&[
            vec!["1".into(), "x1".into()],
            vec!["0".into(), "x2".into()],
        ])
        .unwrap();
        let b = MatrixField::identity(2).scale(2.0);
        let c = a.matmul(&b).unwrap();
        let m = c.eval(&[3.0, 4.0]).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, 6.0, 0.0, 8.0]));

        let at = a.transpose();
        let mt = at.eval(&[3.0, 4.0]).unwrap();
        assert_eq!(mt, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 3.0, 4.0]));
    }

    #[test]
    fn vector_fields_check_dimensions() {
        assert!(VectorField::from_exprs(&["x1 + x2", "x1"]).is_ok());
        let bad = VectorField::new(vec![
            ScalarField::parse("x1", 1).unwrap(),
            ScalarField::parse("x1 + x2", 2).unwrap(),
        ]);
        assert!(bad.is_err());
    }
}
