//! Geometric structures: non-degenerate matrix fields with detected
//! symmetry flags, their decompositions, induced structures, geometric
//! pairs, adjoints, and definiteness probes.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::domain::ChartBox;
use crate::error::{Error, Result};
use crate::fields::{FieldKernel, JetOrder, MatrixField, ScalarField, VectorField};
use crate::linalg::{norm_inf, CheckedLu};
use crate::tolerances::TOL_FLAG;

/// Outcome of probing one structural property.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Flag {
    Yes,
    No,
    /// Not determined; reserved for structures whose probing was skipped.
    Unknown,
}

/// Symmetry, skewness, and constancy of the matrix field, decided by
/// sampling at quasi-random probe points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct StructureFlags {
    pub symmetric: Flag,
    pub skew: Flag,
    pub constant: Flag,
}

/// Sampling-based definiteness classification of the quadratic form
/// `v ↦ b(v, v)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefinitenessClass {
    Positive,
    Negative,
    Indefinite,
    /// Every sampled value of the quadratic form vanishes (for example for
    /// a skew structure).
    DegenerateSample,
}

/// Result of a non-degeneracy probe.
#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyReport {
    pub pass: bool,
    pub min_abs_det: f64,
    pub worst_point: Vec<f64>,
    pub probes: usize,
    pub tol: f64,
}

/// A (0,2)-structure on the chart: matrix field `𝓑` with
/// `𝓑_ij = b(∂_i, ∂_j)`, non-degenerate at the probe points of its box.
#[derive(Clone)]
pub struct GeometricStructure {
    matrix: MatrixField,
    flags: StructureFlags,
    probe_box: ChartBox,
}

impl GeometricStructure {
    /// Builds a structure, detecting flags and requiring invertibility of
    /// the matrix at every probe point of `probe_box`.
    pub fn new(matrix: MatrixField, probe_box: &ChartBox) -> Result<Self> {
        if matrix.dim() != probe_box.dim() {
            return Err(Error::DimensionMismatch {
                expected: probe_box.dim(),
                got: matrix.dim(),
            });
        }
        let s = Self::from_matrix_unprobed(matrix, probe_box)?;
        for p in s.probe_box.probes() {
            CheckedLu::new(&s.matrix.eval(&p)?, &p)?;
        }
        Ok(s)
    }

    /// Builds a structure without asserting non-degeneracy. Used for
    /// symmetric/skew parts, which may be degenerate; callers can probe
    /// with [`GeometricStructure::check_nondegenerate`] on demand.
    pub(crate) fn from_matrix_unprobed(
        matrix: MatrixField,
        probe_box: &ChartBox,
    ) -> Result<Self> {
        let flags = detect_flags(&matrix, probe_box)?;
        Ok(GeometricStructure {
            matrix,
            flags,
            probe_box: probe_box.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &MatrixField {
        &self.matrix
    }

    pub fn flags(&self) -> StructureFlags {
        self.flags
    }

    pub fn probe_box(&self) -> &ChartBox {
        &self.probe_box
    }

    pub fn is_symmetric(&self) -> bool {
        self.flags.symmetric == Flag::Yes
    }

    pub fn is_skew(&self) -> bool {
        self.flags.skew == Flag::Yes
    }

    pub fn is_constant(&self) -> bool {
        self.flags.constant == Flag::Yes
    }

    /// `b(X, Y)(p) = Σ_ij 𝓑_ij(p) X^i(p) Y^j(p)`.
    pub fn evaluate(&self, x: &VectorField, y: &VectorField, p: &[f64]) -> Result<f64> {
        if x.dim() != self.dim() || y.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim().max(y.dim()),
            });
        }
        let m = self.matrix.eval(p)?;
        let xv = DVector::from_vec(x.eval(p)?);
        let yv = DVector::from_vec(y.eval(p)?);
        Ok((xv.transpose() * m * yv)[(0, 0)])
    }

    /// Quadratic form `v^⊤ 𝓑(p) v` for a concrete vector.
    pub fn quadratic_form(&self, p: &[f64], v: &[f64]) -> Result<f64> {
        let m = self.matrix.eval(p)?;
        let vv = DVector::from_column_slice(v);
        Ok((vv.transpose() * m * vv)[(0, 0)])
    }

    /// Probes `|det 𝓑|` at the given points; passes iff the minimum
    /// exceeds `tol`. Never fails on degenerate matrices: the report
    /// carries the failure.
    pub fn check_nondegenerate(
        &self,
        points: &[Vec<f64>],
        tol: f64,
    ) -> Result<NondegeneracyReport> {
        if points.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "non-degeneracy probe needs at least one point",
            )));
        }
        let mut min_abs_det = f64::INFINITY;
        let mut worst_point = points[0].clone();
        for p in points {
            let det = self.matrix.eval(p)?.lu().determinant().abs();
            if det < min_abs_det {
                min_abs_det = det;
                worst_point = p.clone();
            }
        }
        Ok(NondegeneracyReport {
            pass: min_abs_det > tol,
            min_abs_det,
            worst_point,
            probes: points.len(),
            tol,
        })
    }

    /// Symmetric part `½(𝓑 + 𝓑^⊤)`; may be degenerate.
    pub fn sym_part(&self) -> GeometricStructure {
        let m = self
            .matrix
            .add(&self.matrix.transpose())
            .expect("same size")
            .scale(0.5);
        Self::from_matrix_unprobed(m, &self.probe_box)
            .expect("flag detection cannot fail where the structure evaluates")
    }

    /// Skew part `½(𝓑 − 𝓑^⊤)`; may be degenerate.
    pub fn skew_part(&self) -> GeometricStructure {
        let m = self
            .matrix
            .add(&self.matrix.transpose().scale(-1.0))
            .expect("same size")
            .scale(0.5);
        Self::from_matrix_unprobed(m, &self.probe_box)
            .expect("flag detection cannot fail where the structure evaluates")
    }

    /// Opposite structure `b^op(X, Y) = b(Y, X)`, i.e. matrix `𝓑^⊤`.
    pub fn opposite(&self) -> GeometricStructure {
        Self::from_matrix_unprobed(self.matrix.transpose(), &self.probe_box)
            .expect("flag detection cannot fail where the structure evaluates")
    }

    /// Structure `b_T^L(X, Y) = b(TX, Y)` with matrix `T^⊤𝓑`.
    pub fn induced_left(&self, t: &MatrixField) -> Result<GeometricStructure> {
        self.check_induced_tensor(t)?;
        GeometricStructure::new(t.transpose().matmul(&self.matrix)?, &self.probe_box)
    }

    /// Structure `b_T^R(X, Y) = b(X, TY)` with matrix `𝓑T`.
    pub fn induced_right(&self, t: &MatrixField) -> Result<GeometricStructure> {
        self.check_induced_tensor(t)?;
        GeometricStructure::new(self.matrix.matmul(t)?, &self.probe_box)
    }

    fn check_induced_tensor(&self, t: &MatrixField) -> Result<()> {
        if t.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: t.dim(),
            });
        }
        for p in self.probe_box.probes() {
            let det = t.eval(&p)?.lu().determinant();
            if det.abs() <= TOL_FLAG {
                return Err(Error::Precondition(format!(
                    "inducing tensor field is degenerate at probe point {p:?} (det = {det:.3e})"
                )));
            }
        }
        Ok(())
    }

    /// Left adjoint of a (1,1)-tensor field:
    /// `A^{⋆L} = 𝓑^{-⊤} A^⊤ 𝓑^⊤`, defined by `b(A^{⋆L}X, Y) = b(X, AY)`.
    pub fn adjoint_left(&self, a: &MatrixField) -> Result<MatrixField> {
        self.adjoint(a, AdjointSide::Left)
    }

    /// Right adjoint of a (1,1)-tensor field:
    /// `A^{⋆R} = 𝓑^{-1} A^⊤ 𝓑`, defined by `b(AX, Y) = b(X, A^{⋆R}Y)`.
    pub fn adjoint_right(&self, a: &MatrixField) -> Result<MatrixField> {
        self.adjoint(a, AdjointSide::Right)
    }

    fn adjoint(&self, a: &MatrixField, side: AdjointSide) -> Result<MatrixField> {
        if a.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: a.dim(),
            });
        }
        let b = self.matrix.clone();
        let a = a.clone();
        Ok(matrix_field_from_op(
            self.dim(),
            Arc::new(move |p: &[f64]| {
                let bm = b.eval(p)?;
                let am = a.eval(p)?;
                let m = match side {
                    AdjointSide::Left => {
                        let bt = bm.transpose();
                        let lu = CheckedLu::new(&bt, p)?;
                        lu.inverse() * am.transpose() * bt
                    }
                    AdjointSide::Right => {
                        let lu = CheckedLu::new(&bm, p)?;
                        lu.inverse() * am.transpose() * bm
                    }
                };
                Ok(m)
            }),
        ))
    }

    /// Associates the geometric pair `B_g = 𝓑⁻¹G` to this structure and a
    /// Riemannian reference `g`, verifying `g(X, Y) = b(X, B_gY)` at the
    /// probe points.
    pub fn geometric_pair(&self, g: &GeometricStructure) -> Result<GeometricPair> {
        if g.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: g.dim(),
            });
        }
        g.require_spd("geometric pair reference metric")?;
        let b_matrix = self.matrix.clone();
        let g_matrix = g.matrix.clone();
        let b_g = matrix_field_from_op(
            self.dim(),
            Arc::new(move |p: &[f64]| {
                let lu = CheckedLu::new(&b_matrix.eval(p)?, p)?;
                Ok(lu.inverse() * g_matrix.eval(p)?)
            }),
        );
        // Defining relation g(X, Y) = b(X, B_gY) reads G = 𝓑 B_g as
        // matrices; check it at the probes.
        for p in self.probe_box.probes() {
            let lhs = g.matrix.eval(&p)?;
            let rhs = self.matrix.eval(&p)? * b_g.eval(&p)?;
            let scale = 1.0 + norm_inf(&lhs);
            let residual = norm_inf(&(lhs - rhs)) / scale;
            if residual > 1e-9 {
                return Err(Error::Precondition(format!(
                    "geometric pair defining relation fails at {p:?} (residual {residual:.3e})"
                )));
            }
        }
        Ok(GeometricPair {
            b: self.clone(),
            g: g.clone(),
            b_g,
        })
    }

    /// Requires this structure to be symmetric positive definite at the
    /// probe points.
    pub(crate) fn require_spd(&self, role: &str) -> Result<()> {
        if !self.is_symmetric() {
            return Err(Error::Precondition(format!(
                "{role} must be symmetric (probed flag says it is not)"
            )));
        }
        for p in self.probe_box.probes() {
            let m = self.matrix.eval(&p)?;
            let scale = 1.0 + norm_inf(&m);
            let eig = SymmetricEigen::new(m);
            let min = eig.eigenvalues.min();
            if min <= TOL_FLAG * scale {
                return Err(Error::Precondition(format!(
                    "{role} must be positive definite; eigenvalue {min:.3e} at {p:?}"
                )));
            }
        }
        Ok(())
    }

    /// Classifies the sign of `v^⊤𝓑(p)v` over all point/vector pairs,
    /// corroborated by the eigenvalues of the symmetric part at the
    /// points. Sampling evidence only.
    pub fn definiteness_probe(
        &self,
        points: &[Vec<f64>],
        vectors: &[Vec<f64>],
    ) -> Result<DefinitenessClass> {
        if points.is_empty() || vectors.is_empty() {
            return Err(Error::InvalidArgument(String::from(
                "definiteness probe needs points and vectors",
            )));
        }
        let mut all_zero = true;
        let mut all_pos = true;
        let mut all_neg = true;
        for v in vectors {
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            if norm2 == 0.0 {
                return Err(Error::InvalidArgument(String::from(
                    "definiteness probe vectors must be nonzero",
                )));
            }
            for p in points {
                let q = self.quadratic_form(p, v)?;
                let scale = (1.0 + norm_inf(&self.matrix.eval(p)?)) * norm2;
                if q.abs() > TOL_FLAG * scale {
                    all_zero = false;
                }
                if q <= 0.0 {
                    all_pos = false;
                }
                if q >= 0.0 {
                    all_neg = false;
                }
            }
        }
        if all_zero {
            return Ok(DefinitenessClass::DegenerateSample);
        }
        // Eigenvalue evidence from the symmetric part: b and its symmetric
        // part share the quadratic form.
        let mut eig_min = f64::INFINITY;
        let mut eig_max = f64::NEG_INFINITY;
        for p in points {
            let m = self.matrix.eval(p)?;
            let sym = (m.clone() + m.transpose()).scale(0.5);
            let eig = SymmetricEigen::new(sym);
            eig_min = eig_min.min(eig.eigenvalues.min());
            eig_max = eig_max.max(eig.eigenvalues.max());
        }
        if all_pos && eig_min > 0.0 {
            Ok(DefinitenessClass::Positive)
        } else if all_neg && eig_max < 0.0 {
            Ok(DefinitenessClass::Negative)
        } else {
            Ok(DefinitenessClass::Indefinite)
        }
    }
}

#[derive(Clone, Copy)]
enum AdjointSide {
    Left,
    Right,
}

/// A structure together with a Riemannian reference metric and the field
/// `B_g = 𝓑⁻¹G` relating them by `g(X, Y) = b(X, B_gY)`.
#[derive(Clone)]
pub struct GeometricPair {
    b: GeometricStructure,
    g: GeometricStructure,
    b_g: MatrixField,
}

impl GeometricPair {
    pub fn b(&self) -> &GeometricStructure {
        &self.b
    }

    pub fn g(&self) -> &GeometricStructure {
        &self.g
    }

    pub fn b_g(&self) -> &MatrixField {
        &self.b_g
    }
}

fn detect_flags(matrix: &MatrixField, probe_box: &ChartBox) -> Result<StructureFlags> {
    let probes = probe_box.probes();
    let first = matrix.eval(&probes[0])?;
    let mut symmetric = true;
    let mut skew = true;
    let mut constant = true;
    for p in &probes {
        let m = matrix.eval(p)?;
        let mt = m.transpose();
        if norm_inf(&(&m - &mt)) > TOL_FLAG {
            symmetric = false;
        }
        if norm_inf(&(&m + &mt)) > TOL_FLAG {
            skew = false;
        }
        if norm_inf(&(&m - &first)) > TOL_FLAG {
            constant = false;
        }
    }
    let to_flag = |b: bool| if b { Flag::Yes } else { Flag::No };
    Ok(StructureFlags {
        symmetric: to_flag(symmetric),
        skew: to_flag(skew),
        constant: to_flag(constant),
    })
}

type MatrixOp = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;

struct MatrixOpEntryKernel {
    dim: usize,
    i: usize,
    j: usize,
    op: Arc<MatrixOp>,
}

impl FieldKernel for MatrixOpEntryKernel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_order(&self) -> JetOrder {
        JetOrder::Value
    }

    fn jet(&self, point: &[f64], _order: JetOrder) -> Result<crate::expr::Jet2> {
        let m = (self.op)(point)?;
        Ok(crate::expr::Jet2::constant(self.dim, m[(self.i, self.j)]))
    }
}

/// Wraps a pointwise matrix function as a value-only [`MatrixField`].
pub(crate) fn matrix_field_from_op(dim: usize, op: Arc<MatrixOp>) -> MatrixField {
    let rows = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| {
                    ScalarField::from_kernel(Arc::new(MatrixOpEntryKernel {
                        dim,
                        i,
                        j,
                        op: op.clone(),
                    }))
                })
                .collect()
        })
        .collect();
    MatrixField::from_entries(rows).expect("generated entries are square")
}
