//! Volume forms, divergence, Riemannian and Liouville densities, and the
//! left/right Laplace-like operators `div ∘ grad`.
//!
//! A volume form stores a strictly positive density together with an
//! orientation sign, so `ρ dx¹∧…∧dxⁿ` and its negative are distinguished
//! without ever carrying a sign inside the density. Divergence
//! differentiates `ρ Xⁱ` as a product of jets; nothing is expanded
//! symbolically.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::calculus::{grad_left, grad_right, Chirality};
use crate::domain::ChartBox;
use crate::error::{Error, Result};
use crate::expr::{Func, Jet2};
use crate::fields::{FieldKernel, JetOrder, MatrixField, ScalarField, VectorField};
use crate::linalg::{pfaffian, CheckedLu};
use crate::structure::GeometricStructure;
use crate::tolerances::{TOL_ALGEBRAIC, TOL_FLAG};

/// A chart-local volume form `s · ρ dx¹∧…∧dxⁿ` with `ρ > 0` and
/// `s ∈ {+1, −1}`.
#[derive(Clone)]
pub struct VolumeForm {
    density: ScalarField,
    orientation: i8,
    probe_box: ChartBox,
}

impl VolumeForm {
    /// The Lebesgue form `dx¹∧…∧dxⁿ` on the given box.
    pub fn lebesgue(probe_box: &ChartBox) -> VolumeForm {
        VolumeForm {
            density: guard_positive(&ScalarField::constant(probe_box.dim(), 1.0)),
            orientation: 1,
            probe_box: probe_box.clone(),
        }
    }

    /// A form with the given density, checked to be strictly positive at
    /// the probe points of the box.
    pub fn from_density(density: &ScalarField, probe_box: &ChartBox) -> Result<VolumeForm> {
        if density.dim() != probe_box.dim() {
            return Err(Error::DimensionMismatch {
                expected: probe_box.dim(),
                got: density.dim(),
            });
        }
        if density.max_order() < JetOrder::Gradient {
            return Err(Error::DerivativeOrder {
                available: density.max_order(),
                requested: JetOrder::Gradient,
            });
        }
        for p in probe_box.probes() {
            let v = density.eval(&p)?;
            if v <= 0.0 {
                return Err(Error::Precondition(format!(
                    "volume density must be positive on the chart; got {v} at {p:?}"
                )));
            }
        }
        Ok(VolumeForm {
            density: guard_positive(density),
            orientation: 1,
            probe_box: probe_box.clone(),
        })
    }

    pub fn dim(&self) -> usize {
        self.probe_box.dim()
    }

    /// The positive density `ρ`. Evaluating it where it is not positive
    /// is an error.
    pub fn density(&self) -> &ScalarField {
        &self.density
    }

    pub fn orientation(&self) -> i8 {
        self.orientation
    }

    pub fn probe_box(&self) -> &ChartBox {
        &self.probe_box
    }

    pub(crate) fn with_orientation(self, orientation: i8) -> VolumeForm {
        VolumeForm {
            orientation,
            ..self
        }
    }
}

/// Wraps a density so that evaluation fails loudly wherever it is not
/// strictly positive.
fn guard_positive(density: &ScalarField) -> ScalarField {
    ScalarField::from_kernel(Arc::new(PositiveDensityKernel {
        density: density.clone(),
    }))
}

struct PositiveDensityKernel {
    density: ScalarField,
}

impl FieldKernel for PositiveDensityKernel {
    fn dim(&self) -> usize {
        self.density.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.density.max_order()
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let jet = self.density.jet(point, order)?;
        if jet.value() <= 0.0 {
            return Err(Error::Precondition(format!(
                "volume density must be positive on the chart; got {} at {point:?}",
                jet.value()
            )));
        }
        Ok(jet)
    }
}

/// `div_μ X = (1/ρ) Σᵢ ∂ᵢ(ρ Xⁱ)`.
pub fn divergence(mu: &VolumeForm, x: &VectorField) -> Result<ScalarField> {
    if x.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: x.dim(),
        });
    }
    let rho = mu.density();
    let terms: Vec<ScalarField> = (0..x.dim())
        .map(|i| rho.mul(x.component(i))?.partial_derivative(i))
        .collect::<Result<_>>()?;
    ScalarField::sum(&terms)?.quotient(rho)
}

/// The Riemannian volume form of a symmetric positive-definite structure:
/// `ρ = √det G`, orientation `+1`.
pub fn riemannian_volume(g: &GeometricStructure) -> Result<VolumeForm> {
    g.require_spd("Riemannian volume metric")?;
    let det = ScalarField::from_kernel(Arc::new(DetKernel {
        m: g.matrix().clone(),
    }));
    VolumeForm::from_density(&det.apply_func(Func::Sqrt), g.probe_box())
}

/// `det G(p)`, with gradient `∂ᵢ det = det · tr(G⁻¹ ∂ᵢG)`.
struct DetKernel {
    m: MatrixField,
}

impl FieldKernel for DetKernel {
    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.m.max_order().min(JetOrder::Gradient)
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let a = self.m.eval(point)?;
        match order {
            JetOrder::Value => Ok(Jet2::constant(n, a.determinant())),
            JetOrder::Gradient => {
                let lu = CheckedLu::new(&a, point)?;
                let det = lu.determinant();
                let inv = lu.inverse();
                let mut grad = vec![0.0; n];
                for (i, g) in grad.iter_mut().enumerate() {
                    *g = det * (inv * entry_gradients(&self.m, point, i)?).trace();
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

/// Matrix of entry derivatives `∂ᵢ M_{kl}` at a point, for a fixed `i`.
fn entry_gradients(m: &MatrixField, point: &[f64], i: usize) -> Result<DMatrix<f64>> {
    let n = m.dim();
    let mut d = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            d[(k, l)] = m.entry(k, l).gradient(point)?[i];
        }
    }
    Ok(d)
}

/// The Liouville volume of a skew structure together with the outcome of
/// the closedness probe.
#[derive(Clone)]
pub struct LiouvilleVolume {
    form: VolumeForm,
    closed: bool,
    max_closedness_defect: f64,
}

impl LiouvilleVolume {
    pub fn form(&self) -> &VolumeForm {
        &self.form
    }

    /// Whether `∂ᵢ𝓑_jk + ∂_j𝓑_ki + ∂_k𝓑_ij = 0` held at every probe
    /// point. A failed probe is a warning, not an error: the density is
    /// still well defined.
    pub fn closed(&self) -> bool {
        self.closed
    }

    pub fn max_closedness_defect(&self) -> f64 {
        self.max_closedness_defect
    }

    pub fn into_form(self) -> VolumeForm {
        self.form
    }
}

/// The Liouville volume of an even-dimensional skew structure: signed
/// density `(−1)^{⌊m/2⌋} Pf(𝓑)` with `m = dim/2`, split into a positive
/// density and an orientation sign. Closedness of `b` is probed and
/// reported, not required.
pub fn liouville_volume(b: &GeometricStructure) -> Result<LiouvilleVolume> {
    let n = b.dim();
    if n % 2 != 0 {
        return Err(Error::Precondition(format!(
            "Liouville volume needs an even-dimensional chart; got dimension {n}"
        )));
    }
    if b.flags().skew != crate::structure::Flag::Yes {
        return Err(Error::Precondition(
            "Liouville volume needs a skew structure".into(),
        ));
    }

    let signed = ScalarField::from_kernel(Arc::new(PfaffianKernel {
        m: b.matrix().clone(),
        prefactor: if (n / 2) / 2 % 2 == 0 { 1.0 } else { -1.0 },
    }));

    let probes = b.probe_box().probes();
    let mut orientation: i8 = 0;
    for p in &probes {
        let v = signed.eval(p)?;
        let sign = if v > 0.0 { 1 } else { -1 };
        if orientation == 0 {
            orientation = sign;
        } else if orientation != sign {
            return Err(Error::Precondition(format!(
                "Liouville density changes sign on the chart (at {p:?})"
            )));
        }
        let det = b.matrix().eval(p)?.determinant();
        if (v.abs() - det.sqrt()).abs() > TOL_ALGEBRAIC * (1.0 + det.sqrt()) {
            return Err(Error::Precondition(format!(
                "Liouville density {} does not square to det 𝓑 = {det} at {p:?}",
                v.abs()
            )));
        }
    }

    let mut max_defect: f64 = 0.0;
    for p in &probes {
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let defect = b.matrix().entry(j, k).gradient(p)?[i]
                        + b.matrix().entry(k, i).gradient(p)?[j]
                        + b.matrix().entry(i, j).gradient(p)?[k];
                    max_defect = max_defect.max(defect.abs());
                }
            }
        }
    }

    let density = if orientation < 0 {
        signed.scale(-1.0)
    } else {
        signed
    };
    let form = VolumeForm::from_density(&density, b.probe_box())?
        .with_orientation(orientation);
    Ok(LiouvilleVolume {
        form,
        closed: max_defect <= TOL_FLAG,
        max_closedness_defect: max_defect,
    })
}

/// `Pf(𝓑(p))` with a constant prefactor; gradient
/// `∂ᵢ Pf = ½ Pf · tr(𝓑⁻¹ ∂ᵢ𝓑)`.
struct PfaffianKernel {
    m: MatrixField,
    prefactor: f64,
}

impl FieldKernel for PfaffianKernel {
    fn dim(&self) -> usize {
        self.m.dim()
    }

    fn max_order(&self) -> JetOrder {
        self.m.max_order().min(JetOrder::Gradient)
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let a = self.m.eval(point)?;
        let pf = self.prefactor * pfaffian(&a)?;
        match order {
            JetOrder::Value => Ok(Jet2::constant(n, pf)),
            JetOrder::Gradient => {
                let lu = CheckedLu::new(&a, point)?;
                let inv = lu.inverse();
                let mut grad = vec![0.0; n];
                for (i, g) in grad.iter_mut().enumerate() {
                    *g = 0.5 * pf * (inv * entry_gradients(&self.m, point, i)?).trace();
                }
                Ok(Jet2::from_parts(
                    n,
                    pf,
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

/// `Δ^L_{b,μ} F = div_μ(∇^L_b F)`.
pub fn laplace_left(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
) -> Result<ScalarField> {
    divergence(mu, &grad_left(b, f)?)
}

/// `Δ^R_{b,μ} F = div_μ(∇^R_b F)`.
pub fn laplace_right(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
) -> Result<ScalarField> {
    divergence(mu, &grad_right(b, f)?)
}

/// The Laplace operator of the requested chirality.
pub fn laplacian(
    b: &GeometricStructure,
    mu: &VolumeForm,
    f: &ScalarField,
    side: Chirality,
) -> Result<ScalarField> {
    match side {
        Chirality::Left => laplace_left(b, mu, f),
        Chirality::Right => laplace_right(b, mu, f),
    }
}

/// Rescales a volume form by a nowhere-zero function: density `|f| ρ`,
/// orientation flipped when `f < 0`. The sign of `f` must be constant
/// across the probe points.
pub fn rescale_volume(mu: &VolumeForm, f: &ScalarField) -> Result<VolumeForm> {
    if f.dim() != mu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            got: f.dim(),
        });
    }
    let mut sign: i8 = 0;
    for p in mu.probe_box().probes() {
        let v = f.eval(&p)?;
        if v == 0.0 {
            return Err(Error::Precondition(format!(
                "rescaling function vanishes at {p:?}"
            )));
        }
        let s = if v > 0.0 { 1 } else { -1 };
        if sign == 0 {
            sign = s;
        } else if sign != s {
            return Err(Error::Precondition(format!(
                "rescaling function changes sign on the chart (at {p:?})"
            )));
        }
    }
    let factor = if sign < 0 { f.scale(-1.0) } else { f.clone() };
    let density = factor.mul(mu.density())?;
    Ok(VolumeForm::from_density(&density, mu.probe_box())?
        .with_orientation(mu.orientation() * sign))
}
