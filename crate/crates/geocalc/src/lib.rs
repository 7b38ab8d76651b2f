//! Chart-local differential operators generated by a non-degenerate
//! (0,2)-tensor field.
//!
//! Given a matrix field `𝓑` that is invertible on the chart, the library
//! builds the left and right gradients it induces, the bracket pairing
//! them, divergence and Laplace-like operators against a volume density,
//! adjoints of matrix fields, naturality checks under chart maps, flows of
//! the gradient fields, and quadrature-based verification of the Green
//! identities and Dirichlet energies. Everything is chart-local: fields
//! live on an axis-aligned box in `ℝⁿ` and are written in the coordinate
//! expression language of [`expr`].

pub mod calculus;
pub mod catalog;
pub mod domain;
pub mod error;
pub mod expr;
pub mod fields;
pub mod flow;
pub mod measure;
pub mod morph;
pub mod quad;
pub mod structure;
pub mod tolerances;

mod linalg;

pub use calculus::{
    bracket, bracket_skew, bracket_sym, grad_left, grad_right, hamilton_poisson_field,
    leibniz_field_sym, Chirality,
};
pub use domain::ChartBox;
pub use error::{Error, Result};
pub use flow::{
    check_flow_bracket, constant_of_motion_residual, flow_jacobian, integrate,
    periodicity_monotonicity_check, transport_check, ConservationReport, FlowBracketReport,
    FlowJacobian, MonotonicityReport, Trajectory, TransportReport,
};
pub use measure::{
    divergence, laplace_left, laplace_right, laplacian, liouville_volume, rescale_volume,
    riemannian_volume, LiouvilleVolume, VolumeForm,
};
pub use fields::{DiffeoMap, JetOrder, MatrixField, ScalarField, VectorField};
pub use morph::{
    check_bracket_naturality, check_div_naturality, check_grad_naturality,
    check_group_property, check_laplace_naturality, is_geometromorphism,
    pullback_structure, pullback_volume, pushforward_vector, IdentityResidual,
    MorphReport,
};
pub use quad::{
    dirichlet_energy, el_residual, green_combined, green_left, green_riemannian, green_right,
    integrate_boundary_flux, integrate_box, symplectic_green, ElReport, GreenReport, QuadRule,
    RiemannianGreenReport, SymplecticGreenReport,
};
pub use structure::{
    DefinitenessClass, Flag, GeometricPair, GeometricStructure, NondegeneracyReport,
    StructureFlags,
};
