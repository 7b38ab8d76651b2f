//! Shared fixtures for the criterion benchmarks.

use geocalc::{ChartBox, ScalarField};

/// Standard 2-dimensional benchmark box.
pub fn bench_box() -> ChartBox {
    ChartBox::unit(2)
}

/// A moderately deep expression exercising every operator class.
pub fn bench_field() -> ScalarField {
    ScalarField::parse(
        "exp(0.3*x1*x2) + sin(x1)^2/(1 + x2^2) - sqrt(1 + x1^2)",
        2,
    )
    .expect("benchmark expression parses")
}
