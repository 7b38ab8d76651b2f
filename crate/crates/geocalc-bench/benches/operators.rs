//! Criterion benchmarks for the operator pipeline: parsing, jet
//! propagation, gradients, brackets, Laplace operators, boundary
//! quadrature, and flow integration, all on the shear structure over the
//! standard benchmark box.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use geocalc::catalog;
use geocalc::{
    bracket, grad_left, green_left, integrate, laplace_left, JetOrder, ScalarField,
};
use geocalc_bench::{bench_box, bench_field};

const EXPR: &str = "exp(0.3*x1*x2) + sin(x1)^2/(1 + x2^2) - sqrt(1 + x1^2)";

fn bench_parse(c: &mut Criterion) {
    c.bench_function("parse expression", |b| {
        b.iter(|| ScalarField::parse(black_box(EXPR), 2).expect("parses"))
    });
}

fn bench_jet(c: &mut Criterion) {
    let field = bench_field();
    let point = [0.4, 0.6];
    c.bench_function("second-order jet", |b| {
        b.iter(|| field.jet(black_box(&point), JetOrder::Hessian).expect("finite"))
    });
}

fn bench_gradient(c: &mut Criterion) {
    let entry = catalog::get("shear2").expect("entry");
    let field = bench_field();
    let grad = grad_left(&entry.structure, &field).expect("gradient");
    let point = [0.4, 0.6];
    c.bench_function("left gradient evaluation", |b| {
        b.iter(|| grad.eval(black_box(&point)).expect("finite"))
    });
}

fn bench_bracket(c: &mut Criterion) {
    let entry = catalog::get("shear2").expect("entry");
    let f = bench_field();
    let g = entry.function("poly").expect("pool").clone();
    let br = bracket(&entry.structure, &f, &g).expect("bracket");
    let point = [0.4, 0.6];
    c.bench_function("bracket evaluation", |b| {
        b.iter(|| br.eval(black_box(&point)).expect("finite"))
    });
}

fn bench_laplacian(c: &mut Criterion) {
    let entry = catalog::get("shear2").expect("entry");
    let field = bench_field();
    let lap = laplace_left(&entry.structure, &entry.volume, &field).expect("laplacian");
    let point = [0.4, 0.6];
    c.bench_function("Laplace operator evaluation", |b| {
        b.iter(|| lap.eval(black_box(&point)).expect("finite"))
    });
}

fn bench_green(c: &mut Criterion) {
    let entry = catalog::get("shear2").expect("entry");
    let f = ScalarField::parse("x1", 2).expect("parses");
    let g = entry.function("sumsq").expect("pool").clone();
    let chart = bench_box();
    c.bench_function("Green identity, order 8", |b| {
        b.iter(|| {
            green_left(
                &entry.structure,
                &entry.volume,
                black_box(&f),
                black_box(&g),
                &chart,
                8,
            )
            .expect("report")
        })
    });
}

fn bench_flow(c: &mut Criterion) {
    let entry = catalog::get("shear2").expect("entry");
    let field = entry.function("sumsq").expect("pool").clone();
    let x = grad_left(&entry.structure, &field).expect("gradient");
    let seed = [1.0, 0.0];
    c.bench_function("gradient flow, 1000 steps", |b| {
        b.iter(|| integrate(black_box(&x), &seed, 0.1, 1000).expect("trajectory"))
    });
}

criterion_group!(
    benches,
    bench_parse,
    bench_jet,
    bench_gradient,
    bench_bracket,
    bench_laplacian,
    bench_green,
    bench_flow
);
criterion_main!(benches);
