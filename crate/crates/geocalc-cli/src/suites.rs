//! Invariant suites behind `verify`: each suite re-checks the defining
//! identities of one library module against a catalog entry, at that
//! entry's probe points or over its chart box. One `CheckOutcome` row is
//! produced per identity; the README documents the mapping.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::json;

use geocalc::catalog::{names as catalog_names, CatalogEntry};
use geocalc::domain::probe_directions;
use geocalc::tolerances::{TOL_ALGEBRAIC, TOL_DIFFERENTIAL, TOL_FLAG, TOL_INTEGRAL};
use geocalc::{
    bracket, bracket_skew, bracket_sym, check_bracket_naturality, check_div_naturality,
    check_grad_naturality, check_group_property, check_laplace_naturality,
    constant_of_motion_residual, check_flow_bracket, dirichlet_energy, divergence, el_residual,
    flow_jacobian, grad_left, grad_right, green_combined, green_left, green_riemannian,
    green_right, integrate, integrate_boundary_flux, integrate_box, is_geometromorphism,
    liouville_volume, periodicity_monotonicity_check,
    symplectic_green, transport_check, Chirality, DefinitenessClass, DiffeoMap, Flag,
    MatrixField, MorphReport, Result as GeoResult, ScalarField, VectorField, VolumeForm,
};

use crate::context::{lib_error, load_entry, CliError, CliResult, Outcome};

/// Flow-suite horizon, kept short so no catalog flow leaves the region
/// where it stays finite.
const FLOW_HORIZON: f64 = 0.05;
/// Threshold on the central-difference defect of `log det` along a flow.
const LOG_DET_TOL: f64 = 1e-5;
/// Threshold on the relative transport residual at the suite's cheap
/// step/order settings.
const TRANSPORT_REL_TOL: f64 = 1e-3;
/// Threshold for jets against finite differences.
const FD_TOL: f64 = 1e-6;

const SUITE_NAMES: [&str; 8] = [
    "structure",
    "calculus",
    "measure",
    "morph",
    "quad",
    "flow",
    "catalog",
    "parser",
];

/// Run invariant suites against catalog entries.
#[derive(Args)]
pub struct VerifyArgs {
    /// Suite to run: all, structure, calculus, measure, morph, quad, flow,
    /// catalog, or parser.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Restrict to one catalog entry; defaults to every entry.
    #[arg(long)]
    pub catalog: Option<String>,
    /// Also write the check table to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// One verified identity: what was measured, the threshold it was held
/// to, and where the worst residual occurred.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub suite: String,
    pub entry: String,
    pub check: String,
    pub pass: bool,
    pub measured: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckOutcome {
    fn line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        format!(
            "{status}  {entry}  {suite}/{check}  measured {measured:.3e}  threshold {threshold:.1e}",
            entry = self.entry,
            suite = self.suite,
            check = self.check,
            measured = self.measured,
            threshold = self.threshold,
        )
    }
}

/// Residual-style row: passes when the measured value stays at or below
/// the threshold.
fn residual_row(
    suite: &str,
    entry: &CatalogEntry,
    check: &str,
    threshold: f64,
    measured: f64,
    worst_point: Option<Vec<f64>>,
) -> CheckOutcome {
    CheckOutcome {
        suite: suite.to_string(),
        entry: entry.name.clone(),
        check: check.to_string(),
        pass: measured <= threshold,
        measured,
        threshold,
        worst_point,
        note: None,
    }
}

/// Max of `|f(p)|` over the points together with the attaining point.
fn max_over_points(
    points: &[Vec<f64>],
    f: impl Fn(&[f64]) -> GeoResult<f64>,
) -> GeoResult<(f64, Option<Vec<f64>>)> {
    let mut measured = 0.0f64;
    let mut worst = None;
    for p in points {
        let r = f(p)?.abs();
        if r >= measured {
            measured = r;
            worst = Some(p.clone());
        }
    }
    Ok((measured, worst))
}

fn pool(entry: &CatalogEntry, names: &[&str]) -> GeoResult<Vec<ScalarField>> {
    names
        .iter()
        .map(|name| entry.function(name).cloned())
        .collect()
}

/// A matrix field with non-constant diagonal and an off-diagonal band,
/// generic enough to exercise the adjoint identities.
fn generic_matrix(n: usize) -> GeoResult<MatrixField> {
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        format!("x{} + {}", i + 1, i + 2)
                    } else if j == (i + 1) % n {
                        String::from("1")
                    } else {
                        String::from("0")
                    }
                })
                .collect()
        })
        .collect();
    MatrixField::from_exprs(&rows)
}

fn structure_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let points = entry.chart.probes();
    let mut rows = Vec::new();

    let nd = b.check_nondegenerate(&points, TOL_FLAG)?;
    rows.push(CheckOutcome {
        suite: String::from("structure"),
        entry: entry.name.clone(),
        check: String::from("nondegenerate"),
        pass: nd.pass,
        measured: nd.min_abs_det,
        threshold: TOL_FLAG,
        worst_point: Some(nd.worst_point),
        note: Some(String::from("minimum |det| must exceed the threshold")),
    });

    let sym = b.sym_part();
    let skew = b.skew_part();
    let (measured, worst) = max_over_points(&points, |p| {
        let m = b.matrix().eval(p)?;
        let s = sym.matrix().eval(p)?;
        let k = skew.matrix().eval(p)?;
        Ok((s + k - m).amax())
    })?;
    rows.push(residual_row("structure", entry, "parts-recombine", TOL_ALGEBRAIC, measured, worst));

    let opp = b.opposite();
    let (measured, worst) = max_over_points(&points, |p| {
        let m = b.matrix().eval(p)?;
        let o = opp.matrix().eval(p)?;
        Ok((o - m.transpose()).amax())
    })?;
    rows.push(residual_row("structure", entry, "opposite-transpose", TOL_ALGEBRAIC, measured, worst));

    let a = generic_matrix(entry.dimension)?;
    let left = b.adjoint_left(&a)?;
    let right = b.adjoint_right(&a)?;
    let (measured, worst) = max_over_points(&points, |p| {
        let m = b.matrix().eval(p)?;
        let av = a.eval(p)?;
        let lv = left.eval(p)?;
        Ok((lv.transpose() * &m - &m * av).amax())
    })?;
    rows.push(residual_row("structure", entry, "adjoint-left-defining", TOL_ALGEBRAIC, measured, worst));

    let (measured, worst) = max_over_points(&points, |p| {
        let m = b.matrix().eval(p)?;
        let av = a.eval(p)?;
        let rv = right.eval(p)?;
        Ok((av.transpose() * &m - &m * rv).amax())
    })?;
    rows.push(residual_row("structure", entry, "adjoint-right-defining", TOL_ALGEBRAIC, measured, worst));

    let back = b.adjoint_right(&left)?;
    let (measured, worst) = max_over_points(&points, |p| {
        Ok((back.eval(p)? - a.eval(p)?).amax())
    })?;
    rows.push(residual_row("structure", entry, "adjoint-involution", TOL_ALGEBRAIC, measured, worst));

    Ok(rows)
}

fn calculus_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let n = entry.dimension;
    let points = entry.chart.probes();
    let functions = pool(entry, &["x1", "sumsq", "poly", "osc"])?;
    let mut rows = Vec::new();

    let run = |check: &str,
               threshold: f64,
               f: &dyn Fn(&[f64]) -> GeoResult<f64>|
     -> GeoResult<CheckOutcome> {
        let (measured, worst) = max_over_points(&points, f)?;
        Ok(residual_row("calculus", entry, check, threshold, measured, worst))
    };

    let left_grads: Vec<VectorField> = functions
        .iter()
        .map(|f| grad_left(b, f))
        .collect::<GeoResult<_>>()?;
    let right_grads: Vec<VectorField> = functions
        .iter()
        .map(|f| grad_right(b, f))
        .collect::<GeoResult<_>>()?;

    rows.push(run("left-defining-relation", TOL_ALGEBRAIC, &|p| {
        let m = b.matrix().eval(p)?;
        let mut worst = 0.0f64;
        for (f, grad) in functions.iter().zip(&left_grads) {
            let v = grad.eval(p)?;
            let df = f.gradient(p)?;
            for i in 0..n {
                let pairing: f64 = (0..n).map(|j| v[j] * m[(j, i)]).sum();
                worst = worst.max((pairing - df[i]).abs());
            }
        }
        Ok(worst)
    })?);

    rows.push(run("right-defining-relation", TOL_ALGEBRAIC, &|p| {
        let m = b.matrix().eval(p)?;
        let mut worst = 0.0f64;
        for (f, grad) in functions.iter().zip(&right_grads) {
            let v = grad.eval(p)?;
            let df = f.gradient(p)?;
            for i in 0..n {
                let pairing: f64 = (0..n).map(|j| m[(i, j)] * v[j]).sum();
                worst = worst.max((pairing - df[i]).abs());
            }
        }
        Ok(worst)
    })?);

    let pairs = [(1usize, 2usize), (2, 3), (0, 3)];
    let pair_with = |p: &[f64], u: &[f64], v: &[f64]| -> GeoResult<f64> {
        let m = b.matrix().eval(p)?;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                total += u[i] * m[(i, j)] * v[j];
            }
        }
        Ok(total)
    };

    let brackets: Vec<ScalarField> = pairs
        .iter()
        .map(|&(i, j)| bracket(b, &functions[i], &functions[j]))
        .collect::<GeoResult<_>>()?;

    rows.push(run("bracket-structure-pairing", TOL_ALGEBRAIC, &|p| {
        let mut worst = 0.0f64;
        for (&(i, j), br) in pairs.iter().zip(&brackets) {
            let lhs = br.eval(p)?;
            let rhs = pair_with(p, &left_grads[i].eval(p)?, &left_grads[j].eval(p)?)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    })?);

    rows.push(run("left-right-gradient-pairing", TOL_ALGEBRAIC, &|p| {
        let mut worst = 0.0f64;
        for &(i, j) in &pairs {
            let lhs = pair_with(p, &left_grads[i].eval(p)?, &left_grads[j].eval(p)?)?;
            let rhs = pair_with(p, &right_grads[i].eval(p)?, &right_grads[j].eval(p)?)?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    })?);

    let sym_skews: Vec<(ScalarField, ScalarField)> = pairs
        .iter()
        .map(|&(i, j)| {
            Ok((
                bracket_sym(b, &functions[i], &functions[j])?,
                bracket_skew(b, &functions[i], &functions[j])?,
            ))
        })
        .collect::<GeoResult<_>>()?;
    rows.push(run("sym-skew-recombine", TOL_ALGEBRAIC, &|p| {
        let mut worst = 0.0f64;
        for (br, (s, k)) in brackets.iter().zip(&sym_skews) {
            worst = worst.max((s.eval(p)? + k.eval(p)? - br.eval(p)?).abs());
        }
        Ok(worst)
    })?);

    let (f, g, h) = (&functions[1], &functions[2], &functions[3]);
    let leibniz_lhs = bracket(b, &f.mul(g)?, h)?;
    let leibniz_rhs = f
        .mul(&bracket(b, g, h)?)?
        .add(&g.mul(&bracket(b, f, h)?)?)?;
    rows.push(run("bracket-leibniz", TOL_ALGEBRAIC, &|p| {
        Ok(leibniz_lhs.eval(p)? - leibniz_rhs.eval(p)?)
    })?);

    let flags = b.flags();
    if flags.symmetric == Flag::Yes || flags.skew == Flag::Yes {
        let sign = if flags.symmetric == Flag::Yes { -1.0 } else { 1.0 };
        let check = if flags.symmetric == Flag::Yes {
            "symmetric-gradients-coincide"
        } else {
            "skew-gradients-opposite"
        };
        rows.push(run(check, TOL_ALGEBRAIC, &|p| {
            let mut worst = 0.0f64;
            for (l, r) in left_grads.iter().zip(&right_grads) {
                let lv = l.eval(p)?;
                let rv = r.eval(p)?;
                for i in 0..n {
                    worst = worst.max((lv[i] + sign * rv[i]).abs());
                }
            }
            Ok(worst)
        })?);
    }

    Ok(rows)
}

fn measure_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let mu = &entry.volume;
    let n = entry.dimension;
    let points = entry.chart.probes();
    let mut rows = Vec::new();

    let mut min_density = f64::INFINITY;
    let mut worst = None;
    for p in &points {
        let value = mu.density().eval(p)?;
        if value < min_density {
            min_density = value;
            worst = Some(p.clone());
        }
    }
    rows.push(CheckOutcome {
        suite: String::from("measure"),
        entry: entry.name.clone(),
        check: String::from("density-positive"),
        pass: min_density > 0.0,
        measured: min_density,
        threshold: 0.0,
        worst_point: worst,
        note: Some(String::from("minimum density must stay positive")),
    });

    let functions = pool(entry, &["sumsq", "poly", "osc"])?;
    let (sumsq, poly, osc) = (&functions[0], &functions[1], &functions[2]);

    let x = grad_left(b, sumsq)?;
    let lhs = divergence(mu, &x.scale_field(osc)?)?;
    let df_dot_x = ScalarField::sum(
        &(0..n)
            .map(|i| osc.partial_derivative(i)?.mul(x.component(i)))
            .collect::<GeoResult<Vec<_>>>()?,
    )?;
    let rhs = osc.mul(&divergence(mu, &x)?)?.add(&df_dot_x)?;
    let (measured, worst) = max_over_points(&points, |p| Ok(lhs.eval(p)? - rhs.eval(p)?))?;
    rows.push(residual_row("measure", entry, "divergence-product-rule", TOL_DIFFERENTIAL, measured, worst));

    let two_sym = bracket_sym(b, poly, osc)?.scale(2.0);
    for (label, side) in [("left", Chirality::Left), ("right", Chirality::Right)] {
        let lap = |f: &ScalarField| geocalc::laplacian(b, mu, f, side);
        let lhs = lap(&poly.mul(osc)?)?;
        let rhs = poly
            .mul(&lap(osc)?)?
            .add(&osc.mul(&lap(poly)?)?)?
            .add(&two_sym)?;
        let (measured, worst) = max_over_points(&points, |p| Ok(lhs.eval(p)? - rhs.eval(p)?))?;
        rows.push(residual_row(
            "measure",
            entry,
            &format!("laplace-product-rule-{label}"),
            TOL_DIFFERENTIAL,
            measured,
            worst,
        ));
    }

    let cubed = poly.mul(poly)?.mul(poly)?;
    let self_bracket = bracket(b, poly, poly)?;
    for (label, side) in [("left", Chirality::Left), ("right", Chirality::Right)] {
        let lap = |f: &ScalarField| geocalc::laplacian(b, mu, f, side);
        let lhs = lap(&cubed)?;
        let rhs = poly
            .mul(poly)?
            .scale(3.0)
            .mul(&lap(poly)?)?
            .add(&poly.scale(6.0).mul(&self_bracket)?)?;
        let (measured, worst) = max_over_points(&points, |p| Ok(lhs.eval(p)? - rhs.eval(p)?))?;
        rows.push(residual_row(
            "measure",
            entry,
            &format!("laplace-chain-rule-{label}"),
            TOL_DIFFERENTIAL,
            measured,
            worst,
        ));
    }

    if b.flags().skew == Flag::Yes {
        let lv = liouville_volume(b)?;
        let (measured, worst) = max_over_points(&points, |p| {
            let density = lv.form().density().eval(p)?.abs();
            let sqrt_det = b.matrix().eval(p)?.determinant().sqrt();
            Ok((density - sqrt_det) / sqrt_det.max(1.0))
        })?;
        rows.push(residual_row("measure", entry, "liouville-pfaffian-density", TOL_ALGEBRAIC, measured, worst));
        rows.push(residual_row(
            "measure",
            entry,
            "liouville-closed",
            TOL_FLAG,
            lv.max_closedness_defect(),
            None,
        ));
    }

    Ok(rows)
}

fn morph_report_row(
    entry: &CatalogEntry,
    check: String,
    report: &MorphReport,
) -> CheckOutcome {
    CheckOutcome {
        suite: String::from("morph"),
        entry: entry.name.clone(),
        check,
        pass: report.pass,
        measured: report.max_residual,
        threshold: report.tol,
        worst_point: Some(report.worst_point.clone()),
        note: None,
    }
}

fn morph_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let mu = &entry.volume;
    let points = entry.chart.probes();
    let functions = pool(entry, &["sumsq", "poly", "osc"])?;
    let (f, g, h) = (&functions[0], &functions[1], &functions[2]);
    let x = grad_left(b, g)?;
    let mut rows = Vec::new();

    for named in &entry.morphisms {
        let phi = &named.map;
        let checks = [
            ("geometromorphism", is_geometromorphism(phi, b, b, &points, TOL_DIFFERENTIAL)?),
            ("gradient-naturality", check_grad_naturality(phi, b, b, f, &points)?),
            ("bracket-naturality", check_bracket_naturality(phi, b, b, f, g, &points)?),
            ("divergence-naturality", check_div_naturality(phi, mu, mu, &x, &points)?),
            ("laplace-naturality", check_laplace_naturality(phi, b, mu, b, mu, h, &points)?),
        ];
        for (label, report) in checks {
            rows.push(morph_report_row(entry, format!("{}/{label}", named.name), &report));
        }
        if phi.has_inverse() {
            let defect = phi.inverse_roundtrip_defect(&points)?;
            rows.push(residual_row(
                "morph",
                entry,
                &format!("{}/inverse-roundtrip", named.name),
                TOL_DIFFERENTIAL,
                defect,
                None,
            ));
        }
    }

    let invertible: Vec<DiffeoMap> = entry
        .morphisms
        .iter()
        .filter(|m| m.map.has_inverse())
        .map(|m| m.map.clone())
        .collect();
    if invertible.len() > 1 {
        let report = check_group_property(&invertible, b, &points)?;
        rows.push(morph_report_row(entry, String::from("group-closure"), &report));
    }

    Ok(rows)
}

fn quad_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let mu = &entry.volume;
    let n = entry.dimension;
    let chart = &entry.chart;
    let order = if n >= 4 { 6 } else { 10 };
    let el_order = if n >= 4 { 8 } else { 12 };
    let functions = pool(entry, &["sumsq", "poly"])?;
    let (f, g) = (&functions[0], &functions[1]);
    let mut rows = Vec::new();

    let x = grad_left(b, g)?;
    let bulk = integrate_box(&divergence(mu, &x)?.mul(mu.density())?, chart, order)?;
    let flux = integrate_boundary_flux(mu, &x, &ScalarField::constant(n, 1.0), chart, order)?;
    rows.push(residual_row("quad", entry, "divergence-theorem", TOL_INTEGRAL, (bulk - flux).abs(), None));

    let left = green_left(b, mu, f, g, chart, order)?;
    rows.push(residual_row("quad", entry, "green-left", TOL_INTEGRAL, left.residual, None));
    let right = green_right(b, mu, f, g, chart, order)?;
    rows.push(residual_row("quad", entry, "green-right", TOL_INTEGRAL, right.residual, None));
    let combined = green_combined(b, mu, f, g, chart, order)?;
    rows.push(residual_row("quad", entry, "green-combined", TOL_INTEGRAL, combined.residual, None));

    if let Some(metric) = &entry.metric {
        let report = green_riemannian(b, metric, f, g, chart, order)?;
        rows.push(residual_row("quad", entry, "green-riemannian", TOL_INTEGRAL, report.residual, None));
        rows.push(residual_row("quad", entry, "riemannian-boundary-forms-agree", TOL_INTEGRAL, report.forms_gap, None));
    }

    let flags = b.flags();
    if flags.skew == Flag::Yes && liouville_volume(b)?.closed() {
        let factor = ScalarField::parse("exp(x1)", n)?;
        let report = symplectic_green(b, &factor, f, g, chart, order)?;
        let measured = report.residual_first.max(report.residual_second);
        rows.push(residual_row("quad", entry, "green-symplectic", TOL_INTEGRAL, measured, None));
    }

    if flags.skew == Flag::Yes {
        let energy = dirichlet_energy(b, mu, g, chart, order)?;
        rows.push(residual_row("quad", entry, "dirichlet-skew-vanishing", TOL_FLAG, energy.abs(), None));
    } else {
        let class = b.definiteness_probe(&entry.chart.probes(), &probe_directions(n, 16))?;
        if class == DefinitenessClass::Positive {
            let energy = dirichlet_energy(b, mu, g, chart, order)?;
            rows.push(CheckOutcome {
                suite: String::from("quad"),
                entry: entry.name.clone(),
                check: String::from("dirichlet-energy-positive"),
                pass: energy > 0.0,
                measured: energy,
                threshold: 0.0,
                worst_point: None,
                note: Some(String::from("energy of a non-constant function must be positive")),
            });
        }
    }

    let variation_text = chart
        .lo()
        .iter()
        .zip(chart.hi())
        .enumerate()
        .map(|(i, (lo, hi))| format!("(x{k} - ({lo}))*(({hi}) - x{k})", k = i + 1))
        .collect::<Vec<_>>()
        .join("*");
    let variation = ScalarField::parse(&variation_text, n)?;
    let report = el_residual(b, mu, g, &variation, chart, el_order, 1e-4)?;
    rows.push(residual_row("quad", entry, "euler-lagrange-residual", TOL_INTEGRAL, report.residual, None));

    Ok(rows)
}

fn flow_seed(entry: &CatalogEntry, f: &ScalarField) -> GeoResult<Vec<f64>> {
    let center = entry.chart.center();
    let grad = f.gradient(&center)?;
    if grad.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3 {
        return Ok(center);
    }
    for p in entry.chart.probes() {
        let grad = f.gradient(&p)?;
        if grad.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3 {
            return Ok(p);
        }
    }
    Ok(center)
}

fn flow_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let b = &entry.structure;
    let n = entry.dimension;
    let functions = pool(entry, &["sumsq", "osc"])?;
    let (generator, observable) = (&functions[0], &functions[1]);
    let seed = flow_seed(entry, generator)?;
    let mut rows = Vec::new();

    let pendulum = VectorField::from_exprs(&["x2", "0 - sin(x1)"])?;
    let start = [1.0, 0.0];
    let reference = integrate(&pendulum, &start, 1.0, 6400)?;
    let endpoint_error = |steps: usize| -> GeoResult<f64> {
        let run = integrate(&pendulum, &start, 1.0, steps)?;
        Ok(run
            .last_state()
            .iter()
            .zip(reference.last_state())
            .map(|(a, r)| (a - r).abs())
            .fold(0.0, f64::max))
    };
    let ratio = endpoint_error(100)? / endpoint_error(200)?;
    rows.push(CheckOutcome {
        suite: String::from("flow"),
        entry: entry.name.clone(),
        check: String::from("rk4-fourth-order"),
        pass: (12.0..=20.0).contains(&ratio),
        measured: ratio,
        threshold: 16.0,
        worst_point: None,
        note: Some(String::from(
            "entry-independent: halving the step must divide the endpoint error by about 16",
        )),
    });

    for (label, side) in [("left", Chirality::Left), ("right", Chirality::Right)] {
        let report =
            check_flow_bracket(b, generator, observable, &seed, FLOW_HORIZON, 2000, side)?;
        rows.push(CheckOutcome {
            suite: String::from("flow"),
            entry: entry.name.clone(),
            check: format!("flow-bracket-{label}"),
            pass: report.max_residual <= TOL_INTEGRAL,
            measured: report.max_residual,
            threshold: TOL_INTEGRAL,
            worst_point: None,
            note: Some(format!("worst at t = {:.4}", report.worst_time)),
        });
    }

    let x = grad_left(b, generator)?;
    let lebesgue = VolumeForm::lebesgue(&entry.chart);
    let div_x = divergence(&lebesgue, &x)?;
    let jacobian = flow_jacobian(&x, &seed, FLOW_HORIZON, 400)?;
    let determinants = jacobian.determinants();
    let trajectory = jacobian.trajectory();
    let h = trajectory.time(1) - trajectory.time(0);
    let mut measured = 0.0f64;
    let mut worst = None;
    for k in 1..trajectory.node_count() - 1 {
        let rate = (determinants[k + 1].ln() - determinants[k - 1].ln()) / (2.0 * h);
        let defect = (rate - div_x.eval(trajectory.state(k))?).abs();
        if defect >= measured {
            measured = defect;
            worst = Some(trajectory.state(k).to_vec());
        }
    }
    rows.push(residual_row("flow", entry, "jacobian-log-det-rate", LOG_DET_TOL, measured, worst));

    let flags = b.flags();
    if flags.skew == Flag::Yes {
        let seeds: Vec<Vec<f64>> = entry.chart.probes().into_iter().take(2).collect();
        let report = constant_of_motion_residual(b, generator, generator, &seeds, 0.4, 400)?;
        let measured = report
            .drift_first_along_second
            .max(report.drift_second_along_first);
        rows.push(residual_row("flow", entry, "self-conservation", TOL_INTEGRAL, measured, None));
    }

    let class = b.definiteness_probe(&entry.chart.probes(), &probe_directions(n, 16))?;
    match class {
        DefinitenessClass::Positive | DefinitenessClass::Negative => {
            let mut seeds = Vec::new();
            for p in entry.chart.probes() {
                let grad = generator.gradient(&p)?;
                if grad.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3 {
                    seeds.push(p);
                }
                if seeds.len() == 3 {
                    break;
                }
            }
            let report = periodicity_monotonicity_check(
                b,
                generator,
                &seeds,
                FLOW_HORIZON,
                200,
                Chirality::Left,
            )?;
            rows.push(CheckOutcome {
                suite: String::from("flow"),
                entry: entry.name.clone(),
                check: String::from("gradient-monotonicity"),
                pass: report.pass,
                measured: report.min_increment,
                threshold: 0.0,
                worst_point: report.worst_seed.clone(),
                note: Some(format!(
                    "{} along the left flow excludes periodic orbits through the seeds",
                    report.direction
                )),
            });
        }
        _ => {
            let seeds = vec![entry.chart.center()];
            let refused = matches!(
                periodicity_monotonicity_check(
                    b,
                    generator,
                    &seeds,
                    FLOW_HORIZON,
                    50,
                    Chirality::Left,
                ),
                Err(err) if err.to_string().contains("definite")
            );
            rows.push(CheckOutcome {
                suite: String::from("flow"),
                entry: entry.name.clone(),
                check: String::from("periodicity-check-refusal"),
                pass: refused,
                measured: if refused { 0.0 } else { 1.0 },
                threshold: 0.0,
                worst_point: None,
                note: Some(String::from(
                    "non-definite structures must refuse the monotonicity argument",
                )),
            });
        }
    }

    if n <= 2 {
        let report = transport_check(
            b,
            &entry.volume,
            generator,
            &entry.chart,
            0.02,
            200,
            4,
            Chirality::Left,
        )?;
        let preserving = report.derivative_analytic.abs() <= TOL_INTEGRAL;
        let (measured, note) = if preserving {
            (
                report.residual_abs,
                "volume-preserving flow: the analytic rate vanishes, so the absolute \
                 residual is compared",
            )
        } else {
            (report.residual_rel, "relative residual against the analytic rate")
        };
        let mut row = residual_row(
            "flow",
            entry,
            "transport-divergence-rate",
            TRANSPORT_REL_TOL,
            measured,
            None,
        );
        row.note = Some(String::from(note));
        rows.push(row);
    }

    Ok(rows)
}

fn catalog_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let n = entry.dimension;
    let points = entry.chart.probes();
    let mut rows = Vec::new();

    let nd = entry.structure.check_nondegenerate(&points, TOL_FLAG)?;
    rows.push(CheckOutcome {
        suite: String::from("catalog"),
        entry: entry.name.clone(),
        check: String::from("entry-nondegenerate"),
        pass: nd.pass,
        measured: nd.min_abs_det,
        threshold: TOL_FLAG,
        worst_point: Some(nd.worst_point),
        note: Some(String::from("catalog guarantee on the default box")),
    });

    let mut required: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    required.extend(["sumsq", "poly", "osc", "bump"].map(String::from));
    let missing: Vec<&String> = required
        .iter()
        .filter(|name| entry.function(name).is_err())
        .collect();
    rows.push(CheckOutcome {
        suite: String::from("catalog"),
        entry: entry.name.clone(),
        check: String::from("function-pool-complete"),
        pass: missing.is_empty(),
        measured: missing.len() as f64,
        threshold: 0.0,
        worst_point: None,
        note: Some(String::from("coordinates, sumsq, poly, osc, and bump must exist")),
    });

    let invertible: Vec<&DiffeoMap> = entry
        .morphisms
        .iter()
        .filter(|m| m.map.has_inverse())
        .map(|m| &m.map)
        .collect();
    let mut defect = 0.0f64;
    for map in &invertible {
        defect = defect.max(map.inverse_roundtrip_defect(&points)?);
    }
    rows.push(residual_row(
        "catalog",
        entry,
        "morphism-inverse-roundtrip",
        TOL_DIFFERENTIAL,
        defect,
        None,
    ));

    let bump = entry.function("bump")?;
    let center = entry.chart.center();
    let value_defect = (bump.eval(&center)? - 1.0).abs();
    let grad_defect = bump
        .gradient(&center)?
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    rows.push(residual_row(
        "catalog",
        entry,
        "bump-normalized-critical-center",
        TOL_ALGEBRAIC,
        value_defect.max(grad_defect),
        Some(center),
    ));

    Ok(rows)
}

fn fd_gradient(f: &ScalarField, p: &[f64], h: f64) -> GeoResult<Vec<f64>> {
    let mut grad = Vec::with_capacity(p.len());
    for i in 0..p.len() {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[i] += h;
        lo[i] -= h;
        grad.push((f.eval(&hi)? - f.eval(&lo)?) / (2.0 * h));
    }
    Ok(grad)
}

fn fd_hessian_entry(f: &ScalarField, p: &[f64], i: usize, j: usize, h: f64) -> GeoResult<f64> {
    if i == j {
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[i] += h;
        lo[i] -= h;
        Ok((f.eval(&hi)? - 2.0 * f.eval(p)? + f.eval(&lo)?) / (h * h))
    } else {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        let mut mp = p.to_vec();
        let mut mm = p.to_vec();
        pp[i] += h;
        pp[j] += h;
        pm[i] += h;
        pm[j] -= h;
        mp[i] -= h;
        mp[j] += h;
        mm[i] -= h;
        mm[j] -= h;
        Ok((f.eval(&pp)? - f.eval(&pm)? - f.eval(&mp)? + f.eval(&mm)?) / (4.0 * h * h))
    }
}

fn parser_suite(entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    let n = entry.dimension;
    let second = if n >= 2 { "x2" } else { "x1" };
    let corpus = [
        String::from("x1^2 + 3*x1"),
        format!("exp(x1)*sin({second})"),
        String::from("1/(1 + x1^2)"),
        format!("sqrt(1 + x1^2 + {second}^2)"),
        String::from("log(1 + x1^2)"),
        format!("tanh(x1*{second})"),
        String::from("atan(x1) - cos(x1)^2"),
        format!("x1^3 - x1*{second} + {second}^2"),
    ];
    let points: Vec<Vec<f64>> = entry.chart.probes().into_iter().take(4).collect();
    let mut measured = 0.0f64;
    let mut worst = None;
    for text in &corpus {
        let f = ScalarField::parse(text, n)?;
        for p in &points {
            let grad = f.gradient(p)?;
            let fd_grad = fd_gradient(&f, p, 1e-5)?;
            for i in 0..n {
                let defect = (grad[i] - fd_grad[i]).abs();
                if defect >= measured {
                    measured = defect;
                    worst = Some(p.clone());
                }
            }
            let hess = f.hessian(p)?;
            for i in 0..n {
                for j in 0..=i {
                    let defect = (hess[(i, j)] - fd_hessian_entry(&f, p, i, j, 1e-4)?).abs();
                    if defect >= measured {
                        measured = defect;
                        worst = Some(p.clone());
                    }
                }
            }
        }
    }
    let mut rows = vec![residual_row(
        "parser",
        entry,
        "jet-matches-finite-differences",
        FD_TOL,
        measured,
        worst,
    )];

    let oversized = format!("x{}", n + 1);
    let rejects = [
        "",
        "x1 +",
        "(x1",
        "x0",
        oversized.as_str(),
        "1..5",
        "sin()",
        "foo(x1)",
        "x1 & x2",
        "2**3",
    ];
    let accepted: Vec<&str> = rejects
        .iter()
        .copied()
        .filter(|text| ScalarField::parse(text, n).is_ok())
        .collect();
    rows.push(CheckOutcome {
        suite: String::from("parser"),
        entry: entry.name.clone(),
        check: String::from("rejection-corpus"),
        pass: accepted.is_empty(),
        measured: accepted.len() as f64,
        threshold: 0.0,
        worst_point: None,
        note: if accepted.is_empty() {
            Some(String::from("every malformed expression was rejected"))
        } else {
            Some(format!("wrongly accepted: {}", accepted.join(", ")))
        },
    });

    Ok(rows)
}

fn run_suite(suite: &str, entry: &CatalogEntry) -> GeoResult<Vec<CheckOutcome>> {
    match suite {
        "structure" => structure_suite(entry),
        "calculus" => calculus_suite(entry),
        "measure" => measure_suite(entry),
        "morph" => morph_suite(entry),
        "quad" => quad_suite(entry),
        "flow" => flow_suite(entry),
        "catalog" => catalog_suite(entry),
        "parser" => parser_suite(entry),
        other => unreachable!("suite {other} is validated before dispatch"),
    }
}

fn write_csv(path: &PathBuf, checks: &[CheckOutcome]) -> CliResult<()> {
    let fail =
        |err: csv::Error| CliError::schema(format!("cannot write CSV {}: {err}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(fail)?;
    writer
        .write_record(["suite", "entry", "check", "pass", "measured", "threshold", "worst_point", "note"])
        .map_err(fail)?;
    for check in checks {
        let worst = check
            .worst_point
            .as_ref()
            .map(|p| format!("{p:?}"))
            .unwrap_or_default();
        writer
            .write_record([
                check.suite.as_str(),
                check.entry.as_str(),
                check.check.as_str(),
                if check.pass { "true" } else { "false" },
                &format!("{}", check.measured),
                &format!("{}", check.threshold),
                &worst,
                check.note.as_deref().unwrap_or(""),
            ])
            .map_err(fail)?;
    }
    writer
        .flush()
        .map_err(|err| CliError::schema(format!("cannot write CSV {}: {err}", path.display())))
}

pub fn verify(args: &VerifyArgs) -> CliResult<Outcome> {
    let suites: Vec<&str> = if args.suite == "all" {
        SUITE_NAMES.to_vec()
    } else if let Some(&name) = SUITE_NAMES.iter().find(|s| **s == args.suite) {
        vec![name]
    } else {
        return Err(CliError::schema(format!(
            "suite must be all or one of {}, got {:?}",
            SUITE_NAMES.join(", "),
            args.suite
        )));
    };
    let entries: Vec<CatalogEntry> = match &args.catalog {
        Some(name) => vec![load_entry(name)?],
        None => catalog_names()
            .into_iter()
            .map(load_entry)
            .collect::<CliResult<_>>()?,
    };

    let mut checks: Vec<CheckOutcome> = Vec::new();
    for entry in &entries {
        for suite in &suites {
            let rows = run_suite(suite, entry).map_err(lib_error)?;
            for row in &rows {
                eprintln!("{}", row.line());
            }
            checks.extend(rows);
        }
    }

    if let Some(path) = &args.csv {
        write_csv(path, &checks)?;
    }

    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| {
            let at = c
                .worst_point
                .as_ref()
                .map(|p| format!(" at {p:?}"))
                .unwrap_or_default();
            format!(
                "verify {} {}/{}: measured {:.3e} against threshold {:.1e}{at}",
                c.entry, c.suite, c.check, c.measured, c.threshold
            )
        })
        .collect();
    let failed = failures.len();
    let entry_names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
    let report = json!({
        "suites": suites,
        "entries": entry_names,
        "total": checks.len(),
        "failed": failed,
        "pass": failed == 0,
        "checks": checks,
    });
    Ok(Outcome { report, failures })
}
