//! One-shot subcommands: each resolves its inputs against the catalog,
//! runs one library computation, and packages the result as a JSON
//! report plus a list of failed checks for the exit code.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use geocalc::catalog::{names as catalog_names, CatalogEntry, NamedMorphism};
use geocalc::tolerances::{TOL_DIFFERENTIAL, TOL_INTEGRAL};
use geocalc::{
    bracket as bracket_of, bracket_skew, bracket_sym, calculus, check_bracket_naturality,
    check_div_naturality, check_grad_naturality, check_group_property, check_laplace_naturality,
    dirichlet_energy, flow_jacobian, grad_left, grad_right, green_combined, green_left,
    green_riemannian, green_right, integrate, is_geometromorphism, laplace_left, laplace_right,
    symplectic_green, transport_check, Flag, JetOrder, ScalarField, Trajectory,
};

use crate::context::{
    chart_or, lib_error, load_entry, parse_chirality, parse_floats, parse_matrix,
    resolve_function, resolve_volume, CliError, CliResult, Outcome,
};

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("reports contain only finite JSON values")
}

fn point_or_center(entry: &CatalogEntry, at: &Option<String>) -> CliResult<Vec<f64>> {
    match at {
        Some(text) => {
            let point = parse_floats(text)?;
            if point.len() != entry.dimension {
                return Err(CliError::schema(format!(
                    "point has {} coordinates but {} is {}-dimensional",
                    point.len(),
                    entry.name,
                    entry.dimension
                )));
            }
            Ok(point)
        }
        None => Ok(entry.chart.center()),
    }
}

/// Evaluate an expression and its jet at a point.
#[derive(Args)]
pub struct EvalArgs {
    /// Catalog entry whose function pool and dimension apply.
    #[arg(long)]
    pub structure: Option<String>,
    /// Chart dimension when no catalog entry is given.
    #[arg(long, conflicts_with = "structure")]
    pub dim: Option<usize>,
    /// Expression in x1..xn, or a pool-function name when --structure is given.
    #[arg(long)]
    pub expr: String,
    /// Evaluation point, comma separated.
    #[arg(long)]
    pub at: String,
}

pub fn eval(args: &EvalArgs) -> CliResult<Outcome> {
    let point = parse_floats(&args.at)?;
    let field = match &args.structure {
        Some(name) => {
            let entry = load_entry(name)?;
            if entry.dimension != point.len() {
                return Err(CliError::schema(format!(
                    "point has {} coordinates but {} is {}-dimensional",
                    point.len(),
                    entry.name,
                    entry.dimension
                )));
            }
            resolve_function(&entry, &args.expr)?
        }
        None => {
            let dim = args.dim.unwrap_or(point.len());
            ScalarField::parse(&args.expr, dim).map_err(lib_error)?
        }
    };
    if field.dim() != point.len() {
        return Err(CliError::schema(format!(
            "point has {} coordinates but the expression lives in dimension {}",
            point.len(),
            field.dim()
        )));
    }
    let jet = field.jet(&point, JetOrder::Hessian).map_err(lib_error)?;
    let n = point.len();
    let hessian: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| jet.hessian(i, j)).collect())
        .collect();
    Ok(Outcome::pass(json!({
        "expr": args.expr,
        "point": point,
        "value": jet.value(),
        "gradient": jet.gradient(),
        "hessian": hessian,
    })))
}

/// Left and right gradients of a function at a point.
#[derive(Args)]
pub struct GradArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Function to differentiate (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Evaluation point, comma separated; defaults to the chart center.
    #[arg(long)]
    pub at: Option<String>,
    /// Restrict to one chirality: left or right.
    #[arg(long)]
    pub field: Option<String>,
}

pub fn grad(args: &GradArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let point = point_or_center(&entry, &args.at)?;
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("F".into(), json!(args.f));
    report.insert("point".into(), json!(point));
    let sides: &[&str] = match args.field.as_deref() {
        None => &["left", "right"],
        Some(side) => {
            parse_chirality(side)?;
            std::slice::from_ref(if side == "left" { &"left" } else { &"right" })
        }
    };
    for side in sides {
        let grad_field = if *side == "left" {
            grad_left(&entry.structure, &f)
        } else {
            grad_right(&entry.structure, &f)
        }
        .map_err(lib_error)?;
        let value = grad_field.eval(&point).map_err(lib_error)?;
        report.insert((*side).into(), json!(value));
    }
    Ok(Outcome::pass(Value::Object(report)))
}

/// Bracket of two functions and its symmetric and skew parts at a point.
#[derive(Args)]
pub struct BracketArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// First argument (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Second argument (pool name or expression).
    #[arg(long = "G")]
    pub g: String,
    /// Evaluation point, comma separated; defaults to the chart center.
    #[arg(long)]
    pub at: Option<String>,
}

pub fn bracket(args: &BracketArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let g = resolve_function(&entry, &args.g)?;
    let point = point_or_center(&entry, &args.at)?;
    let b = &entry.structure;
    let full = bracket_of(b, &f, &g).map_err(lib_error)?;
    let sym = bracket_sym(b, &f, &g).map_err(lib_error)?;
    let skew = bracket_skew(b, &f, &g).map_err(lib_error)?;
    Ok(Outcome::pass(json!({
        "structure": entry.name,
        "F": args.f,
        "G": args.g,
        "point": point,
        "bracket": full.eval(&point).map_err(lib_error)?,
        "sym": sym.eval(&point).map_err(lib_error)?,
        "skew": skew.eval(&point).map_err(lib_error)?,
    })))
}

/// Left and right Laplace operators applied to a function at a point.
#[derive(Args)]
pub struct LaplaceArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Function to act on (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Evaluation point, comma separated; defaults to the chart center.
    #[arg(long)]
    pub at: Option<String>,
    /// Restrict to one chirality: left or right.
    #[arg(long)]
    pub field: Option<String>,
    /// Volume: default, lebesgue, riemannian, liouville, or density:<expr>.
    #[arg(long, default_value = "default")]
    pub volume: String,
}

pub fn laplace(args: &LaplaceArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let point = point_or_center(&entry, &args.at)?;
    let mu = resolve_volume(&entry, &args.volume)?;
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("F".into(), json!(args.f));
    report.insert("point".into(), json!(point));
    report.insert("volume".into(), json!(args.volume));
    let sides: &[&str] = match args.field.as_deref() {
        None => &["left", "right"],
        Some(side) => {
            parse_chirality(side)?;
            std::slice::from_ref(if side == "left" { &"left" } else { &"right" })
        }
    };
    for side in sides {
        let lap = if *side == "left" {
            laplace_left(&entry.structure, &mu, &f)
        } else {
            laplace_right(&entry.structure, &mu, &f)
        }
        .map_err(lib_error)?;
        report.insert((*side).into(), json!(lap.eval(&point).map_err(lib_error)?));
    }
    Ok(Outcome::pass(Value::Object(report)))
}

/// Left and right adjoints of a matrix field with respect to the structure.
#[derive(Args)]
pub struct AdjointArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Matrix of expressions: rows separated by `;`, entries by `,`.
    #[arg(long)]
    pub matrix: String,
    /// Evaluation point, comma separated; defaults to the chart center.
    #[arg(long)]
    pub at: Option<String>,
    /// Which adjoints to report: left, right, or both.
    #[arg(long, default_value = "both")]
    pub side: String,
}

pub fn adjoint(args: &AdjointArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let a = parse_matrix(&args.matrix)?;
    if a.dim() != entry.dimension {
        return Err(CliError::schema(format!(
            "matrix is {}x{} but {} is {}-dimensional",
            a.dim(),
            a.dim(),
            entry.name,
            entry.dimension
        )));
    }
    let point = point_or_center(&entry, &args.at)?;
    let n = entry.dimension;
    let rows = |field: &geocalc::MatrixField| -> CliResult<Vec<Vec<f64>>> {
        let m = field.eval(&point).map_err(lib_error)?;
        Ok((0..n)
            .map(|i| (0..n).map(|j| m[(i, j)]).collect())
            .collect())
    };
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("point".into(), json!(point));
    report.insert("matrix".into(), json!(rows(&a)?));
    if args.side == "left" || args.side == "both" {
        let left = entry.structure.adjoint_left(&a).map_err(lib_error)?;
        report.insert("adjoint_left".into(), json!(rows(&left)?));
    }
    if args.side == "right" || args.side == "both" {
        let right = entry.structure.adjoint_right(&a).map_err(lib_error)?;
        report.insert("adjoint_right".into(), json!(rows(&right)?));
    }
    if !matches!(args.side.as_str(), "left" | "right" | "both") {
        return Err(CliError::schema(format!(
            "side must be left, right, or both, got {:?}",
            args.side
        )));
    }
    Ok(Outcome::pass(Value::Object(report)))
}

/// Integrate the flow of a gradient field and report the endpoint.
#[derive(Args)]
pub struct FlowArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Generator function (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Which gradient drives the flow: left or right.
    #[arg(long, default_value = "left")]
    pub field: String,
    /// Initial point, comma separated.
    #[arg(long)]
    pub seed: String,
    /// Integration horizon.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t_final: f64,
    /// Number of fixed Runge-Kutta steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Also integrate the flow Jacobian and report its determinant.
    #[arg(long)]
    pub jacobian: bool,
    /// Include the full trajectory in the JSON report.
    #[arg(long)]
    pub trajectory: bool,
    /// Write the trajectory to this CSV file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn write_trajectory_csv(
    path: &PathBuf,
    trajectory: &Trajectory,
    determinants: Option<&[f64]>,
) -> CliResult<()> {
    let fail = |err: csv::Error| {
        CliError::schema(format!("cannot write CSV {}: {err}", path.display()))
    };
    let mut writer = csv::Writer::from_path(path).map_err(fail)?;
    let dim = trajectory.state(0).len();
    let mut header: Vec<String> = vec![String::from("t")];
    header.extend((1..=dim).map(|i| format!("x{i}")));
    if determinants.is_some() {
        header.push(String::from("jacobian_det"));
    }
    writer.write_record(&header).map_err(fail)?;
    for k in 0..trajectory.node_count() {
        let mut row = vec![format!("{}", trajectory.time(k))];
        row.extend(trajectory.state(k).iter().map(|v| format!("{v}")));
        if let Some(dets) = determinants {
            row.push(format!("{}", dets[k]));
        }
        writer.write_record(&row).map_err(fail)?;
    }
    writer
        .flush()
        .map_err(|err| CliError::schema(format!("cannot write CSV {}: {err}", path.display())))
}

pub fn flow(args: &FlowArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let side = parse_chirality(&args.field)?;
    let seed = parse_floats(&args.seed)?;
    if seed.len() != entry.dimension {
        return Err(CliError::schema(format!(
            "seed has {} coordinates but {} is {}-dimensional",
            seed.len(),
            entry.name,
            entry.dimension
        )));
    }
    let x = calculus::gradient(&entry.structure, &f, side).map_err(lib_error)?;
    let jacobian = args
        .jacobian
        .then(|| flow_jacobian(&x, &seed, args.t_final, args.steps))
        .transpose()
        .map_err(lib_error)?;
    let owned_trajectory = match &jacobian {
        Some(_) => None,
        None => Some(integrate(&x, &seed, args.t_final, args.steps).map_err(lib_error)?),
    };
    let trajectory = jacobian
        .as_ref()
        .map(|fj| fj.trajectory())
        .or(owned_trajectory.as_ref())
        .expect("one of the two integrations ran");
    let determinants = jacobian.as_ref().map(|fj| fj.determinants());
    let endpoint = trajectory.last_state().to_vec();
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("generator".into(), json!(args.f));
    report.insert("chirality".into(), json!(args.field));
    report.insert("seed".into(), json!(seed));
    report.insert("horizon".into(), json!(args.t_final));
    report.insert("steps".into(), json!(args.steps));
    report.insert("step".into(), json!(args.t_final / args.steps as f64));
    report.insert("endpoint".into(), json!(endpoint));
    report.insert(
        "generator_at_seed".into(),
        json!(f.eval(&seed).map_err(lib_error)?),
    );
    report.insert(
        "generator_at_endpoint".into(),
        json!(f.eval(&endpoint).map_err(lib_error)?),
    );
    if let Some(dets) = &determinants {
        report.insert(
            "jacobian_determinant".into(),
            json!(dets.last().copied().expect("trajectory has nodes")),
        );
    }
    if args.trajectory {
        report.insert("trajectory".into(), to_value(trajectory));
    }
    if let Some(path) = &args.csv {
        write_trajectory_csv(path, trajectory, determinants.as_deref())?;
        report.insert("csv".into(), json!(path.display().to_string()));
    }
    Ok(Outcome::pass(Value::Object(report)))
}

/// Compare the rate of transported volume against the divergence integral.
#[derive(Args)]
pub struct TransportArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Generator function (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Which gradient drives the flow: left or right.
    #[arg(long, default_value = "left")]
    pub field: String,
    /// Region to transport as lo1,hi1,lo2,hi2,...; defaults to the chart box.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub chart: Option<String>,
    /// Integration horizon.
    #[arg(long = "T", allow_hyphen_values = true)]
    pub t_final: f64,
    /// Number of fixed Runge-Kutta steps.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Gauss-Legendre order per axis.
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Volume: default, lebesgue, riemannian, liouville, or density:<expr>.
    #[arg(long, default_value = "default")]
    pub volume: String,
    /// Acceptance threshold on the relative residual.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn transport(args: &TransportArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let side = parse_chirality(&args.field)?;
    let region = chart_or(&entry, &args.chart)?;
    let mu = resolve_volume(&entry, &args.volume)?;
    let report = transport_check(
        &entry.structure,
        &mu,
        &f,
        &region,
        args.t_final,
        args.steps,
        args.order,
        side,
    )
    .map_err(lib_error)?;
    let tolerance = args.tolerance.unwrap_or(TOL_INTEGRAL);
    let pass = report.residual_rel <= tolerance;
    let failures = if pass {
        Vec::new()
    } else {
        vec![format!(
            "transport on {}: relative residual {:.3e} between d/dt vol and the divergence \
             integral exceeds {:.1e}",
            entry.name, report.residual_rel, tolerance
        )]
    };
    Ok(Outcome {
        report: json!({
            "structure": entry.name,
            "generator": args.f,
            "volume": args.volume,
            "box": to_value(&region),
            "tolerance": tolerance,
            "pass": pass,
            "report": to_value(&report),
        }),
        failures,
    })
}

/// Check one Green identity on a coordinate box.
#[derive(Args)]
pub struct GreenArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// First function (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Second function (pool name or expression).
    #[arg(long = "G")]
    pub g: String,
    /// Integration box as lo1,hi1,lo2,hi2,...; defaults to the chart box.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub chart: Option<String>,
    /// Gauss-Legendre order per axis.
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Identity: left, right, combined, riemannian, or symplectic.
    #[arg(long, default_value = "left")]
    pub identity: String,
    /// Volume: default, lebesgue, riemannian, liouville, or density:<expr>.
    #[arg(long, default_value = "default")]
    pub volume: String,
    /// Nowhere-vanishing conformal factor for the symplectic identity.
    #[arg(long)]
    pub factor: Option<String>,
    /// Acceptance threshold on the residual.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

pub fn green(args: &GreenArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let g = resolve_function(&entry, &args.g)?;
    let chart = chart_or(&entry, &args.chart)?;
    let b = &entry.structure;
    let fixed_volume = matches!(args.identity.as_str(), "riemannian" | "symplectic");
    if fixed_volume && args.volume != "default" {
        return Err(CliError::schema(format!(
            "the {} identity fixes its own volume; drop --volume {:?}",
            args.identity, args.volume
        )));
    }
    let (report_value, residual) = match args.identity.as_str() {
        "left" | "right" | "combined" => {
            let mu = resolve_volume(&entry, &args.volume)?;
            let report = match args.identity.as_str() {
                "left" => green_left(b, &mu, &f, &g, &chart, args.order),
                "right" => green_right(b, &mu, &f, &g, &chart, args.order),
                _ => green_combined(b, &mu, &f, &g, &chart, args.order),
            }
            .map_err(lib_error)?;
            (to_value(&report), report.residual)
        }
        "riemannian" => {
            let metric = entry.metric.as_ref().ok_or_else(|| {
                CliError::schema(format!(
                    "entry {} declares no reference metric, so the riemannian identity \
                     does not apply",
                    entry.name
                ))
            })?;
            let report =
                green_riemannian(b, metric, &f, &g, &chart, args.order).map_err(lib_error)?;
            (to_value(&report), report.residual)
        }
        "symplectic" => {
            let factor = match &args.factor {
                Some(text) => resolve_function(&entry, text)?,
                None => ScalarField::constant(entry.dimension, 1.0),
            };
            let report =
                symplectic_green(b, &factor, &f, &g, &chart, args.order).map_err(lib_error)?;
            let residual = report.residual_first.max(report.residual_second);
            (to_value(&report), residual)
        }
        other => {
            return Err(CliError::schema(format!(
                "identity must be left, right, combined, riemannian, or symplectic, got {other:?}"
            )))
        }
    };
    let tolerance = args.tolerance.unwrap_or(TOL_INTEGRAL);
    let pass = residual <= tolerance;
    let failures = if pass {
        Vec::new()
    } else {
        vec![format!(
            "green-{} on {}: residual {:.3e} exceeds {:.1e}",
            args.identity, entry.name, residual, tolerance
        )]
    };
    Ok(Outcome {
        report: json!({
            "structure": entry.name,
            "F": args.f,
            "G": args.g,
            "identity": args.identity,
            "volume": args.volume,
            "tolerance": tolerance,
            "pass": pass,
            "report": report_value,
        }),
        failures,
    })
}

/// Dirichlet energy of a function on a coordinate box.
#[derive(Args)]
pub struct DirichletArgs {
    /// Catalog entry providing the structure.
    #[arg(long)]
    pub structure: String,
    /// Function whose energy to compute (pool name or expression).
    #[arg(long = "F")]
    pub f: String,
    /// Integration box as lo1,hi1,lo2,hi2,...; defaults to the chart box.
    #[arg(long = "box", allow_hyphen_values = true)]
    pub chart: Option<String>,
    /// Gauss-Legendre order per axis.
    #[arg(long, default_value_t = 8)]
    pub order: usize,
    /// Volume: default, lebesgue, riemannian, liouville, or density:<expr>.
    #[arg(long, default_value = "default")]
    pub volume: String,
}

pub fn dirichlet(args: &DirichletArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let f = resolve_function(&entry, &args.f)?;
    let chart = chart_or(&entry, &args.chart)?;
    let mu = resolve_volume(&entry, &args.volume)?;
    let energy =
        dirichlet_energy(&entry.structure, &mu, &f, &chart, args.order).map_err(lib_error)?;
    let skew = entry.structure.flags().skew == Flag::Yes;
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("F".into(), json!(args.f));
    report.insert("box".into(), to_value(&chart));
    report.insert("order".into(), json!(args.order));
    report.insert("volume".into(), json!(args.volume));
    report.insert("energy".into(), json!(energy));
    report.insert("skew_structure".into(), json!(skew));
    if skew {
        report.insert(
            "note".into(),
            json!("the bracket is alternating for a skew structure, so this energy vanishes identically"),
        );
    }
    Ok(Outcome::pass(Value::Object(report)))
}

/// Naturality checks for the chart maps of a catalog entry.
#[derive(Args)]
pub struct MorphArgs {
    /// Catalog entry providing structure, volume, and chart maps.
    #[arg(long)]
    pub structure: String,
    /// Check only the named map; defaults to every map of the entry.
    #[arg(long)]
    pub map: Option<String>,
}

fn check_one_map(
    entry: &CatalogEntry,
    named: &NamedMorphism,
    points: &[Vec<f64>],
) -> CliResult<(Value, Vec<String>)> {
    let b = &entry.structure;
    let mu = &entry.volume;
    let f = entry.function("sumsq").map_err(lib_error)?;
    let g = entry.function("poly").map_err(lib_error)?;
    let h = entry.function("osc").map_err(lib_error)?;
    let x = grad_left(b, g).map_err(lib_error)?;
    let checks = [
        (
            "geometromorphism",
            is_geometromorphism(&named.map, b, b, points, TOL_DIFFERENTIAL),
        ),
        (
            "gradient",
            check_grad_naturality(&named.map, b, b, f, points),
        ),
        (
            "bracket",
            check_bracket_naturality(&named.map, b, b, f, g, points),
        ),
        (
            "divergence",
            check_div_naturality(&named.map, mu, mu, &x, points),
        ),
        (
            "laplace",
            check_laplace_naturality(&named.map, b, mu, b, mu, h, points),
        ),
    ];
    let mut report = serde_json::Map::new();
    let mut failures = Vec::new();
    report.insert("name".into(), json!(named.name));
    for (label, result) in checks {
        let check = result.map_err(lib_error)?;
        if !check.pass {
            failures.push(format!(
                "morphcheck {} on {}: {} naturality residual {:.3e} exceeds {:.1e} at {:?}",
                named.name, entry.name, label, check.max_residual, check.tol, check.worst_point
            ));
        }
        report.insert(label.into(), to_value(&check));
    }
    if named.map.has_inverse() {
        let defect = named
            .map
            .inverse_roundtrip_defect(points)
            .map_err(lib_error)?;
        report.insert("roundtrip_defect".into(), json!(defect));
        if defect > TOL_DIFFERENTIAL {
            failures.push(format!(
                "morphcheck {} on {}: inverse round-trip defect {:.3e} exceeds {:.1e}",
                named.name, entry.name, defect, TOL_DIFFERENTIAL
            ));
        }
    }
    Ok((Value::Object(report), failures))
}

pub fn morphcheck(args: &MorphArgs) -> CliResult<Outcome> {
    let entry = load_entry(&args.structure)?;
    let selected: Vec<&NamedMorphism> = match &args.map {
        Some(name) => {
            let found: Vec<&NamedMorphism> = entry
                .morphisms
                .iter()
                .filter(|m| &m.name == name)
                .collect();
            if found.is_empty() {
                let known: Vec<&str> = entry.morphisms.iter().map(|m| m.name.as_str()).collect();
                return Err(CliError::schema(format!(
                    "entry {} has no map named {:?}; known maps: {}",
                    entry.name,
                    name,
                    known.join(", ")
                )));
            }
            found
        }
        None => entry.morphisms.iter().collect(),
    };
    let points = entry.chart.probes();
    let mut maps = Vec::new();
    let mut failures = Vec::new();
    for named in &selected {
        let (value, mut map_failures) = check_one_map(&entry, named, &points)?;
        maps.push(value);
        failures.append(&mut map_failures);
    }
    let invertible: Vec<geocalc::DiffeoMap> = selected
        .iter()
        .filter(|m| m.map.has_inverse())
        .map(|m| m.map.clone())
        .collect();
    let group = if invertible.len() > 1 {
        let check = check_group_property(&invertible, &entry.structure, &points)
            .map_err(lib_error)?;
        if !check.pass {
            failures.push(format!(
                "morphcheck on {}: composition/inverse closure residual {:.3e} exceeds {:.1e} \
                 at {:?}",
                entry.name, check.max_residual, check.tol, check.worst_point
            ));
        }
        Some(to_value(&check))
    } else {
        None
    };
    let pass = failures.is_empty();
    let mut report = serde_json::Map::new();
    report.insert("structure".into(), json!(entry.name));
    report.insert("probes".into(), json!(points.len()));
    report.insert("maps".into(), Value::Array(maps));
    if let Some(group) = group {
        report.insert("group".into(), group);
    }
    report.insert("pass".into(), json!(pass));
    Ok(Outcome {
        report: Value::Object(report),
        failures,
    })
}

/// List the catalog, or describe one entry in full.
#[derive(Args)]
pub struct CatalogArgs {
    /// Entry to describe; omit to list all entries.
    pub name: Option<String>,
}

fn describe_entry(entry: &CatalogEntry) -> Value {
    let n = entry.dimension;
    let center = entry.chart.center();
    let rows_at_center = |field: &geocalc::MatrixField| -> Value {
        match field.eval(&center) {
            Ok(m) => {
                let rows: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| m[(i, j)]).collect())
                    .collect();
                json!(rows)
            }
            Err(_) => Value::Null,
        }
    };
    let functions: Vec<&str> = entry.functions.iter().map(|f| f.name.as_str()).collect();
    let morphisms: Vec<Value> = entry
        .morphisms
        .iter()
        .map(|m| json!({"name": m.name, "has_inverse": m.map.has_inverse()}))
        .collect();
    json!({
        "name": entry.name,
        "dimension": n,
        "box": to_value(&entry.chart),
        "flags": to_value(&entry.structure.flags()),
        "structure_at_center": rows_at_center(entry.structure.matrix()),
        "metric_at_center": entry
            .metric
            .as_ref()
            .map(|g| rows_at_center(g.matrix()))
            .unwrap_or(Value::Null),
        "volume_density_at_center": entry
            .volume
            .density()
            .eval(&center)
            .map(Value::from)
            .unwrap_or(Value::Null),
        "functions": functions,
        "morphisms": morphisms,
        "notes": entry.notes,
    })
}

pub fn catalog(args: &CatalogArgs) -> CliResult<Outcome> {
    match &args.name {
        Some(name) => {
            let entry = load_entry(name)?;
            Ok(Outcome::pass(describe_entry(&entry)))
        }
        None => {
            let mut entries = Vec::new();
            for base in catalog_names() {
                let entry = load_entry(base)?;
                entries.push(json!({
                    "name": base,
                    "dimension": entry.dimension,
                    "functions": entry.functions.len(),
                    "morphisms": entry.morphisms.len(),
                    "notes": entry.notes,
                }));
            }
            Ok(Outcome::pass(json!({ "entries": entries })))
        }
    }
}
