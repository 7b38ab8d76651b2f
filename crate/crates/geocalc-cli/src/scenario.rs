//! Scenario files: a versioned JSON document declaring one chart (box,
//! structure, optional metric, volume, named functions, morphisms) and a
//! list of tasks to run against it. The schema is strict: unknown fields
//! anywhere are a schema violation, tasks run in order, and the run
//! passes only if every task passes its tolerance.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Deserialize;
use serde_json::{json, Value};

use geocalc::catalog::CatalogEntry;
use geocalc::tolerances::{TOL_DIFFERENTIAL, TOL_FLAG, TOL_INTEGRAL};
use geocalc::{
    bracket, bracket_skew, bracket_sym, calculus, check_bracket_naturality, check_div_naturality,
    check_grad_naturality, check_laplace_naturality, dirichlet_energy, grad_left, grad_right,
    green_combined, green_left, green_riemannian, green_right, integrate, is_geometromorphism,
    laplace_left, laplace_right, liouville_volume, riemannian_volume, symplectic_green,
    transport_check, ChartBox, DiffeoMap, GeometricStructure, JetOrder, MatrixField, ScalarField,
    VolumeForm,
};

use crate::context::{lib_error, load_entry, parse_chirality, CliError, CliResult, Outcome};

const SCHEMA_VERSION: &str = "geocalc-scenario/1";

/// Execute a scenario file of tasks.
#[derive(Args)]
pub struct RunArgs {
    /// Path to the scenario JSON file.
    pub path: PathBuf,
    /// Also write one CSV row per task to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema: String,
    #[serde(default)]
    dimension: Option<usize>,
    #[serde(rename = "box", default)]
    chart: Option<ChartBox>,
    structure: StructureSpec,
    #[serde(default)]
    metric: Option<Vec<Vec<String>>>,
    #[serde(default)]
    volume: Option<VolumeSpec>,
    #[serde(default)]
    functions: BTreeMap<String, String>,
    #[serde(default)]
    morphisms: Vec<MorphismSpec>,
    tasks: Vec<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StructureSpec {
    #[serde(default)]
    catalog: Option<String>,
    #[serde(default)]
    matrix: Option<Vec<Vec<String>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VolumeSpec {
    kind: String,
    #[serde(default)]
    expr: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphismSpec {
    name: String,
    forward: Vec<String>,
    #[serde(default)]
    inverse: Option<Vec<String>>,
}

/// The chart a scenario declares, fully resolved.
struct Scene {
    label: String,
    dimension: usize,
    chart: ChartBox,
    structure: GeometricStructure,
    metric: Option<GeometricStructure>,
    volume: VolumeForm,
    functions: BTreeMap<String, ScalarField>,
    morphisms: Vec<(String, DiffeoMap)>,
    entry: Option<CatalogEntry>,
}

impl Scene {
    /// Function lookup order: scenario definitions, then the catalog pool
    /// when the structure came from the catalog, then the expression parser.
    fn function(&self, text: &str) -> CliResult<ScalarField> {
        if let Some(field) = self.functions.get(text) {
            return Ok(field.clone());
        }
        if let Some(entry) = &self.entry {
            if let Ok(field) = entry.function(text) {
                return Ok(field.clone());
            }
        }
        ScalarField::parse(text, self.dimension).map_err(lib_error)
    }

    fn task_chart(&self, chart: &Option<ChartBox>) -> CliResult<ChartBox> {
        match chart {
            Some(c) => {
                if c.dim() != self.dimension {
                    return Err(CliError::schema(format!(
                        "task box is {}-dimensional but the scenario is {}-dimensional",
                        c.dim(),
                        self.dimension
                    )));
                }
                Ok(c.clone())
            }
            None => Ok(self.chart.clone()),
        }
    }
}

fn structure_from_rows(rows: &[Vec<String>], chart: &ChartBox) -> CliResult<GeometricStructure> {
    let matrix = MatrixField::from_exprs(rows).map_err(lib_error)?;
    GeometricStructure::new(matrix, chart).map_err(lib_error)
}

fn build_scene(file: &ScenarioFile) -> CliResult<Scene> {
    let (entry, label) = match (&file.structure.catalog, &file.structure.matrix) {
        (Some(name), None) => {
            let entry = load_entry(name)?;
            let label = entry.name.clone();
            (Some(entry), label)
        }
        (None, Some(_)) => (None, String::from("matrix")),
        _ => {
            return Err(CliError::schema(String::from(
                "structure must set exactly one of `catalog` or `matrix`",
            )))
        }
    };

    let dimension = match (&entry, &file.structure.matrix) {
        (Some(entry), _) => entry.dimension,
        (None, Some(rows)) => rows.len(),
        _ => unreachable!("one branch holds after the check above"),
    };
    if let Some(declared) = file.dimension {
        if declared != dimension {
            return Err(CliError::schema(format!(
                "declared dimension {declared} does not match the structure's dimension {dimension}"
            )));
        }
    }

    let chart = match &file.chart {
        Some(chart) => {
            if chart.dim() != dimension {
                return Err(CliError::schema(format!(
                    "box is {}-dimensional but the structure is {dimension}-dimensional",
                    chart.dim()
                )));
            }
            chart.clone()
        }
        None => match &entry {
            Some(entry) => entry.chart.clone(),
            None => ChartBox::unit(dimension),
        },
    };

    let structure = match (&entry, &file.structure.matrix) {
        (Some(entry), _) => entry.structure.clone(),
        (None, Some(rows)) => structure_from_rows(rows, &chart)?,
        _ => unreachable!("one branch holds after the check above"),
    };

    let metric = match &file.metric {
        Some(rows) => Some(structure_from_rows(rows, &chart)?),
        None => entry.as_ref().and_then(|e| e.metric.clone()),
    };

    let volume = resolve_scene_volume(file, &entry, &structure, metric.as_ref(), &chart, dimension)?;

    let mut functions = BTreeMap::new();
    for (name, text) in &file.functions {
        let field = ScalarField::parse(text, dimension).map_err(|err| {
            CliError::schema(format!("function {name:?}: {err}"))
        })?;
        functions.insert(name.clone(), field);
    }

    let mut morphisms = Vec::new();
    for spec in &file.morphisms {
        if spec.forward.len() != dimension {
            return Err(CliError::schema(format!(
                "morphism {:?} has {} components in dimension {dimension}",
                spec.name,
                spec.forward.len()
            )));
        }
        let forward: Vec<&str> = spec.forward.iter().map(String::as_str).collect();
        let inverse: Option<Vec<&str>> = spec
            .inverse
            .as_ref()
            .map(|texts| texts.iter().map(String::as_str).collect());
        let map = DiffeoMap::from_exprs(&forward, inverse.as_deref()).map_err(|err| {
            CliError::schema(format!("morphism {:?}: {err}", spec.name))
        })?;
        morphisms.push((spec.name.clone(), map));
    }

    Ok(Scene {
        label,
        dimension,
        chart,
        structure,
        metric,
        volume,
        functions,
        morphisms,
        entry,
    })
}

fn resolve_scene_volume(
    file: &ScenarioFile,
    entry: &Option<CatalogEntry>,
    structure: &GeometricStructure,
    metric: Option<&GeometricStructure>,
    chart: &ChartBox,
    dimension: usize,
) -> CliResult<VolumeForm> {
    let default_volume = || match entry {
        Some(entry) => entry.volume.clone(),
        None => VolumeForm::lebesgue(chart),
    };
    let Some(spec) = &file.volume else {
        return Ok(default_volume());
    };
    if spec.expr.is_some() && spec.kind != "density" {
        return Err(CliError::schema(String::from(
            "volume `expr` only applies to kind \"density\"",
        )));
    }
    match spec.kind.as_str() {
        "default" => Ok(default_volume()),
        "lebesgue" => Ok(VolumeForm::lebesgue(chart)),
        "riemannian" => {
            let g = metric.ok_or_else(|| {
                CliError::schema(String::from(
                    "volume kind \"riemannian\" needs a metric in the scenario or its catalog entry",
                ))
            })?;
            riemannian_volume(g).map_err(lib_error)
        }
        "liouville" => liouville_volume(structure)
            .map(|lv| lv.into_form())
            .map_err(lib_error),
        "density" => {
            let text = spec.expr.as_ref().ok_or_else(|| {
                CliError::schema(String::from("volume kind \"density\" needs an `expr`"))
            })?;
            let f = ScalarField::parse(text, dimension).map_err(lib_error)?;
            VolumeForm::from_density(&f, chart).map_err(lib_error)
        }
        other => Err(CliError::schema(format!(
            "volume kind must be default, lebesgue, riemannian, liouville, or density, got {other:?}"
        ))),
    }
}

fn task_error(index: usize, err: serde_json::Error) -> CliError {
    CliError::schema(format!("task {index}: {err}"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalTask {
    #[serde(rename = "task")]
    _task: String,
    expr: String,
    at: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GradTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    at: Vec<f64>,
    #[serde(default)]
    expect_left: Option<Vec<f64>>,
    #[serde(default)]
    expect_right: Option<Vec<f64>>,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BracketTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(rename = "G")]
    g: String,
    at: Vec<f64>,
    #[serde(default)]
    expect: Option<f64>,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LaplaceTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    at: Vec<f64>,
    #[serde(default)]
    expect_left: Option<f64>,
    #[serde(default)]
    expect_right: Option<f64>,
    #[serde(default)]
    tolerance: Option<f64>,
}

fn default_identity() -> String {
    String::from("left")
}

fn default_order() -> usize {
    8
}

fn default_field() -> String {
    String::from("left")
}

fn default_steps() -> usize {
    1000
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GreenTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(default = "default_identity")]
    identity: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(rename = "G")]
    g: String,
    #[serde(default = "default_order")]
    order: usize,
    #[serde(rename = "box", default)]
    chart: Option<ChartBox>,
    #[serde(default)]
    factor: Option<String>,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirichletTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(default = "default_order")]
    order: usize,
    #[serde(rename = "box", default)]
    chart: Option<ChartBox>,
    #[serde(default)]
    nonnegative: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(default = "default_field")]
    field: String,
    seed: Vec<f64>,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default)]
    expect_endpoint: Option<Vec<f64>>,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TransportTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(default = "default_field")]
    field: String,
    #[serde(rename = "T")]
    t_final: f64,
    #[serde(default = "default_steps")]
    steps: usize,
    #[serde(default = "default_order")]
    order: usize,
    #[serde(rename = "box", default)]
    chart: Option<ChartBox>,
    #[serde(default)]
    tolerance: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MorphcheckTask {
    #[serde(rename = "task")]
    _task: String,
    #[serde(rename = "F")]
    f: String,
    #[serde(rename = "G")]
    g: String,
}

/// Runs one task; the returned row always carries `"pass"`, and each
/// failed expectation contributes one failure line.
fn run_task(scene: &Scene, index: usize, raw: &Value) -> CliResult<(Value, Vec<String>)> {
    let kind = raw
        .get("task")
        .and_then(Value::as_str)
        .ok_or_else(|| {
            CliError::schema(format!("task {index}: missing string field \"task\""))
        })?
        .to_string();
    let mut failures: Vec<String> = Vec::new();
    let mut row = serde_json::Map::new();
    row.insert("index".into(), json!(index));
    row.insert("task".into(), json!(kind));

    let check_vector = |failures: &mut Vec<String>,
                        row: &mut serde_json::Map<String, Value>,
                        what: &str,
                        got: &[f64],
                        expect: &Option<Vec<f64>>,
                        tolerance: f64|
     -> CliResult<()> {
        if let Some(expect) = expect {
            if expect.len() != got.len() {
                return Err(CliError::schema(format!(
                    "task {index}: expected {what} of length {}, computed length {}",
                    expect.len(),
                    got.len()
                )));
            }
            let defect = got
                .iter()
                .zip(expect)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            row.insert(format!("{what}_defect"), json!(defect));
            if defect > tolerance {
                failures.push(format!(
                    "task {index} ({what}): differs from expectation by {defect:.3e} \
                     (tolerance {tolerance:.1e})"
                ));
            }
        }
        Ok(())
    };
    let check_scalar = |failures: &mut Vec<String>,
                        row: &mut serde_json::Map<String, Value>,
                        what: &str,
                        got: f64,
                        expect: Option<f64>,
                        tolerance: f64| {
        if let Some(expect) = expect {
            let defect = (got - expect).abs();
            row.insert(format!("{what}_defect"), json!(defect));
            if defect > tolerance {
                failures.push(format!(
                    "task {index} ({what}): {got} differs from expected {expect} by \
                     {defect:.3e} (tolerance {tolerance:.1e})"
                ));
            }
        }
    };

    match kind.as_str() {
        "eval" => {
            let task: EvalTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let field = scene.function(&task.expr)?;
            if task.at.len() != scene.dimension {
                return Err(CliError::schema(format!(
                    "task {index}: point has {} coordinates in dimension {}",
                    task.at.len(),
                    scene.dimension
                )));
            }
            let jet = field.jet(&task.at, JetOrder::Hessian).map_err(lib_error)?;
            row.insert("value".into(), json!(jet.value()));
            row.insert("gradient".into(), json!(jet.gradient()));
        }
        "grad" => {
            let task: GradTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let tolerance = task.tolerance.unwrap_or(TOL_DIFFERENTIAL);
            let left = grad_left(&scene.structure, &f)
                .and_then(|v| v.eval(&task.at))
                .map_err(lib_error)?;
            let right = grad_right(&scene.structure, &f)
                .and_then(|v| v.eval(&task.at))
                .map_err(lib_error)?;
            row.insert("left".into(), json!(left));
            row.insert("right".into(), json!(right));
            check_vector(&mut failures, &mut row, "left", &left, &task.expect_left, tolerance)?;
            check_vector(&mut failures, &mut row, "right", &right, &task.expect_right, tolerance)?;
        }
        "bracket" => {
            let task: BracketTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let g = scene.function(&task.g)?;
            let tolerance = task.tolerance.unwrap_or(TOL_DIFFERENTIAL);
            let value = bracket(&scene.structure, &f, &g)
                .and_then(|b| b.eval(&task.at))
                .map_err(lib_error)?;
            let sym = bracket_sym(&scene.structure, &f, &g)
                .and_then(|b| b.eval(&task.at))
                .map_err(lib_error)?;
            let skew = bracket_skew(&scene.structure, &f, &g)
                .and_then(|b| b.eval(&task.at))
                .map_err(lib_error)?;
            row.insert("bracket".into(), json!(value));
            row.insert("sym".into(), json!(sym));
            row.insert("skew".into(), json!(skew));
            check_scalar(&mut failures, &mut row, "bracket", value, task.expect, tolerance);
        }
        "laplace" => {
            let task: LaplaceTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let tolerance = task.tolerance.unwrap_or(TOL_DIFFERENTIAL);
            let left = laplace_left(&scene.structure, &scene.volume, &f)
                .and_then(|l| l.eval(&task.at))
                .map_err(lib_error)?;
            let right = laplace_right(&scene.structure, &scene.volume, &f)
                .and_then(|l| l.eval(&task.at))
                .map_err(lib_error)?;
            row.insert("left".into(), json!(left));
            row.insert("right".into(), json!(right));
            check_scalar(&mut failures, &mut row, "left", left, task.expect_left, tolerance);
            check_scalar(&mut failures, &mut row, "right", right, task.expect_right, tolerance);
        }
        "green" => {
            let task: GreenTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let g = scene.function(&task.g)?;
            let chart = scene.task_chart(&task.chart)?;
            let b = &scene.structure;
            let tolerance = task.tolerance.unwrap_or(TOL_INTEGRAL);
            let (value, residual) = match task.identity.as_str() {
                "left" => {
                    let r = green_left(b, &scene.volume, &f, &g, &chart, task.order)
                        .map_err(lib_error)?;
                    (serde_json::to_value(&r).expect("finite"), r.residual)
                }
                "right" => {
                    let r = green_right(b, &scene.volume, &f, &g, &chart, task.order)
                        .map_err(lib_error)?;
                    (serde_json::to_value(&r).expect("finite"), r.residual)
                }
                "combined" => {
                    let r = green_combined(b, &scene.volume, &f, &g, &chart, task.order)
                        .map_err(lib_error)?;
                    (serde_json::to_value(&r).expect("finite"), r.residual)
                }
                "riemannian" => {
                    let metric = scene.metric.as_ref().ok_or_else(|| {
                        CliError::schema(format!(
                            "task {index}: the riemannian identity needs a metric"
                        ))
                    })?;
                    let r = green_riemannian(b, metric, &f, &g, &chart, task.order)
                        .map_err(lib_error)?;
                    (serde_json::to_value(&r).expect("finite"), r.residual)
                }
                "symplectic" => {
                    let factor = match &task.factor {
                        Some(text) => scene.function(text)?,
                        None => ScalarField::constant(scene.dimension, 1.0),
                    };
                    let r = symplectic_green(b, &factor, &f, &g, &chart, task.order)
                        .map_err(lib_error)?;
                    let residual = r.residual_first.max(r.residual_second);
                    (serde_json::to_value(&r).expect("finite"), residual)
                }
                other => {
                    return Err(CliError::schema(format!(
                        "task {index}: identity must be left, right, combined, riemannian, \
                         or symplectic, got {other:?}"
                    )))
                }
            };
            row.insert("identity".into(), json!(task.identity));
            row.insert("report".into(), value);
            row.insert("tolerance".into(), json!(tolerance));
            if residual > tolerance {
                failures.push(format!(
                    "task {index} (green-{}): residual {residual:.3e} exceeds {tolerance:.1e}",
                    task.identity
                ));
            }
        }
        "dirichlet" => {
            let task: DirichletTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let chart = scene.task_chart(&task.chart)?;
            let energy = dirichlet_energy(&scene.structure, &scene.volume, &f, &chart, task.order)
                .map_err(lib_error)?;
            row.insert("energy".into(), json!(energy));
            if task.nonnegative && energy < -TOL_FLAG {
                failures.push(format!(
                    "task {index} (dirichlet): energy {energy} is negative"
                ));
            }
        }
        "flow" => {
            let task: FlowTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let side = parse_chirality(&task.field)?;
            let x = calculus::gradient(&scene.structure, &f, side).map_err(lib_error)?;
            let trajectory =
                integrate(&x, &task.seed, task.t_final, task.steps).map_err(lib_error)?;
            let endpoint = trajectory.last_state().to_vec();
            row.insert("endpoint".into(), json!(endpoint));
            let tolerance = task.tolerance.unwrap_or(TOL_INTEGRAL);
            check_vector(
                &mut failures,
                &mut row,
                "endpoint",
                &endpoint,
                &task.expect_endpoint,
                tolerance,
            )?;
        }
        "transport" => {
            let task: TransportTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            let f = scene.function(&task.f)?;
            let side = parse_chirality(&task.field)?;
            let chart = scene.task_chart(&task.chart)?;
            let report = transport_check(
                &scene.structure,
                &scene.volume,
                &f,
                &chart,
                task.t_final,
                task.steps,
                task.order,
                side,
            )
            .map_err(lib_error)?;
            let tolerance = task.tolerance.unwrap_or(TOL_INTEGRAL);
            row.insert("report".into(), serde_json::to_value(&report).expect("finite"));
            row.insert("tolerance".into(), json!(tolerance));
            if report.residual_rel > tolerance {
                failures.push(format!(
                    "task {index} (transport): relative residual {:.3e} exceeds {tolerance:.1e}",
                    report.residual_rel
                ));
            }
        }
        "morphcheck" => {
            let task: MorphcheckTask =
                serde_json::from_value(raw.clone()).map_err(|e| task_error(index, e))?;
            if scene.morphisms.is_empty() {
                return Err(CliError::schema(format!(
                    "task {index}: the scenario declares no morphisms"
                )));
            }
            let f = scene.function(&task.f)?;
            let g = scene.function(&task.g)?;
            let x = grad_left(&scene.structure, &g).map_err(lib_error)?;
            let points = scene.chart.probes();
            let b = &scene.structure;
            let mu = &scene.volume;
            let mut maps = Vec::new();
            for (name, map) in &scene.morphisms {
                let checks = [
                    ("geometromorphism", is_geometromorphism(map, b, b, &points, TOL_DIFFERENTIAL)),
                    ("gradient", check_grad_naturality(map, b, b, &f, &points)),
                    ("bracket", check_bracket_naturality(map, b, b, &f, &g, &points)),
                    ("divergence", check_div_naturality(map, mu, mu, &x, &points)),
                    ("laplace", check_laplace_naturality(map, b, mu, b, mu, &f, &points)),
                ];
                let mut entry_row = serde_json::Map::new();
                entry_row.insert("name".into(), json!(name));
                for (label, result) in checks {
                    let report = result.map_err(lib_error)?;
                    if !report.pass {
                        failures.push(format!(
                            "task {index} (morphcheck {name}): {label} residual {:.3e} \
                             exceeds {:.1e} at {:?}",
                            report.max_residual, report.tol, report.worst_point
                        ));
                    }
                    entry_row.insert(
                        label.into(),
                        serde_json::to_value(&report).expect("finite"),
                    );
                }
                maps.push(Value::Object(entry_row));
            }
            row.insert("maps".into(), Value::Array(maps));
        }
        other => {
            return Err(CliError::schema(format!(
                "task {index}: unknown task kind {other:?}; known kinds: eval, grad, bracket, \
                 laplace, green, dirichlet, flow, transport, morphcheck"
            )))
        }
    }

    row.insert("pass".into(), json!(failures.is_empty()));
    Ok((Value::Object(row), failures))
}

fn write_csv(path: &PathBuf, rows: &[Value]) -> CliResult<()> {
    let fail =
        |err: csv::Error| CliError::schema(format!("cannot write CSV {}: {err}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(fail)?;
    writer.write_record(["index", "task", "pass"]).map_err(fail)?;
    for row in rows {
        let get = |key: &str| row.get(key).cloned().unwrap_or(Value::Null);
        writer
            .write_record([
                get("index").to_string(),
                get("task").as_str().unwrap_or_default().to_string(),
                get("pass").to_string(),
            ])
            .map_err(fail)?;
    }
    writer
        .flush()
        .map_err(|err| CliError::schema(format!("cannot write CSV {}: {err}", path.display())))
}

pub fn run(args: &RunArgs) -> CliResult<Outcome> {
    let text = std::fs::read_to_string(&args.path).map_err(|err| {
        CliError::schema(format!("cannot read scenario {}: {err}", args.path.display()))
    })?;
    let file: ScenarioFile = serde_json::from_str(&text)
        .map_err(|err| CliError::schema(format!("scenario does not match the schema: {err}")))?;
    if file.schema != SCHEMA_VERSION {
        return Err(CliError::schema(format!(
            "scenario schema is {:?} but this build expects {SCHEMA_VERSION:?}",
            file.schema
        )));
    }
    let scene = build_scene(&file)?;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (index, raw) in file.tasks.iter().enumerate() {
        let (row, mut task_failures) = run_task(&scene, index, raw)?;
        rows.push(row);
        failures.append(&mut task_failures);
    }

    if let Some(path) = &args.csv {
        write_csv(path, &rows)?;
    }

    let failed: usize = rows
        .iter()
        .filter(|r| r.get("pass") == Some(&Value::Bool(false)))
        .count();
    let report = json!({
        "scenario": args.path.display().to_string(),
        "schema": SCHEMA_VERSION,
        "structure": scene.label,
        "dimension": scene.dimension,
        "total": rows.len(),
        "failed": failed,
        "pass": failures.is_empty(),
        "tasks": rows,
    });
    Ok(Outcome { report, failures })
}
