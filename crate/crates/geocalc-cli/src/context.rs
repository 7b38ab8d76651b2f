//! Shared plumbing for the command-line front end: error classification
//! into exit codes, flag parsing for points, boxes, and chiralities, and
//! resolution of catalog entries, functions, and volume forms.

use geocalc::catalog::{self, CatalogEntry};
use geocalc::{
    liouville_volume, riemannian_volume, ChartBox, Chirality, Error as GeoError, MatrixField,
    ScalarField, VolumeForm,
};

/// A failure with the exit code the contract assigns to it: schema and
/// usage problems exit with 2, numerical failures with 1.
#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numerical {
        message: String,
        worst: Option<Vec<f64>>,
    },
}

impl CliError {
    pub fn schema(message: impl Into<String>) -> Self {
        CliError::Schema(message.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// What a subcommand hands back to `main`: the JSON report plus one line
/// per failed check, each naming the identity and the worst point. An
/// empty failure list exits 0, a non-empty one exits 1.
pub struct Outcome {
    pub report: serde_json::Value,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn pass(report: serde_json::Value) -> Outcome {
        Outcome {
            report,
            failures: Vec::new(),
        }
    }
}

/// Maps library errors onto the exit-code contract: failures of the data
/// itself (syntax, dimensions, preconditions) are schema violations, while
/// failures of the numerics (singular solves, domain escapes, blow-ups)
/// are numerical.
pub fn lib_error(err: GeoError) -> CliError {
    match &err {
        GeoError::Domain { .. } => CliError::Numerical {
            message: err.to_string(),
            worst: None,
        },
        GeoError::NearSingular { point, .. } => CliError::Numerical {
            message: err.to_string(),
            worst: Some(point.clone()),
        },
        GeoError::NonFinite { state, .. } => CliError::Numerical {
            message: err.to_string(),
            worst: Some(state.clone()),
        },
        _ => CliError::Schema(err.to_string()),
    }
}

/// Parses a comma-separated list of floats, e.g. `0.5,0.5`.
pub fn parse_floats(text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::schema(format!("not a number: {part:?}")))
        })
        .collect()
}

/// Parses a box given as `lo1,hi1,lo2,hi2,...`.
pub fn parse_box(text: &str) -> CliResult<ChartBox> {
    let values = parse_floats(text)?;
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(CliError::schema(format!(
            "a box needs an even number of bounds (lo,hi per axis), got {}",
            values.len()
        )));
    }
    let pairs: Vec<(f64, f64)> = values.chunks(2).map(|c| (c[0], c[1])).collect();
    ChartBox::from_pairs(&pairs).map_err(lib_error)
}

/// The box given on the command line, or the entry's own chart box.
pub fn chart_or(entry: &CatalogEntry, text: &Option<String>) -> CliResult<ChartBox> {
    match text {
        Some(t) => {
            let chart = parse_box(t)?;
            if chart.dim() != entry.dimension {
                return Err(CliError::schema(format!(
                    "box is {}-dimensional but {} is {}-dimensional",
                    chart.dim(),
                    entry.name,
                    entry.dimension
                )));
            }
            Ok(chart)
        }
        None => Ok(entry.chart.clone()),
    }
}

/// Parses `left` or `right`.
pub fn parse_chirality(text: &str) -> CliResult<Chirality> {
    match text {
        "left" => Ok(Chirality::Left),
        "right" => Ok(Chirality::Right),
        other => Err(CliError::schema(format!(
            "chirality must be `left` or `right`, got {other:?}"
        ))),
    }
}

/// Loads a catalog entry by name, for example `shear2` or `euclidean(3)`.
pub fn load_entry(name: &str) -> CliResult<CatalogEntry> {
    catalog::get(name).map_err(lib_error)
}

/// Resolves a function reference: a sample-function name from the entry's
/// pool first, otherwise an expression in the chart coordinates.
pub fn resolve_function(entry: &CatalogEntry, text: &str) -> CliResult<ScalarField> {
    if let Ok(field) = entry.function(text) {
        return Ok(field.clone());
    }
    ScalarField::parse(text, entry.dimension).map_err(lib_error)
}

/// Resolves a volume specification: `default` (the entry's own volume),
/// `lebesgue`, `riemannian`, `liouville`, or `density:<expression>`.
pub fn resolve_volume(entry: &CatalogEntry, spec: &str) -> CliResult<VolumeForm> {
    match spec {
        "default" => Ok(entry.volume.clone()),
        "lebesgue" => Ok(VolumeForm::lebesgue(&entry.chart)),
        "riemannian" => {
            let g = entry.metric.as_ref().ok_or_else(|| {
                CliError::schema(format!(
                    "entry {} declares no reference metric, so there is no Riemannian volume",
                    entry.name
                ))
            })?;
            riemannian_volume(g).map_err(lib_error)
        }
        "liouville" => liouville_volume(&entry.structure)
            .map(|lv| lv.into_form())
            .map_err(lib_error),
        other => {
            if let Some(expr) = other.strip_prefix("density:") {
                let f = ScalarField::parse(expr, entry.dimension).map_err(lib_error)?;
                VolumeForm::from_density(&f, &entry.chart).map_err(lib_error)
            } else {
                Err(CliError::schema(format!(
                    "volume must be default, lebesgue, riemannian, liouville, \
                     or density:<expression>, got {other:?}"
                )))
            }
        }
    }
}

/// Parses a matrix of expressions given as semicolon-separated rows of
/// comma-separated entries, e.g. `0,1;0,0`.
pub fn parse_matrix(text: &str) -> CliResult<MatrixField> {
    let rows: Vec<Vec<String>> = text
        .split(';')
        .map(|row| row.split(',').map(|e| e.trim().to_string()).collect())
        .collect();
    MatrixField::from_exprs(&rows).map_err(lib_error)
}
