//! Builtin charts: structures, metrics, default volumes, and the sample
//! functions and maps used by the verification suites and the CLI.
//!
//! Every entry is probed for non-degeneracy on its default box at
//! construction. Names accept an optional parameter in parentheses, for
//! example `euclidean(3)`, `canonical-symplectic(4)`, or `mixed(0.25)`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::ChartBox;
use crate::error::{Error, Result};
use crate::expr::Jet2;
use crate::fields::{DiffeoMap, FieldKernel, JetOrder, MatrixField, ScalarField};
use crate::measure::{liouville_volume, riemannian_volume, VolumeForm};
use crate::structure::GeometricStructure;

/// A sample function shipped with a catalog entry.
#[derive(Clone)]
pub struct NamedFunction {
    pub name: String,
    pub field: ScalarField,
}

/// A sample chart map shipped with a catalog entry.
#[derive(Clone)]
pub struct NamedMorphism {
    pub name: String,
    pub map: DiffeoMap,
}

/// A fully built chart: structure, optional reference metric, default
/// volume, and sample data.
#[derive(Clone)]
pub struct CatalogEntry {
    pub name: String,
    pub dimension: usize,
    pub chart: ChartBox,
    pub structure: GeometricStructure,
    pub metric: Option<GeometricStructure>,
    pub volume: VolumeForm,
    pub functions: Vec<NamedFunction>,
    pub morphisms: Vec<NamedMorphism>,
    pub notes: String,
}

impl CatalogEntry {
    /// The sample function with the given name.
    pub fn function(&self, name: &str) -> Result<&ScalarField> {
        self.functions
            .iter()
            .find(|f| f.name == name)
            .map(|f| &f.field)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "entry {} has no sample function named {name}",
                    self.name
                ))
            })
    }
}

/// Base names accepted by [`get`].
pub fn names() -> Vec<&'static str> {
    vec![
        "euclidean",
        "minkowski",
        "hyperbolic-half-plane",
        "canonical-symplectic",
        "exp-symplectic",
        "shear2",
        "mixed",
    ]
}

/// Builds a catalog entry from a name like `shear2` or `euclidean(3)`.
pub fn get(name: &str) -> Result<CatalogEntry> {
    let (base, param) = split_name(name)?;
    match base {
        "euclidean" => euclidean(dimension_param(param, 2)?),
        "minkowski" => minkowski(dimension_param(param, 2)?),
        "hyperbolic-half-plane" => {
            no_param(base, param)?;
            hyperbolic_half_plane()
        }
        "canonical-symplectic" => canonical_symplectic(dimension_param(param, 2)?),
        "exp-symplectic" => {
            no_param(base, param)?;
            exp_symplectic()
        }
        "shear2" => {
            no_param(base, param)?;
            shear2()
        }
        "mixed" => mixed(match param {
            None => 0.5,
            Some(text) => text.trim().parse().map_err(|_| {
                Error::InvalidArgument(format!("mixed parameter {text:?} is not a number"))
            })?,
        }),
        _ => Err(Error::InvalidArgument(format!(
            "unknown catalog entry {name:?}; known entries: {}",
            names().join(", ")
        ))),
    }
}

fn split_name(name: &str) -> Result<(&str, Option<&str>)> {
    match name.find('(') {
        None => Ok((name.trim(), None)),
        Some(open) => {
            let rest = &name[open + 1..];
            let close = rest.rfind(')').ok_or_else(|| {
                Error::InvalidArgument(format!("unclosed parameter list in {name:?}"))
            })?;
            if !rest[close + 1..].trim().is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "trailing text after parameter list in {name:?}"
                )));
            }
            Ok((name[..open].trim(), Some(&rest[..close])))
        }
    }
}

fn dimension_param(param: Option<&str>, default: usize) -> Result<usize> {
    match param {
        None => Ok(default),
        Some(text) => text.trim().parse().map_err(|_| {
            Error::InvalidArgument(format!("dimension parameter {text:?} is not an integer"))
        }),
    }
}

fn no_param(base: &str, param: Option<&str>) -> Result<()> {
    match param {
        None => Ok(()),
        Some(text) => Err(Error::InvalidArgument(format!(
            "catalog entry {base} takes no parameter, got {text:?}"
        ))),
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 0 || n > 8 {
        return Err(Error::InvalidArgument(format!(
            "chart dimension must be between 1 and 8, got {n}"
        )));
    }
    Ok(())
}

/// A smooth function that is `1` at `center`, `0` outside the ball of the
/// given radius, and has exact jets everywhere:
/// `exp(1 − 1/(1 − r²))` with `r` the scaled distance to the center.
pub fn bump(center: &[f64], radius: f64) -> Result<ScalarField> {
    if radius <= 0.0 || radius.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "bump radius must be positive, got {radius}"
        )));
    }
    if center.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "bump center must have at least one coordinate",
        )));
    }
    Ok(ScalarField::from_kernel(Arc::new(BumpKernel {
        center: center.to_vec(),
        radius,
    })))
}

struct BumpKernel {
    center: Vec<f64>,
    radius: f64,
}

/// Below this value of `w = 1 − r²` the bump value `exp(1 − 1/w)` has
/// already underflowed to zero, so the whole jet is zero.
const BUMP_UNDERFLOW_W: f64 = 1e-3;

impl FieldKernel for BumpKernel {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn max_order(&self) -> JetOrder {
        JetOrder::Hessian
    }

    fn jet(&self, point: &[f64], order: JetOrder) -> Result<Jet2> {
        let n = self.dim();
        let r2 = self.radius * self.radius;
        let u: f64 = point
            .iter()
            .zip(&self.center)
            .map(|(p, c)| (p - c) * (p - c))
            .sum::<f64>()
            / r2;
        let w = 1.0 - u;
        if w <= BUMP_UNDERFLOW_W {
            return Ok(Jet2::constant(n, 0.0));
        }
        let value = (1.0 - 1.0 / w).exp();
        if order == JetOrder::Value {
            return Ok(Jet2::constant(n, value));
        }
        // f = exp(g(u)) with g = 1 − 1/(1−u): g' = −(1−u)⁻²,
        // g'' = −2(1−u)⁻³; ∂ᵢu = 2(pᵢ−cᵢ)/R², ∂ᵢ∂ⱼu = 2δᵢⱼ/R².
        let g1 = -1.0 / (w * w);
        let g2 = -2.0 / (w * w * w);
        let du: Vec<f64> = point
            .iter()
            .zip(&self.center)
            .map(|(p, c)| 2.0 * (p - c) / r2)
            .collect();
        let grad: Vec<f64> = du.iter().map(|d| value * g1 * d).collect();
        if order == JetOrder::Gradient {
            return Ok(Jet2::from_parts(
                n,
                value,
                grad,
                vec![0.0; crate::expr::hess_len(n)],
            ));
        }
        let mut hess = vec![0.0; crate::expr::hess_len(n)];
        let mut idx = 0;
        for i in 0..n {
            for j in 0..=i {
                let mut h = value * (g1 * g1 + g2) * du[i] * du[j];
                if i == j {
                    h += value * g1 * 2.0 / r2;
                }
                hess[idx] = h;
                idx += 1;
            }
        }
        Ok(Jet2::from_parts(n, value, grad, hess))
    }
}

fn coordinate_pool(n: usize) -> Result<Vec<NamedFunction>> {
    (1..=n)
        .map(|i| {
            let name = format!("x{i}");
            Ok(NamedFunction {
                field: ScalarField::parse(&name, n)?,
                name,
            })
        })
        .collect()
}

/// The shared sample pool: coordinates, the squared norm, a polynomial,
/// a smooth oscillatory function, and an interior bump.
fn function_pool(chart: &ChartBox) -> Result<Vec<NamedFunction>> {
    let n = chart.dim();
    let mut pool = coordinate_pool(n)?;
    let sumsq = (1..=n)
        .map(|i| format!("x{i}^2"))
        .collect::<Vec<_>>()
        .join(" + ");
    pool.push(NamedFunction {
        name: String::from("sumsq"),
        field: ScalarField::parse(&sumsq, n)?,
    });
    let poly = if n >= 2 {
        "x1^3 - x1*x2 + x2^2".to_string()
    } else {
        "x1^3 - x1".to_string()
    };
    pool.push(NamedFunction {
        name: String::from("poly"),
        field: ScalarField::parse(&poly, n)?,
    });
    let osc = if n >= 2 {
        "exp(x1)*sin(x2)".to_string()
    } else {
        "exp(x1)".to_string()
    };
    pool.push(NamedFunction {
        name: String::from("osc"),
        field: ScalarField::parse(&osc, n)?,
    });
    let sides = chart.side_lengths();
    let radius = 0.3 * sides.iter().cloned().fold(f64::INFINITY, f64::min);
    pool.push(NamedFunction {
        name: String::from("bump"),
        field: bump(&chart.center(), radius)?,
    });
    Ok(pool)
}

fn translation(n: usize, offsets: &[f64]) -> Result<DiffeoMap> {
    let fmt = |sign: f64| -> Vec<String> {
        offsets
            .iter()
            .enumerate()
            .map(|(i, o)| format!("x{} + {}", i + 1, sign * o))
            .collect()
    };
    let forward = fmt(1.0);
    let inverse = fmt(-1.0);
    DiffeoMap::from_exprs(
        &forward.iter().map(String::as_str).collect::<Vec<_>>(),
        Some(&inverse.iter().map(String::as_str).collect::<Vec<_>>()),
    )
    .inspect(|m| debug_assert_eq!(m.dim(), n))
}

fn default_translation(n: usize) -> Result<NamedMorphism> {
    let mut offsets = vec![0.0; n];
    for (i, o) in offsets.iter_mut().enumerate() {
        *o = 0.1 * (i as f64 + 1.0);
    }
    Ok(NamedMorphism {
        name: String::from("translation"),
        map: translation(n, &offsets)?,
    })
}

fn rotation2() -> Result<NamedMorphism> {
    Ok(NamedMorphism {
        name: String::from("rotation"),
        map: DiffeoMap::from_exprs(
            &["0.6*x1 - 0.8*x2", "0.8*x1 + 0.6*x2"],
            Some(&["0.6*x1 + 0.8*x2", "0.6*x2 - 0.8*x1"]),
        )?,
    })
}

fn sl2_shear() -> Result<NamedMorphism> {
    Ok(NamedMorphism {
        name: String::from("sl2-shear"),
        map: DiffeoMap::from_exprs(&["x1 + x2", "x2"], Some(&["x1 - x2", "x2"]))?,
    })
}

fn hyperbolic_scaling() -> Result<NamedMorphism> {
    Ok(NamedMorphism {
        name: String::from("hyperbolic-scaling"),
        map: DiffeoMap::from_exprs(&["2*x1", "2*x2"], Some(&["0.5*x1", "0.5*x2"]))?,
    })
}

fn constant_structure(entries: DMatrix<f64>, chart: &ChartBox) -> Result<GeometricStructure> {
    GeometricStructure::new(MatrixField::constant(entries)?, chart)
}

fn euclidean(n: usize) -> Result<CatalogEntry> {
    check_dimension(n)?;
    let chart = ChartBox::unit(n);
    let structure = constant_structure(DMatrix::identity(n, n), &chart)?;
    let mut morphisms = vec![default_translation(n)?];
    if n == 2 {
        morphisms.push(rotation2()?);
    }
    Ok(CatalogEntry {
        name: format!("euclidean({n})"),
        dimension: n,
        volume: VolumeForm::lebesgue(&chart),
        functions: function_pool(&chart)?,
        metric: Some(structure.clone()),
        structure,
        morphisms,
        chart,
        notes: String::from(
            "identity structure; gradients coincide and the Laplacian is classical",
        ),
    })
}

fn minkowski(n: usize) -> Result<CatalogEntry> {
    check_dimension(n)?;
    if n < 2 {
        return Err(Error::InvalidArgument(String::from(
            "minkowski needs dimension at least 2",
        )));
    }
    let chart = ChartBox::unit(n);
    let mut m = DMatrix::identity(n, n);
    m[(0, 0)] = -1.0;
    let structure = constant_structure(m, &chart)?;
    let metric = constant_structure(DMatrix::identity(n, n), &chart)?;
    let mut morphisms = vec![default_translation(n)?];
    if n == 2 {
        let c = 0.5f64;
        let forward = [
            format!("{}*x1 + {}*x2", c.cosh(), c.sinh()),
            format!("{}*x1 + {}*x2", c.sinh(), c.cosh()),
        ];
        let inverse = [
            format!("{}*x1 - {}*x2", c.cosh(), c.sinh()),
            format!("{}*x2 - {}*x1", c.cosh(), c.sinh()),
        ];
        morphisms.push(NamedMorphism {
            name: String::from("boost"),
            map: DiffeoMap::from_exprs(
                &[forward[0].as_str(), forward[1].as_str()],
                Some(&[inverse[0].as_str(), inverse[1].as_str()]),
            )?,
        });
    }
    Ok(CatalogEntry {
        name: format!("minkowski({n})"),
        dimension: n,
        volume: VolumeForm::lebesgue(&chart),
        functions: function_pool(&chart)?,
        metric: Some(metric),
        structure,
        morphisms,
        chart,
        notes: String::from(
            "signature (-,+,...); the Laplace-like operator is the wave operator",
        ),
    })
}

fn hyperbolic_half_plane() -> Result<CatalogEntry> {
    let chart = ChartBox::from_pairs(&[(0.0, 1.0), (0.5, 2.0)]).unwrap();
    let g = GeometricStructure::new(
        MatrixField::from_exprs(&[
            vec!["1/x2^2".into(), "0".into()],
            vec!["0".into(), "1/x2^2".into()],
        ])?,
        &chart,
    )?;
    let volume = riemannian_volume(&g)?;
    let mut functions = function_pool(&chart)?;
    functions.push(NamedFunction {
        name: String::from("logx2"),
        field: ScalarField::parse("log(x2)", 2)?,
    });
    Ok(CatalogEntry {
        name: String::from("hyperbolic-half-plane"),
        dimension: 2,
        metric: Some(g.clone()),
        structure: g,
        volume,
        functions,
        morphisms: vec![
            NamedMorphism {
                name: String::from("translation"),
                map: DiffeoMap::from_exprs(
                    &["x1 + 0.3", "x2"],
                    Some(&["x1 - 0.3", "x2"]),
                )?,
            },
            hyperbolic_scaling()?,
        ],
        chart,
        notes: String::from(
            "Poincare half-plane metric (1/y^2)I on a box kept away from y=0",
        ),
    })
}

fn canonical_symplectic(n: usize) -> Result<CatalogEntry> {
    check_dimension(n)?;
    if n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "canonical-symplectic needs an even dimension, got {n}"
        )));
    }
    let chart = ChartBox::unit(n);
    let half = n / 2;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..half {
        m[(i, half + i)] = 1.0;
        m[(half + i, i)] = -1.0;
    }
    let structure = constant_structure(m, &chart)?;
    let volume = liouville_volume(&structure)?.into_form();
    let mut morphisms = vec![default_translation(n)?];
    if n == 2 {
        morphisms.push(sl2_shear()?);
        morphisms.push(rotation2()?);
    }
    Ok(CatalogEntry {
        name: format!("canonical-symplectic({n})"),
        dimension: n,
        volume,
        functions: function_pool(&chart)?,
        metric: None,
        structure,
        morphisms,
        chart,
        notes: String::from(
            "block structure [[0,I],[-I,0]] in (q_1..q_m, p_1..p_m) coordinates",
        ),
    })
}

fn exp_symplectic() -> Result<CatalogEntry> {
    let chart = ChartBox::unit(2);
    let structure = GeometricStructure::new(
        MatrixField::from_exprs(&[
            vec!["0".into(), "exp(x1)".into()],
            vec!["0 - exp(x1)".into(), "0".into()],
        ])?,
        &chart,
    )?;
    let volume = liouville_volume(&structure)?.into_form();
    Ok(CatalogEntry {
        name: String::from("exp-symplectic"),
        dimension: 2,
        volume,
        functions: function_pool(&chart)?,
        metric: None,
        structure,
        morphisms: vec![NamedMorphism {
            name: String::from("translation"),
            map: DiffeoMap::from_exprs(&["x1", "x2 + 0.2"], Some(&["x1", "x2 - 0.2"]))?,
        }],
        chart,
        notes: String::from("non-constant symplectic structure with density exp(x1)"),
    })
}

fn shear2() -> Result<CatalogEntry> {
    let chart = ChartBox::unit(2);
    let structure = constant_structure(
        DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]),
        &chart,
    )?;
    let metric = constant_structure(DMatrix::identity(2, 2), &chart)?;
    Ok(CatalogEntry {
        name: String::from("shear2"),
        dimension: 2,
        volume: VolumeForm::lebesgue(&chart),
        functions: function_pool(&chart)?,
        metric: Some(metric),
        structure,
        morphisms: vec![default_translation(2)?],
        chart,
        notes: String::from(
            "non-symmetric constant structure [[1,1],[0,1]]; left and right operators differ",
        ),
    })
}

fn mixed(epsilon: f64) -> Result<CatalogEntry> {
    if !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "mixed parameter must be finite, got {epsilon}"
        )));
    }
    let chart = ChartBox::unit(2);
    let structure = constant_structure(
        DMatrix::from_row_slice(2, 2, &[1.0, epsilon, -epsilon, 1.0]),
        &chart,
    )?;
    let metric = constant_structure(DMatrix::identity(2, 2), &chart)?;
    Ok(CatalogEntry {
        name: format!("mixed({epsilon})"),
        dimension: 2,
        volume: VolumeForm::lebesgue(&chart),
        functions: function_pool(&chart)?,
        metric: Some(metric),
        structure,
        morphisms: vec![default_translation(2)?],
        chart,
        notes: String::from(
            "I + eps*[[0,1],[-1,0]], interpolating between symmetric and skew behavior",
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::Flag;

    #[test]
    fn every_entry_builds_and_is_nondegenerate() {
        for name in [
            "euclidean",
            "euclidean(3)",
            "minkowski",
            "hyperbolic-half-plane",
            "canonical-symplectic",
            "canonical-symplectic(4)",
            "exp-symplectic",
            "shear2",
            "mixed",
            "mixed(0.25)",
        ] {
            let entry = get(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            let report = entry
                .structure
                .check_nondegenerate(&entry.chart.probes(), crate::tolerances::TOL_FLAG)
                .unwrap();
            assert!(report.pass, "{name} should be non-degenerate on its box");
            assert!(
                entry.functions.len() >= 5,
                "{name} should ship at least 5 sample functions"
            );
            assert!(!entry.morphisms.is_empty());
            for p in entry.chart.probes() {
                assert!(entry.volume.density().eval(&p).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn worked_entries_match_hand_matrices() {
        let e = get("euclidean").unwrap();
        assert_eq!(
            e.structure.matrix().eval(&[0.5, 0.5]).unwrap(),
            DMatrix::identity(2, 2)
        );
        assert_eq!(e.structure.flags().symmetric, Flag::Yes);

        let m = get("minkowski").unwrap();
        assert_eq!(
            m.structure.matrix().eval(&[0.5, 0.5]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])
        );

        let s = get("shear2").unwrap();
        assert_eq!(
            s.structure.matrix().eval(&[0.5, 0.5]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])
        );
        assert_eq!(s.structure.flags().symmetric, Flag::No);
        assert_eq!(s.structure.flags().constant, Flag::Yes);

        let c = get("canonical-symplectic(4)").unwrap();
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0,
            ],
        );
        assert_eq!(c.structure.matrix().eval(&[0.1; 4]).unwrap(), want);
        assert_eq!(c.structure.flags().skew, Flag::Yes);
        assert_eq!(c.volume.density().eval(&[0.1; 4]).unwrap(), 1.0);

        let x = get("exp-symplectic").unwrap();
        let p = [0.3, 0.9];
        assert_eq!(
            x.structure.matrix().eval(&p).unwrap(),
            DMatrix::from_row_slice(2, 2, &[0.0, p[0].exp(), -p[0].exp(), 0.0])
        );
        assert!((x.volume.density().eval(&p).unwrap() - p[0].exp()).abs() < 1e-12);

        let h = get("hyperbolic-half-plane").unwrap();
        let p = [0.5, 1.25];
        assert!(
            (h.volume.density().eval(&p).unwrap() - 1.0 / (p[1] * p[1])).abs() < 1e-12
        );
        assert!(h.function("logx2").is_ok());
    }

    #[test]
    fn unknown_names_and_bad_params_are_rejected() {
        assert!(matches!(get("torus"), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            get("euclidean(zero)"),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(get("euclidean(0)"), Err(Error::InvalidArgument(_))));
        assert!(matches!(get("euclidean(9)"), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            get("canonical-symplectic(3)"),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(get("shear2(1)"), Err(Error::InvalidArgument(_))));
        assert!(matches!(get("euclidean(2"), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn bump_matches_its_defining_properties() {
        let center = [0.5, 0.5];
        let f = bump(&center, 0.3).unwrap();
        assert_eq!(f.eval(&center).unwrap(), 1.0);
        assert_eq!(f.eval(&[0.8, 0.5]).unwrap(), 0.0);
        assert_eq!(f.eval(&[0.95, 0.95]).unwrap(), 0.0);
        let g = f.gradient(&center).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);

        // Interior jets match central finite differences.
        let p = [0.58, 0.43];
        let h = 1e-5;
        let grad = f.gradient(&p).unwrap();
        for i in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += h;
            lo[i] -= h;
            let fd = (f.eval(&hi).unwrap() - f.eval(&lo).unwrap()) / (2.0 * h);
            assert!(
                (grad[i] - fd).abs() < 1e-7,
                "bump gradient component {i}: jet {} vs fd {fd}",
                grad[i]
            );
        }
        let hess = f.hessian(&p).unwrap();
        for i in 0..2 {
            let mut hi = p;
            let mut lo = p;
            hi[i] += h;
            lo[i] -= h;
            let fd = (f.gradient(&hi).unwrap()[i] - f.gradient(&lo).unwrap()[i])
                / (2.0 * h);
            assert!(
                (hess[(i, i)] - fd).abs() < 1e-6,
                "bump Hessian diagonal {i}"
            );
        }

        assert!(bump(&center, 0.0).is_err());
        assert!(bump(&center, -1.0).is_err());
    }

    #[test]
    fn bump_vanishes_to_all_orders_at_the_support_boundary() {
        let f = bump(&[0.5, 0.5], 0.3).unwrap();
        for p in [[0.8, 0.5], [0.5, 0.2], [0.79999, 0.5]] {
            assert_eq!(f.eval(&p).unwrap(), 0.0);
            assert_eq!(f.gradient(&p).unwrap(), vec![0.0, 0.0]);
            let h = f.hessian(&p).unwrap();
            assert_eq!(h.abs().max(), 0.0);
        }
    }
}
