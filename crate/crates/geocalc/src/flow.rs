//! Fixed-step flows of vector fields and the dynamical checks built on
//! them: transport of the bracket along gradient flows, conservation of
//! generators, transported measures against the Laplace operators, and the
//! monotonicity argument that excludes periodic orbits of gradient flows
//! for definite structures.
//!
//! The integrator is the classical fourth-order Runge-Kutta scheme on a
//! uniform time grid. The flow Jacobian is integrated on the same grid by
//! the variational equation `M' = (DX . gamma) M`, with the Jacobian of the
//! field read off the field's jets.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::{bracket, grad_left, grad_right, gradient, Chirality};
use crate::domain::{probe_directions, ChartBox};
use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::measure::{laplacian, VolumeForm};
use crate::quad::{pairwise_sum, tensor_nodes};
use crate::structure::{DefinitenessClass, GeometricStructure};
use crate::tolerances::{SEED_GRADIENT_FLOOR, TOL_MONOTONE_SLACK};

/// A numerically integrated trajectory on a uniform time grid.
#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub integrator: String,
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Number of grid nodes, including the initial one.
    pub fn node_count(&self) -> usize {
        self.states.len()
    }

    /// State at grid node `i`.
    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i]
    }

    /// Time at grid node `i`.
    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    /// State at the final grid node.
    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one node")
    }
}

/// The trajectory of a flow together with the flow Jacobian
/// `M(t) = D Phi_t` at every grid node; `M(0)` is the identity.
#[derive(Clone, Debug)]
pub struct FlowJacobian {
    trajectory: Trajectory,
    matrices: Vec<DMatrix<f64>>,
}

impl FlowJacobian {
    pub fn trajectory(&self) -> &Trajectory {
        &self.trajectory
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn final_matrix(&self) -> &DMatrix<f64> {
        self.matrices.last().expect("at least one node")
    }

    /// Determinants of the flow Jacobian at every grid node.
    pub fn determinants(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| m.determinant()).collect()
    }
}

/// One classical Runge-Kutta step of size `h` for the system `y' = rhs(y)`.
fn rk4_step<F>(rhs: &F, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let k1 = rhs(y)?;
    let stage = |base: &[f64], k: &[f64], c: f64| -> Vec<f64> {
        base.iter().zip(k).map(|(b, k)| b + c * k).collect()
    };
    let k2 = rhs(&stage(y, &k1, 0.5 * h))?;
    let k3 = rhs(&stage(y, &k2, 0.5 * h))?;
    let k4 = rhs(&stage(y, &k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn validate_flow_args(dim: usize, start: &[f64], t_final: f64, steps: usize) -> Result<f64> {
    if start.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: start.len(),
        });
    }
    if steps == 0 {
        return Err(Error::InvalidArgument(String::from(
            "flow integration needs at least one step",
        )));
    }
    if !t_final.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "flow horizon must be finite, got {t_final}"
        )));
    }
    Ok(t_final / steps as f64)
}

/// Integrates the flow of a vector field from `start` over `[0, t_final]`
/// with the classical Runge-Kutta scheme on `steps` uniform steps. If the
/// state leaves the finite floating-point range, the error carries the last
/// valid node.
pub fn integrate(
    x: &VectorField,
    start: &[f64],
    t_final: f64,
    steps: usize,
) -> Result<Trajectory> {
    let h = validate_flow_args(x.dim(), start, t_final, steps)?;
    let rhs = |y: &[f64]| x.eval(y);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(start.to_vec());
    for k in 0..steps {
        let next = rk4_step(&rhs, &states[k], h)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: times[k],
                state: states[k].clone(),
            });
        }
        times.push((k + 1) as f64 * h);
        states.push(next);
    }
    Ok(Trajectory {
        integrator: String::from("rk4"),
        step: h,
        times,
        states,
    })
}

/// Integrates the flow together with its Jacobian: the augmented system
/// couples `p' = X(p)` with the variational equation `M' = DX(p) M`, so the
/// Jacobian inherits the fourth-order accuracy of the base scheme.
pub fn flow_jacobian(
    x: &VectorField,
    start: &[f64],
    t_final: f64,
    steps: usize,
) -> Result<FlowJacobian> {
    let n = x.dim();
    let h = validate_flow_args(n, start, t_final, steps)?;
    let rhs = |y: &[f64]| -> Result<Vec<f64>> {
        let point = &y[..n];
        let velocity = x.eval(point)?;
        let jac = x.jacobian(point)?;
        let mut out = Vec::with_capacity(n + n * n);
        out.extend_from_slice(&velocity);
        for col in 0..n {
            let m_col = DVector::from_column_slice(&y[n + col * n..n + (col + 1) * n]);
            let d_col = &jac * m_col;
            out.extend_from_slice(d_col.as_slice());
        }
        Ok(out)
    };

    let mut y = vec![0.0; n + n * n];
    y[..n].copy_from_slice(start);
    for i in 0..n {
        y[n + i * n + i] = 1.0;
    }
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut matrices = Vec::with_capacity(steps + 1);
    let record = |y: &[f64], states: &mut Vec<Vec<f64>>, matrices: &mut Vec<DMatrix<f64>>| {
        states.push(y[..n].to_vec());
        matrices.push(DMatrix::from_column_slice(n, n, &y[n..]));
    };
    times.push(0.0);
    record(&y, &mut states, &mut matrices);
    for k in 0..steps {
        let next = rk4_step(&rhs, &y, h)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: times[k],
                state: states[k].clone(),
            });
        }
        y = next;
        times.push((k + 1) as f64 * h);
        record(&y, &mut states, &mut matrices);
    }
    Ok(FlowJacobian {
        trajectory: Trajectory {
            integrator: String::from("rk4"),
            step: h,
            times,
            states,
        },
        matrices,
    })
}

/// Transport of an observable along a gradient flow: the centered time
/// difference of `f . gamma` against the bracket that generates it.
#[derive(Clone, Debug, Serialize)]
pub struct FlowBracketReport {
    pub chirality: Chirality,
    pub max_residual: f64,
    pub worst_time: f64,
    pub step: f64,
    pub interior_nodes: usize,
}

/// Along the left gradient flow of `generator`, `d/dt f . gamma` equals
/// `{f, generator} . gamma`; along the right gradient flow it equals
/// `{generator, f} . gamma`. Compares the centered difference of the
/// observable with the bracket at every interior grid node.
pub fn check_flow_bracket(
    b: &GeometricStructure,
    generator: &ScalarField,
    observable: &ScalarField,
    start: &[f64],
    t_final: f64,
    steps: usize,
    side: Chirality,
) -> Result<FlowBracketReport> {
    if steps < 2 {
        return Err(Error::InvalidArgument(String::from(
            "the centered difference needs at least two steps",
        )));
    }
    let field = gradient(b, generator, side)?;
    let rate = match side {
        Chirality::Left => bracket(b, observable, generator)?,
        Chirality::Right => bracket(b, generator, observable)?,
    };
    let traj = integrate(&field, start, t_final, steps)?;
    let h = traj.step;
    let mut max_residual = 0.0;
    let mut worst_time = 0.0;
    for i in 1..traj.node_count() - 1 {
        let ahead = observable.eval(traj.state(i + 1))?;
        let behind = observable.eval(traj.state(i - 1))?;
        let numeric = (ahead - behind) / (2.0 * h);
        let analytic = rate.eval(traj.state(i))?;
        let residual = (numeric - analytic).abs();
        if residual > max_residual {
            max_residual = residual;
            worst_time = traj.time(i);
        }
    }
    Ok(FlowBracketReport {
        chirality: side,
        max_residual,
        worst_time,
        step: h,
        interior_nodes: traj.node_count() - 2,
    })
}

/// Drifts of two generators along each other's gradient flows, with the
/// size of their bracket for context: when `{f, g}` vanishes, `f` is
/// constant along the left gradient flow of `g` and `g` is constant along
/// the right gradient flow of `f`.
#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    pub drift_first_along_second: f64,
    pub drift_second_along_first: f64,
    pub max_bracket: f64,
    pub seeds: usize,
}

/// Measures `max_t |f . gamma - f(seed)|` along the left gradient flow of
/// `g`, the matching drift of `g` along the right gradient flow of `f`,
/// and `max |{f, g}|` over the probe points of the structure's box.
pub fn constant_of_motion_residual(
    b: &GeometricStructure,
    f: &ScalarField,
    g: &ScalarField,
    seeds: &[Vec<f64>],
    t_final: f64,
    steps: usize,
) -> Result<ConservationReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "conservation check needs at least one seed",
        )));
    }
    let flow_of_g = grad_left(b, g)?;
    let flow_of_f = grad_right(b, f)?;
    let mut drift_first: f64 = 0.0;
    let mut drift_second: f64 = 0.0;
    for seed in seeds {
        let gamma = integrate(&flow_of_g, seed, t_final, steps)?;
        let f0 = f.eval(seed)?;
        for state in &gamma.states {
            drift_first = drift_first.max((f.eval(state)? - f0).abs());
        }
        let gamma = integrate(&flow_of_f, seed, t_final, steps)?;
        let g0 = g.eval(seed)?;
        for state in &gamma.states {
            drift_second = drift_second.max((g.eval(state)? - g0).abs());
        }
    }
    let pairing = bracket(b, f, g)?;
    let mut max_bracket: f64 = 0.0;
    for p in b.probe_box().probes() {
        max_bracket = max_bracket.max(pairing.eval(&p)?.abs());
    }
    Ok(ConservationReport {
        drift_first_along_second: drift_first,
        drift_second_along_first: drift_second,
        max_bracket,
        seeds: seeds.len(),
    })
}

/// Transported measure of a region under a gradient flow against the
/// Laplace operator of the generator: at time `t`,
/// `m(t) = int_U rho(Phi_t(p)) |det D Phi_t(p)| dp`, and
/// `dm/dt = int_U (Lap generator)(Phi_t(p)) rho(Phi_t(p)) |det D Phi_t(p)| dp`.
#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    pub chirality: Chirality,
    pub measure: f64,
    pub derivative_numeric: f64,
    pub derivative_analytic: f64,
    pub residual_abs: f64,
    pub residual_rel: f64,
    pub step: f64,
    pub order: usize,
}

/// Compares the centered time difference of the transported measure of
/// `region` at `t_final` with the transported integral of the Laplace
/// operator of the generator. The flow grid is extended one step past
/// `t_final` so the centered difference stays on grid nodes.
#[allow(clippy::too_many_arguments)]
pub fn transport_check(
    b: &GeometricStructure,
    mu: &VolumeForm,
    generator: &ScalarField,
    region: &ChartBox,
    t_final: f64,
    steps: usize,
    order: usize,
    side: Chirality,
) -> Result<TransportReport> {
    if t_final == 0.0 {
        return Err(Error::InvalidArgument(String::from(
            "transport check needs a nonzero horizon",
        )));
    }
    let field = gradient(b, generator, side)?;
    let lap = laplacian(b, mu, generator, side)?;
    let rho = mu.density();
    let nodes = tensor_nodes(region, order)?;
    let h = t_final / steps as f64;
    let at = steps;
    let contributions = nodes
        .par_iter()
        .map(|(point, weight)| -> Result<[f64; 4]> {
            let fj = flow_jacobian(&field, point, t_final + h, steps + 1)?;
            let dets = fj.determinants();
            let gamma = fj.trajectory();
            let density_term = |k: usize| -> Result<f64> {
                Ok(rho.eval(gamma.state(k))? * dets[k].abs() * weight)
            };
            let behind = density_term(at - 1)?;
            let here = density_term(at)?;
            let ahead = density_term(at + 1)?;
            let analytic = lap.eval(gamma.state(at))? * here;
            Ok([behind, here, ahead, analytic])
        })
        .collect::<Result<Vec<[f64; 4]>>>()?;
    let column =
        |i: usize| pairwise_sum(&contributions.iter().map(|c| c[i]).collect::<Vec<f64>>());
    let measure_behind = column(0);
    let measure = column(1);
    let measure_ahead = column(2);
    let derivative_analytic = column(3);
    let derivative_numeric = (measure_ahead - measure_behind) / (2.0 * h);
    let residual_abs = (derivative_numeric - derivative_analytic).abs();
    let residual_rel = if derivative_analytic != 0.0 {
        residual_abs / derivative_analytic.abs()
    } else {
        residual_abs
    };
    Ok(TransportReport {
        chirality: side,
        measure,
        derivative_numeric,
        derivative_analytic,
        residual_abs,
        residual_rel,
        step: h,
        order,
    })
}

/// Monotonicity of a generator along its own gradient flow. For a
/// structure whose quadratic form is definite, `d/dt F . gamma = {F, F}`
/// has a fixed sign away from critical points, so no trajectory through
/// the probed seeds can close up into a periodic orbit.
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub chirality: Chirality,
    pub direction: String,
    pub pass: bool,
    pub seeds: usize,
    pub min_increment: f64,
    pub min_bracket: f64,
    pub worst_seed: Option<Vec<f64>>,
}

/// Verifies that the generator is strictly monotone along its own gradient
/// flow from every seed, in the direction fixed by the definiteness of the
/// structure. Indefinite and skew structures are refused: their gradient
/// flows admit periodic orbits, so no monotonicity argument applies. Seeds
/// at critical points of the generator are refused.
pub fn periodicity_monotonicity_check(
    b: &GeometricStructure,
    generator: &ScalarField,
    seeds: &[Vec<f64>],
    t_final: f64,
    steps: usize,
    side: Chirality,
) -> Result<MonotonicityReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument(String::from(
            "periodicity check needs at least one seed",
        )));
    }
    if t_final <= 0.0 || t_final.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "periodicity check needs a positive horizon, got {t_final}"
        )));
    }
    let points = b.probe_box().probes();
    let directions = probe_directions(b.dim(), 16);
    let class = b.definiteness_probe(&points, &directions)?;
    let (sign, direction) = match class {
        DefinitenessClass::Positive => (1.0, "increasing"),
        DefinitenessClass::Negative => (-1.0, "decreasing"),
        DefinitenessClass::Indefinite | DefinitenessClass::DegenerateSample => {
            return Err(Error::Precondition(format!(
                "the quadratic form of the structure is not definite ({class:?}); \
                 its gradient flows admit periodic orbits, so monotonicity cannot \
                 exclude them"
            )));
        }
    };
    let field = gradient(b, generator, side)?;
    let rate = bracket(b, generator, generator)?;
    let mut pass = true;
    let mut min_increment = f64::INFINITY;
    let mut min_bracket = f64::INFINITY;
    let mut worst_seed = None;
    for seed in seeds {
        let grad = generator.gradient(seed)?;
        let grad_norm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
        if grad_norm <= SEED_GRADIENT_FLOOR {
            return Err(Error::Precondition(format!(
                "seed {seed:?} lies in the critical set of the generator \
                 (|gradient| = {grad_norm:.3e})"
            )));
        }
        let gamma = integrate(&field, seed, t_final, steps)?;
        let mut values = Vec::with_capacity(gamma.node_count());
        for state in &gamma.states {
            values.push(generator.eval(state)?);
            min_bracket = min_bracket.min(sign * rate.eval(state)?);
        }
        for pair in values.windows(2) {
            let increment = sign * (pair[1] - pair[0]);
            let slack = TOL_MONOTONE_SLACK * (1.0 + pair[0].abs());
            if increment <= -slack {
                pass = false;
                if worst_seed.is_none() {
                    worst_seed = Some(seed.clone());
                }
            }
            min_increment = min_increment.min(increment);
        }
    }
    Ok(MonotonicityReport {
        chirality: side,
        direction: String::from(direction),
        pass,
        seeds: seeds.len(),
        min_increment,
        min_bracket,
        worst_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::MatrixField;
    use nalgebra::DMatrix;

    fn structure_from(rows: &[&[f64]], chart: &ChartBox) -> GeometricStructure {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        GeometricStructure::new(MatrixField::constant(m).expect("square"), chart)
            .expect("constant structure")
    }

    fn shear(chart: &ChartBox) -> GeometricStructure {
        structure_from(&[&[1.0, 1.0], &[0.0, 1.0]], chart)
    }

    fn canonical(chart: &ChartBox) -> GeometricStructure {
        structure_from(&[&[0.0, 1.0], &[-1.0, 0.0]], chart)
    }

    #[test]
    fn exponential_flow_reaches_the_exact_endpoint() {
        let x = VectorField::from_exprs(&["x1", "x2"]).expect("field");
        let traj = integrate(&x, &[1.0, 0.0], 1.0, 1000).expect("flow");
        assert_eq!(traj.node_count(), 1001);
        let end = traj.last_state();
        assert!(
            (end[0] - std::f64::consts::E).abs() < 1e-9,
            "x(1): got {}, expected e",
            end[0]
        );
        assert!(end[1].abs() < 1e-12, "y(1): got {}", end[1]);
    }

    #[test]
    fn circular_flow_returns_to_its_start() {
        let x = VectorField::from_exprs(&["x2", "0 - x1"]).expect("field");
        let traj = integrate(&x, &[1.0, 0.0], 2.0 * std::f64::consts::PI, 1000).expect("flow");
        let end = traj.last_state();
        let defect = ((end[0] - 1.0).powi(2) + end[1].powi(2)).sqrt();
        assert!(
            defect < 1e-6,
            "period-one return defect after 2 pi: {defect:.3e}"
        );
    }

    #[test]
    fn shear_gradient_flow_matches_the_closed_form() {
        let unit2 = ChartBox::unit(2);
        let b = shear(&unit2);
        let f = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let field = grad_left(&b, &f).expect("gradient");
        let traj = integrate(&field, &[1.0, 0.0], 0.1, 1000).expect("flow");
        let end = traj.last_state();
        let ex = (0.2_f64).exp();
        assert!(
            (end[0] - ex).abs() < 1e-8,
            "x(0.1): got {}, expected {ex}",
            end[0]
        );
        assert!(
            (end[1] + 0.2 * ex).abs() < 1e-8,
            "y(0.1): got {}, expected {}",
            end[1],
            -0.2 * ex
        );
    }

    #[test]
    fn flow_jacobian_determinant_matches_the_divergence_integral() {
        let unit2 = ChartBox::unit(2);
        let b = shear(&unit2);
        let f = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let field = grad_left(&b, &f).expect("gradient");
        let fj = flow_jacobian(&field, &[1.0, 0.0], 0.1, 1000).expect("flow");
        assert_eq!(fj.matrices()[0], DMatrix::identity(2, 2));
        let det = fj.final_matrix().determinant();
        let expected = (0.4_f64).exp();
        assert!(
            (det - expected).abs() < 1e-7,
            "det D Phi_0.1: got {det}, expected {expected}"
        );
        let end = fj.trajectory().last_state();
        assert!(
            (end[0] - (0.2_f64).exp()).abs() < 1e-8,
            "augmented flow must reproduce the base trajectory"
        );
    }

    #[test]
    fn integrator_error_shrinks_at_fourth_order() {
        let x = VectorField::from_exprs(&["x2", "0 - sin(x1)"]).expect("field");
        let start = [1.0, 0.0];
        let reference = integrate(&x, &start, 1.0, 6400).expect("reference");
        let error_of = |steps: usize| -> f64 {
            let traj = integrate(&x, &start, 1.0, steps).expect("flow");
            traj.last_state()
                .iter()
                .zip(reference.last_state())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        let coarse = error_of(100);
        let fine = error_of(200);
        let ratio = coarse / fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "halving the step must divide the error by about 16: got {ratio}"
        );
    }

    #[test]
    fn log_determinant_rate_is_the_divergence_along_the_flow() {
        let x = VectorField::from_exprs(&["x1^2 * x2", "x2 - x1"]).expect("field");
        let div = ScalarField::parse("2*x1*x2 + 1", 2).expect("parse");
        let fj = flow_jacobian(&x, &[0.3, 0.4], 0.5, 500).expect("flow");
        let dets = fj.determinants();
        let gamma = fj.trajectory();
        let h = gamma.step;
        let mut max_residual: f64 = 0.0;
        for i in 1..gamma.node_count() - 1 {
            let numeric = (dets[i + 1].ln() - dets[i - 1].ln()) / (2.0 * h);
            let analytic = div.eval(gamma.state(i)).expect("divergence");
            max_residual = max_residual.max((numeric - analytic).abs());
        }
        assert!(
            max_residual < 1e-5,
            "log-determinant rate defect: {max_residual:.3e}"
        );
    }

    #[test]
    fn blowup_reports_the_last_valid_node() {
        let x = VectorField::from_exprs(&["x1^2"]).expect("field");
        let err = integrate(&x, &[1.0], 2.0, 100).expect_err("blow-up must be caught");
        match err {
            Error::NonFinite { t, state } => {
                assert!(t.is_finite() && t < 2.0, "failure time: {t}");
                assert!(
                    state.iter().all(|v| v.is_finite()),
                    "reported state must be the last finite one: {state:?}"
                );
            }
            other => panic!("expected a non-finite state error, got {other}"),
        }
    }

    #[test]
    fn flow_arguments_are_validated() {
        let x = VectorField::from_exprs(&["x1", "x2"]).expect("field");
        assert!(
            integrate(&x, &[1.0], 1.0, 10).is_err(),
            "seed dimension mismatch must be rejected"
        );
        assert!(
            integrate(&x, &[1.0, 0.0], 1.0, 0).is_err(),
            "zero steps must be rejected"
        );
        assert!(
            integrate(&x, &[1.0, 0.0], f64::INFINITY, 10).is_err(),
            "infinite horizon must be rejected"
        );
    }

    #[test]
    fn bracket_generates_the_time_derivative_along_both_flows() {
        let unit2 = ChartBox::unit(2);
        let b = shear(&unit2);
        let generator = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let observable = ScalarField::parse("x1", 2).expect("parse");
        for side in [Chirality::Left, Chirality::Right] {
            let report = check_flow_bracket(
                &b,
                &generator,
                &observable,
                &[1.0, 0.0],
                0.5,
                1000,
                side,
            )
            .expect("report");
            assert!(
                report.max_residual < 1e-6,
                "{} flow transport defect: {:.3e}",
                side.name(),
                report.max_residual
            );
        }
    }

    #[test]
    fn commuting_generators_are_conserved_along_each_other() {
        let unit2 = ChartBox::unit(2);
        let b = canonical(&unit2);
        let energy = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let report = constant_of_motion_residual(
            &b,
            &energy,
            &energy,
            &[vec![0.6, 0.3], vec![0.2, 0.7]],
            1.0,
            1000,
        )
        .expect("report");
        assert!(
            report.max_bracket < 1e-15,
            "a skew bracket of a function with itself vanishes: {:.3e}",
            report.max_bracket
        );
        assert!(
            report.drift_first_along_second < 1e-9,
            "energy drift along its own Hamiltonian flow: {:.3e}",
            report.drift_first_along_second
        );
        assert!(
            report.drift_second_along_first < 1e-9,
            "energy drift along the right flow: {:.3e}",
            report.drift_second_along_first
        );
    }

    #[test]
    fn transported_measure_matches_the_laplace_integral() {
        let unit2 = ChartBox::unit(2);
        let b = shear(&unit2);
        let mu = VolumeForm::lebesgue(&unit2);
        let generator = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let report = transport_check(
            &b,
            &mu,
            &generator,
            &unit2,
            0.1,
            200,
            4,
            Chirality::Left,
        )
        .expect("report");
        let expected = (0.4_f64).exp();
        assert!(
            (report.measure - expected).abs() < 1e-6,
            "transported measure: got {}, expected {expected}",
            report.measure
        );
        assert!(
            (report.derivative_analytic - 4.0 * expected).abs() < 1e-6,
            "Laplace integral: got {}, expected {}",
            report.derivative_analytic,
            4.0 * expected
        );
        assert!(
            report.residual_rel < 1e-3,
            "relative transport defect: {:.3e}",
            report.residual_rel
        );
    }

    #[test]
    fn gradient_flows_of_definite_structures_are_strictly_monotone() {
        let unit2 = ChartBox::unit(2);
        let seeds = vec![vec![0.4, 0.2], vec![0.7, 0.6], vec![0.1, 0.9]];
        let generator = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");

        let b = shear(&unit2);
        let report = periodicity_monotonicity_check(
            &b,
            &generator,
            &seeds,
            0.5,
            500,
            Chirality::Left,
        )
        .expect("report");
        assert!(report.pass, "shear gradient flow must be monotone");
        assert_eq!(report.direction, "increasing");
        assert!(
            report.min_increment > 0.0,
            "all increments must be strictly positive: {:.3e}",
            report.min_increment
        );
        assert!(
            report.min_bracket > 0.0,
            "the bracket stays positive along the flow: {:.3e}",
            report.min_bracket
        );

        let negative = structure_from(&[&[-2.0, 0.0], &[0.0, -1.0]], &unit2);
        let report = periodicity_monotonicity_check(
            &negative,
            &generator,
            &seeds,
            0.5,
            500,
            Chirality::Right,
        )
        .expect("report");
        assert!(report.pass, "negative-definite flow must be monotone");
        assert_eq!(report.direction, "decreasing");
    }

    #[test]
    fn periodicity_check_refuses_indefinite_structures_and_critical_seeds() {
        let unit2 = ChartBox::unit(2);
        let generator = ScalarField::parse("x1^2 + x2^2", 2).expect("parse");
        let seeds = vec![vec![0.4, 0.2]];

        let err = periodicity_monotonicity_check(
            &canonical(&unit2),
            &generator,
            &seeds,
            0.5,
            100,
            Chirality::Left,
        )
        .expect_err("skew structures must be refused");
        assert!(
            err.to_string().contains("definite"),
            "unexpected error: {err}"
        );

        let b = shear(&unit2);
        let err = periodicity_monotonicity_check(
            &b,
            &generator,
            &[vec![0.0, 0.0]],
            0.5,
            100,
            Chirality::Left,
        )
        .expect_err("critical seeds must be refused");
        assert!(
            err.to_string().contains("critical"),
            "unexpected error: {err}"
        );
    }
}
