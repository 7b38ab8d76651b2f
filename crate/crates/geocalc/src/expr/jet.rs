//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value, a gradient of length `n`, and the lower
//! triangle of a symmetric Hessian packed into `n * (n + 1) / 2` slots.
//! Arithmetic on jets mirrors the corresponding `f64` arithmetic operation
//! for operation, so the value slot of a jet computation is bit-identical
//! to the plain evaluation of the same expression tree.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Index of entry `(i, j)` with `i >= j` in the packed lower triangle.
#[inline]
fn tri(i: usize, j: usize) -> usize {
    debug_assert!(i >= j);
    i * (i + 1) / 2 + j
}

/// Number of packed Hessian slots for dimension `n`.
#[inline]
pub(crate) fn hess_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Value, gradient, and symmetric Hessian of a scalar quantity at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    dim: usize,
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
}

impl Jet2 {
    /// Jet of the constant function `value`.
    pub fn constant(dim: usize, value: f64) -> Self {
        Jet2 {
            dim,
            value,
            grad: vec![0.0; dim],
            hess: vec![0.0; hess_len(dim)],
        }
    }

    /// Jet of the coordinate function `x_{index+1}` (0-based `index`)
    /// evaluated where that coordinate equals `value`.
    pub fn coordinate(dim: usize, index: usize, value: f64) -> Self {
        assert!(index < dim, "coordinate index {index} out of range for dimension {dim}");
        let mut grad = vec![0.0; dim];
        grad[index] = 1.0;
        Jet2 {
            dim,
            value,
            grad,
            hess: vec![0.0; hess_len(dim)],
        }
    }

    /// Assembles a jet from explicit parts. `hess` is the packed lower
    /// triangle; see [`Jet2::hessian`] for the layout.
    pub fn from_parts(dim: usize, value: f64, grad: Vec<f64>, hess: Vec<f64>) -> Self {
        assert_eq!(grad.len(), dim);
        assert_eq!(hess.len(), hess_len(dim));
        Jet2 { dim, value, grad, hess }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad
    }

    /// Hessian entry `(i, j)` in either order.
    pub fn hessian(&self, i: usize, j: usize) -> f64 {
        if i >= j {
            self.hess[tri(i, j)]
        } else {
            self.hess[tri(j, i)]
        }
    }

    /// Full symmetric Hessian as a dense matrix.
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.hessian(i, j))
    }

    fn zip_binary(
        &self,
        o: &Jet2,
        value: f64,
        mut grad_f: impl FnMut(usize) -> f64,
        mut hess_f: impl FnMut(usize, usize) -> f64,
    ) -> Jet2 {
        debug_assert_eq!(self.dim, o.dim);
        let n = self.dim;
        let grad = (0..n).map(&mut grad_f).collect();
        let mut hess = Vec::with_capacity(hess_len(n));
        for i in 0..n {
            for j in 0..=i {
                hess.push(hess_f(i, j));
            }
        }
        Jet2 { dim: n, value, grad, hess }
    }

    pub fn add(&self, o: &Jet2) -> Jet2 {
        self.zip_binary(
            o,
            self.value + o.value,
            |i| self.grad[i] + o.grad[i],
            |i, j| self.hess[tri(i, j)] + o.hess[tri(i, j)],
        )
    }

    pub fn sub(&self, o: &Jet2) -> Jet2 {
        self.zip_binary(
            o,
            self.value - o.value,
            |i| self.grad[i] - o.grad[i],
            |i, j| self.hess[tri(i, j)] - o.hess[tri(i, j)],
        )
    }

    pub fn neg(&self) -> Jet2 {
        Jet2 {
            dim: self.dim,
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Jet2 {
        Jet2 {
            dim: self.dim,
            value: c * self.value,
            grad: self.grad.iter().map(|g| c * g).collect(),
            hess: self.hess.iter().map(|h| c * h).collect(),
        }
    }

    /// Product rule: `(uv)_i = u_i v + u v_i`,
    /// `(uv)_{ij} = u_{ij} v + u_i v_j + u_j v_i + u v_{ij}`.
    pub fn mul(&self, o: &Jet2) -> Jet2 {
        self.zip_binary(
            o,
            self.value * o.value,
            |i| self.grad[i] * o.value + self.value * o.grad[i],
            |i, j| {
                self.hess[tri(i, j)] * o.value
                    + self.grad[i] * o.grad[j]
                    + self.grad[j] * o.grad[i]
                    + self.value * o.hess[tri(i, j)]
            },
        )
    }

    /// Quotient rule written so the already-computed lower-order slots feed
    /// the higher ones: with `w = u / v`,
    /// `w_i = (u_i - w v_i) / v` and
    /// `w_{ij} = (u_{ij} - w_i v_j - w_j v_i - w v_{ij}) / v`.
    pub fn div(&self, o: &Jet2) -> Result<Jet2> {
        if o.value == 0.0 {
            return Err(Error::Domain {
                node: String::from("quotient"),
                message: String::from("division by zero"),
            });
        }
        let n = self.dim;
        let w = self.value / o.value;
        let grad: Vec<f64> = (0..n)
            .map(|i| (self.grad[i] - w * o.grad[i]) / o.value)
            .collect();
        let mut hess = Vec::with_capacity(hess_len(n));
        for i in 0..n {
            for j in 0..=i {
                let h = (self.hess[tri(i, j)]
                    - grad[i] * o.grad[j]
                    - grad[j] * o.grad[i]
                    - w * o.hess[tri(i, j)])
                    / o.value;
                hess.push(h);
            }
        }
        Ok(Jet2 { dim: n, value: w, grad, hess })
    }

    /// Unary chain rule for an outer function with value `f0`, first
    /// derivative `f1`, and second derivative `f2` at `self.value`:
    /// `w_i = f1 u_i`, `w_{ij} = f1 u_{ij} + f2 u_i u_j`.
    pub fn apply(&self, f0: f64, f1: f64, f2: f64) -> Jet2 {
        let n = self.dim;
        let grad: Vec<f64> = (0..n).map(|i| f1 * self.grad[i]).collect();
        let mut hess = Vec::with_capacity(hess_len(n));
        for i in 0..n {
            for j in 0..=i {
                hess.push(f1 * self.hess[tri(i, j)] + f2 * self.grad[i] * self.grad[j]);
            }
        }
        Jet2 { dim: n, value: f0, grad, hess }
    }

    /// Integer power by repeated multiplication, performing the same
    /// sequence of value-slot multiplications as [`powi_value`] so jets
    /// match plain evaluation bit for bit. `x^0` is the constant 1,
    /// including at `x = 0`.
    pub fn powi(&self, k: i32) -> Result<Jet2> {
        if k == 0 {
            return Ok(Jet2::constant(self.dim, 1.0));
        }
        let n = k.unsigned_abs();
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.mul(self);
        }
        if k < 0 {
            Jet2::constant(self.dim, 1.0).div(&acc)
        } else {
            Ok(acc)
        }
    }

    /// General power `u^v` for positive base. With `W = u^v` the
    /// logarithmic derivative is `L_i = v_i ln u + v u_i / u`, giving
    /// `W_i = W L_i` and `W_{ij} = W (L_i L_j + dL_{ij})` where
    /// `dL_{ij} = v_{ij} ln u + (v_i u_j + v_j u_i) / u
    ///            + v u_{ij} / u - v u_i u_j / u^2`.
    pub fn pow_general(&self, o: &Jet2) -> Result<Jet2> {
        if self.value <= 0.0 {
            return Err(Error::Domain {
                node: String::from("power"),
                message: format!(
                    "non-integer power of non-positive base {}",
                    self.value
                ),
            });
        }
        let n = self.dim;
        let u = self.value;
        let v = o.value;
        let w = u.powf(v);
        let ln_u = u.ln();
        let l: Vec<f64> = (0..n)
            .map(|i| o.grad[i] * ln_u + v * self.grad[i] / u)
            .collect();
        let grad: Vec<f64> = (0..n).map(|i| w * l[i]).collect();
        let mut hess = Vec::with_capacity(hess_len(n));
        for i in 0..n {
            for j in 0..=i {
                let dl = o.hess[tri(i, j)] * ln_u
                    + (o.grad[i] * self.grad[j] + o.grad[j] * self.grad[i]) / u
                    + v * self.hess[tri(i, j)] / u
                    - v * self.grad[i] * self.grad[j] / (u * u);
                hess.push(w * (l[i] * l[j] + dl));
            }
        }
        Ok(Jet2 { dim: n, value: w, grad, hess })
    }
}

/// Integer power of a plain value by the same repeated-multiplication
/// scheme as [`Jet2::powi`], so jet value slots and plain evaluation agree
/// exactly. Raising 0 to a negative power reports division by zero.
pub(crate) fn powi_value(base: f64, k: i32) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    let n = k.unsigned_abs();
    let mut acc = base;
    for _ in 1..n {
        acc *= base;
    }
    if k < 0 {
        if acc == 0.0 {
            return Err(Error::Domain {
                node: String::from("quotient"),
                message: String::from("division by zero"),
            });
        }
        Ok(1.0 / acc)
    } else {
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_jets(p: &[f64]) -> Vec<Jet2> {
        (0..p.len()).map(|i| Jet2::coordinate(p.len(), i, p[i])).collect()
    }

    #[test]
    fn product_jet_matches_hand_expansion() {
        // f(x, y) = x^2 y at (3, 2): f = 18, df = (12, 9),
        // Hessian [[4, 6], [6, 0]].
        let [x, y] = &point_jets(&[3.0, 2.0])[..] else { unreachable!() };
        let f = x.mul(x).mul(y);
        assert_eq!(f.value(), 18.0);
        assert_eq!(f.gradient(), &[12.0, 9.0]);
        assert_eq!(f.hessian(0, 0), 4.0);
        assert_eq!(f.hessian(0, 1), 6.0);
        assert_eq!(f.hessian(1, 0), 6.0);
        assert_eq!(f.hessian(1, 1), 0.0);
    }

    #[test]
    fn quotient_jet_matches_hand_expansion() {
        // f(x, y) = x / y at (1, 2): f = 1/2, df = (1/2, -1/4),
        // Hessian [[0, -1/4], [-1/4, 1/4]].
        let [x, y] = &point_jets(&[1.0, 2.0])[..] else { unreachable!() };
        let f = x.div(y).unwrap();
        assert_eq!(f.value(), 0.5);
        assert_eq!(f.gradient(), &[0.5, -0.25]);
        assert_eq!(f.hessian(0, 0), 0.0);
        assert_eq!(f.hessian(0, 1), -0.25);
        assert_eq!(f.hessian(1, 1), 0.25);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let [x, y] = &point_jets(&[1.0, 0.0])[..] else { unreachable!() };
        assert!(matches!(x.div(y), Err(Error::Domain { .. })));
    }

    #[test]
    fn integer_power_handles_negative_and_zero_exponents() {
        let x = Jet2::coordinate(1, 0, 2.0);
        let p = x.powi(3).unwrap();
        assert_eq!(p.value(), 8.0);
        assert_eq!(p.gradient(), &[12.0]);
        assert_eq!(p.hessian(0, 0), 12.0);

        let q = x.powi(-2).unwrap();
        assert_eq!(q.value(), 0.25);
        // d/dx x^-2 = -2 x^-3 = -1/4; second derivative 6 x^-4 = 3/8.
        assert!((q.gradient()[0] + 0.25).abs() < 1e-15);
        assert!((q.hessian(0, 0) - 0.375).abs() < 1e-15);

        let one = x.powi(0).unwrap();
        assert_eq!(one.value(), 1.0);
        assert_eq!(one.gradient(), &[0.0]);
    }

    #[test]
    fn general_power_matches_analytic_derivatives() {
        // f(x, y) = x^y at (2, 3): value 8, df = (12, 8 ln 2),
        // f_xx = y(y-1) x^{y-2} = 12, f_xy = x^{y-1} (1 + y ln x),
        // f_yy = x^y (ln x)^2.
        let [x, y] = &point_jets(&[2.0, 3.0])[..] else { unreachable!() };
        let f = x.pow_general(y).unwrap();
        let ln2 = 2.0_f64.ln();
        assert!((f.value() - 8.0).abs() < 1e-12);
        assert!((f.gradient()[0] - 12.0).abs() < 1e-12);
        assert!((f.gradient()[1] - 8.0 * ln2).abs() < 1e-12);
        assert!((f.hessian(0, 0) - 12.0).abs() < 1e-11);
        assert!((f.hessian(0, 1) - 4.0 * (1.0 + 3.0 * ln2)).abs() < 1e-11);
        assert!((f.hessian(1, 1) - 8.0 * ln2 * ln2).abs() < 1e-11);
    }

    #[test]
    fn unary_chain_rule_matches_exp_of_product() {
        // f(x, y) = exp(x y) at (1, 1): value e, gradient (e, e),
        // Hessian [[e, 2e], [2e, e]].
        let [x, y] = &point_jets(&[1.0, 1.0])[..] else { unreachable!() };
        let u = x.mul(y);
        let e = u.value().exp();
        let f = u.apply(e, e, e);
        assert!((f.value() - std::f64::consts::E).abs() < 1e-15);
        assert!((f.gradient()[0] - std::f64::consts::E).abs() < 1e-15);
        assert!((f.hessian(0, 1) - 2.0 * std::f64::consts::E).abs() < 1e-14);
        assert!((f.hessian(0, 0) - std::f64::consts::E).abs() < 1e-15);
    }
}
