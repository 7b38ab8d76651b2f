//! Guarded pointwise linear algebra: condition-checked solves and
//! Pfaffians of small skew-symmetric matrices.

use nalgebra::{DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::tolerances::COND_CEILING;

/// Row-sum (infinity) norm.
pub(crate) fn norm_inf(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// LU factorization that refuses matrices with infinity-norm condition
/// estimate above [`COND_CEILING`]. One factorization serves any number of
/// solves at the same point.
pub(crate) struct CheckedLu {
    lu: nalgebra::LU<f64, Dyn, Dyn>,
    inverse: DMatrix<f64>,
}

impl CheckedLu {
    pub fn new(a: &DMatrix<f64>, point: &[f64]) -> Result<Self> {
        let lu = a.clone().lu();
        let inverse = lu.try_inverse().ok_or_else(|| Error::NearSingular {
            point: point.to_vec(),
            cond: f64::INFINITY,
        })?;
        let cond = norm_inf(a) * norm_inf(&inverse);
        if !cond.is_finite() || cond > COND_CEILING {
            return Err(Error::NearSingular {
                point: point.to_vec(),
                cond,
            });
        }
        Ok(CheckedLu { lu, inverse })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.lu
            .solve(rhs)
            .expect("solve after successful inversion cannot fail")
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn determinant(&self) -> f64 {
        self.lu.determinant()
    }
}

/// Pfaffian of a skew-symmetric matrix of even dimension up to 8, by
/// recursive expansion along the first row. The identity
/// `Pf(A)^2 = det(A)` is the caller's cross-check.
pub(crate) fn pfaffian(a: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    if n != a.ncols() || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "Pfaffian requires a square even-dimensional matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n > 8 {
        return Err(Error::InvalidArgument(format!(
            "Pfaffian expansion is supported up to dimension 8, got {n}"
        )));
    }
    let idx: Vec<usize> = (0..n).collect();
    Ok(pfaffian_rec(a, &idx))
}

fn pfaffian_rec(a: &DMatrix<f64>, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let row = idx[0];
    let mut sum = 0.0;
    for (pos, &col) in idx.iter().enumerate().skip(1) {
        let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
        let coeff = a[(row, col)];
        if coeff == 0.0 {
            continue;
        }
        let rest: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&k| k != row && k != col)
            .collect();
        sum += sign * coeff * pfaffian_rec(a, &rest);
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checked_lu_solves_and_estimates_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let lu = CheckedLu::new(&a, &[0.0, 0.0]).unwrap();
        let x = lu.solve(&DVector::from_vec(vec![3.0, 1.0]));
        assert_eq!(x.as_slice(), &[2.0, 1.0]);
        assert_eq!(lu.determinant(), 1.0);
    }

    #[test]
    fn singular_matrices_are_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        match CheckedLu::new(&a, &[0.5, 0.5]).map(|_| ()) {
            Err(Error::NearSingular { point, .. }) => assert_eq!(point, vec![0.5, 0.5]),
            other => panic!("expected near-singular error, got {other:?}"),
        }
    }

    #[test]
    fn ill_conditioned_matrices_are_refused() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(matches!(
            CheckedLu::new(&a, &[0.0, 0.0]),
            Err(Error::NearSingular { .. })
        ));
    }

    #[test]
    fn pfaffian_matches_hand_values() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 3.0, -3.0, 0.0]);
        assert_eq!(pfaffian(&a).unwrap(), 3.0);

        // Grouped canonical structure on dimension 4 has Pfaffian -1.
        let j4 = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 0.0, 1.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, -1.0, 0.0, 0.0,
            ],
        );
        assert_eq!(pfaffian(&j4).unwrap(), -1.0);

        // Interleaved pairing has Pfaffian +1.
        let j4i = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                -1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, -1.0, 0.0,
            ],
        );
        assert_eq!(pfaffian(&j4i).unwrap(), 1.0);
    }

    #[test]
    fn pfaffian_squares_to_determinant_on_random_skew_matrices() {
        // Fixed pseudo-random entries; no external randomness needed.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for n in [2usize, 4, 6, 8] {
            let mut a = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    let v = next();
                    a[(i, j)] = v;
                    a[(j, i)] = -v;
                }
            }
            let pf = pfaffian(&a).unwrap();
            let det = a.clone().lu().determinant();
            assert!(
                (pf * pf - det).abs() <= 1e-9 * (1.0 + det.abs()),
                "Pf^2 = {} but det = {det} at n = {n}",
                pf * pf
            );
        }
    }

    #[test]
    fn odd_or_oversized_pfaffians_are_rejected() {
        assert!(pfaffian(&DMatrix::zeros(3, 3)).is_err());
        assert!(pfaffian(&DMatrix::zeros(10, 10)).is_err());
    }
}
