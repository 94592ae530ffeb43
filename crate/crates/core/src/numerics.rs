//! Dense matrix kernels shared by every update rule.
//!
//! Matrices are `nalgebra::DMatrix<f64>`. Everything here is a pure function of
//! its inputs, so repeated calls with the same arguments are bit-identical.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Seed for every random stream in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent sub-stream of this seed. Distinct `stream` values never
    /// overlap, so each participant can draw its own initialization locally.
    pub fn stream(self, stream: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_stream(stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Validates the matrix invariants: non-empty and finite.
pub fn checked(m: Matrix) -> Result<Matrix> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidArgument(format!(
            "matrix must be non-empty, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos % m.nrows(), pos / m.nrows());
        return Err(Error::InvalidArgument(format!(
            "non-finite entry at ({r}, {c})"
        )));
    }
    Ok(m)
}

/// Builds a matrix from row slices. All rows must have equal length.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::DimensionMismatch(format!(
            "row {i} has {} columns, expected {ncols}",
            r.len()
        )));
    }
    checked(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Row-major nested vectors, the order used by every file and wire format.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn frobenius_norm_sq(m: &Matrix) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Euclidean norm of every row.
pub fn row_norms(m: &Matrix) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| m[(i, j)] * m[(i, j)])
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Sum of row Euclidean norms.
pub fn l21_norm(m: &Matrix) -> f64 {
    row_norms(m).into_iter().sum()
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "system matrix must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if b.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has {} rows, expected {n}",
            b.nrows()
        )));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let (x, y) = (a[(i, j)], a[(j, i)]);
            if (x - y).abs() > 1e-10 * (1.0 + x.abs().max(y.abs())) {
                return Err(Error::InvalidArgument(format!(
                    "system matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let chol = a.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let x = chol.solve(b);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(x)
}

/// `rows x cols` matrix of independent standard normal draws, filled row by row.
pub fn standard_normal<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    Matrix::from_row_slice(rows, cols, &data)
}

/// Random matrix with orthonormal columns (`M^T M = I`), drawn by
/// orthogonalizing a seeded Gaussian matrix.
pub fn random_orthonormal(rows: usize, cols: usize, seed: Seed) -> Result<Matrix> {
    random_orthonormal_with(rows, cols, &mut seed.rng())
}

pub fn random_orthonormal_with<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Result<Matrix> {
    if cols == 0 || rows < cols {
        return Err(Error::InvalidArgument(format!(
            "orthonormal matrix needs rows >= cols >= 1, got {rows}x{cols}"
        )));
    }
    let g = standard_normal(rows, cols, rng);
    Ok(g.qr().q())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_frob(m: &Matrix) -> f64 {
        let mut s = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                s += m[(i, j)] * m[(i, j)];
            }
        }
        s
    }

    #[test]
    fn frobenius_examples() {
        let m = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(frobenius_norm_sq(&m), 30.0);
        assert_eq!(frobenius_norm_sq(&Matrix::zeros(3, 3)), 0.0);
        let r = standard_normal(5, 3, &mut Seed(7).rng());
        assert!((frobenius_norm_sq(&r) - naive_frob(&r)).abs() < 1e-12);
    }

    #[test]
    fn l21_examples() {
        let m = from_rows(&[vec![3.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(l21_norm(&m), 5.0);
        assert_eq!(l21_norm(&Matrix::identity(3, 3)), 3.0);
        let r = standard_normal(4, 2, &mut Seed(8).rng());
        let mut oracle = 0.0;
        for i in 0..4 {
            oracle += (r[(i, 0)].powi(2) + r[(i, 1)].powi(2)).sqrt();
        }
        assert!((l21_norm(&r) - oracle).abs() < 1e-12);
    }

    #[test]
    fn solve_spd_examples() {
        let b = from_rows(&[vec![1.0, -2.0], vec![3.5, 0.0], vec![7.0, 1.0]]).unwrap();
        assert_eq!(solve_spd(&Matrix::identity(3, 3), &b).unwrap(), b);

        let a = Matrix::identity(2, 2) * 2.0;
        let b = from_rows(&[vec![4.0], vec![6.0]]).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        let expected = from_rows(&[vec![2.0], vec![3.0]]).unwrap();
        assert!((x - expected).norm() < 1e-14);
    }

    #[test]
    fn solve_spd_rejects_indefinite_and_bad_shapes() {
        let a = from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let b = Matrix::zeros(2, 1);
        assert!(matches!(solve_spd(&a, &b), Err(Error::NotPositiveDefinite)));
        assert!(matches!(
            solve_spd(&Matrix::identity(2, 2), &Matrix::zeros(3, 1)),
            Err(Error::DimensionMismatch(_))
        ));
        let asym = from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(
            solve_spd(&asym, &b),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn orthonormal_examples() {
        let m = random_orthonormal(3, 3, Seed(1)).unwrap();
        let gram = m.transpose() * &m;
        assert!((gram - Matrix::identity(3, 3)).norm() <= 1e-10);

        let a = random_orthonormal(100, 7, Seed(5)).unwrap();
        let b = random_orthonormal(100, 7, Seed(5)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());

        assert!(random_orthonormal(2, 3, Seed(1)).is_err());
    }

    #[test]
    fn orthonormal_seeds_do_not_collide() {
        for s in 0..100u64 {
            let a = random_orthonormal(100, 7, Seed(2 * s)).unwrap();
            let b = random_orthonormal(100, 7, Seed(2 * s + 1)).unwrap();
            assert_ne!(a, b, "seeds {} and {} collided", 2 * s, 2 * s + 1);
        }
    }

    #[test]
    fn streams_are_independent() {
        let a = standard_normal(4, 4, &mut Seed(3).stream(1));
        let b = standard_normal(4, 4, &mut Seed(3).stream(2));
        let c = standard_normal(4, 4, &mut Seed(3).stream(1));
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn checked_rejects_non_finite() {
        let mut m = Matrix::zeros(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(checked(m).is_err());
        assert!(checked(Matrix::zeros(0, 3)).is_err());
    }

    fn random_spd(n: usize, seed: u64) -> (Matrix, Matrix) {
        let mut rng = Seed(seed).rng();
        let g = standard_normal(n, n, &mut rng);
        let a = g.transpose() * &g + Matrix::identity(n, n) * 1e-2;
        let b = standard_normal(n, 3, &mut rng);
        (a, b)
    }

    #[test]
    fn solve_spd_residual_on_random_instances() {
        for seed in 0..1000u64 {
            let n = 1 + (seed as usize * 7) % 64;
            let (a, b) = random_spd(n, seed);
            let x = solve_spd(&a, &b).unwrap();
            let rel = (&a * &x - &b).norm() / b.norm();
            assert!(rel <= 1e-10, "n={n} seed={seed} residual {rel}");
        }
    }

    #[test]
    fn solve_spd_matches_refined_elimination() {
        // Gaussian elimination with partial pivoting plus one refinement step.
        fn gauss(a: &Matrix, b: &Matrix) -> Matrix {
            let n = a.nrows();
            let mut m = a.clone();
            let mut r = b.clone();
            for k in 0..n {
                let p = (k..n)
                    .max_by(|&i, &j| m[(i, k)].abs().total_cmp(&m[(j, k)].abs()))
                    .unwrap();
                m.swap_rows(k, p);
                r.swap_rows(k, p);
                for i in (k + 1)..n {
                    let f = m[(i, k)] / m[(k, k)];
                    for j in k..n {
                        m[(i, j)] -= f * m[(k, j)];
                    }
                    for j in 0..r.ncols() {
                        r[(i, j)] -= f * r[(k, j)];
                    }
                }
            }
            let mut x = Matrix::zeros(n, b.ncols());
            for c in 0..b.ncols() {
                for i in (0..n).rev() {
                    let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * x[(j, c)]).sum();
                    x[(i, c)] = (r[(i, c)] - s) / m[(i, i)];
                }
            }
            x
        }
        let (a, b) = random_spd(6, 99);
        let mut x0 = gauss(&a, &b);
        let resid = &b - &a * &x0;
        x0 += gauss(&a, &resid);
        let x = solve_spd(&a, &b).unwrap();
        assert!((&x - &x0).norm() / x0.norm() < 1e-10);
    }

    #[test]
    fn kernels_are_pure() {
        let m = standard_normal(9, 4, &mut Seed(11).rng());
        assert_eq!(l21_norm(&m).to_bits(), l21_norm(&m).to_bits());
        assert_eq!(
            frobenius_norm_sq(&m).to_bits(),
            frobenius_norm_sq(&m).to_bits()
        );
        let (a, b) = random_spd(5, 4);
        assert_eq!(solve_spd(&a, &b).unwrap(), solve_spd(&a, &b).unwrap());
    }

    proptest! {
        #[test]
        fn l21_nonnegative_zero_iff_zero(rows in 1usize..6, cols in 1usize..5, seed in any::<u64>(), zero in any::<bool>()) {
            let m = if zero { Matrix::zeros(rows, cols) } else { standard_normal(rows, cols, &mut Seed(seed).rng()) };
            let v = l21_norm(&m);
            prop_assert!(v >= 0.0);
            prop_assert_eq!(v == 0.0, m.iter().all(|x| *x == 0.0));
        }

        #[test]
        fn frobenius_bounded_by_l21_squared(rows in 1usize..8, cols in 1usize..6, seed in any::<u64>()) {
            let m = standard_normal(rows, cols, &mut Seed(seed).rng());
            let l21 = l21_norm(&m);
            prop_assert!(frobenius_norm_sq(&m) <= l21 * l21 * (1.0 + 1e-12));
        }
    }
}
