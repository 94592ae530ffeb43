//! Supervised comparison methods.
//!
//! `supFL` fits every view independently against the one-hot labels;
//! `supMVLFL` fits all views in one joint problem. Both assume every view can
//! see the labels, so neither is private.
//!
//! The joint objective separates over views, so each view's block follows its
//! own stopping rule inside the shared loop and the joint fit reproduces the
//! independent fits exactly.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::optimizer::{relative_change, InnerSolution, Irls, LabelMatrix, WSolver};

/// Ridge start shared by both baselines: `A = I`.
fn ridge_start(solver: &WSolver, x: &Matrix, y: &Matrix, beta: f64) -> Result<Matrix> {
    solver.solve(x, y, &DVector::from_element(x.ncols(), 1.0), beta)
}

/// Minimizes `||X W - Y||_F^2 + beta ||W||_{2,1}` by reweighted least squares.
pub fn supfl_solve(
    x: &Matrix,
    y: &LabelMatrix,
    beta: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    let y = y.matrix();
    if y.nrows() != x.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            y.nrows(),
            x.nrows()
        )));
    }
    let solver = WSolver::new(x);
    let w0 = ridge_start(&solver, x, y, beta)?;
    let mut irls = Irls::new(x, y, w0, beta, epsilon)?;
    while !irls.done && irls.iterations < max_iter {
        irls.step(&solver, x, y, tol)?;
    }
    Ok(irls.into_solution())
}

#[derive(Debug, Clone)]
pub struct JointFit {
    pub w: Vec<Matrix>,
    /// Per-view objective at the end of the fit.
    pub view_objectives: Vec<f64>,
    /// Summed objective at the start and after every joint sweep.
    pub objective_trace: Vec<f64>,
}

impl JointFit {
    pub fn objective(&self) -> f64 {
        self.view_objectives.iter().sum()
    }
}

/// Minimizes `sum_k ||X_k W_k - Y||_F^2 + beta_k ||W_k||_{2,1}` over all views
/// at once. The loop ends when every block has met its stopping rule and the
/// summed objective has settled, or after `max_iter` sweeps.
pub fn supmvlfl_solve(
    views: &[Matrix],
    y: &LabelMatrix,
    betas: &[f64],
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<JointFit> {
    if views.len() != betas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} views but {} beta values",
            views.len(),
            betas.len()
        )));
    }
    let y = y.matrix();
    let solvers: Vec<WSolver> = views.iter().map(WSolver::new).collect();
    let mut blocks = Vec::with_capacity(views.len());
    for ((x, solver), &beta) in views.iter().zip(&solvers).zip(betas) {
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "view has {} samples, labels have {}",
                x.nrows(),
                y.nrows()
            )));
        }
        let w0 = ridge_start(solver, x, y, beta)?;
        blocks.push(Irls::new(x, y, w0, beta, epsilon)?);
    }
    let total = |blocks: &[Irls]| blocks.iter().map(|b| b.objective).sum::<f64>();
    let mut trace = vec![total(&blocks)];
    for _ in 0..max_iter {
        for ((block, solver), x) in blocks.iter_mut().zip(&solvers).zip(views) {
            if !block.done {
                block.step(solver, x, y, tol)?;
            }
        }
        let prev = *trace.last().unwrap_or(&0.0);
        let cur = total(&blocks);
        trace.push(cur);
        if blocks.iter().all(|b| b.done) && relative_change(prev, cur) < tol {
            break;
        }
    }
    let view_objectives = blocks.iter().map(|b| b.objective).collect();
    Ok(JointFit {
        w: blocks.into_iter().map(|b| b.into_solution().w).collect(),
        view_objectives,
        objective_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{standard_normal, Seed};
    use crate::optimizer::w_objective;

    fn instance(n: usize, d: usize, nc: usize, seed: u64) -> (Matrix, LabelMatrix) {
        let mut rng = Seed(seed).rng();
        let x = standard_normal(n, d, &mut rng);
        let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % nc).collect();
        (x, LabelMatrix::from_labels(&labels, nc).unwrap())
    }

    #[test]
    fn zero_labels_give_zero_weights() {
        // A zero target is not one-hot, so go through the solver directly.
        let (x, _) = instance(10, 4, 2, 1);
        let solver = WSolver::new(&x);
        let y = Matrix::zeros(10, 2);
        let w0 = ridge_start(&solver, &x, &y, 0.5).unwrap();
        let mut irls = Irls::new(&x, &y, w0, 0.5, 1e-6).unwrap();
        irls.step(&solver, &x, &y, 1e-6).unwrap();
        assert!(irls.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interpolates_as_beta_vanishes() {
        let (x, y) = instance(6, 6, 3, 2);
        let fit = supfl_solve(&x, &y, 1e-12, 1e-6, 1e-12, 20).unwrap();
        let exact = x.clone().lu().solve(y.matrix()).unwrap();
        assert!((&fit.w - &exact).norm() < 1e-6 * (1.0 + exact.norm()));
    }

    #[test]
    fn stationarity_at_solution() {
        let (x, y) = instance(20, 6, 3, 3);
        let fit = supfl_solve(&x, &y, 0.3, 1e-6, 1e-6, 50).unwrap();
        let grad = x.tr_mul(&(&x * &fit.w - y.matrix())) * 2.0
            + Matrix::from_diagonal(&fit.a) * &fit.w * (2.0 * 0.3);
        assert!(grad.norm() <= 1e-8 * (1.0 + y.matrix().norm()));
    }

    #[test]
    fn beats_random_probes() {
        let (x, y) = instance(20, 6, 3, 4);
        let beta = 0.5;
        let fit = supfl_solve(&x, &y, beta, 1e-6, 1e-10, 500).unwrap();
        let best = w_objective(&x, &fit.w, y.matrix(), beta);
        let mut rng = Seed(40).rng();
        for i in 0..100 {
            let probe = if i % 2 == 0 {
                standard_normal(6, 3, &mut rng)
            } else {
                &fit.w + standard_normal(6, 3, &mut rng) * 1e-3
            };
            assert!(best <= w_objective(&x, &probe, y.matrix(), beta) + 1e-9);
        }
    }

    #[test]
    fn objective_never_increases() {
        let (x, y) = instance(30, 8, 4, 5);
        let fit = supfl_solve(&x, &y, 2.0, 1e-6, 1e-9, 200).unwrap();
        for pair in fit.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn joint_with_one_view_matches_independent() {
        let (x, y) = instance(15, 5, 3, 6);
        let single = supfl_solve(&x, &y, 0.2, 1e-6, 1e-6, 50).unwrap();
        let joint = supmvlfl_solve(std::slice::from_ref(&x), &y, &[0.2], 1e-6, 1e-6, 50).unwrap();
        assert_eq!(joint.w[0], single.w);
    }

    #[test]
    fn identical_views_give_identical_weights() {
        let (x, y) = instance(15, 5, 3, 7);
        let views = vec![x.clone(), x.clone(), x];
        let joint = supmvlfl_solve(&views, &y, &[0.1; 3], 1e-6, 1e-6, 50).unwrap();
        assert_eq!(joint.w[0], joint.w[1]);
        assert_eq!(joint.w[1], joint.w[2]);
    }

    #[test]
    fn joint_objective_is_sum_of_view_objectives() {
        let (x1, y) = instance(25, 5, 3, 8);
        let (x2, _) = instance(25, 9, 3, 9);
        let betas = [0.1, 1.0];
        let joint = supmvlfl_solve(&[x1.clone(), x2.clone()], &y, &betas, 1e-6, 1e-6, 50).unwrap();
        let parts: f64 = [(&x1, 0), (&x2, 1)]
            .iter()
            .map(|(x, k)| {
                let fit = supfl_solve(x, &y, betas[*k], 1e-6, 1e-6, 50).unwrap();
                w_objective(x, &fit.w, y.matrix(), betas[*k])
            })
            .sum();
        assert!((joint.objective() - parts).abs() <= 1e-9);
        for pair in joint.objective_trace.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (x, y) = instance(10, 3, 2, 10);
        let (short, _) = instance(9, 3, 2, 10);
        assert!(supfl_solve(&short, &y, 0.1, 1e-6, 1e-6, 10).is_err());
        assert!(supmvlfl_solve(&[x], &y, &[0.1, 0.2], 1e-6, 1e-6, 10).is_err());
    }
}
