//! Alternating minimization for the relaxed multi-participant objective
//!
//! ```text
//! sum_k ||X_k W_k - Z_k||_F^2 + beta_k ||W_k||_{2,1} + zeta_k ||Z_k - Z||_F^2
//!     + eta ||Z_1 - Y||_F^2
//! ```
//!
//! Every block update is a closed form. `W_k` is found by iteratively
//! reweighted least squares (`update_a` / `update_w`), the pseudo-label
//! matrices `Z_k` by weighted averages, and the consensus `Z` by the
//! zeta-weighted mean of all `Z_k`.
//!
//! [`ParticipantState::step`] is the unit of work a participant performs in a
//! round; both [`run_reference`] and the federated runtime call it, which is
//! what makes the two bit-identical.

use std::borrow::Borrow;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, frobenius_norm_sq, l21_norm, Matrix, Seed};

/// Slack allowed on objective monotonicity checks.
pub const MONOTONE_SLACK: f64 = 1e-9;

/// Diagonal of the reweighting matrix `A_k`.
pub type Diagonal = DVector<f64>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub num_participants: usize,
    pub num_classes: usize,
    pub num_samples: usize,
    pub dims: Vec<usize>,
}

impl ProblemShape {
    pub fn new(num_classes: usize, num_samples: usize, dims: Vec<usize>) -> Result<Self> {
        let shape = ProblemShape {
            num_participants: dims.len(),
            num_classes,
            num_samples,
            dims,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn from_views(views: &[Matrix], num_classes: usize) -> Result<Self> {
        let n = views.first().map_or(0, Matrix::nrows);
        for (k, v) in views.iter().enumerate() {
            if v.nrows() != n {
                return Err(Error::DimensionMismatch(format!(
                    "view {k} has {} samples, view 0 has {n}",
                    v.nrows()
                )));
            }
        }
        Self::new(num_classes, n, views.iter().map(Matrix::ncols).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_participants < 2 || self.dims.len() != self.num_participants {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 participants, got {}",
                self.dims.len()
            )));
        }
        if self.num_classes < 2 {
            return Err(Error::InvalidArgument("need at least 2 classes".into()));
        }
        if self.num_samples < self.num_classes {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot cover {} classes",
                self.num_samples, self.num_classes
            )));
        }
        if let Some(k) = self.dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("view {k} has no features")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: f64,
    pub epsilon: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub outer_max: usize,
}

impl Hyperparams {
    pub const DEFAULT_EPSILON: f64 = 1e-6;
    pub const DEFAULT_INNER_TOL: f64 = 1e-6;
    pub const DEFAULT_INNER_MAX: usize = 50;
    pub const DEFAULT_OUTER_TOL: f64 = 1e-5;
    pub const DEFAULT_OUTER_MAX: usize = 100;

    /// Same `beta` and `zeta` for all `k` participants, default tolerances.
    pub fn uniform(k: usize, beta: f64, zeta: f64, eta: f64) -> Self {
        Hyperparams {
            beta: vec![beta; k],
            zeta: vec![zeta; k],
            eta,
            epsilon: Self::DEFAULT_EPSILON,
            inner_tol: Self::DEFAULT_INNER_TOL,
            inner_max: Self::DEFAULT_INNER_MAX,
            outer_tol: Self::DEFAULT_OUTER_TOL,
            outer_max: Self::DEFAULT_OUTER_MAX,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        if self.beta.len() != k || self.zeta.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "expected {k} beta and zeta values, got {} and {}",
                self.beta.len(),
                self.zeta.len()
            )));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )))
            }
        };
        for (&b, &z) in self.beta.iter().zip(&self.zeta) {
            positive("beta", b)?;
            positive("zeta", z)?;
        }
        positive("eta", self.eta)?;
        positive("epsilon", self.epsilon)?;
        if self.epsilon > 1e-3 {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be at most 1e-3, got {}",
                self.epsilon
            )));
        }
        positive("inner_tol", self.inner_tol)?;
        positive("outer_tol", self.outer_tol)?;
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(Error::InvalidArgument(
                "iteration limits must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Parameters participant `k` needs locally.
    pub fn local(&self, k: usize, label_owner: bool) -> LocalParams {
        LocalParams {
            beta: self.beta[k],
            zeta: self.zeta[k],
            eta: label_owner.then_some(self.eta),
            epsilon: self.epsilon,
            inner_tol: self.inner_tol,
            inner_max: self.inner_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalParams {
    pub beta: f64,
    pub zeta: f64,
    /// Label penalty; present only on the label owner.
    pub eta: Option<f64>,
    pub epsilon: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
}

/// One-hot label matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix(Matrix);

impl LabelMatrix {
    pub fn from_labels(labels: &[usize], num_classes: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidArgument("no labels".into()));
        }
        if let Some((i, &c)) = labels.iter().enumerate().find(|(_, &c)| c >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {c} of sample {i} is outside [0, {num_classes})"
            )));
        }
        Ok(LabelMatrix(Matrix::from_fn(
            labels.len(),
            num_classes,
            |i, j| {
                if labels[i] == j {
                    1.0
                } else {
                    0.0
                }
            },
        )))
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        for (i, row) in m.row_iter().enumerate() {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones != 1 || ones + zeros != row.len() {
                return Err(Error::InvalidArgument(format!("row {i} is not one-hot")));
            }
        }
        Ok(LabelMatrix(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.0
            .row_iter()
            .map(|r| r.iter().position(|&v| v == 1.0).unwrap_or(0))
            .collect()
    }
}

/// `A_k(i,i) = 1 / (2 (||W_k row i|| + eps))`.
pub fn update_a(w: &Matrix, epsilon: f64) -> Diagonal {
    Diagonal::from_iterator(
        w.nrows(),
        numerics::row_norms(w)
            .into_iter()
            .map(|n| 1.0 / (2.0 * (n + epsilon))),
    )
}

/// `W_k = (X_k^T X_k + beta A_k)^{-1} X_k^T Z_k`.
pub fn update_w(x: &Matrix, z: &Matrix, a: &Diagonal, beta: f64) -> Result<Matrix> {
    WSolver::new(x).solve(x, z, a, beta)
}

/// Solver for the reweighted least-squares step with the Gram matrix cached.
///
/// When a view has more features than samples the push-through identity
/// `(X^T X + bA)^{-1} X^T = A^{-1} X^T (X A^{-1} X^T + bI)^{-1}` turns a
/// `d x d` system into an `N x N` one.
#[derive(Debug, Clone)]
pub(crate) enum WSolver {
    Primal { gram: Matrix },
    Dual,
}

impl WSolver {
    pub(crate) fn new(x: &Matrix) -> Self {
        if x.ncols() <= x.nrows() {
            let g = x.tr_mul(x);
            let gram = (&g + g.transpose()) * 0.5;
            WSolver::Primal { gram }
        } else {
            WSolver::Dual
        }
    }

    pub(crate) fn solve(&self, x: &Matrix, z: &Matrix, a: &Diagonal, beta: f64) -> Result<Matrix> {
        if z.nrows() != x.nrows() || a.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "X is {}x{}, Z has {} rows, A has {} entries",
                x.nrows(),
                x.ncols(),
                z.nrows(),
                a.len()
            )));
        }
        if beta.is_nan() || beta <= 0.0 || a.iter().any(|&v| v.is_nan() || v <= 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        match self {
            WSolver::Primal { gram } => {
                let mut lhs = gram.clone();
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += beta * a[i];
                }
                numerics::solve_spd(&lhs, &x.tr_mul(z))
            }
            WSolver::Dual => {
                let n = x.nrows();
                let mut xd = x.clone();
                for (j, mut col) in xd.column_iter_mut().enumerate() {
                    col /= a[j];
                }
                let k = &xd * x.transpose();
                let mut lhs = (&k + k.transpose()) * 0.5;
                for i in 0..n {
                    lhs[(i, i)] += beta;
                }
                let y = numerics::solve_spd(&lhs, z)?;
                Ok(xd.tr_mul(&y))
            }
        }
    }
}

/// `||X W - Z||_F^2 + beta ||W||_{2,1}`, the per-view subproblem for `W_k`.
pub fn w_objective(x: &Matrix, w: &Matrix, z: &Matrix, beta: f64) -> f64 {
    frobenius_norm_sq(&(x * w - z)) + beta * l21_norm(w)
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub w: Matrix,
    pub a: Diagonal,
    pub iterations: usize,
    /// Subproblem objective at the start and after every accepted iteration.
    pub objective_trace: Vec<f64>,
}

/// Alternates `update_a` and `update_w` from `w0` until the relative change of
/// the subproblem objective drops below `tol`, or `max_iter` iterations.
/// Accepted iterates never increase the objective; `a` is the reweighting
/// that produced the returned `w`.
pub fn inner_solve_w(
    x: &Matrix,
    z: &Matrix,
    w0: &Matrix,
    beta: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    inner_solve_cached(&WSolver::new(x), x, z, w0, beta, epsilon, tol, max_iter)
}

#[allow(clippy::too_many_arguments)]
fn inner_solve_cached(
    solver: &WSolver,
    x: &Matrix,
    z: &Matrix,
    w0: &Matrix,
    beta: f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<InnerSolution> {
    let mut irls = Irls::new(x, z, w0.clone(), beta, epsilon)?;
    while !irls.done && irls.iterations < max_iter {
        irls.step(solver, x, z, tol)?;
    }
    Ok(irls.into_solution())
}

/// Resumable reweighted least-squares iteration for one view.
#[derive(Debug, Clone)]
pub(crate) struct Irls {
    pub(crate) w: Matrix,
    a: Diagonal,
    beta: f64,
    epsilon: f64,
    pub(crate) objective: f64,
    trace: Vec<f64>,
    pub(crate) iterations: usize,
    pub(crate) done: bool,
}

impl Irls {
    pub(crate) fn new(x: &Matrix, z: &Matrix, w0: Matrix, beta: f64, epsilon: f64) -> Result<Self> {
        if w0.nrows() != x.ncols() || w0.ncols() != z.ncols() || z.nrows() != x.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "W is {}x{}, X is {}x{}, Z is {}x{}",
                w0.nrows(),
                w0.ncols(),
                x.nrows(),
                x.ncols(),
                z.nrows(),
                z.ncols()
            )));
        }
        let objective = w_objective(x, &w0, z, beta);
        Ok(Irls {
            a: update_a(&w0, epsilon),
            w: w0,
            beta,
            epsilon,
            objective,
            trace: vec![objective],
            iterations: 0,
            done: false,
        })
    }

    /// One `update_a` / `update_w` pair. Sets `done` once the relative
    /// objective change falls below `tol` or a step is rejected.
    pub(crate) fn step(
        &mut self,
        solver: &WSolver,
        x: &Matrix,
        z: &Matrix,
        tol: f64,
    ) -> Result<()> {
        self.iterations += 1;
        let a_next = update_a(&self.w, self.epsilon);
        let w_next = solver.solve(x, z, &a_next, self.beta)?;
        let cur = w_objective(x, &w_next, z, self.beta);
        let prev = self.objective;
        if cur > prev {
            // The reweighting majorizes `t - eps ln(1 + t/eps)` rather than
            // `t`, so the exact objective may rise by at most the change in
            // that smoothing gap. Such a step is dropped and the loop stops;
            // anything larger is a numerical fault.
            let allowed =
                self.beta * smoothing_gap_increase(&self.w, &w_next, self.epsilon) + MONOTONE_SLACK;
            if cur - prev > allowed {
                return Err(Error::NonDecreasingObjective {
                    iteration: self.iterations,
                    previous: prev,
                    current: cur,
                });
            }
            self.done = true;
            return Ok(());
        }
        self.w = w_next;
        self.a = a_next;
        self.objective = cur;
        self.trace.push(cur);
        self.done = relative_change(prev, cur) < tol;
        Ok(())
    }

    pub(crate) fn into_solution(self) -> InnerSolution {
        InnerSolution {
            w: self.w,
            a: self.a,
            iterations: self.iterations,
            objective_trace: self.trace,
        }
    }
}

/// `sum_i eps (ln(1 + t'_i/eps) - ln(1 + t_i/eps))` over rows whose norm grew.
fn smoothing_gap_increase(w: &Matrix, w_next: &Matrix, epsilon: f64) -> f64 {
    numerics::row_norms(w)
        .into_iter()
        .zip(numerics::row_norms(w_next))
        .map(|(t0, t1)| epsilon * ((t1 / epsilon).ln_1p() - (t0 / epsilon).ln_1p()))
        .filter(|&v| v > 0.0)
        .sum()
}

/// `|prev - cur| / |prev|`, zero when both vanish.
pub fn relative_change(prev: f64, cur: f64) -> f64 {
    let diff = (prev - cur).abs();
    if diff == 0.0 {
        0.0
    } else {
        diff / prev.abs()
    }
}

/// Label owner's pseudo-label update:
/// `Z_1 = (X_1 W_1 + zeta_1 Z + eta Y) / (1 + zeta_1 + eta)`.
pub fn update_z1(xw: &Matrix, z: &Matrix, y: &Matrix, zeta: f64, eta: f64) -> Result<Matrix> {
    same_shape(xw, z)?;
    same_shape(xw, y)?;
    let denom = 1.0 + zeta + eta;
    Ok(xw.zip_zip_map(z, y, |p, c, l| (p + zeta * c + eta * l) / denom))
}

/// Non-owner pseudo-label update: `Z_k = (X_k W_k + zeta_k Z) / (1 + zeta_k)`.
pub fn update_zk(xw: &Matrix, z: &Matrix, zeta: f64) -> Result<Matrix> {
    same_shape(xw, z)?;
    let denom = 1.0 + zeta;
    Ok(xw.zip_map(z, |p, c| (p + zeta * c) / denom))
}

/// Consensus update: `Z = sum_k zeta_k Z_k / sum_k zeta_k`.
pub fn aggregate_z<M: Borrow<Matrix>>(zs: &[M], zetas: &[f64]) -> Result<Matrix> {
    let first = zs
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot aggregate an empty list".into()))?
        .borrow();
    if zs.len() != zetas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} matrices but {} weights",
            zs.len(),
            zetas.len()
        )));
    }
    if let Some(z) = zetas.iter().find(|&&z| z.is_nan() || z <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zeta must be positive, got {z}"
        )));
    }
    let mut acc = Matrix::zeros(first.nrows(), first.ncols());
    for (zk, &zeta) in zs.iter().zip(zetas) {
        let zk = zk.borrow();
        same_shape(first, zk)?;
        acc.zip_apply(zk, |s, v| *s += zeta * v);
    }
    let total: f64 = zetas.iter().sum();
    acc.apply(|v| *v /= total);
    Ok(acc)
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} vs {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Participant-local part of the objective: fit and sparsity terms, plus the
/// label term on the owner. The consensus term is added by whoever holds `Z`.
pub fn local_objective(
    x: &Matrix,
    w: &Matrix,
    z_k: &Matrix,
    beta: f64,
    label: Option<(&Matrix, f64)>,
) -> f64 {
    let mut v = w_objective(x, w, z_k, beta);
    if let Some((y, eta)) = label {
        v += eta * frobenius_norm_sq(&(z_k - y));
    }
    v
}

/// Sums local parts and consensus terms in participant order.
pub fn assemble_objective<M: Borrow<Matrix>>(
    local_parts: &[f64],
    zs: &[M],
    z: &Matrix,
    zetas: &[f64],
) -> f64 {
    local_parts
        .iter()
        .zip(zs)
        .zip(zetas)
        .map(|((part, zk), zeta)| part + zeta * frobenius_norm_sq(&(zk.borrow() - z)))
        .sum()
}

/// Everything participant `k` owns. `x` and `labels` never leave it.
#[derive(Debug, Clone)]
pub struct ParticipantState {
    pub id: usize,
    pub x: Matrix,
    pub w: Matrix,
    pub a: Diagonal,
    pub z_k: Matrix,
    pub labels: Option<LabelMatrix>,
    pub params: LocalParams,
    solver: WSolver,
}

impl ParticipantState {
    /// Seeded initialization: `W_k` standard normal scaled by `1/sqrt(d_k)`,
    /// `Z_k` with orthonormal columns. Draws come from stream `id + 1` of
    /// `seed`; stream 0 belongs to the consensus matrix.
    pub fn init(
        id: usize,
        x: Matrix,
        labels: Option<LabelMatrix>,
        params: LocalParams,
        num_classes: usize,
        seed: Seed,
    ) -> Result<Self> {
        let x = numerics::checked(x)?;
        if labels.is_some() != params.eta.is_some() {
            return Err(Error::InvalidArgument(
                "labels and eta must be given together".into(),
            ));
        }
        if let Some(y) = &labels {
            if y.matrix().nrows() != x.nrows() || y.num_classes() != num_classes {
                return Err(Error::DimensionMismatch(format!(
                    "labels are {}x{}, expected {}x{num_classes}",
                    y.matrix().nrows(),
                    y.num_classes(),
                    x.nrows()
                )));
            }
        }
        let (n, d) = x.shape();
        let mut rng = seed.stream(id as u64 + 1);
        let w = numerics::standard_normal(d, num_classes, &mut rng) / (d as f64).sqrt();
        let z_k = numerics::random_orthonormal_with(n, num_classes, &mut rng)?;
        let a = update_a(&w, params.epsilon);
        let solver = WSolver::new(&x);
        Ok(ParticipantState {
            id,
            x,
            w,
            a,
            z_k,
            labels,
            params,
            solver,
        })
    }

    pub fn is_label_owner(&self) -> bool {
        self.labels.is_some()
    }

    pub fn num_samples(&self) -> usize {
        self.x.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w.ncols()
    }

    /// One round: refit `W_k` against the current `Z_k`, then move `Z_k`
    /// toward the consensus `z` (and the labels, on the owner). Returns the
    /// local objective part.
    pub fn step(&mut self, z: &Matrix) -> Result<f64> {
        same_shape(&self.z_k, z)?;
        let p = self.params;
        let inner = inner_solve_cached(
            &self.solver,
            &self.x,
            &self.z_k,
            &self.w,
            p.beta,
            p.epsilon,
            p.inner_tol,
            p.inner_max,
        )?;
        self.w = inner.w;
        self.a = inner.a;
        let xw = &self.x * &self.w;
        self.z_k = match (&self.labels, p.eta) {
            (Some(y), Some(eta)) => update_z1(&xw, z, y.matrix(), p.zeta, eta)?,
            _ => update_zk(&xw, z, p.zeta)?,
        };
        Ok(self.local_objective())
    }

    pub fn local_objective(&self) -> f64 {
        let label = self
            .labels
            .as_ref()
            .zip(self.params.eta)
            .map(|(y, eta)| (y.matrix(), eta));
        local_objective(&self.x, &self.w, &self.z_k, self.params.beta, label)
    }
}

/// Initial consensus matrix, drawn from stream 0 of `seed`.
pub fn initial_consensus(num_samples: usize, num_classes: usize, seed: Seed) -> Result<Matrix> {
    numerics::random_orthonormal_with(num_samples, num_classes, &mut seed.stream(0))
}

/// Outer stopping rule on consecutive objective values.
pub fn outer_converged(prev: f64, cur: f64, tol: f64) -> bool {
    relative_change(prev, cur) < tol
}

/// Full objective for the given participant states and consensus.
pub fn objective(states: &[ParticipantState], z: &Matrix) -> f64 {
    let parts: Vec<f64> = states
        .iter()
        .map(ParticipantState::local_objective)
        .collect();
    let zs: Vec<&Matrix> = states.iter().map(|s| &s.z_k).collect();
    let zetas: Vec<f64> = states.iter().map(|s| s.params.zeta).collect();
    assemble_objective(&parts, &zs, z, &zetas)
}

/// Gradients of the full objective with respect to every block. The
/// `W_k` gradient uses the l2,1 gradient `row / ||row||` and is only
/// meaningful where no row of `W_k` vanishes.
#[derive(Debug, Clone)]
pub struct BlockGradients {
    pub w: Vec<Matrix>,
    pub z_k: Vec<Matrix>,
    pub z: Matrix,
}

pub fn objective_gradients(states: &[ParticipantState], z: &Matrix) -> BlockGradients {
    let mut gw = Vec::with_capacity(states.len());
    let mut gz_k = Vec::with_capacity(states.len());
    let mut gz = Matrix::zeros(z.nrows(), z.ncols());
    for s in states {
        let resid = &s.x * &s.w - &s.z_k;
        let mut g = s.x.tr_mul(&resid) * 2.0;
        let norms = numerics::row_norms(&s.w);
        for (i, n) in norms.iter().enumerate() {
            for j in 0..g.ncols() {
                g[(i, j)] += s.params.beta * s.w[(i, j)] / n;
            }
        }
        gw.push(g);

        let diff = &s.z_k - z;
        let mut g = -resid * 2.0 + &diff * (2.0 * s.params.zeta);
        if let (Some(y), Some(eta)) = (&s.labels, s.params.eta) {
            g += (&s.z_k - y.matrix()) * (2.0 * eta);
        }
        gz_k.push(g);
        gz -= diff * (2.0 * s.params.zeta);
    }
    BlockGradients {
        w: gw,
        z_k: gz_k,
        z: gz,
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceRun {
    pub states: Vec<ParticipantState>,
    pub z: Matrix,
    /// Objective after every completed round.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
}

impl ReferenceRun {
    pub fn weights(&self) -> Vec<&Matrix> {
        self.states.iter().map(|s| &s.w).collect()
    }

    pub fn pseudo_labels(&self) -> Vec<&Matrix> {
        self.states.iter().map(|s| &s.z_k).collect()
    }
}

/// Single-process alternating minimization over all views. View 0 owns the
/// labels.
pub fn run_reference(
    views: &[Matrix],
    labels: &LabelMatrix,
    hyper: &Hyperparams,
    seed: Seed,
) -> Result<ReferenceRun> {
    let shape = ProblemShape::from_views(views, labels.num_classes())?;
    hyper.validate(shape.num_participants)?;
    if labels.matrix().nrows() != shape.num_samples {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.matrix().nrows(),
            shape.num_samples
        )));
    }
    let mut states = views
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let owner = k == 0;
            ParticipantState::init(
                k,
                x.clone(),
                owner.then(|| labels.clone()),
                hyper.local(k, owner),
                shape.num_classes,
                seed,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut z = initial_consensus(shape.num_samples, shape.num_classes, seed)?;

    let mut trace = Vec::new();
    let mut converged = false;
    for _round in 0..hyper.outer_max {
        let parts = states
            .iter_mut()
            .map(|s| s.step(&z))
            .collect::<Result<Vec<_>>>()?;
        let zs: Vec<&Matrix> = states.iter().map(|s| &s.z_k).collect();
        z = aggregate_z(&zs, &hyper.zeta)?;
        let obj = assemble_objective(&parts, &zs, &z, &hyper.zeta);
        let stop = trace
            .last()
            .is_some_and(|&prev| outer_converged(prev, obj, hyper.outer_tol));
        trace.push(obj);
        if stop {
            converged = true;
            break;
        }
    }
    log::debug!(
        "reference run finished after {} rounds (converged: {converged})",
        trace.len()
    );
    Ok(ReferenceRun {
        states,
        z,
        objective_trace: trace,
        converged,
    })
}
