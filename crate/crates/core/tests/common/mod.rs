//! Instance generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use mmvfl::numerics::{standard_normal, Matrix, Seed};
use mmvfl::optimizer::{initial_consensus, objective, Hyperparams, LabelMatrix, ParticipantState};
use rand::Rng;

pub struct Instance {
    pub views: Vec<Matrix>,
    pub labels: LabelMatrix,
}

/// Gaussian views with labels dealt round-robin then shuffled.
pub fn gaussian_instance(n: usize, dims: &[usize], nc: usize, seed: u64) -> Instance {
    let mut rng = Seed(seed).stream(99);
    let views = dims
        .iter()
        .map(|&d| standard_normal(n, d, &mut rng))
        .collect();
    let mut labels: Vec<usize> = (0..n).map(|i| i % nc).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    Instance {
        views,
        labels: LabelMatrix::from_labels(&labels, nc).unwrap(),
    }
}

/// Participant states and consensus exactly as a run with `seed` starts.
pub fn initial_states(
    inst: &Instance,
    hyper: &Hyperparams,
    seed: Seed,
) -> (Vec<ParticipantState>, Matrix) {
    let nc = inst.labels.num_classes();
    let states = inst
        .views
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let owner = k == 0;
            ParticipantState::init(
                k,
                x.clone(),
                owner.then(|| inst.labels.clone()),
                hyper.local(k, owner),
                nc,
                seed,
            )
            .unwrap()
        })
        .collect();
    let z = initial_consensus(inst.views[0].nrows(), nc, seed).unwrap();
    (states, z)
}

pub fn initial_objective(inst: &Instance, hyper: &Hyperparams, seed: Seed) -> f64 {
    let (states, z) = initial_states(inst, hyper, seed);
    objective(&states, &z)
}

/// Minimizes a 1-D convex function by repeated grid refinement: evaluate 41
/// points, shrink the bracket around the best one, repeat until it is
/// narrower than `1e-12` relative.
pub fn grid_minimize<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let step = (hi - lo) / 40.0;
        let best = (0..=40)
            .map(|i| lo + step * i as f64)
            .min_by(|a, b| f(*a).total_cmp(&f(*b)))
            .unwrap();
        lo = best - step;
        hi = best + step;
        if hi - lo < 1e-12 * (1.0 + best.abs()) {
            return best;
        }
    }
    (lo + hi) / 2.0
}

/// Gradient descent on `||X W - Z||^2 + beta tr(W' A W)` with step `1/L`,
/// run until the gradient is negligible.
pub fn gradient_descent_w(x: &Matrix, z: &Matrix, a: &[f64], beta: f64) -> Matrix {
    let d = x.ncols();
    let gram = x.tr_mul(x);
    let mut h = gram.clone();
    for i in 0..d {
        h[(i, i)] += beta * a[i];
    }
    let lipschitz = 2.0 * h.clone().symmetric_eigen().eigenvalues.max();
    let xtz = x.tr_mul(z);
    let mut w = Matrix::zeros(d, z.ncols());
    for _ in 0..2_000_000 {
        let g = (&h * &w - &xtz) * 2.0;
        if g.norm() < 1e-13 * (1.0 + xtz.norm()) {
            break;
        }
        w -= g / lipschitz;
    }
    w
}

pub fn uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

pub fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).amax()
}
