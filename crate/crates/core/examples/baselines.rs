//! The two supervised comparison methods: every participant on its own, and
//! all views fitted jointly against shared labels.

use mmvfl::baselines::{supfl_solve, supmvlfl_solve};
use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::featsel::{score_features, select_top};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::Hyperparams;

fn main() -> mmvfl::Result<()> {
    let planted = synth_planted(&SynthConfig::default(), Seed(2))?;
    let ds = &planted.dataset;
    let y = ds.label_matrix()?;
    let (eps, tol, max) = (
        Hyperparams::DEFAULT_EPSILON,
        Hyperparams::DEFAULT_INNER_TOL,
        Hyperparams::DEFAULT_INNER_MAX,
    );

    for (k, x) in ds.views.iter().enumerate() {
        let fit = supfl_solve(x, &y, 1.0, eps, tol, max)?;
        let mut top = select_top(&score_features(&fit.w), 5.0 / 30.0 * 100.0)?;
        top.sort_unstable();
        println!(
            "supFL participant {k}: {} iterations, top {top:?}",
            fit.iterations
        );
    }

    let joint = supmvlfl_solve(&ds.views, &y, &[1.0; 3], eps, tol, max)?;
    println!(
        "supMVLFL: {} sweeps, objective {:.4}",
        joint.objective_trace.len() - 1,
        joint.objective()
    );
    for (k, w) in joint.w.iter().enumerate() {
        let mut top = select_top(&score_features(w), 5.0 / 30.0 * 100.0)?;
        top.sort_unstable();
        println!(
            "  participant {k}: top {top:?}, planted {:?}",
            planted.informative[k]
        );
    }
    Ok(())
}
