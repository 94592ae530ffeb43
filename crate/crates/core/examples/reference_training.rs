//! Single-process training on a planted dataset.
//!
//! ```text
//! cargo run --release --example reference_training
//! ```

use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::featsel::{score_features, select_top};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::{run_reference, Hyperparams};

fn main() -> mmvfl::Result<()> {
    let planted = synth_planted(&SynthConfig::default(), Seed(7))?;
    let ds = &planted.dataset;
    let y = ds.label_matrix()?;
    let hyper = Hyperparams::uniform(ds.num_views(), 1.0, 1000.0, 1000.0);

    let run = run_reference(&ds.views, &y, &hyper, Seed(0))?;
    println!(
        "{} rounds, converged: {}",
        run.objective_trace.len(),
        run.converged
    );
    for (round, value) in run.objective_trace.iter().enumerate() {
        println!("  round {:>3}  objective {value:.6}", round + 1);
    }

    for (k, w) in run.weights().into_iter().enumerate() {
        let mut top = select_top(&score_features(w), 100.0 * 5.0 / 30.0)?;
        top.sort_unstable();
        println!(
            "participant {k}: top columns {top:?}, planted {:?}",
            planted.informative[k]
        );
    }
    Ok(())
}
