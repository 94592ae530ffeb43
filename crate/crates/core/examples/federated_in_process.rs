//! Coordinator and participants on threads, talking over channels. The result
//! matches the single-process run exactly.

use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::federation::{run_federated, FederationConfig, TransportKind};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::{run_reference, Hyperparams};

fn main() -> mmvfl::Result<()> {
    let planted = synth_planted(&SynthConfig::default(), Seed(1))?;
    let ds = &planted.dataset;
    let y = ds.label_matrix()?;
    let hyper = Hyperparams::uniform(ds.num_views(), 0.5, 1000.0, 1000.0);

    let config = FederationConfig::new(hyper.clone(), Seed(3), TransportKind::InProcess);
    let fed = run_federated(&ds.views, &y, &config)?;
    let reference = run_reference(&ds.views, &y, &hyper, Seed(3))?;

    let c = &fed.coordinator;
    println!("rounds: {}, converged: {}", c.rounds, c.converged);
    println!(
        "final objective: {:.9}",
        c.objective_trace.last().copied().unwrap_or(f64::NAN)
    );
    println!("messages exchanged: {}", c.trace.entries.len());
    println!(
        "identical to reference: {}",
        fed.weights() == reference.weights() && c.z == reference.z
    );
    Ok(())
}
