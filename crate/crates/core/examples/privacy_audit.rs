//! Recording a federated run's messages and checking that nothing but
//! pseudo-label matrices left a participant.

use mmvfl::data::{synth_planted, SynthConfig};
use mmvfl::federation::{audit_trace, run_federated, FederationConfig, TransportKind};
use mmvfl::numerics::Seed;
use mmvfl::optimizer::Hyperparams;

fn main() -> mmvfl::Result<()> {
    let ds = synth_planted(&SynthConfig::default(), Seed(4))?.dataset;
    let y = ds.label_matrix()?;
    let config = FederationConfig::new(
        Hyperparams::uniform(3, 0.5, 1000.0, 1000.0),
        Seed(0),
        TransportKind::InProcess,
    );
    let run = run_federated(&ds.views, &y, &config)?;

    let mut trace = run.coordinator.trace;
    let report = audit_trace(&trace);
    println!(
        "{} messages, {} with payload, {} bytes, clean: {}",
        report.messages,
        report.payload_messages,
        report.total_bytes,
        report.is_clean()
    );
    for (round, bytes) in report.bytes_per_round.iter().take(3) {
        println!("  round {round}: {bytes} bytes");
    }

    // a participant that ships its raw features is caught
    let leak = trace
        .entries
        .iter_mut()
        .find(|e| e.message.payload.is_some())
        .expect("a payload message");
    leak.message.payload = Some(ds.views[1].clone());
    let report = audit_trace(&trace);
    for v in &report.violations {
        println!("violation at message {}: {}", v.index, v.reason);
    }
    Ok(())
}
